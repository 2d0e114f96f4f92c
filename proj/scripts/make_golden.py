#!/usr/bin/env python3
"""Regenerates the committed golden scenario configs under golden/."""
import json
import math
import os

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "golden")
PI = math.pi


def undirected(n, edges):
    out = []
    for i, j, w in edges:
        out.append({"from": i, "to": j, "w": w})
        out.append({"from": j, "to": i, "w": w})
    return {"n": n, "edges": out}


def directed(n, edges):
    return {"n": n, "edges": [{"from": i, "to": j, "w": w} for i, j, w in edges]}


def ring_undirected(n, w=1.0):
    return undirected(n, [(i, (i + 1) % n, w) for i in range(n)])


def ring_directed(n, w=1.0):
    return directed(n, [(i, (i + 1) % n, w) for i in range(n)])


GRAPH_B = undirected(4, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0), (1, 3, 1.0), (2, 3, 1.0)])
GRAPH_B_SCALED = undirected(
    4, [(0, 1, 0.1), (0, 2, 0.1), (1, 2, 0.1), (1, 3, 0.1), (2, 3, 0.1)])
GRAPH_A = directed(4, [(0, 2, 1.0), (1, 0, 1.0), (1, 3, 1.0), (2, 1, 2.0), (3, 2, 1.0)])
# 5-agent weight-balanced digraph with unit weights and max degree 2
# (ring plus the 0 -> 2 -> 4 -> 0 chord cycle).
ET_GRAPH = directed(5, [(i, (i + 1) % 5, 1.0) for i in range(5)] +
                    [(0, 2, 1.0), (2, 4, 1.0), (4, 0, 1.0)])


def sin(amp, omega, phase=0.0, offset=0.0):
    return {"kind": "sinusoid", "amp": amp, "omega": omega, "phase": phase,
            "offset": offset}


def cos(amp, omega, offset=0.0):
    return sin(amp, omega, PI / 2.0, offset)


def target_signal(l, drift=True):
    terms = []
    if drift:
        terms.append({"kind": "quadratic_drift", "t_scale": 20.0})
    terms.append(sin(0.5, 0.35 + 0.05 * l, (5 - l) * PI / 5.0))
    terms.append({"kind": "constant", "value": 4.0 - 2.0 * (l - 1)})
    return {"kind": "sum", "terms": terms}


TARGETS = [target_signal(l) for l in range(1, 5)]
TARGETS_NO_DRIFT = [target_signal(l, drift=False) for l in range(1, 5)]

MEASUREMENTS = [
    {"kind": "sampled_stochastic", "a": a, "b": b, "period": 2.0}
    for a, b in [(1.1, -0.55), (1.0, 1.0), (0.9, 0.6), (1.05, -0.9),
                 (0.96, -0.6), (1.0, 0.4)]
]

ET_SIGNALS = [
    sin(0.5, 0.8),
    {"kind": "sum", "terms": [sin(0.5, 0.7), cos(0.5, 0.6)]},
    sin(1.0, 0.2, 0.0, 1.0),
    {"kind": "arctan", "scale": 0.5},
    cos(0.1, 2.0),
]

RAMPS = [{"kind": "polynomial", "coeffs": [c, b]}
         for c, b in [(1.0, 0.0), (-1.0, 0.02), (2.0, 0.04), (0.0, 0.06)]]

FEEDFORWARD_SIGNALS = [
    {"kind": "sum", "terms": [sin(1.0, 0.05), sin(0.5 + e, 0.15)]}
    for e in (0.015, 0.0, 0.0, -0.015)
]

CONSTANTS = [{"kind": "constant", "value": v} for v in (1.0, 3.0, 5.0, 7.0)]

configs = {}

# --- motivating comparison: re-initialized static vs dynamic --------------
for comms, tag in ((3, "3"), (20, "20")):
    period = 2.0 / comms
    steps = 60 * comms
    configs[f"static_reinit_{tag}comm"] = {
        "schema_version": 1, "seed": 20240811, "name": f"static-reinit-{tag}comm",
        "graph": ring_directed(6), "signals": MEASUREMENTS,
        "algorithm": {"type": "dt", "variant": "static", "reinit_every": comms},
        "steps": steps, "sample_period": period,
    }
    configs[f"dynamic_{tag}comm"] = {
        "schema_version": 1, "seed": 20240811, "name": f"dynamic-{tag}comm",
        "graph": ring_directed(6), "signals": MEASUREMENTS,
        "algorithm": {"type": "dt", "variant": "euler_directed_pi",
                      "alpha": 1.0, "beta": 1.0, "delta": period},
        "steps": steps, "sample_period": period,
    }

# --- departure / arrival / perturbation / switching -----------------------
DEPART_ARRIVE = [
    {"time": 10.0, "kind": "depart", "agent": 3},
    {"time": 20.0, "kind": "arrive", "signal": target_signal(4),
     "graph": ring_undirected(4)},
]
configs["departure_arrival"] = {
    "schema_version": 1, "seed": 1, "name": "departure-arrival",
    "graph": ring_undirected(4), "signals": TARGETS,
    "algorithm": {"type": "ct", "variant": "basic_dac"},
    "horizon": 40.0, "dt": 0.001, "events": DEPART_ARRIVE,
    "store_internal": True,
}
configs["input_perturbation"] = {
    "schema_version": 1, "seed": 1, "name": "input-perturbation",
    "graph": ring_undirected(4), "signals": TARGETS,
    "algorithm": {"type": "ct", "variant": "basic_dac"},
    "horizon": 40.0, "dt": 0.001,
    "events": [
        {"time": 0.0, "kind": "perturb", "agent": 0, "until": 2.0,
         "signal": cos(-4.0, 1.0)},
        {"time": 3.0, "kind": "perturb", "agent": 0, "until": 5.0,
         "signal": cos(-4.0, 1.0)},
    ],
    "store_internal": True,
}
configs["switching_topology"] = {
    "schema_version": 1, "seed": 1, "name": "switching-topology",
    "graph": undirected(4, [(0, 1, 1.0), (2, 3, 1.0)]),
    "signals": TARGETS,
    "algorithm": {"type": "ct", "variant": "basic_dac"},
    "horizon": 40.0, "dt": 0.001,
    "events": [
        {"time": 5.0, "kind": "switch",
         "graph": undirected(4, [(1, 2, 1.0), (3, 0, 1.0)])},
        {"time": 10.0, "kind": "switch", "graph": ring_undirected(4)},
    ],
    "store_internal": True,
}
configs["departure_arrival_pi"] = {
    "schema_version": 1, "seed": 1, "name": "departure-arrival-pi",
    "graph": ring_undirected(4), "signals": TARGETS,
    "algorithm": {"type": "ct", "variant": "pi_dac", "alpha": 1.0,
                  "beta_scale": 1.0},
    "horizon": 40.0, "dt": 0.001, "events": DEPART_ARRIVE,
    "store_internal": True,
}

# --- tracking-error bounds -------------------------------------------------
configs["bound_integrator"] = {
    "schema_version": 1, "seed": 1, "name": "bound-integrator",
    "graph_file": "graphs/graph_b.json", "signals": TARGETS_NO_DRIFT,
    "algorithm": {"type": "ct", "variant": "basic_dac"},
    "horizon": 120.0, "dt": 0.001, "store_internal": True,
}
for beta in (1, 2, 4):
    configs[f"bound_directed_pi_beta{beta}"] = {
        "schema_version": 1, "seed": 1, "name": f"bound-directed-pi-beta{beta}",
        "graph_file": "graphs/graph_b.json", "signals": TARGETS_NO_DRIFT,
        "algorithm": {"type": "ct", "variant": "directed_pi_dac",
                      "alpha": 1.0, "beta": float(beta)},
        "horizon": 120.0, "dt": 0.001,
    }

# --- initialization bias ----------------------------------------------------
BAD_P = [1.0, 0.5, 0.25, 0.25]  # sums to 2
configs["bias_basic"] = {
    "schema_version": 1, "seed": 1, "name": "bias-basic",
    "graph_file": "graphs/graph_b.json", "signals": CONSTANTS,
    "algorithm": {"type": "ct", "variant": "basic_dac"},
    "horizon": 30.0, "dt": 0.001, "init": {"p": BAD_P},
    "store_internal": True,
}
configs["bias_pidac"] = {
    "schema_version": 1, "seed": 1, "name": "bias-pidac",
    "graph_file": "graphs/graph_b.json", "signals": CONSTANTS,
    "algorithm": {"type": "ct", "variant": "pi_dac", "alpha": 1.0,
                  "beta_scale": 1.0},
    "horizon": 60.0, "dt": 0.001, "init": {"p": BAD_P},
}
configs["bias_pi_dt"] = {
    "schema_version": 1, "seed": 1, "name": "bias-pi-dt",
    "graph_file": "graphs/graph_b.json", "signals": CONSTANTS,
    "algorithm": {"type": "dt", "variant": "pi", "auto_gains": True},
    "steps": 500, "sample_period": 1.0, "init": {"p": BAD_P},
}

# --- polynomial cascades -----------------------------------------------------
for m in (1, 2):
    configs[f"poly_p_m{m}"] = {
        "schema_version": 1, "seed": 1, "name": f"poly-p-m{m}",
        "graph_file": "graphs/graph_b.json", "signals": RAMPS,
        "algorithm": {"type": "dt", "variant": "poly_cascade_p", "m": m},
        "steps": 600, "sample_period": 1.0,
    }
configs["poly_zm_m2"] = {
    "schema_version": 1, "seed": 1, "name": "poly-zm-m2",
    "graph_file": "graphs/graph_b.json", "signals": RAMPS,
    "algorithm": {"type": "dt", "variant": "poly_cascade_zm", "m": 2},
    "steps": 600, "sample_period": 1.0,
}

# --- bandlimited feedforward -------------------------------------------------
for m in range(1, 6):
    configs[f"feedforward_m{m}"] = {
        "schema_version": 1, "seed": 1, "name": f"feedforward-m{m}",
        "graph_file": "graphs/graph_b_scaled01.json",
        "signals": FEEDFORWARD_SIGNALS,
        "algorithm": {"type": "dt", "variant": "feedforward", "m": m,
                      "theta_c": 0.3, "q": 3, "delta": 1.0},
        "steps": 3000, "sample_period": 1.0,
    }

# --- sliding mode ------------------------------------------------------------
configs["sliding_ring4"] = {
    "schema_version": 1, "seed": 1, "name": "sliding-ring4",
    "graph_file": "graphs/ring4.json", "signals": TARGETS_NO_DRIFT,
    "algorithm": {"type": "ct", "variant": "sliding_basic"},
    "horizon": 20.0, "dt": 0.001, "store_internal": True,
}

# --- event-triggered ---------------------------------------------------------
configs["et_five_agents"] = {
    "schema_version": 1, "seed": 1, "name": "et-five-agents",
    "graph_file": "graphs/et_digraph5.json", "signals": ET_SIGNALS,
    "algorithm": {"type": "et", "alpha": 1.0, "beta": 4.0, "law": "relative",
                  "eps_scaled": 0.1},
    "horizon": 20.0, "dt": 0.01,
}
configs["et_periodic_baseline"] = {
    "schema_version": 1, "seed": 1, "name": "et-periodic-baseline",
    "graph_file": "graphs/et_digraph5.json", "signals": ET_SIGNALS,
    "algorithm": {"type": "dt", "variant": "euler_directed_pi",
                  "alpha": 1.0, "beta": 4.0, "delta": 0.12},
    "steps": 167, "sample_period": 0.12,
}

graphs = {
    "graph_a": GRAPH_A,
    "graph_b": GRAPH_B,
    "graph_b_scaled01": GRAPH_B_SCALED,
    "ring4": ring_undirected(4),
    "ring6_directed": ring_directed(6),
    "et_digraph5": ET_GRAPH,
}


def main():
    os.makedirs(os.path.join(ROOT, "graphs"), exist_ok=True)
    for name, g in graphs.items():
        with open(os.path.join(ROOT, "graphs", name + ".json"), "w") as f:
            json.dump(g, f, indent=1, sort_keys=True)
            f.write("\n")
    for name, cfg in configs.items():
        with open(os.path.join(ROOT, name + ".json"), "w") as f:
            json.dump(cfg, f, indent=1, sort_keys=True)
            f.write("\n")
    print(f"wrote {len(graphs)} graphs, {len(configs)} configs")


if __name__ == "__main__":
    main()

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dacs/analysis.hpp"
#include "dacs/ct_engine.hpp"
#include "dacs/dt_engine.hpp"
#include "dacs/event_triggered.hpp"
#include "dacs/graph.hpp"
#include "dacs/signals.hpp"

namespace dacs::scenario {

using json = nlohmann::json;

struct EtSpec {
  double alpha = 1.0;
  double beta = 1.0;
  et::TriggerLaw law;
};

struct Departure {
  double time = 0.0;
  int agent = 0;
  std::optional<WeightedDigraph> graph;  // post-departure topology override
};

struct Arrival {
  double time = 0.0;
  signals::SignalPtr signal;
  WeightedDigraph graph;  // post-arrival topology
};

struct InitOverride {
  std::optional<Vector> p, q, x;
};

/// Declarative experiment. Parsing is fail-closed: unknown JSON keys are
/// rejected with their path.
struct ScenarioConfig {
  int schema_version = 1;
  std::uint64_t seed = 0;
  std::string name;

  WeightedDigraph graph;
  std::optional<TopologySchedule> schedule;  // from "switch" events

  signals::SignalBundle bundle;       // what the algorithm consumes
  signals::SignalBundle base_bundle;  // unperturbed, for the true average

  std::variant<ct::CtAlgorithmSpec, dt::DtAlgorithmSpec, EtSpec> algorithm;

  double horizon = 0.0;       // CT / ET
  double dt = 0.0;            // CT / ET grid
  double sample_period = 1.0; // DT
  int steps = 0;              // DT

  std::vector<Departure> departures;  // time-sorted
  std::vector<Arrival> arrivals;
  bool has_perturbations = false;

  InitOverride init;
  double tail_fraction = 0.2;
  bool store_internal = false;

  json raw;  // canonical form for round-tripping
};

ScenarioConfig parse_config(const json& j, const std::string& base_dir = ".");
ScenarioConfig load_config(const std::string& path);

json graph_to_json(const WeightedDigraph& g);
WeightedDigraph graph_from_json(const json& j);
json signal_to_json(const signals::SignalPtr& s);
signals::SignalPtr signal_from_json(const json& j, std::uint64_t default_seed);

struct RunArtifacts {
  std::string trajectory_csv;
  std::string metrics_json;
  std::string events_json;  // ET runs only
  analysis::MetricsReport metrics;
  bool bounds_ok = true;
};

RunArtifacts run(const ScenarioConfig& config, const std::string& out_dir,
                 bool check_bounds = false);

struct RateRow {
  std::string variant;
  double rho_formula = 0.0;
  double radius = 0.0;
  bool pass = false;
};

struct RateReport {
  std::vector<RateRow> rows;  // one per (graph, variant)
  bool all_pass = true;
  std::string sweep_csv;  // written rho-vs-lambda_r curves
};

/// Closed-form gain verification: per variant, closed-loop disagreement radius vs
/// the closed-form rho (tolerance 1e-8) on the given graphs; also emits the
/// 200-point rate-curve sweep CSV.
RateReport verify_rates(const std::vector<WeightedDigraph>& graphs,
                        const std::string& out_dir);

std::vector<WeightedDigraph> random_connected_graphs(int count, int n_min, int n_max,
                                                     std::uint64_t seed);

/// The four-node connected example graph with unit weights (spectrum
/// {0, 2, 4, 4}).
WeightedDigraph example_graph_b();
/// The four-node strongly connected weight-balanced digraph example.
WeightedDigraph example_graph_a();

struct CompareReport {
  std::string metric;
  double value_a = 0.0;
  double value_b = 0.0;
  std::string winner;  // "a", "b", or "tie"
};

CompareReport compare(const ScenarioConfig& a, const ScenarioConfig& b,
                      const std::string& metric, const std::string& out_dir);

/// gamma estimate used by --check-bounds: grid max of the projected input
/// rate (1 ms grid unless the run grid is coarser).
double estimate_gamma(const ScenarioConfig& config);

}  // namespace dacs::scenario

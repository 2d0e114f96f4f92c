#include "dacs/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace dacs::scenario {

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::runtime_error("config: " + path + ": " + msg);
}

/// Fail-closed object reader: every key must be consumed exactly once.
class Strict {
 public:
  Strict(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }
  ~Strict() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(path_ + "." + it.key(), "unknown field");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  T get(const std::string& key) {
    if (!j_.contains(key)) fail(path_ + "." + key, "missing required field");
    seen_.insert(key);
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception& e) {
      fail(path_ + "." + key, e.what());
    }
  }

  template <class T>
  T get_or(const std::string& key, T fallback) {
    if (!j_.contains(key)) return fallback;
    return get<T>(key);
  }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) fail(path_ + "." + key, "missing required field");
    seen_.insert(key);
    return j_.at(key);
  }

  const json* raw_opt(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  const std::string& path() const { return path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

WeightedDigraph remove_agent(const WeightedDigraph& g, int pos) {
  const int n = g.n();
  Matrix w(n - 1, n - 1);
  for (int i = 0, ri = 0; i < n; ++i) {
    if (i == pos) continue;
    for (int j = 0, rj = 0; j < n; ++j) {
      if (j == pos) continue;
      w(ri, rj++) = g.weights()(i, j);
    }
    ++ri;
  }
  return WeightedDigraph(std::move(w));
}

Vector erase_entry(const Vector& v, int pos) {
  Vector out(v.size() - 1);
  for (int i = 0, r = 0; i < v.size(); ++i)
    if (i != pos) out(r++) = v(i);
  return out;
}

Vector append_entry(const Vector& v, double value) {
  Vector out(v.size() + 1);
  out.head(v.size()) = v;
  out(v.size()) = value;
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// JSON forms

json graph_to_json(const WeightedDigraph& g) {
  json edges = json::array();
  for (int i = 0; i < g.n(); ++i)
    for (int j = 0; j < g.n(); ++j)
      if (g.weights()(i, j) > 0.0)
        edges.push_back({{"from", i}, {"to", j}, {"w", g.weights()(i, j)}});
  return json{{"n", g.n()}, {"edges", edges}};
}

WeightedDigraph graph_from_json(const json& j) {
  Strict s(j, "graph");
  const int n = s.get<int>("n");
  std::vector<std::tuple<int, int, double>> edges;
  for (const auto& e : s.raw("edges")) {
    Strict se(e, "graph.edges[]");
    edges.emplace_back(se.get<int>("from"), se.get<int>("to"), se.get<double>("w"));
  }
  return WeightedDigraph::from_edges(n, edges);
}

signals::SignalPtr signal_from_json(const json& j, std::uint64_t default_seed) {
  Strict s(j, "signal");
  const auto kind = s.get<std::string>("kind");
  if (kind == "constant") return signals::constant(s.get<double>("value"));
  if (kind == "polynomial")
    return signals::polynomial(s.get<std::vector<double>>("coeffs"));
  if (kind == "sinusoid")
    return signals::sinusoid(s.get<double>("amp"), s.get<double>("omega"),
                             s.get_or<double>("phase", 0.0),
                             s.get_or<double>("offset", 0.0));
  if (kind == "quadratic_drift")
    return signals::quadratic_drift(s.get<double>("t_scale"));
  if (kind == "arctan") return signals::arctan(s.get<double>("scale"));
  if (kind == "sum") {
    std::vector<signals::SignalPtr> terms;
    for (const auto& t : s.raw("terms")) terms.push_back(signal_from_json(t, default_seed));
    return signals::sum(std::move(terms));
  }
  if (kind == "sampled_stochastic")
    return signals::sampled_stochastic(
        s.get<double>("a"), s.get<double>("b"), s.get<double>("period"),
        s.get_or<std::uint64_t>("seed", default_seed));
  if (kind == "zero_order_hold")
    return signals::zero_order_hold(signal_from_json(s.raw("inner"), default_seed),
                                    s.get<double>("period"));
  if (kind == "windowed")
    return signals::windowed(signal_from_json(s.raw("inner"), default_seed),
                             s.get<double>("t_start"), s.get<double>("t_end"));
  fail("signal.kind", "unknown kind '" + kind + "'");
}

json signal_to_json(const signals::SignalPtr& s) {
  using namespace signals;
  struct V {
    json operator()(const Constant& c) const {
      return {{"kind", "constant"}, {"value", c.value}};
    }
    json operator()(const Polynomial& p) const {
      return {{"kind", "polynomial"}, {"coeffs", p.coeffs}};
    }
    json operator()(const Sinusoid& x) const {
      return {{"kind", "sinusoid"}, {"amp", x.amp}, {"omega", x.omega},
              {"phase", x.phase}, {"offset", x.offset}};
    }
    json operator()(const QuadraticDrift& x) const {
      return {{"kind", "quadratic_drift"}, {"t_scale", x.t_scale}};
    }
    json operator()(const Arctan& x) const {
      return {{"kind", "arctan"}, {"scale", x.scale}};
    }
    json operator()(const Sum& x) const {
      json terms = json::array();
      for (const auto& t : x.terms) terms.push_back(signal_to_json(t));
      return {{"kind", "sum"}, {"terms", terms}};
    }
    json operator()(const SampledStochastic& x) const {
      return {{"kind", "sampled_stochastic"}, {"a", x.a}, {"b", x.b},
              {"period", x.sample_period}, {"seed", x.seed}};
    }
    json operator()(const ZeroOrderHold& x) const {
      return {{"kind", "zero_order_hold"}, {"inner", signal_to_json(x.inner)},
              {"period", x.sample_period}};
    }
    json operator()(const Windowed& x) const {
      return {{"kind", "windowed"}, {"inner", signal_to_json(x.inner)},
              {"t_start", x.t_start}, {"t_end", x.t_end}};
    }
  };
  return std::visit(V{}, s->node);
}

namespace {

ct::CtAlgorithmSpec parse_ct(Strict& s, const ScenarioConfig& cfg) {
  const auto variant = s.get<std::string>("variant");
  if (variant == "basic_dac") return ct::BasicDac{};
  if (variant == "pi_dac")
    return ct::PiDac{s.get_or<double>("alpha", 1.0), s.get_or<double>("beta_scale", 1.0)};
  if (variant == "foi_dac")
    return ct::FoiDac{s.get<double>("epsilon"), s.get<double>("beta"),
                      s.get_or<double>("li_scale", 1.0)};
  if (variant == "directed_pi_dac")
    return ct::DirectedPiDac{s.get_or<double>("alpha", 1.0), s.get_or<double>("beta", 1.0)};

  auto kp_value = [&]() -> double {
    if (s.has("kp")) return s.get<double>("kp");
    // Default sliding gain 2 gamma sqrt(n), gamma from the full input rate.
    double gamma = 0.0;
    const double grid = 1e-3;
    for (double t = 0.0; t <= cfg.horizon; t += grid) {
      double norm2 = 0.0;
      for (const auto& sig : cfg.base_bundle) {
        double d = signals::derivative(*sig, t, 1);
        norm2 += d * d;
      }
      gamma = std::max(gamma, std::sqrt(norm2));
    }
    return ct::default_sliding_gain(gamma, static_cast<int>(cfg.base_bundle.size()));
  };
  if (variant == "sliding_basic") return ct::SlidingBasic{kp_value()};
  if (variant == "sliding_two_hop") return ct::SlidingTwoHop{kp_value()};
  if (variant == "sliding_one_hop")
    return ct::SlidingOneHop{kp_value(), s.get_or<double>("alpha", 1.0)};
  if (variant == "sliding_robust") return ct::SlidingRobust{kp_value()};
  fail("algorithm.variant", "unknown ct variant '" + variant + "'");
}

dt::DtAlgorithmSpec parse_dt(Strict& s, const ScenarioConfig& cfg) {
  const auto variant = s.get<std::string>("variant");
  const bool auto_gains = s.get_or<bool>("auto_gains", false);
  auto gains = [&](dt::RateVariant v) {
    auto sp = spectrum(cfg.graph);
    return dt::optimal_params(v, sp.lambda2, sp.lambdaN);
  };
  if (variant == "static")
    return dt::StaticConsensus{s.get_or<int>("reinit_every", 0),
                               s.get_or<double>("delta", 0.0)};
  if (variant == "p") {
    if (auto_gains) return dt::P{gains(dt::RateVariant::P).kI};
    return dt::P{s.get<double>("kI")};
  }
  if (variant == "accel_p") {
    if (auto_gains) {
      auto g = gains(dt::RateVariant::AccelP);
      return dt::AccelP{g.kI, g.rho};
    }
    return dt::AccelP{s.get<double>("kI"), s.get<double>("rho")};
  }
  if (variant == "pi") {
    if (auto_gains) {
      auto g = gains(dt::RateVariant::PI);
      return dt::PI{g.kI, *g.kp, g.rho};
    }
    return dt::PI{s.get<double>("kI"), s.get<double>("kp"), s.get<double>("rho")};
  }
  if (variant == "accel_pi") {
    if (auto_gains) {
      auto g = gains(dt::RateVariant::AccelPI);
      return dt::AccelPI{g.kI, *g.kp, g.rho};
    }
    return dt::AccelPI{s.get<double>("kI"), s.get<double>("kp"), s.get<double>("rho")};
  }
  if (variant == "poly_cascade_zm")
    return dt::PolyCascadeZM{s.get<int>("m"), s.get_or<double>("delta", 0.0)};
  if (variant == "poly_cascade_p")
    return dt::PolyCascadeP{s.get<int>("m"), s.get_or<double>("delta", 0.0)};
  if (variant == "feedforward") {
    dt::Feedforward ff;
    ff.m = s.get<int>("m");
    ff.delta = s.get_or<double>("delta", 0.0);
    if (s.has("num")) {
      ff.prefilter.num = s.get<std::vector<double>>("num");
      ff.prefilter.den = s.get<std::vector<double>>("den");
      if (ff.prefilter.den.empty() || ff.prefilter.den[0] != 1.0)
        fail("algorithm.den", "denominator must be monic in z^-1 (den[0] = 1)");
      if (ff.prefilter.num.size() > ff.prefilter.den.size())
        fail("algorithm.num", "prefilter must be proper (num order <= den order)");
    } else {
      ff.prefilter = dt::design_prefilter(ff.m, s.get<double>("theta_c"),
                                          s.get_or<int>("q", 3));
    }
    return ff;
  }
  if (variant == "euler_directed_pi")
    return dt::EulerDirectedPi{s.get_or<double>("alpha", 1.0),
                               s.get_or<double>("beta", 1.0), s.get<double>("delta")};
  fail("algorithm.variant", "unknown dt variant '" + variant + "'");
}

EtSpec parse_et(Strict& s, const ScenarioConfig& cfg) {
  EtSpec spec;
  spec.alpha = s.get_or<double>("alpha", 1.0);
  spec.beta = s.get_or<double>("beta", 1.0);
  const auto law = s.get_or<std::string>("law", "absolute");

  std::vector<double> eps;
  if (s.has("eps")) {
    eps = s.get<std::vector<double>>("eps");
  } else {
    // eps_i = 2 sqrt(d_i) * eps_scaled (matched error-floor form).
    const double scaled = s.get<double>("eps_scaled");
    for (int i = 0; i < cfg.graph.n(); ++i)
      eps.push_back(2.0 * std::sqrt(cfg.graph.weights().row(i).sum()) * scaled);
  }
  if (law == "absolute")
    spec.law = et::Absolute{std::move(eps)};
  else if (law == "relative")
    spec.law = et::Relative{std::move(eps)};
  else
    fail("algorithm.law", "unknown trigger law '" + law + "'");
  return spec;
}

}  // namespace

ScenarioConfig parse_config(const json& j, const std::string& base_dir) {
  ScenarioConfig cfg;
  cfg.raw = j;
  Strict s(j, "");

  cfg.schema_version = s.get<int>("schema_version");
  if (cfg.schema_version != 1) fail("schema_version", "unsupported schema version");
  cfg.seed = s.get_or<std::uint64_t>("seed", 0);
  cfg.name = s.get_or<std::string>("name", "");

  if (s.has("graph_file")) {
    std::ifstream in(std::filesystem::path(base_dir) /
                     s.get<std::string>("graph_file"));
    if (!in) fail("graph_file", "cannot open file");
    cfg.graph = graph_from_json(json::parse(in));
  } else {
    cfg.graph = graph_from_json(s.raw("graph"));
  }

  for (const auto& sig : s.raw("signals"))
    cfg.base_bundle.push_back(signal_from_json(sig, cfg.seed));
  if (static_cast<int>(cfg.base_bundle.size()) != cfg.graph.n())
    fail("signals", "bundle size does not match agent count");
  cfg.bundle = cfg.base_bundle;

  cfg.horizon = s.get_or<double>("horizon", 0.0);
  cfg.dt = s.get_or<double>("dt", 0.0);
  cfg.steps = s.get_or<int>("steps", 0);
  cfg.sample_period = s.get_or<double>("sample_period", 1.0);
  cfg.tail_fraction = s.get_or<double>("tail_fraction", 0.2);
  cfg.store_internal = s.get_or<bool>("store_internal", false);

  // Events: perturbations fold into the consumed bundle; switches build the
  // topology schedule; departures/arrivals segment the CT run.
  std::vector<TopologySegment> switch_segments{{0.0, cfg.graph}};
  if (const json* events = s.raw_opt("events")) {
    double prev_time = -1.0;
    for (const auto& e : *events) {
      Strict se(e, "events[]");
      const double time = se.get<double>("time");
      const auto kind = se.get<std::string>("kind");
      if (time < prev_time) fail("events", "events must be time-sorted");
      prev_time = time;
      if (kind == "depart") {
        Departure d;
        d.time = time;
        d.agent = se.get<int>("agent");
        if (se.has("graph")) d.graph = graph_from_json(se.raw("graph"));
        cfg.departures.push_back(std::move(d));
      } else if (kind == "arrive") {
        Arrival a;
        a.time = time;
        a.signal = signal_from_json(se.raw("signal"), cfg.seed);
        a.graph = graph_from_json(se.raw("graph"));
        cfg.arrivals.push_back(std::move(a));
      } else if (kind == "perturb") {
        const int agent = se.get<int>("agent");
        if (agent < 0 || agent >= cfg.graph.n())
          fail("events", "perturbed agent does not exist");
        auto w = signals::windowed(signal_from_json(se.raw("signal"), cfg.seed), time,
                                   se.get<double>("until"));
        cfg.bundle[agent] = signals::sum({cfg.bundle[agent], w});
        cfg.has_perturbations = true;
      } else if (kind == "switch") {
        switch_segments.push_back({time, graph_from_json(se.raw("graph"))});
      } else {
        fail("events.kind", "unknown event kind '" + kind + "'");
      }
    }
  }
  if (switch_segments.size() > 1) {
    double dwell = std::numeric_limits<double>::infinity();
    for (size_t k = 1; k < switch_segments.size(); ++k)
      dwell = std::min(dwell, switch_segments[k].start - switch_segments[k - 1].start);
    for (const auto& seg : switch_segments)
      if (seg.graph.n() != cfg.graph.n())
        fail("events", "switch graph must keep the agent count");
    cfg.schedule = TopologySchedule{std::move(switch_segments), dwell};
    if (!cfg.departures.empty() || !cfg.arrivals.empty())
      fail("events", "switching cannot be combined with departures/arrivals");
  }

  if (const json* init = s.raw_opt("init")) {
    Strict si(*init, "init");
    auto vec = [&](const char* key) -> std::optional<Vector> {
      if (!si.has(key)) return std::nullopt;
      auto values = si.get<std::vector<double>>(key);
      return Eigen::Map<Vector>(values.data(), values.size()).eval();
    };
    cfg.init.p = vec("p");
    cfg.init.q = vec("q");
    cfg.init.x = vec("x");
  }

  Strict sa(s.raw("algorithm"), "algorithm");
  const auto type = sa.get<std::string>("type");
  if (type == "ct") {
    cfg.algorithm = parse_ct(sa, cfg);
    if (cfg.horizon <= 0.0 || cfg.dt <= 0.0) fail("horizon", "ct runs need horizon and dt");
  } else if (type == "dt") {
    cfg.algorithm = parse_dt(sa, cfg);
    if (cfg.steps <= 0) fail("steps", "dt runs need steps");
    if (!cfg.departures.empty() || !cfg.arrivals.empty())
      fail("events", "departures/arrivals are only supported for ct runs");
  } else if (type == "et") {
    cfg.algorithm = parse_et(sa, cfg);
    if (cfg.horizon <= 0.0 || cfg.dt <= 0.0) fail("horizon", "et runs need horizon and dt");
    if (!cfg.departures.empty() || !cfg.arrivals.empty() || cfg.schedule)
      fail("events", "event-triggered runs do not support topology events");
  } else {
    fail("algorithm.type", "unknown type '" + type + "'");
  }
  return cfg;
}

ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  json j = json::parse(in);
  return parse_config(j, std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Execution

namespace {

void apply_ct_init(const InitOverride& init, ct::CtState& st) {
  if (init.p) st.p = *init.p;
  if (init.q) st.q = *init.q;
  if (init.x) st.x = *init.x;
}

double base_average(const signals::SignalBundle& base, const std::vector<int>& ids,
                    double t) {
  double sum = 0.0;
  for (int id : ids) sum += signals::evaluate(*base[id], t);
  return sum / ids.size();
}

Trajectory run_ct(const ScenarioConfig& cfg) {
  const auto& spec = std::get<ct::CtAlgorithmSpec>(cfg.algorithm);
  WeightedDigraph g = cfg.graph;
  signals::SignalBundle bundle = cfg.bundle;
  // Unperturbed signals by global agent id, for the true-average repair.
  signals::SignalBundle base_by_id = cfg.base_bundle;
  std::vector<int> ids(g.n());
  for (int i = 0; i < g.n(); ++i) ids[i] = i;
  int next_id = g.n();

  ct::CtState state = ct::make_initial_state(spec, g.n(), bundle, 0.0);
  apply_ct_init(cfg.init, state);

  struct Boundary {
    double time;
    const Departure* departure = nullptr;
    const Arrival* arrival = nullptr;
  };
  std::vector<Boundary> boundaries;
  for (const auto& d : cfg.departures) boundaries.push_back({d.time, &d, nullptr});
  for (const auto& a : cfg.arrivals) boundaries.push_back({a.time, nullptr, &a});
  std::sort(boundaries.begin(), boundaries.end(),
            [](const auto& a, const auto& b) { return a.time < b.time; });

  Trajectory traj;
  traj.algorithm = ct::variant_name(spec);
  traj.dt = cfg.dt;
  ct::CtRunOptions opts;
  opts.store_internal = cfg.store_internal;
  opts.schedule = cfg.schedule;

  if (cfg.schedule) {
    traj = ct::integrate(spec, g, bundle, state, cfg.horizon, cfg.dt, opts);
    return traj;
  }

  bool first = true;
  for (size_t b = 0; b <= boundaries.size(); ++b) {
    const double t_stop = b < boundaries.size() ? boundaries[b].time : cfg.horizon;
    if (t_stop > state.t) {
      opts.agent_ids = ids;
      ct::integrate_segment(traj, spec, g, bundle, state, t_stop, cfg.dt, opts, first);
      first = false;
    }
    if (b == boundaries.size()) break;
    if (const Departure* d = boundaries[b].departure) {
      auto at = std::find(ids.begin(), ids.end(), d->agent);
      if (at == ids.end()) fail("events", "departing agent is not active");
      const int pos = static_cast<int>(at - ids.begin());
      ids.erase(at);
      g = d->graph ? *d->graph : remove_agent(g, pos);
      if (g.n() != static_cast<int>(ids.size()))
        fail("events", "post-departure graph size mismatch");
      bundle.erase(bundle.begin() + pos);
      if (state.p.size()) state.p = erase_entry(state.p, pos);
      if (state.q.size()) state.q = erase_entry(state.q, pos);
      if (state.z.size()) state.z = erase_entry(state.z, pos);
      if (state.x.size()) state.x = erase_entry(state.x, pos);
    } else if (const Arrival* a = boundaries[b].arrival) {
      ids.push_back(next_id++);
      g = a->graph;
      if (g.n() != static_cast<int>(ids.size()))
        fail("events", "post-arrival graph size mismatch");
      bundle.push_back(a->signal);
      base_by_id.push_back(a->signal);
      // New agent starts with zeroed internal states (p = q = 0).
      if (state.p.size()) state.p = append_entry(state.p, 0.0);
      if (state.q.size()) state.q = append_entry(state.q, 0.0);
      if (state.z.size()) state.z = append_entry(state.z, 0.0);
      if (state.x.size())
        state.x = append_entry(state.x, signals::evaluate(*a->signal, state.t));
    }
  }
  if (cfg.has_perturbations)
    for (size_t k = 0; k < traj.steps(); ++k)
      traj.u_avg[k] = base_average(base_by_id, traj.agent_ids[k], traj.t[k]);
  return traj;
}

Trajectory run_dt(const ScenarioConfig& cfg) {
  const auto& spec = std::get<dt::DtAlgorithmSpec>(cfg.algorithm);
  dt::DtRunOptions opts;
  opts.store_internal = cfg.store_internal;
  opts.schedule = cfg.schedule;

  std::optional<dt::DtState> init;
  if (cfg.init.p || cfg.init.q || cfg.init.x) {
    Vector u0(cfg.graph.n());
    for (int i = 0; i < cfg.graph.n(); ++i)
      u0(i) = signals::evaluate(*cfg.bundle[i], 0.0);
    dt::DtState st = dt::make_initial_state(spec, cfg.graph.n(), u0);
    if (cfg.init.p) {
      st.p = *cfg.init.p;
      st.p_prev = *cfg.init.p;
    }
    if (cfg.init.q) {
      st.q = *cfg.init.q;
      st.q_prev = *cfg.init.q;
    }
    if (cfg.init.x) st.x = *cfg.init.x;
    init = std::move(st);
  }
  return dt::simulate_dt(spec, cfg.graph, cfg.bundle, cfg.sample_period, cfg.steps,
                         std::move(init), opts);
}

void fix_true_average(Trajectory& traj, const ScenarioConfig& cfg) {
  if (!cfg.has_perturbations) return;
  for (size_t k = 0; k < traj.steps(); ++k)
    traj.u_avg[k] = base_average(cfg.base_bundle, traj.agent_ids[k], traj.t[k]);
}

}  // namespace

double estimate_gamma(const ScenarioConfig& cfg) {
  const double horizon =
      cfg.horizon > 0.0 ? cfg.horizon : cfg.steps * cfg.sample_period;
  return signals::uncommon_rate_bound(cfg.base_bundle, horizon, 1e-3);
}

RunArtifacts run(const ScenarioConfig& cfg, const std::string& out_dir,
                 bool check_bounds) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  Trajectory traj;
  std::optional<et::EventLog> events;
  if (std::holds_alternative<ct::CtAlgorithmSpec>(cfg.algorithm)) {
    traj = run_ct(cfg);  // repairs the true average itself (arrivals)
  } else if (std::holds_alternative<dt::DtAlgorithmSpec>(cfg.algorithm)) {
    traj = run_dt(cfg);
    fix_true_average(traj, cfg);
  } else {
    const auto& spec = std::get<EtSpec>(cfg.algorithm);
    auto result = et::simulate_et(spec.alpha, spec.beta, spec.law, cfg.graph,
                                  cfg.bundle, cfg.horizon, cfg.dt,
                                  cfg.store_internal);
    traj = std::move(result.trajectory);
    events = std::move(result.events);
    fix_true_average(traj, cfg);
  }
  traj.graph_id = cfg.name;

  RunArtifacts artifacts;
  artifacts.metrics = analysis::compute_metrics(traj, cfg.tail_fraction);

  if (check_bounds) {
    const double gamma = estimate_gamma(cfg);
    auto add = [&](const std::string& name, double bound) {
      analysis::BoundCheck check;
      check.name = name;
      check.bound = bound;
      check.measured = artifacts.metrics.tail_sup_error;
      check.satisfied = check.measured <= bound;
      artifacts.metrics.bounds.push_back(check);
      artifacts.bounds_ok = artifacts.bounds_ok && check.satisfied;
    };
    if (auto* ct_spec = std::get_if<ct::CtAlgorithmSpec>(&cfg.algorithm)) {
      if (std::holds_alternative<ct::BasicDac>(*ct_spec) ||
          std::holds_alternative<ct::PiDac>(*ct_spec) ||
          std::holds_alternative<ct::DirectedPiDac>(*ct_spec))
        add("ultimate_bound", ct::ultimate_bound(*ct_spec, cfg.graph, gamma));
    } else if (auto* et_spec = std::get_if<EtSpec>(&cfg.algorithm)) {
      const auto& eps = std::holds_alternative<et::Absolute>(et_spec->law)
                            ? std::get<et::Absolute>(et_spec->law).eps
                            : std::get<et::Relative>(et_spec->law).eps;
      add("et_error_bound",
          et::et_error_bound(cfg.graph, et_spec->beta, eps, gamma));
    }
  }

  artifacts.trajectory_csv = (fs::path(out_dir) / "trajectory.csv").string();
  write_csv(traj, artifacts.trajectory_csv);
  artifacts.metrics_json = (fs::path(out_dir) / "metrics.json").string();
  write_text_atomic(artifacts.metrics_json, artifacts.metrics.to_json());
  if (events) {
    artifacts.events_json = (fs::path(out_dir) / "events.json").string();
    write_text_atomic(artifacts.events_json, events->to_json());
  }
  return artifacts;
}

// ---------------------------------------------------------------------------
// Rate verification and comparison

WeightedDigraph example_graph_b() {
  Matrix w(4, 4);
  w << 0, 1, 1, 0,
       1, 0, 1, 1,
       1, 1, 0, 1,
       0, 1, 1, 0;
  return WeightedDigraph(w);
}

WeightedDigraph example_graph_a() {
  Matrix w = Matrix::Zero(4, 4);
  w(0, 2) = 1;
  w(1, 0) = 1;
  w(1, 3) = 1;
  w(2, 1) = 2;
  w(3, 2) = 1;
  return WeightedDigraph(w);
}

std::vector<WeightedDigraph> random_connected_graphs(int count, int n_min, int n_max,
                                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> weight(0.5, 2.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<WeightedDigraph> graphs;
  while (static_cast<int>(graphs.size()) < count) {
    int n = n_min + static_cast<int>(rng() % (n_max - n_min + 1));
    Matrix w = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (coin(rng) < 0.5) w(i, j) = w(j, i) = weight(rng);
    WeightedDigraph g(std::move(w));
    if (is_strongly_connected(g)) graphs.push_back(std::move(g));
  }
  return graphs;
}

RateReport verify_rates(const std::vector<WeightedDigraph>& graphs,
                        const std::string& out_dir) {
  RateReport report;
  const std::pair<dt::RateVariant, std::string> variants[] = {
      {dt::RateVariant::P, "p"},
      {dt::RateVariant::AccelP, "accel_p"},
      {dt::RateVariant::PI, "pi"},
      {dt::RateVariant::AccelPI, "accel_pi"},
  };
  for (const auto& g : graphs) {
    for (const auto& [variant, name] : variants) {
      auto check = dt::verify_gain_radius(variant, g);
      RateRow row;
      row.variant = name;
      row.rho_formula = check.rho;
      row.radius = check.radius;
      row.pass = check.gap < 1e-8;
      report.all_pass = report.all_pass && row.pass;
      report.rows.push_back(std::move(row));
    }
  }

  std::ostringstream csv;
  csv.precision(17);
  csv << "lambda_r,p,accel_p,pi,accel_pi\n";
  for (int j = 1; j <= 200; ++j) {
    const double lr = j / 200.0;
    csv << lr << "," << dt::optimal_rho(dt::RateVariant::P, lr) << ","
        << dt::optimal_rho(dt::RateVariant::AccelP, lr) << ","
        << dt::optimal_rho(dt::RateVariant::PI, lr) << ","
        << dt::optimal_rho(dt::RateVariant::AccelPI, lr) << "\n";
  }
  std::filesystem::create_directories(out_dir);
  report.sweep_csv =
      (std::filesystem::path(out_dir) / "rate_curves.csv").string();
  write_text_atomic(report.sweep_csv, csv.str());
  return report;
}

CompareReport compare(const ScenarioConfig& a, const ScenarioConfig& b,
                      const std::string& metric, const std::string& out_dir) {
  namespace fs = std::filesystem;
  auto ra = run(a, (fs::path(out_dir) / "a").string());
  auto rb = run(b, (fs::path(out_dir) / "b").string());
  auto pick = [&](const analysis::MetricsReport& m) {
    if (metric == "time_avg_abs_error") return m.time_avg_abs_error;
    if (metric == "tail_sup_error") return m.tail_sup_error;
    throw std::runtime_error("unknown comparison metric '" + metric + "'");
  };
  CompareReport report;
  report.metric = metric;
  report.value_a = pick(ra.metrics);
  report.value_b = pick(rb.metrics);
  report.winner = report.value_a < report.value_b
                      ? "a"
                      : (report.value_b < report.value_a ? "b" : "tie");
  json j{{"metric", metric},
         {"a", report.value_a},
         {"b", report.value_b},
         {"winner", report.winner}};
  write_text_atomic((fs::path(out_dir) / "compare.json").string(), j.dump(2) + "\n");
  return report;
}

}  // namespace dacs::scenario

#include <doctest.h>

#include <cmath>

#include "dacs/analysis.hpp"
#include "dacs/event_triggered.hpp"
#include "dacs/scenario.hpp"

using namespace dacs;
using namespace dacs::et;

namespace {

scenario::ScenarioConfig five_agent_config() {
  return scenario::load_config(std::string(DACS_GOLDEN_DIR) + "/et_five_agents.json");
}

std::vector<double> matched_absolute_eps(const WeightedDigraph& g,
                                         const std::vector<double>& eps) {
  // Same error floor as the relative law: eps_i / (2 sqrt(d_i)).
  std::vector<double> out(eps.size());
  for (size_t i = 0; i < eps.size(); ++i)
    out[i] = eps[i] / (2.0 * std::sqrt(g.weights().row(i).sum()));
  return out;
}

}  // namespace

TEST_CASE("vanishing thresholds recover the per-step communication run") {
  auto cfg = five_agent_config();
  const int n = cfg.graph.n();
  Absolute tiny{std::vector<double>(n, 1e-12)};
  auto et_run = simulate_et(1.0, 4.0, TriggerLaw{tiny}, cfg.graph, cfg.bundle, 2.0,
                            0.01);

  // Baseline: the same Euler recursion with fresh broadcasts every step.
  const Matrix l = laplacian(cfg.graph);
  Vector x(n), v = Vector::Zero(n), u(n), du(n);
  for (int i = 0; i < n; ++i) x(i) = signals::evaluate(cfg.bundle[i], 0.0);
  for (long k = 0; k < 200; ++k) {
    double t = 0.01 * k;
    for (int i = 0; i < n; ++i) {
      u(i) = signals::evaluate(cfg.bundle[i], t);
      du(i) = signals::derivative(cfg.bundle[i], t, 1);
    }
    Vector lx = l * x;
    Vector vn = v + 0.01 * 4.0 * lx;
    x += 0.01 * (du - (x - u) - 4.0 * lx - v);
    v = vn;
    CHECK((et_run.trajectory.x[k + 1] - x).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Every agent fires every step.
  for (const auto& times : et_run.events.times)
    CHECK(times.size() == 201);  // t = 0 plus one per grid step
}

TEST_CASE("consensus on equal constants never re-triggers") {
  auto g = WeightedDigraph::undirected_ring(4);
  signals::SignalBundle bundle(4, signals::constant(3.0));
  Relative law{std::vector<double>(4, 0.1)};
  auto run = simulate_et(1.0, 4.0, TriggerLaw{law}, g, bundle, 5.0, 0.01);
  for (const auto& times : run.events.times) CHECK(times.size() == 1);
  CHECK(run.events.total == 4);
}

TEST_CASE("five-agent scenario: sparse events, bounded error") {
  auto cfg = five_agent_config();
  const auto& spec = std::get<scenario::EtSpec>(cfg.algorithm);
  auto run = simulate_et(spec.alpha, spec.beta, spec.law, cfg.graph, cfg.bundle,
                         cfg.horizon, cfg.dt);

  const long grid_steps = std::lround(cfg.horizon / cfg.dt);
  for (const auto& times : run.events.times) {
    CHECK(times.size() < 80);
    CHECK(times.front() == 0.0);
    CHECK(times.back() <= cfg.horizon);
  }
  CHECK(run.events.total < cfg.graph.n() * grid_steps);
  CHECK(run.events.min_interevent >= cfg.dt - 1e-12);

  const auto& eps = std::get<Relative>(spec.law).eps;
  double gamma = scenario::estimate_gamma(cfg);
  double bound = et_error_bound(cfg.graph, spec.beta, eps, gamma);
  double tail = analysis::compute_metrics(run.trajectory).tail_sup_error;
  CHECK(tail <= bound);
}

TEST_CASE("relative law fires no more often than the matched absolute law") {
  auto cfg = five_agent_config();
  const auto& spec = std::get<scenario::EtSpec>(cfg.algorithm);
  const auto& eps = std::get<Relative>(spec.law).eps;

  auto relative = simulate_et(spec.alpha, spec.beta, spec.law, cfg.graph, cfg.bundle,
                              cfg.horizon, cfg.dt);
  Absolute abs_law{matched_absolute_eps(cfg.graph, eps)};
  auto absolute = simulate_et(spec.alpha, spec.beta, TriggerLaw{abs_law}, cfg.graph,
                              cfg.bundle, cfg.horizon, cfg.dt);
  CHECK(relative.events.total <= absolute.events.total);
  // Comparable tracking quality.
  double rel_err = analysis::compute_metrics(relative.trajectory).tail_sup_error;
  double abs_err = analysis::compute_metrics(absolute.trajectory).tail_sup_error;
  CHECK(rel_err < 3.0 * abs_err + 0.1);
}

TEST_CASE("the analytic error bound") {
  const auto g = scenario::example_graph_b();
  CHECK(et_error_bound(g, 4.0, {0.0, 0.0, 0.0, 0.0}, 0.0) == 0.0);
  // ||L||_2 = 4, lambda2 = 2, ||eps|| = 0.2: (1 + 4*4*0.2) / (4*2).
  std::vector<double> eps(4, 0.1);
  CHECK(et_error_bound(g, 4.0, eps, 1.0) == doctest::Approx(4.2 / 8.0));

  // Larger beta shrinks the bound while the gamma term dominates.
  CHECK(et_error_bound(g, 8.0, eps, 1.0) < et_error_bound(g, 4.0, eps, 1.0));
  CHECK_THROWS(et_error_bound(WeightedDigraph(Matrix::Zero(3, 3)), 1.0,
                              {0.1, 0.1, 0.1}, 1.0));
}

TEST_CASE("trigger thresholds must be positive") {
  auto g = WeightedDigraph::undirected_ring(3);
  signals::SignalBundle bundle(3, signals::constant(1.0));
  Absolute bad{{0.1, 0.0, 0.1}};
  CHECK_THROWS(simulate_et(1.0, 1.0, TriggerLaw{bad}, g, bundle, 1.0, 0.01));
}

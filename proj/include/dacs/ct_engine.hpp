#pragma once

#include <optional>
#include <string>
#include <variant>

#include "dacs/graph.hpp"
#include "dacs/signals.hpp"
#include "dacs/trajectory.hpp"

namespace dacs::ct {

/// Derivative-free integrator estimator: p_dot = L x, x = u - p, needs
/// sum p(0) = 0.
struct BasicDac {};

/// Proportional-integral estimator with L_I = beta_scale * L_P; robust to
/// initialization (any x(0), q(0)).
struct PiDac {
  double alpha = 1.0;
  double beta_scale = 1.0;
};

/// Two-time-scale estimator: fast PI loop on z at rate 1/epsilon feeding a
/// slow tracker x_dot = -beta x - z. Convergence rate is set by beta.
struct FoiDac {
  double epsilon = 0.1;
  double beta = 1.0;
  double li_scale = 1.0;
};

/// Directed-graph PI estimator; needs sum q(0) = 0, arbitrary x(0).
struct DirectedPiDac {
  double alpha = 1.0;
  double beta = 1.0;
};

// Signum-feedback estimators for bounded-derivative inputs. Integrated with
// forward Euler; the chattering band is O(kp * dt).
struct SlidingBasic {
  double kp = 1.0;
};
struct SlidingTwoHop {
  double kp = 1.0;
};
struct SlidingOneHop {
  double kp = 1.0;
  double alpha = 1.0;
};
struct SlidingRobust {
  double kp = 1.0;
};

using CtAlgorithmSpec = std::variant<BasicDac, PiDac, FoiDac, DirectedPiDac,
                                     SlidingBasic, SlidingTwoHop, SlidingOneHop,
                                     SlidingRobust>;

std::string variant_name(const CtAlgorithmSpec& spec);
bool is_sliding(const CtAlgorithmSpec& spec);

/// Default sliding gain 2 * gamma * sqrt(n) for a known derivative bound.
double default_sliding_gain(double gamma, int n);

struct CtState {
  Vector p, q, z, x;  // per-variant subset is active
  double t = 0.0;
};

CtState make_initial_state(const CtAlgorithmSpec& spec, int n,
                           const signals::SignalBundle& bundle, double t0 = 0.0);

/// Agreement states exposed by the variant's output map for internal state
/// `st` and current inputs `u`.
Vector output(const CtAlgorithmSpec& spec, const CtState& st,
              const WeightedDigraph& g, const Vector& u);

/// Exact vector field of the selected estimator; fields of the returned state
/// that the variant does not use stay empty.
CtState rhs(const CtAlgorithmSpec& spec, const CtState& st, const WeightedDigraph& g,
            const signals::SignalBundle& bundle, double t);

struct CtRunOptions {
  bool store_internal = false;
  std::optional<TopologySchedule> schedule;
  std::vector<int> agent_ids;  // global labels for the rows; empty = 0..n-1
};

/// Fixed-step integration: RK4 for the smooth variants, forward Euler for the
/// signum ones. Appends to `traj` and advances `state`, so callers can apply
/// arrival/departure events between segments.
void integrate_segment(Trajectory& traj, const CtAlgorithmSpec& spec,
                       const WeightedDigraph& g, const signals::SignalBundle& bundle,
                       CtState& state, double t_end, double dt,
                       const CtRunOptions& opts, bool record_initial);

Trajectory integrate(const CtAlgorithmSpec& spec, const WeightedDigraph& g,
                     const signals::SignalBundle& bundle, CtState state, double t_end,
                     double dt, const CtRunOptions& opts = {});

/// Analytic steady-state tracking bound for derivative bound gamma:
/// gamma/lambda2_hat (basic), gamma/(beta lambda2_hat) (directed PI), and the
/// ISS constant route for the PI estimator.
double ultimate_bound(const CtAlgorithmSpec& spec, const WeightedDigraph& g,
                      double gamma);

/// Error-system matrices (A, B) of the PI estimator in disagreement
/// coordinates; used by the ISS bound.
std::pair<Matrix, Matrix> pidac_error_system(const WeightedDigraph& g, double alpha,
                                             double beta_scale);

/// Conserved-quantity series: sum_i p^i(t) when the trajectory carries the
/// internal p, otherwise sum_i x^i - sum_i u^i.
std::vector<double> conservation_residual(const Trajectory& traj);

}  // namespace dacs::ct

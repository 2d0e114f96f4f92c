#pragma once

#include <variant>
#include <vector>

#include "dacs/graph.hpp"
#include "dacs/signals.hpp"
#include "dacs/trajectory.hpp"

namespace dacs::et {

/// Broadcast when the drift from the last shared value exceeds eps_i.
struct Absolute {
  std::vector<double> eps;
};

/// Undirected-law trigger: |x_hat - x|^2 <= (1/(4 d_i)) sum_j a_ij
/// |x_hat_i - x_hat_j|^2 + eps_i^2 / (4 d_i). Longer inter-event times than
/// the absolute law at matched error floor eps_i / (2 sqrt(d_i)).
struct Relative {
  std::vector<double> eps;
};

using TriggerLaw = std::variant<Absolute, Relative>;

struct EventLog {
  std::vector<std::vector<double>> times;  // per agent, sorted
  double min_interevent = 0.0;
  int total = 0;

  std::string to_json() const;
};

struct EtResult {
  Trajectory trajectory;
  EventLog events;
};

/// Euler integration of the directed PI estimator driven by held broadcast
/// values; after each step every agent checks its trigger against its last
/// broadcast and violators re-broadcast (in agent order) before the next
/// step. All agents broadcast at t = 0. Events are quantized to the grid, so
/// min inter-event time >= dt by construction.
EtResult simulate_et(double alpha, double beta, const TriggerLaw& law,
                     const WeightedDigraph& g, const signals::SignalBundle& bundle,
                     double t_end, double dt, bool store_internal = false);

/// Analytic tail bound (gamma + beta ||L|| ||eps||) / (beta lambda2_hat).
double et_error_bound(const WeightedDigraph& g, double beta,
                      const std::vector<double>& eps, double gamma);

}  // namespace dacs::et

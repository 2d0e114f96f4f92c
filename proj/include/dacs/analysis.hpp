#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dacs/graph.hpp"
#include "dacs/trajectory.hpp"

namespace dacs::analysis {

struct RateFit {
  double rate = 1.0;  // per-sample geometric factor
  double r_squared = 0.0;
  int window_begin = 0;
  int window_end = 0;
};

struct IssBound {
  double kappa = 1.0;
  double lambda = 0.0;  // decay exponent (positive when applicable)
};

struct BoundCheck {
  std::string name;
  double bound = 0.0;
  double measured = 0.0;
  bool satisfied = false;
};

struct MetricsReport {
  std::vector<double> agent_tail_sup_error;
  double tail_sup_error = 0.0;
  double time_avg_abs_error = 0.0;
  std::optional<RateFit> rate;
  std::optional<double> conservation_drift;  // max |residual - residual(0)|
  std::vector<BoundCheck> bounds;
  double tail_fraction = 0.2;

  std::string to_json() const;
};

/// Per-agent tracking error series e^i_k = x^i_k - u_avg_k.
std::vector<std::vector<double>> tracking_error(const Trajectory& traj);

/// Sup of |e| over the trailing `tail_fraction` of the series.
double steady_state_error(const std::vector<double>& series, double tail_fraction);

/// Least-squares slope of log|e| on [window_begin, window_end); values are
/// clamped at a small floor before the log. Rate is the per-sample geometric
/// factor exp(slope); CT callers convert via -ln(rate)/dt.
RateFit fit_rate(const std::vector<double>& series, int window_begin, int window_end);

/// Window choice for empirical rate extraction: skip up to `max_skip` samples
/// of transient, but never intrude on the floor region (series below
/// 10 * eps-scaled magnitude) and keep at least `min_samples` points.
std::pair<int, int> rate_fit_window(const std::vector<double>& series,
                                    int max_skip = 50, int min_samples = 20);

/// kappa = 1, lambda = -lambda_max(Sym(a)); inapplicable (nullopt) when
/// Sym(a) is not Hurwitz even if a is. Callers fall back to empirical_iss_fit.
std::optional<IssBound> iss_sym_bound(const Matrix& a);

/// Fallback (kappa, lambda) from matrix-exponential norms on a grid:
/// lambda = 0.95 * |max Re eig(a)|, kappa = max_t ||e^{at}|| e^{lambda t}.
IssBound empirical_iss_fit(const Matrix& a, double horizon = 20.0, int samples = 200);

struct ErrorDecomposition {
  double consensus_component = 0.0;  // e_bar_1
  Vector disagreement;               // e_bar_{2:N}
};

ErrorDecomposition decompose_error(const Vector& e, const DisagreementBasis& basis);

MetricsReport compute_metrics(const Trajectory& traj, double tail_fraction = 0.2);

}  // namespace dacs::analysis

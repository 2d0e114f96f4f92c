#include "dacs/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

namespace dacs::analysis {

std::vector<std::vector<double>> tracking_error(const Trajectory& traj) {
  std::vector<std::vector<double>> err;
  size_t max_agents = 0;
  for (const auto& ids : traj.agent_ids)
    for (int id : ids) max_agents = std::max(max_agents, size_t(id) + 1);
  err.resize(max_agents);
  for (auto& series : err)
    series.assign(traj.steps(), std::numeric_limits<double>::quiet_NaN());
  for (size_t k = 0; k < traj.steps(); ++k)
    for (int a = 0; a < traj.x[k].size(); ++a)
      err[traj.agent_ids[k][a]][k] = traj.x[k](a) - traj.u_avg[k];
  return err;
}

double steady_state_error(const std::vector<double>& series, double tail_fraction) {
  if (tail_fraction <= 0.0 || tail_fraction > 1.0)
    throw std::invalid_argument("tail fraction must be in (0, 1]");
  size_t start = static_cast<size_t>(std::floor(series.size() * (1.0 - tail_fraction)));
  if (start >= series.size()) throw std::invalid_argument("empty tail window");
  double worst = 0.0;
  bool any = false;
  for (size_t k = start; k < series.size(); ++k) {
    if (std::isnan(series[k])) continue;
    worst = std::max(worst, std::abs(series[k]));
    any = true;
  }
  if (!any) throw std::invalid_argument("tail window has no samples");
  return worst;
}

RateFit fit_rate(const std::vector<double>& series, int window_begin, int window_end) {
  window_end = std::min<int>(window_end, static_cast<int>(series.size()));
  const int n = window_end - window_begin;
  if (n < 2) throw std::invalid_argument("degenerate rate-fit window");

  double peak = 0.0;
  for (double v : series) peak = std::max(peak, std::abs(v));
  const double floor = std::max(1e-15 * peak, 1e-300);

  double sk = 0, sy = 0, skk = 0, sky = 0, syy = 0;
  for (int k = window_begin; k < window_end; ++k) {
    double y = std::log(std::max(std::abs(series[k]), floor));
    sk += k;
    sy += y;
    skk += double(k) * k;
    sky += double(k) * y;
    syy += y * y;
  }
  double denom = n * skk - sk * sk;
  if (denom == 0.0) throw std::invalid_argument("degenerate rate-fit window");
  double slope = (n * sky - sk * sy) / denom;
  double ss_tot = syy - sy * sy / n;
  double ss_res = 0.0;
  double intercept = (sy - slope * sk) / n;
  for (int k = window_begin; k < window_end; ++k) {
    double y = std::log(std::max(std::abs(series[k]), floor));
    double r = y - (intercept + slope * k);
    ss_res += r * r;
  }
  RateFit fit;
  fit.rate = std::exp(slope);
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.window_begin = window_begin;
  fit.window_end = window_end;
  return fit;
}

std::pair<int, int> rate_fit_window(const std::vector<double>& series, int max_skip,
                                    int min_samples) {
  double peak = 0.0;
  for (double v : series)
    if (!std::isnan(v)) peak = std::max(peak, std::abs(v));
  const double floor = 10.0 * std::max(1e-15 * peak, 1e-300);
  int floor_idx = static_cast<int>(series.size());
  for (size_t k = 0; k < series.size(); ++k) {
    if (std::isnan(series[k]) || std::abs(series[k]) < floor) {
      floor_idx = static_cast<int>(k);
      break;
    }
  }
  int begin = std::min(max_skip, std::max(0, floor_idx - min_samples));
  return {begin, floor_idx};
}

std::optional<IssBound> iss_sym_bound(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  double lmax = es.eigenvalues().maxCoeff();
  if (lmax >= -1e-12) return std::nullopt;  // Sym(a) not Hurwitz; bound inapplicable
  return IssBound{1.0, -lmax};
}

IssBound empirical_iss_fit(const Matrix& a, double horizon, int samples) {
  Eigen::EigenSolver<Matrix> es(a, false);
  double re_max = es.eigenvalues().real().maxCoeff();
  if (re_max >= 0.0) throw std::invalid_argument("matrix is not Hurwitz");
  IssBound fit;
  fit.lambda = 0.95 * (-re_max);
  fit.kappa = 1.0;
  for (int j = 0; j <= samples; ++j) {
    double t = horizon * j / samples;
    Matrix e = (a * t).exp();
    fit.kappa = std::max(fit.kappa, e.operatorNorm() * std::exp(fit.lambda * t));
  }
  return fit;
}

ErrorDecomposition decompose_error(const Vector& e, const DisagreementBasis& basis) {
  if (e.size() != basis.r.rows())
    throw std::invalid_argument("error vector size does not match basis");
  ErrorDecomposition d;
  d.consensus_component = e.sum() / std::sqrt(double(e.size()));
  d.disagreement = basis.r.transpose() * e;
  return d;
}

MetricsReport compute_metrics(const Trajectory& traj, double tail_fraction) {
  MetricsReport report;
  report.tail_fraction = tail_fraction;
  auto err = tracking_error(traj);

  size_t first = traj.warmup_steps;
  std::vector<double> net_err(traj.steps(), std::numeric_limits<double>::quiet_NaN());
  double sum_abs = 0.0;
  size_t count = 0;
  for (size_t k = first; k < traj.steps(); ++k) {
    double norm2 = 0.0;
    for (int a = 0; a < traj.x[k].size(); ++a) {
      double e = traj.x[k](a) - traj.u_avg[k];
      norm2 += e * e;
      sum_abs += std::abs(e);
      ++count;
    }
    net_err[k] = std::sqrt(norm2);
  }
  report.time_avg_abs_error = count ? sum_abs / count : 0.0;

  report.agent_tail_sup_error.resize(err.size(), 0.0);
  for (size_t i = 0; i < err.size(); ++i) {
    // Agents that departed before the tail window report zero.
    std::vector<double> tail(err[i].begin() + first, err[i].end());
    size_t window = static_cast<size_t>(std::floor(tail.size() * (1.0 - tail_fraction)));
    bool present = std::any_of(tail.begin() + window, tail.end(),
                               [](double v) { return !std::isnan(v); });
    if (!present) continue;
    report.agent_tail_sup_error[i] = steady_state_error(tail, tail_fraction);
    report.tail_sup_error = std::max(report.tail_sup_error, report.agent_tail_sup_error[i]);
  }

  std::vector<double> post(net_err.begin() + first, net_err.end());
  auto [wb, we] = rate_fit_window(post);
  if (we - wb >= 20) report.rate = fit_rate(post, wb, we);

  if (auto it = traj.internal.find("p"); it != traj.internal.end()) {
    double base = it->second.front().sum();
    double drift = 0.0;
    for (const auto& p : it->second) drift = std::max(drift, std::abs(p.sum() - base));
    report.conservation_drift = drift;
  }
  return report;
}

std::string MetricsReport::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\n  \"tail_fraction\": " << tail_fraction
     << ",\n  \"tail_sup_error\": " << tail_sup_error
     << ",\n  \"time_avg_abs_error\": " << time_avg_abs_error;
  os << ",\n  \"agent_tail_sup_error\": [";
  for (size_t i = 0; i < agent_tail_sup_error.size(); ++i)
    os << (i ? ", " : "") << agent_tail_sup_error[i];
  os << "]";
  if (rate)
    os << ",\n  \"fitted_rate\": " << rate->rate
       << ",\n  \"rate_r_squared\": " << rate->r_squared
       << ",\n  \"rate_window\": [" << rate->window_begin << ", " << rate->window_end
       << "]";
  if (conservation_drift)
    os << ",\n  \"conservation_drift\": " << *conservation_drift;
  os << ",\n  \"bounds\": [";
  for (size_t i = 0; i < bounds.size(); ++i) {
    os << (i ? ", " : "") << "{\"name\": \"" << bounds[i].name
       << "\", \"bound\": " << bounds[i].bound << ", \"measured\": " << bounds[i].measured
       << ", \"satisfied\": " << (bounds[i].satisfied ? "true" : "false") << "}";
  }
  os << "]\n}\n";
  return os.str();
}

}  // namespace dacs::analysis

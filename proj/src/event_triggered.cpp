#include "dacs/event_triggered.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dacs::et {

namespace {

const std::vector<double>& law_eps(const TriggerLaw& law) {
  if (auto* a = std::get_if<Absolute>(&law)) return a->eps;
  return std::get<Relative>(law).eps;
}

}  // namespace

EtResult simulate_et(double alpha, double beta, const TriggerLaw& law,
                     const WeightedDigraph& g, const signals::SignalBundle& bundle,
                     double t_end, double dt, bool store_internal) {
  const int n = g.n();
  if (static_cast<int>(bundle.size()) != n)
    throw std::invalid_argument("bundle size != graph size");
  const auto& eps = law_eps(law);
  if (static_cast<int>(eps.size()) != n)
    throw std::invalid_argument("trigger needs one eps per agent");
  for (double e : eps)
    if (e <= 0.0) throw std::invalid_argument("trigger thresholds must be positive");

  const Matrix l = laplacian(g);
  const Matrix& w = g.weights();
  Vector degree = w.rowwise().sum();

  Vector x(n), v = Vector::Zero(n), xhat(n), u(n), du(n);
  for (int i = 0; i < n; ++i) {
    u(i) = signals::evaluate(*bundle[i], 0.0);
    x(i) = u(i);
  }
  xhat = x;  // forced broadcast at t = 0

  EtResult result;
  result.events.times.assign(n, {});
  for (int i = 0; i < n; ++i) result.events.times[i].push_back(0.0);
  result.events.total = n;
  result.trajectory.algorithm = "event_triggered";
  result.trajectory.dt = dt;

  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i;

  auto record = [&](double t) {
    result.trajectory.push(t, ids, x, u, u.mean());
    if (store_internal) {
      result.trajectory.internal["q"].push_back(v);
      result.trajectory.internal["xhat"].push_back(xhat);
    }
  };
  record(0.0);

  const long steps = std::lround(t_end / dt);
  for (long k = 0; k < steps; ++k) {
    const double t = k * dt;
    for (int i = 0; i < n; ++i) {
      u(i) = signals::evaluate(*bundle[i], t);
      du(i) = signals::derivative(*bundle[i], t, 1);
    }
    const Vector lxh = l * xhat;
    Vector vn = v + dt * alpha * beta * lxh;
    Vector xn = x + dt * (du - alpha * (x - u) - beta * lxh - v);
    v = vn;
    x = xn;
    if (!x.allFinite())
      throw std::runtime_error("event-triggered run diverged at t = " +
                               std::to_string(t + dt));

    // Trigger checks on the new state; violators broadcast before the next
    // step, in agent-index order.
    for (int i = 0; i < n; ++i) {
      double drift2 = (xhat(i) - x(i)) * (xhat(i) - x(i));
      double threshold2;
      if (std::holds_alternative<Absolute>(law)) {
        threshold2 = eps[i] * eps[i];
      } else {
        double neighbor = 0.0;
        for (int j = 0; j < n; ++j)
          if (w(i, j) > 0.0)
            neighbor += w(i, j) * (xhat(i) - xhat(j)) * (xhat(i) - xhat(j));
        threshold2 = (neighbor + eps[i] * eps[i]) / (4.0 * degree(i));
      }
      if (drift2 > threshold2) {
        xhat(i) = x(i);
        result.events.times[i].push_back((k + 1) * dt);
        ++result.events.total;
      }
    }
    for (int i = 0; i < n; ++i) u(i) = signals::evaluate(*bundle[i], (k + 1) * dt);
    record((k + 1) * dt);
  }

  result.events.min_interevent = t_end;
  for (const auto& times : result.events.times)
    for (size_t j = 1; j < times.size(); ++j)
      result.events.min_interevent =
          std::min(result.events.min_interevent, times[j] - times[j - 1]);
  return result;
}

double et_error_bound(const WeightedDigraph& g, double beta,
                      const std::vector<double>& eps, double gamma) {
  const auto spectral = spectrum(g);
  if (spectral.lambda2 <= 0.0)
    throw std::invalid_argument("graph must be connected and weight-balanced");
  double eps_norm = 0.0;
  for (double e : eps) eps_norm += e * e;
  eps_norm = std::sqrt(eps_norm);
  const double l_norm = laplacian(g).operatorNorm();
  return (gamma + beta * l_norm * eps_norm) / (beta * spectral.lambda2);
}

std::string EventLog::to_json() const {
  std::ostringstream os;
  os.precision(17);
  os << "{\n  \"agents\": [";
  for (size_t i = 0; i < times.size(); ++i) {
    os << (i ? ",\n    " : "\n    ") << "{\"agent\": " << i << ", \"times\": [";
    for (size_t j = 0; j < times[i].size(); ++j) os << (j ? ", " : "") << times[i][j];
    os << "], \"count\": " << times[i].size() << "}";
  }
  os << "\n  ],\n  \"min_interevent\": " << min_interevent
     << ",\n  \"total\": " << total << "\n}\n";
  return os.str();
}

}  // namespace dacs::et

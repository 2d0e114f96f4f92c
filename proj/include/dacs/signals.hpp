#pragma once

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

namespace dacs::signals {

struct SignalSpec;
using SignalPtr = std::shared_ptr<const SignalSpec>;

struct Constant {
  double value = 0.0;
};

struct Polynomial {
  std::vector<double> coeffs;  // value = sum coeffs[j] * t^j
};

struct Sinusoid {
  double amp = 0.0;
  double omega = 0.0;
  double phase = 0.0;
  double offset = 0.0;
};

/// (t / t_scale)^2 — the common unbounded-drift term of the target-tracking
/// scenario.
struct QuadraticDrift {
  double t_scale = 1.0;
};

struct Arctan {
  double scale = 1.0;  // atan(scale * t)
};

struct Sum {
  std::vector<SignalPtr> terms;
};

/// Piecewise-constant measurement a*(2 + sin(w_m * t_m + phi_m)) + b, held on
/// [m*dt, (m+1)*dt). w_m ~ N(0, 0.25) and phi_m ~ N(0, (pi/2)^2) are redrawn
/// every sample from a counter-based stream, so two specs with the same seed
/// see the same process (the per-agent a, b are the fixed measurement errors).
struct SampledStochastic {
  double a = 1.0;
  double b = 0.0;
  double sample_period = 1.0;
  std::uint64_t seed = 0;
};

struct ZeroOrderHold {
  SignalPtr inner;
  double sample_period = 1.0;
};

/// inner(t) on [t_start, t_end), zero outside. Used for input perturbations.
struct Windowed {
  SignalPtr inner;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct SignalSpec {
  std::variant<Constant, Polynomial, Sinusoid, QuadraticDrift, Arctan, Sum,
               SampledStochastic, ZeroOrderHold, Windowed>
      node;
};

SignalPtr constant(double c);
SignalPtr polynomial(std::vector<double> coeffs);
SignalPtr sinusoid(double amp, double omega, double phase, double offset = 0.0);
SignalPtr quadratic_drift(double t_scale);
SignalPtr arctan(double scale);
SignalPtr sum(std::vector<SignalPtr> terms);
SignalPtr sampled_stochastic(double a, double b, double period, std::uint64_t seed);
SignalPtr zero_order_hold(SignalPtr inner, double period);
SignalPtr windowed(SignalPtr inner, double t_start, double t_end);

double evaluate(const SignalSpec& s, double t);
// Exact analytic derivative of the given order (1 or 2); hold-type signals
// return the right-limit value 0 between and at sample instants.
double derivative(const SignalSpec& s, double t, int order);

inline double evaluate(const SignalPtr& s, double t) { return evaluate(*s, t); }
inline double derivative(const SignalPtr& s, double t, int order) {
  return derivative(*s, t, order);
}

using SignalBundle = std::vector<SignalPtr>;

double network_average(const SignalBundle& b, double t);

/// Grid maximum of ||(I - 11^T/N) u_dot(t)|| over [0, horizon]; a lower
/// estimate of the true supremum gamma the tracking-error bounds consume.
double uncommon_rate_bound(const SignalBundle& b, double horizon, double grid);

/// Reference bundle of the four moving targets: (t/20)^2 +
/// 0.5 sin((0.35+0.05 l) t + (5-l) pi/5) + 4 - 2(l-1), l = 1..4.
SignalBundle target_tracking_bundle(bool include_drift = true);

/// The six-agent sampled measurement bundle of the motivating comparison:
/// fixed gains/offsets (a^i, b^i), shared (omega, phi) stream.
SignalBundle measurement_bundle(double sample_period, std::uint64_t seed);

}  // namespace dacs::signals

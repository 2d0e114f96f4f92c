#include "dacs/signals.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "dacs/graph.hpp"

namespace dacs::signals {

namespace {

// splitmix64; counter-based so sample m of stream (seed, salt) is O(1).
std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double uniform01(std::uint64_t seed, std::uint64_t counter, std::uint64_t salt) {
  std::uint64_t h = mix(mix(mix(seed) ^ counter) ^ salt);
  return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Box-Muller from two counter-derived uniforms.
double gaussian(std::uint64_t seed, std::uint64_t counter, std::uint64_t salt,
                double stddev) {
  double u1 = uniform01(seed, counter, salt * 2 + 1);
  double u2 = uniform01(seed, counter, salt * 2 + 2);
  return stddev * std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double sampled_value(const SampledStochastic& s, double t) {
  auto m = static_cast<std::uint64_t>(std::max(0.0, std::floor(t / s.sample_period)));
  double tm = static_cast<double>(m) * s.sample_period;
  double omega = gaussian(s.seed, m, 0, 0.5);                       // N(0, 0.25)
  double phi = gaussian(s.seed, m, 1, std::numbers::pi / 2.0);      // N(0, (pi/2)^2)
  return s.a * (2.0 + std::sin(omega * tm + phi)) + s.b;
}

struct Evaluator {
  double t;
  double operator()(const Constant& s) const { return s.value; }
  double operator()(const Polynomial& s) const {
    double v = 0.0;
    for (auto it = s.coeffs.rbegin(); it != s.coeffs.rend(); ++it) v = v * t + *it;
    return v;
  }
  double operator()(const Sinusoid& s) const {
    return s.amp * std::sin(s.omega * t + s.phase) + s.offset;
  }
  double operator()(const QuadraticDrift& s) const {
    double x = t / s.t_scale;
    return x * x;
  }
  double operator()(const Arctan& s) const { return std::atan(s.scale * t); }
  double operator()(const Sum& s) const {
    double v = 0.0;
    for (const auto& term : s.terms) v += evaluate(*term, t);
    return v;
  }
  double operator()(const SampledStochastic& s) const { return sampled_value(s, t); }
  double operator()(const ZeroOrderHold& s) const {
    double tm = std::floor(t / s.sample_period) * s.sample_period;
    return evaluate(*s.inner, std::max(0.0, tm));
  }
  double operator()(const Windowed& s) const {
    return (t >= s.t_start && t < s.t_end) ? evaluate(*s.inner, t) : 0.0;
  }
};

struct Differentiator {
  double t;
  int order;
  double operator()(const Constant&) const { return 0.0; }
  double operator()(const Polynomial& s) const {
    double v = 0.0;
    for (int j = static_cast<int>(s.coeffs.size()) - 1; j >= order; --j) {
      double fac = 1.0;
      for (int r = 0; r < order; ++r) fac *= double(j - r);
      v = v * t + fac * s.coeffs[j];
    }
    return v;
  }
  double operator()(const Sinusoid& s) const {
    double arg = s.omega * t + s.phase;
    if (order == 1) return s.amp * s.omega * std::cos(arg);
    return -s.amp * s.omega * s.omega * std::sin(arg);
  }
  double operator()(const QuadraticDrift& s) const {
    if (order == 1) return 2.0 * t / (s.t_scale * s.t_scale);
    return 2.0 / (s.t_scale * s.t_scale);
  }
  double operator()(const Arctan& s) const {
    double u = s.scale * t;
    double d = 1.0 + u * u;
    if (order == 1) return s.scale / d;
    return -2.0 * s.scale * s.scale * u / (d * d);
  }
  double operator()(const Sum& s) const {
    double v = 0.0;
    for (const auto& term : s.terms) v += derivative(*term, t, order);
    return v;
  }
  double operator()(const SampledStochastic&) const { return 0.0; }
  double operator()(const ZeroOrderHold&) const { return 0.0; }
  double operator()(const Windowed& s) const {
    return (t >= s.t_start && t < s.t_end) ? derivative(*s.inner, t, order) : 0.0;
  }
};

SignalPtr make(SignalSpec s) { return std::make_shared<const SignalSpec>(std::move(s)); }

}  // namespace

SignalPtr constant(double c) { return make({Constant{c}}); }
SignalPtr polynomial(std::vector<double> coeffs) {
  return make({Polynomial{std::move(coeffs)}});
}
SignalPtr sinusoid(double amp, double omega, double phase, double offset) {
  return make({Sinusoid{amp, omega, phase, offset}});
}
SignalPtr quadratic_drift(double t_scale) { return make({QuadraticDrift{t_scale}}); }
SignalPtr arctan(double scale) { return make({Arctan{scale}}); }
SignalPtr sum(std::vector<SignalPtr> terms) { return make({Sum{std::move(terms)}}); }
SignalPtr sampled_stochastic(double a, double b, double period, std::uint64_t seed) {
  return make({SampledStochastic{a, b, period, seed}});
}
SignalPtr zero_order_hold(SignalPtr inner, double period) {
  return make({ZeroOrderHold{std::move(inner), period}});
}
SignalPtr windowed(SignalPtr inner, double t_start, double t_end) {
  return make({Windowed{std::move(inner), t_start, t_end}});
}

double evaluate(const SignalSpec& s, double t) {
  return std::visit(Evaluator{t}, s.node);
}

double derivative(const SignalSpec& s, double t, int order) {
  if (order != 1 && order != 2)
    throw std::invalid_argument("derivative order must be 1 or 2");
  return std::visit(Differentiator{t, order}, s.node);
}

double network_average(const SignalBundle& b, double t) {
  if (b.empty()) throw std::invalid_argument("empty signal bundle");
  double s = 0.0;
  for (const auto& sig : b) s += evaluate(*sig, t);
  return s / static_cast<double>(b.size());
}

double uncommon_rate_bound(const SignalBundle& b, double horizon, double grid) {
  if (grid <= 0.0) throw std::invalid_argument("grid spacing must be positive");
  const int n = static_cast<int>(b.size());
  const Matrix pi = ones_projector(n);
  Vector du(n);
  double worst = 0.0;
  for (double t = 0.0; t <= horizon + 0.5 * grid; t += grid) {
    for (int i = 0; i < n; ++i) du(i) = derivative(*b[i], t, 1);
    worst = std::max(worst, (pi * du).norm());
  }
  return worst;
}

SignalBundle target_tracking_bundle(bool include_drift) {
  SignalBundle bundle;
  for (int l = 1; l <= 4; ++l) {
    std::vector<SignalPtr> terms;
    if (include_drift) terms.push_back(quadratic_drift(20.0));
    terms.push_back(sinusoid(0.5, 0.35 + 0.05 * l,
                             (5.0 - l) * std::numbers::pi / 5.0));
    terms.push_back(constant(4.0 - 2.0 * (l - 1)));
    bundle.push_back(sum(std::move(terms)));
  }
  return bundle;
}

SignalBundle measurement_bundle(double sample_period, std::uint64_t seed) {
  const double a[6] = {1.1, 1.0, 0.9, 1.05, 0.96, 1.0};
  const double b[6] = {-0.55, 1.0, 0.6, -0.9, -0.6, 0.4};
  SignalBundle bundle;
  for (int i = 0; i < 6; ++i)
    bundle.push_back(sampled_stochastic(a[i], b[i], sample_period, seed));
  return bundle;
}

}  // namespace dacs::signals

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "dacs/graph.hpp"
#include "dacs/signals.hpp"
#include "dacs/trajectory.hpp"

namespace dacs::dt {

// ---------------------------------------------------------------------------
// Algorithm specs

/// Laplacian static consensus baseline x+ = (I - delta L) x. delta = 0 lets
/// the engine pick a stepsize with ||I - delta L - 11^T/N||_2 <= 0.9 (grid
/// minimizer). reinit_every > 0 resets x to the current inputs every that
/// many steps (the re-initialized baseline of the motivating comparison).
struct StaticConsensus {
  int reinit_every = 0;
  double delta = 0.0;
};

struct P {
  double kI = 1.0;
};

struct AccelP {
  double kI = 1.0;
  double rho = 0.0;
};

struct PI {
  double kI = 1.0;
  double kp = 1.0;
  double rho = 0.0;
};

struct AccelPI {
  double kI = 1.0;
  double kp = 1.0;
  double rho = 0.0;
};

/// m-stage consensus cascade fed by the m-th divided difference of the
/// inputs; tracks degree m-1 polynomials, output delayed by m steps.
struct PolyCascadeZM {
  int m = 1;
  double delta = 0.0;  // 0 = auto-scale L as StaticConsensus does
};

/// m-stage cascade of the non-robust integrator estimator; tracks degree m-1
/// polynomials with zero steady error and no delay (graph must be constant).
struct PolyCascadeP {
  int m = 1;
  double delta = 0.0;
};

/// Causal rational filter, coefficients in powers of z^{-1}; den[0] = 1 and
/// num.size() <= den.size().
struct RationalFilter {
  std::vector<double> num;
  std::vector<double> den;

  std::complex<double> response(double theta) const;
  int order() const { return static_cast<int>(den.size()) - 1; }
};

struct Feedforward {
  int m = 1;
  RationalFilter prefilter;  // the per-stage section f(z)
  double delta = 0.0;
};

/// Forward-Euler discretization of the directed proportional-integral
/// estimator; stable for delta < min(1/alpha, 2/(beta lambda_N)).
struct EulerDirectedPi {
  double alpha = 1.0;
  double beta = 1.0;
  double delta = 0.1;
};

using DtAlgorithmSpec =
    std::variant<StaticConsensus, P, AccelP, PI, AccelPI, PolyCascadeZM,
                 PolyCascadeP, Feedforward, EulerDirectedPi>;

std::string variant_name(const DtAlgorithmSpec& spec);

// ---------------------------------------------------------------------------
// Gain selection (closed forms as functions of lambda2, lambdaN)

enum class RateVariant { P, AccelP, PI, AccelPI };

struct GainChoice {
  double rho = 0.0;
  double kI = 0.0;
  std::optional<double> kp;
};

GainChoice optimal_params(RateVariant variant, double lambda2, double lambdaN);

/// rho(lambda_r) alone, for the rate-curve sweep.
double optimal_rho(RateVariant variant, double lambda_r);

DtAlgorithmSpec with_optimal_gains(RateVariant variant, const WeightedDigraph& g);

/// Dual-route check of the closed-form gains: the formula rho against the
/// spectral radius of the closed loop's per-mode characteristic roots. The
/// two sides are evaluated in quad precision from one set of Laplacian
/// eigenvalues; rounding the gains to double in between would reopen a
/// sqrt(ulp) ~ 1e-8 gap at the repeated design poles.
struct GainVerification {
  double rho = 0.0;
  double radius = 0.0;
  double gap = 0.0;
};
GainVerification verify_gain_radius(RateVariant variant, const WeightedDigraph& g);

// ---------------------------------------------------------------------------
// Analysis surfaces

/// Spectral radius of the closed-loop iteration restricted to the
/// disagreement subspace (consensus-direction integrator modes deflated).
double closed_loop_disagreement_radius(const DtAlgorithmSpec& spec,
                                       const WeightedDigraph& g);

/// Largest Euler stepsize keeping I + delta A Schur for Hurwitz A:
/// min_i -2 Re(mu_i) / |mu_i|^2.
double admissible_stepsize(const std::vector<std::complex<double>>& eigs);

/// Deflated closed-loop matrix I + delta A of the Euler-discretized directed
/// PI estimator (consensus mode removed via the disagreement basis).
Matrix euler_directed_pi_closed_loop(const WeightedDigraph& g, double alpha,
                                     double beta, double delta);

/// Bisection on the spectral radius of the closed loop; returns the delta at
/// which it crosses 1.
double euler_stability_boundary(const WeightedDigraph& g, double alpha, double beta,
                                double tol = 1e-6);

double spectral_radius(const Matrix& m);

/// Stepsize actually used by StaticConsensus/cascade stages: the requested
/// delta, or the 0.9-capped grid minimizer of ||I - delta L - 11^T/N||_2.
double resolve_consensus_scale(const WeightedDigraph& g, double requested);

// ---------------------------------------------------------------------------
// Iteration

double divided_difference(std::span<const double> history);  // length m+1, newest last

/// Prefilter section design: f(z) = 1 - [(z-1)/(z-a)]^q with the pole picked
/// from (theta_c, q) so that max |f(e^{j theta}) - 1| over [0, theta_c] meets
/// a 0.01 target (best effort when the order is too low for the band).
RationalFilter design_prefilter(int m, double theta_c, int q);
RationalFilter prefilter_from_pole(double a, int q);

struct DtState {
  Vector x;        // current output
  Vector p, p_prev;
  Vector q, q_prev;
  std::vector<Vector> stages;        // cascade states
  std::vector<Vector> u_history;     // divided-difference taps, newest last
  std::vector<Matrix> filter_state;  // feedforward: per stage, order x n
  std::int64_t k = 0;

  // Memoized auto-stepsize for the active graph (the grid minimizer is not
  // cheap enough to re-run every step).
  const double* scale_key = nullptr;
  double scale_cache = 0.0;
};

DtState make_initial_state(const DtAlgorithmSpec& spec, int n, const Vector& u0);

/// One iteration: records x_k into state.x from the current internal states
/// and inputs, then advances the internals to k+1.
void step(const DtAlgorithmSpec& spec, DtState& state, const WeightedDigraph& g,
          const Vector& inputs_k);

struct DtRunOptions {
  bool store_internal = false;
  std::optional<TopologySchedule> schedule;
};

Trajectory simulate_dt(const DtAlgorithmSpec& spec, const WeightedDigraph& g,
                       const signals::SignalBundle& bundle, double sample_period,
                       int steps, std::optional<DtState> init = std::nullopt,
                       const DtRunOptions& opts = {});

// ---------------------------------------------------------------------------
// Precision-parameterized core for the rate-verification runs. The empirical
// geometric rate of the accelerated variants is only observable on a window
// that double precision cannot hold (the error crosses the double noise
// floor within ~25 steps at rho ~ 0.17), so the verification suite runs this
// core with __float128.

template <class Real>
std::vector<double> run_rate_probe_log_error(RateVariant variant, const GainChoice& g,
                                             const Matrix& laplacian,
                                             const Vector& inputs, int steps) {
  const int n = static_cast<int>(laplacian.rows());
  std::vector<Real> L(size_t(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) L[size_t(i) * n + j] = Real(laplacian(i, j));
  std::vector<Real> u(n), p(n, Real(0)), pm(n, Real(0)), q(n, Real(0)),
      qm(n, Real(0)), x(n), lx(n), lxp(n);
  Real uavg = 0;
  for (int i = 0; i < n; ++i) {
    u[i] = Real(inputs(i));
    uavg += u[i];
  }
  uavg /= Real(n);

  const Real rho = Real(g.rho), kI = Real(g.kI);
  const Real kp = Real(g.kp.value_or(0.0));
  auto log_real = [](Real v) {
    if (v <= Real(0)) return -1e9;
    int shift = 0;
    while (v < Real(0.5)) {
      v *= Real(2);
      ++shift;
    }
    while (v > Real(1)) {
      v *= Real(0.5);
      --shift;
    }
    return std::log(static_cast<double>(v)) - shift * 0.6931471805599453;
  };

  std::vector<double> log_err;
  log_err.reserve(steps);
  for (int k = 0; k < steps; ++k) {
    for (int i = 0; i < n; ++i)
      x[i] = u[i] - (variant == RateVariant::PI || variant == RateVariant::AccelPI
                         ? q[i]
                         : p[i]);
    Real err2 = 0;
    for (int i = 0; i < n; ++i) {
      Real e = x[i] - uavg;
      err2 += e * e;
    }
    Real err = err2;
    {  // sqrt via Newton from a double seed (works for __float128 too)
      double seed = std::sqrt(static_cast<double>(err2));
      if (seed > 0) {
        Real r = Real(seed);
        for (int it = 0; it < 3; ++it) r = Real(0.5) * (r + err2 / r);
        err = r;
      } else {
        err = Real(0);
      }
    }
    log_err.push_back(log_real(err));

    for (int i = 0; i < n; ++i) {
      Real sx = 0, sxp = 0;
      for (int j = 0; j < n; ++j) {
        sx += L[size_t(i) * n + j] * x[j];
        sxp += L[size_t(i) * n + j] * (x[j] + p[j]);
      }
      lx[i] = sx;
      lxp[i] = sxp;
    }
    switch (variant) {
      case RateVariant::P:
        for (int i = 0; i < n; ++i) p[i] += kI * lx[i];
        break;
      case RateVariant::AccelP:
        for (int i = 0; i < n; ++i) {
          Real next = (Real(1) + rho * rho) * p[i] - rho * rho * pm[i] + kI * lx[i];
          pm[i] = p[i];
          p[i] = next;
        }
        break;
      case RateVariant::PI:
        for (int i = 0; i < n; ++i) {
          Real qn = rho * q[i] + kp * lxp[i];
          p[i] += kI * lx[i];
          q[i] = qn;
        }
        break;
      case RateVariant::AccelPI:
        for (int i = 0; i < n; ++i) {
          Real qn = Real(2) * rho * q[i] - rho * rho * qm[i] + kp * lxp[i];
          Real pn = (Real(1) + rho * rho) * p[i] - rho * rho * pm[i] + kI * lx[i];
          qm[i] = q[i];
          q[i] = qn;
          pm[i] = p[i];
          p[i] = pn;
        }
        break;
    }
  }
  return log_err;
}

}  // namespace dacs::dt

#include "dacs/dt_engine.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace dacs::dt {

namespace {

constexpr double kPiBranchEdge = 0.76393202250021030359;      // 3 - sqrt(5)
constexpr double kAccelPiBranchEdge = 0.82842712474619009760;  // 2 (sqrt(2) - 1)

double binomial(int n, int k) {
  double v = 1.0;
  for (int i = 1; i <= k; ++i) v = v * (n - k + i) / i;
  return v;
}

}  // namespace

std::string variant_name(const DtAlgorithmSpec& spec) {
  struct V {
    std::string operator()(const StaticConsensus&) const { return "static"; }
    std::string operator()(const P&) const { return "p"; }
    std::string operator()(const AccelP&) const { return "accel_p"; }
    std::string operator()(const PI&) const { return "pi"; }
    std::string operator()(const AccelPI&) const { return "accel_pi"; }
    std::string operator()(const PolyCascadeZM&) const { return "poly_cascade_zm"; }
    std::string operator()(const PolyCascadeP&) const { return "poly_cascade_p"; }
    std::string operator()(const Feedforward&) const { return "feedforward"; }
    std::string operator()(const EulerDirectedPi&) const { return "euler_directed_pi"; }
  };
  return std::visit(V{}, spec);
}

// ---------------------------------------------------------------------------
// Gains

double optimal_rho(RateVariant variant, double lambda_r) {
  if (lambda_r <= 0.0 || lambda_r > 1.0)
    throw std::invalid_argument("lambda ratio must be in (0, 1]");
  const double s = std::sqrt(1.0 - lambda_r);
  switch (variant) {
    case RateVariant::P:
      return (1.0 - lambda_r) / (1.0 + lambda_r);
    case RateVariant::AccelP:
      return (1.0 - std::sqrt(lambda_r)) / (1.0 + std::sqrt(lambda_r));
    case RateVariant::PI:
      if (lambda_r <= kPiBranchEdge)
        return (8.0 - 8.0 * lambda_r + lambda_r * lambda_r) /
               (8.0 - lambda_r * lambda_r);
      return (std::sqrt((1.0 - lambda_r) *
                        (4.0 + lambda_r * lambda_r * (5.0 - lambda_r))) -
              lambda_r * (1.0 - lambda_r)) /
             (2.0 * (1.0 + lambda_r * lambda_r));
    case RateVariant::AccelPI:
      if (lambda_r <= kAccelPiBranchEdge) {
        const double w = 2.0 * s - lambda_r;
        return (6.0 - w - 4.0 * std::sqrt(2.0 - w)) / (2.0 + w);
      }
      // Second branch simplifies exactly to s/(2+s); the printed quotient is
      // 0/0 at lambda_r = 1.
      return s / (2.0 + s);
  }
  throw std::logic_error("unreachable");
}

GainChoice optimal_params(RateVariant variant, double lambda2, double lambdaN) {
  if (!(lambda2 > 0.0) || lambda2 > lambdaN)
    throw std::invalid_argument("need 0 < lambda2 <= lambdaN");
  const double lr = lambda2 / lambdaN;
  GainChoice out;
  out.rho = optimal_rho(variant, lr);
  switch (variant) {
    case RateVariant::P:
      out.kI = 2.0 / (lambda2 + lambdaN);
      break;
    case RateVariant::AccelP: {
      const double r = std::sqrt(lambda2) + std::sqrt(lambdaN);
      out.kI = 4.0 / (r * r);
      break;
    }
    case RateVariant::PI:
      out.kI = (1.0 - out.rho) / lambda2;
      out.kp = lr == 1.0 ? 1.0 / lambdaN
                         : out.rho * (1.0 - out.rho) * lr /
                               ((out.rho + lr - 1.0) * lambdaN);
      break;
    case RateVariant::AccelPI: {
      out.kI = (1.0 - out.rho) * (1.0 - out.rho) / lambda2;
      const double s = std::sqrt(1.0 - lr);
      out.kp = (2.0 + 2.0 * s - lr) * out.kI;
      break;
    }
  }
  return out;
}

DtAlgorithmSpec with_optimal_gains(RateVariant variant, const WeightedDigraph& g) {
  auto spec = spectrum(g);
  auto gains = optimal_params(variant, spec.lambda2, spec.lambdaN);
  switch (variant) {
    case RateVariant::P:
      return P{gains.kI};
    case RateVariant::AccelP:
      return AccelP{gains.kI, gains.rho};
    case RateVariant::PI:
      return PI{gains.kI, *gains.kp, gains.rho};
    case RateVariant::AccelPI:
      return AccelPI{gains.kI, *gains.kp, gains.rho};
  }
  throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Analysis surfaces

double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> es(m, false);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("eigensolver failed on closed-loop matrix");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double resolve_consensus_scale(const WeightedDigraph& g, double requested) {
  if (requested > 0.0) return requested;
  if (g.n() == 1) return 1.0;
  const Matrix l = laplacian(g);
  const Matrix pi = ones_projector(g.n());
  const Matrix eye = Matrix::Identity(g.n(), g.n());
  const double lmax = spectrum(g).lambdaN;
  double best_delta = 0.0, best_norm = std::numeric_limits<double>::infinity();
  const int grid = 600;
  for (int j = 1; j <= grid; ++j) {
    double delta = 2.4 * j / (grid * lmax);
    double norm = (eye - delta * l - Matrix::Constant(g.n(), g.n(), 1.0 / g.n()))
                      .operatorNorm();
    if (norm < best_norm) {
      best_norm = norm;
      best_delta = delta;
    }
  }
  if (best_norm > 0.9)
    throw std::runtime_error("cannot scale graph to contraction norm <= 0.9");
  return best_delta;
}

namespace {

Matrix disagreement_block(const WeightedDigraph& g) {
  auto basis = disagreement_basis(g.n());
  return basis.r.transpose() * laplacian(g) * basis.r;
}

// The optimized gains place repeated closed-loop poles (that is the root
// locus design), and repeated eigenvalues are defective: double-precision
// eigensolvers only recover them to ~sqrt(eps) ~ 1e-8. The per-mode
// characteristic roots are therefore computed in quad precision.
using Quad = __float128;

Quad qsqrt(Quad x) {
  if (x <= Quad(0)) return Quad(0);
  Quad r = Quad(std::sqrt(static_cast<double>(x)));
  for (int i = 0; i < 4; ++i) r = Quad(0.5) * (r + x / r);
  return r;
}

struct QuadC {
  Quad re = 0, im = 0;
};
QuadC operator+(QuadC a, QuadC b) { return {a.re + b.re, a.im + b.im}; }
QuadC operator-(QuadC a, QuadC b) { return {a.re - b.re, a.im - b.im}; }
QuadC operator*(QuadC a, QuadC b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}
QuadC operator/(QuadC a, QuadC b) {
  Quad d = b.re * b.re + b.im * b.im;
  return {(a.re * b.re + a.im * b.im) / d, (a.im * b.re - a.re * b.im) / d};
}
Quad qc_abs(QuadC z) { return qsqrt(z.re * z.re + z.im * z.im); }

double max_root_quadratic(Quad tr, Quad det) {
  Quad disc = tr * tr - Quad(4) * det;
  if (disc < Quad(0)) return static_cast<double>(qsqrt(det));  // conjugate pair
  Quad sq = qsqrt(disc);
  Quad r1 = (tr + sq) / Quad(2), r2 = (tr - sq) / Quad(2);
  if (r1 < Quad(0)) r1 = -r1;
  if (r2 < Quad(0)) r2 = -r2;
  return static_cast<double>(r1 > r2 ? r1 : r2);
}

// Durand-Kerner on a monic polynomial; fine for the quartic mode blocks.
double max_root_monic(const std::vector<Quad>& coeffs) {
  const int deg = static_cast<int>(coeffs.size());
  auto eval = [&](QuadC z) {
    QuadC v{1, 0};
    for (int i = 0; i < deg; ++i) v = v * z + QuadC{coeffs[i], 0};
    return v;
  };
  std::vector<QuadC> roots(deg);
  QuadC seed{Quad(0.4), Quad(0.9)}, z{1, 0};
  for (int i = 0; i < deg; ++i) {
    z = z * seed;
    roots[i] = z;
  }
  for (int iter = 0; iter < 400; ++iter) {
    Quad worst = 0;
    for (int i = 0; i < deg; ++i) {
      QuadC denom{1, 0};
      for (int j = 0; j < deg; ++j)
        if (j != i) denom = denom * (roots[i] - roots[j]);
      QuadC delta = eval(roots[i]) / denom;
      roots[i] = roots[i] - delta;
      Quad d = qc_abs(delta);
      if (d > worst) worst = d;
    }
    if (worst < Quad(1e-30)) break;
  }
  Quad best = 0;
  for (const auto& r : roots) {
    Quad a = qc_abs(r);
    if (a > best) best = a;
  }
  return static_cast<double>(best);
}

struct QuadGains {
  Quad rho = 0, kI = 0, kp = 0;
};

double mode_radius(RateVariant variant, const QuadGains& g,
                   const std::vector<double>& modes) {
  double out = 0.0;
  switch (variant) {
    case RateVariant::P:
      for (double lam : modes) {
        Quad r = Quad(1) - g.kI * Quad(lam);
        if (r < Quad(0)) r = -r;
        out = std::max(out, static_cast<double>(r));
      }
      return out;
    case RateVariant::AccelP:
      for (double lam : modes)
        out = std::max(out, max_root_quadratic(
                                Quad(1) + g.rho * g.rho - g.kI * Quad(lam),
                                g.rho * g.rho));
      return out;
    case RateVariant::PI:
      for (double lam : modes) {
        Quad kpl = g.kp * Quad(lam);
        Quad tr = Quad(1) + g.rho - kpl;
        Quad det = g.rho - kpl + g.kI * g.kp * Quad(lam) * Quad(lam);
        out = std::max(out, max_root_quadratic(tr, det));
      }
      return out;
    case RateVariant::AccelPI:
      for (double lam : modes) {
        // (z^2 - az - b)(z^2 - ez - f) - cd z^2 with the two feedback loops.
        Quad aa = Quad(2) * g.rho - g.kp * Quad(lam);
        Quad bb = -g.rho * g.rho;
        Quad ee = Quad(1) + g.rho * g.rho;
        Quad ff = -g.rho * g.rho;
        Quad cd = -g.kI * g.kp * Quad(lam) * Quad(lam);
        std::vector<Quad> coeffs = {-(aa + ee), aa * ee - bb - ff - cd,
                                    aa * ff + bb * ee, bb * ff};
        out = std::max(out, max_root_monic(coeffs));
      }
      return out;
  }
  throw std::logic_error("unreachable");
}

QuadGains optimal_params_quad(RateVariant variant, Quad l2, Quad lN) {
  QuadGains g;
  const Quad lr = l2 / lN;
  const Quad s = qsqrt(Quad(1) - lr);
  switch (variant) {
    case RateVariant::P:
      g.rho = (lN - l2) / (lN + l2);
      g.kI = Quad(2) / (l2 + lN);
      return g;
    case RateVariant::AccelP: {
      Quad r = qsqrt(l2) + qsqrt(lN);
      g.rho = (qsqrt(lN) - qsqrt(l2)) / r;
      g.kI = Quad(4) / (r * r);
      return g;
    }
    case RateVariant::PI:
      if (lr <= Quad(3) - qsqrt(Quad(5)))
        g.rho = (Quad(8) - Quad(8) * lr + lr * lr) / (Quad(8) - lr * lr);
      else
        g.rho = (qsqrt((Quad(1) - lr) * (Quad(4) + lr * lr * (Quad(5) - lr))) -
                 lr * (Quad(1) - lr)) /
                (Quad(2) * (Quad(1) + lr * lr));
      g.kI = (Quad(1) - g.rho) / l2;
      g.kp = lr == Quad(1) ? Quad(1) / lN
                           : g.rho * (Quad(1) - g.rho) * lr /
                                 ((g.rho + lr - Quad(1)) * lN);
      return g;
    case RateVariant::AccelPI: {
      if (lr <= Quad(2) * (qsqrt(Quad(2)) - Quad(1))) {
        Quad w = Quad(2) * s - lr;
        g.rho = (Quad(6) - w - Quad(4) * qsqrt(Quad(2) - w)) / (Quad(2) + w);
      } else {
        g.rho = s / (Quad(2) + s);
      }
      g.kI = (Quad(1) - g.rho) * (Quad(1) - g.rho) / l2;
      g.kp = (Quad(2) + Quad(2) * s - lr) * g.kI;
      return g;
    }
  }
  throw std::logic_error("unreachable");
}

std::optional<double> rate_variant_radius(const DtAlgorithmSpec& spec,
                                          const std::vector<double>& modes) {
  if (auto* a = std::get_if<P>(&spec))
    return mode_radius(RateVariant::P, {0, Quad(a->kI), 0}, modes);
  if (auto* a = std::get_if<AccelP>(&spec))
    return mode_radius(RateVariant::AccelP, {Quad(a->rho), Quad(a->kI), 0}, modes);
  if (auto* a = std::get_if<PI>(&spec))
    return mode_radius(RateVariant::PI, {Quad(a->rho), Quad(a->kI), Quad(a->kp)},
                       modes);
  if (auto* a = std::get_if<AccelPI>(&spec))
    return mode_radius(RateVariant::AccelPI, {Quad(a->rho), Quad(a->kI), Quad(a->kp)},
                       modes);
  return std::nullopt;
}

}  // namespace

GainVerification verify_gain_radius(RateVariant variant, const WeightedDigraph& g) {
  if (!g.undirected())
    throw std::invalid_argument("gain verification assumes an undirected graph");
  const Matrix s = disagreement_block(g);
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  std::vector<double> modes(es.eigenvalues().data(),
                            es.eigenvalues().data() + g.n() - 1);
  std::sort(modes.begin(), modes.end());
  QuadGains gains =
      optimal_params_quad(variant, Quad(modes.front()), Quad(modes.back()));
  GainVerification out;
  out.rho = static_cast<double>(gains.rho);
  out.radius = mode_radius(variant, gains, modes);
  out.gap = std::abs(out.radius - out.rho);
  return out;
}

double closed_loop_disagreement_radius(const DtAlgorithmSpec& spec,
                                       const WeightedDigraph& g) {
  if (g.n() < 2) return 0.0;
  const int m = g.n() - 1;
  const Matrix s = disagreement_block(g);
  const Matrix eye = Matrix::Identity(m, m);

  if (g.undirected()) {
    // Symmetric S decouples into scalar modes; solve each mode's
    // characteristic polynomial in quad precision (repeated design poles).
    Eigen::SelfAdjointEigenSolver<Matrix> es(s);
    std::vector<double> modes(es.eigenvalues().data(), es.eigenvalues().data() + m);
    if (auto radius = rate_variant_radius(spec, modes)) return *radius;
  }

  struct V {
    const WeightedDigraph& g;
    const Matrix& s;
    const Matrix& eye;
    int m;

    Matrix operator()(const StaticConsensus& a) const {
      return eye - resolve_consensus_scale(g, a.delta) * s;
    }
    Matrix operator()(const P& a) const { return eye - a.kI * s; }
    Matrix operator()(const AccelP& a) const {
      Matrix cl = Matrix::Zero(2 * m, 2 * m);
      cl.topLeftCorner(m, m) = (1.0 + a.rho * a.rho) * eye - a.kI * s;
      cl.topRightCorner(m, m) = -a.rho * a.rho * eye;
      cl.bottomLeftCorner(m, m) = eye;
      return cl;
    }
    Matrix operator()(const PI& a) const {
      Matrix cl = Matrix::Zero(2 * m, 2 * m);
      cl.topLeftCorner(m, m) = a.rho * eye - a.kp * s;
      cl.topRightCorner(m, m) = a.kp * s;
      cl.bottomLeftCorner(m, m) = -a.kI * s;
      cl.bottomRightCorner(m, m) = eye;
      return cl;
    }
    Matrix operator()(const AccelPI& a) const {
      Matrix cl = Matrix::Zero(4 * m, 4 * m);
      cl.block(0, 0, m, m) = 2.0 * a.rho * eye - a.kp * s;
      cl.block(0, m, m, m) = -a.rho * a.rho * eye;
      cl.block(0, 2 * m, m, m) = a.kp * s;
      cl.block(m, 0, m, m) = eye;
      cl.block(2 * m, 0, m, m) = -a.kI * s;
      cl.block(2 * m, 2 * m, m, m) = (1.0 + a.rho * a.rho) * eye;
      cl.block(2 * m, 3 * m, m, m) = -a.rho * a.rho * eye;
      cl.block(3 * m, 2 * m, m, m) = eye;
      return cl;
    }
    Matrix operator()(const PolyCascadeZM& a) const {
      return eye - resolve_consensus_scale(g, a.delta) * s;
    }
    Matrix operator()(const PolyCascadeP& a) const {
      return eye - resolve_consensus_scale(g, a.delta) * s;
    }
    Matrix operator()(const Feedforward& a) const {
      return eye - resolve_consensus_scale(g, a.delta) * s;
    }
    Matrix operator()(const EulerDirectedPi& a) const {
      return euler_directed_pi_closed_loop(g, a.alpha, a.beta, a.delta);
    }
  };
  return spectral_radius(std::visit(V{g, s, eye, m}, spec));
}

double admissible_stepsize(const std::vector<std::complex<double>>& eigs) {
  double bound = std::numeric_limits<double>::infinity();
  for (const auto& mu : eigs) {
    if (mu.real() >= 0.0)
      throw std::invalid_argument("admissible_stepsize needs a Hurwitz spectrum");
    bound = std::min(bound, -2.0 * mu.real() / std::norm(mu));
  }
  return bound;
}

Matrix euler_directed_pi_closed_loop(const WeightedDigraph& g, double alpha,
                                     double beta, double delta) {
  const int m = g.n() - 1;
  const Matrix s = disagreement_block(g);
  Matrix a = Matrix::Zero(2 * m + 1, 2 * m + 1);
  a(0, 0) = -alpha;
  a.block(1, 1, m, m) = -alpha * Matrix::Identity(m, m);
  a.block(m + 1, 1, m, m) = -Matrix::Identity(m, m);
  a.block(m + 1, m + 1, m, m) = -beta * s;
  return Matrix::Identity(2 * m + 1, 2 * m + 1) + delta * a;
}

double euler_stability_boundary(const WeightedDigraph& g, double alpha, double beta,
                                double tol) {
  auto radius = [&](double delta) {
    return spectral_radius(euler_directed_pi_closed_loop(g, alpha, beta, delta));
  };
  double lo = 1e-9, hi = 1.0 / alpha;
  while (radius(hi) < 1.0) hi *= 2.0;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    (radius(mid) < 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// Filters

std::complex<double> RationalFilter::response(double theta) const {
  const std::complex<double> zinv = std::exp(std::complex<double>(0.0, -theta));
  std::complex<double> n = 0.0, d = 0.0, zp = 1.0;
  for (size_t i = 0; i < std::max(num.size(), den.size()); ++i) {
    if (i < num.size()) n += num[i] * zp;
    if (i < den.size()) d += den[i] * zp;
    zp *= zinv;
  }
  return n / d;
}

RationalFilter prefilter_from_pole(double a, int q) {
  if (q < 1) throw std::invalid_argument("prefilter needs q >= 1 sections");
  if (std::abs(a) >= 1.0) throw std::invalid_argument("prefilter pole must be stable");
  RationalFilter f;
  f.den.resize(q + 1);
  f.num.resize(q + 1);
  for (int i = 0; i <= q; ++i) {
    double c = binomial(q, i);
    double sign = (i % 2) ? -1.0 : 1.0;
    f.den[i] = c * sign * std::pow(a, i);
    f.num[i] = f.den[i] - c * sign;  // (1 - a/z)^q - (1 - 1/z)^q
  }
  return f;
}

RationalFilter design_prefilter(int m, double theta_c, int q) {
  if (m < 1 || q < 1) throw std::invalid_argument("prefilter needs m, q >= 1");
  if (!(theta_c > 0.0) || theta_c >= std::acos(-1.0))
    throw std::invalid_argument("cutoff must satisfy 0 < theta_c < pi");
  // Place the section pole so the highpass residue |(z-1)/(z-a)|^q meets a
  // 0.01 passband-deviation target at the band edge.
  const double target = 0.01;
  const double r = 2.0 * std::sin(theta_c / 2.0) / std::pow(target, 1.0 / q);
  const double sin_c = std::sin(theta_c);
  double a;
  const double disc = r * r - sin_c * sin_c;
  if (disc >= 0.0)
    a = std::cos(theta_c) - std::sqrt(disc);
  else
    a = -0.95;  // order too low for the band; best-effort pole
  a = std::clamp(a, -0.95, 0.999);
  return prefilter_from_pole(a, q);
}

double divided_difference(std::span<const double> history) {
  if (history.size() < 2)
    throw std::invalid_argument("divided difference needs at least 2 samples");
  const int m = static_cast<int>(history.size()) - 1;
  double v = 0.0;
  for (int j = 0; j <= m; ++j) {
    double sign = (j % 2) ? -1.0 : 1.0;
    v += sign * binomial(m, j) * history[history.size() - 1 - j];
  }
  return v;
}

// ---------------------------------------------------------------------------
// Iteration

namespace {

struct FilterStepper {
  // Direct form II transposed per scalar channel.
  static double advance(const RationalFilter& f, Eigen::Ref<Vector> state, double in) {
    const int ord = f.order();
    double y = f.num[0] * in + (ord > 0 ? state(0) : 0.0);
    for (int i = 0; i < ord; ++i) {
      double next = i + 1 < ord ? state(i + 1) : 0.0;
      double b = i + 1 < static_cast<int>(f.num.size()) ? f.num[i + 1] : 0.0;
      state(i) = b * in - f.den[i + 1] * y + next;
    }
    return y;
  }
};

}  // namespace

DtState make_initial_state(const DtAlgorithmSpec& spec, int n, const Vector& u0) {
  DtState st;
  st.p = Vector::Zero(n);
  st.p_prev = Vector::Zero(n);
  st.q = Vector::Zero(n);
  st.q_prev = Vector::Zero(n);
  st.x = Vector::Zero(n);
  if (std::holds_alternative<StaticConsensus>(spec)) st.p = u0;
  if (auto* zm = std::get_if<PolyCascadeZM>(&spec)) {
    st.stages.assign(zm->m, Vector::Zero(n));
    st.u_history.assign(zm->m + 1, Vector::Zero(n));  // zero prehistory
  }
  if (auto* pc = std::get_if<PolyCascadeP>(&spec))
    st.stages.assign(pc->m, Vector::Zero(n));
  if (auto* ff = std::get_if<Feedforward>(&spec)) {
    st.stages.assign(ff->m, Vector::Zero(n));
    st.filter_state.assign(ff->m, Matrix::Zero(ff->prefilter.order(), n));
  }
  return st;
}

void step(const DtAlgorithmSpec& spec, DtState& st, const WeightedDigraph& g,
          const Vector& u) {
  if (u.size() != g.n()) throw std::invalid_argument("input size != graph size");
  const Matrix l = laplacian(g);

  struct V {
    DtState& st;
    const WeightedDigraph& g;
    const Matrix& l;
    const Vector& u;

    double scale(double requested) const {
      if (requested > 0.0) return requested;
      if (st.scale_key != g.weights().data()) {
        st.scale_cache = resolve_consensus_scale(g, 0.0);
        st.scale_key = g.weights().data();
      }
      return st.scale_cache;
    }

    void operator()(const StaticConsensus& a) const {
      // p holds the iterate; x exposes the value recorded at step k.
      const double delta = scale(a.delta);
      if (a.reinit_every > 0 && st.k % a.reinit_every == 0) st.p = u;
      st.x = st.p;
      st.p -= delta * (l * st.p);
    }
    void operator()(const P& a) const {
      st.x = u - st.p;
      st.p += a.kI * (l * st.x);
    }
    void operator()(const AccelP& a) const {
      st.x = u - st.p;
      Vector next = (1.0 + a.rho * a.rho) * st.p - a.rho * a.rho * st.p_prev +
                    a.kI * (l * st.x);
      st.p_prev = st.p;
      st.p = next;
    }
    void operator()(const PI& a) const {
      st.x = u - st.q;
      Vector qn = a.rho * st.q + a.kp * (l * (st.x + st.p));
      st.p += a.kI * (l * st.x);
      st.q = qn;
    }
    void operator()(const AccelPI& a) const {
      st.x = u - st.q;
      Vector qn = 2.0 * a.rho * st.q - a.rho * a.rho * st.q_prev +
                  a.kp * (l * (st.x + st.p));
      Vector pn = (1.0 + a.rho * a.rho) * st.p - a.rho * a.rho * st.p_prev +
                  a.kI * (l * st.x);
      st.q_prev = st.q;
      st.q = qn;
      st.p_prev = st.p;
      st.p = pn;
    }
    void operator()(const PolyCascadeZM& a) const {
      const double delta = scale(a.delta);
      st.u_history.erase(st.u_history.begin());
      st.u_history.push_back(u);
      Vector diff(u.size());
      std::vector<double> taps(st.u_history.size());
      for (int i = 0; i < u.size(); ++i) {
        for (size_t j = 0; j < st.u_history.size(); ++j) taps[j] = st.u_history[j](i);
        diff(i) = divided_difference(taps);
      }
      st.x = st.stages[a.m - 1];
      std::vector<Vector> next(a.m);
      next[0] = st.stages[0] - delta * (l * st.stages[0]) + diff;
      for (int s = 1; s < a.m; ++s)
        next[s] = st.stages[s] - delta * (l * st.stages[s]) + st.stages[s - 1];
      st.stages = std::move(next);
    }
    void operator()(const PolyCascadeP& a) const {
      const double delta = scale(a.delta);
      Vector acc = Vector::Zero(u.size());
      for (const auto& p : st.stages) acc += p;
      st.x = u - acc;
      st.p = acc;  // for conservation diagnostics
      std::vector<Vector> next(a.m);
      Vector partial = Vector::Zero(u.size());
      for (int s = 0; s < a.m; ++s) {
        partial += st.stages[s];
        next[s] = st.stages[s] + delta * (l * (u - partial));
      }
      st.stages = std::move(next);
    }
    void operator()(const Feedforward& a) const {
      const double delta = scale(a.delta);
      Vector v = u;
      for (int s = 0; s < a.m; ++s) {
        Vector mixed = v - delta * (l * v);
        Vector out(v.size());
        for (int i = 0; i < v.size(); ++i)
          out(i) = FilterStepper::advance(a.prefilter, st.filter_state[s].col(i),
                                          mixed(i));
        v = st.stages[s] = out;
      }
      st.x = v;
    }
    void operator()(const EulerDirectedPi& a) const {
      st.x = st.p + u;  // p holds z = x - u
      Vector lx = l * st.x;
      Vector vn = st.q + a.delta * a.alpha * a.beta * lx;
      st.p += -a.delta * a.alpha * st.p - a.delta * a.beta * lx - a.delta * st.q;
      st.q = vn;
    }
  };
  std::visit(V{st, g, l, u}, spec);
  ++st.k;
}

Trajectory simulate_dt(const DtAlgorithmSpec& spec, const WeightedDigraph& g,
                       const signals::SignalBundle& bundle, double sample_period,
                       int steps, std::optional<DtState> init,
                       const DtRunOptions& opts) {
  const int n = g.n();
  if (static_cast<int>(bundle.size()) != n)
    throw std::invalid_argument("bundle size != graph size");

  Vector u0(n);
  for (int i = 0; i < n; ++i) u0(i) = signals::evaluate(*bundle[i], 0.0);
  DtState st = init ? std::move(*init) : make_initial_state(spec, n, u0);

  Trajectory traj;
  traj.algorithm = variant_name(spec);
  traj.dt = sample_period;
  if (auto* zm = std::get_if<PolyCascadeZM>(&spec)) traj.warmup_steps = zm->m;
  if (auto* ff = std::get_if<Feedforward>(&spec)) traj.warmup_steps = ff->m;

  std::vector<int> ids(n);
  for (int i = 0; i < n; ++i) ids[i] = i;

  Vector u(n);
  for (int k = 0; k < steps; ++k) {
    const double t = k * sample_period;
    const WeightedDigraph& active = opts.schedule ? opts.schedule->active(t) : g;
    for (int i = 0; i < n; ++i) u(i) = signals::evaluate(*bundle[i], t);
    step(spec, st, active, u);
    if (!st.x.allFinite())
      throw std::runtime_error("dt iteration diverged at step " + std::to_string(k));
    traj.push(t, ids, st.x, u, u.mean());
    if (opts.store_internal) {
      traj.internal["p"].push_back(st.p);
      traj.internal["q"].push_back(st.q);
    }
  }
  return traj;
}

}  // namespace dacs::dt

#include "dacs/ct_engine.hpp"

#include <cmath>
#include <stdexcept>

#include "dacs/analysis.hpp"

namespace dacs::ct {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Vector eval_inputs(const signals::SignalBundle& b, double t) {
  Vector u(b.size());
  for (size_t i = 0; i < b.size(); ++i) u(i) = signals::evaluate(*b[i], t);
  return u;
}

Vector eval_rates(const signals::SignalBundle& b, double t) {
  Vector du(b.size());
  for (size_t i = 0; i < b.size(); ++i) du(i) = signals::derivative(*b[i], t, 1);
  return du;
}

// Per-edge weighted signum feedback sum_j a_ij sgn(x_i - x_j).
Vector edge_signum(const WeightedDigraph& g, const Vector& x) {
  Vector out = Vector::Zero(x.size());
  const Matrix& w = g.weights();
  for (int i = 0; i < x.size(); ++i)
    for (int j = 0; j < x.size(); ++j)
      if (w(i, j) > 0.0) out(i) += w(i, j) * sgn(x(i) - x(j));
  return out;
}

}  // namespace

std::string variant_name(const CtAlgorithmSpec& spec) {
  struct V {
    std::string operator()(const BasicDac&) const { return "basic_dac"; }
    std::string operator()(const PiDac&) const { return "pi_dac"; }
    std::string operator()(const FoiDac&) const { return "foi_dac"; }
    std::string operator()(const DirectedPiDac&) const { return "directed_pi_dac"; }
    std::string operator()(const SlidingBasic&) const { return "sliding_basic"; }
    std::string operator()(const SlidingTwoHop&) const { return "sliding_two_hop"; }
    std::string operator()(const SlidingOneHop&) const { return "sliding_one_hop"; }
    std::string operator()(const SlidingRobust&) const { return "sliding_robust"; }
  };
  return std::visit(V{}, spec);
}

bool is_sliding(const CtAlgorithmSpec& spec) {
  return std::holds_alternative<SlidingBasic>(spec) ||
         std::holds_alternative<SlidingTwoHop>(spec) ||
         std::holds_alternative<SlidingOneHop>(spec) ||
         std::holds_alternative<SlidingRobust>(spec);
}

double default_sliding_gain(double gamma, int n) {
  return 2.0 * gamma * std::sqrt(double(n));
}

CtState make_initial_state(const CtAlgorithmSpec& spec, int n,
                           const signals::SignalBundle& bundle, double t0) {
  CtState st;
  st.t = t0;
  const Vector u0 = eval_inputs(bundle, t0);
  struct V {
    CtState& st;
    int n;
    const Vector& u0;
    void operator()(const BasicDac&) const { st.p = Vector::Zero(n); }
    void operator()(const PiDac&) const {
      st.p = Vector::Zero(n);  // p = x - u, so x(0) = u(0)
      st.q = Vector::Zero(n);
    }
    void operator()(const FoiDac&) const {
      st.q = Vector::Zero(n);
      st.z = Vector::Zero(n);
      st.x = u0;
    }
    void operator()(const DirectedPiDac&) const {
      st.p = Vector::Zero(n);  // p = u - x
      st.q = Vector::Zero(n);  // sum q(0) = 0
    }
    void operator()(const SlidingBasic&) const { st.p = Vector::Zero(n); }
    void operator()(const SlidingTwoHop&) const { st.p = Vector::Zero(n); }
    void operator()(const SlidingOneHop&) const {
      st.p = Vector::Zero(n);
      st.q = Vector::Zero(n);
    }
    void operator()(const SlidingRobust&) const { st.p = Vector::Zero(n); }
  };
  std::visit(V{st, n, u0}, spec);
  return st;
}

Vector output(const CtAlgorithmSpec& spec, const CtState& st,
              const WeightedDigraph& g, const Vector& u) {
  struct V {
    const CtState& st;
    const WeightedDigraph& g;
    const Vector& u;
    Vector operator()(const BasicDac&) const { return u - st.p; }
    Vector operator()(const PiDac&) const { return u + st.p; }
    Vector operator()(const FoiDac&) const { return st.x; }
    Vector operator()(const DirectedPiDac&) const { return u - st.p; }
    Vector operator()(const SlidingBasic&) const { return u - st.p; }
    Vector operator()(const SlidingTwoHop&) const {
      return u - laplacian(g) * st.p;
    }
    Vector operator()(const SlidingOneHop&) const {
      return u - laplacian(g) * st.p;
    }
    Vector operator()(const SlidingRobust&) const { return u - st.p; }
  };
  return std::visit(V{st, g, u}, spec);
}

CtState rhs(const CtAlgorithmSpec& spec, const CtState& st, const WeightedDigraph& g,
            const signals::SignalBundle& bundle, double t) {
  const int n = g.n();
  if (static_cast<int>(bundle.size()) != n)
    throw std::invalid_argument("bundle size != graph size");
  const Matrix l = laplacian(g);
  const Vector u = eval_inputs(bundle, t);
  const Vector x = output(spec, st, g, u);

  CtState d;
  d.t = 1.0;
  struct V {
    const CtState& st;
    const WeightedDigraph& g;
    const signals::SignalBundle& bundle;
    const Matrix& l;
    const Vector& u;
    const Vector& x;
    double t;
    CtState& d;

    void operator()(const BasicDac&) const { d.p = l * x; }
    void operator()(const PiDac& a) const {
      // q_dot = -L_I x ; p_dot = -alpha p - L_P x + L_I^T q, with p = x - u.
      const Matrix li = a.beta_scale * l;
      d.q = -(li * x);
      d.p = -a.alpha * st.p - l * x + li.transpose() * st.q;
    }
    void operator()(const FoiDac& a) const {
      const Matrix li = a.li_scale * l;
      const Vector du = eval_rates(bundle, t);
      d.q = (-(li * st.z)) / a.epsilon;
      d.z = (-(st.z + a.beta * u + du) - l * st.z + li.transpose() * st.q) / a.epsilon;
      d.x = -a.beta * st.x - st.z;
    }
    void operator()(const DirectedPiDac& a) const {
      const Vector lx = l * x;
      d.q = a.alpha * a.beta * lx;
      d.p = -a.alpha * st.p + a.beta * lx + st.q;
    }
    void operator()(const SlidingBasic& a) const { d.p = a.kp * edge_signum(g, x); }
    void operator()(const SlidingTwoHop& a) const {
      // Two-hop cycle within the step: p was shared (x = u - L p above), x is
      // shared, then p integrates kp sgn(L x).
      Vector lx = l * x;
      d.p = Vector(x.size());
      for (int i = 0; i < x.size(); ++i) d.p(i) = a.kp * sgn(lx(i));
    }
    void operator()(const SlidingOneHop& a) const {
      d.q = -a.alpha * st.q + x;
      Vector lq = l * st.q;
      d.p = Vector(x.size());
      for (int i = 0; i < x.size(); ++i) d.p(i) = a.kp * sgn(lq(i));
    }
    void operator()(const SlidingRobust& a) const {
      d.p = -st.p + a.kp * edge_signum(g, x);
    }
  };
  std::visit(V{st, g, bundle, l, u, x, t, d}, spec);
  return d;
}

namespace {

void axpy(CtState& y, double a, const CtState& x) {
  if (x.p.size()) y.p += a * x.p;
  if (x.q.size()) y.q += a * x.q;
  if (x.z.size()) y.z += a * x.z;
  if (x.x.size()) y.x += a * x.x;
}

bool finite(const CtState& s) {
  return (!s.p.size() || s.p.allFinite()) && (!s.q.size() || s.q.allFinite()) &&
         (!s.z.size() || s.z.allFinite()) && (!s.x.size() || s.x.allFinite());
}

}  // namespace

void integrate_segment(Trajectory& traj, const CtAlgorithmSpec& spec,
                       const WeightedDigraph& g, const signals::SignalBundle& bundle,
                       CtState& state, double t_end, double dt,
                       const CtRunOptions& opts, bool record_initial) {
  if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
  const int n = g.n();
  std::vector<int> ids = opts.agent_ids;
  if (ids.empty()) {
    ids.resize(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
  } else if (static_cast<int>(ids.size()) != n) {
    throw std::invalid_argument("agent id list does not match graph size");
  }

  auto record = [&](const CtState& st) {
    const Vector u = eval_inputs(bundle, st.t);
    traj.push(st.t, ids, output(spec, st, g, u), u, u.mean());
    if (opts.store_internal) {
      if (st.p.size()) traj.internal["p"].push_back(st.p);
      if (st.q.size()) traj.internal["q"].push_back(st.q);
      if (st.z.size()) traj.internal["z"].push_back(st.z);
    }
  };

  if (record_initial) record(state);

  const long steps = std::lround((t_end - state.t) / dt);
  const bool euler = is_sliding(spec);
  for (long k = 0; k < steps; ++k) {
    const double t = state.t;
    if (euler) {
      CtState k1 = rhs(spec, state, g, bundle, t);
      axpy(state, dt, k1);
    } else {
      CtState k1 = rhs(spec, state, g, bundle, t);
      CtState s2 = state;
      axpy(s2, 0.5 * dt, k1);
      s2.t = t + 0.5 * dt;
      CtState k2 = rhs(spec, s2, g, bundle, t + 0.5 * dt);
      CtState s3 = state;
      axpy(s3, 0.5 * dt, k2);
      s3.t = t + 0.5 * dt;
      CtState k3 = rhs(spec, s3, g, bundle, t + 0.5 * dt);
      CtState s4 = state;
      axpy(s4, dt, k3);
      s4.t = t + dt;
      CtState k4 = rhs(spec, s4, g, bundle, t + dt);
      axpy(state, dt / 6.0, k1);
      axpy(state, dt / 3.0, k2);
      axpy(state, dt / 3.0, k3);
      axpy(state, dt / 6.0, k4);
    }
    state.t = t + dt;
    if (!finite(state))
      throw std::runtime_error("ct integration diverged (" + variant_name(spec) +
                               ") at t = " + std::to_string(state.t));
    record(state);
  }
}

Trajectory integrate(const CtAlgorithmSpec& spec, const WeightedDigraph& g,
                     const signals::SignalBundle& bundle, CtState state, double t_end,
                     double dt, const CtRunOptions& opts) {
  Trajectory traj;
  traj.algorithm = variant_name(spec);
  traj.dt = dt;
  if (!opts.schedule) {
    integrate_segment(traj, spec, g, bundle, state, t_end, dt, opts, true);
    return traj;
  }

  // Graph swaps happen between steps; dt must divide the segment boundaries.
  opts.schedule->validate();
  bool first = true;
  while (state.t < t_end - 0.5 * dt) {
    double next = t_end;
    for (const auto& seg : opts.schedule->segments)
      if (seg.start > state.t + 0.5 * dt && seg.start < next) next = seg.start;
    double span = next - state.t;
    if (std::abs(span / dt - std::lround(span / dt)) > 1e-6)
      throw std::invalid_argument("dt must divide topology switch times");
    integrate_segment(traj, spec, opts.schedule->active(state.t + 0.5 * dt), bundle,
                      state, next, dt, opts, first);
    first = false;
  }
  return traj;
}

double ultimate_bound(const CtAlgorithmSpec& spec, const WeightedDigraph& g,
                      double gamma) {
  if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
  const auto spectral = spectrum(g);
  if (spectral.lambda2 <= 0.0)
    throw std::invalid_argument("graph must be connected and weight-balanced");

  if (std::holds_alternative<BasicDac>(spec)) return gamma / spectral.lambda2;
  if (auto* d = std::get_if<DirectedPiDac>(&spec))
    return gamma / (d->beta * spectral.lambda2);
  if (auto* p = std::get_if<PiDac>(&spec)) {
    auto [a, b] = pidac_error_system(g, p->alpha, p->beta_scale);
    auto iss = analysis::iss_sym_bound(a);
    analysis::IssBound bound = iss ? *iss : analysis::empirical_iss_fit(a);
    return bound.kappa * b.operatorNorm() * gamma / bound.lambda;
  }
  throw std::invalid_argument("no analytic ultimate bound for " + variant_name(spec));
}

std::pair<Matrix, Matrix> pidac_error_system(const WeightedDigraph& g, double alpha,
                                             double beta_scale) {
  const int n = g.n();
  const int m = n - 1;
  auto basis = disagreement_basis(n);
  const Matrix l = laplacian(g);
  const Matrix sli = basis.r.transpose() * (beta_scale * l) * basis.r;
  const Matrix slp = basis.r.transpose() * l * basis.r;

  Matrix a = Matrix::Zero(2 * m + 1, 2 * m + 1);
  a.block(0, m + 1, m, m) = -sli;
  a(m, m) = -alpha;
  a.block(m + 1, 0, m, m) = sli.transpose();
  a.block(m + 1, m + 1, m, m) = -alpha * Matrix::Identity(m, m) - slp;

  Matrix b = Matrix::Zero(2 * m + 1, m);
  b.block(0, 0, m, m) = -alpha * sli.transpose().inverse();
  b.block(m + 1, 0, m, m) = Matrix::Identity(m, m);
  return {a, b};
}

std::vector<double> conservation_residual(const Trajectory& traj) {
  std::vector<double> residual(traj.steps());
  auto it = traj.internal.find("p");
  // The directed PI estimator is diagnosed through its decaying sum identity
  // sum x - sum u; the p-form integrators through their conserved sum p.
  if (it != traj.internal.end() && traj.algorithm != "directed_pi_dac") {
    for (size_t k = 0; k < traj.steps(); ++k) residual[k] = it->second[k].sum();
  } else {
    for (size_t k = 0; k < traj.steps(); ++k)
      residual[k] = traj.x[k].sum() - traj.u[k].sum();
  }
  return residual;
}

}  // namespace dacs::ct

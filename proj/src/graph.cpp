#include "dacs/graph.hpp"

#include <algorithm>
#include <complex>

#include <Eigen/Eigenvalues>

namespace dacs {

WeightedDigraph::WeightedDigraph(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows() != weights_.cols() || weights_.rows() < 1)
    throw std::invalid_argument("graph weights must be a square matrix, n >= 1");
  for (int i = 0; i < weights_.rows(); ++i) {
    if (weights_(i, i) != 0.0)
      throw std::invalid_argument("graph has nonzero diagonal weight");
    for (int j = 0; j < weights_.cols(); ++j)
      if (weights_(i, j) < 0.0)
        throw std::invalid_argument("graph has negative edge weight");
  }
}

WeightedDigraph WeightedDigraph::from_edges(
    int n, const std::vector<std::tuple<int, int, double>>& edges) {
  Matrix w = Matrix::Zero(n, n);
  for (const auto& [from, to, weight] : edges) {
    if (from < 0 || from >= n || to < 0 || to >= n)
      throw std::invalid_argument("edge endpoint out of range");
    w(from, to) = weight;
  }
  return WeightedDigraph(std::move(w));
}

WeightedDigraph WeightedDigraph::directed_ring(int n, double w) {
  Matrix m = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) m(i, (i + 1) % n) = w;
  return WeightedDigraph(std::move(m));
}

WeightedDigraph WeightedDigraph::undirected_ring(int n, double w) {
  Matrix m = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    m(i, (i + 1) % n) = w;
    m((i + 1) % n, i) = w;
  }
  return WeightedDigraph(std::move(m));
}

WeightedDigraph WeightedDigraph::complete(int n, double w) {
  Matrix m = Matrix::Constant(n, n, w);
  m.diagonal().setZero();
  return WeightedDigraph(std::move(m));
}

double WeightedDigraph::max_out_degree() const {
  double d = 0.0;
  for (int i = 0; i < n(); ++i) d = std::max(d, out_degree(i));
  return d;
}

bool WeightedDigraph::undirected(double tol) const {
  return (weights_ - weights_.transpose()).cwiseAbs().maxCoeff() <= tol;
}

Matrix DisagreementBasis::full() const {
  const int n = static_cast<int>(r.rows());
  Matrix t(n, n);
  t.col(0) = Vector::Constant(n, 1.0 / std::sqrt(double(n)));
  t.rightCols(n - 1) = r;
  return t;
}

const WeightedDigraph& TopologySchedule::active(double t) const {
  validate();
  const WeightedDigraph* g = &segments.front().graph;
  for (const auto& seg : segments) {
    if (seg.start <= t) g = &seg.graph;
  }
  return *g;
}

void TopologySchedule::validate() const {
  if (segments.empty()) throw std::invalid_argument("empty topology schedule");
  if (dwell <= 0.0) throw std::invalid_argument("schedule dwell must be positive");
  for (size_t k = 1; k < segments.size(); ++k)
    if (segments[k].start <= segments[k - 1].start)
      throw std::invalid_argument("schedule start times must be strictly increasing");
}

Matrix laplacian(const WeightedDigraph& g) {
  const Matrix& w = g.weights();
  Matrix l = -w;
  l.diagonal() += w.rowwise().sum();
  return l;
}

bool is_weight_balanced(const WeightedDigraph& g, double tol) {
  if (tol < 0.0) throw std::invalid_argument("balance tolerance must be >= 0");
  double worst = 0.0;
  for (int i = 0; i < g.n(); ++i)
    worst = std::max(worst, std::abs(g.out_degree(i) - g.in_degree(i)));
  return worst <= tol;
}

bool is_weight_balanced(const WeightedDigraph& g) {
  return is_weight_balanced(g, 1e-9 * std::max(1.0, g.max_out_degree()));
}

namespace {

// Reachability along the information-flow direction: i reads j when w(i,j)>0.
void dfs(const Matrix& w, int start, std::vector<char>& seen, bool transpose) {
  std::vector<int> stack{start};
  seen.assign(w.rows(), 0);
  seen[start] = 1;
  while (!stack.empty()) {
    int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < w.cols(); ++j) {
      double a = transpose ? w(j, i) : w(i, j);
      if (a > 0.0 && !seen[j]) {
        seen[j] = 1;
        stack.push_back(j);
      }
    }
  }
}

}  // namespace

bool is_strongly_connected(const WeightedDigraph& g) {
  if (g.n() == 1) return true;
  std::vector<char> seen;
  dfs(g.weights(), 0, seen, false);
  if (std::find(seen.begin(), seen.end(), 0) != seen.end()) return false;
  dfs(g.weights(), 0, seen, true);
  return std::find(seen.begin(), seen.end(), 0) == seen.end();
}

LaplacianSpectrum spectrum(const WeightedDigraph& g) {
  const Matrix l = laplacian(g);
  const Matrix sym = 0.5 * (l + l.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> es(sym);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("symmetric eigensolver failed to converge");

  LaplacianSpectrum out;
  out.eigenvalues_sym.assign(es.eigenvalues().data(),
                             es.eigenvalues().data() + g.n());
  std::sort(out.eigenvalues_sym.begin(), out.eigenvalues_sym.end());
  out.lambda2 = g.n() > 1 ? out.eigenvalues_sym[1] : 0.0;
  out.lambdaN = out.eigenvalues_sym.back();

  Eigen::EigenSolver<Matrix> ge(l, /*computeEigenvectors=*/false);
  if (ge.info() != Eigen::Success)
    throw std::runtime_error("general eigensolver failed to converge");
  for (int i = 0; i < g.n(); ++i) out.eigenvalues_L.push_back(ge.eigenvalues()(i));
  std::sort(out.eigenvalues_L.begin(), out.eigenvalues_L.end(),
            [](const auto& a, const auto& b) {
              return a.real() != b.real() ? a.real() < b.real()
                                          : a.imag() < b.imag();
            });
  return out;
}

DisagreementBasis disagreement_basis(int n) {
  if (n < 2) throw std::invalid_argument("disagreement basis needs n >= 2");
  // Householder reflector H with H e_1 = 1/sqrt(n); columns 2..n span 1^perp.
  Vector a = Vector::Constant(n, 1.0 / std::sqrt(double(n)));
  Vector v = a;
  v(0) -= 1.0;
  Matrix h = Matrix::Identity(n, n) - (2.0 / v.squaredNorm()) * (v * v.transpose());
  DisagreementBasis basis;
  basis.r = h.rightCols(n - 1);
  return basis;
}

WeightedDigraph scale_weights(const WeightedDigraph& g, double delta) {
  if (delta <= 0.0) throw std::invalid_argument("weight scale must be positive");
  return WeightedDigraph(delta * g.weights());
}

bool union_strongly_connected(const TopologySchedule& s, double window_start,
                              double window_end) {
  s.validate();
  if (window_end <= window_start) throw std::invalid_argument("empty window");
  const int n = s.segments.front().graph.n();
  Matrix u = Matrix::Zero(n, n);
  for (size_t k = 0; k < s.segments.size(); ++k) {
    double seg_start = s.segments[k].start;
    double seg_end = k + 1 < s.segments.size()
                         ? s.segments[k + 1].start
                         : std::max(window_end, seg_start + s.dwell);
    if (seg_start < window_end && seg_end > window_start)
      u += s.segments[k].graph.weights();
  }
  return is_strongly_connected(WeightedDigraph(std::move(u)));
}

Matrix ones_projector(int n) {
  return Matrix::Identity(n, n) - Matrix::Constant(n, n, 1.0 / n);
}

}  // namespace dacs

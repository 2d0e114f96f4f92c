#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dacs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Weighted digraph over agents 0..n-1. weights(i,j) > 0 means the edge
/// (i,j) exists: agent j sends its values to agent i, i.e. j is an
/// out-neighbor of i and agent i's update may read agent j's state.
/// Immutable after construction; safe to share across concurrent runs.
class WeightedDigraph {
 public:
  WeightedDigraph() = default;
  explicit WeightedDigraph(Matrix weights);

  static WeightedDigraph from_edges(
      int n, const std::vector<std::tuple<int, int, double>>& edges);
  static WeightedDigraph directed_ring(int n, double w = 1.0);
  static WeightedDigraph undirected_ring(int n, double w = 1.0);
  static WeightedDigraph complete(int n, double w = 1.0);

  int n() const { return static_cast<int>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }
  double weight(int i, int j) const { return weights_(i, j); }

  // Degree conventions follow the graph-theory usage in the algorithms:
  // out_degree(i) = sum_j w(j,i), in_degree(i) = sum_j w(i,j).
  double out_degree(int i) const { return weights_.col(i).sum(); }
  double in_degree(int i) const { return weights_.row(i).sum(); }
  double max_out_degree() const;

  bool undirected(double tol = 1e-12) const;

 private:
  Matrix weights_;  // zero diagonal, nonnegative entries
};

struct LaplacianSpectrum {
  std::vector<double> eigenvalues_sym;               // sorted ascending
  std::vector<std::complex<double>> eigenvalues_L;   // sorted by real part
  double lambda2 = 0.0;                              // second smallest of Sym(L)
  double lambdaN = 0.0;                              // largest of Sym(L)
};

/// Orthonormal basis R of the disagreement subspace (orthogonal complement
/// of the all-ones direction); [1/sqrt(n), R] is orthogonal. Construction is
/// a fixed Householder reflector, so it is deterministic across runs.
struct DisagreementBasis {
  Matrix r;  // n x (n-1)
  Matrix full() const;  // T = [1/sqrt(n)*ones, R]
};

struct TopologySegment {
  double start;
  WeightedDigraph graph;
};

struct TopologySchedule {
  std::vector<TopologySegment> segments;  // start times strictly increasing
  double dwell = 0.0;

  const WeightedDigraph& active(double t) const;
  void validate() const;
};

// L = diag(row sums of W) - W, so [L x]_i = sum_j w_ij (x_i - x_j) and
// L*1 = 0 for every graph. 1^T L = 0 iff the graph is weight-balanced.
Matrix laplacian(const WeightedDigraph& g);

bool is_weight_balanced(const WeightedDigraph& g, double tol);
// Default tolerance 1e-9 relative to the max out-degree.
bool is_weight_balanced(const WeightedDigraph& g);

bool is_strongly_connected(const WeightedDigraph& g);

LaplacianSpectrum spectrum(const WeightedDigraph& g);

DisagreementBasis disagreement_basis(int n);

WeightedDigraph scale_weights(const WeightedDigraph& g, double delta);

/// True iff the edge-union of all schedule segments intersecting
/// [window_start, window_end] is strongly connected.
bool union_strongly_connected(const TopologySchedule& s, double window_start,
                              double window_end);

Matrix ones_projector(int n);  // I - 11^T/n

}  // namespace dacs

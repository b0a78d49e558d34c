#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "purify/random.hpp"
#include "purify/sparse_model.hpp"

namespace purify {

using SpMat = Eigen::SparseMatrix<double>;  // column-major, d x H

// sigma(v, e) = v * 1{|v| >= e}; the gate is inclusive.
inline double activation(double v, double e) { return std::abs(v) >= e ? v : 0.0; }

struct ScalarHead {
  Vec a;  // length H
};

// Either an explicit H x d matrix A, or the pseudo-inverse head
// A = tau * W^+ kept in factored form tau * U' G^{-1} M' with G = U U'.
struct MatrixHead {
  bool factored = false;
  Mat A;
  double tau = 0.0;
  std::shared_ptr<const Mat> Ginv;
};

using Head = std::variant<std::monostate, ScalarHead, MatrixHead>;

enum class Assignment { Grouped, Independent };

struct PurifiedSpec {
  int m = 1;
  int H = 10000;
  Assignment assignment = Assignment::Grouped;

  double entry_value(int d) const { return static_cast<double>(d) / (static_cast<double>(H) * m); }
  double gate_value(int d, double zeta) const {
    return zeta * std::log(static_cast<double>(d)) / std::sqrt(static_cast<double>(d)) *
           (static_cast<double>(d) * std::sqrt(static_cast<double>(m)) / H);
  }
};

class GatedNetwork {
 public:
  GatedNetwork() = default;

  // First layer given directly as W (d x H).
  static GatedNetwork dense(Mat W, Vec b, Head head = {});
  // First layer W = M U with U sparse in feature coordinates.
  static GatedNetwork factored(std::shared_ptr<const Mat> M, SpMat U, Vec b, Head head = {});

  // Caches U = M'W, dropping entries below 1e-13 * max|U|.
  GatedNetwork attach_mixing(std::shared_ptr<const Mat> M) const;
  GatedNetwork with_head(Head head) const;
  GatedNetwork with_gates(Vec b) const;

  int d() const { return layer_ ? layer_->d : 0; }
  int H() const { return layer_ ? layer_->H : 0; }
  const Vec& b() const { return b_; }
  const Head& head() const { return head_; }
  bool has_scalar_head() const { return std::holds_alternative<ScalarHead>(head_); }
  bool has_matrix_head() const { return std::holds_alternative<MatrixHead>(head_); }
  const ScalarHead& scalar_head() const;
  const MatrixHead& matrix_head() const;

  bool is_factored() const { return layer_ && !layer_->W; }
  bool has_mixing() const { return layer_ && layer_->M; }
  bool has_U() const { return layer_ && layer_->U.has_value(); }
  const Mat& M() const;
  const std::shared_ptr<const Mat>& M_ptr() const { return layer_->M; }
  const SpMat& U() const;  // feature-space weights M'W

  Vec preactivation(const Vec& z) const;  // W'z
  Vec weights_times(const Vec& v) const;  // W v, v of length H
  Vec weights_transpose_times(const Vec& z) const { return preactivation(z); }
  Mat weights() const;                    // materialized W
  Vec hidden(const Vec& z) const;         // sigma(W'z, b) elementwise
  std::vector<char> gates(const Vec& z) const;

  // r = A' s for a hidden vector s; A r' for a representation r'.
  Vec head_transpose_times(const Vec& s) const;
  Vec head_times(const Vec& r) const;
  Mat head_matrix() const;  // materialized A (H x d)

  // True when the first layer object is shared (same pointer), used to
  // assert that downstream fitting leaves W untouched.
  bool shares_layer_with(const GatedNetwork& other) const { return layer_ == other.layer_; }

 private:
  struct Layer {
    int d = 0;
    int H = 0;
    std::optional<Mat> W;
    std::shared_ptr<const Mat> M;
    std::optional<SpMat> U;
  };
  std::shared_ptr<const Layer> layer_;
  Vec b_;
  Head head_;

  void check_input(const Vec& z) const;
};

// W = M U, b uniform at the gate value, scalar head a = 1.
// Grouped: features are split into d/m random groups and every group owns a
// disjoint block of Hm/d nodes, so each node carries exactly m features.
// Independent: each feature picks Hm/d distinct nodes on its own; node loads
// vary around m.
GatedNetwork build_purified(const SparseModel& model, const PurifiedSpec& spec, Rng& rng);
SpMat purified_assignment(int d, const PurifiedSpec& spec, Rng& rng);

struct MembershipReport {
  int nodes = 0;
  int empty_nodes = 0;
  int sparsity_failures = 0;        // ||U_h||_0 > m_star
  int sign_failures = 0;            // rows with mixed-sign nonzeros
  int window_upper_failures = 0;    // b_h >= ||U_h|| / sqrt(k ||U_h||_0)
  int window_lower_failures = 0;    // b_h <= ||U_h|| / sqrt(k ||U_h||_0) / log d
  double min_upper_margin = 0.0;    // min over nodes of c_h / b_h
  double min_lower_margin = 0.0;    // min over nodes of b_h log d / c_h
  int max_node_load = 0;
  bool sparsity_ok() const { return sparsity_failures == 0 && empty_nodes == 0; }
  bool sign_ok() const { return sign_failures == 0; }
  bool window_upper_ok() const { return window_upper_failures == 0; }
  bool window_lower_ok() const { return window_lower_failures == 0; }
};

MembershipReport check_membership(const GatedNetwork& net, int m_star, int k);

double forward_supervised(const GatedNetwork& net, const Vec& z);
Vec represent(const GatedNetwork& net, const Vec& z);

// A = tau W^+ = tau W'(WW')^{-1}. Throws SingularityError when WW' is
// numerically singular.
GatedNetwork pseudo_head(const GatedNetwork& net, double tau = std::sqrt(5.0));

// Inverse of the Gram matrix G (symmetric positive definite). Uses a Cholesky
// solve, falling back to an eigendecomposition when cond(G) > 1e12.
Mat gram_inverse(const Mat& G, int other_dim);

// Binary persistence; throws FormatError on malformed input.
void save_network(const GatedNetwork& net, const std::string& path);
GatedNetwork load_network(const std::string& path);

}  // namespace purify

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "purify/random.hpp"

namespace purify {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ScaledByDim draws xi ~ N(0, zeta^2 I / d); Raw draws xi ~ N(0, zeta^2 I).
enum class NoiseConvention { ScaledByDim, Raw };

class SparseModel {
 public:
  // Throws ModelError when M is not square, not unitary to 1e-10, or when
  // the scalar parameters are out of range.
  SparseModel(std::shared_ptr<const Mat> M, int k, double zeta, NoiseConvention noise,
               Vec theta0, double sigma_y);

  // theta0 = 1-vector, sigma_y = 0.1.
  static SparseModel with_defaults(std::shared_ptr<const Mat> M, int k, double zeta,
                                   NoiseConvention noise);

  // Same mixing matrix (shared, bit-identical), new response law.
  SparseModel with_response(Vec theta0, double sigma_y) const;

  int d() const { return static_cast<int>(M_->rows()); }
  int k() const { return k_; }
  double zeta() const { return zeta_; }
  NoiseConvention noise() const { return noise_; }
  const Mat& M() const { return *M_; }
  const std::shared_ptr<const Mat>& M_ptr() const { return M_; }
  const Vec& theta0() const { return theta0_; }
  double sigma_y() const { return sigma_y_; }

  // Per-coordinate standard deviation of xi.
  double noise_std() const;
  bool identity_mixing() const;

 private:
  std::shared_ptr<const Mat> M_;
  int k_;
  double zeta_;
  NoiseConvention noise_;
  Vec theta0_;
  double sigma_y_;
};

struct Sample {
  Vec x;
  Vec z;
  std::vector<int> active_set;  // sorted support of x
};

struct ContrastivePair {
  Vec z;
  Vec z_prime;
  int y = 1;
  Vec x;
  Vec x_prime;
};

// Haar-distributed orthogonal matrix: QR of a standard Gaussian matrix with
// the diagonal of R made positive.
Mat sample_unitary(int d, std::uint64_t seed);
Mat sample_unitary(int d, Rng& rng);

Vec sample_features(const SparseModel& model, Rng& rng);
Vec observe(const SparseModel& model, const Vec& x, Rng& rng);
double respond(const SparseModel& model, const Vec& x, Rng& rng);
// Classification branch: returns +1 with probability 1/(1+exp(theta0'x)), else -1.
int respond_class(const SparseModel& model, const Vec& x, Rng& rng);

std::vector<int> support(const Vec& x);
Sample draw_sample(const SparseModel& model, Rng& rng);

// Draw order: x, x' (only when y = -1), xi, xi'.
ContrastivePair sample_pair(const SparseModel& model, int y, Rng& rng);

// Column-wise batch of n draws. Column j is bit-identical to the j-th
// sequential call of sample_features / the noise part of observe.
Mat sample_features_batch(const SparseModel& model, int n, Rng& rng);
Mat sample_noise_batch(const SparseModel& model, int n, Rng& rng);
// M X + noise, and theta0'x + sigma_y g per column.
Mat observe_batch(const SparseModel& model, const Mat& X, Rng& rng);
Vec respond_batch(const SparseModel& model, const Mat& X, Rng& rng);

}  // namespace purify

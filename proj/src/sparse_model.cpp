#include "purify/sparse_model.hpp"

#include <cmath>
#include <string>

#include "purify/errors.hpp"

namespace purify {

namespace {

void check_unitary(const Mat& M) {
  if (M.rows() == 0 || M.rows() != M.cols())
    throw ModelError("mixing matrix must be square and non-empty, got " + std::to_string(M.rows()) +
                     "x" + std::to_string(M.cols()));
  const double err = (M.transpose() * M - Mat::Identity(M.rows(), M.cols())).cwiseAbs().maxCoeff();
  if (!(err <= 1e-10))
    throw ModelError("mixing matrix is not unitary: max|M'M - I| = " + std::to_string(err));
}

}  // namespace

SparseModel::SparseModel(std::shared_ptr<const Mat> M, int k, double zeta, NoiseConvention noise,
                         Vec theta0, double sigma_y)
    : M_(std::move(M)), k_(k), zeta_(zeta), noise_(noise), theta0_(std::move(theta0)),
      sigma_y_(sigma_y) {
  if (!M_) throw ModelError("mixing matrix is null");
  check_unitary(*M_);
  const int dim = d();
  if (k_ < 1 || k_ > dim)
    throw ModelError("sparsity k must satisfy 1 <= k <= d, got k=" + std::to_string(k_));
  if (!(zeta_ >= 0.0)) throw ModelError("noise scale zeta must be non-negative");
  if (!(sigma_y_ >= 0.0)) throw ModelError("response noise sigma_y must be non-negative");
  if (theta0_.size() != dim)
    throw DimensionError("theta0 has length " + std::to_string(theta0_.size()) + ", expected " +
                         std::to_string(dim));
}

SparseModel SparseModel::with_defaults(std::shared_ptr<const Mat> M, int k, double zeta,
                                       NoiseConvention noise) {
  const auto dim = M ? M->rows() : 0;
  return SparseModel(std::move(M), k, zeta, noise, Vec::Ones(dim), 0.1);
}

SparseModel SparseModel::with_response(Vec theta0, double sigma_y) const {
  return SparseModel(M_, k_, zeta_, noise_, std::move(theta0), sigma_y);
}

double SparseModel::noise_std() const {
  return noise_ == NoiseConvention::ScaledByDim ? zeta_ / std::sqrt(static_cast<double>(d()))
                                                : zeta_;
}

bool SparseModel::identity_mixing() const {
  return (*M_ - Mat::Identity(d(), d())).cwiseAbs().maxCoeff() == 0.0;
}

Mat sample_unitary(int d, Rng& rng) {
  if (d < 1) throw DimensionError("sample_unitary needs d >= 1, got " + std::to_string(d));
  std::normal_distribution<double> normal;
  Mat G(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) G(i, j) = normal(rng);
  Eigen::HouseholderQR<Mat> qr(G);
  Mat Q = qr.householderQ() * Mat::Identity(d, d);
  const Mat& R = qr.matrixQR();
  for (int j = 0; j < d; ++j)
    if (R(j, j) < 0) Q.col(j) = -Q.col(j);
  return Q;
}

Mat sample_unitary(int d, std::uint64_t seed) {
  Rng rng = make_stream(seed, 0, Stream::Mixing);
  return sample_unitary(d, rng);
}

Vec sample_features(const SparseModel& model, Rng& rng) {
  const int d = model.d();
  const double p = static_cast<double>(model.k()) / d;
  const double rk = 1.0 / std::sqrt(static_cast<double>(model.k()));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal;
  Vec x = Vec::Zero(d);
  for (int i = 0; i < d; ++i) {
    if (unif(rng) >= p) continue;
    const double mag = std::min(1.0, std::abs(normal(rng)) * rk + rk);
    x(i) = unif(rng) < 0.5 ? mag : -mag;
  }
  return x;
}

Vec observe(const SparseModel& model, const Vec& x, Rng& rng) {
  if (x.size() != model.d())
    throw DimensionError("observe: x has length " + std::to_string(x.size()) + ", expected " +
                         std::to_string(model.d()));
  Vec z = model.M() * x;
  if (model.zeta() > 0) {
    std::normal_distribution<double> normal(0.0, model.noise_std());
    for (int i = 0; i < z.size(); ++i) z(i) += normal(rng);
  }
  return z;
}

double respond(const SparseModel& model, const Vec& x, Rng& rng) {
  if (x.size() != model.d()) throw DimensionError("respond: x has wrong length");
  double y = model.theta0().dot(x);
  if (model.sigma_y() > 0) {
    std::normal_distribution<double> normal(0.0, model.sigma_y());
    y += normal(rng);
  }
  return y;
}

int respond_class(const SparseModel& model, const Vec& x, Rng& rng) {
  if (x.size() != model.d()) throw DimensionError("respond_class: x has wrong length");
  const double p = 1.0 / (1.0 + std::exp(model.theta0().dot(x)));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  return unif(rng) < p ? 1 : -1;
}

std::vector<int> support(const Vec& x) {
  std::vector<int> s;
  for (int i = 0; i < x.size(); ++i)
    if (x(i) != 0.0) s.push_back(i);
  return s;
}

Sample draw_sample(const SparseModel& model, Rng& rng) {
  Sample s;
  s.x = sample_features(model, rng);
  s.z = observe(model, s.x, rng);
  s.active_set = support(s.x);
  return s;
}

ContrastivePair sample_pair(const SparseModel& model, int y, Rng& rng) {
  if (y != 1 && y != -1) throw LabelError("contrastive label must be +1 or -1, got " + std::to_string(y));
  ContrastivePair p;
  p.y = y;
  p.x = sample_features(model, rng);
  p.x_prime = y == 1 ? p.x : sample_features(model, rng);
  p.z = observe(model, p.x, rng);
  p.z_prime = observe(model, p.x_prime, rng);
  return p;
}

Mat sample_features_batch(const SparseModel& model, int n, Rng& rng) {
  Mat X(model.d(), n);
  for (int j = 0; j < n; ++j) X.col(j) = sample_features(model, rng);
  return X;
}

Mat sample_noise_batch(const SparseModel& model, int n, Rng& rng) {
  Mat E = Mat::Zero(model.d(), n);
  if (model.zeta() == 0) return E;
  for (int j = 0; j < n; ++j) {
    std::normal_distribution<double> normal(0.0, model.noise_std());
    for (int i = 0; i < model.d(); ++i) E(i, j) = normal(rng);
  }
  return E;
}

Mat observe_batch(const SparseModel& model, const Mat& X, Rng& rng) {
  if (X.rows() != model.d()) throw DimensionError("observe_batch: X has wrong number of rows");
  Mat Z = sample_noise_batch(model, static_cast<int>(X.cols()), rng);
  Z.noalias() += model.M() * X;
  return Z;
}

Vec respond_batch(const SparseModel& model, const Mat& X, Rng& rng) {
  if (X.rows() != model.d()) throw DimensionError("respond_batch: X has wrong number of rows");
  Vec y = X.transpose() * model.theta0();
  if (model.sigma_y() > 0) {
    std::normal_distribution<double> normal(0.0, model.sigma_y());
    for (Eigen::Index j = 0; j < y.size(); ++j) y(j) += normal(rng);
  }
  return y;
}

}  // namespace purify

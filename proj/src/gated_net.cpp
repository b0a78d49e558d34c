#include "purify/gated_net.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "purify/errors.hpp"

namespace purify {

GatedNetwork GatedNetwork::dense(Mat W, Vec b, Head head) {
  if (W.rows() < 1 || W.cols() < 1) throw DimensionError("W must be non-empty");
  if (b.size() != W.cols())
    throw DimensionError("b has length " + std::to_string(b.size()) + ", expected H=" +
                         std::to_string(W.cols()));
  if ((b.array() < 0).any()) throw DimensionError("gate thresholds must be non-negative");
  auto layer = std::make_shared<Layer>();
  layer->d = static_cast<int>(W.rows());
  layer->H = static_cast<int>(W.cols());
  layer->W = std::move(W);
  GatedNetwork net;
  net.layer_ = std::move(layer);
  net.b_ = std::move(b);
  return net.with_head(std::move(head));
}

GatedNetwork GatedNetwork::factored(std::shared_ptr<const Mat> M, SpMat U, Vec b, Head head) {
  if (!M) throw DimensionError("factored network needs a mixing matrix");
  if (M->rows() != M->cols() || M->rows() != U.rows())
    throw DimensionError("mixing matrix and U disagree on d");
  if (b.size() != U.cols()) throw DimensionError("b has wrong length");
  if ((b.array() < 0).any()) throw DimensionError("gate thresholds must be non-negative");
  U.makeCompressed();
  auto layer = std::make_shared<Layer>();
  layer->d = static_cast<int>(U.rows());
  layer->H = static_cast<int>(U.cols());
  layer->M = std::move(M);
  layer->U = std::move(U);
  GatedNetwork net;
  net.layer_ = std::move(layer);
  net.b_ = std::move(b);
  return net.with_head(std::move(head));
}

GatedNetwork GatedNetwork::attach_mixing(std::shared_ptr<const Mat> M) const {
  if (!layer_ || !layer_->W) throw PreconditionError("attach_mixing needs a dense network");
  if (!M || M->rows() != d() || M->cols() != d()) throw DimensionError("mixing matrix has wrong shape");
  Mat Ud = M->transpose() * *layer_->W;
  const double tol = 1e-13 * Ud.cwiseAbs().maxCoeff();
  auto layer = std::make_shared<Layer>(*layer_);
  layer->M = std::move(M);
  layer->U = Ud.sparseView(1.0, tol);
  layer->U->makeCompressed();
  GatedNetwork net = *this;
  net.layer_ = std::move(layer);
  return net;
}

GatedNetwork GatedNetwork::with_head(Head head) const {
  if (auto* s = std::get_if<ScalarHead>(&head)) {
    if (s->a.size() != H()) throw DimensionError("scalar head must have length H");
  } else if (auto* mh = std::get_if<MatrixHead>(&head)) {
    if (mh->factored) {
      if (!is_factored() || !mh->Ginv || mh->Ginv->rows() != d())
        throw DimensionError("factored matrix head needs a factored first layer");
    } else if (mh->A.rows() != H() || mh->A.cols() != d()) {
      throw DimensionError("matrix head must be H x d");
    }
  }
  GatedNetwork net = *this;
  net.head_ = std::move(head);
  return net;
}

GatedNetwork GatedNetwork::with_gates(Vec b) const {
  if (b.size() != H()) throw DimensionError("b has wrong length");
  if ((b.array() < 0).any()) throw DimensionError("gate thresholds must be non-negative");
  GatedNetwork net = *this;
  net.b_ = std::move(b);
  return net;
}

const ScalarHead& GatedNetwork::scalar_head() const {
  if (auto* s = std::get_if<ScalarHead>(&head_)) return *s;
  throw HeadMismatchError("operation needs a scalar head");
}

const MatrixHead& GatedNetwork::matrix_head() const {
  if (auto* s = std::get_if<MatrixHead>(&head_)) return *s;
  throw HeadMismatchError("operation needs a matrix head");
}

const Mat& GatedNetwork::M() const {
  if (!has_mixing()) throw PreconditionError("network has no mixing matrix attached");
  return *layer_->M;
}

const SpMat& GatedNetwork::U() const {
  if (!has_U()) throw PreconditionError("feature-space weights U are not cached");
  return *layer_->U;
}

void GatedNetwork::check_input(const Vec& z) const {
  if (!layer_) throw PreconditionError("empty network");
  if (z.size() != d())
    throw DimensionError("input has length " + std::to_string(z.size()) + ", expected " +
                         std::to_string(d()));
}

Vec GatedNetwork::preactivation(const Vec& z) const {
  check_input(z);
  if (layer_->W) return layer_->W->transpose() * z;
  Vec zh = layer_->M->transpose() * z;
  return layer_->U->transpose() * zh;
}

Vec GatedNetwork::weights_times(const Vec& v) const {
  if (v.size() != H()) throw DimensionError("weights_times: vector must have length H");
  if (layer_->W) return *layer_->W * v;
  Vec u = *layer_->U * v;
  return *layer_->M * u;
}

Mat GatedNetwork::weights() const {
  if (layer_->W) return *layer_->W;
  return *layer_->M * *layer_->U;
}

Vec GatedNetwork::hidden(const Vec& z) const {
  Vec p = preactivation(z);
  for (int h = 0; h < p.size(); ++h) p(h) = activation(p(h), b_(h));
  return p;
}

std::vector<char> GatedNetwork::gates(const Vec& z) const {
  Vec p = preactivation(z);
  std::vector<char> g(p.size());
  for (int h = 0; h < p.size(); ++h) g[h] = std::abs(p(h)) >= b_(h);
  return g;
}

Vec GatedNetwork::head_transpose_times(const Vec& s) const {
  const MatrixHead& mh = matrix_head();
  if (s.size() != H()) throw DimensionError("hidden vector must have length H");
  if (!mh.factored) return mh.A.transpose() * s;
  Vec u = *layer_->U * s;
  Vec t = *mh.Ginv * u;
  return mh.tau * (*layer_->M * t);
}

Vec GatedNetwork::head_times(const Vec& r) const {
  const MatrixHead& mh = matrix_head();
  if (r.size() != d()) throw DimensionError("representation must have length d");
  if (!mh.factored) return mh.A * r;
  Vec rh = layer_->M->transpose() * r;
  Vec t = *mh.Ginv * rh;
  return mh.tau * (layer_->U->transpose() * t);
}

Mat GatedNetwork::head_matrix() const {
  const MatrixHead& mh = matrix_head();
  if (!mh.factored) return mh.A;
  Mat GM = *mh.Ginv * layer_->M->transpose();
  return mh.tau * (layer_->U->transpose() * GM);
}

namespace {

// First c entries of idx become a uniform random c-subset (partial Fisher-Yates).
void partial_shuffle(std::vector<int>& idx, int c, Rng& rng) {
  const int n = static_cast<int>(idx.size());
  for (int i = 0; i < c; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
}

}  // namespace

SpMat purified_assignment(int d, const PurifiedSpec& spec, Rng& rng) {
  const int m = spec.m, H = spec.H;
  if (d < 1 || m < 1 || H < 1) throw ConstructionError("d, m and H must be positive");
  const long long hm = static_cast<long long>(H) * m;
  if (hm % d != 0)
    throw ConstructionError("H*m = " + std::to_string(hm) + " is not divisible by d = " +
                            std::to_string(d));
  const int per_feature = static_cast<int>(hm / d);
  if (per_feature > H) throw ConstructionError("H*m/d exceeds H");
  const double v = spec.entry_value(d);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(hm));
  if (spec.assignment == Assignment::Grouped) {
    if (d % m != 0)
      throw ConstructionError("d = " + std::to_string(d) + " is not divisible by m = " +
                              std::to_string(m));
    std::vector<int> feat(d), node(H);
    std::iota(feat.begin(), feat.end(), 0);
    std::iota(node.begin(), node.end(), 0);
    partial_shuffle(feat, d, rng);
    partial_shuffle(node, H, rng);
    const int groups = d / m;
    for (int g = 0; g < groups; ++g)
      for (int a = 0; a < m; ++a)
        for (int c = 0; c < per_feature; ++c)
          trip.emplace_back(feat[g * m + a], node[g * per_feature + c], v);
  } else {
    std::vector<int> node(H);
    std::iota(node.begin(), node.end(), 0);
    for (int i = 0; i < d; ++i) {
      partial_shuffle(node, per_feature, rng);
      for (int c = 0; c < per_feature; ++c) trip.emplace_back(i, node[c], v);
    }
  }
  SpMat U(d, H);
  U.setFromTriplets(trip.begin(), trip.end());
  U.makeCompressed();
  return U;
}

GatedNetwork build_purified(const SparseModel& model, const PurifiedSpec& spec, Rng& rng) {
  SpMat U = purified_assignment(model.d(), spec, rng);
  Vec b = Vec::Constant(spec.H, spec.gate_value(model.d(), model.zeta()));
  return GatedNetwork::factored(model.M_ptr(), std::move(U), std::move(b),
                                ScalarHead{Vec::Ones(spec.H)});
}

MembershipReport check_membership(const GatedNetwork& net, int m_star, int k) {
  const SpMat& U = net.U();
  const int d = net.d(), H = net.H();
  MembershipReport rep;
  rep.nodes = H;
  rep.min_upper_margin = std::numeric_limits<double>::infinity();
  rep.min_lower_margin = std::numeric_limits<double>::infinity();
  std::vector<char> pos(d, 0), neg(d, 0);
  const double logd = std::log(static_cast<double>(d));
  for (int h = 0; h < H; ++h) {
    int nnz = 0;
    double sq = 0.0;
    for (SpMat::InnerIterator it(U, h); it; ++it) {
      if (it.value() == 0.0) continue;
      ++nnz;
      sq += it.value() * it.value();
      (it.value() > 0 ? pos : neg)[it.row()] = 1;
    }
    rep.max_node_load = std::max(rep.max_node_load, nnz);
    if (nnz == 0) {
      ++rep.empty_nodes;
      continue;
    }
    if (nnz > m_star) ++rep.sparsity_failures;
    const double c = std::sqrt(sq) / std::sqrt(static_cast<double>(k) * nnz);
    const double bh = net.b()(h);
    const double upper = bh > 0 ? c / bh : std::numeric_limits<double>::infinity();
    const double lower = bh * logd / c;
    rep.min_upper_margin = std::min(rep.min_upper_margin, upper);
    rep.min_lower_margin = std::min(rep.min_lower_margin, lower);
    if (!(bh < c)) ++rep.window_upper_failures;
    if (!(bh > c / logd)) ++rep.window_lower_failures;
  }
  for (int i = 0; i < d; ++i)
    if (pos[i] && neg[i]) ++rep.sign_failures;
  return rep;
}

double forward_supervised(const GatedNetwork& net, const Vec& z) {
  const ScalarHead& s = net.scalar_head();
  return s.a.dot(net.hidden(z));
}

Vec represent(const GatedNetwork& net, const Vec& z) {
  net.matrix_head();
  return net.head_transpose_times(net.hidden(z));
}

Mat gram_inverse(const Mat& G, int other_dim) {
  const int d = static_cast<int>(G.rows());
  const Mat I = Mat::Identity(d, d);
  Eigen::LLT<Mat> llt(G);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) return llt.solve(I);
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  const Vec& lam = es.eigenvalues();
  const double lmax = lam.maxCoeff(), lmin = lam.minCoeff();
  const double tol = std::max(d, other_dim) * std::numeric_limits<double>::epsilon() * lmax;
  if (!(lmin > tol))
    throw SingularityError("Gram matrix WW' is singular (W lacks full row rank)",
                           std::sqrt(std::max(lmin, 0.0)));
  return es.eigenvectors() * lam.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

GatedNetwork pseudo_head(const GatedNetwork& net, double tau) {
  if (net.d() > net.H())
    throw SingularityError("W has more rows than columns and cannot have full row rank", 0.0);
  if (net.is_factored()) {
    const SpMat& U = net.U();
    Mat G = Mat(U * U.transpose());
    MatrixHead mh;
    mh.factored = true;
    mh.tau = tau;
    mh.Ginv = std::make_shared<const Mat>(gram_inverse(G, net.H()));
    return net.with_head(std::move(mh));
  }
  Mat W = net.weights();
  Mat G = W * W.transpose();
  MatrixHead mh;
  mh.tau = tau;
  mh.A = tau * (W.transpose() * gram_inverse(G, net.H()));
  return net.with_head(std::move(mh));
}

}  // namespace purify

#include "purify/downstream.hpp"

#include <cmath>

#include "purify/errors.hpp"

namespace purify {

DownstreamTask default_task(const SparseModel& pretrain, int n_train) {
  DownstreamTask t{pretrain.with_response(0.7 * Vec::Ones(pretrain.d()), 0.1), n_train,
                   LossKind::Square, 0.0};
  return t;
}

HeadFit fit_head(const GatedNetwork& net, const Mat& Z, const Vec& y, double ridge) {
  if (Z.cols() == 0) throw PreconditionError("fit_head needs at least one training sample");
  if (y.size() != Z.cols()) throw DimensionError("fit_head: response length differs from sample count");
  if (!(ridge >= 0)) throw PreconditionError("ridge must be non-negative");
  const Mat Phi = hidden_batch(net, Z);
  const auto n = Phi.rows();
  const auto H = Phi.cols();
  const bool dual = n <= H;
  Mat K(dual ? n : H, dual ? n : H);
  K.setZero();
  if (dual)
    K.selfadjointView<Eigen::Lower>().rankUpdate(Phi);
  else
    K.selfadjointView<Eigen::Lower>().rankUpdate(Phi.transpose());
  K = K.selfadjointView<Eigen::Lower>();
  const Vec rhs = dual ? y : Vec(Phi.transpose() * y);

  HeadFit fit;
  fit.lambda = ridge;
  auto solve = [&](double lam) {
    Mat Kl = K;
    Kl.diagonal().array() += lam;
    Eigen::LLT<Mat> llt(Kl);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-12)) return false;
    const Vec sol = llt.solve(rhs);
    fit.a = dual ? Vec(Phi.transpose() * sol) : sol;
    return true;
  };
  if (!solve(ridge)) {
    if (ridge > 0) throw SingularityError("ridge system is singular", 0.0);
    fit.ridge_fallback = true;
    fit.lambda = 1e-8 * K.trace() / static_cast<double>(K.rows());
    if (!(fit.lambda > 0) || !solve(fit.lambda))
      throw SingularityError("downstream feature matrix is degenerate", 0.0);
  }
  fit.train_loss = (Phi * fit.a - y).squaredNorm() / static_cast<double>(n);
  return fit;
}

HeadFit fit_head(const GatedNetwork& net, const DownstreamTask& task, std::uint64_t seed) {
  if (task.loss != LossKind::Square) throw PreconditionError("downstream fitting supports the square loss only");
  if (task.n_train < 1) throw PreconditionError("fit_head needs n_train >= 1");
  if (task.model.M_ptr() != net.M_ptr() && task.model.M() != net.M())
    throw PreconditionError("downstream task must share the pre-training mixing matrix");
  Rng feat = make_stream(seed, 0, Stream::Train, 1);
  Rng noise = make_stream(seed, 0, Stream::Train, 2);
  Rng resp = make_stream(seed, 0, Stream::Train, 3);
  const Mat X = sample_features_batch(task.model, task.n_train, feat);
  const Mat Z = observe_batch(task.model, X, noise);
  const Vec y = respond_batch(task.model, X, resp);
  return fit_head(net, Z, y, task.ridge);
}

GapResult robustness_gap(const GatedNetwork& net_with_head, const DownstreamTask& task,
                         const AttackSpec& attack, int n_test, std::uint64_t seed, GateMode mode) {
  if (n_test < 1) throw PreconditionError("robustness_gap needs n_test >= 1");
  Rng feat = make_stream(seed, 0, Stream::Test, 1);
  Rng noise = make_stream(seed, 0, Stream::Test, 2);
  Rng resp = make_stream(seed, 0, Stream::Test, 3);
  const Mat X = sample_features_batch(task.model, n_test, feat);
  const Mat Z = observe_batch(task.model, X, noise);
  const Vec y = respond_batch(task.model, X, resp);
  const BatchResult br = supervised_batch(net_with_head, Z, y, task.loss, attack, mode);
  GapResult g;
  g.clean = br.clean.mean();
  g.adversarial = br.adversarial.mean();
  const Vec diff = br.adversarial - br.clean;
  g.gap = diff.mean();
  if (n_test > 1)
    g.gap_se = std::sqrt((diff.array() - g.gap).square().sum() / (n_test - 1) / n_test);
  for (int f : br.gate_flips) g.gate_flips += f;
  return g;
}

}  // namespace purify

#include "purify/diagnostics.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "purify/errors.hpp"

namespace purify {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

Mat gram_inverse_of(const SpMat& U) {
  Mat G = Mat(U * U.transpose());
  return gram_inverse(G, static_cast<int>(U.cols()));
}

}  // namespace

Mat leakage_matrix(const SpMat& U, const Mat& Ginv, const std::vector<int>& active_set) {
  const auto d = U.rows();
  std::vector<char> is_active(static_cast<std::size_t>(d), 0);
  for (int i : active_set) {
    if (i < 0 || i >= d) throw DimensionError("active index out of range");
    is_active[static_cast<std::size_t>(i)] = 1;
  }
  Vec D = Vec::Zero(U.cols());
  for (Eigen::Index h = 0; h < U.cols(); ++h)
    for (SpMat::InnerIterator it(U, h); it; ++it)
      if (it.value() != 0.0 && is_active[static_cast<std::size_t>(it.row())]) D(h) = 1.0;
  const Mat UDUt = Mat(U * D.asDiagonal() * U.transpose());
  return UDUt * Ginv;
}

Mat leakage_matrix(const GatedNetwork& net, const std::vector<int>& active_set) {
  const SpMat& U = net.U();
  return leakage_matrix(U, gram_inverse_of(U), active_set);
}

PurificationStats gamma_stats(const SparseModel& model, const PurifiedSpec& spec,
                              const GammaOptions& opts) {
  if (opts.samples < 1 || opts.reps < 1) throw PreconditionError("gamma_stats needs samples, reps >= 1");
  PurificationStats st;
  st.m = spec.m;
  st.reps = opts.reps;
  std::vector<double> rep1, rep2, all1, all2;
  for (int r = 0; r < opts.reps; ++r) {
    Rng net_rng = make_stream(opts.seed, static_cast<std::uint64_t>(r), Stream::Network,
                              static_cast<std::uint64_t>(spec.m));
    const SpMat U = purified_assignment(model.d(), spec, net_rng);
    const Mat Ginv = gram_inverse_of(U);
    Rng data_rng = make_stream(opts.seed, static_cast<std::uint64_t>(r), Stream::Data);
    const Mat X = sample_features_batch(model, opts.samples, data_rng);
    const GammaBatch gb = gamma_batch(U, Ginv, X, opts.convention);
    std::vector<double> g1, g2;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      if (std::isnan(gb.gamma1(j)) || std::isnan(gb.gamma2(j))) continue;
      g1.push_back(gb.gamma1(j));
      g2.push_back(gb.gamma2(j));
    }
    if (g1.empty()) continue;
    rep1.push_back(mean_of(g1));
    rep2.push_back(mean_of(g2));
    all1.insert(all1.end(), g1.begin(), g1.end());
    all2.insert(all2.end(), g2.begin(), g2.end());
  }
  st.samples_used = static_cast<long long>(all1.size());
  st.gamma1 = mean_of(all1);
  st.gamma2 = mean_of(all2);
  st.std1 = sd_of(rep1);
  st.std2 = sd_of(rep2);
  st.sample_std1 = sd_of(all1);
  st.sample_std2 = sd_of(all2);
  return st;
}

GateCounts gate_counts_batch(const GatedNetwork& net, const Mat& X, const Mat& Z, const Vec& y,
                             LossKind kind, const AttackSpec& attack) {
  validate(attack);
  if (!net.is_factored()) throw PreconditionError("gate counts need a factored network");
  if (X.rows() != net.d() || Z.rows() != net.d() || X.cols() != Z.cols() || y.size() != Z.cols())
    throw DimensionError("gate_counts_batch: inconsistent batch shapes");
  const Vec& a = net.scalar_head().a;
  const Mat& M = net.M();
  const SpMat& U = net.U();
  const SpMat Uabs = U.cwiseAbs();
  const Vec& b = net.b();
  const auto n = Z.cols();
  const auto H = net.H();
  GateCounts out;
  for (auto* v : {&out.noise_activations, &out.feature_deactivations, &out.attack_flips,
                  &out.adversarial_mismatches})
    v->assign(static_cast<std::size_t>(n), 0);
  const int nb = static_cast<int>((n + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < nb; ++blk) {
    const Eigen::Index j0 = static_cast<Eigen::Index>(blk) * kBlock;
    const Eigen::Index w = std::min<Eigen::Index>(kBlock, n - j0);
    const Mat Carried = Uabs.transpose() * X.middleCols(j0, w).cwiseAbs();
    const Mat Zh = M.transpose() * Z.middleCols(j0, w);
    const Mat Pre = U.transpose() * Zh;
    Mat DA(H, w);
    for (Eigen::Index j = 0; j < w; ++j) {
      double f = 0.0;
      for (Eigen::Index h = 0; h < H; ++h) f += a(h) * activation(Pre(h, j), b(h));
      const double dl = dloss_supervised(kind, f, y(j0 + j));
      for (Eigen::Index h = 0; h < H; ++h) DA(h, j) = std::abs(Pre(h, j)) >= b(h) ? dl * a(h) : 0.0;
    }
    Mat PD = Mat::Zero(H, w);
    if (attack.epsilon > 0) {
      const Mat Ghat = U * DA;
      Mat Dir(Ghat.rows(), w);
      if (attack.norm == Norm::L2) {
        for (Eigen::Index j = 0; j < w; ++j) {
          const double nn = Ghat.col(j).norm();
          Dir.col(j) = nn <= 1e-12 ? Vec::Zero(Ghat.rows()) : Vec((attack.epsilon / nn) * Ghat.col(j));
        }
      } else {
        Mat Gz = M * Ghat;
        Gz = Gz.unaryExpr([&](double v) { return attack.epsilon * sgn(v); });
        Dir = M.transpose() * Gz;
      }
      PD = U.transpose() * Dir;
    }
    for (Eigen::Index j = 0; j < w; ++j) {
      int na = 0, fd = 0, af = 0, am = 0;
      for (Eigen::Index h = 0; h < H; ++h) {
        const bool ideal = Carried(h, j) > 0;
        const bool open = std::abs(Pre(h, j)) >= b(h);
        const bool adv_open = std::abs(Pre(h, j) + PD(h, j)) >= b(h);
        na += !ideal && open;
        fd += ideal && !open;
        af += open != adv_open;
        am += ideal != adv_open;
      }
      const auto c = static_cast<std::size_t>(j0 + j);
      out.noise_activations[c] = na;
      out.feature_deactivations[c] = fd;
      out.attack_flips[c] = af;
      out.adversarial_mismatches[c] = am;
    }
  }
  return out;
}

GateStability gate_stability(const GatedNetwork& net, const SparseModel& model,
                             const AttackSpec& attack, LossKind kind, int samples,
                             std::uint64_t seed) {
  if (samples < 1) throw PreconditionError("gate_stability needs samples >= 1");
  Rng feat = make_stream(seed, 0, Stream::Check, 1);
  Rng noise = make_stream(seed, 0, Stream::Check, 2);
  Rng resp = make_stream(seed, 0, Stream::Check, 3);
  const Mat X = sample_features_batch(model, samples, feat);
  const Mat Z = observe_batch(model, X, noise);
  Vec y = respond_batch(model, X, resp);
  if (kind == LossKind::Logistic) y = y.unaryExpr([](double v) { return v >= 0 ? 1.0 : -1.0; });
  const GateCounts c = gate_counts_batch(net, X, Z, y, kind, attack);
  GateStability gs;
  for (int j = 0; j < samples; ++j) {
    gs.noise_activations += c.noise_activations[j];
    gs.feature_deactivations += c.feature_deactivations[j];
    gs.attack_flips += c.attack_flips[j];
    gs.adversarial_mismatches += c.adversarial_mismatches[j];
  }
  gs.node_samples = static_cast<long long>(net.H()) * samples;
  return gs;
}

double cancellation_prob(const GatedNetwork& net, const SparseModel& model, double v, int samples,
                         std::uint64_t seed) {
  if (!(v >= 0)) throw PreconditionError("cancellation window must be non-negative");
  if (samples < 1) throw PreconditionError("cancellation_prob needs samples >= 1");
  if (v == 0) return 0.0;
  const SpMat& U = net.U();
  SpMat pattern = U;
  for (Eigen::Index h = 0; h < pattern.outerSize(); ++h)
    for (SpMat::InnerIterator it(pattern, h); it; ++it) it.valueRef() = it.value() != 0.0 ? 1.0 : 0.0;
  Vec norms(U.cols());
  for (Eigen::Index h = 0; h < U.cols(); ++h) norms(h) = U.col(h).norm();
  Rng rng = make_stream(seed, 0, Stream::Check, 4);
  const Mat X = sample_features_batch(model, samples, rng);
  const Mat S = U.transpose() * X;
  const Mat cnt = pattern.transpose() * X.unaryExpr([](double x) { return x != 0.0 ? 1.0 : 0.0; });
  long long hits = 0;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    bool hit = false;
    for (Eigen::Index h = 0; h < U.cols() && !hit; ++h) {
      if (cnt(h, j) < 2 || norms(h) == 0) continue;
      const double s = std::abs(S(h, j));
      hit = s > 0 && s < v / norms(h);
    }
    hits += hit;
  }
  return static_cast<double>(hits) / samples;
}

IsotropyResult check_isotropy_optimal(int d, int k, double budget, int trials, int samples,
                                      std::uint64_t seed) {
  if (d < 1 || d > 16) throw PreconditionError("isotropy check is desk-scale: need 1 <= d <= 16");
  if (k < 1 || k > d) throw PreconditionError("need 1 <= k <= d");
  if (!(budget >= 0) || trials < 1 || samples < 1) throw PreconditionError("bad isotropy arguments");
  auto M = std::make_shared<const Mat>(Mat::Identity(d, d));
  const SparseModel model = SparseModel::with_defaults(M, k, 0.0, NoiseConvention::ScaledByDim);
  IsotropyResult res;
  res.trials = trials;
  res.min_gap = std::numeric_limits<double>::infinity();
  int wins = 0;
  double gap_sum = 0.0;
  for (int t = 0; t < trials; ++t) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(t), Stream::Trial);
    const Mat X = sample_features_batch(model, samples, rng);
    const Mat Xi = sample_features_batch(model, samples, rng);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<int> y(static_cast<std::size_t>(samples));
    for (auto& v : y) v = unif(rng) < 0.5 ? 1 : -1;
    std::exponential_distribution<double> expo(1.0);
    Vec w(d);
    for (int i = 0; i < d; ++i) w(i) = expo(rng);
    w *= budget / w.sum();
    const Mat P = sample_unitary(d, rng);
    const Mat T = P * w.asDiagonal() * P.transpose();
    double lD = 0.0, lI = 0.0;
    const double iso = budget / d;
    for (int j = 0; j < samples; ++j) {
      const auto xp = y[static_cast<std::size_t>(j)] == 1 ? X.col(j) : Xi.col(j);
      const double gD = X.col(j).dot(T * xp);
      const double gI = iso * X.col(j).dot(xp);
      lD += loss_contrastive(gD, y[static_cast<std::size_t>(j)]);
      lI += loss_contrastive(gI, y[static_cast<std::size_t>(j)]);
    }
    const double gap = (lD - lI) / samples;
    wins += gap > 0;
    gap_sum += gap;
    res.min_gap = std::min(res.min_gap, gap);
  }
  res.pass_fraction = static_cast<double>(wins) / trials;
  res.mean_gap = gap_sum / trials;
  return res;
}

namespace {

SandwichResult sandwich(const Vec& eff, const std::vector<double>& lower, double upper) {
  SandwichResult r;
  r.samples = static_cast<int>(eff.size());
  r.max_upper_excess = -std::numeric_limits<double>::infinity();
  r.max_lower_deficit = -std::numeric_limits<double>::infinity();
  int pass = 0;
  for (Eigen::Index j = 0; j < eff.size(); ++j) {
    const double lo = lower[static_cast<std::size_t>(j)];
    pass += lo - 1e-8 <= eff(j) && eff(j) <= upper + 1e-8;
    r.max_upper_excess = std::max(r.max_upper_excess, eff(j) - upper);
    r.max_lower_deficit = std::max(r.max_lower_deficit, lo - eff(j));
  }
  r.pass_fraction = eff.size() ? static_cast<double>(pass) / static_cast<double>(eff.size()) : 0.0;
  r.mean_effectiveness = eff.size() ? eff.mean() : 0.0;
  return r;
}

}  // namespace

SandwichResult l2_sandwich_check(const GatedNetwork& net, const SparseModel& model, int samples,
                                 std::uint64_t seed) {
  if (samples < 1) throw PreconditionError("sandwich check needs samples >= 1");
  const Vec theta = net.U() * net.scalar_head().a;
  Rng feat = make_stream(seed, 0, Stream::Check, 5);
  Rng noise = make_stream(seed, 0, Stream::Check, 6);
  const Mat X = sample_features_batch(model, samples, feat);
  const Mat Z = observe_batch(model, X, noise);
  const Vec eff = effectiveness_batch(net, Z);
  std::vector<double> lower(static_cast<std::size_t>(samples));
  for (int j = 0; j < samples; ++j) {
    double s = 0.0;
    for (int i = 0; i < model.d(); ++i)
      if (X(i, j) != 0.0) s += theta(i) * theta(i);
    lower[static_cast<std::size_t>(j)] = std::sqrt(s);
  }
  return sandwich(eff, lower, theta.norm());
}

SandwichResult linf_sandwich_check(const GatedNetwork& net, const SparseModel& model, int samples,
                                   std::uint64_t seed) {
  if (!model.identity_mixing()) throw PreconditionError("l-infinity sandwich check needs M = I");
  if (samples < 1) throw PreconditionError("sandwich check needs samples >= 1");
  const Vec theta = net.U() * net.scalar_head().a;
  Rng feat = make_stream(seed, 0, Stream::Check, 7);
  Rng noise = make_stream(seed, 0, Stream::Check, 8);
  const Mat X = sample_features_batch(model, samples, feat);
  const Mat Z = observe_batch(model, X, noise);
  // With M = I exactly, W = U and the preactivation is U'z.
  const SpMat& U = net.U();
  const Vec& a = net.scalar_head().a;
  const Mat Pre = U.transpose() * Z;
  Vec eff(samples);
  std::vector<double> lower(static_cast<std::size_t>(samples));
  for (int j = 0; j < samples; ++j) {
    Vec da(net.H());
    for (int h = 0; h < net.H(); ++h) da(h) = std::abs(Pre(h, j)) >= net.b()(h) ? a(h) : 0.0;
    eff(j) = (U * da).lpNorm<1>();
    double s = 0.0;
    for (int i = 0; i < model.d(); ++i)
      if (X(i, j) != 0.0) s += std::abs(theta(i));
    lower[static_cast<std::size_t>(j)] = s;
  }
  return sandwich(eff, lower, theta.lpNorm<1>());
}

double psi_rate(double d, double k, double H, double m) {
  if (!(d > 0 && k > 0 && H > 0 && m > 0)) throw PreconditionError("psi_rate arguments must be positive");
  const double lk = std::log(k);
  return H * m * m * m * k * k * k * lk * lk / (d * d) + std::sqrt(k / d);
}

}  // namespace purify

#include "purify/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "purify/errors.hpp"

namespace purify {

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Per-(m, metric) collection of one value per repetition.
struct Collector {
  std::map<std::pair<int, std::string>, std::vector<double>> values;
  std::vector<std::pair<int, std::string>> order;
  void put(int m, const std::string& metric, double v) {
    auto key = std::make_pair(m, metric);
    if (!values.count(key)) order.push_back(key);
    values[key].push_back(v);
  }
  void emit(ExperimentReport& rep, double eps) const {
    for (const auto& key : order) {
      const auto& v = values.at(key);
      rep.add(key.first, key.second, mean_of(v), sd_of(v), static_cast<int>(v.size()), eps);
    }
  }
};

std::uint64_t rep_u(int r) { return static_cast<std::uint64_t>(r); }

// Seed for per-repetition helpers that take a single seed argument.
std::uint64_t rep_seed(std::uint64_t seed, int r, Stream s) {
  return mix64(seed ^ mix64(rep_u(r) * 0x100 + static_cast<std::uint64_t>(s)));
}

ExperimentReport new_report(const ExperimentConfig& cfg) {
  validate(cfg);
  ExperimentReport rep;
  rep.config = cfg;
  return rep;
}

GatedNetwork contrastive_net(const ExperimentConfig& cfg, const SparseModel& model, int r, int m) {
  Rng rng = make_stream(cfg.seed, rep_u(r), Stream::Network, static_cast<std::uint64_t>(m));
  const PurifiedSpec spec{m, cfg.H, cfg.assignment};
  try {
    return pseudo_head(build_purified(model, spec, rng), cfg.tau);
  } catch (const SingularityError& e) {
    throw SingularityError("m=" + std::to_string(m) + ": " + e.what(), e.smallest_singular_value());
  } catch (const ConstructionError& e) {
    throw ConstructionError("m=" + std::to_string(m) + ": " + e.what());
  }
}

GatedNetwork supervised_net(const ExperimentConfig& cfg, const SparseModel& model, int r, int m) {
  Rng rng = make_stream(cfg.seed, rep_u(r), Stream::Network, static_cast<std::uint64_t>(m));
  try {
    return build_purified(model, PurifiedSpec{m, cfg.H, cfg.assignment}, rng);
  } catch (const ConstructionError& e) {
    throw ConstructionError("m=" + std::to_string(m) + ": " + e.what());
  }
}

struct PairData {
  Mat Zs, Zsp, Zd, Zdp;
};

// Similar and dissimilar pairs of repetition r; shared by every m.
PairData pair_data(const ExperimentConfig& cfg, const SparseModel& model, int r, bool similar = true) {
  PairData p;
  const int n = cfg.n_samples;
  if (similar) {
    Rng rng = make_stream(cfg.seed, rep_u(r), Stream::Similar);
    const Mat X = sample_features_batch(model, n, rng);
    p.Zs = observe_batch(model, X, rng);
    p.Zsp = observe_batch(model, X, rng);
  }
  Rng rng = make_stream(cfg.seed, rep_u(r), Stream::Dissimilar);
  const Mat X = sample_features_batch(model, n, rng);
  const Mat Xp = sample_features_batch(model, n, rng);
  p.Zd = observe_batch(model, X, rng);
  p.Zdp = observe_batch(model, Xp, rng);
  return p;
}

double flip_fraction(const std::vector<int>& flips, int H) {
  double s = 0.0;
  for (int f : flips) s += f;
  return flips.empty() ? 0.0 : s / (static_cast<double>(flips.size()) * H);
}

double loglog_slope(const std::vector<int>& ms, const std::vector<double>& ys) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < ms.size(); ++i)
    if (ys[i] > 0) {
      lx.push_back(std::log(static_cast<double>(ms[i])));
      ly.push_back(std::log(ys[i]));
    }
  if (lx.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double mx = mean_of(lx), my = mean_of(ly);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

SparseModel repetition_model(const ExperimentConfig& cfg, int rep) {
  Rng rng = make_stream(cfg.seed, cfg.fix_mixing ? 0 : rep_u(rep), Stream::Mixing);
  auto M = std::make_shared<const Mat>(sample_unitary(cfg.d, rng));
  return SparseModel::with_defaults(std::move(M), cfg.k, cfg.zeta, cfg.noise_convention);
}

CalibrationResult bisect_epsilon(const std::function<double(double)>& f, double target, double lo,
                                 double hi, double tol) {
  if (!(lo > 0 && lo < hi)) throw PreconditionError("calibration bracket must satisfy 0 < lo < hi");
  std::vector<std::pair<double, double>> seen;
  CalibrationResult res;
  auto eval = [&](double e) {
    const double v = f(e);
    ++res.evaluations;
    seen.emplace_back(e, v);
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 1; i < seen.size(); ++i)
      if (seen[i].second < seen[i - 1].second - 1e-12)
        throw CalibrationError("adversarial loss is not monotone in epsilon between " +
                                   std::to_string(seen[i - 1].first) + " and " +
                                   std::to_string(seen[i].first),
                               seen.front().second, seen.back().second);
    return v;
  };
  res.loss_at_low = eval(lo);
  res.loss_at_high = eval(hi);
  if (target <= res.loss_at_low) {
    res.epsilon = lo;
    res.achieved = res.loss_at_low;
    return res;
  }
  if (res.loss_at_high < target)
    throw CalibrationError("target " + std::to_string(target) + " unreachable: loss(" +
                               std::to_string(lo) + ")=" + std::to_string(res.loss_at_low) +
                               ", loss(" + std::to_string(hi) + ")=" + std::to_string(res.loss_at_high),
                           res.loss_at_low, res.loss_at_high);
  double a = lo, b = hi;
  res.epsilon = hi;
  res.achieved = res.loss_at_high;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (a + b);
    const double v = eval(mid);
    res.epsilon = mid;
    res.achieved = v;
    if (std::abs(v - target) <= tol || (b - a) <= 1e-9 * b) break;
    (v < target ? a : b) = mid;
  }
  return res;
}

CalibrationResult calibrate_epsilon(const ExperimentConfig& cfg_in, double target) {
  ExperimentConfig cfg = cfg_in;
  validate(cfg);
  struct Item {
    GatedNetwork net;
    ContrastiveCache cache;
  };
  std::vector<Item> items;
  items.reserve(static_cast<std::size_t>(cfg.reps));
  for (int r = 0; r < cfg.reps; ++r) {
    const SparseModel model = repetition_model(cfg, r);
    const PairData pd = pair_data(cfg, model, r, false);
    GatedNetwork net = contrastive_net(cfg, model, r, 1);
    ContrastiveCache cache = prepare_contrastive(net, pd.Zd, pd.Zdp, -1);
    items.push_back({std::move(net), std::move(cache)});
  }
  auto f = [&](double eps) {
    const AttackSpec atk{cfg.norm, eps};
    double s = 0.0;
    for (const auto& it : items) s += evaluate_contrastive(it.net, it.cache, atk, cfg.gate_mode).adversarial.mean();
    return s / static_cast<double>(items.size());
  };
  return bisect_epsilon(f, target, cfg.eps_lo, cfg.eps_hi);
}

ExperimentReport run_contrastive_sweep(const ExperimentConfig& cfg) {
  ExperimentReport rep = new_report(cfg);
  double eps = 0.0;
  if (cfg.epsilon) {
    eps = *cfg.epsilon;
  } else {
    const CalibrationResult cal = calibrate_epsilon(cfg, cfg.target);
    eps = cal.epsilon;
    rep.calibrated_epsilon = eps;
    rep.notes.push_back("calibration: target=" + std::to_string(cfg.target) +
                        " achieved=" + std::to_string(cal.achieved) +
                        " evaluations=" + std::to_string(cal.evaluations));
  }
  const AttackSpec atk{cfg.norm, eps};
  Collector col;
  for (int r = 0; r < cfg.reps; ++r) {
    const SparseModel model = repetition_model(cfg, r);
    const PairData pd = pair_data(cfg, model, r);
    for (int m : cfg.m_list) {
      const GatedNetwork net = contrastive_net(cfg, model, r, m);
      const BatchResult s = contrastive_batch(net, pd.Zs, pd.Zsp, 1, atk, cfg.gate_mode);
      const BatchResult d = contrastive_batch(net, pd.Zd, pd.Zdp, -1, atk, cfg.gate_mode);
      col.put(m, "clean_sim", s.clean.mean());
      col.put(m, "adv_sim", s.adversarial.mean());
      col.put(m, "clean_dis", d.clean.mean());
      col.put(m, "adv_dis", d.adversarial.mean());
      col.put(m, "flip_fraction_sim", flip_fraction(s.gate_flips, cfg.H));
      col.put(m, "flip_fraction_dis", flip_fraction(d.gate_flips, cfg.H));
    }
  }
  col.emit(rep, eps);
  if (cfg.m_list.size() >= 2) {
    const double rise = rep.value(cfg.m_list.back(), "adv_dis") - rep.value(cfg.m_list.front(), "adv_dis");
    rep.add(0, "adv_dis_rise", rise, 0.0, cfg.reps, eps);
  }
  return rep;
}

ExperimentReport run_gamma_sweep(const ExperimentConfig& cfg) {
  ExperimentReport rep = new_report(cfg);
  // gamma depends on U and the active sets only; M plays no role.
  auto M = std::make_shared<const Mat>(Mat::Identity(cfg.d, cfg.d));
  const SparseModel model = SparseModel::with_defaults(M, cfg.k, cfg.zeta, cfg.noise_convention);
  std::vector<double> g1, g2;
  for (int m : cfg.m_list) {
    GammaOptions opts{cfg.n_samples, cfg.reps, cfg.seed, cfg.gamma_convention};
    PurificationStats st;
    try {
      st = gamma_stats(model, PurifiedSpec{m, cfg.H, cfg.assignment}, opts);
    } catch (const SingularityError& e) {
      throw SingularityError("m=" + std::to_string(m) + ": " + e.what(), e.smallest_singular_value());
    } catch (const ConstructionError& e) {
      throw ConstructionError("m=" + std::to_string(m) + ": " + e.what());
    }
    rep.add(m, "gamma1", st.gamma1, st.std1, cfg.reps, 0.0);
    rep.add(m, "gamma2", st.gamma2, st.std2, cfg.reps, 0.0);
    rep.add(m, "gamma1_sample_std", st.sample_std1, 0.0, cfg.reps, 0.0);
    rep.add(m, "gamma2_sample_std", st.sample_std2, 0.0, cfg.reps, 0.0);
    g1.push_back(st.gamma1);
    g2.push_back(st.gamma2);
  }
  const double s1 = loglog_slope(cfg.m_list, g1), s2 = loglog_slope(cfg.m_list, g2);
  if (std::isfinite(s1)) rep.add(0, "gamma1_loglog_slope", s1, 0.0, cfg.reps, 0.0);
  if (std::isfinite(s2)) rep.add(0, "gamma2_loglog_slope", s2, 0.0, cfg.reps, 0.0);
  return rep;
}

ExperimentReport run_supervised_sweep(const ExperimentConfig& cfg) {
  ExperimentReport rep = new_report(cfg);
  const double eps = cfg.epsilon.value_or(1e-3);
  const AttackSpec atk{cfg.norm, eps};
  const int m_ref = std::find(cfg.m_list.begin(), cfg.m_list.end(), 1) != cfg.m_list.end() ? 1 : cfg.m_list.front();
  Collector col;
  for (int r = 0; r < cfg.reps; ++r) {
    const SparseModel model = repetition_model(cfg, r);
    Rng rng = make_stream(cfg.seed, rep_u(r), Stream::Data);
    const Mat X = sample_features_batch(model, cfg.n_samples, rng);
    const Mat Z = observe_batch(model, X, rng);
    const Vec y = respond_batch(model, X, rng);
    std::map<int, double> gaps;
    for (int m : cfg.m_list) {
      const GatedNetwork net = supervised_net(cfg, model, r, m);
      const BatchResult br = supervised_batch(net, Z, y, LossKind::Square, atk, cfg.gate_mode);
      const double gap = (br.adversarial - br.clean).mean();
      gaps[m] = gap;
      col.put(m, "clean", br.clean.mean());
      col.put(m, "adv", br.adversarial.mean());
      col.put(m, "gap", gap);
      col.put(m, "effectiveness", effectiveness_batch(net, Z).mean());
      col.put(m, "flip_fraction", flip_fraction(br.gate_flips, cfg.H));
    }
    for (int m : cfg.m_list)
      if (gaps[m_ref] != 0.0) col.put(m, "gap_ratio", gaps[m] / gaps[m_ref]);
  }
  col.emit(rep, eps);
  for (int m : cfg.m_list) rep.add(m, "psi", psi_rate(cfg.d, cfg.k, cfg.H, m), 0.0, 1, eps);
  rep.notes.push_back("gap_ratio is per-repetition gap(m)/gap(" + std::to_string(m_ref) + ")");
  return rep;
}

namespace {

void downstream_rep(const ExperimentConfig& cfg, const GatedNetwork& net, const SparseModel& model,
                    int r, int m, const AttackSpec& atk, Collector& col) {
  const DownstreamTask task = default_task(model, cfg.n_train);
  const HeadFit fit = fit_head(net, task, rep_seed(cfg.seed, r, Stream::Train));
  const GatedNetwork fitted = net.with_head(ScalarHead{fit.a});
  const GapResult g = robustness_gap(fitted, task, atk, cfg.n_samples, rep_seed(cfg.seed, r, Stream::Test),
                                     cfg.gate_mode);
  col.put(m, "clean", g.clean);
  col.put(m, "adv", g.adversarial);
  col.put(m, "gap", g.gap);
  col.put(m, "train_loss", fit.train_loss);
  col.put(m, "ridge_fallback", fit.ridge_fallback ? 1.0 : 0.0);
  col.put(m, "flip_fraction", static_cast<double>(g.gate_flips) / (static_cast<double>(cfg.n_samples) * net.H()));
}

}  // namespace

ExperimentReport run_downstream_sweep(const ExperimentConfig& cfg) {
  ExperimentReport rep = new_report(cfg);
  const double eps = cfg.epsilon.value_or(0.1);
  const AttackSpec atk{cfg.norm, eps};
  Collector col;
  for (int r = 0; r < cfg.reps; ++r) {
    const SparseModel model = repetition_model(cfg, r);
    for (int m : cfg.m_list) downstream_rep(cfg, supervised_net(cfg, model, r, m), model, r, m, atk, col);
  }
  col.emit(rep, eps);
  for (int m : cfg.m_list) rep.add(m, "psi", psi_rate(cfg.d, cfg.k, cfg.H, m), 0.0, 1, eps);
  rep.notes.push_back("downstream response: theta_down = 0.7 * 1, sigma_y = 0.1, square loss");
  return rep;
}

ExperimentReport run_downstream_on(const ExperimentConfig& cfg, const GatedNetwork& net) {
  ExperimentReport rep = new_report(cfg);
  if (!net.is_factored()) throw PreconditionError("downstream network must carry its mixing matrix and U");
  const double eps = cfg.epsilon.value_or(0.1);
  const AttackSpec atk{cfg.norm, eps};
  const SparseModel model =
      SparseModel::with_defaults(net.M_ptr(), cfg.k, cfg.zeta, cfg.noise_convention);
  int m = 0;
  for (int h = 0; h < net.H(); ++h) m = std::max<int>(m, static_cast<int>(net.U().col(h).nonZeros()));
  Collector col;
  for (int r = 0; r < cfg.reps; ++r) downstream_rep(cfg, net, model, r, m, atk, col);
  col.emit(rep, eps);
  rep.notes.push_back("persisted network; m column is the largest node load");
  return rep;
}

GradientCheck gradient_check(LossKind kind, int pairs, std::uint64_t seed, double tol) {
  GradientCheck res;
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int p = 0; p < pairs; ++p) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(p), Stream::Check, 100 + static_cast<int>(kind));
    const int d = 3 + static_cast<int>(unif(rng) * 6);
    const int H = 4 + static_cast<int>(unif(rng) * 9);
    Mat W(d, H);
    for (int j = 0; j < H; ++j)
      for (int i = 0; i < d; ++i) W(i, j) = normal(rng);
    Vec b(H);
    for (int h = 0; h < H; ++h) b(h) = 0.5 * unif(rng);
    GatedNetwork net;
    if (kind == LossKind::ContrastiveLogistic) {
      Mat A(H, d);
      for (int j = 0; j < d; ++j)
        for (int h = 0; h < H; ++h) A(h, j) = normal(rng) / std::sqrt(static_cast<double>(H));
      MatrixHead mh;
      mh.A = A;
      net = GatedNetwork::dense(W, b, mh);
    } else {
      Vec a(H);
      for (int h = 0; h < H; ++h) a(h) = normal(rng);
      net = GatedNetwork::dense(W, b, ScalarHead{a});
    }
    Vec z(d), zp(d);
    double y = 0.0;
    int label = 1;
    bool ok = false;
    for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
      for (int i = 0; i < d; ++i) z(i) = normal(rng);
      for (int i = 0; i < d; ++i) zp(i) = normal(rng);
      label = unif(rng) < 0.5 ? 1 : -1;
      y = kind == LossKind::Logistic ? label : normal(rng);
      const Vec pre = net.preactivation(z);
      ok = ((pre.array().abs() - b.array()).abs() > 1e-4).all();
      if (ok && kind == LossKind::Absolute) ok = std::abs(forward_supervised(net, z) - y) > 1e-4;
    }
    if (!ok) continue;
    auto loss = [&](const Vec& v) {
      if (kind == LossKind::ContrastiveLogistic) return loss_contrastive(score_contrastive(net, v, zp), label);
      return loss_supervised(kind, forward_supervised(net, v), y);
    };
    const Vec g = kind == LossKind::ContrastiveLogistic ? grad_z_contrastive(net, z, zp, label)
                                                        : grad_z(kind, net, z, y);
    Vec fd(d);
    const double step = 1e-6;
    for (int i = 0; i < d; ++i) {
      Vec zp1 = z, zm1 = z;
      zp1(i) += step;
      zm1(i) -= step;
      fd(i) = (loss(zp1) - loss(zm1)) / (2 * step);
    }
    const double rel = (fd - g).norm() / std::max(g.norm(), 1e-8);
    ++res.pairs;
    res.passed += rel <= tol;
    res.max_rel_error = std::max(res.max_rel_error, rel);
  }
  return res;
}

ExperimentReport run_verify(const ExperimentConfig& cfg) {
  ExperimentReport rep = new_report(cfg);
  double eps = 0.0;
  if (cfg.epsilon) {
    eps = *cfg.epsilon;
  } else {
    ExperimentConfig c = cfg;
    c.assignment = Assignment::Independent;
    eps = calibrate_epsilon(c, cfg.target).epsilon;
    rep.calibrated_epsilon = eps;
  }
  auto verdict = [&](const std::string& name, bool pass, const std::string& detail) {
    rep.notes.push_back(std::string(pass ? "PASS " : "FAIL ") + name + ": " + detail);
    rep.add(0, name + "_pass", pass ? 1.0 : 0.0, 0.0, 1, eps);
  };
  const SparseModel model = repetition_model(cfg, 0);
  const int n = cfg.verify_samples;
  Rng net_rng = make_stream(cfg.seed, 0, Stream::Network, 1);
  const GatedNetwork net1 = build_purified(model, PurifiedSpec{1, cfg.H, cfg.assignment}, net_rng);

  // Effectiveness sandwich, and its upper end when every gate is open.
  const SandwichResult sw = l2_sandwich_check(net1, model, n, cfg.seed);
  rep.add(1, "sandwich_pass_rate", sw.pass_fraction, 0.0, 1, eps);
  {
    const GatedNetwork open = net1.with_gates(Vec::Zero(net1.H()));
    Rng rng = make_stream(cfg.seed, 0, Stream::Check, 20);
    const Mat X = sample_features_batch(model, 100, rng);
    const Mat Z = observe_batch(model, X, rng);
    const double theta = (net1.U() * net1.scalar_head().a).norm();
    const double dev = (effectiveness_batch(open, Z).array() - theta).abs().maxCoeff();
    rep.add(1, "sandwich_upper_deviation", dev, 0.0, 1, eps);
    verdict("sandwich", sw.pass_fraction >= 0.99 && dev <= 1e-8,
            "pass rate " + std::to_string(sw.pass_fraction) + ", open-gate deviation " + std::to_string(dev));
  }

  // Gate stability at b and 2b.
  const AttackSpec atk{cfg.norm, eps};
  const GateStability gs = gate_stability(net1, model, atk, LossKind::Square, n, cfg.seed);
  const GateStability gs2 = gate_stability(net1.with_gates(2 * net1.b()), model, atk, LossKind::Square, n, cfg.seed);
  const double ns = static_cast<double>(gs.node_samples);
  rep.add(1, "gate_flip_fraction", gs.flip_fraction(), 0.0, 1, eps);
  rep.add(1, "gate_flip_fraction_2b", gs2.flip_fraction(), 0.0, 1, eps);
  rep.add(1, "noise_activation_fraction", gs.noise_activations / ns, 0.0, 1, eps);
  rep.add(1, "feature_deactivation_fraction", gs.feature_deactivations / ns, 0.0, 1, eps);
  rep.add(1, "attack_flip_fraction", gs.attack_flips / ns, 0.0, 1, eps);
  verdict("gate_stability", gs.flip_fraction() < 1e-3,
          "flip fraction " + std::to_string(gs.flip_fraction()) + " at b, " + std::to_string(gs2.flip_fraction()) + " at 2b");
  verdict("gate_stability_scaling", gs2.flip_fraction() < gs.flip_fraction(),
          "strict decrease from b to 2b");

  // Cancellation of carried features.
  {
    const double c1 = cancellation_prob(net1, model, PurifiedSpec{1, cfg.H}.gate_value(cfg.d, cfg.zeta), n, cfg.seed);
    rep.add(1, "cancellation_prob", c1, 0.0, 1, eps);
    double c2 = std::numeric_limits<double>::quiet_NaN();
    if (cfg.d % 2 == 0 && (2LL * cfg.H) % cfg.d == 0) {
      Rng r2 = make_stream(cfg.seed, 0, Stream::Network, 2);
      const GatedNetwork net2 = build_purified(model, PurifiedSpec{2, cfg.H, cfg.assignment}, r2);
      c2 = cancellation_prob(net2, model, PurifiedSpec{2, cfg.H}.gate_value(cfg.d, cfg.zeta), n, cfg.seed);
      rep.add(2, "cancellation_prob", c2, 0.0, 1, eps);
    }
    verdict("cancellation", c1 == 0.0 && !(c2 >= 1e-2),
            "m=1 " + std::to_string(c1) + ", m=2 " + std::to_string(c2));
  }

  // Isotropic first layer is optimal.
  {
    const IsotropyResult iso = check_isotropy_optimal(cfg.isotropy_d, cfg.isotropy_k, cfg.isotropy_d,
                                                      cfg.isotropy_trials, cfg.isotropy_samples, cfg.seed);
    rep.add(0, "isotropy_pass_fraction", iso.pass_fraction, 0.0, iso.trials, eps);
    rep.add(0, "isotropy_mean_gap", iso.mean_gap, 0.0, iso.trials, eps);
    verdict("isotropy", iso.pass_fraction >= 0.95, "isotropic wins " + std::to_string(iso.pass_fraction));
  }

  // l-infinity sandwich with M = I.
  {
    auto I = std::make_shared<const Mat>(Mat::Identity(cfg.d, cfg.d));
    const SparseModel mi = SparseModel::with_defaults(I, cfg.k, cfg.zeta, cfg.noise_convention);
    Rng ri = make_stream(cfg.seed, 0, Stream::Network, 1001);
    const GatedNetwork neti = build_purified(mi, PurifiedSpec{1, cfg.H, cfg.assignment}, ri);
    const SandwichResult li = linf_sandwich_check(neti, mi, n, cfg.seed);
    rep.add(1, "linf_sandwich_pass_rate", li.pass_fraction, 0.0, 1, eps);
    verdict("linf_sandwich", li.pass_fraction >= 0.99, "pass rate " + std::to_string(li.pass_fraction));
  }

  // Finite-difference gradient agreement.
  for (LossKind kind : {LossKind::Square, LossKind::Absolute, LossKind::Logistic, LossKind::ContrastiveLogistic}) {
    const GradientCheck gc = gradient_check(kind, cfg.fd_pairs, cfg.seed);
    rep.add(0, "fd_max_rel_error_" + to_string(kind), gc.max_rel_error, 0.0, gc.pairs, eps);
    verdict("fd_" + to_string(kind), gc.pairs > 0 && gc.passed == gc.pairs,
            std::to_string(gc.passed) + "/" + std::to_string(gc.pairs) + " within 1e-4");
  }

  // Purified-class membership of the m = 1 network, and the rate psi.
  {
    const MembershipReport mr = check_membership(net1, 1, cfg.k);
    rep.add(1, "membership_sparsity_ok", mr.sparsity_ok(), 0.0, 1, eps);
    rep.add(1, "membership_window_upper_margin", mr.min_upper_margin, 0.0, 1, eps);
    rep.add(1, "membership_window_lower_margin", mr.min_lower_margin, 0.0, 1, eps);
    rep.add(1, "psi", psi_rate(cfg.d, cfg.k, cfg.H, 1), 0.0, 1, eps);
  }
  return rep;
}

ExperimentReport run_preset(const ExperimentConfig& cfg) {
  switch (cfg.preset) {
    case Preset::ContrastiveSweep: return run_contrastive_sweep(cfg);
    case Preset::GammaSweep: return run_gamma_sweep(cfg);
    case Preset::SupervisedSweep: return run_supervised_sweep(cfg);
    case Preset::DownstreamSweep: return run_downstream_sweep(cfg);
    case Preset::VerifyLemmas: return run_verify(cfg);
  }
  throw PreconditionError("unknown preset");
}

}  // namespace purify

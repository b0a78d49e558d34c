#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "purify/errors.hpp"

using namespace purify;
using namespace testing_support;

TEST_CASE("leakage matrix") {
  const SparseModel model = small_model(24, 3, 0.0);
  Rng r = rng(80);
  const GatedNetwork net = build_purified(model, PurifiedSpec{2, 72, Assignment::Independent}, r);
  CHECK(leakage_matrix(net, {}).isZero(0));
  std::vector<int> all(24);
  for (int i = 0; i < 24; ++i) all[static_cast<std::size_t>(i)] = i;
  CHECK((leakage_matrix(net, all) - Mat::Identity(24, 24)).cwiseAbs().maxCoeff() < 1e-8);

  SUBCASE("m = 1 disjoint construction is block diagonal") {
    Rng rr = rng(81);
    const GatedNetwork n1 = build_purified(model, PurifiedSpec{1, 48, Assignment::Grouped}, rr);
    const std::vector<int> act = {2, 5, 11};
    const Mat B = leakage_matrix(n1, act);
    Mat expect = Mat::Zero(24, 24);
    for (int i : act) expect(i, i) = 1.0;
    CHECK((B - expect).cwiseAbs().maxCoeff() < 1e-8);
    // No leakage from the active block into the rest.
    const Mat Ginv = (Mat(n1.U()) * Mat(n1.U()).transpose()).inverse();
    const GammaBatch gb = gamma_batch(n1.U(), Ginv, [&] {
      Mat X = Mat::Zero(24, 1);
      for (int i : act) X(i, 0) = 0.5;
      return X;
    }(), GammaConvention::Signed);
    CHECK(std::abs(gb.gamma1(0)) < 1e-12);
    CHECK(std::abs(gb.gamma2(0)) < 1e-12);
  }
}

TEST_CASE("gamma statistics at the reference parameters") {
  // Table values: gamma1(1) = 8.86e-4 (std 8.56e-5), gamma2(1) = 5.39e-6 (std 1.81e-6),
  // gamma1(10) = 8.87e-3 (std 3.32e-4), gamma2(10) = 1.51e-5 (std 5.52e-6).
  const SparseModel model = SparseModel::with_defaults(identity(1000), 10, 0.005, NoiseConvention::ScaledByDim);
  const GammaOptions opts{1000, 3, 0, GammaConvention::Signed};
  const PurificationStats s1 = gamma_stats(model, PurifiedSpec{1, 10000, Assignment::Independent}, opts);
  const PurificationStats s10 = gamma_stats(model, PurifiedSpec{10, 10000, Assignment::Independent}, opts);
  CHECK(std::abs(s1.gamma1 - 8.86e-4) <= 3 * 8.56e-5);
  CHECK(std::abs(s1.gamma2 - 5.39e-6) <= 3 * 1.81e-6);
  CHECK(std::abs(s10.gamma1 - 8.87e-3) <= 3 * 3.32e-4);
  CHECK(std::abs(s10.gamma2 - 1.51e-5) <= 3 * 5.52e-6);
  CHECK(s10.gamma1 > s1.gamma1);
  CHECK(s1.reps == 3);
  CHECK(s1.samples_used > 2900);
}

TEST_CASE("gate stability") {
  const SparseModel quiet = small_model(200, 5, 0.0);
  Rng r = rng(82);
  // zeta = 0 would put the gate at 0; use the gate of a noisy model instead.
  const GatedNetwork net = build_purified(quiet, PurifiedSpec{1, 2000, Assignment::Grouped}, r)
                               .with_gates(Vec::Constant(2000, PurifiedSpec{1, 2000}.gate_value(200, 0.005)));
  SUBCASE("noiseless, attack-free: no counts") {
    const GateStability gs = gate_stability(net, quiet, AttackSpec{Norm::L2, 0.0}, LossKind::Square, 500, 1);
    CHECK(gs.noise_activations == 0);
    CHECK(gs.feature_deactivations == 0);
    CHECK(gs.attack_flips == 0);
    CHECK(gs.adversarial_mismatches == 0);
    CHECK(gs.node_samples == 500LL * 2000);
  }
  SUBCASE("inflated noise opens gates") {
    const SparseModel loud = SparseModel::with_defaults(quiet.M_ptr(), 5, 0.5, NoiseConvention::ScaledByDim);
    const GateStability gs = gate_stability(net, loud, AttackSpec{Norm::L2, 0.0}, LossKind::Square, 200, 1);
    CHECK(gs.noise_activations > 0);
  }
  SUBCASE("batch counts sum to the totals") {
    Rng rr = rng(83);
    const Mat X = sample_features_batch(quiet, 50, rr);
    const Mat Z = observe_batch(quiet, X, rr);
    const Vec y = respond_batch(quiet, X, rr);
    const GateCounts gc = gate_counts_batch(net, X, Z, y, LossKind::Square, AttackSpec{Norm::L2, 0.0});
    CHECK(gc.noise_activations.size() == 50);
    for (int v : gc.attack_flips) CHECK(v == 0);
  }
}

TEST_CASE("cancellation probability") {
  const SparseModel model = small_model(1000, 10, 0.005);
  const double b = PurifiedSpec{2, 10000}.gate_value(1000, 0.005);
  Rng r1 = rng(84);
  const GatedNetwork n1 = build_purified(model, PurifiedSpec{1, 10000, Assignment::Grouped}, r1);
  CHECK(cancellation_prob(n1, model, 1.0, 2000, 3) == 0.0);
  Rng r2 = rng(85);
  const GatedNetwork n2 = build_purified(model, PurifiedSpec{2, 10000, Assignment::Grouped}, r2);
  CHECK(cancellation_prob(n2, model, 0.0, 2000, 3) == 0.0);
  CHECK(cancellation_prob(n2, model, b, 2000, 3) < 1e-2);
  // With a huge window every pair of co-active features on one node counts.
  CHECK(cancellation_prob(n2, model, 1e6, 2000, 3) > 0.0);
}

TEST_CASE("isotropy") {
  SUBCASE("zero budget: both losses log 2") {
    const IsotropyResult r = check_isotropy_optimal(4, 2, 0.0, 3, 100, 1);
    CHECK(r.mean_gap == 0.0);
    CHECK(r.pass_fraction == 0.0);
  }
  SUBCASE("(8, 4) isotropic wins") {
    const IsotropyResult r = check_isotropy_optimal(8, 4, 8.0, 50, 100000, 0);
    CHECK(r.pass_fraction >= 0.95);
    CHECK(r.mean_gap > 0);
  }
  CHECK_THROWS_AS(check_isotropy_optimal(40, 4, 1.0, 1, 1, 0), PreconditionError);
}

TEST_CASE("sandwich checks") {
  const SparseModel model = small_model(1000, 10, 0.005);
  Rng r = rng(86);
  const GatedNetwork net = build_purified(model, PurifiedSpec{1, 10000, Assignment::Grouped}, r);
  const SandwichResult sw = l2_sandwich_check(net, model, 2000, 4);
  CHECK(sw.pass_fraction >= 0.99);
  CHECK(sw.max_lower_deficit <= 1e-6);

  const SparseModel mi = SparseModel::with_defaults(identity(1000), 10, 0.005, NoiseConvention::ScaledByDim);
  Rng ri = rng(87);
  const GatedNetwork neti = build_purified(mi, PurifiedSpec{1, 10000, Assignment::Grouped}, ri);
  const SandwichResult li = linf_sandwich_check(neti, mi, 2000, 4);
  CHECK(li.pass_fraction >= 0.99);
  const SandwichResult open = linf_sandwich_check(neti.with_gates(Vec::Zero(10000)), mi, 20, 4);
  CHECK(open.max_upper_excess == doctest::Approx(0.0).epsilon(1e-8));
  CHECK(open.mean_effectiveness == doctest::Approx(1000.0));
  CHECK_THROWS_AS(linf_sandwich_check(net, model, 10, 4), PreconditionError);
}

TEST_CASE("psi rate") {
  const double l10 = std::log(10.0);
  CHECK(psi_rate(1000, 10, 10000, 1) == doctest::Approx(10 * l10 * l10 + 0.1));
  CHECK(psi_rate(1000, 10, 10000, 1) == doctest::Approx(53.1).epsilon(1e-3));
  const double first1 = psi_rate(1000, 10, 10000, 1) - 0.1, first2 = psi_rate(1000, 10, 10000, 2) - 0.1;
  CHECK(first2 / first1 == doctest::Approx(8.0));
  CHECK(psi_rate(1000, 1, 10000, 3) == doctest::Approx(std::sqrt(1.0 / 1000)));
}

#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "purify/errors.hpp"

using namespace purify;
using namespace testing_support;

TEST_CASE("fit_head") {
  const SparseModel model = small_model(50, 3, 0.0);
  Rng r = rng(90);
  const GatedNetwork net = build_purified(model, PurifiedSpec{1, 500, Assignment::Grouped}, r);

  SUBCASE("noiseless representable target interpolates") {
    DownstreamTask task = default_task(model, 200);
    task.model = model.with_response(0.7 * Vec::Ones(50), 0.0);
    const HeadFit fit = fit_head(net, task, 5);
    CHECK(fit.train_loss <= 1e-6);
    // The fitted head reproduces theta_down on the features.
    CHECK(((net.U() * fit.a).array() - 0.7).abs().maxCoeff() < 1e-3);
    CHECK(net.with_head(ScalarHead{fit.a}).shares_layer_with(net));
  }
  SUBCASE("empty data and shape errors") {
    CHECK_THROWS_AS(fit_head(net, Mat(50, 0), Vec(0), 0.0), PreconditionError);
    CHECK_THROWS_AS(fit_head(net, Mat::Zero(50, 3), Vec::Zero(2), 0.0), DimensionError);
  }
  SUBCASE("huge ridge shrinks the head to zero") {
    Rng rr = rng(91);
    const Mat X = sample_features_batch(model, 100, rr);
    const Mat Z = observe_batch(model, X, rr);
    const Vec y = respond_batch(model, X, rr);
    const HeadFit small = fit_head(net, Z, y, 1e-3);
    const HeadFit big = fit_head(net, Z, y, 1e12);
    CHECK(big.a.norm() < 1e-6 * small.a.norm());
    CHECK(big.lambda == 1e12);
  }
  SUBCASE("rank-deficient features fall back to a tiny ridge") {
    // n > effective rank: only 50 distinct feature directions, 200 samples.
    Rng rr = rng(92);
    const Mat X = sample_features_batch(model, 600, rr);
    const Mat Z = observe_batch(model, X, rr);
    const Vec y = respond_batch(model, X, rr);
    const HeadFit fit = fit_head(net, Z, y, 0.0);
    CHECK(fit.ridge_fallback);
    CHECK(fit.lambda > 0);
    CHECK(std::isfinite(fit.train_loss));
  }
  SUBCASE("mixing mismatch rejected") {
    const DownstreamTask other = default_task(small_model(50, 3, 0.0, 77), 10);
    CHECK_THROWS_AS(fit_head(net, other, 1), PreconditionError);
  }
}

TEST_CASE("robustness gap") {
  const SparseModel model = small_model(100, 5, 0.005);
  const DownstreamTask task = default_task(model, 400);
  auto gap_for = [&](int m, double eps) {
    Rng r = rng(93);
    const GatedNetwork net = build_purified(model, PurifiedSpec{m, 1000, Assignment::Grouped}, r);
    const HeadFit fit = fit_head(net, task, 11);
    return robustness_gap(net.with_head(ScalarHead{fit.a}), task, AttackSpec{Norm::L2, eps}, 1000, 12,
                          GateMode::Frozen);
  };
  const GapResult zero = gap_for(1, 0.0);
  CHECK(zero.gap == 0.0);
  CHECK(zero.adversarial == zero.clean);
  const GapResult g1 = gap_for(1, 0.05), g10 = gap_for(10, 0.05);
  CHECK(g1.gap >= -3 * g1.gap_se);
  CHECK(g1.gap <= 0.5 * g10.gap);
  CHECK(std::isfinite(g1.clean));
  CHECK(g1.clean + g1.gap == doctest::Approx(g1.adversarial));
}

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <unistd.h>

#include "helpers.hpp"
#include "purify/errors.hpp"

using namespace purify;
using namespace testing_support;

TEST_CASE("activation") {
  CHECK(activation(2.0, 1.0) == 2.0);
  CHECK(activation(0.5, 1.0) == 0.0);
  CHECK(activation(-3.0, 1.0) == -3.0);
  CHECK(activation(1.0, 1.0) == 1.0);  // inclusive gate
}

TEST_CASE("purified construction") {
  SUBCASE("(d, m, H) = (4, 1, 8)") {
    const SparseModel model = SparseModel::with_defaults(identity(4), 1, 0.0, NoiseConvention::Raw);
    Rng r = rng(20);
    const GatedNetwork net = build_purified(model, PurifiedSpec{1, 8, Assignment::Grouped}, r);
    const Mat U = Mat(net.U());
    for (int i = 0; i < 4; ++i) CHECK((U.row(i).array() != 0).count() == 2);
    for (Eigen::Index j = 0; j < U.size(); ++j)
      if (U.data()[j] != 0) CHECK(U.data()[j] == 0.5);
    CHECK((U * net.scalar_head().a - Vec::Ones(4)).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("(1000, 10, 10000) grouped and independent") {
    const SparseModel model = small_model(1000, 10, 0.005);
    for (Assignment asg : {Assignment::Grouped, Assignment::Independent}) {
      Rng r = rng(21);
      const GatedNetwork net = build_purified(model, PurifiedSpec{10, 10000, asg}, r);
      const SpMat& U = net.U();
      CHECK(U.nonZeros() == 100000);
      for (int k = 0; k < U.outerSize(); ++k)
        for (SpMat::InnerIterator it(U, k); it; ++it) CHECK(it.value() == doctest::Approx(0.01).epsilon(1e-15));
      Vec per_feature = Vec::Zero(1000);
      for (int k = 0; k < U.outerSize(); ++k)
        for (SpMat::InnerIterator it(U, k); it; ++it) per_feature(it.row()) += 1;
      CHECK((per_feature.array() == 100).all());
      if (asg == Assignment::Grouped)
        for (int h = 0; h < 10000; ++h) CHECK(U.col(h).nonZeros() == 10);
      CHECK((net.weights() - model.M() * Mat(U)).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("divisibility errors") {
    const SparseModel model = SparseModel::with_defaults(identity(4), 1, 0.0, NoiseConvention::Raw);
    Rng r = rng(22);
    CHECK_THROWS_AS(build_purified(model, PurifiedSpec{3, 8, Assignment::Grouped}, r), ConstructionError);
    CHECK_THROWS_AS(build_purified(model, PurifiedSpec{1, 6, Assignment::Grouped}, r), ConstructionError);
  }
  SUBCASE("same stream, same network") {
    const SparseModel model = small_model(20, 2, 0.0);
    Rng r1 = rng(23), r2 = rng(23);
    const auto a = build_purified(model, PurifiedSpec{2, 40, Assignment::Independent}, r1);
    const auto b = build_purified(model, PurifiedSpec{2, 40, Assignment::Independent}, r2);
    CHECK(Mat(a.U()) == Mat(b.U()));
  }
}

TEST_CASE("membership") {
  const SparseModel model = small_model(1000, 10, 0.005);
  Rng r = rng(24);
  const GatedNetwork net = build_purified(model, PurifiedSpec{1, 10000, Assignment::Grouped}, r);
  const MembershipReport rep = check_membership(net, 1, 10);
  CHECK(rep.sparsity_ok());
  CHECK(rep.sign_ok());
  CHECK(rep.window_upper_ok());
  CHECK(rep.max_node_load == 1);
  // b_h = zeta log d / sqrt d * d sqrt(m) / H against c_h = ||U_h|| / sqrt(k ||U_h||_0).
  const double b = PurifiedSpec{1, 10000}.gate_value(1000, 0.005);
  const double c = 0.1 / std::sqrt(10.0);
  CHECK(rep.min_upper_margin == doctest::Approx(c / b).epsilon(1e-12));

  SUBCASE("mixed-sign row flagged") {
    SpMat U(4, 2);
    U.insert(0, 0) = 0.5;
    U.insert(0, 1) = -0.5;
    U.insert(1, 0) = 0.5;
    U.insert(2, 1) = 0.5;
    U.insert(3, 1) = 0.5;
    const GatedNetwork bad = GatedNetwork::factored(identity(4), U, Vec::Constant(2, 0.01));
    const MembershipReport mr = check_membership(bad, 4, 1);
    CHECK(mr.sign_failures == 1);
    CHECK_FALSE(mr.sign_ok());
  }
  SUBCASE("sparsity cap") {
    CHECK(check_membership(net, 0, 10).sparsity_failures == 10000);
  }
}

TEST_CASE("forward_supervised") {
  Rng r = rng(25);
  SUBCASE("all gates closed") {
    const GatedNetwork net = random_dense(5, 7, 0.1, r);
    CHECK(forward_supervised(net, Vec::Zero(5)) == 0.0);
  }
  SUBCASE("b = 0, one node, a = 1 is linear") {
    Mat W = Mat::Zero(3, 1);
    W << 1.0, -2.0, 0.5;
    const GatedNetwork net = GatedNetwork::dense(W, Vec::Zero(1), ScalarHead{Vec::Ones(1)});
    const Vec z = Vec::LinSpaced(3, 0.3, 0.9);
    CHECK(forward_supervised(net, z) == doctest::Approx(z.dot(W.col(0))).epsilon(1e-15));
  }
  SUBCASE("purified m = 1, single active feature") {
    const SparseModel model = small_model(1000, 10, 0.005);
    Rng rr = rng(26);
    const GatedNetwork net = build_purified(model, PurifiedSpec{1, 10000, Assignment::Grouped}, rr);
    Vec x = Vec::Zero(1000);
    x(0) = 0.5;
    CHECK(forward_supervised(net, model.M() * x) == doctest::Approx(0.5).epsilon(1e-10));
    int open = 0;
    for (char g : net.gates(model.M() * x)) open += g;
    CHECK(open == 10);  // Hm/d = 10 carrying nodes at H = 10000, d = 1000
  }
  SUBCASE("wrong head") {
    const GatedNetwork net = random_dense(4, 6, 0.0, r, true);
    CHECK_THROWS_AS(forward_supervised(net, Vec::Zero(4)), HeadMismatchError);
    CHECK_THROWS_AS(forward_supervised(random_dense(4, 6, 0.0, r), Vec::Zero(3)), DimensionError);
  }
}

TEST_CASE("pseudo head") {
  SUBCASE("orthonormal rows give tau W'") {
    const Mat Q = sample_unitary(6, 3);
    const Mat W = Q.leftCols(4).transpose();  // 4 x 6 with orthonormal rows
    const GatedNetwork net = pseudo_head(GatedNetwork::dense(W, Vec::Zero(6)));
    CHECK((net.head_matrix() - std::sqrt(5.0) * W.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(net.matrix_head().tau == doctest::Approx(std::sqrt(5.0)));
  }
  SUBCASE("W A A' W' = tau^2 I for random full-rank W, dense and factored") {
    Rng r = rng(27);
    const GatedNetwork dense = pseudo_head(random_dense(5, 9, 0.0, r), 2.0);
    const Mat W = dense.weights(), A = dense.head_matrix();
    CHECK((W * A * A.transpose() * W.transpose() - 4.0 * Mat::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);

    const SparseModel model = small_model(20, 2, 0.0);
    Rng rr = rng(28);
    const GatedNetwork f = pseudo_head(build_purified(model, PurifiedSpec{2, 60, Assignment::Independent}, rr));
    CHECK(f.matrix_head().factored);
    const Mat Wf = f.weights(), Af = f.head_matrix();
    CHECK((Wf * Af * Af.transpose() * Wf.transpose() - 5.0 * Mat::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-8);
    // Factored head_times / head_transpose_times agree with the explicit A.
    const Vec s = randn(60, rr), rv = randn(20, rr);
    CHECK((f.head_transpose_times(s) - Af.transpose() * s).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((f.head_times(rv) - Af * rv).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("d > H and rank deficiency") {
    Rng r = rng(29);
    CHECK_THROWS_AS(pseudo_head(random_dense(6, 4, 0.0, r)), SingularityError);
    Mat W = Mat::Zero(3, 5);
    W(0, 0) = 1;
    W(1, 1) = 1;
    CHECK_THROWS_AS(pseudo_head(GatedNetwork::dense(W, Vec::Zero(5))), SingularityError);
    // Grouped with m > 1 merges features into identical rows of U.
    const SparseModel model = small_model(20, 2, 0.0);
    Rng rr = rng(30);
    CHECK_THROWS_AS(pseudo_head(build_purified(model, PurifiedSpec{2, 40, Assignment::Grouped}, rr)),
                    SingularityError);
  }
}

TEST_CASE("represent") {
  Rng r = rng(31);
  SUBCASE("closed gates") {
    const GatedNetwork net = pseudo_head(random_dense(4, 8, 0.5, r));
    CHECK(represent(net, Vec::Zero(4)).isZero(0));
  }
  SUBCASE("b = 0 is linear") {
    const GatedNetwork net = pseudo_head(random_dense(4, 8, 0.0, r));
    const Vec z = randn(4, r);
    const Mat W = net.weights(), A = net.head_matrix();
    CHECK((represent(net, z) - A.transpose() * W.transpose() * z).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("noiseless purified input recovers tau M x") {
    const SparseModel model = small_model(200, 5, 0.0);
    Rng rr = rng(32);
    const GatedNetwork net =
        pseudo_head(build_purified(model, PurifiedSpec{1, 2000, Assignment::Grouped}, rr));
    const Vec x = sample_features(model, rr);
    // The representation lives in observation coordinates: M' r = tau x.
    const Vec rep = represent(net, model.M() * x);
    CHECK((model.M().transpose() * rep - std::sqrt(5.0) * x).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("factored and dense layers agree") {
  const SparseModel model = small_model(30, 3, 0.01);
  Rng r = rng(33);
  const GatedNetwork f = build_purified(model, PurifiedSpec{2, 90, Assignment::Independent}, r);
  const GatedNetwork d = GatedNetwork::dense(f.weights(), f.b(), f.head());
  const GatedNetwork back = d.attach_mixing(model.M_ptr());
  CHECK((Mat(back.U()) - Mat(f.U())).cwiseAbs().maxCoeff() < 1e-13);
  const Vec z = observe(model, sample_features(model, r), r);
  CHECK((f.preactivation(z) - d.preactivation(z)).cwiseAbs().maxCoeff() < 1e-13);
  const Vec v = randn(90, r);
  CHECK((f.weights_times(v) - d.weights_times(v)).cwiseAbs().maxCoeff() < 1e-12);
  const GatedNetwork h = f.with_head(ScalarHead{Vec::Zero(90)});
  CHECK(h.shares_layer_with(f));
  CHECK_THROWS_AS(f.with_gates(Vec::Zero(3)), DimensionError);
}

TEST_CASE("serialization round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("purify_net_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const SparseModel model = small_model(20, 2, 0.0);
  Rng r = rng(34);
  const GatedNetwork f = pseudo_head(build_purified(model, PurifiedSpec{1, 40, Assignment::Independent}, r));
  const std::string p1 = (dir / "f.bin").string();
  save_network(f, p1);
  const GatedNetwork g = load_network(p1);
  CHECK(g.is_factored());
  CHECK(Mat(g.U()) == Mat(f.U()));
  CHECK(g.M() == f.M());
  CHECK(g.b() == f.b());
  CHECK((g.head_matrix() - f.head_matrix()).cwiseAbs().maxCoeff() < 1e-12);

  const GatedNetwork d = random_dense(3, 5, 0.2, r);
  const std::string p2 = (dir / "d.bin").string();
  save_network(d, p2);
  const GatedNetwork e = load_network(p2);
  CHECK(e.weights() == d.weights());
  CHECK(e.scalar_head().a == d.scalar_head().a);

  const std::string p3 = (dir / "bad.bin").string();
  std::FILE* fp = std::fopen(p3.c_str(), "wb");
  std::fputs("not a network", fp);
  std::fclose(fp);
  CHECK_THROWS_AS(load_network(p3), FormatError);
  CHECK_THROWS_AS(load_network((dir / "missing.bin").string()), FormatError);
  fs::remove_all(dir);
}

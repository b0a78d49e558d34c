// Serial per-sample reference against the blocked OpenMP kernels.
//   bench_kernels --benchmark_filter=Contrastive

#include <benchmark/benchmark.h>

#include <memory>

#include "purify/experiments.hpp"

using namespace purify;

namespace {

struct Setup {
  SparseModel model;
  GatedNetwork net;
  Mat X, Z, Zp;
  Vec y;

  Setup(int d, int H, int n)
      : model(SparseModel::with_defaults(std::make_shared<const Mat>(sample_unitary(d, 1)), 10, 0.005,
                                         NoiseConvention::ScaledByDim)) {
    Rng r = make_stream(1, 0, Stream::Network, 1);
    net = pseudo_head(build_purified(model, PurifiedSpec{1, H, Assignment::Independent}, r));
    Rng s = make_stream(1, 0, Stream::Data);
    X = sample_features_batch(model, n, s);
    Z = observe_batch(model, X, s);
    Zp = observe_batch(model, sample_features_batch(model, n, s), s);
    y = respond_batch(model, X, s);
  }
};

const Setup& setup() {
  static const Setup s(500, 5000, 256);
  return s;
}

const AttackSpec kAttack{Norm::L2, 0.3};

void ContrastiveSerial(benchmark::State& st) {
  const Setup& s = setup();
  for (auto _ : st) {
    double acc = 0;
    for (Eigen::Index j = 0; j < s.Z.cols(); ++j) {
      const ContrastivePair p{s.Z.col(j), s.Zp.col(j), -1, Vec(), Vec()};
      acc += adv_loss(kAttack, s.net, p, GateMode::Frozen).adversarial;
    }
    benchmark::DoNotOptimize(acc);
  }
  st.SetItemsProcessed(st.iterations() * s.Z.cols());
}

void ContrastiveKernel(benchmark::State& st) {
  const Setup& s = setup();
  set_threads(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    const BatchResult br = contrastive_batch(s.net, s.Z, s.Zp, -1, kAttack, GateMode::Frozen);
    benchmark::DoNotOptimize(br.adversarial.data());
  }
  st.SetItemsProcessed(st.iterations() * s.Z.cols());
}

void SupervisedSerial(benchmark::State& st) {
  const Setup& s = setup();
  const GatedNetwork net = s.net.with_head(ScalarHead{Vec::Ones(s.net.H())});
  for (auto _ : st) {
    double acc = 0;
    for (Eigen::Index j = 0; j < s.Z.cols(); ++j)
      acc += adv_loss(kAttack, LossKind::Square, net, s.Z.col(j), s.y(j), GateMode::Regated).adversarial;
    benchmark::DoNotOptimize(acc);
  }
  st.SetItemsProcessed(st.iterations() * s.Z.cols());
}

void SupervisedKernel(benchmark::State& st) {
  const Setup& s = setup();
  const GatedNetwork net = s.net.with_head(ScalarHead{Vec::Ones(s.net.H())});
  set_threads(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    const BatchResult br = supervised_batch(net, s.Z, s.y, LossKind::Square, kAttack, GateMode::Regated);
    benchmark::DoNotOptimize(br.adversarial.data());
  }
  st.SetItemsProcessed(st.iterations() * s.Z.cols());
}

void GammaDense(benchmark::State& st) {
  const Setup& s = setup();
  const Mat& Ginv = *s.net.matrix_head().Ginv;
  for (auto _ : st) {
    double acc = 0;
    for (Eigen::Index j = 0; j < 16; ++j) acc += leakage_matrix(s.net.U(), Ginv, support(s.X.col(j))).sum();
    benchmark::DoNotOptimize(acc);
  }
  st.SetItemsProcessed(st.iterations() * 16);
}

void GammaKernel(benchmark::State& st) {
  const Setup& s = setup();
  const Mat& Ginv = *s.net.matrix_head().Ginv;
  set_threads(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    const GammaBatch gb = gamma_batch(s.net.U(), Ginv, s.X, GammaConvention::Signed);
    benchmark::DoNotOptimize(gb.gamma1.data());
  }
  st.SetItemsProcessed(st.iterations() * s.X.cols());
}

}  // namespace

BENCHMARK(ContrastiveSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(ContrastiveKernel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(SupervisedSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(SupervisedKernel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(GammaDense)->Unit(benchmark::kMillisecond);
BENCHMARK(GammaKernel)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

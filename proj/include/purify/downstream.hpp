#pragma once

#include <cstdint>

#include "purify/kernels.hpp"

namespace purify {

struct DownstreamTask {
  SparseModel model;  // shares M with the pre-training model
  int n_train = 1000;
  LossKind loss = LossKind::Square;
  double ridge = 0.0;
};

// theta_down = 0.7 * 1, sigma_y = 0.1, same M and sparsity.
DownstreamTask default_task(const SparseModel& pretrain, int n_train);

struct HeadFit {
  Vec a;
  double lambda = 0.0;       // ridge actually used
  bool ridge_fallback = false;
  double train_loss = 0.0;   // mean squared residual
};

// a* = argmin sum (phi(z_i)'a - y_i)^2 + lambda ||a||^2 with phi the gated
// hidden vector of the frozen first layer. When lambda = 0 and the system is
// numerically singular, retries with lambda = 1e-8 * trace(Phi Phi') / n.
HeadFit fit_head(const GatedNetwork& net, const DownstreamTask& task, std::uint64_t seed);
HeadFit fit_head(const GatedNetwork& net, const Mat& Z, const Vec& y, double ridge);

struct GapResult {
  double clean = 0.0;
  double adversarial = 0.0;
  double gap = 0.0;
  double gap_se = 0.0;  // standard error of the per-sample gap
  long long gate_flips = 0;
};

GapResult robustness_gap(const GatedNetwork& net_with_head, const DownstreamTask& task,
                         const AttackSpec& attack, int n_test, std::uint64_t seed,
                         GateMode mode = GateMode::Regated);

}  // namespace purify

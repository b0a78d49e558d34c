#pragma once

#include <vector>

#include "purify/attack.hpp"

// Batched evaluation over sample columns for factored networks (W = M U).
// Samples are processed in fixed blocks of kBlock columns under OpenMP; each
// column's result depends only on its own inputs, so outputs are identical
// for any thread count. The per-sample functions in objectives/attack are the
// serial reference these kernels are tested against.

namespace purify {

inline constexpr int kBlock = 64;

void set_threads(int n);
int max_threads();

struct BatchResult {
  Vec clean;
  Vec adversarial;
  std::vector<int> gate_flips;
};

// Inputs lowered to feature coordinates once; lets repeated evaluations at
// different budgets (epsilon calibration) skip the dense d x d work.
struct ContrastiveCache {
  int y = 1;
  Mat Zhat;  // M' Z
  Mat Q;     // G^{-2} U s(z') per column
};

ContrastiveCache prepare_contrastive(const GatedNetwork& net, const Mat& Z, const Mat& Zp, int y);
BatchResult evaluate_contrastive(const GatedNetwork& net, const ContrastiveCache& cache,
                                 const AttackSpec& attack, GateMode mode);
BatchResult contrastive_batch(const GatedNetwork& net, const Mat& Z, const Mat& Zp, int y,
                              const AttackSpec& attack, GateMode mode);

BatchResult supervised_batch(const GatedNetwork& net, const Mat& Z, const Vec& y, LossKind kind,
                             const AttackSpec& attack, GateMode mode);

// ||W diag(1{|W'z| >= b}) a||_2 per column.
Vec effectiveness_batch(const GatedNetwork& net, const Mat& Z);

// Gated hidden features sigma(W'z, b), one row per sample (n x H).
Mat hidden_batch(const GatedNetwork& net, const Mat& Z);

enum class GammaConvention { Signed, Absolute };

struct GammaBatch {
  Vec gamma1;  // NaN where the block is empty
  Vec gamma2;
};

// Block averages of B = U D U' G^{-1} for the active sets of the columns of X.
// Signed: gamma2 averages over all of X^c x X^c including the diagonal.
// Absolute: |B_ij|, gamma2 over i != j.
GammaBatch gamma_batch(const SpMat& U, const Mat& Ginv, const Mat& X, GammaConvention conv);

}  // namespace purify

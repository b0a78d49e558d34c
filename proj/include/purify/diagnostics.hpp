#pragma once

#include <cstdint>
#include <vector>

#include "purify/kernels.hpp"

namespace purify {

// B = U D U' (UU')^{-1}, D_h = 1 iff node h carries a feature in active_set.
Mat leakage_matrix(const GatedNetwork& net, const std::vector<int>& active_set);
Mat leakage_matrix(const SpMat& U, const Mat& Ginv, const std::vector<int>& active_set);

struct PurificationStats {
  int m = 0;
  int reps = 0;
  long long samples_used = 0;  // samples with a non-empty, non-full active set
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double std1 = 0.0;  // across repetition means
  double std2 = 0.0;
  double sample_std1 = 0.0;  // across individual samples, pooled
  double sample_std2 = 0.0;
};

struct GammaOptions {
  int samples = 1000;
  int reps = 30;
  std::uint64_t seed = 0;
  GammaConvention convention = GammaConvention::Signed;
};

// Fresh network per repetition; the feature draws of repetition r are shared
// by every m so that the curves over m are matched.
PurificationStats gamma_stats(const SparseModel& model, const PurifiedSpec& spec,
                              const GammaOptions& opts);

struct GateStability {
  long long noise_activations = 0;       // no carried feature active, gate open at z
  long long feature_deactivations = 0;   // carried feature active, gate closed at z
  long long attack_flips = 0;            // gate differs between z and z + delta
  long long adversarial_mismatches = 0;  // gate at z + delta differs from the ideal pattern
  long long node_samples = 0;            // H * samples
  double flip_fraction() const {
    return node_samples ? static_cast<double>(adversarial_mismatches) / node_samples : 0.0;
  }
};

struct GateCounts {
  std::vector<int> noise_activations, feature_deactivations, attack_flips, adversarial_mismatches;
};

// Per-column counts for features X, observations Z and responses y.
GateCounts gate_counts_batch(const GatedNetwork& net, const Mat& X, const Mat& Z, const Vec& y,
                             LossKind kind, const AttackSpec& attack);

GateStability gate_stability(const GatedNetwork& net, const SparseModel& model,
                             const AttackSpec& attack, LossKind kind, int samples,
                             std::uint64_t seed);

// Monte Carlo estimate of P(exists h: |X'U_h| in (0, v/||U_h||) with at least
// two carried features active). A lone feature cannot cancel, so m = 1 gives 0.
double cancellation_prob(const GatedNetwork& net, const SparseModel& model, double v, int samples,
                         std::uint64_t seed);

struct IsotropyResult {
  double pass_fraction = 0.0;
  double mean_gap = 0.0;  // mean over trials of L(D) - L(isotropic)
  double min_gap = 0.0;
  int trials = 0;
};

// Paired Monte Carlo of the contrastive loss of g(x, x') = x' P D P' x' with
// random Haar P and Dirichlet-weighted diagonal D, tr D = budget, against the
// isotropic (budget/d) I on the same pairs.
IsotropyResult check_isotropy_optimal(int d, int k, double budget, int trials, int samples,
                                      std::uint64_t seed);

struct SandwichResult {
  double pass_fraction = 0.0;
  int samples = 0;
  double mean_effectiveness = 0.0;
  double max_upper_excess = 0.0;  // max(eff - upper)
  double max_lower_deficit = 0.0;  // max(lower - eff)
};

// ||theta_X||_2 - 1e-8 <= ||W D a||_2 <= ||theta||_2 + 1e-8 with theta = U a.
SandwichResult l2_sandwich_check(const GatedNetwork& net, const SparseModel& model, int samples,
                                 std::uint64_t seed);

// l1 version for FGSM; the model must have M = I.
SandwichResult linf_sandwich_check(const GatedNetwork& net, const SparseModel& model, int samples,
                                   std::uint64_t seed);

double psi_rate(double d, double k, double H, double m);

}  // namespace purify

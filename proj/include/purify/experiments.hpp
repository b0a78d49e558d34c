#pragma once

#include <cstdint>
#include <functional>

#include "purify/diagnostics.hpp"
#include "purify/downstream.hpp"
#include "purify/report.hpp"

namespace purify {

struct CalibrationResult {
  double epsilon = 0.0;
  double achieved = 0.0;   // f(epsilon)
  double loss_at_low = 0.0;
  double loss_at_high = 0.0;
  int evaluations = 0;
};

// Bisection for f(eps) = target on [lo, hi] with f non-decreasing. Returns lo
// when target <= f(lo). Throws CalibrationError when f(hi) < target or when
// the evaluated points are not monotone.
CalibrationResult bisect_epsilon(const std::function<double(double)>& f, double target, double lo,
                                 double hi, double tol = 1e-5);

// Pins epsilon so that the m = 1 adversarial dissimilar mean of the
// contrastive sweep equals target.
CalibrationResult calibrate_epsilon(const ExperimentConfig& cfg, double target);

ExperimentReport run_contrastive_sweep(const ExperimentConfig& cfg);
ExperimentReport run_gamma_sweep(const ExperimentConfig& cfg);
ExperimentReport run_supervised_sweep(const ExperimentConfig& cfg);
ExperimentReport run_downstream_sweep(const ExperimentConfig& cfg);
ExperimentReport run_verify(const ExperimentConfig& cfg);
ExperimentReport run_preset(const ExperimentConfig& cfg);

// Downstream sweep on one persisted network instead of building one per m.
ExperimentReport run_downstream_on(const ExperimentConfig& cfg, const GatedNetwork& net);

// The model of repetition rep: Haar M (shared across repetitions when
// fix_mixing is set), theta0 = 1, sigma_y = 0.1.
SparseModel repetition_model(const ExperimentConfig& cfg, int rep);

struct GradientCheck {
  int pairs = 0;
  int passed = 0;
  double max_rel_error = 0.0;
};

// Central differences (step 1e-6) against grad_z on random small networks
// and inputs whose gate margins exceed 1e-4.
GradientCheck gradient_check(LossKind kind, int pairs, std::uint64_t seed, double tol = 1e-4);

}  // namespace purify

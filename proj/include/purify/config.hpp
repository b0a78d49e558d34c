#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "purify/attack.hpp"
#include "purify/kernels.hpp"

namespace purify {

enum class Preset { ContrastiveSweep, GammaSweep, SupervisedSweep, DownstreamSweep, VerifyLemmas };

struct ExperimentConfig {
  Preset preset = Preset::ContrastiveSweep;
  int d = 1000;
  int k = 10;
  double zeta = 0.005;
  int H = 10000;
  int n_samples = 1000;
  int reps = 30;
  std::vector<int> m_list{1, 2, 5, 10};
  std::optional<double> epsilon;  // empty means "calibrate"
  double tau = 2.23606797749979;  // sqrt(5)
  NoiseConvention noise_convention = NoiseConvention::ScaledByDim;
  std::uint64_t seed = 0;
  std::string output_path;

  // Implementation choices beyond the model parameters.
  Assignment assignment = Assignment::Independent;
  GateMode gate_mode = GateMode::Regated;  // frozen keeps the clean gate pattern at z + delta
  Norm norm = Norm::L2;
  GammaConvention gamma_convention = GammaConvention::Signed;
  bool fix_mixing = false;   // one M for all repetitions
  double target = 0.8286;    // calibration target (m = 1, adversarial dissimilar)
  double eps_lo = 1e-4;
  double eps_hi = 1.0;
  int n_train = 2000;        // downstream head fitting; n_train = d sits on the interpolation peak at m = 1
  int verify_samples = 10000;
  int isotropy_d = 8;
  int isotropy_k = 4;
  int isotropy_samples = 100000;
  int isotropy_trials = 50;
  int fd_pairs = 1000;
};

// Reference defaults plus the per-preset choices: contrastive and gamma sweeps
// use the independent assignment, the others the grouped one.
ExperimentConfig default_config(Preset preset);

void validate(const ExperimentConfig& cfg);

// key = value lines, in a fixed order, with the effective values.
std::vector<std::string> config_echo(const ExperimentConfig& cfg);

std::string to_string(Preset p);
std::string to_string(NoiseConvention n);
std::string to_string(Assignment a);
std::string to_string(GateMode g);
std::string to_string(Norm n);
std::string to_string(GammaConvention c);

Preset parse_preset(const std::string& s);
NoiseConvention parse_noise(const std::string& s);
Assignment parse_assignment(const std::string& s);
GateMode parse_gate_mode(const std::string& s);
Norm parse_norm(const std::string& s);
GammaConvention parse_gamma_convention(const std::string& s);
// "calibrate" or a non-negative number.
std::optional<double> parse_epsilon(const std::string& s);

// Sets one field by its config_echo name. m_list takes "[1,2,5,10]" or
// "1,2,5,10". Throws PreconditionError on unknown keys or malformed values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Flat key = value file; '#' starts a comment, blank lines are skipped.
// Returns the keys that were set, in file order.
std::vector<std::string> load_config_file(const std::string& path, ExperimentConfig& cfg);

}  // namespace purify

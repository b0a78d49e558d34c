#include "purify/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "purify/errors.hpp"

namespace purify {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void bad(const std::string& what, const std::string& value) {
  throw PreconditionError("unknown " + what + " '" + value + "'");
}

}  // namespace

ExperimentConfig default_config(Preset preset) {
  ExperimentConfig c;
  c.preset = preset;
  switch (preset) {
    case Preset::ContrastiveSweep:
    case Preset::GammaSweep:
      c.assignment = Assignment::Independent;
      break;
    case Preset::SupervisedSweep:
      c.assignment = Assignment::Grouped;
      c.epsilon = 1e-3;
      break;
    case Preset::DownstreamSweep:
      c.assignment = Assignment::Grouped;
      c.epsilon = 0.1;
      break;
    case Preset::VerifyLemmas:
      c.assignment = Assignment::Grouped;
      c.epsilon = 0.1;
      break;
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw PreconditionError(msg);
  };
  need(c.d >= 1, "d must be positive");
  need(c.k >= 1 && c.k <= c.d, "k must satisfy 1 <= k <= d");
  need(c.zeta >= 0 && std::isfinite(c.zeta), "zeta must be non-negative");
  need(c.H >= 1, "H must be positive");
  need(c.n_samples >= 1, "n_samples must be positive");
  need(c.reps >= 1, "reps must be positive");
  need(!c.m_list.empty(), "m_list must not be empty");
  for (int m : c.m_list) need(m >= 1, "every m must be positive");
  if (c.epsilon) need(*c.epsilon >= 0 && std::isfinite(*c.epsilon), "epsilon must be non-negative");
  need(c.tau > 0 && std::isfinite(c.tau), "tau must be positive");
  need(c.eps_lo > 0 && c.eps_lo < c.eps_hi, "calibration bracket must satisfy 0 < eps_lo < eps_hi");
  need(c.n_train >= 1, "n_train must be positive");
  need(c.verify_samples >= 1 && c.isotropy_samples >= 1 && c.isotropy_trials >= 1 && c.fd_pairs >= 1,
       "verification sample counts must be positive");
}

std::vector<std::string> config_echo(const ExperimentConfig& c) {
  std::string ml;
  for (std::size_t i = 0; i < c.m_list.size(); ++i) ml += (i ? "," : "") + std::to_string(c.m_list[i]);
  return {
      "preset=" + to_string(c.preset),
      "d=" + std::to_string(c.d),
      "k=" + std::to_string(c.k),
      "zeta=" + num(c.zeta),
      "H=" + std::to_string(c.H),
      "n_samples=" + std::to_string(c.n_samples),
      "reps=" + std::to_string(c.reps),
      "m_list=[" + ml + "]",
      "epsilon=" + (c.epsilon ? num(*c.epsilon) : std::string("calibrate")),
      "tau=" + num(c.tau),
      "noise_convention=" + to_string(c.noise_convention),
      "seed=" + std::to_string(c.seed),
      "output_path=" + c.output_path,
      "assignment=" + to_string(c.assignment),
      "gate_mode=" + to_string(c.gate_mode),
      "norm=" + to_string(c.norm),
      "gamma_convention=" + to_string(c.gamma_convention),
      "fix_mixing=" + std::string(c.fix_mixing ? "true" : "false"),
      "target=" + num(c.target),
      "eps_lo=" + num(c.eps_lo),
      "eps_hi=" + num(c.eps_hi),
      "n_train=" + std::to_string(c.n_train),
      "verify_samples=" + std::to_string(c.verify_samples),
      "isotropy_d=" + std::to_string(c.isotropy_d),
      "isotropy_k=" + std::to_string(c.isotropy_k),
      "isotropy_samples=" + std::to_string(c.isotropy_samples),
      "isotropy_trials=" + std::to_string(c.isotropy_trials),
      "fd_pairs=" + std::to_string(c.fd_pairs),
  };
}

std::string to_string(Preset p) {
  switch (p) {
    case Preset::ContrastiveSweep: return "contrastive-sweep";
    case Preset::GammaSweep: return "gamma-sweep";
    case Preset::SupervisedSweep: return "supervised-sweep";
    case Preset::DownstreamSweep: return "downstream-sweep";
    case Preset::VerifyLemmas: return "verify";
  }
  return "unknown";
}

std::string to_string(NoiseConvention n) { return n == NoiseConvention::ScaledByDim ? "scaled" : "raw"; }
std::string to_string(Assignment a) { return a == Assignment::Grouped ? "grouped" : "independent"; }
std::string to_string(GateMode g) { return g == GateMode::Regated ? "regated" : "frozen"; }
std::string to_string(Norm n) { return n == Norm::L2 ? "l2" : "linf"; }
std::string to_string(GammaConvention c) { return c == GammaConvention::Signed ? "signed" : "absolute"; }

Preset parse_preset(const std::string& s) {
  const std::string v = lower(s);
  for (Preset p : {Preset::ContrastiveSweep, Preset::GammaSweep, Preset::SupervisedSweep,
                   Preset::DownstreamSweep, Preset::VerifyLemmas})
    if (v == to_string(p)) return p;
  if (v == "contrastivesweep") return Preset::ContrastiveSweep;
  if (v == "gammasweep") return Preset::GammaSweep;
  if (v == "supervisedsweep") return Preset::SupervisedSweep;
  if (v == "downstreamsweep") return Preset::DownstreamSweep;
  if (v == "verifylemmas") return Preset::VerifyLemmas;
  bad("preset", s);
}

NoiseConvention parse_noise(const std::string& s) {
  const std::string v = lower(s);
  if (v == "scaled" || v == "scaledbydim") return NoiseConvention::ScaledByDim;
  if (v == "raw") return NoiseConvention::Raw;
  bad("noise convention", s);
}

Assignment parse_assignment(const std::string& s) {
  const std::string v = lower(s);
  if (v == "grouped") return Assignment::Grouped;
  if (v == "independent") return Assignment::Independent;
  bad("assignment", s);
}

GateMode parse_gate_mode(const std::string& s) {
  const std::string v = lower(s);
  if (v == "regated") return GateMode::Regated;
  if (v == "frozen") return GateMode::Frozen;
  bad("gate mode", s);
}

Norm parse_norm(const std::string& s) {
  const std::string v = lower(s);
  if (v == "l2" || v == "fgm") return Norm::L2;
  if (v == "linf" || v == "fgsm") return Norm::Linf;
  bad("norm", s);
}

GammaConvention parse_gamma_convention(const std::string& s) {
  const std::string v = lower(s);
  if (v == "signed") return GammaConvention::Signed;
  if (v == "absolute") return GammaConvention::Absolute;
  bad("gamma convention", s);
}

std::optional<double> parse_epsilon(const std::string& s) {
  if (lower(s) == "calibrate") return std::nullopt;
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    bad("epsilon", s);
  }
  if (pos != s.size() || !(v >= 0) || !std::isfinite(v)) bad("epsilon", s);
  return v;
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  std::istringstream in(s);
  T v{};
  in >> v;
  if (!in || !(in >> std::ws).eof()) throw PreconditionError("bad value '" + s + "' for " + key);
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  const std::string v = lower(s);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw PreconditionError("bad value '" + s + "' for " + key);
}

std::vector<int> parse_int_list(const std::string& key, std::string s) {
  s = trim(s);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') throw PreconditionError("unterminated list for " + key);
    s = s.substr(1, s.size() - 2);
  }
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
  return out;
}

}  // namespace

void apply_setting(ExperimentConfig& c, const std::string& key_in, const std::string& value_in) {
  const std::string key = trim(key_in), v = trim(value_in);
  if (key == "preset") c.preset = parse_preset(v);
  else if (key == "d") c.d = parse_number<int>(key, v);
  else if (key == "k") c.k = parse_number<int>(key, v);
  else if (key == "zeta") c.zeta = parse_number<double>(key, v);
  else if (key == "H") c.H = parse_number<int>(key, v);
  else if (key == "n_samples") c.n_samples = parse_number<int>(key, v);
  else if (key == "reps") c.reps = parse_number<int>(key, v);
  else if (key == "m_list") c.m_list = parse_int_list(key, v);
  else if (key == "epsilon") c.epsilon = parse_epsilon(v);
  else if (key == "tau") c.tau = parse_number<double>(key, v);
  else if (key == "noise_convention") c.noise_convention = parse_noise(v);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, v);
  else if (key == "output_path") c.output_path = v;
  else if (key == "assignment") c.assignment = parse_assignment(v);
  else if (key == "gate_mode") c.gate_mode = parse_gate_mode(v);
  else if (key == "norm") c.norm = parse_norm(v);
  else if (key == "gamma_convention") c.gamma_convention = parse_gamma_convention(v);
  else if (key == "fix_mixing") c.fix_mixing = parse_bool(key, v);
  else if (key == "target") c.target = parse_number<double>(key, v);
  else if (key == "eps_lo") c.eps_lo = parse_number<double>(key, v);
  else if (key == "eps_hi") c.eps_hi = parse_number<double>(key, v);
  else if (key == "n_train") c.n_train = parse_number<int>(key, v);
  else if (key == "verify_samples") c.verify_samples = parse_number<int>(key, v);
  else if (key == "isotropy_d") c.isotropy_d = parse_number<int>(key, v);
  else if (key == "isotropy_k") c.isotropy_k = parse_number<int>(key, v);
  else if (key == "isotropy_samples") c.isotropy_samples = parse_number<int>(key, v);
  else if (key == "isotropy_trials") c.isotropy_trials = parse_number<int>(key, v);
  else if (key == "fd_pairs") c.fd_pairs = parse_number<int>(key, v);
  else throw PreconditionError("unknown config key '" + key + "'");
}

std::vector<std::string> load_config_file(const std::string& path, ExperimentConfig& cfg) {
  std::ifstream f(path);
  if (!f) throw PreconditionError("cannot open config file " + path);
  std::vector<std::string> keys;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw PreconditionError(path + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    try {
      apply_setting(cfg, key, line.substr(eq + 1));
    } catch (const PreconditionError& e) {
      throw PreconditionError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    keys.push_back(key);
  }
  return keys;
}

}  // namespace purify

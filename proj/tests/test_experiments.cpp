#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "helpers.hpp"
#include "purify/errors.hpp"

using namespace purify;
using namespace testing_support;

namespace {

ExperimentConfig tiny(Preset p) {
  ExperimentConfig c = default_config(p);
  c.d = 40;
  c.k = 4;
  c.H = 400;
  c.n_samples = 100;
  c.reps = 3;
  c.verify_samples = 200;
  c.isotropy_samples = 2000;
  c.isotropy_trials = 5;
  c.fd_pairs = 20;
  c.n_train = 100;
  return c;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  const ExperimentConfig c = default_config(Preset::ContrastiveSweep);
  CHECK(c.d == 1000);
  CHECK(c.k == 10);
  CHECK(c.zeta == 0.005);
  CHECK(c.H == 10000);
  CHECK(c.n_samples == 1000);
  CHECK(c.reps == 30);
  CHECK(c.m_list == std::vector<int>{1, 2, 5, 10});
  CHECK(c.tau == doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));
  CHECK_FALSE(c.epsilon.has_value());
  ExperimentConfig bad = c;
  bad.m_list = {};
  CHECK_THROWS_AS(validate(bad), PreconditionError);
  bad = c;
  bad.k = 2000;
  CHECK_THROWS_AS(validate(bad), PreconditionError);
}

TEST_CASE("config parsing") {
  ExperimentConfig c = default_config(Preset::GammaSweep);
  apply_setting(c, "m_list", "[1, 4]");
  CHECK(c.m_list == std::vector<int>{1, 4});
  apply_setting(c, "epsilon", "calibrate");
  CHECK_FALSE(c.epsilon);
  apply_setting(c, "epsilon", "0.25");
  CHECK(*c.epsilon == 0.25);
  apply_setting(c, "gate_mode", "regated");
  CHECK(c.gate_mode == GateMode::Regated);
  apply_setting(c, "seed", "18446744073709551615");
  CHECK(c.seed == 18446744073709551615ULL);
  CHECK_THROWS_AS(apply_setting(c, "nope", "1"), PreconditionError);
  CHECK_THROWS_AS(apply_setting(c, "d", "12x"), PreconditionError);
  CHECK_THROWS_AS(apply_setting(c, "epsilon", "-1"), PreconditionError);
  CHECK_THROWS_AS(parse_norm("l3"), PreconditionError);

  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / ("purify_cfg_" + std::to_string(::getpid()) + ".txt");
  {
    std::ofstream f(p);
    f << "# comment\n\nd = 60  # trailing\nreps=2\nm_list=[2,3]\nnoise_convention = raw\n";
  }
  ExperimentConfig g = default_config(Preset::GammaSweep);
  const auto keys = load_config_file(p.string(), g);
  CHECK(keys == std::vector<std::string>{"d", "reps", "m_list", "noise_convention"});
  CHECK(g.d == 60);
  CHECK(g.reps == 2);
  CHECK(g.noise_convention == NoiseConvention::Raw);
  {
    std::ofstream f(p);
    f << "d 60\n";
  }
  CHECK_THROWS_AS(load_config_file(p.string(), g), PreconditionError);
  fs::remove(p);

  // Every echoed key round-trips through apply_setting.
  ExperimentConfig e = default_config(Preset::VerifyLemmas);
  ExperimentConfig f = default_config(Preset::ContrastiveSweep);
  for (const auto& line : config_echo(e)) {
    const auto eq = line.find('=');
    if (line.substr(0, eq) == "output_path") continue;
    apply_setting(f, line.substr(0, eq), line.substr(eq + 1));
  }
  CHECK(config_echo(f) == config_echo(e));
}

TEST_CASE("report validation and CSV") {
  ExperimentReport rep;
  rep.config = default_config(Preset::GammaSweep);
  rep.add(1, "gamma1", 0.1, 0.01, 30, 0.0);
  const std::string csv = to_csv(rep);
  CHECK(csv.find("preset,m,metric,mean,std,reps,epsilon,seed\n") != std::string::npos);
  CHECK(csv.find("gamma-sweep,1,gamma1,0.10000000000000001,0.01,30,0,0\n") != std::string::npos);
  CHECK(csv.find("# d=1000\n") != std::string::npos);
  CHECK(rep.value(1, "gamma1") == 0.1);
  CHECK_THROWS_AS(rep.value(2, "gamma1"), FormatError);
  rep.add(2, "gamma1", std::nan(""), 0.0, 30, 0.0);
  CHECK_THROWS_AS(to_csv(rep), FormatError);
  rep.rows.pop_back();
  rep.add(2, "bad,name", 0.0, 0.0, 30, 0.0);
  CHECK_THROWS_AS(validate_report(rep), FormatError);
  rep.rows.pop_back();
  rep.add(2, "gamma1", 0.2, 0.0, 0, 0.0);
  CHECK_THROWS_AS(validate_report(rep), FormatError);
  rep.rows.pop_back();
  const std::string svg = to_svg(rep);
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("gamma1") != std::string::npos);
}

TEST_CASE("bisection") {
  auto f = [](double e) { return 0.5 + e * e; };
  const CalibrationResult r = bisect_epsilon(f, 0.75, 1e-4, 1.0);
  CHECK(r.epsilon == doctest::Approx(0.5).epsilon(1e-4));
  CHECK(std::abs(r.achieved - 0.75) <= 1e-5);
  CHECK(bisect_epsilon(f, 0.4, 1e-4, 1.0).epsilon == 1e-4);
  CHECK_THROWS_AS(bisect_epsilon(f, 2.0, 1e-4, 1.0), CalibrationError);
  try {
    bisect_epsilon(f, 2.0, 1e-4, 1.0);
  } catch (const CalibrationError& e) {
    CHECK(e.loss_at_high() == doctest::Approx(1.5));
  }
  auto bumpy = [](double e) { return e < 0.5 ? e : 0.1; };
  CHECK_THROWS_AS(bisect_epsilon(bumpy, 0.3, 0.1, 1.0), CalibrationError);
}

TEST_CASE("contrastive sweep") {
  ExperimentConfig c = tiny(Preset::ContrastiveSweep);
  c.epsilon = 0.0;
  const ExperimentReport zero = run_contrastive_sweep(c);
  for (int m : c.m_list) {
    CHECK(zero.value(m, "adv_sim") == zero.value(m, "clean_sim"));
    CHECK(zero.value(m, "adv_dis") == zero.value(m, "clean_dis"));
    CHECK(zero.find(m, "clean_dis")->reps == 3);
  }
  c.epsilon = 0.05;
  const ExperimentReport a = run_contrastive_sweep(c), b = run_contrastive_sweep(c);
  CHECK(to_csv(a) == to_csv(b));
  CHECK(a.value(1, "adv_dis") > a.value(1, "clean_dis"));

  SUBCASE("calibration") {
    ExperimentConfig k = tiny(Preset::ContrastiveSweep);
    // Target at the clean level lands on the bracket's lower end.
    k.epsilon = 0.0;
    const ExperimentReport clean = run_contrastive_sweep(k);
    const CalibrationResult lo = calibrate_epsilon(k, clean.value(1, "clean_dis"));
    CHECK(lo.epsilon == k.eps_lo);
    // Self-consistency: re-running at the calibrated epsilon hits the target.
    const double target = clean.value(1, "clean_dis") + 0.05;
    const CalibrationResult cal = calibrate_epsilon(k, target);
    k.epsilon = cal.epsilon;
    const ExperimentReport rerun = run_contrastive_sweep(k);
    CHECK(std::abs(rerun.value(1, "adv_dis") - target) <= rerun.find(1, "adv_dis")->std);
    // Both ends of the bracket below the target.
    k.eps_hi = 2e-4;
    CHECK_THROWS_AS(calibrate_epsilon(k, 10.0), CalibrationError);
  }
  SUBCASE("errors carry the offending m") {
    ExperimentConfig g = tiny(Preset::ContrastiveSweep);
    g.assignment = Assignment::Grouped;
    g.m_list = {1, 2};
    g.epsilon = 0.01;
    try {
      run_contrastive_sweep(g);
      CHECK(false);
    } catch (const SingularityError& e) {
      CHECK(std::string(e.what()).rfind("m=2", 0) == 0);
    }
  }
}

TEST_CASE("gamma sweep") {
  const ExperimentReport r = run_gamma_sweep(tiny(Preset::GammaSweep));
  CHECK(r.value(2, "gamma1") > r.value(1, "gamma1"));
  CHECK(r.value(10, "gamma1") > r.value(5, "gamma1"));
  CHECK(r.find(0, "gamma1_loglog_slope") != nullptr);
}

TEST_CASE("supervised sweep") {
  ExperimentConfig c = tiny(Preset::SupervisedSweep);
  c.m_list = {1, 4};
  c.epsilon = 0.0;
  const ExperimentReport z = run_supervised_sweep(c);
  CHECK(z.value(1, "gap") == 0.0);
  CHECK(z.value(4, "gap") == 0.0);
  c.epsilon = 1e-3;
  const ExperimentReport r = run_supervised_sweep(c);
  CHECK(r.value(4, "gap") >= r.value(1, "gap"));
  CHECK(r.value(1, "gap_ratio") == 1.0);
  CHECK(r.value(4, "gap_ratio") > 1.2);
}

TEST_CASE("downstream sweep") {
  ExperimentConfig c = tiny(Preset::DownstreamSweep);
  c.m_list = {1, 10};
  c.epsilon = 0.0;
  const ExperimentReport z = run_downstream_sweep(c);
  CHECK(z.value(1, "gap") == 0.0);
  CHECK(z.value(10, "gap") == 0.0);
  c.epsilon = 0.05;
  const ExperimentReport r = run_downstream_sweep(c);
  CHECK(r.value(1, "gap") <= 0.5 * r.value(10, "gap"));

  Rng rr = make_stream(c.seed, 0, Stream::Network, 1);
  const GatedNetwork net = build_purified(repetition_model(c, 0), PurifiedSpec{1, c.H, c.assignment}, rr);
  c.fix_mixing = true;
  const ExperimentReport on = run_downstream_on(c, net);
  CHECK(on.find(1, "gap") != nullptr);
}

TEST_CASE("verify battery runs at small scale") {
  ExperimentConfig c = tiny(Preset::VerifyLemmas);
  c.epsilon = 0.01;
  const ExperimentReport r = run_verify(c);
  CHECK(r.value(1, "sandwich_pass_rate") >= 0.99);
  CHECK(r.value(1, "cancellation_prob") == 0.0);
  CHECK(r.value(0, "fd_square_pass") == 1.0);
  bool saw_summary = false;
  for (const auto& n : r.notes) saw_summary |= n.rfind("PASS sandwich", 0) == 0;
  CHECK(saw_summary);
}

// Command-line driver for the experiment presets.
//
//   purify_cli <subcommand> [--config file] [--seed N] [--out file.csv]
//              [--epsilon <float|calibrate>] [--svg file.svg] [--threads N]
//              [--<field> value ...]
//
// Precedence: preset defaults < config file < flags. On failure a single JSON
// line {"error": kind, "message": ...} goes to stderr and the exit code is 1.

#include <chrono>
#include <cstdio>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <json.hpp>

#include "purify/errors.hpp"
#include "purify/experiments.hpp"

namespace {

using namespace purify;

struct Sub {
  CLI::App* app = nullptr;
  Preset preset{};
  std::string config_path, svg_path, net_path;
  std::map<std::string, std::string> flags;  // field name -> raw value
};

void add_field_flags(Sub& s) {
  for (const std::string& line : config_echo(ExperimentConfig{})) {
    const std::string key = line.substr(0, line.find('='));
    if (key == "preset" || key == "output_path") continue;
    std::string names = "--" + key;
    std::string dashed = key;
    for (char& c : dashed) c = c == '_' ? '-' : c;
    if (dashed != key) names += ",--" + dashed;
    s.app->add_option_function<std::string>(names, [&s, key](const std::string& v) { s.flags[key] = v; },
                                            "override " + key);
  }
  s.app->add_option("--out", s.flags["output_path"], "CSV output path (stdout when empty)");
  s.app->add_option("--config", s.config_path, "key = value config file");
  s.app->add_option("--svg", s.svg_path, "also write a static SVG plot");
}

ExperimentConfig resolve(const Sub& s) {
  ExperimentConfig cfg = default_config(s.preset);
  if (!s.config_path.empty()) load_config_file(s.config_path, cfg);
  cfg.preset = s.preset;
  for (const auto& [key, value] : s.flags)
    if (!(key == "output_path" && value.empty())) apply_setting(cfg, key, value);
  validate(cfg);
  return cfg;
}

void emit(const ExperimentReport& rep, const std::string& svg) {
  if (rep.config.output_path.empty())
    std::cout << to_csv(rep);
  else
    write_csv(rep, rep.config.output_path);
  if (!svg.empty()) write_svg(rep, svg);
}

int fail(const std::string& kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Purified sparse-coding experiments"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP threads (0 keeps the runtime default)")->check(CLI::NonNegativeNumber);

  std::vector<Sub> subs(5);
  const std::vector<std::pair<Preset, std::string>> kinds = {
      {Preset::ContrastiveSweep, "clean and adversarial contrastive loss versus m"},
      {Preset::GammaSweep, "feature purification statistics gamma1 and gamma2 versus m"},
      {Preset::SupervisedSweep, "supervised adversarial gap versus m"},
      {Preset::DownstreamSweep, "downstream head fitted on frozen pre-trained layers"},
      {Preset::VerifyLemmas, "property battery with pass/fail notes"},
  };
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    subs[i].preset = kinds[i].first;
    subs[i].app = app.add_subcommand(to_string(kinds[i].first), kinds[i].second);
    add_field_flags(subs[i]);
    subs[i].app->add_option("--threads", threads, "OpenMP threads");
  }
  subs[3].app->add_option("--net", subs[3].net_path, "use one persisted network instead of building per m");

  // build-net: persist a purified construction for later downstream runs.
  Sub build;
  build.preset = Preset::DownstreamSweep;
  build.app = app.add_subcommand("build-net", "construct and save one purified network");
  add_field_flags(build);
  int build_m = 1;
  bool build_pseudo = false;
  build.app->add_option("--m", build_m, "node sparsity m")->check(CLI::PositiveNumber);
  build.app->add_option("--net-out", build.net_path, "output path")->required();
  build.app->add_flag("--pseudo-head", build_pseudo, "attach the pseudo-inverse contrastive head");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what());
  }

  try {
    if (threads > 0) set_threads(threads);
    const auto t0 = std::chrono::steady_clock::now();
    if (build.app->parsed()) {
      const ExperimentConfig cfg = resolve(build);
      const SparseModel model = repetition_model(cfg, 0);
      Rng rng = make_stream(cfg.seed, 0, Stream::Network, static_cast<std::uint64_t>(build_m));
      GatedNetwork net = build_purified(model, PurifiedSpec{build_m, cfg.H, cfg.assignment}, rng);
      if (build_pseudo) net = pseudo_head(net, cfg.tau);
      save_network(net, build.net_path);
    } else {
      for (const Sub& s : subs) {
        if (!s.app->parsed()) continue;
        const ExperimentConfig cfg = resolve(s);
        ExperimentReport rep = s.net_path.empty() ? run_preset(cfg) : run_downstream_on(cfg, load_network(s.net_path));
        rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        emit(rep, s.svg_path);
        for (const auto& n : rep.notes)
          if (n.rfind("FAIL", 0) == 0 || n.rfind("PASS", 0) == 0) std::cerr << n << '\n';
      }
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "wall_seconds=%.3f threads=%d\n", wall, max_threads());
  } catch (const purify::Error& e) {
    return fail(e.kind(), e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}

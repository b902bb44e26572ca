// mtl-lab <suite> --config <path> [--seed N] [--out DIR] [--lr-list ...] [--method NAME] [--optimizer NAME]

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mtl/harness.hpp"
#include "mtl/io.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Multi-task optimisation experiments"};
  std::string suite;
  std::string config_path;
  std::string out_dir;
  std::vector<long> seeds;
  std::vector<double> lrs;
  std::string method;
  std::string optimizer;
  app.add_option("suite", suite, "landscape | invariance | gradsim | synth-mtl | ood")->required();
  app.add_option("--config", config_path, "flat key = value config file")->required();
  app.add_option("--seed", seeds, "seed(s), replacing the config's seeds");
  app.add_option("--out", out_dir, "output directory (default: config key 'out')");
  app.add_option("--lr-list", lrs, "learning rates, replacing the config's lr list");
  app.add_option("--method", method, "single method, replacing the config's methods");
  app.add_option("--optimizer", optimizer, "single optimizer, replacing the config's optimizers");
  CLI11_PARSE(app, argc, argv);

  try {
    mtl::ConfigFile file = mtl::ConfigFile::load(config_path);
    if (file.has("suite") && file.get("suite", "") != suite) {
      throw mtl::ConfigError("config is for suite '" + file.get("suite", "") + "', not '" + suite + "'");
    }
    // Overrides go into the config text so the sidecar hash covers them.
    auto join = [](const auto& items) {
      std::string s;
      for (const auto& v : items) s += (s.empty() ? "" : ", ") + mtl::format_double(static_cast<double>(v));
      return s;
    };
    file.set("suite", suite);
    if (!seeds.empty()) file.set("seeds", join(seeds));
    if (!lrs.empty()) file.set("lr", join(lrs));
    if (!method.empty()) file.set("methods", method);
    if (!optimizer.empty()) file.set("optimizers", optimizer);
    if (!out_dir.empty()) file.set("out", out_dir);

    const mtl::ExperimentConfig cfg = mtl::load_experiment(file);
    const mtl::SuiteFiles files = mtl::run_suite(cfg);
    mtl::write_suite(files, cfg.out_dir);
    for (const auto& [name, content] : files) std::printf("%s/%s\n", cfg.out_dir.c_str(), name.c_str());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mtl-lab: %s\n", e.what());
    return 1;
  }
  return 0;
}

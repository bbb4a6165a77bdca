#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using namespace fgp;
using namespace fgp::cli;

int dispatch(const std::string &cmd, Context &c) {
  if (cmd == "fit") {
    return cmd_fit(c);
  }
  if (cmd == "certify") {
    return cmd_certify(c);
  }
  if (cmd == "backtest") {
    return cmd_backtest(c);
  }
  if (cmd == "stability") {
    return cmd_stability(c);
  }
  if (cmd == "simulate") {
    return cmd_simulate(c);
  }
  return cmd_report(c);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Rank-based functionally generated portfolio optimization"};
  app.require_subcommand(1);
  std::string config_path, out_dir = "run";
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  bool oracle = false;
  app.add_option("--config", config_path, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "output directory");
  auto *seed_opt = app.add_option("--seed", seed, "random seed for simulated data");
  app.add_option("--threads", threads, "worker threads for sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--oracle", oracle, "compare fit against the brute-force oracle");
  app.add_option("--set", overrides, "override a config key: section.key=value");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"fit", "solve the discretized optimization problem"},
      {"certify", "smooth and certify a generator; mesh-refinement experiment"},
      {"backtest", "closed or open market backtests over rules and costs"},
      {"stability", "pairwise Wasserstein tables and stability-bound margins"},
      {"simulate", "write a synthetic rank-based market history"},
      {"report", "summarize the outputs of a run directory"}};
  // flags are accepted after the subcommand too
  app.fallthrough();
  for (const auto &[name, help] : commands) {
    app.add_subcommand(name, help);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string cmd = app.get_subcommands().front()->get_name();

  Context c;
  c.out = out_dir;
  c.threads = threads;
  c.oracle = oracle;
  if (*seed_opt) {
    c.seed = seed;
  }
  std::vector<std::string> args(argv, argv + argc);
  Manifest manifest(cmd, args);
  c.manifest = &manifest;
  int code = 0;
  try {
    std::filesystem::create_directories(c.out);
    c.cfg = Config::load(config_path);
    for (const auto &o : overrides) {
      c.cfg.override_key(o);
    }
    if (!config_path.empty()) {
      manifest.input(config_path);
    }
    manifest.json()["config_path"] = config_path;
    manifest.json()["config"] = c.cfg.dump();
    manifest.json()["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json(nullptr);
    manifest.json()["threads"] = threads;
    code = dispatch(cmd, c);
  } catch (const InputError &e) {
    std::cerr << "error: " << e.what() << '\n';
    code = 1;
  } catch (const NumericalError &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    code = 2;
  } catch (const std::filesystem::filesystem_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    code = 1;
  }
  try {
    if (std::filesystem::is_directory(c.out)) {
      if (cmd == "report" && std::filesystem::exists(c.out / "MANIFEST.json")) {
        // keep the producing run's manifest; record the report inside it
        auto j = read_json((c.out / "MANIFEST.json").string());
        manifest.json()["finished"] = utc_now();
        manifest.json()["exit_code"] = code;
        j["report"] = manifest.json();
        write_json(j, (c.out / "MANIFEST.json").string());
      } else {
        manifest.write(c.out, code);
      }
    }
  } catch (const std::exception &e) {
    std::cerr << "error writing manifest: " << e.what() << '\n';
    return code == 0 ? 1 : code;
  }
  return code;
}

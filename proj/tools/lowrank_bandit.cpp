// lowrank_bandit: run, validate and diagnose multi-task bandit experiments.

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lrb/config.hpp"
#include "lrb/errors.hpp"
#include "lrb/harness.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kFailed = 2;

int report_invalid(const lrb::ValidationError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& v : e.violations()) std::cerr << "  " << v << '\n';
  return kInvalid;
}

std::vector<lrb::PolicyKind> parse_policy_list(const std::string& text) {
  std::vector<lrb::PolicyKind> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(lrb::parse_policy_kind(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task low-rank linear bandit laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "results";
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string policies;

  auto* run = app.add_subcommand("run", "Run an experiment and write result tables");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed", seed, "Override master_seed");
  run->add_option("--jobs", jobs, "Concurrent repetitions")->check(CLI::PositiveNumber);
  run->add_option("--policies", policies, "Comma-separated policy subset");

  auto* check = app.add_subcommand("validate", "Check a config without running it");
  check->add_option("--config", config_path, "Experiment config (JSON)")->required();

  auto* diagnose = app.add_subcommand("diagnose", "Run the diagnostics suite only");
  diagnose->add_option("--config", config_path, "Experiment config (JSON)")->required();
  diagnose->add_option("--jobs", jobs, "Concurrent repetitions")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  lrb::ExperimentConfig config;
  try {
    config = lrb::load_config(config_path);
    if (seed) config.master_seed = *seed;
    if (!policies.empty()) config.policies = parse_policy_list(policies);
    if (auto errs = lrb::validate(config); !errs.empty()) {
      throw lrb::ValidationError(std::move(errs));
    }
  } catch (const lrb::ValidationError& e) {
    return report_invalid(e);
  } catch (const lrb::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  }

  try {
    if (*check) {
      std::cout << lrb::to_json(config) << '\n';
      return kOk;
    }
    const lrb::RunOptions options{jobs};
    if (*diagnose) {
      lrb::RunResult shell;
      shell.config_echo = config;
      shell.diagnostics = lrb::run_diagnostics(config, options);
      std::cout << lrb::diagnostics_json(shell);
      return kOk;
    }
    const lrb::RunResult result = lrb::run_experiment(config, options);
    for (const auto& f : result.failures) {
      std::cerr << "repetition " << f.repetition << " failed: " << f.message << '\n';
    }
    for (const auto& path : lrb::write_results(result, out_dir)) {
      std::cout << path.string() << '\n';
    }
    return result.failures.empty() ? kOk : kFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
}

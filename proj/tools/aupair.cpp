#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "aupair/config.hpp"
#include "aupair/error.hpp"
#include "aupair/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kValidation = 1, kRuntime = 2 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AuPair: golden example pairs for code repair"};
  app.require_subcommand(1);

  std::string config_path = "config.toml";
  std::vector<std::string> overrides;
  bool verbose = false;
  app.add_option("-c,--config", config_path, "TOML run configuration")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "override a config key, e.g. --set budgets.pairgen=500");
  app.add_flag("-v,--verbose", verbose, "debug logging");

  auto* curate = app.add_subcommand("curate", "generate and score initial guesses");
  auto* split = app.add_subcommand("split", "stratified train/val/test split");
  auto* pairgen = app.add_subcommand("pairgen", "phase 1: collect candidate pairs");
  auto* extract = app.add_subcommand("extract", "phase 2: fix-quality matrix and AuPair extraction");
  bool recompute = false;
  extract->add_flag("--recompute", recompute, "ignore a matching matrix on disk");
  auto* eval = app.add_subcommand("eval", "run inference strategies on the test split");
  std::vector<std::string> strategy_names;
  std::optional<int> n;
  eval->add_option("-s,--strategy", strategy_names,
                   "aupair, best_of_n, self_repair or random_pairs (repeatable)");
  eval->add_option("-n,--calls", n, "LLM calls per problem");
  auto* analyze = app.add_subcommand("analyze", "diversity, lineage and category breakdowns");
  auto* dry = app.add_subcommand("dry-run", "print planned calls per phase");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    const auto config = aupair::load_config(config_path, overrides);
    aupair::json out;
    if (*curate) out = aupair::cmd_curate(config);
    else if (*split) out = aupair::cmd_split(config);
    else if (*pairgen) out = aupair::cmd_pairgen(config);
    else if (*extract) out = aupair::cmd_extract(config, !recompute);
    else if (*eval) {
      std::vector<aupair::Strategy> strategies;
      for (const auto& s : strategy_names) strategies.push_back(aupair::strategy_from_string(s));
      out = aupair::cmd_eval(config, strategies, n);
    } else if (*analyze) out = aupair::cmd_analyze(config);
    else if (*dry) out = aupair::dry_run_plan(config);
    std::cout << out.dump(2) << '\n';
    return kOk;
  } catch (const aupair::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

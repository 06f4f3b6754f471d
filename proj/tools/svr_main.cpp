// svr: simulate, fit, evaluate and summarize.
#include <CLI11.hpp>

#include <deque>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "svr/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Stochastic volatility regression for multi-subject functional data"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> common{
      {"seed", "base random seed"},
      {"iters", "sampler iterations"},
      {"burnin", "burn-in iterations"},
      {"thin", "thinning interval"},
      {"jobs", "worker threads"},
      {"baseline", "comma list of ncs, two-stage or none"},
      {"out", "output directory"},
      {"p", "mean-curve SDE order"},
      {"q", "deviation SDE order"},
      {"a", "inverse-gamma shape"},
      {"b", "inverse-gamma scale"},
      {"sigma2_M0", "initial-state variance of mean curves"},
      {"hpd_mass", "HPD interval mass"},
  };
  const std::vector<std::pair<std::string, std::vector<std::pair<std::string, std::string>>>> verbs{
      {"simulate", {{"case", "simulation design (1 or 2)"}, {"replicates", "number of replicates"},
                    {"subjects", "subjects per replicate"}}},
      {"fit", {{"observations", "observations CSV"}, {"covariates", "covariates CSV"},
               {"data", "dataset directory or simulation output"}}},
      {"evaluate", {{"data", "simulation output"}, {"fits", "fit output"}}},
      {"summarize", {{"draws", "draws CSV"}, {"fits", "fit output directory"}}},
  };

  std::string config_path;
  bool overwrite = false;
  struct Given {
    CLI::App* verb;
    std::string key;
    CLI::Option* option;
  };
  std::vector<Given> given;
  std::deque<std::string> storage;  // stable addresses for CLI11 bindings
  for (const auto& [verb, extra] : verbs) {
    CLI::App* sub = app.add_subcommand(verb);
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_flag("--overwrite", overwrite, "replace an existing output directory");
    auto add = [&](const std::string& key, const std::string& help) {
      storage.emplace_back();
      given.push_back({sub, key, sub->add_option("--" + key, storage.back(), help)});
    };
    for (const auto& [k, h] : common) add(k, h);
    for (const auto& [k, h] : extra) add(k, h);
  }

  // Flags are applied after the config file through the same key setter,
  // so a flag always wins.
  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    svr::cli::RunConfig cfg;
    if (!config_path.empty()) svr::cli::load_config_file(cfg, config_path);
    for (std::size_t k = 0; k < given.size(); ++k) {
      if (given[k].verb == sub && given[k].option->count() > 0) svr::cli::set_key(cfg, given[k].key, storage[k]);
    }
    if (overwrite) cfg.overwrite = true;
    svr::cli::run_command(sub->get_name(), cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

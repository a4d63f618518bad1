#include "hds/experiments.hpp"
#include "hds/record.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

namespace ex = hds::experiments;

int main(int argc, char** argv) {
  CLI::App app{"Hybrid dressed-spin simulations"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::uint64_t seed = 0;
  std::size_t traj = 0;
  unsigned threads = hds::propagate::default_threads();
  bool validate_only = false;

  for (const auto& name : ex::kExperiments) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--traj", traj, "trajectory count (overrides the config)")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output path prefix; writes <out>.csv and <out>.json");
    sub->add_option("--threads", threads, "worker threads (default HDS_THREADS or 1)")->check(CLI::PositiveNumber);
    sub->add_flag("--validate", validate_only, "check the configuration and exit");
  }
  CLI11_PARSE(app, argc, argv);
  const CLI::App* sub = app.get_subcommands().front();
  const std::string experiment = sub->get_name();

  try {
    std::ifstream f(config_path);
    if (!f) throw std::runtime_error("cannot read " + config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::invalid_argument(config_path + ": " + e.what());
    }
    if (!j.contains("experiment")) j["experiment"] = experiment;
    ex::ExperimentConfig cfg = ex::ExperimentConfig::from_json(j);
    if (cfg.experiment != experiment)
      throw std::invalid_argument("config is for '" + cfg.experiment + "' but '" + experiment + "' was requested");
    if (sub->count("--seed")) cfg.master_seed = seed;
    if (sub->count("--traj")) cfg.n_traj = traj;
    if (sub->count("--out")) cfg.output_path = out;
    ex::validate(cfg);
    if (validate_only) {
      std::cout << ex::resolved_params(cfg).dump(2) << "\n";
      return 0;
    }
    if (cfg.output_path.empty()) throw std::invalid_argument("no output path: set output_path or pass --out");

    const auto record = ex::run(cfg, threads);
    hds::record::emit(record, cfg.output_path);
    std::cout << record.results.dump(2) << "\n";
    if (!ex::guards_passed(record)) {
      std::cerr << "error: a convergence guard failed; see results.guards in " << cfg.output_path << ".json\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

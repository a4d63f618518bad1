#pragma once

#include "hds/propagate.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hds::experiments {

inline const std::vector<std::string> kExperiments{"coherence", "prep",     "gate",   "ising",
                                                   "range",     "residual", "ion-xxz"};

// One run request. Physical values inside params carry unit tags; see README for the schema.
struct ExperimentConfig {
  std::string experiment;
  nlohmann::json params = nlohmann::json::object();
  std::uint64_t master_seed = 1;
  std::optional<std::size_t> n_traj;  // experiment default when empty
  std::optional<double> dt;           // us; experiment default when empty
  std::string output_path;
  // Trajectories rerun at dt / 2 for the convergence guard; 0 means all of them.
  std::optional<std::size_t> convergence_traj;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  bool operator==(const ExperimentConfig& other) const;
};

// Parses the parameter block without running anything; throws std::invalid_argument
// on unknown keys, untagged values, or out-of-range settings.
void validate(const ExperimentConfig& config);

// Resolved parameter block with every default filled in.
nlohmann::json resolved_params(const ExperimentConfig& config);

// g(t) = a0 t / T, h(t) = a0 - g(t).
struct RampSchedule {
  double a0 = 0.0;
  double T = 0.0;
  double g(double t) const { return a0 * (t / T); }
  double h(double t) const { return a0 - g(t); }
};

// Largest allowed change of any mean trace when dt is halved.
inline constexpr double kStepHalvingTolerance = 1e-4;

propagate::RunRecord run_coherence(const ExperimentConfig& config, unsigned threads);
propagate::RunRecord run_prep(const ExperimentConfig& config, unsigned threads);
propagate::RunRecord run_gate(const ExperimentConfig& config, unsigned threads);
propagate::RunRecord run_ising(const ExperimentConfig& config, unsigned threads);
propagate::RunRecord run_range(const ExperimentConfig& config);
propagate::RunRecord run_residual(const ExperimentConfig& config);
propagate::RunRecord run_ion_xxz(const ExperimentConfig& config, unsigned threads);

propagate::RunRecord run(const ExperimentConfig& config, unsigned threads);

// True when every internal guard recorded under results passed.
bool guards_passed(const propagate::RunRecord& record);

}  // namespace hds::experiments

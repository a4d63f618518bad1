#include "hds/experiments.hpp"
#include "hds/record.hpp"
#include "hds/units.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hds;
using experiments::ExperimentConfig;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("hds_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ExperimentConfig small_prep() {
  return ExperimentConfig::from_json(json::parse(R"({
    "experiment": "prep", "master_seed": 5, "n_traj": 6,
    "dt": {"value": 0.01, "unit": "us"},
    "params": {"tau": {"value": 2, "unit": "us"}, "sample_dt": {"value": 0.5, "unit": "us"}}
  })"));
}

}  // namespace

TEST_CASE("unit tags") {
  CHECK(units::frequency(units::tagged(1, "MHz_angular_over_2pi")) == doctest::Approx(units::two_pi));
  CHECK(units::frequency(units::tagged(20, "kHz_angular_over_2pi")) == doctest::Approx(units::two_pi * 0.02));
  CHECK(units::frequency(units::tagged(3.5, "MHz_plain")) == 3.5);
  CHECK(units::time(units::tagged(2, "ms")) == 2000.0);
  CHECK(units::angle(units::tagged(180, "deg")) == doctest::Approx(units::two_pi / 2));
  CHECK_THROWS(units::frequency(json(3.5)));
  CHECK_THROWS(units::frequency(units::tagged(1, "Hz")));
}

TEST_CASE("ramp schedule") {
  const experiments::RampSchedule r{2.0, 80.0};
  CHECK(r.g(0) == 0.0);
  CHECK(r.h(80.0) == 0.0);
  CHECK(r.g(20) + r.h(20) == 2.0);
}

TEST_CASE("config round trip and schema errors") {
  const auto c = small_prep();
  CHECK(ExperimentConfig::from_json(c.to_json()) == c);
  CHECK_THROWS(ExperimentConfig::from_json(json::parse(R"({"experiment": "nope"})")));
  CHECK_THROWS(ExperimentConfig::from_json(json::parse(R"({"experiment": "prep", "bogus": 1})")));
  CHECK_THROWS(ExperimentConfig::from_json(json::parse(R"({"experiment": "prep", "dt": 0.01})")));
  auto bad = c;
  bad.params["rabi"] = 3.5;
  CHECK_THROWS_AS(experiments::validate(bad), std::invalid_argument);
  bad = c;
  bad.params["typo"] = units::tagged(1, "us");
  CHECK_THROWS_AS(experiments::validate(bad), std::invalid_argument);
  const json r = experiments::resolved_params(c);
  CHECK(r.at("rabi") == units::tagged(3.5, "MHz_angular_over_2pi"));
}

TEST_CASE("emit writes aligned CSV and a sidecar that restores the config") {
  const auto d = scratch("emit");
  const auto c = small_prep();
  const auto rec = experiments::run(c, 1);
  record::emit(rec, (d / "prep").string());
  const std::string csv = slurp(d / "prep.csv");
  CHECK(csv.rfind("t,fidelity_mean,fidelity_sem,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  const json side = json::parse(slurp(d / "prep.json"));
  CHECK(ExperimentConfig::from_json(side.at("config")) == c);
  CHECK(side.at("conventions").at("ou_amplitude_is_stddev") == true);
  CHECK(side.at("seed") == 5);
  CHECK(side.contains("tool_version"));

  record::emit(experiments::run(c, 3), (d / "again").string());
  CHECK(slurp(d / "again.csv") == csv);
  fs::remove_all(d);
}

TEST_CASE("missing output directory fails without leaving files") {
  const auto d = scratch("missing");
  const auto rec = experiments::run_residual(ExperimentConfig::from_json(json::parse(R"({"experiment": "residual"})")));
  CHECK_THROWS(record::emit(rec, (d / "no" / "such" / "out").string()));
  CHECK(fs::is_empty(d));
  fs::remove_all(d);
}

TEST_CASE("noiseless hybrid pair keeps full coherence") {
  auto c = ExperimentConfig::from_json(json::parse(R"({
    "experiment": "coherence", "n_traj": 2,
    "params": {"variants": ["hybrid_ds"], "fluctuations": [{"value": 0, "unit": "1"}],
               "dephasing": {"value": 0, "unit": "rad_per_us"}, "phase_bound": {"value": 0, "unit": "deg"},
               "t_final": {"value": 5, "unit": "us"}}
  })"));
  const auto rec = experiments::run(c, 1);
  for (double f : rec.trace("hybrid_ds_0_f").mean) CHECK(f == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(experiments::guards_passed(rec));
}

TEST_CASE("zero-noise preparation tracks the ideal state") {
  auto c = ExperimentConfig::from_json(json::parse(R"({
    "experiment": "prep", "n_traj": 1,
    "params": {"dephasing": {"value": 0, "unit": "rad_per_us"}, "fluctuation": {"value": 0, "unit": "1"}}
  })"));
  const auto rec = experiments::run(c, 1);
  CHECK(rec.results.at("fidelity_at_tau").at("mean").get<double>() > 0.999);
  CHECK(rec.results.at("concurrence_at_tau").at("mean").get<double>() > 0.999);
}

TEST_CASE("disabled phase noise is a no-op") {
  const char* base = R"({"experiment": "gate", "n_traj": 3, "master_seed": 8,
    "params": {"t_final_noisy": {"value": 2, "unit": "us"}, "t_final_noiseless": {"value": 2, "unit": "us"}}})";
  auto a = ExperimentConfig::from_json(json::parse(base));
  auto b = a;
  b.params["phase_bound"] = units::tagged(0, "deg");
  b.params["phase_dwell"] = units::tagged(3, "us");
  const auto ra = experiments::run(a, 1), rb = experiments::run(b, 1);
  CHECK(ra.trace("noisy_fidelity").mean == rb.trace("noisy_fidelity").mean);
}

TEST_CASE("range and residual tables") {
  const auto r = experiments::run(ExperimentConfig::from_json(json::parse(R"({"experiment": "range"})")), 1);
  CHECK(r.axis == "D");
  CHECK(r.results.at("fits").size() == 3);
  const auto k = experiments::run(ExperimentConfig::from_json(json::parse(R"({"experiment": "residual"})")), 1);
  CHECK(k.trace("residual_over_a").mean[1] == doctest::Approx(0.008));
}

#include "hds/effective.hpp"
#include "hds/experiments.hpp"
#include "hds/noise.hpp"
#include "hds/record.hpp"
#include "hds/units.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

using namespace hds;
using experiments::ExperimentConfig;
using nlohmann::json;

namespace {

constexpr std::uint64_t kSeed = 12345;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string out_dir = "acceptance_out";
unsigned n_threads = 1;

std::string num(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

propagate::RunRecord run_and_save(const json& j, const std::string& name) {
  const auto cfg = ExperimentConfig::from_json(j);
  auto rec = experiments::run(cfg, n_threads);
  std::filesystem::create_directories(out_dir);
  record::emit(rec, out_dir + "/" + name);
  return rec;
}

std::string guard_note(const propagate::RunRecord& r) {
  return experiments::guards_passed(r) ? "step halving ok" : "STEP HALVING FAILED";
}

json bare_config() {
  return {{"experiment", "coherence"},
          {"master_seed", kSeed},
          {"n_traj", 500},
          {"params",
           {{"variants", {"bare"}},
            {"t_final", units::tagged(5, "us")},
            {"sample_dt", units::tagged(0.25, "us")},
            {"noise_dt", units::tagged(0.025, "us")}}}};
}

Verdict noise_statistics() {
  const noise::OUParams p{units::frequency(units::tagged(0.2, "MHz_angular_over_2pi")), 20.0};
  const noise::TimeGrid g{0.5, 41};
  const std::size_t n = 10000;
  const std::size_t lag = 40;  // 20 us
  double s0 = 0, q0 = 0, s1 = 0, q1 = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto x = noise::sample_ou(p, g, noise::derive_seed(kSeed, j));
    const double a = x[0] * x[0], b = x[0] * x[lag];
    s0 += a, q0 += a * a, s1 += b, q1 += b * b;
  }
  const double c0 = s0 / n, c1 = s1 / n;
  const double e0 = std::sqrt((q0 / n - c0 * c0) / n), e1 = std::sqrt((q1 / n - c1 * c1) / n);
  const double d2 = p.amplitude * p.amplitude;
  const double z0 = std::abs(c0 - d2) / e0, z1 = std::abs(c1 - d2 * std::exp(-1.0)) / e1;
  return {z0 < 3 && z1 < 3, "C(0)/delta^2 = " + num(c0 / d2) + " (" + num(z0, 2) + " SE), C(tau_c)/delta^2 = " +
                                num(c1 / d2) + " vs " + num(std::exp(-1.0)) + " (" + num(z1, 2) + " SE)"};
}

Verdict bare_dephasing() {
  const auto r = run_and_save(bare_config(), "criterion_2_bare");
  const double delta = units::frequency(units::tagged(0.2, "MHz_angular_over_2pi")), tau = 20.0;
  const auto& f = r.trace("bare_f");
  double worst = 0.0;
  std::size_t fails = 0;
  for (std::size_t k = 1; k < r.times.size(); ++k) {
    const double t = r.times[k];
    const double law = 0.5 * (1 + std::exp(-delta * delta * (tau * t - tau * tau * (1 - std::exp(-t / tau)))));
    const double z = std::abs(f.mean[k] - law) / f.sem[k];
    worst = std::max(worst, z);
    if (z > 2) ++fails;
  }
  return {fails == 0 && experiments::guards_passed(r),
          "worst pointwise deviation " + num(worst, 3) + " SE over " + std::to_string(r.times.size() - 1) +
              " points, " + std::to_string(fails) + " beyond 2 SE; " + guard_note(r)};
}

Verdict coherence() {
  const json j{{"experiment", "coherence"},
               {"master_seed", kSeed},
               {"n_traj", 200},
               {"params", {{"fluctuations", {units::tagged(0.04, "1")}}}}};
  const auto r = run_and_save(j, "criterion_3_coherence");
  const auto& ct = r.results.at("coherence_time");
  const auto& h = ct.at("hybrid_ds_0.04");
  const auto& s = ct.at("simple_ds_0.04");
  const auto& ratio = r.results.at("ratio_hybrid_over_simple").at("0.04");
  if (ratio.at("value").is_null()) return {false, "simple dressed spin did not decay inside the window"};
  const double q = ratio.at("value").get<double>();
  const bool lb = h.at("lower_bound").get<bool>();
  return {q >= 50 && experiments::guards_passed(r),
          "T_hybrid/T_simple " + std::string(lb ? ">= " : "= ") + num(q) + " (T_simple " +
              num(s.at("value_us").get<double>()) + " us, T_hybrid " + (lb ? "> " : "") +
              num(h.at("value_us").get<double>()) + " us, T_bare " + num(ct.at("bare").at("value_us").get<double>()) +
              " us); " + guard_note(r)};
}

Verdict prep() {
  const auto r = run_and_save({{"experiment", "prep"}, {"master_seed", kSeed}, {"n_traj", 100}}, "criterion_4_prep");
  const double f = r.results.at("fidelity_at_tau").at("mean"), e = r.results.at("fidelity_at_tau").at("sem");
  return {f > 0.99 && experiments::guards_passed(r),
          "fidelity at tau = pi/a: " + num(f, 5) + " +- " + num(e, 2) + " (needs > 0.99), concurrence " +
              num(r.results.at("concurrence_at_tau").at("mean").get<double>(), 5) + "; " + guard_note(r)};
}

Verdict gate() {
  const auto r = run_and_save({{"experiment", "gate"}, {"master_seed", kSeed}, {"n_traj", 100}}, "criterion_5_gate");
  const auto& x = r.results;
  const double dev = x.at("max_population_deviation"), f = x.at("fidelity_at_entangling_time").at("mean"),
               ge = x.at("g_fit_relative_error");
  const bool ok = dev < 0.05 && f > 0.99 && ge < 0.02 && experiments::guards_passed(r);
  return {ok, "(a) full vs effective max deviation " + num(dev, 3) + "; (b) fidelity at pi/(4g) " + num(f, 5) + " +- " +
                  num(x.at("fidelity_at_entangling_time").at("sem").get<double>(), 2) + "; (c) g_fit/g - 1 = " +
                  num(ge, 3) + ", g/a = " + num(x.at("g_over_a").get<double>()) + " here vs 0.78 reference (" +
                  num(x.at("g_over_a_without_half").get<double>()) + " without the 1/2); first concurrence maximum at " +
                  num(x.at("first_concurrence_maximum").at("t_us").get<double>()) + " us vs pi/(4g) = " +
                  num(x.at("entangling_time_us").get<double>()) + " us; " + guard_note(r)};
}

Verdict residual() {
  const double r3 = effective::residual_coupling(3, 3), r4 = effective::residual_coupling(4, 3);
  char b3[16], b4[16];
  std::snprintf(b3, sizeof b3, "%.3f", r3);
  std::snprintf(b4, sizeof b4, "%.3f", r4);
  return {std::string(b3) == "0.008" && std::string(b4) == "0.003" && std::abs(r3 - 0.008) < 1e-15,
          "residual(3,3) = " + num(r3, 6) + " -> " + b3 + ", residual(4,3) = " + num(r4, 6) + " -> " + b4};
}

Verdict range() {
  const auto r = run_and_save({{"experiment", "range"}}, "criterion_7_range");
  bool ok = true;
  std::string d;
  for (const auto& f : r.results.at("fits")) {
    const double a = f.at("alpha"), ae = f.at("alpha_e"), law = f.at("reference_linear_law"), as = f.at("asymptotic_alpha_e");
    ok = ok && std::abs(ae - law) <= 0.3 && std::abs(as - (a + 2)) <= 0.05;
    d += "alpha " + num(a) + ": alpha_e " + num(ae) + " vs " + num(law) + ", asymptotic " + num(as, 5) + "; ";
  }
  const auto& fr = r.results.at("fits").front().at("fit_range");
  return {ok, d + "fit range D in [" + std::to_string(fr[0].get<int>()) + ", " + std::to_string(fr[1].get<int>()) + "]"};
}

Verdict ising() {
  const auto r = run_and_save({{"experiment", "ising"}, {"master_seed", kSeed}, {"n_traj", 100}}, "criterion_8_ising");
  const auto& x = r.results;
  const double err = x.at("ideal_relative_error");
  const bool dom = x.at("hybrid_dominates");
  return {err < 0.05 && dom && experiments::guards_passed(r),
          "noiseless S_xx(T) " + num(x.at("ideal_final_S_xx").get<double>()) + " vs ED " +
              num(x.at("ed_final_S_xx").get<double>()) + " (rel. error " + num(err, 3) + ", needs < 0.05); hybrid " +
              (dom ? "dominates" : "does not dominate") + " simple TLS pointwise (worst margin " +
              num(x.at("worst_dominance_margin").get<double>(), 3) + "); final S_xx simple " +
              num(x.at("final_S_xx").at("simple_tls").get<double>()) + ", hybrid " +
              num(x.at("final_S_xx").at("hybrid_ds").get<double>()) + "; Omega'/a0 = " +
              num(x.at("protection_over_a0").get<double>()) + "; " + guard_note(r)};
}

Verdict ion_xxz() {
  const auto r = run_and_save({{"experiment", "ion-xxz"}}, "criterion_9_ion");
  bool ok = experiments::guards_passed(r);
  std::string d;
  for (const auto& c : r.results.at("cases")) {
    const double dev = c.at("max_deviation");
    ok = ok && dev < 0.05;
    d += "theta " + num(c.at("theta_deg").get<double>(), 3) + " deg: max dev " + num(dev, 3) + "; ";
  }
  double trunc = 0.0;
  for (const auto& [k, v] : r.results.at("guards").items())
    if (v.contains("n_max_check")) trunc = std::max(trunc, v.at("max_change").get<double>());
  return {ok, d + "n_max doubling moves traces by <= " + num(trunc, 3) + "; " + guard_note(r)};
}

Verdict determinism() {
  std::string d;
  bool ok = true;
  for (const json& j : {bare_config(), json{{"experiment", "gate"},
                                            {"master_seed", kSeed},
                                            {"n_traj", 24},
                                            {"params", {{"t_final_noisy", units::tagged(5, "us")},
                                                        {"t_final_noiseless", units::tagged(5, "us")}}}}}) {
    const auto cfg = ExperimentConfig::from_json(j);
    const std::string a = record::csv_text(experiments::run(cfg, 1));
    const std::string b = record::csv_text(experiments::run(cfg, 1));
    const std::string c = record::csv_text(experiments::run(cfg, 4));
    const bool same = a == b && a == c;
    ok = ok && same;
    d += cfg.experiment + (same ? ": identical" : ": DIFFERENT") + " across reruns and 1 vs 4 threads; ";
  }
  return {ok, d};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 10));
  app.add_option("--out-dir", out_dir, "where run records are written");
  app.add_option("--threads", n_threads, "worker threads");
  CLI11_PARSE(app, argc, argv);

  const std::map<int, std::function<Verdict()>> criteria{
      {1, noise_statistics}, {2, bare_dephasing}, {3, coherence}, {4, prep},    {5, gate},
      {6, residual},         {7, range},          {8, ising},     {9, ion_xxz}, {10, determinism}};
  bool all = true;
  for (const auto& [k, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), k) == only.end()) continue;
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    all = all && v.pass;
    std::cout << "criterion " << k << " " << (v.pass ? "PASS" : "FAIL") << ": " << v.detail << std::endl;
  }
  return all ? 0 : 1;
}

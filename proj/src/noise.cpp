#include "hds/noise.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace hds::noise {

std::size_t TimeGrid::cell(double t) const {
  if (n == 0) throw std::out_of_range("empty noise grid");
  const double x = t / dt;
  auto i = static_cast<std::ptrdiff_t>(std::floor(x + 1e-9));
  if (i < 0 || t > t_end() + dt * (1.0 + 1e-9))
    throw std::out_of_range("time " + std::to_string(t) + " is off the noise grid");
  return std::min(static_cast<std::size_t>(i), n - 1);
}

TimeGrid TimeGrid::covering(double dt, double t_final) {
  if (!(dt > 0.0)) throw std::invalid_argument("grid step must be positive");
  const auto steps = static_cast<std::size_t>(std::ceil(t_final / dt - 1e-9));
  return TimeGrid{dt, steps + 1};
}

TimeGrid TimeGrid::from_times(std::span<const double> times) {
  if (times.size() < 2) throw std::invalid_argument("grid needs at least two points");
  if (times[0] != 0.0) throw std::invalid_argument("grid must start at t = 0");
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw std::invalid_argument("grid step must be positive");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (std::abs(times[i] - static_cast<double>(i) * dt) > 1e-9 * std::max(1.0, times[i]))
      throw std::invalid_argument("non-uniform time grid");
  return TimeGrid{dt, times.size()};
}

void OUParams::validate() const {
  if (!(amplitude >= 0.0)) throw std::invalid_argument("OU amplitude must be non-negative");
  if (!(tau_c > 0.0)) throw std::invalid_argument("OU correlation time must be positive");
}

void PhaseJitterParams::validate() const {
  if (!(bound >= 0.0 && bound < std::numbers::pi / 2))
    throw std::invalid_argument("phase bound must lie in [0, pi/2)");
  if (!(dwell > 0.0)) throw std::invalid_argument("phase dwell must be positive");
}

const std::vector<double>& NoiseRealization::drive_amp_for(std::size_t site) const {
  if (site >= dephasing.size()) throw std::out_of_range("site index out of range");
  return drive_amp;
}

const std::vector<double>& NoiseRealization::drive_phase_for(std::size_t site) const {
  if (site >= dephasing.size()) throw std::out_of_range("site index out of range");
  return drive_phase;
}

void NoiseRealization::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "t";
  for (std::size_t s = 0; s < dephasing.size(); ++s) out << ",site" << s << "_dz";
  out << ",d_omega,d_phase\n";
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
  };
  for (std::size_t i = 0; i < grid.n; ++i) {
    put(grid.t(i));
    for (const auto& tr : dephasing) {
      out << ',';
      put(tr[i]);
    }
    out << ',';
    put(drive_amp[i]);
    out << ',';
    put(drive_phase[i]);
    out << '\n';
  }
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream) {
  std::uint64_t z = parent + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<double> sample_ou(const OUParams& params, const TimeGrid& grid, std::uint64_t seed) {
  params.validate();
  if (!(grid.dt > 0.0)) throw std::invalid_argument("grid step must be positive");
  std::vector<double> x(grid.n, 0.0);
  if (params.amplitude == 0.0 || grid.n == 0) return x;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double decay = std::exp(-grid.dt / params.tau_c);
  const double kick = params.amplitude * std::sqrt(-std::expm1(-2.0 * grid.dt / params.tau_c));
  x[0] = params.amplitude * normal(rng);
  for (std::size_t i = 1; i < grid.n; ++i) x[i] = x[i - 1] * decay + kick * normal(rng);
  return x;
}

std::vector<double> sample_phase(const PhaseJitterParams& params, const TimeGrid& grid,
                                 std::uint64_t seed) {
  params.validate();
  std::vector<double> p(grid.n, 0.0);
  if (params.bound == 0.0) return p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(-params.bound, params.bound);
  std::size_t held = static_cast<std::size_t>(-1);
  double value = 0.0;
  for (std::size_t i = 0; i < grid.n; ++i) {
    const auto k = static_cast<std::size_t>(std::floor(grid.t(i) / params.dwell + 1e-9));
    while (held != k) {
      value = uniform(rng);
      held = held == static_cast<std::size_t>(-1) ? 0 : held + 1;
    }
    p[i] = value;
  }
  return p;
}

NoiseRealization build_realization(const NoiseSpec& spec, const TimeGrid& grid, std::uint64_t seed) {
  NoiseRealization r;
  r.grid = grid;
  r.seed = seed;
  r.dephasing.reserve(spec.dephasing.size());
  for (std::size_t s = 0; s < spec.dephasing.size(); ++s)
    r.dephasing.push_back(sample_ou(spec.dephasing[s], grid, derive_seed(seed, kStreamDephasingBase + s)));
  r.drive_amp = sample_ou(spec.drive_amp, grid, derive_seed(seed, kStreamDriveAmp));
  r.drive_phase = sample_phase(spec.drive_phase, grid, derive_seed(seed, kStreamDrivePhase));
  return r;
}

}  // namespace hds::noise

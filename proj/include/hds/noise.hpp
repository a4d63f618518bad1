#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hds::noise {

// Uniform grid t_i = i * dt, i = 0 .. n-1.
struct TimeGrid {
  double dt = 0.0;
  std::size_t n = 0;

  double t(std::size_t i) const { return static_cast<double>(i) * dt; }
  double t_end() const { return n == 0 ? 0.0 : t(n - 1); }
  // Index of the cell holding time t (zero-order hold); tolerant to rounding at cell edges.
  std::size_t cell(double t) const;

  static TimeGrid covering(double dt, double t_final);
  static TimeGrid from_times(std::span<const double> times);
};

struct OUParams {
  double amplitude = 0.0;  // stationary standard deviation, rad/us
  double tau_c = 1.0;      // us
  void validate() const;
};

struct PhaseJitterParams {
  double bound = 0.0;  // rad
  double dwell = 1.0;  // us
  void validate() const;
};

// Noise sources declared by a system: one dephasing process per site plus the drive
// amplitude and phase fluctuations shared by every site fed from the same source.
struct NoiseSpec {
  std::vector<OUParams> dephasing;
  OUParams drive_amp;
  PhaseJitterParams drive_phase;
};

struct NoiseRealization {
  TimeGrid grid;
  std::vector<std::vector<double>> dephasing;
  std::vector<double> drive_amp;
  std::vector<double> drive_phase;
  std::uint64_t seed = 0;

  // Drive traces are common to all sites; the site argument only checks the index.
  const std::vector<double>& drive_amp_for(std::size_t site) const;
  const std::vector<double>& drive_phase_for(std::size_t site) const;

  void write_csv(const std::string& path) const;
};

// splitmix64 finalizer applied to parent + golden-ratio increment * (stream + 1).
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream);

// Stream ids used for a realization's sub-seeds.
inline constexpr std::uint64_t kStreamDriveAmp = 1;
inline constexpr std::uint64_t kStreamDrivePhase = 2;
inline constexpr std::uint64_t kStreamDephasingBase = std::uint64_t{1} << 32;

std::vector<double> sample_ou(const OUParams& params, const TimeGrid& grid, std::uint64_t seed);
std::vector<double> sample_phase(const PhaseJitterParams& params, const TimeGrid& grid,
                                 std::uint64_t seed);

NoiseRealization build_realization(const NoiseSpec& spec, const TimeGrid& grid, std::uint64_t seed);

}  // namespace hds::noise

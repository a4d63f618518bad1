#include "hds/effective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace hds::effective {

void AlternationSchedule::validate() const {
  if (K < 1 || amplitudes.size() != K) throw std::invalid_argument("schedule needs K amplitudes");
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = i + 1; j < K; ++j)
      if (amplitudes[i] == amplitudes[j]) throw std::invalid_argument("schedule amplitudes must be distinct");
}

double AlternationSchedule::min_gap() const {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < K; ++i)
    for (std::size_t j = i + 1; j < K; ++j) gap = std::min(gap, std::abs(amplitudes[i] - amplitudes[j]));
  return gap;
}

CouplingTable coupling_table(const model::SystemSpec& system, const std::vector<double>& pair_angles) {
  const auto& pairing = system.layout.pairing;
  if (pairing.empty()) throw std::invalid_argument("coupling table needs a pairing");
  if (pair_angles.size() != pairing.size()) throw std::invalid_argument("need one angle per pair");
  const std::size_t n = system.layout.n_spins;
  if (static_cast<std::size_t>(system.coupling.rows()) != n) throw std::invalid_argument("missing site coupling matrix");
  std::vector<double> th(n, 0.0);
  std::vector<bool> seen(n, false);
  for (std::size_t k = 0; k < pairing.size(); ++k) {
    const double t = pair_angles[k];
    if (!(t >= 0.0 && t <= std::numbers::pi)) throw std::invalid_argument("pair angle outside [0, pi]");
    th[pairing[k].first] = th[pairing[k].second] = t;
    seen[pairing[k].first] = seen[pairing[k].second] = true;
  }
  for (std::size_t s = 0; s < n; ++s)
    if (!seen[s]) throw std::invalid_argument("site " + std::to_string(s) + " is not paired");
  CouplingTable t{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), pair_angles};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double a = system.coupling(i, j);
      t.jx(i, j) = a * std::sin(th[i]) * std::sin(th[j]) / 2;
      t.jz(i, j) = a * std::cos(th[i]) * std::cos(th[j]);
    }
  return t;
}

HybridModelParams hybrid_params(const CouplingTable& t, const Pairing& pairing) {
  const std::size_t P = pairing.size();
  HybridModelParams p{std::vector<double>(P), Eigen::MatrixXd::Zero(P, P)};
  for (std::size_t k = 0; k < P; ++k) {
    auto [ka, kb] = pairing[k];
    p.h[k] = t.jz(ka, kb);
    for (std::size_t l = 0; l < P; ++l) {
      if (l == k) continue;
      auto [la, lb] = pairing[l];
      p.g(k, l) = (t.jx(ka, lb) + t.jx(la, kb)) - (t.jx(ka, la) + t.jx(kb, lb));
    }
  }
  return p;
}

spinops::OperatorMatrix effective_hamiltonian(const HybridModelParams& params, bool) {
  const std::size_t P = params.h.size();
  if (P == 0 || P > 12) throw std::invalid_argument("logical model limited to 1..12 pairs");
  spinops::PauliSum sum(P);
  std::vector<double> c;
  for (std::size_t k = 0; k < P; ++k) {
    sum.add({{k, spinops::Axis::z}});
    c.push_back(params.h[k]);
  }
  for (std::size_t k = 0; k < P; ++k)
    for (std::size_t l = k + 1; l < P; ++l) {
      sum.add({{k, spinops::Axis::x}, {l, spinops::Axis::x}});
      c.push_back(-params.g(k, l));
    }
  return sum.matrix(c);
}

spinops::TensorLayout chain_layout(std::size_t n_pairs) {
  spinops::TensorLayout l;
  l.n_spins = 2 * n_pairs;
  for (std::size_t m = 0; m < n_pairs; ++m) l.pairing.emplace_back(2 * m, 2 * m + 1);
  return l;
}

Eigen::MatrixXd chain_coupling(std::size_t n_pairs, double a, double alpha) {
  const std::size_t n = 2 * n_pairs;
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) c(i, j) = a * std::pow(std::abs(static_cast<double>(i) - static_cast<double>(j)), -alpha);
  return c;
}

double chain_g(std::size_t D, double a, double alpha) {
  const double d = static_cast<double>(D);
  return a / 2 * (std::pow(2 * d + 1, -alpha) + std::pow(2 * d - 1, -alpha) - 2 * std::pow(2 * d, -alpha));
}

double residual_coupling(std::size_t K, double alpha) {
  if (K < 2) throw std::invalid_argument("K must be at least 2");
  if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  return std::pow(static_cast<double>(2 * K - 1), -alpha);
}

double residual_coupling_scan(const AlternationSchedule& schedule, std::size_t n_pairs, double alpha) {
  schedule.validate();
  const std::size_t n = 2 * n_pairs;
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const std::size_t pi = i / 2, pj = j / 2;
      if (pi == pj) continue;
      if (schedule.amplitude_for_pair(pi) != schedule.amplitude_for_pair(pj)) continue;
      best = std::max(best, std::pow(static_cast<double>(j - i), -alpha));
    }
  return best;
}

RangeFit range_exponent(double alpha, std::size_t n_pairs, std::size_t d_min, std::size_t d_max) {
  if (n_pairs < 12) throw std::invalid_argument("range fit needs at least 12 pairs");
  if (d_min < 1 || d_max > n_pairs / 2 || d_max < d_min + 3)
    throw std::invalid_argument("fit range must lie in [1, N/2] and hold at least 4 points");
  model::SystemSpec sys;
  sys.layout = chain_layout(n_pairs);
  sys.coupling = chain_coupling(n_pairs, 1.0, alpha);
  const auto table = coupling_table(sys, std::vector<double>(n_pairs, std::numbers::pi / 2));
  const auto p = hybrid_params(table, sys.layout.pairing);

  RangeFit fit;
  fit.d_min = d_min;
  fit.d_max = d_max;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t D = d_min; D <= d_max; ++D) {
    const double g = std::abs(p.g(0, static_cast<Eigen::Index>(D)));
    if (g == 0.0) throw std::invalid_argument("vanishing coupling inside the fit range");
    const double x = std::log(static_cast<double>(D)), y = std::log(g);
    fit.distances.push_back(static_cast<double>(D));
    fit.couplings.push_back(p.g(0, static_cast<Eigen::Index>(D)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(fit.distances.size());
  fit.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / m;
  fit.alpha_e = -fit.slope;
  return fit;
}

double TrotterSchedule::sign(std::size_t site, double t) const {
  if (site >= b_site.size()) throw std::out_of_range("site index out of range");
  if (!b_site[site]) return 1.0;
  const auto seg = static_cast<long long>(std::floor(t / (period / 2)));
  return seg % 2 == 0 ? 1.0 : -1.0;
}

std::vector<double> TrotterSchedule::boundaries(double t_final) const {
  std::vector<double> ts;
  for (long long k = 1;; ++k) {
    const double t = static_cast<double>(k) * period / 2;
    if (t >= t_final) break;
    ts.push_back(t);
  }
  return ts;
}

TrotterSchedule trotter_schedule(const Pairing& pairs, std::size_t n_sites, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("Trotter period must be positive");
  TrotterSchedule s{period, std::vector<bool>(n_sites, false)};
  for (auto [a, b] : pairs) {
    if (a >= n_sites || b >= n_sites) throw std::out_of_range("pair index out of range");
    s.b_site[b] = true;
  }
  return s;
}

double sublattice_factor(long k, long l) { return ((k - l) % 2 == 0) ? 1.0 : 0.0; }

}  // namespace hds::effective

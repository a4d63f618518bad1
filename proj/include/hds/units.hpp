#pragma once

#include <json.hpp>

#include <numbers>
#include <string>

namespace hds::units {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Unit-tagged quantities look like {"value": 3.5, "unit": "MHz_angular_over_2pi"}.
// Internally every frequency is an angular frequency in rad/us and every time is in us.
//
// Frequency tags:
//   rad_per_us            value is already an angular frequency
//   MHz_plain             same number, read as rad/us (the "3.5 rad MHz" reading)
//   MHz_angular_over_2pi  value is f in MHz, stored as 2*pi*f
//   kHz_angular_over_2pi  value is f in kHz, stored as 2*pi*f/1000
// Time tags: us, ms, ns.  Angle tags: rad, deg.  Dimensionless tag: "1".

double frequency(const nlohmann::json& tagged);
double time(const nlohmann::json& tagged);
double angle(const nlohmann::json& tagged);
double dimensionless(const nlohmann::json& tagged);

nlohmann::json tagged(double value, const std::string& unit);

bool is_tagged(const nlohmann::json& j);

}  // namespace hds::units

#include "hds/units.hpp"

#include <stdexcept>

namespace hds::units {

namespace {

std::pair<double, std::string> split(const nlohmann::json& j) {
  if (!is_tagged(j)) {
    throw std::invalid_argument("expected a unit-tagged value {\"value\": x, \"unit\": \"...\"}, got " +
                                j.dump());
  }
  return {j.at("value").get<double>(), j.at("unit").get<std::string>()};
}

}  // namespace

bool is_tagged(const nlohmann::json& j) {
  return j.is_object() && j.size() == 2 && j.contains("value") && j.contains("unit") &&
         j.at("value").is_number() && j.at("unit").is_string();
}

double frequency(const nlohmann::json& j) {
  auto [v, u] = split(j);
  if (u == "rad_per_us" || u == "MHz_plain") return v;
  if (u == "MHz_angular_over_2pi") return two_pi * v;
  if (u == "kHz_angular_over_2pi") return two_pi * v * 1e-3;
  throw std::invalid_argument("unknown frequency unit '" + u + "'");
}

double time(const nlohmann::json& j) {
  auto [v, u] = split(j);
  if (u == "us") return v;
  if (u == "ms") return v * 1e3;
  if (u == "ns") return v * 1e-3;
  throw std::invalid_argument("unknown time unit '" + u + "'");
}

double angle(const nlohmann::json& j) {
  auto [v, u] = split(j);
  if (u == "rad") return v;
  if (u == "deg") return v * std::numbers::pi / 180.0;
  throw std::invalid_argument("unknown angle unit '" + u + "'");
}

double dimensionless(const nlohmann::json& j) {
  auto [v, u] = split(j);
  if (u != "1") throw std::invalid_argument("expected dimensionless unit \"1\", got '" + u + "'");
  return v;
}

nlohmann::json tagged(double value, const std::string& unit) {
  return nlohmann::json{{"value", value}, {"unit", unit}};
}

}  // namespace hds::units

#include "hds/record.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace hds::record {

namespace fs = std::filesystem;

namespace {

void put(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  f << text;
  f.close();
  if (!f) throw std::runtime_error("failed writing '" + p.string() + "'");
}

}  // namespace

std::string csv_text(const propagate::RunRecord& r) {
  for (const auto& t : r.traces)
    if (t.mean.size() != r.times.size() || t.sem.size() != r.times.size())
      throw std::invalid_argument("trace '" + t.name + "' is not aligned with the axis");
  std::string out = r.axis;
  for (const auto& t : r.traces) out += "," + t.name + "_mean," + t.name + "_sem";
  out += '\n';
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    put(out, r.times[i]);
    for (const auto& t : r.traces) {
      out += ',';
      put(out, t.mean[i]);
      out += ',';
      put(out, t.sem[i]);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json sidecar(const propagate::RunRecord& r) {
  return {{"config", r.config},
          {"parameters", r.parameters},
          {"seed", r.seed},
          {"n_traj", r.n_traj},
          {"conventions", r.conventions},
          {"results", r.results},
          {"tool_version", kToolVersion},
          {"runtime", {{"wall_time_s", r.wall_time_s}, {"threads", r.threads}}}};
}

void emit(const propagate::RunRecord& r, const std::string& path) {
  const fs::path base(path);
  if (base.filename().empty()) throw std::invalid_argument("output path '" + path + "' names a directory");
  const fs::path dir = base.has_parent_path() ? base.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    throw std::runtime_error("output directory '" + dir.string() + "' does not exist");

  const fs::path csv = path + ".csv", js = path + ".json";
  const fs::path csv_tmp = path + ".csv.partial", js_tmp = path + ".json.partial";
  // Serialize first so a bad record never touches the disk.
  const std::string csv_body = csv_text(r);
  const std::string js_body = sidecar(r).dump(2, ' ', false, nlohmann::json::error_handler_t::replace) + "\n";
  try {
    write_file(csv_tmp, csv_body);
    write_file(js_tmp, js_body);
    fs::rename(csv_tmp, csv);
    fs::rename(js_tmp, js);
  } catch (const std::exception& e) {
    fs::remove(csv_tmp, ec);
    fs::remove(js_tmp, ec);
    throw std::runtime_error("writing '" + path + "': " + e.what());
  }
}

}  // namespace hds::record

#include "wbundle/report.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "wbundle/error.hpp"

namespace wb {

bool AuditReport::passed() const {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

Check& AuditReport::at_most(const std::string& name, double value, double threshold, std::string note) {
  checks.push_back({name, value, threshold, std::isfinite(value) && value <= threshold, std::move(note)});
  return checks.back();
}

Check& AuditReport::expect(const std::string& name, bool ok, std::string note) {
  checks.push_back({name, ok ? 1.0 : 0.0, 1.0, ok, std::move(note)});
  return checks.back();
}

std::vector<std::string> AuditReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks)
    if (!c.pass) out.push_back(title + ": " + c.name);
  return out;
}

namespace {
nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
}  // namespace

nlohmann::json to_json(const AuditReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    nlohmann::json j{{"name", c.name}, {"value", finite_or_null(c.value)}, {"threshold", finite_or_null(c.threshold)},
                     {"pass", c.pass}};
    if (!c.note.empty()) j["note"] = c.note;
    checks.push_back(std::move(j));
  }
  return {{"title", r.title}, {"pass", r.passed()}, {"checks", checks}, {"data", r.data}};
}

void emit_plot_data(const std::vector<std::pair<double, double>>& table, const std::string& path,
                    const nlohmann::json& meta) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::kIo, "cannot write plot data to " + path);
  os << "# " << meta.dump() << '\n' << std::setprecision(17);
  for (const auto& [x, y] : table) os << x << ' ' << y << '\n';
  require(static_cast<bool>(os), ErrorCode::kIo, "write failed for " + path);
}

}  // namespace wb

#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wb {

struct Check {
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string note;
};

/// Pass/fail record shared by the audits. `data` carries the measured tables.
struct AuditReport {
  std::string title;
  std::vector<Check> checks;
  nlohmann::json data = nlohmann::json::object();

  bool passed() const;
  // value <= threshold
  Check& at_most(const std::string& name, double value, double threshold, std::string note = {});
  Check& expect(const std::string& name, bool ok, std::string note = {});
  std::vector<std::string> failures() const;
};

nlohmann::json to_json(const AuditReport& r);

/// Two whitespace-separated columns plus a JSON metadata header line ("# {...}").
void emit_plot_data(const std::vector<std::pair<double, double>>& table, const std::string& path,
                    const nlohmann::json& meta = nlohmann::json::object());

}  // namespace wb

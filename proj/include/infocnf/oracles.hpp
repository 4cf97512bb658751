#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace infocnf {

struct OracleReport {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string bound;  // the comparison that decides pass, in words
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

struct Oracle {
  std::string name;  // "<module>/<check>"; acceptance criteria live under "acceptance/"
  std::string description;
  std::function<OracleReport()> run;
};

const std::vector<Oracle>& oracle_registry();

/// Oracles whose name contains a match of the ECMAScript regex `pattern`; empty selects all.
std::vector<const Oracle*> select_oracles(const std::string& pattern);

/// Runs one oracle, turning exceptions into failures and timing it. Results
/// are memoized per process, so composite oracles can reuse earlier runs.
OracleReport run_oracle(const Oracle& oracle);

nlohmann::json oracle_report_json(const std::vector<OracleReport>& reports);
std::string format_oracle_line(const OracleReport& r);

}  // namespace infocnf

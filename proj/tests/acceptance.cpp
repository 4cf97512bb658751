// One line per acceptance criterion; exit status 1 if any criterion fails.
#include <cstdio>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "infocnf/oracles.hpp"

int main(int argc, char** argv) {
  std::string report_path;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--report") report_path = argv[i + 1];
  }
  std::vector<infocnf::OracleReport> reports;
  int failures = 0;
  for (const infocnf::Oracle* o : infocnf::select_oracles("^acceptance/")) {
    reports.push_back(infocnf::run_oracle(*o));
    const auto& r = reports.back();
    failures += !r.pass;
    fmt::print("{}\n", infocnf::format_oracle_line(r));
    std::fflush(stdout);
  }
  if (!report_path.empty()) {
    // Module oracles already ran under criterion 12; their memoized results go in the report too.
    auto all = reports;
    for (const infocnf::Oracle* o : infocnf::select_oracles("^(?!acceptance/)")) all.push_back(infocnf::run_oracle(*o));
    std::ofstream(report_path) << infocnf::oracle_report_json(all).dump(2) << "\n";
  }
  fmt::print("{} of {} criteria passed\n", reports.size() - failures, reports.size());
  return failures == 0 ? 0 : 1;
}

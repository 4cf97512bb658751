#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "infocnf/errors.hpp"
#include "infocnf/metrics.hpp"

namespace infocnf {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  return fmt::format("{}", v);
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void check(const std::ofstream& out, const std::filesystem::path& path) {
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows) {
  auto out = open_out(path);
  out << "epoch,train_nll,test_nll,test_err,mean_nfe,lr\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << format_double(r.train_nll) << ',' << format_double(r.test_nll) << ','
        << format_double(r.test_err) << ',' << format_double(r.mean_nfe) << ',' << format_double(r.lr) << '\n';
  }
  check(out, path);
}

void write_timing_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows) {
  auto out = open_out(path);
  out << "epoch,wall_seconds,skipped_batches,solves,total_nfe\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << fmt::format("{:.3f}", r.wall_seconds) << ',' << r.skipped_batches << ',' << r.solves
        << ',' << r.total_nfe << '\n';
  }
  check(out, path);
}

void write_gates_csv(const std::filesystem::path& path, const std::vector<GateLogRow>& rows) {
  auto out = open_out(path);
  out << "epoch,iteration,layer,mu,sigma,tolerance,nfe\n";
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.iteration << ',' << r.layer << ',' << format_double(r.mu) << ','
        << format_double(r.sigma) << ',' << format_double(r.tolerance) << ',' << r.nfe << '\n';
  }
  check(out, path);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw IoError(fmt::format("'{}' is empty", path.string()));
  t.header = split_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != t.header.size()) {
      throw IoError(fmt::format("'{}' line {}: expected {} fields, found {}", path.string(), lineno, t.header.size(),
                                cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IoError(fmt::format("no column '{}'", name));
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const std::size_t c = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    const std::string& s = r[c];
    if (s == "nan") {
      out.push_back(std::nan(""));
      continue;
    }
    try {
      std::size_t used = 0;
      out.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      throw IoError(fmt::format("column '{}' holds a non-numeric value '{}'", name, s));
    }
  }
  return out;
}

}  // namespace infocnf

#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace infocnf {

struct EpochMetrics {
  int epoch = 0;
  double train_nll = 0.0;
  double test_nll = 0.0;  // NaN on epochs without evaluation
  double test_err = 0.0;  // classification error; extrapolation MSE for the latent ODE
  double mean_nfe = 0.0;  // mean NFE per training solve over the epoch
  double lr = 0.0;
  double wall_seconds = 0.0;
  std::size_t skipped_batches = 0;
  long solves = 0;
  long total_nfe = 0;
};

/// One gate decision: which tolerance a layer used on one training batch.
struct GateLogRow {
  int epoch = 0;
  long iteration = 0;
  std::size_t layer = 0;
  double mu = 0.0;
  double sigma = 0.0;
  double tolerance = 0.0;
  long nfe = 0;
};

/// Columns: epoch, train_nll, test_nll, test_err, mean_nfe, lr.
void write_metrics_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows);
/// Columns: epoch, wall_seconds, skipped_batches, solves, total_nfe.
void write_timing_csv(const std::filesystem::path& path, const std::vector<EpochMetrics>& rows);
/// Columns: epoch, iteration, layer, mu, sigma, tolerance, nfe.
void write_gates_csv(const std::filesystem::path& path, const std::vector<GateLogRow>& rows);

/// Minimal reader for the comma-separated files written above.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column_index(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

/// Shortest round-trip representation; "nan" for NaN.
std::string format_double(double v);

}  // namespace infocnf

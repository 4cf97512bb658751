#include "infocnf/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include <fmt/format.h>

#include "infocnf/errors.hpp"

namespace infocnf {

namespace {

double gaussian_log_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return -0.5 * u * u - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = x.gather_rows(rows);
  out.num_classes = num_classes;
  if (!labels.empty()) {
    out.labels.reserve(rows.size());
    for (auto r : rows) out.labels.push_back(labels.at(r));
  }
  return out;
}

void MixtureSpec::validate() const {
  if (weights.empty() || weights.size() != means.size() || weights.size() != stddevs.size()) {
    throw UsageError("mixture: weights, means and stddevs must be nonempty and of equal length");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw UsageError("mixture: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw UsageError(fmt::format("mixture: weights sum to {}, not 1", total));
  for (double s : stddevs) {
    if (!(s > 0.0)) throw UsageError("mixture: stddevs must be positive");
  }
}

double MixtureSpec::log_density(double x) const {
  double hi = -INFINITY;
  std::vector<double> terms(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    terms[k] = std::log(weights[k]) + gaussian_log_pdf(x, means[k], stddevs[k]);
    hi = std::max(hi, terms[k]);
  }
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

double MixtureSpec::density(double x) const { return std::exp(log_density(x)); }

Dataset gen_1d_mixture(const MixtureSpec& spec, std::size_t n, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw UsageError("gen_1d_mixture: n must be at least 1");
  Rng rng = Rng(seed).split("mix1d");
  Dataset out;
  out.x = Tensor::zeros(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    std::size_t k = 0;
    double cum = spec.weights[0];
    while (u >= cum && k + 1 < spec.weights.size()) cum += spec.weights[++k];
    out.x[i] = rng.normal(spec.means[k], spec.stddevs[k]);
  }
  return out;
}

void Labeled2dSpec::validate() const {
  if (means.size() < 2) throw UsageError("labeled2d: at least 2 classes are required");
  if (stddevs.size() != means.size()) throw UsageError("labeled2d: one stddev pair per class is required");
  for (const auto& s : stddevs) {
    if (!(s[0] > 0.0) || !(s[1] > 0.0)) throw UsageError("labeled2d: stddevs must be positive");
  }
  if (samples_per_class == 0) throw UsageError("labeled2d: samples_per_class must be positive");
}

double Labeled2dSpec::class_log_density(int label, double x, double y) const {
  if (label < 0 || static_cast<std::size_t>(label) >= means.size()) {
    throw UsageError(fmt::format("labeled2d: label {} out of range", label));
  }
  const auto k = static_cast<std::size_t>(label);
  return gaussian_log_pdf(x, means[k][0], stddevs[k][0]) + gaussian_log_pdf(y, means[k][1], stddevs[k][1]);
}

Dataset gen_2d_labeled(const Labeled2dSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = Rng(seed).split("labeled2d");
  const std::size_t L = spec.num_classes();
  Dataset out;
  out.num_classes = L;
  out.x = Tensor::zeros(L * spec.samples_per_class, 2);
  out.labels.reserve(L * spec.samples_per_class);
  std::size_t row = 0;
  for (std::size_t k = 0; k < L; ++k) {
    for (std::size_t i = 0; i < spec.samples_per_class; ++i, ++row) {
      out.x.at(row, 0) = rng.normal(spec.means[k][0], spec.stddevs[k][0]);
      out.x.at(row, 1) = rng.normal(spec.means[k][1], spec.stddevs[k][1]);
      out.labels.push_back(static_cast<int>(k));
    }
  }
  return out;
}

const char* spiral_direction_name(SpiralDirection d) {
  return d == SpiralDirection::clockwise ? "cw" : "ccw";
}

std::array<double, 2> gen_spiral(const SpiralSystem& sys, double t) {
  if (sys.direction == SpiralDirection::clockwise) {
    if (!(t > 0.0)) throw DomainError(fmt::format("clockwise spiral is singular at t = {}", t));
    const double r = sys.a + sys.b * (50.0 / t);
    return {r * std::cos(t) - 5.0, r * std::sin(t)};
  }
  const double r = sys.a + sys.b * t;
  return {r * std::cos(t) + 5.0, r * std::sin(t)};
}

void SpiralSpec::validate() const {
  if (n_curves == 0 || n_curves % 2 != 0) {
    throw UsageError(fmt::format("spiral corpus needs an even, positive curve count (got {})", n_curves));
  }
  if (window < 2 || window + reserve > n_points) {
    throw UsageError("spiral window plus reserve must fit inside the ground-truth curve");
  }
  if (!(t_lo > 0.0) || !(t_hi > t_lo)) throw UsageError("spiral time range must satisfy 0 < t_lo < t_hi");
  if (!(noise >= 0.0) || !(a_sd >= 0.0) || !(b_sd >= 0.0)) throw UsageError("spiral spreads must be nonnegative");
}

std::vector<double> SpiralCorpus::window_times(const SpiralCurve& c) const {
  return {times.begin() + static_cast<std::ptrdiff_t>(c.window_start),
          times.begin() + static_cast<std::ptrdiff_t>(c.window_start + spec.window)};
}

SpiralCorpus gen_spiral_corpus(const SpiralSpec& spec, std::uint64_t seed) {
  spec.validate();
  SpiralCorpus corpus;
  corpus.spec = spec;
  corpus.times.resize(spec.n_points);
  const double dt = (spec.t_hi - spec.t_lo) / static_cast<double>(spec.n_points - 1);
  for (std::size_t i = 0; i < spec.n_points; ++i) corpus.times[i] = spec.t_lo + dt * static_cast<double>(i);

  Rng root = Rng(seed).split("spirals");
  const std::size_t max_start = spec.n_points - spec.window - spec.reserve;
  corpus.curves.reserve(spec.n_curves);
  for (std::size_t n = 0; n < spec.n_curves; ++n) {
    Rng rng = root.split(static_cast<std::uint64_t>(n));
    SpiralCurve c;
    c.system.a = rng.normal(spec.a_mean, spec.a_sd);
    c.system.b = rng.normal(spec.b_mean, spec.b_sd);
    c.system.direction = n % 2 == 0 ? SpiralDirection::clockwise : SpiralDirection::counter_clockwise;
    c.truth = Tensor::zeros(spec.n_points, 2);
    for (std::size_t i = 0; i < spec.n_points; ++i) {
      const auto p = gen_spiral(c.system, corpus.times[i]);
      c.truth.at(i, 0) = p[0];
      c.truth.at(i, 1) = p[1];
    }
    c.window_start = rng.below(max_start + 1);
    c.window = c.truth.slice_rows(c.window_start, c.window_start + spec.window);
    for (auto& v : c.window.data()) v += rng.normal(0.0, spec.noise);
    corpus.curves.push_back(std::move(c));
  }
  return corpus;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace

void write_points_csv(const std::filesystem::path& path, const Dataset& data) {
  auto out = open_csv(path);
  for (std::size_t j = 0; j < data.dim(); ++j) out << (j ? "," : "") << (data.dim() == 1 ? "x" : fmt::format("x{}", j));
  if (!data.labels.empty()) out << ",label";
  out << "\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.dim(); ++j) out << (j ? "," : "") << fmt::format("{:.17g}", data.x.at(i, j));
    if (!data.labels.empty()) out << "," << data.labels[i];
    out << "\n";
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

void write_spiral_windows_csv(const std::filesystem::path& path, const SpiralCorpus& corpus) {
  auto out = open_csv(path);
  out << "sequence_id,t,x,y,a,b,direction\n";
  for (std::size_t n = 0; n < corpus.curves.size(); ++n) {
    const auto& c = corpus.curves[n];
    const char* dir = spiral_direction_name(c.system.direction);
    for (std::size_t i = 0; i < corpus.spec.window; ++i) {
      out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{}\n", n, corpus.times[c.window_start + i],
                         c.window.at(i, 0), c.window.at(i, 1), c.system.a, c.system.b, dir);
    }
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

void write_spiral_truth_csv(const std::filesystem::path& path, const SpiralCorpus& corpus) {
  auto out = open_csv(path);
  out << "sequence_id,t,x,y\n";
  for (std::size_t n = 0; n < corpus.curves.size(); ++n) {
    const auto& c = corpus.curves[n];
    for (std::size_t i = 0; i < corpus.times.size(); ++i) {
      out << fmt::format("{},{:.17g},{:.17g},{:.17g}\n", n, corpus.times[i], c.truth.at(i, 0), c.truth.at(i, 1));
    }
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace infocnf

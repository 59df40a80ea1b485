#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gprcp/conformal.hpp"
#include "gprcp/data.hpp"
#include "gprcp/gpr.hpp"
#include "json.hpp"

namespace gprcp {

// Gaussian-quantile interval mean +- z sqrt(variance) from a predictive
// distribution that includes the noise variance.
Interval gpr_baseline_interval(const PredictiveGaussian& g, double confidence);

struct MethodResult {
  double confidence = 0.0;
  std::size_t n = 0;
  // +inf as soon as one interval is unbounded.
  double mean_width = 0.0;
  // Statistics over bounded intervals only.
  double finite_mean_width = 0.0;
  double median_width = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double d10 = 0.0;
  double d90 = 0.0;
  std::size_t unbounded_count = 0;
  double miscoverage_pct = 0.0;
  // Raw regions with more than one component, and empty regions.
  std::size_t hole_count = 0;
  std::size_t empty_count = 0;
};

// Truths on an endpoint count as covered.
MethodResult metrics(std::span<const Interval> intervals, std::span<const double> truths,
                     double confidence);
MethodResult metrics(std::span<const PredictionRegion> regions, std::span<const double> truths,
                     double confidence);

// Type-7 (linear interpolation) sample quantile of sorted values.
double sorted_quantile(std::span<const double> sorted, double q);

enum class ExperimentMode { CrossValidation, Synthetic };
enum class HyperMode { Fixed, Optimize };

struct ExperimentConfig {
  std::string dataset_name = "dataset";
  ExperimentMode mode = ExperimentMode::CrossValidation;

  // Cross-validation source.
  std::filesystem::path csv_path;
  std::string label_column = "y";
  std::vector<std::string> drop_columns;

  // Synthetic source.
  SyntheticSpec synthetic;
  int n_datasets = 10;
  HyperMode hyper_mode = HyperMode::Fixed;

  std::vector<KernelFamily> kernels{KernelFamily::SquaredExponential};
  std::vector<Measure> measures{Measure::normalized(1.0), Measure::normalized(2.0),
                                Measure::normalized(kInf)};
  std::vector<double> confidences{0.90, 0.95, 0.99};
  bool include_baseline = true;
  int n_runs = 10;
  int n_folds = 10;
  int restarts = 3;
  std::uint64_t seed = 0;
  bool hull = true;
  // Subtract the training mean from the outputs before fitting.
  bool center_y = false;
  // 0 = hardware concurrency.
  int threads = 0;
  bool keep_widths = false;

  void validate() const;
};

// Parses the JSON experiment description; throws ConfigError.
// Relative csv paths are resolved against base_dir.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

struct ResultRow {
  std::string dataset;
  std::string method;  // "GPR", "GPR-CP", "GPR-CP-FF", "GPR-CP-LOO"
  KernelFamily kernel = KernelFamily::SquaredExponential;
  std::optional<Measure> measure;
  MethodResult result;
  std::vector<double> widths;  // only when keep_widths

  // "1", "2", "inf", or "" for the baseline.
  std::string gamma_label() const;
};

// Hyperparameters fitted on one training set; shared by every method.
struct FoldRecord {
  int run = 0;
  int fold = 0;
  KernelFamily kernel = KernelFamily::SquaredExponential;
  Eigen::VectorXd log_hypers;
  double log_sigma_n = 0.0;
  double nlml = 0.0;
  bool optimized = false;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<FoldRecord> folds;
  std::size_t instances = 0;
};

ExperimentResult run_cv(const ExperimentConfig& config, const Dataset& data);
ExperimentResult run_cv(const ExperimentConfig& config);
ExperimentResult run_synthetic(const ExperimentConfig& config);
ExperimentResult run_experiment(const ExperimentConfig& config);

// Per-run/per-fold seed derivation.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

// Runs body(i) for i in [0, n) on up to `threads` workers; rethrows the
// first exception.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

// ---------------------------------------------------------------------------
// Reporting

// Columns: dataset, method, kernel, gamma, confidence, mean_width,
// median_width, q25, q75, d10, d90, unbounded_count, miscoverage_pct, n.
void write_results_csv(const ExperimentResult& result, std::ostream& out);
nlohmann::json results_json(const ExperimentResult& result, const ExperimentConfig& config);
// Human-readable table: one line per method/gamma, widths then miscoverage.
void write_summary(const ExperimentResult& result, std::ostream& out);

}  // namespace gprcp

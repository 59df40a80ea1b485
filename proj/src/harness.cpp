#include "gprcp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/distributions/normal.hpp>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "gprcp/errors.hpp"
#include "gprcp/log.hpp"

namespace gprcp {

Interval gpr_baseline_interval(const PredictiveGaussian& g, double confidence) {
  if (!g.includes_noise) throw Error("baseline interval needs a predictive variance with noise");
  if (!(confidence > 0.0 && confidence < 1.0)) throw ConfigError("confidence must lie in (0, 1)");
  const boost::math::normal_distribution<double> standard;
  const double z = boost::math::quantile(standard, 0.5 + 0.5 * confidence);
  const double half = z * std::sqrt(std::max(g.variance, 0.0));
  return {g.mean - half, g.mean + half};
}

// ---------------------------------------------------------------------------
// Metrics

double sorted_quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

struct Outcome {
  double width = 0.0;
  bool covered = false;
  bool bounded = true;
  bool holes = false;
  bool empty = false;
};

MethodResult summarize(std::span<const Outcome> outcomes, double confidence,
                       std::vector<double>* widths_out = nullptr) {
  MethodResult r;
  r.confidence = confidence;
  r.n = outcomes.size();
  std::vector<double> finite;
  finite.reserve(outcomes.size());
  std::size_t missed = 0;
  for (const auto& o : outcomes) {
    if (!o.covered) ++missed;
    if (o.holes) ++r.hole_count;
    if (o.empty) ++r.empty_count;
    if (o.bounded) {
      finite.push_back(o.width);
    } else {
      ++r.unbounded_count;
    }
    if (widths_out) widths_out->push_back(o.bounded ? o.width : kInf);
  }
  r.miscoverage_pct = r.n ? 100.0 * static_cast<double>(missed) / static_cast<double>(r.n) : 0.0;
  std::sort(finite.begin(), finite.end());
  r.finite_mean_width =
      finite.empty() ? std::numeric_limits<double>::quiet_NaN()
                     : std::accumulate(finite.begin(), finite.end(), 0.0) / static_cast<double>(finite.size());
  r.mean_width = r.unbounded_count > 0 ? kInf : r.finite_mean_width;
  r.median_width = sorted_quantile(finite, 0.5);
  r.q25 = sorted_quantile(finite, 0.25);
  r.q75 = sorted_quantile(finite, 0.75);
  r.d10 = sorted_quantile(finite, 0.10);
  r.d90 = sorted_quantile(finite, 0.90);
  return r;
}

Outcome outcome_of(const PredictionRegion& region, double truth, bool holes) {
  Outcome o;
  o.empty = region.empty();
  o.bounded = region.bounded();
  o.width = o.empty ? 0.0 : region.total_length();
  o.covered = region.contains(truth);
  o.holes = holes;
  return o;
}

void check_lengths(std::size_t a, std::size_t b) {
  if (a != b) {
    std::ostringstream msg;
    msg << "metrics: " << a << " intervals but " << b << " truths";
    throw LengthMismatch(msg.str());
  }
}

}  // namespace

MethodResult metrics(std::span<const Interval> intervals, std::span<const double> truths,
                     double confidence) {
  check_lengths(intervals.size(), truths.size());
  std::vector<Outcome> outcomes(intervals.size());
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    outcomes[i] = {intervals[i].width(), intervals[i].contains(truths[i]), intervals[i].bounded(),
                   false, false};
  }
  return summarize(outcomes, confidence);
}

MethodResult metrics(std::span<const PredictionRegion> regions, std::span<const double> truths,
                     double confidence) {
  check_lengths(regions.size(), truths.size());
  std::vector<Outcome> outcomes(regions.size());
  for (std::size_t i = 0; i < regions.size(); ++i) {
    outcomes[i] = outcome_of(regions[i], truths[i], regions[i].has_holes());
  }
  return summarize(outcomes, confidence);
}

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (confidences.empty()) throw ConfigError("at least one confidence level is required");
  for (double c : confidences) {
    if (!(c > 0.0 && c < 1.0)) throw ConfigError("confidence levels must lie in (0, 1)");
  }
  if (kernels.empty()) throw ConfigError("at least one kernel is required");
  if (measures.empty() && !include_baseline) throw ConfigError("no methods selected");
  for (const auto& m : measures) {
    if (m.kind == MeasureKind::Normalized && !(m.gamma >= 1.0)) {
      throw ConfigError("gamma must be >= 1 or inf");
    }
  }
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (threads < 0) throw ConfigError("threads must be >= 0");
  if (mode == ExperimentMode::CrossValidation) {
    if (n_folds < 2) throw ConfigError("n_folds must be >= 2");
    if (n_runs < 1) throw ConfigError("n_runs must be >= 1");
  } else {
    synthetic.validate();
    if (n_datasets < 1) throw ConfigError("n_datasets must be >= 1");
    if (synthetic.n_test < 1) throw ConfigError("synthetic experiments need n_test >= 1");
    if (hyper_mode == HyperMode::Fixed) {
      for (auto k : kernels) {
        if (k != synthetic.kernel.family()) {
          throw ConfigError("fixed-hyperparameter mode only supports the generating kernel");
        }
      }
    }
  }
}

namespace {

double parse_gamma(const nlohmann::json& g) {
  if (g.is_number()) return g.get<double>();
  if (g.is_string()) {
    const auto s = g.get<std::string>();
    if (s == "inf" || s == "Inf" || s == "infinity" || s == "Infinity") return kInf;
  }
  throw ConfigError("gamma values must be numbers >= 1 or \"inf\"");
}

template <typename T>
T get_field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> known, const char* where) {
  for (const auto& item : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return item.key() == k; })) {
      throw ConfigError(std::string("unknown key '") + item.key() + "' in " + where);
    }
  }
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"name", "mode", "csv", "label", "drop", "synthetic", "kernels", "measures",
                  "gammas", "confidences", "baseline", "n_runs", "n_folds", "restarts", "seed",
                  "hull", "center_y", "threads", "keep_widths"},
                 "config");
  ExperimentConfig c;
  c.dataset_name = get_field<std::string>(j, "name", c.dataset_name);
  const auto mode = get_field<std::string>(j, "mode", "cv");
  if (mode == "cv") {
    c.mode = ExperimentMode::CrossValidation;
    if (!j.contains("csv")) throw ConfigError("cv mode requires 'csv'");
    c.csv_path = get_field<std::string>(j, "csv", "");
    if (c.csv_path.is_relative() && !base_dir.empty()) c.csv_path = base_dir / c.csv_path;
    c.label_column = get_field<std::string>(j, "label", c.label_column);
    c.drop_columns = get_field<std::vector<std::string>>(j, "drop", {});
  } else if (mode == "synthetic") {
    c.mode = ExperimentMode::Synthetic;
    const auto s = j.value("synthetic", nlohmann::json::object());
    if (!s.is_object()) throw ConfigError("'synthetic' must be an object");
    reject_unknown(s,
                   {"n_train", "n_test", "input_dim", "length_scale", "signal_sd", "sigma_n",
                    "outlier_prob", "outlier_sigma", "n_datasets", "hypers"},
                   "synthetic");
    auto& spec = c.synthetic;
    spec.n_train = get_field<Eigen::Index>(s, "n_train", spec.n_train);
    spec.n_test = get_field<Eigen::Index>(s, "n_test", spec.n_test);
    spec.input_dim = get_field<Eigen::Index>(s, "input_dim", spec.input_dim);
    const double ell = get_field<double>(s, "length_scale", 1.0);
    const double sf = get_field<double>(s, "signal_sd", 1.0);
    if (!(ell > 0.0 && sf > 0.0)) throw ConfigError("length_scale and signal_sd must be positive");
    spec.kernel = Kernel::squared_exponential(ell, sf);
    spec.sigma_n = get_field<double>(s, "sigma_n", spec.sigma_n);
    spec.outlier_prob = get_field<double>(s, "outlier_prob", spec.outlier_prob);
    spec.outlier_sigma = get_field<double>(s, "outlier_sigma", spec.outlier_sigma);
    c.n_datasets = get_field<int>(s, "n_datasets", c.n_datasets);
    const auto hypers = get_field<std::string>(s, "hypers", "fixed");
    if (hypers == "fixed") c.hyper_mode = HyperMode::Fixed;
    else if (hypers == "optimize") c.hyper_mode = HyperMode::Optimize;
    else throw ConfigError("synthetic.hypers must be 'fixed' or 'optimize'");
  } else {
    throw ConfigError("mode must be 'cv' or 'synthetic'");
  }

  if (j.contains("kernels")) {
    c.kernels.clear();
    for (const auto& k : get_field<std::vector<std::string>>(j, "kernels", {})) {
      c.kernels.push_back(parse_kernel_family(k));
    }
  }
  std::vector<double> gammas{1.0, 2.0, kInf};
  if (j.contains("gammas")) {
    if (!j.at("gammas").is_array()) throw ConfigError("'gammas' must be an array");
    gammas.clear();
    for (const auto& g : j.at("gammas")) gammas.push_back(parse_gamma(g));
  }
  const auto measures = get_field<std::vector<std::string>>(j, "measures", {"normalized"});
  c.measures.clear();
  for (const auto& m : measures) {
    if (m == "normalized") {
      for (double g : gammas) c.measures.push_back(Measure::normalized(g));
    } else if (m == "full_fit") {
      c.measures.push_back(Measure::full_fit());
    } else if (m == "loo") {
      c.measures.push_back(Measure::leave_one_out());
    } else {
      throw ConfigError("unknown measure '" + m + "' (normalized, full_fit, loo)");
    }
  }
  c.confidences = get_field<std::vector<double>>(j, "confidences", c.confidences);
  c.include_baseline = get_field<bool>(j, "baseline", c.include_baseline);
  c.n_runs = get_field<int>(j, "n_runs", c.n_runs);
  c.n_folds = get_field<int>(j, "n_folds", c.n_folds);
  c.restarts = get_field<int>(j, "restarts", c.restarts);
  c.seed = get_field<std::uint64_t>(j, "seed", c.seed);
  c.hull = get_field<bool>(j, "hull", c.hull);
  c.center_y = get_field<bool>(j, "center_y", c.center_y);
  c.threads = get_field<int>(j, "threads", c.threads);
  c.keep_widths = get_field<bool>(j, "keep_widths", c.keep_widths);
  c.validate();
  return c;
}

std::string ResultRow::gamma_label() const {
  if (!measure) return "";
  switch (measure->kind) {
    case MeasureKind::FullFit: return "1";
    case MeasureKind::LeaveOneOut: return "inf";
    case MeasureKind::Normalized: return format_double(measure->gamma);
  }
  return "";
}

// ---------------------------------------------------------------------------
// Orchestration

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

namespace {

// Method variants evaluated per kernel: the baseline (optional) followed by
// every conformal measure.
struct Plan {
  const ExperimentConfig& config;
  std::size_t n_variants() const { return (config.include_baseline ? 1 : 0) + config.measures.size(); }
  std::size_t n_conf() const { return config.confidences.size(); }
  std::size_t slot(std::size_t kernel, std::size_t variant, std::size_t conf) const {
    return (kernel * n_variants() + variant) * n_conf() + conf;
  }
  std::size_t n_slots() const { return config.kernels.size() * n_variants() * n_conf(); }
};

// Evaluates every method on the test rows with one fitted model, writing
// outcomes to [offset, offset + test.size()) of every slot.
void evaluate_model(const Plan& plan, std::size_t kernel_idx, const GprModel& model,
                    const InputMatrix& X_test, const Eigen::VectorXd& y_test, double y_offset,
                    std::vector<std::vector<Outcome>>& slots, std::size_t offset) {
  const auto& cfg = plan.config;
  for (Eigen::Index t = 0; t < X_test.rows(); ++t) {
    const auto x = X_test.row(t).transpose();
    const double truth = y_test(t) - y_offset;
    const std::size_t at = offset + static_cast<std::size_t>(t);
    std::size_t variant = 0;
    if (cfg.include_baseline) {
      const PredictiveGaussian g = predict(model, x, true);
      for (std::size_t c = 0; c < plan.n_conf(); ++c) {
        const Interval iv = gpr_baseline_interval(g, cfg.confidences[c]);
        slots[plan.slot(kernel_idx, variant, c)][at] = {iv.width(), iv.contains(truth), iv.bounded(),
                                                        false, false};
      }
      ++variant;
    }
    if (cfg.measures.empty()) continue;
    const SymmetricMatrix ext = extended_inverse(model, x);
    for (const auto& measure : cfg.measures) {
      const AbVectors ab = ab_from_inverse(ext, model.targets(), model.noise().variance(), measure);
      const CriticalPointList cp = sweep(ab);
      for (std::size_t c = 0; c < plan.n_conf(); ++c) {
        const PredictionRegion raw = region(cp, 1.0 - cfg.confidences[c]);
        const bool holes = raw.has_holes();
        const PredictionRegion& out = raw;
        slots[plan.slot(kernel_idx, variant, c)][at] =
            cfg.hull && !raw.empty() ? outcome_of(convex_hull(raw), truth, holes)
                                     : outcome_of(out, truth, holes);
      }
      ++variant;
    }
  }
}

ExperimentResult collect(const Plan& plan, const std::vector<std::vector<Outcome>>& slots) {
  const auto& cfg = plan.config;
  ExperimentResult result;
  for (std::size_t k = 0; k < cfg.kernels.size(); ++k) {
    for (std::size_t v = 0; v < plan.n_variants(); ++v) {
      for (std::size_t c = 0; c < plan.n_conf(); ++c) {
        ResultRow row;
        row.dataset = cfg.dataset_name;
        row.kernel = cfg.kernels[k];
        const bool baseline = cfg.include_baseline && v == 0;
        if (baseline) {
          row.method = "GPR";
        } else {
          row.measure = cfg.measures[v - (cfg.include_baseline ? 1 : 0)];
          row.method = row.measure->kind == MeasureKind::FullFit      ? "GPR-CP-FF"
                       : row.measure->kind == MeasureKind::LeaveOneOut ? "GPR-CP-LOO"
                                                                       : "GPR-CP";
        }
        const auto& outcomes = slots[plan.slot(k, v, c)];
        row.result = summarize(outcomes, cfg.confidences[c], cfg.keep_widths ? &row.widths : nullptr);
        result.instances = outcomes.size();
        result.rows.push_back(std::move(row));
      }
    }
  }
  return result;
}

std::string context(const char* what, int a, int b, KernelFamily k) {
  std::ostringstream msg;
  msg << what << " " << a << ", " << (what[0] == 'r' ? "fold " : "") << b << ", kernel "
      << to_string(k);
  return msg.str();
}

}  // namespace

ExperimentResult run_cv(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  const Eigen::Index n = data.size();
  if (n < config.n_folds) throw ConfigError("dataset has fewer rows than folds");
  const Plan plan{config};
  const auto n_total = static_cast<std::size_t>(n) * static_cast<std::size_t>(config.n_runs);
  std::vector<std::vector<Outcome>> slots(plan.n_slots(), std::vector<Outcome>(n_total));

  // Fold boundaries: the first n % k folds get one extra row.
  std::vector<Eigen::Index> bounds{0};
  for (int f = 0; f < config.n_folds; ++f) {
    bounds.push_back(bounds.back() + n / config.n_folds + (f < n % config.n_folds ? 1 : 0));
  }
  std::vector<std::vector<Eigen::Index>> perms(static_cast<std::size_t>(config.n_runs));
  for (int r = 0; r < config.n_runs; ++r) {
    auto& perm = perms[static_cast<std::size_t>(r)];
    perm.resize(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(derive_seed(config.seed, 1, static_cast<std::uint64_t>(r)));
    std::shuffle(perm.begin(), perm.end(), rng);
  }

  const std::size_t n_tasks = static_cast<std::size_t>(config.n_runs * config.n_folds);
  std::vector<FoldRecord> records(n_tasks * config.kernels.size());
  parallel_for(n_tasks, config.threads, [&](std::size_t task) {
    const int r = static_cast<int>(task) / config.n_folds;
    const int f = static_cast<int>(task) % config.n_folds;
    const auto& perm = perms[static_cast<std::size_t>(r)];
    std::vector<Eigen::Index> train_rows;
    std::vector<Eigen::Index> test_rows(perm.begin() + bounds[f], perm.begin() + bounds[f + 1]);
    train_rows.insert(train_rows.end(), perm.begin(), perm.begin() + bounds[f]);
    train_rows.insert(train_rows.end(), perm.begin() + bounds[f + 1], perm.end());
    const NormalizedData norm = normalize(data.subset(train_rows), {data.subset(test_rows)});
    const Dataset& test = norm.others.front();
    const double y_offset = config.center_y ? norm.train.y.mean() : 0.0;
    const Eigen::VectorXd y_train = norm.train.y.array() - y_offset;

    for (std::size_t k = 0; k < config.kernels.size(); ++k) {
      const KernelFamily family = config.kernels[k];
      try {
        OptimizeOptions opts;
        opts.restarts = config.restarts;
        const OptimizeResult opt =
            optimize(family, norm.train.X, y_train,
                     derive_seed(config.seed, 2, task, k), opts);
        records[task * config.kernels.size() + k] = {r, f, family, opt.kernel.log_hypers(),
                                                     opt.noise.log_sigma_n, opt.nlml, true};
        const GprModel model = fit(opt.kernel, opt.noise, norm.train.X, y_train);
        // Outcome index: run * n + original row, so every instance is held
        // out exactly once per run.
        std::vector<std::vector<Outcome>> local(plan.n_slots(), std::vector<Outcome>(test_rows.size()));
        evaluate_model(plan, k, model, test.X, test.y, y_offset, local, 0);
        for (std::size_t s = 0; s < local.size(); ++s) {
          for (std::size_t t = 0; t < test_rows.size(); ++t) {
            const auto at = static_cast<std::size_t>(r) * static_cast<std::size_t>(n) +
                            static_cast<std::size_t>(test_rows[t]);
            if (!local[s].empty() && s / (plan.n_variants() * plan.n_conf()) == k) slots[s][at] = local[s][t];
          }
        }
      } catch (const std::exception& e) {
        throw Error(context("run", r, f, family) + ": " + e.what());
      }
    }
    std::ostringstream msg;
    msg << config.dataset_name << ": run " << r << " fold " << f << " done";
    log::info(msg.str());
  });

  ExperimentResult result = collect(plan, slots);
  result.folds = std::move(records);
  return result;
}

ExperimentResult run_cv(const ExperimentConfig& config) {
  const Dataset data = load_csv(config.csv_path, config.label_column, config.drop_columns);
  return run_cv(config, data);
}

ExperimentResult run_synthetic(const ExperimentConfig& config) {
  config.validate();
  const Plan plan{config};
  const auto n_test = static_cast<std::size_t>(config.synthetic.n_test);
  const auto n_sets = static_cast<std::size_t>(config.n_datasets);
  std::vector<std::vector<Outcome>> slots(plan.n_slots(), std::vector<Outcome>(n_sets * n_test));
  std::vector<FoldRecord> records(n_sets * config.kernels.size());

  parallel_for(n_sets, config.threads, [&](std::size_t d) {
    SyntheticSpec spec = config.synthetic;
    spec.seed = derive_seed(config.seed, 3, d);
    const SyntheticData data = generate(spec);
    const double y_offset = config.center_y ? data.train.y.mean() : 0.0;
    const Eigen::VectorXd y_train = data.train.y.array() - y_offset;
    for (std::size_t k = 0; k < config.kernels.size(); ++k) {
      const KernelFamily family = config.kernels[k];
      try {
        Kernel kernel = spec.kernel;
        NoiseModel noise = NoiseModel::from_sigma(spec.sigma_n);
        double objective = 0.0;
        const bool optimized = config.hyper_mode == HyperMode::Optimize;
        if (optimized) {
          OptimizeOptions opts;
          opts.restarts = config.restarts;
          const OptimizeResult opt = optimize(family, data.train.X, y_train, derive_seed(config.seed, 4, d, k), opts);
          kernel = opt.kernel;
          noise = opt.noise;
          objective = opt.nlml;
        } else {
          objective = nlml(kernel, noise, data.train.X, y_train);
        }
        records[d * config.kernels.size() + k] = {static_cast<int>(d), 0, family, kernel.log_hypers(),
                                                  noise.log_sigma_n, objective, optimized};
        const GprModel model = fit(kernel, noise, data.train.X, y_train);
        std::vector<std::vector<Outcome>> local(plan.n_slots(), std::vector<Outcome>(n_test));
        evaluate_model(plan, k, model, data.test.X, data.test.y, y_offset, local, 0);
        for (std::size_t s = 0; s < local.size(); ++s) {
          if (s / (plan.n_variants() * plan.n_conf()) != k) continue;
          std::copy(local[s].begin(), local[s].end(), slots[s].begin() + static_cast<std::ptrdiff_t>(d * n_test));
        }
      } catch (const std::exception& e) {
        throw Error(context("dataset", static_cast<int>(d), 0, family) + ": " + e.what());
      }
    }
    std::ostringstream msg;
    msg << config.dataset_name << ": synthetic dataset " << d << " done";
    log::info(msg.str());
  });

  ExperimentResult result = collect(plan, slots);
  result.folds = std::move(records);
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  return config.mode == ExperimentMode::Synthetic ? run_synthetic(config) : run_cv(config);
}

}  // namespace gprcp

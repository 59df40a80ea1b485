#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "gprcp/conformal.hpp"
#include "gprcp/data.hpp"
#include "gprcp/errors.hpp"
#include "gprcp/gpr.hpp"
#include "gprcp/harness.hpp"
#include "gprcp/log.hpp"

namespace gprcp::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPredictHelp = R"(Output CSV (predict): comment lines "# key=value" describing the fit,
then columns index,lower,upper[,pieces][,y,covered]. Unbounded ends are
written as -inf / inf. `pieces` (with --raw) lists the closed pieces of
the region as [lo;hi] separated by spaces, isolated points as {t}.)";

constexpr const char* kEvalHelp = R"(Writes results.csv (dataset,method,kernel,gamma,confidence,mean_width,
median_width,q25,q75,d10,d90,unbounded_count,miscoverage_pct,n), results.json
(same rows plus finite-only means, hole counts and fitted hyperparameters)
and summary.txt.)";

// Writes next to the target and renames, so a failed run leaves no partial
// file behind.
void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw Error("cannot write '" + tmp.string() + "'");
    f << content;
    f.close();
    if (!f) {
      fs::remove(tmp);
      throw Error("failed writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, path);
}

struct SeedChoice {
  std::uint64_t value = 0;
  std::string source;
};

SeedChoice resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return {*flag, "flag"};
  if (const char* env = std::getenv("GPRCP_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const auto v = std::stoull(env, &used);
      if (used != std::string_view(env).size()) throw std::invalid_argument(env);
      return {v, "GPRCP_SEED"};
    } catch (const std::exception&) {
      throw ConfigError(std::string("GPRCP_SEED is not an unsigned integer: ") + env);
    }
  }
  return {0, "default"};
}

double parse_gamma(const std::string& s) {
  if (s == "inf" || s == "Inf" || s == "infinity") return kInf;
  try {
    std::size_t used = 0;
    const double g = std::stod(s, &used);
    if (used == s.size()) return g;
  } catch (const std::exception&) {
  }
  throw ConfigError("--gamma must be a number >= 1 or 'inf'");
}

Measure parse_measure(const std::string& kind, const std::string& gamma) {
  if (kind == "normalized") return Measure::normalized(parse_gamma(gamma));
  if (kind == "full_fit") return Measure::full_fit();
  if (kind == "loo") return Measure::leave_one_out();
  throw ConfigError("--measure must be normalized, full_fit or loo");
}

std::string join(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v(i));
  }
  return s;
}

std::string describe_pieces(const PredictionRegion& r) {
  std::string s;
  for (const auto& p : r.pieces) {
    if (!s.empty()) s += ' ';
    s += '[' + format_double(p.lo) + ';' + format_double(p.hi) + ']';
  }
  for (double t : r.isolated_points) {
    if (!s.empty()) s += ' ';
    s += '{' + format_double(t) + '}';
  }
  return s;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  fs::path out_dir;
  SyntheticSpec spec;
  double length_scale = 1.0;
  double signal_sd = 1.0;
  std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  SyntheticSpec spec = a.spec;
  if (!(a.length_scale > 0.0 && a.signal_sd > 0.0)) {
    throw ConfigError("--length-scale and --signal-sd must be positive");
  }
  spec.kernel = Kernel::squared_exponential(a.length_scale, a.signal_sd);
  const SeedChoice seed = resolve_seed(a.seed);
  spec.seed = seed.value;
  spec.validate();

  const SyntheticData data = generate(spec);
  std::ostringstream train;
  std::ostringstream test;
  write_csv(data.train, train);
  write_csv(data.test, test);
  nlohmann::json prov = {{"generator", "gp-prior"},
                         {"spec", spec.to_json()},
                         {"seed", seed.value},
                         {"seed_source", seed.source},
                         {"outlier_count", data.outlier_count}};

  fs::create_directories(a.out_dir);
  write_atomic(a.out_dir / "train.csv", train.str());
  write_atomic(a.out_dir / "test.csv", test.str());
  write_atomic(a.out_dir / "provenance.json", prov.dump(2) + "\n");
  out << "wrote " << data.train.size() << " training and " << data.test.size() << " test rows to "
      << a.out_dir.string() << " (seed " << seed.value << ", " << data.outlier_count
      << " outliers)\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  fs::path config;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  std::ifstream f(a.config);
  if (!f) throw ConfigError("cannot open config '" + a.config.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + a.config.string() + "' is not valid JSON: " + e.what());
  }
  ExperimentConfig config = config_from_json(j, a.config.parent_path());
  std::string seed_source = "config";
  if (a.seed || !j.contains("seed")) {
    const SeedChoice s = resolve_seed(a.seed);
    config.seed = s.value;
    seed_source = s.source;
  }
  if (a.threads) config.threads = *a.threads;
  config.validate();
  if (config.mode == ExperimentMode::CrossValidation && !fs::exists(config.csv_path)) {
    throw ConfigError("dataset '" + config.csv_path.string() + "' does not exist");
  }

  const ExperimentResult result = run_experiment(config);

  std::ostringstream csv;
  write_results_csv(result, csv);
  nlohmann::json js = results_json(result, config);
  js["config"]["seed_source"] = seed_source;
  std::ostringstream summary;
  write_summary(result, summary);

  fs::create_directories(a.out_dir);
  write_atomic(a.out_dir / "results.csv", csv.str());
  write_atomic(a.out_dir / "results.json", js.dump(2) + "\n");
  write_atomic(a.out_dir / "summary.txt", summary.str());
  out << summary.str();
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct PredictArgs {
  fs::path train;
  fs::path test;
  std::optional<fs::path> out;
  std::string label = "y";
  std::vector<std::string> drop;
  std::string kernel = "se";
  std::string measure = "normalized";
  std::string gamma = "2";
  double delta = 0.05;
  bool raw = false;
  bool center_y = false;
  std::vector<double> hypers;
  int restarts = 3;
  std::optional<std::uint64_t> seed;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const KernelFamily family = parse_kernel_family(a.kernel);
  const Measure measure = parse_measure(a.measure, a.gamma);
  if (!(a.delta > 0.0 && a.delta < 1.0)) throw ConfigError("--delta must lie in (0, 1)");
  if (!a.hypers.empty() && static_cast<Eigen::Index>(a.hypers.size()) != hyper_count(family) + 1) {
    std::ostringstream msg;
    msg << "--hypers needs " << hyper_count(family) + 1 << " log values for kernel " << a.kernel
        << " (kernel hypers then log sigma_n)";
    throw ConfigError(msg.str());
  }
  if (a.restarts < 1) throw ConfigError("--restarts must be >= 1");
  const SeedChoice seed = resolve_seed(a.seed);

  const Dataset train = load_csv(a.train, a.label, a.drop);
  Dataset test;
  try {
    test = load_csv(a.test, a.label, a.drop);
  } catch (const UnknownColumn&) {
    test = load_csv(a.test, "", a.drop);
  }
  const bool labeled = test.provenance.value("labeled", true);
  if (test.feature_names != train.feature_names) {
    throw Error("test features do not match training features");
  }
  const Eigen::Index l = train.size();
  if (a.delta < 1.0 / static_cast<double>(l + 1)) {
    std::ostringstream msg;
    msg << "delta " << a.delta << " is below 1/(l+1) = " << 1.0 / static_cast<double>(l + 1)
        << "; every region is the whole real line";
    log::warn(msg.str());
  }

  const NormalizedData norm = normalize(train, {test});
  const double y_offset = a.center_y ? norm.train.y.mean() : 0.0;
  const Eigen::VectorXd y_train = norm.train.y.array() - y_offset;

  Kernel kernel(family, Eigen::VectorXd::Zero(hyper_count(family)));
  NoiseModel noise;
  std::string hyper_source;
  if (!a.hypers.empty()) {
    Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(a.hypers.data(), static_cast<Eigen::Index>(a.hypers.size()));
    kernel = Kernel(family, h.head(hyper_count(family)));
    noise.log_sigma_n = h(h.size() - 1);
    hyper_source = "fixed";
  } else {
    OptimizeOptions opts;
    opts.restarts = a.restarts;
    const OptimizeResult opt = optimize(family, norm.train.X, y_train, seed.value, opts);
    kernel = opt.kernel;
    noise = opt.noise;
    hyper_source = "optimized";
  }
  const GprModel model = fit(kernel, noise, norm.train.X, y_train);
  const double objective = nlml(kernel, noise, norm.train.X, y_train);

  const Dataset& t = norm.others.front();
  std::vector<PredictionRegion> regions;
  std::vector<PredictionRegion> raw_regions;
  for (Eigen::Index i = 0; i < t.size(); ++i) {
    const AbVectors ab = build_ab(model, t.X.row(i).transpose(), measure);
    PredictionRegion r = region(ab, a.delta);
    for (auto& p : r.pieces) {
      p.lo += y_offset;
      p.hi += y_offset;
    }
    for (auto& p : r.isolated_points) p += y_offset;
    regions.push_back(r.empty() ? r : convex_hull(r));
    raw_regions.push_back(std::move(r));
  }

  std::ostringstream csv;
  csv << "# kernel=" << to_string(family) << '\n'
      << "# log_hypers=" << join(kernel.log_hypers()) << '\n'
      << "# log_sigma_n=" << format_double(noise.log_sigma_n) << '\n'
      << "# hypers_source=" << hyper_source << '\n'
      << "# nlml=" << format_double(objective) << '\n'
      << "# measure=" << measure.describe() << '\n'
      << "# delta=" << format_double(a.delta) << '\n'
      << "# region=" << (a.raw ? "raw" : "hull") << '\n'
      << "# seed=" << seed.value << " (" << seed.source << ")\n"
      << "# n_train=" << l << '\n';
  const auto& reported = a.raw ? raw_regions : regions;
  if (labeled) {
    const MethodResult m = metrics(std::span<const PredictionRegion>(reported),
                                   std::span<const double>(test.y.data(), static_cast<std::size_t>(test.size())),
                                   1.0 - a.delta);
    csv << "# miscoverage_pct=" << format_double(m.miscoverage_pct) << '\n'
        << "# mean_width=" << format_double(m.mean_width) << '\n'
        << "# median_width=" << format_double(m.median_width) << '\n'
        << "# unbounded_count=" << m.unbounded_count << '\n';
    if (a.out) out << "miscoverage " << m.miscoverage_pct << "% at confidence " << 1.0 - a.delta << ", mean width "
        << format_double(m.mean_width) << " over " << m.n << " test points\n";
  }
  csv << "index,lower,upper";
  if (a.raw) csv << ",pieces";
  if (labeled) csv << ",y,covered";
  csv << '\n';
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const PredictionRegion& hull = regions[i];
    const double lo = hull.empty() ? std::numeric_limits<double>::quiet_NaN() : hull.pieces.front().lo;
    const double hi = hull.empty() ? std::numeric_limits<double>::quiet_NaN() : hull.pieces.front().hi;
    csv << i << ',' << format_double(lo) << ',' << format_double(hi);
    if (a.raw) csv << ',' << describe_pieces(raw_regions[i]);
    if (labeled) {
      const double y = test.y(static_cast<Eigen::Index>(i));
      csv << ',' << format_double(y) << ',' << (reported[i].contains(y) ? 1 : 0);
    }
    csv << '\n';
  }

  if (a.out) {
    if (a.out->has_parent_path()) fs::create_directories(a.out->parent_path());
    write_atomic(*a.out, csv.str());
  } else {
    out << csv.str();
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformal prediction intervals with Gaussian process regression"};
  app.name(args.empty() ? "gprcp" : fs::path(args.front()).filename().string());
  app.require_subcommand(1);
  int verbosity = 0;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbosity, "More log output (repeatable)");
  app.add_flag("-q,--quiet", quiet, "Only errors");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Sample train/test data from a GP prior");
  s->add_option("--out", synth.out_dir, "Output directory")->required();
  s->add_option("--n-train", synth.spec.n_train, "Training rows")->capture_default_str();
  s->add_option("--n-test", synth.spec.n_test, "Test rows")->capture_default_str();
  s->add_option("--input-dim", synth.spec.input_dim, "Input dimension")->capture_default_str();
  s->add_option("--length-scale", synth.length_scale, "SE length scale")->capture_default_str();
  s->add_option("--signal-sd", synth.signal_sd, "SE signal standard deviation")->capture_default_str();
  s->add_option("--sigma-n", synth.spec.sigma_n, "Noise standard deviation")->capture_default_str();
  s->add_option("--outlier-prob", synth.spec.outlier_prob, "Probability of an outlier")->capture_default_str();
  s->add_option("--outlier-sigma", synth.spec.outlier_sigma, "Outlier noise sd")->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed (default: $GPRCP_SEED or 0)");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Run an experiment described by a JSON config");
  e->footer(kEvalHelp);
  e->add_option("config", eval.config, "Config file")->required();
  e->add_option("--out", eval.out_dir, "Output directory")->required();
  e->add_option("--seed", eval.seed, "Overrides the config seed");
  e->add_option("--threads", eval.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Conformal intervals for test inputs");
  p->footer(kPredictHelp);
  p->add_option("--train", pred.train, "Training CSV")->required();
  p->add_option("--test", pred.test, "Test CSV (label column optional)")->required();
  p->add_option("--out", pred.out, "Output CSV (default: stdout)");
  p->add_option("--label", pred.label, "Label column")->capture_default_str();
  p->add_option("--drop", pred.drop, "Columns to ignore");
  p->add_option("--kernel", pred.kernel, "se, rq, matern32, matern52 or nn")->capture_default_str();
  p->add_option("--measure", pred.measure, "normalized, full_fit or loo")->capture_default_str();
  p->add_option("--gamma", pred.gamma, "Root of the normalized measure (>= 1 or inf)")->capture_default_str();
  p->add_option("--delta", pred.delta, "Significance level")->capture_default_str();
  p->add_flag("--raw", pred.raw, "Report the raw union instead of its convex hull");
  p->add_flag("--center-y", pred.center_y, "Subtract the training label mean before fitting");
  p->add_option("--hypers", pred.hypers, "Fixed log-hyperparameters: kernel hypers then log sigma_n")
      ->delimiter(',');
  p->add_option("--restarts", pred.restarts, "Optimizer restarts")->capture_default_str();
  p->add_option("--seed", pred.seed, "Random seed (default: $GPRCP_SEED or 0)");

  // CLI11 consumes arguments from the back and without the program name.
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  log::set_level(quiet ? log::Level::Quiet
                       : verbosity >= 2 ? log::Level::Debug
                       : verbosity == 1 ? log::Level::Info
                                        : log::Level::Warn);
  try {
    if (*s) return cmd_synth(synth, out);
    if (*e) return cmd_eval(eval, out);
    return cmd_predict(pred, out);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace gprcp::cli

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "gprcp/harness.hpp"

namespace gprcp {

namespace {

// JSON has no infinity or NaN; encode them as strings.
nlohmann::json number(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string cell(double v) { return std::isnan(v) ? "nan" : format_double(v); }

}  // namespace

void write_results_csv(const ExperimentResult& result, std::ostream& out) {
  out << "dataset,method,kernel,gamma,confidence,mean_width,median_width,q25,q75,d10,d90,"
         "unbounded_count,miscoverage_pct,n\n";
  for (const auto& row : result.rows) {
    const auto& r = row.result;
    out << row.dataset << ',' << row.method << ',' << to_string(row.kernel) << ','
        << row.gamma_label() << ',' << cell(r.confidence) << ',' << cell(r.mean_width) << ','
        << cell(r.median_width) << ',' << cell(r.q25) << ',' << cell(r.q75) << ','
        << cell(r.d10) << ',' << cell(r.d90) << ',' << r.unbounded_count << ','
        << cell(r.miscoverage_pct) << ',' << r.n << '\n';
  }
}

nlohmann::json results_json(const ExperimentResult& result, const ExperimentConfig& config) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : result.rows) {
    const auto& r = row.result;
    nlohmann::json j{
        {"dataset", row.dataset},
        {"method", row.method},
        {"kernel", to_string(row.kernel)},
        {"gamma", row.gamma_label()},
        {"confidence", r.confidence},
        {"mean_width", number(r.mean_width)},
        {"finite_mean_width", number(r.finite_mean_width)},
        {"median_width", number(r.median_width)},
        {"q25", number(r.q25)},
        {"q75", number(r.q75)},
        {"d10", number(r.d10)},
        {"d90", number(r.d90)},
        {"unbounded_count", r.unbounded_count},
        {"miscoverage_pct", r.miscoverage_pct},
        {"hole_count", r.hole_count},
        {"empty_count", r.empty_count},
        {"n", r.n},
    };
    if (!row.widths.empty()) {
      nlohmann::json widths = nlohmann::json::array();
      for (double w : row.widths) widths.push_back(number(w));
      j["widths"] = std::move(widths);
    }
    rows.push_back(std::move(j));
  }

  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : result.folds) {
    std::vector<double> hypers(f.log_hypers.data(), f.log_hypers.data() + f.log_hypers.size());
    folds.push_back({{"run", f.run},
                     {"fold", f.fold},
                     {"kernel", to_string(f.kernel)},
                     {"log_hypers", hypers},
                     {"log_sigma_n", f.log_sigma_n},
                     {"nlml", number(f.nlml)},
                     {"optimized", f.optimized}});
  }

  nlohmann::json gammas = nlohmann::json::array();
  for (const auto& m : config.measures) gammas.push_back(m.describe());
  nlohmann::json kernels = nlohmann::json::array();
  for (auto k : config.kernels) kernels.push_back(to_string(k));

  nlohmann::json cfg{
      {"name", config.dataset_name},
      {"mode", config.mode == ExperimentMode::Synthetic ? "synthetic" : "cv"},
      {"kernels", kernels},
      {"measures", gammas},
      {"confidences", config.confidences},
      {"baseline", config.include_baseline},
      {"restarts", config.restarts},
      {"seed", config.seed},
      {"hull", config.hull},
      {"center_y", config.center_y},
  };
  if (config.mode == ExperimentMode::Synthetic) {
    cfg["synthetic"] = config.synthetic.to_json();
    cfg["n_datasets"] = config.n_datasets;
    cfg["hypers"] = config.hyper_mode == HyperMode::Fixed ? "fixed" : "optimize";
  } else {
    cfg["csv"] = config.csv_path.string();
    cfg["label"] = config.label_column;
    cfg["n_runs"] = config.n_runs;
    cfg["n_folds"] = config.n_folds;
  }
  return {{"config", cfg}, {"instances", result.instances}, {"results", rows}, {"fits", folds}};
}

void write_summary(const ExperimentResult& result, std::ostream& out) {
  // Group rows by (dataset, kernel, method, gamma); columns are confidence
  // levels, widths first and miscoverage second.
  std::vector<std::string> keys;
  std::map<std::string, std::vector<const ResultRow*>> groups;
  std::vector<double> levels;
  for (const auto& row : result.rows) {
    std::ostringstream key;
    key << row.dataset << "  " << to_string(row.kernel) << "  " << row.method;
    if (!row.gamma_label().empty()) key << " gamma=" << row.gamma_label();
    auto [it, inserted] = groups.try_emplace(key.str());
    if (inserted) keys.push_back(key.str());
    it->second.push_back(&row);
    if (std::find(levels.begin(), levels.end(), row.result.confidence) == levels.end()) {
      levels.push_back(row.result.confidence);
    }
  }

  std::size_t label_width = 6;
  for (const auto& k : keys) label_width = std::max(label_width, k.size());

  auto fmt = [](double v) {
    std::ostringstream s;
    if (std::isinf(v)) s << "inf";
    else if (std::isnan(v)) s << "-";
    else s << std::fixed << std::setprecision(3) << v;
    return s.str();
  };

  out << "instances per method: " << result.instances << "\n\n";
  out << std::left << std::setw(static_cast<int>(label_width)) << "method";
  for (const char* prefix : {"W@", "E@"}) {
    for (double c : levels) {
      std::ostringstream h;
      h << prefix << std::setprecision(3) << 100.0 * c;
      out << "  " << std::right << std::setw(10) << h.str();
    }
  }
  out << '\n';
  for (const auto& key : keys) {
    const auto& rows = groups[key];
    out << std::left << std::setw(static_cast<int>(label_width)) << key;
    for (double c : levels) {
      std::string v = "-";
      for (const auto* r : rows) {
        if (r->result.confidence == c) v = fmt(r->result.mean_width);
      }
      out << "  " << std::right << std::setw(10) << v;
    }
    for (double c : levels) {
      std::string v = "-";
      for (const auto* r : rows) {
        if (r->result.confidence == c) v = fmt(r->result.miscoverage_pct);
      }
      out << "  " << std::right << std::setw(10) << v;
    }
    out << '\n';
  }
  out << "\nW@c: mean interval width at confidence c%; E@c: miscoverage %.\n";
}

}  // namespace gprcp

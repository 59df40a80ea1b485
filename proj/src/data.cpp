#include "gprcp/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "gprcp/errors.hpp"
#include "gprcp/linalg.hpp"

namespace gprcp {

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.X.row(static_cast<Eigen::Index>(r)) = X.row(rows[r]);
    out.y(static_cast<Eigen::Index>(r)) = y(rows[r]);
  }
  out.feature_names = feature_names;
  out.label_name = label_name;
  out.provenance = provenance;
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

void SyntheticSpec::validate() const {
  if (n_train < 1 || n_test < 0) throw ConfigError("synthetic: n_train must be >= 1, n_test >= 0");
  if (input_dim < 1) throw ConfigError("synthetic: input_dim must be >= 1");
  if (!(sigma_n > 0.0)) throw ConfigError("synthetic: sigma_n must be positive");
  if (!(outlier_prob >= 0.0 && outlier_prob <= 1.0)) {
    throw ConfigError("synthetic: outlier_prob must lie in [0, 1]");
  }
  if (!(outlier_sigma > 0.0)) throw ConfigError("synthetic: outlier_sigma must be positive");
}

nlohmann::json SyntheticSpec::to_json() const {
  std::vector<double> hypers;
  for (Eigen::Index j = 0; j < kernel.log_hypers().size(); ++j) {
    hypers.push_back(std::exp(kernel.log_hypers()(j)));
  }
  return {{"n_train", n_train},   {"n_test", n_test},
          {"input_dim", input_dim}, {"kernel", std::string(to_string(kernel.family()))},
          {"kernel_hypers", hypers}, {"sigma_n", sigma_n},
          {"outlier_prob", outlier_prob}, {"outlier_sigma", outlier_sigma},
          {"seed", seed}};
}

Eigen::VectorXd sample_outputs(const SyntheticSpec& spec, const InputMatrix& X, std::mt19937_64& rng,
                               std::vector<bool>* outliers) {
  const Eigen::Index n = X.rows();
  // Identical inputs must share a latent value; sample over unique rows.
  std::vector<Eigen::Index> unique_of(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> unique_rows;
  {
    std::map<std::vector<double>, Eigen::Index> seen;
    for (Eigen::Index i = 0; i < n; ++i) {
      std::vector<double> key(X.row(i).data(), X.row(i).data() + X.cols());
      auto [it, inserted] = seen.emplace(std::move(key), static_cast<Eigen::Index>(unique_rows.size()));
      if (inserted) unique_rows.push_back(i);
      unique_of[static_cast<std::size_t>(i)] = it->second;
    }
  }
  InputMatrix U(static_cast<Eigen::Index>(unique_rows.size()), X.cols());
  for (std::size_t r = 0; r < unique_rows.size(); ++r) U.row(static_cast<Eigen::Index>(r)) = X.row(unique_rows[r]);

  const CholeskyFactor L = cholesky(kernel_matrix(spec.kernel, U), 1e-10);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(U.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  const Eigen::VectorXd f = L.llt().matrixL() * z;

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Eigen::VectorXd y(n);
  if (outliers) outliers->assign(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool is_outlier = coin(rng) < spec.outlier_prob;
    const double sd = is_outlier ? spec.outlier_sigma : spec.sigma_n;
    y(i) = f(unique_of[static_cast<std::size_t>(i)]) + sd * normal(rng);
    if (outliers) (*outliers)[static_cast<std::size_t>(i)] = is_outlier;
  }
  return y;
}

SyntheticData generate(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index n = spec.n_train + spec.n_test;
  InputMatrix X(n, spec.input_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < spec.input_dim; ++j) X(i, j) = normal(rng);
  }
  std::vector<bool> outliers;
  const Eigen::VectorXd y = sample_outputs(spec, X, rng, &outliers);

  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < spec.input_dim; ++j) names.push_back("x" + std::to_string(j + 1));

  SyntheticData out;
  out.outlier_count = static_cast<std::size_t>(std::count(outliers.begin(), outliers.end(), true));
  auto make = [&](Eigen::Index start, Eigen::Index count, const char* part) {
    Dataset d;
    d.X = X.middleRows(start, count);
    d.y = y.segment(start, count);
    d.feature_names = names;
    d.provenance = {{"source", "synthetic"}, {"part", part}, {"spec", spec.to_json()}};
    return d;
  };
  out.train = make(0, spec.n_train, "train");
  out.test = make(spec.n_train, spec.n_test, "test");
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Splits one record; quoted fields may contain commas and doubled quotes.
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError("line " + std::to_string(line_no) + ": unterminated quote");
  fields.push_back(was_quoted ? field : trim(field));
  return fields;
}

bool is_missing(const std::string& s) { return s.empty() || s == "?" || s == "NA"; }

bool parse_number(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

Dataset parse_csv(std::istream& in, const std::string& label_column,
                  const std::vector<std::string>& drop_columns, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    header = split_record(line, line_no);
  }
  if (header.empty()) throw ParseError(source + ": missing header row");

  auto column_of = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw UnknownColumn(source + ": no column named '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  // An empty label name reads an unlabeled file; y is then all NaN.
  const bool labeled = !label_column.empty();
  const std::size_t label_idx = labeled ? column_of(label_column) : header.size();
  std::vector<bool> dropped(header.size(), false);
  for (const auto& name : drop_columns) dropped[column_of(name)] = true;
  if (labeled && dropped[label_idx]) throw ConfigError(source + ": label column cannot be dropped");

  std::vector<std::vector<std::string>> rows;
  std::size_t rows_read = 0;
  std::size_t rows_missing = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_record(line, line_no);
    if (fields.size() != header.size()) {
      std::ostringstream msg;
      msg << source << " line " << line_no << ": expected " << header.size() << " fields, got "
          << fields.size();
      throw ParseError(msg.str());
    }
    ++rows_read;
    bool missing = false;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!dropped[c] && is_missing(fields[c])) missing = true;
    }
    if (missing) {
      ++rows_missing;
      continue;
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw EmptyAfterCleaning(source + ": no usable rows after dropping missing values");

  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c != label_idx && !dropped[c]) feature_cols.push_back(c);
  }

  Dataset d;
  d.label_name = label_column;
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double v = std::numeric_limits<double>::quiet_NaN();
    if (labeled && !parse_number(rows[r][label_idx], v)) {
      throw ParseError(source + ": label value '" + rows[r][label_idx] + "' is not numeric");
    }
    d.y(static_cast<Eigen::Index>(r)) = v;
  }

  nlohmann::json categorical = nlohmann::json::object();
  for (std::size_t f = 0; f < feature_cols.size(); ++f) {
    const std::size_t c = feature_cols[f];
    d.feature_names.push_back(header[c]);
    bool numeric = true;
    std::vector<double> values(rows.size());
    for (std::size_t r = 0; r < rows.size() && numeric; ++r) numeric = parse_number(rows[r][c], values[r]);
    if (!numeric) {
      std::map<std::string, int> codes;
      std::vector<std::string> order;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        auto [it, inserted] = codes.emplace(rows[r][c], static_cast<int>(order.size()));
        if (inserted) order.push_back(rows[r][c]);
        values[r] = it->second;
      }
      categorical[header[c]] = order;
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
      d.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) = values[r];
    }
  }
  d.provenance = {{"source", source},
                  {"rows_read", rows_read},
                  {"rows_dropped_missing", rows_missing},
                  {"rows_used", rows.size()},
                  {"labeled", labeled},
                  {"dropped_columns", drop_columns},
                  {"categorical_codes", categorical}};
  return d;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::vector<std::string>& drop_columns) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return parse_csv(in, label_column, drop_columns, path.string());
}

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

void write_csv(const Dataset& data, std::ostream& out) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  for (const auto& name : data.feature_names) out << quote(name) << ',';
  out << quote(data.label_name) << '\n';
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) out << format_double(data.X(i, j)) << ',';
    out << format_double(data.y(i)) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Normalization

Scaler Scaler::fit(const InputMatrix& X) {
  if (X.rows() < 1) throw Error("Scaler::fit: no rows");
  Scaler s;
  s.mean_ = X.colwise().mean();
  s.scale_ = Eigen::RowVectorXd::Ones(X.cols());
  if (X.rows() > 1) {
    const InputMatrix centered = X.rowwise() - s.mean_;
    const Eigen::RowVectorXd var =
        centered.array().square().colwise().sum() / static_cast<double>(X.rows() - 1);
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double sd = std::sqrt(var(j));
      // Relative test so that round-off in a constant column counts as zero.
      if (sd > 1e-12 * std::max(1.0, std::abs(s.mean_(j)))) s.scale_(j) = sd;
    }
  }
  return s;
}

InputMatrix Scaler::transform(const InputMatrix& X) const {
  if (X.cols() != mean_.size()) throw DimensionMismatch("Scaler: feature count mismatch");
  return (X.rowwise() - mean_).array().rowwise() / scale_.array();
}

InputMatrix Scaler::inverse_transform(const InputMatrix& Z) const {
  if (Z.cols() != mean_.size()) throw DimensionMismatch("Scaler: feature count mismatch");
  return (Z.array().rowwise() * scale_.array()).matrix().rowwise() + mean_;
}

NormalizedData normalize(const Dataset& train, const std::vector<Dataset>& others) {
  NormalizedData out{Scaler::fit(train.X), train, {}};
  out.train.X = out.scaler.transform(train.X);
  for (const auto& d : others) {
    Dataset t = d;
    t.X = out.scaler.transform(d.X);
    out.others.push_back(std::move(t));
  }
  return out;
}

}  // namespace gprcp

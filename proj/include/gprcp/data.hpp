#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "gprcp/kernels.hpp"
#include "json.hpp"

namespace gprcp {

struct Dataset {
  InputMatrix X;
  Eigen::VectorXd y;
  std::vector<std::string> feature_names;
  std::string label_name = "y";
  // Where the data came from: generator parameters or file path plus
  // cleaning statistics.
  nlohmann::json provenance = nlohmann::json::object();

  Eigen::Index size() const { return y.size(); }
  Eigen::Index input_dim() const { return X.cols(); }
  // Rows selected by `rows`, in that order.
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

struct SyntheticSpec {
  Eigen::Index n_train = 500;
  Eigen::Index n_test = 1000;
  // The reference widths are only reproduced with five standard-normal inputs.
  Eigen::Index input_dim = 5;
  Kernel kernel = Kernel::squared_exponential(1.0, 1.0);
  double sigma_n = 0.1;
  double outlier_prob = 0.0;
  double outlier_sigma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
};

struct SyntheticData {
  Dataset train;
  Dataset test;
  std::size_t outlier_count = 0;
};

// Inputs ~ N(0, I); one latent function drawn jointly over train and test
// inputs; per-point noise sd is outlier_sigma with probability outlier_prob
// and sigma_n otherwise.
SyntheticData generate(const SyntheticSpec& spec);

// Draws y = f(X) + noise at the given inputs. Rows that are exactly equal
// share one latent value. `outliers`, when given, receives the noise regime
// of each row.
Eigen::VectorXd sample_outputs(const SyntheticSpec& spec, const InputMatrix& X, std::mt19937_64& rng,
                               std::vector<bool>* outliers = nullptr);

// Reads a headed CSV. Rows containing a missing marker ("", "?", "NA") are
// dropped; non-numeric columns are integer-coded by first appearance. An
// empty label_column reads an unlabeled file and leaves y as NaN.
Dataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                 const std::vector<std::string>& drop_columns = {});
Dataset parse_csv(std::istream& in, const std::string& label_column,
                  const std::vector<std::string>& drop_columns = {},
                  const std::string& source = "<stream>");

// Writes features followed by the label column. Values round-trip exactly.
void write_csv(const Dataset& data, std::ostream& out);

// Shortest decimal form that parses back to the same double; "inf"/"-inf"
// for infinities.
std::string format_double(double value);

// Per-feature affine map fitted on training inputs.
class Scaler {
 public:
  static Scaler fit(const InputMatrix& X);

  InputMatrix transform(const InputMatrix& X) const;
  InputMatrix inverse_transform(const InputMatrix& Z) const;

  const Eigen::RowVectorXd& mean() const { return mean_; }
  const Eigen::RowVectorXd& scale() const { return scale_; }

 private:
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
};

struct NormalizedData {
  Scaler scaler;
  Dataset train;
  std::vector<Dataset> others;
};

// z-scores every input feature with training statistics (sample sd);
// constant features are only centered. Labels are left alone.
NormalizedData normalize(const Dataset& train, const std::vector<Dataset>& others = {});

}  // namespace gprcp

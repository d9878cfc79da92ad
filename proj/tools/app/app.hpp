#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mombayes/diagnostics.hpp"
#include "mombayes/errors.hpp"
#include "mombayes/sampler.hpp"

namespace mombayes::app {

class FileNotFound : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what);
  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class MissingColumn : public Error {
 public:
  using Error::Error;
};

class ZeroVariance : public Error {
 public:
  explicit ZeroVariance(std::string column);
  const std::string& column() const { return column_; }

 private:
  std::string column_;
};

/// Numeric columns read from a delimited file; column 0 is the response.
struct RawData {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t features() const { return columns.empty() ? 0 : columns.size() - 1; }
};

/**
 * Reads a header row plus numeric rows. The delimiter is ';' when the header
 * contains one, ',' otherwise. Header names are unquoted and spaces become
 * dots ("fixed acidity" -> "fixed.acidity"). An empty `response` selects the
 * first column; empty `features` selects none.
 * ParseError rows count data rows from 1.
 */
RawData load_csv(const std::filesystem::path& path, const std::string& response,
                 const std::vector<std::string>& features);

struct Transform {
  std::vector<std::string> names;
  std::vector<double> mean;
  std::vector<double> sd;
};

/// z-scores every column (sample sd, n - 1).
RawData standardize(const RawData& raw, Transform* record = nullptr);

/// Scalar dataset without features; otherwise a regression design with a leading 1.
Dataset to_dataset(const RawData& raw);

struct RunConfig {
  std::string command = "fit";  // fit | sample | simulate | experiment
  std::string experiment;       // example1 | example2 | wine | deviation | normality

  std::string model = "gaussian-location";
  std::string prior = "uniform";  // uniform | gaussian
  std::map<std::string, double> model_args;
  std::string rho = "huber";
  bool rho_given = false;
  std::optional<int> k;
  std::string partition = "shuffled";
  std::optional<double> delta_c;
  double delta_exponent = 0.25;
  std::uint64_t seed = 1;
  SamplerConfig sampler;
  int restarts = 2;

  std::size_t outliers = 0;
  double outlier_value = 0.0;
  double outlier_sd = 0.0;  // 0: point mass

  std::string data;
  std::string response;
  std::vector<std::string> features;
  bool standardize = true;
  std::string out = ".";
  double alpha = 0.05;
  int replications = 0;  // 0: harness default
};

/// Runs one command; 0 on success, 1 on a reported error.
int run(const RunConfig& config);

/// Shortest round-trip decimal form.
std::string format_double(double x);

void write_draws_csv(const std::filesystem::path& path, const std::vector<Chain>& chains);
std::vector<Chain> read_draws_csv(const std::filesystem::path& path);

/// Writes `content` to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace mombayes::app

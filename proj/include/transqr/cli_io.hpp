#pragma once

#include <transqr/sim_harness.hpp>

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace transqr {

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  /// Column index; InputError naming the column when absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::string& path);

/// Shortest text that parses back to exactly the same double; NaN as "NA".
std::string format_double(double x);
double parse_double(const std::string& text, const std::string& what);

// ---------------------------------------------------------------------------
// Dataset ingestion

struct CovariateSpec {
  enum class Transform { raw, standardize, dummy };
  std::string column;
  Transform transform = Transform::raw;
  std::string reference;            // dummy: the level coded as all zeros
  std::vector<std::string> levels;  // dummy: explicit column order (optional)
  std::vector<std::string> names;   // output names (optional)
};

struct FilterSpec {
  std::string column;
  std::string op;  // == != < <= > >=
  std::string value;
};

/// By categorical column (levels), or by numeric thresholds
/// t_1 < ... < t_k giving cells (-inf, t_1), [t_1, t_2), ..., [t_k, inf).
struct PartitionSpec {
  std::string column;
  std::vector<double> thresholds;
  std::vector<std::string> levels;
  std::vector<std::string> labels;
};

struct DatasetSpec {
  std::string path;
  std::string time_column = "time";
  std::string status_column = "status";
  std::vector<CovariateSpec> covariates;
  std::vector<FilterSpec> filters;
  std::optional<PartitionSpec> partition;
};

struct Dataset {
  SurvivalSample<double> sample;
  Partition partition;
  std::vector<std::string> covariate_names;
  std::size_t rows_read = 0;
};

Dataset ingest(const DatasetSpec& spec, std::optional<double> tau = std::nullopt);
Dataset ingest(const CsvTable& table, const DatasetSpec& spec,
               std::optional<double> tau = std::nullopt);

/// "karno" (categorical) or "karno:40,70" (thresholds).
PartitionSpec parse_partition_flag(const std::string& text);

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  std::string command;
  std::optional<DatasetSpec> data;
  FamilyId family = FamilyId::proportional_odds;
  PhiMode phi_mode = PhiMode::efficient;
  double alpha = 0.05;
  double p_min = 0.25;
  double p_max = 0.75;
  int p_points = 101;
  int replicates = 1000;
  std::string transform = "cloglog";
  std::optional<double> tau;
  double tolerance = 1e-8;
  int max_iter = 50;
  std::uint64_t seed = 1;
  std::string out = "transqr_out";
  // simulate / coverage
  std::optional<SimScenario> scenario;
  std::uint64_t sim_replicate = 0;
  double median_p = 0.5;
  bool coverage_bands = true;

  void validate() const;
};

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_from_json(const nlohmann::json& j, const std::string& base_dir);
nlohmann::json to_json(const SimScenario& scenario);
SimScenario scenario_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j, const std::string& base_dir);

/// Reads a run config, or the "config" member of a run manifest. Relative
/// data paths resolve against the file's directory.
RunConfig load_run_config(const std::string& path);

// ---------------------------------------------------------------------------
// Result files

void write_quantile_csv(const std::string& path, const QuantileTable& table);
/// Inverse of write_quantile_csv; critical and transform are not stored in the CSV.
QuantileTable read_quantile_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string json_text(const nlohmann::json& j);
/// Quotes a CSV field when it holds a comma, quote or newline.
std::string csv_field(const std::string& s);

// ---------------------------------------------------------------------------
// Commands

/// Runs `config.command` and writes its artifacts plus manifest.json into
/// config.out. Returns the process exit code; errors propagate as exceptions.
int run_command(const RunConfig& config, int threads, std::ostream& log);

/// Maps an exception to the CLI exit code (2 input, 3 convergence, 4 numeric).
int exit_code_for(const std::exception& e);

}  // namespace transqr

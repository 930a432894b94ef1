#include <transqr/cli_io.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace transqr {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// CSV

std::size_t CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InputError("missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line, const std::string& where) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) throw InputError(where + ": unterminated quote");
  out.push_back(trim(field));
  return out;
}

}  // namespace

CsvTable parse_csv(std::istream& in, const std::string& source) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    auto fields = split_csv_line(line, where);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw InputError(where + ": expected " + std::to_string(table.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw InputError(source + ": empty file");
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return parse_csv(in, path);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text, const std::string& what) {
  if (text == "NA" || text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, value);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) {
    throw InputError(what + ": cannot parse '" + text + "' as a number");
  }
  return value;
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

bool try_number(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  if (s.empty()) return false;
  if (*begin == '+') ++begin;
  const auto res = std::from_chars(begin, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool keep_row(const std::vector<std::string>& row, const CsvTable& table,
              const std::vector<FilterSpec>& filters) {
  for (const FilterSpec& f : filters) {
    const std::string& cell = row[table.column(f.column)];
    double a = 0;
    double b = 0;
    int cmp;
    if (try_number(cell, a) && try_number(f.value, b)) {
      cmp = a < b ? -1 : (a > b ? 1 : 0);
    } else {
      cmp = cell.compare(f.value);
      cmp = cmp < 0 ? -1 : (cmp > 0 ? 1 : 0);
    }
    bool ok;
    if (f.op == "==") {
      ok = cmp == 0;
    } else if (f.op == "!=") {
      ok = cmp != 0;
    } else if (f.op == "<") {
      ok = cmp < 0;
    } else if (f.op == "<=") {
      ok = cmp <= 0;
    } else if (f.op == ">") {
      ok = cmp > 0;
    } else if (f.op == ">=") {
      ok = cmp >= 0;
    } else {
      throw InputError("unknown filter operator '" + f.op + "'");
    }
    if (!ok) return false;
  }
  return true;
}

std::string threshold_label(double lo, double hi, bool has_lo, bool has_hi) {
  if (!has_lo) return "<" + format_double(hi);
  if (!has_hi) return ">=" + format_double(lo);
  return "[" + format_double(lo) + "," + format_double(hi) + ")";
}

}  // namespace

Dataset ingest(const DatasetSpec& spec, std::optional<double> tau) {
  return ingest(read_csv(spec.path), spec, tau);
}

Dataset ingest(const CsvTable& table, const DatasetSpec& spec, std::optional<double> tau) {
  if (spec.covariates.empty()) throw InputError("dataset spec lists no covariates");
  for (const FilterSpec& f : spec.filters) table.column(f.column);
  const auto time_col = table.column(spec.time_column);
  const auto status_col = table.column(spec.status_column);

  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (keep_row(table.rows[r], table, spec.filters)) kept.push_back(r);
  }
  if (kept.empty()) throw InputError("no rows left after filtering");
  const auto n = static_cast<Eigen::Index>(kept.size());
  auto where = [&](std::size_t r, const std::string& col) {
    return "line " + std::to_string(table.line_numbers[r]) + ", column '" + col + "'";
  };

  VectorXd time(n);
  std::vector<int> status(kept.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t r = kept[static_cast<std::size_t>(i)];
    time(i) = parse_double(table.rows[r][time_col], where(r, spec.time_column));
    if (!std::isfinite(time(i)) || time(i) < 0) {
      throw InputError(where(r, spec.time_column) + ": time must be finite and >= 0");
    }
    const double s = parse_double(table.rows[r][status_col], where(r, spec.status_column));
    if (s != 0 && s != 1) throw InputError(where(r, spec.status_column) + ": status must be 0 or 1");
    status[static_cast<std::size_t>(i)] = static_cast<int>(s);
  }

  std::vector<VectorXd> columns;
  std::vector<std::string> names;
  for (const CovariateSpec& cov : spec.covariates) {
    const auto col = table.column(cov.column);
    if (cov.transform == CovariateSpec::Transform::dummy) {
      std::vector<std::string> levels = cov.levels;
      if (levels.empty()) {
        for (std::size_t r : kept) {
          const auto& v = table.rows[r][col];
          if (v != cov.reference && std::find(levels.begin(), levels.end(), v) == levels.end()) {
            levels.push_back(v);
          }
        }
        std::sort(levels.begin(), levels.end());
      }
      bool reference_seen = false;
      for (std::size_t r : kept) {
        const auto& v = table.rows[r][col];
        if (v == cov.reference) {
          reference_seen = true;
        } else if (std::find(levels.begin(), levels.end(), v) == levels.end()) {
          throw InputError(where(r, cov.column) + ": level '" + v + "' is not declared");
        }
      }
      if (!reference_seen) {
        throw InputError("reference level '" + cov.reference + "' does not occur in column '" +
                         cov.column + "'");
      }
      if (!cov.names.empty() && cov.names.size() != levels.size()) {
        throw InputError("column '" + cov.column + "': one name per non-reference level expected");
      }
      for (std::size_t l = 0; l < levels.size(); ++l) {
        VectorXd x(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          x(i) = table.rows[kept[static_cast<std::size_t>(i)]][col] == levels[l] ? 1.0 : 0.0;
        }
        columns.push_back(std::move(x));
        names.push_back(cov.names.empty() ? cov.column + "=" + levels[l] : cov.names[l]);
      }
      continue;
    }
    VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::size_t r = kept[static_cast<std::size_t>(i)];
      x(i) = parse_double(table.rows[r][col], where(r, cov.column));
      if (!std::isfinite(x(i))) throw InputError(where(r, cov.column) + ": missing value");
    }
    if (cov.transform == CovariateSpec::Transform::standardize) {
      if (n < 2) throw InputError("cannot standardize '" + cov.column + "' with one row");
      const double mean = x.mean();
      const double sd = std::sqrt((x.array() - mean).square().sum() / static_cast<double>(n - 1));
      if (!(sd > 0)) throw InputError("cannot standardize constant column '" + cov.column + "'");
      x = (x.array() - mean) / sd;
    }
    columns.push_back(std::move(x));
    names.push_back(cov.names.empty() ? cov.column : cov.names.front());
  }
  MatrixXd z(n, static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) z.col(static_cast<Eigen::Index>(j)) = columns[j];

  std::vector<std::string> labels{"all"};
  std::vector<int> assignment(kept.size(), 0);
  if (spec.partition) {
    const PartitionSpec& ps = *spec.partition;
    const auto col = table.column(ps.column);
    labels.clear();
    if (!ps.thresholds.empty()) {
      if (!std::is_sorted(ps.thresholds.begin(), ps.thresholds.end()) ||
          std::adjacent_find(ps.thresholds.begin(), ps.thresholds.end()) != ps.thresholds.end()) {
        throw InputError("partition thresholds must be strictly increasing");
      }
      const auto& th = ps.thresholds;
      for (std::size_t g = 0; g <= th.size(); ++g) {
        labels.push_back(threshold_label(g > 0 ? th[g - 1] : 0, g < th.size() ? th[g] : 0, g > 0,
                                         g < th.size()));
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t r = kept[static_cast<std::size_t>(i)];
        const double v = parse_double(table.rows[r][col], where(r, ps.column));
        if (std::isnan(v)) throw InputError(where(r, ps.column) + ": missing value");
        assignment[static_cast<std::size_t>(i)] =
            static_cast<int>(std::upper_bound(th.begin(), th.end(), v) - th.begin());
      }
    } else {
      std::vector<std::string> levels = ps.levels;
      if (levels.empty()) {
        for (std::size_t r : kept) {
          const auto& v = table.rows[r][col];
          if (std::find(levels.begin(), levels.end(), v) == levels.end()) levels.push_back(v);
        }
      }
      labels = levels;
      for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t r = kept[static_cast<std::size_t>(i)];
        const auto& v = table.rows[r][col];
        const auto it = std::find(levels.begin(), levels.end(), v);
        if (it == levels.end()) {
          throw InputError(where(r, ps.column) + ": level '" + v + "' is in no partition cell");
        }
        assignment[static_cast<std::size_t>(i)] = static_cast<int>(it - levels.begin());
      }
    }
    if (!ps.labels.empty()) {
      if (ps.labels.size() != labels.size()) {
        throw InputError("partition needs " + std::to_string(labels.size()) + " labels");
      }
      labels = ps.labels;
    }
  }

  SurvivalSample<double> sample(std::move(time), std::move(status), std::move(z), tau);
  Partition partition(std::move(labels), std::move(assignment));
  return Dataset{std::move(sample), std::move(partition), std::move(names), table.rows.size()};
}

PartitionSpec parse_partition_flag(const std::string& text) {
  PartitionSpec spec;
  const auto colon = text.find(':');
  spec.column = trim(text.substr(0, colon));
  if (spec.column.empty()) throw InputError("--partition needs a column name");
  if (colon != std::string::npos) {
    std::stringstream ss(text.substr(colon + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      spec.thresholds.push_back(parse_double(trim(item), "--partition threshold"));
    }
    if (spec.thresholds.empty()) throw InputError("--partition thresholds are empty");
  }
  return spec;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

std::string transform_name(CovariateSpec::Transform t) {
  switch (t) {
    case CovariateSpec::Transform::raw:
      return "raw";
    case CovariateSpec::Transform::standardize:
      return "standardize";
    case CovariateSpec::Transform::dummy:
      return "dummy";
  }
  return "raw";
}

CovariateSpec::Transform parse_transform(const std::string& s) {
  if (s == "raw") return CovariateSpec::Transform::raw;
  if (s == "standardize") return CovariateSpec::Transform::standardize;
  if (s == "dummy") return CovariateSpec::Transform::dummy;
  throw InputError("unknown covariate transform '" + s + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

json vector_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string(what) + " must be an array of numbers");
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  return p.lexically_normal().string();
}

}  // namespace

json to_json(const DatasetSpec& spec) {
  json j;
  j["path"] = spec.path;
  j["time"] = spec.time_column;
  j["status"] = spec.status_column;
  j["covariates"] = json::array();
  for (const auto& c : spec.covariates) {
    json cj{{"column", c.column}, {"transform", transform_name(c.transform)}};
    if (!c.reference.empty()) cj["reference"] = c.reference;
    if (!c.levels.empty()) cj["levels"] = c.levels;
    if (!c.names.empty()) cj["names"] = c.names;
    j["covariates"].push_back(cj);
  }
  j["filters"] = json::array();
  for (const auto& f : spec.filters) {
    j["filters"].push_back({{"column", f.column}, {"op", f.op}, {"value", f.value}});
  }
  if (spec.partition) {
    json pj{{"column", spec.partition->column}};
    if (!spec.partition->thresholds.empty()) pj["thresholds"] = spec.partition->thresholds;
    if (!spec.partition->levels.empty()) pj["levels"] = spec.partition->levels;
    if (!spec.partition->labels.empty()) pj["labels"] = spec.partition->labels;
    j["partition"] = pj;
  }
  return j;
}

DatasetSpec dataset_from_json(const json& j, const std::string& base_dir) {
  DatasetSpec spec;
  spec.path = resolve_path(get_or<std::string>(j, "path", ""), base_dir);
  spec.time_column = get_or<std::string>(j, "time", "time");
  spec.status_column = get_or<std::string>(j, "status", "status");
  for (const auto& cj : j.value("covariates", json::array())) {
    CovariateSpec c;
    if (cj.is_string()) {
      c.column = cj.get<std::string>();
    } else {
      c.column = get_or<std::string>(cj, "column", "");
      c.transform = parse_transform(get_or<std::string>(cj, "transform", "raw"));
      c.reference = get_or<std::string>(cj, "reference", "");
      c.levels = get_or<std::vector<std::string>>(cj, "levels", {});
      c.names = get_or<std::vector<std::string>>(cj, "names", {});
    }
    if (c.column.empty()) throw InputError("covariate entry without a column");
    if (c.transform == CovariateSpec::Transform::dummy && c.reference.empty()) {
      throw InputError("dummy coding of '" + c.column + "' needs a reference level");
    }
    spec.covariates.push_back(std::move(c));
  }
  for (const auto& fj : j.value("filters", json::array())) {
    FilterSpec f;
    f.column = get_or<std::string>(fj, "column", "");
    f.op = get_or<std::string>(fj, "op", "==");
    const auto& v = fj.at("value");
    f.value = v.is_string() ? v.get<std::string>() : v.dump();
    spec.filters.push_back(std::move(f));
  }
  if (j.contains("partition") && !j["partition"].is_null()) {
    const auto& pj = j["partition"];
    PartitionSpec p;
    p.column = get_or<std::string>(pj, "column", "");
    p.thresholds = get_or<std::vector<double>>(pj, "thresholds", {});
    p.levels = get_or<std::vector<std::string>>(pj, "levels", {});
    p.labels = get_or<std::vector<std::string>>(pj, "labels", {});
    spec.partition = std::move(p);
  }
  return spec;
}

json to_json(const SimScenario& s) {
  json j;
  j["family"] = family_short_name(s.family);
  j["theta0"] = vector_json(s.theta0);
  j["gamma0_power"] = s.gamma0.power;
  json cov;
  if (s.covariates.kind == CovariateLaw::Kind::discrete) {
    cov["kind"] = "discrete";
    cov["support"] = json::array();
    for (const auto& z : s.covariates.support) cov["support"].push_back(vector_json(z));
    cov["probabilities"] = s.covariates.probabilities;
  } else {
    cov["kind"] = "uniform";
    cov["lower"] = vector_json(s.covariates.lower);
    cov["upper"] = vector_json(s.covariates.upper);
  }
  j["covariates"] = cov;
  const char* kinds[] = {"none", "uniform", "exponential"};
  j["censoring"] = {{"kind", kinds[static_cast<int>(s.censoring.kind)]},
                    {"parameter", s.censoring.parameter}};
  j["n"] = s.n;
  j["replications"] = s.replications;
  j["seed"] = s.seed;
  if (!s.groups.empty()) j["groups"] = s.groups;
  if (!s.group_labels.empty()) j["group_labels"] = s.group_labels;
  return j;
}

SimScenario scenario_from_json(const json& j) {
  SimScenario s;
  s.family = parse_family(get_or<std::string>(j, "family", "po"));
  if (!j.contains("theta0")) throw InputError("scenario needs theta0");
  s.theta0 = vector_from(j["theta0"], "theta0");
  s.gamma0.power = get_or<double>(j, "gamma0_power", 1.0);
  if (!j.contains("covariates")) throw InputError("scenario needs a covariate law");
  const auto& cj = j["covariates"];
  const auto kind = get_or<std::string>(cj, "kind", "discrete");
  if (kind == "discrete") {
    s.covariates.kind = CovariateLaw::Kind::discrete;
    for (const auto& z : cj.value("support", json::array())) {
      s.covariates.support.push_back(vector_from(z, "support point"));
    }
    s.covariates.probabilities = get_or<std::vector<double>>(cj, "probabilities", {});
  } else if (kind == "uniform") {
    s.covariates.kind = CovariateLaw::Kind::uniform;
    s.covariates.lower = vector_from(cj.at("lower"), "lower");
    s.covariates.upper = vector_from(cj.at("upper"), "upper");
  } else {
    throw InputError("unknown covariate law '" + kind + "'");
  }
  const json censoring = j.value("censoring", json::object());
  const auto ckind = get_or<std::string>(censoring, "kind", "uniform");
  if (ckind == "none") {
    s.censoring.kind = CensoringLaw::Kind::none;
  } else if (ckind == "uniform") {
    s.censoring.kind = CensoringLaw::Kind::uniform;
  } else if (ckind == "exponential") {
    s.censoring.kind = CensoringLaw::Kind::exponential;
  } else {
    throw InputError("unknown censoring law '" + ckind + "'");
  }
  s.censoring.parameter = get_or<double>(censoring, "parameter", 1.0);
  s.n = get_or<Eigen::Index>(j, "n", 200);
  s.replications = get_or<int>(j, "replications", 500);
  s.seed = get_or<std::uint64_t>(j, "seed", 1);
  s.groups = get_or<std::vector<std::vector<int>>>(j, "groups", {});
  s.group_labels = get_or<std::vector<std::string>>(j, "group_labels", {});
  s.validate();
  return s;
}

void RunConfig::validate() const {
  static const std::vector<std::string> commands{"fit", "quantiles", "bands", "simulate",
                                                 "coverage"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end()) {
    throw InputError("unknown command '" + command + "'");
  }
  const bool needs_data = command == "fit" || command == "quantiles" || command == "bands";
  if (needs_data && !data) throw InputError("command '" + command + "' needs a dataset");
  if (!needs_data && !scenario) throw InputError("command '" + command + "' needs a scenario");
  if (!(alpha > 0 && alpha < 1)) throw InputError("alpha must lie in (0, 1)");
  if (!(p_min > 0 && p_max < 1 && p_min <= p_max)) {
    throw InputError("p range must satisfy 0 < p_min <= p_max < 1");
  }
  if (p_points < 1) throw InputError("p grid needs at least one point");
  if (replicates < 1) throw InputError("replicates must be >= 1");
  if (!(tolerance > 0)) throw InputError("tolerance must be positive");
  if (max_iter < 1) throw InputError("max_iter must be >= 1");
  if (tau && !(*tau > 0)) throw InputError("tau must be positive");
  if (!(median_p > 0 && median_p < 1)) throw InputError("median_p must lie in (0, 1)");
  ProbabilityTransform::parse(transform);
}

json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  if (c.data) j["data"] = to_json(*c.data);
  j["family"] = family_short_name(c.family);
  j["phi_mode"] = to_string(c.phi_mode);
  j["alpha"] = c.alpha;
  j["p_min"] = c.p_min;
  j["p_max"] = c.p_max;
  j["p_points"] = c.p_points;
  j["replicates"] = c.replicates;
  j["transform"] = c.transform;
  j["tau"] = c.tau ? json(*c.tau) : json(nullptr);
  j["tolerance"] = c.tolerance;
  j["max_iter"] = c.max_iter;
  j["seed"] = c.seed;
  j["out"] = c.out;
  if (c.scenario) j["scenario"] = to_json(*c.scenario);
  j["sim_replicate"] = c.sim_replicate;
  j["median_p"] = c.median_p;
  j["coverage_bands"] = c.coverage_bands;
  return j;
}

RunConfig run_config_from_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  RunConfig c;
  c.command = get_or<std::string>(j, "command", "");
  if (j.contains("data") && !j["data"].is_null()) c.data = dataset_from_json(j["data"], base_dir);
  c.family = parse_family(get_or<std::string>(j, "family", "po"));
  c.phi_mode = parse_phi_mode(get_or<std::string>(j, "phi_mode", "efficient"));
  c.alpha = get_or<double>(j, "alpha", c.alpha);
  c.p_min = get_or<double>(j, "p_min", c.p_min);
  c.p_max = get_or<double>(j, "p_max", c.p_max);
  c.p_points = get_or<int>(j, "p_points", c.p_points);
  c.replicates = get_or<int>(j, "replicates", c.replicates);
  c.transform = get_or<std::string>(j, "transform", c.transform);
  if (j.contains("tau") && !j["tau"].is_null()) c.tau = get_or<double>(j, "tau", 0.0);
  c.tolerance = get_or<double>(j, "tolerance", c.tolerance);
  c.max_iter = get_or<int>(j, "max_iter", c.max_iter);
  c.seed = get_or<std::uint64_t>(j, "seed", c.seed);
  c.out = get_or<std::string>(j, "out", c.out);
  if (j.contains("scenario") && !j["scenario"].is_null()) c.scenario = scenario_from_json(j["scenario"]);
  c.sim_replicate = get_or<std::uint64_t>(j, "sim_replicate", 0);
  c.median_p = get_or<double>(j, "median_p", c.median_p);
  c.coverage_bands = get_or<bool>(j, "coverage_bands", c.coverage_bands);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("config '" + path + "': " + e.what());
  }
  const std::string base = fs::path(path).parent_path().string();
  if (j.contains("config") && j.contains("tool")) return run_config_from_json(j["config"], base);
  return run_config_from_json(j, base);
}

// ---------------------------------------------------------------------------
// Result files

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << text;
  if (!out) throw InputError("write failed for '" + path + "'");
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_quantile_csv(const std::string& path, const QuantileTable& table) {
  std::ostringstream out;
  out << "group,p,estimate,lower,upper,in_range,upper_clipped\n";
  for (const auto& g : table.groups) {
    for (const auto& q : g.points) {
      out << csv_field(g.label) << ',' << format_double(q.p) << ',' << format_double(q.estimate) << ','
          << format_double(q.lower) << ',' << format_double(q.upper) << ',' << int(q.in_range)
          << ',' << int(q.upper_clipped) << '\n';
    }
  }
  write_text(path, out.str());
}

QuantileTable read_quantile_csv(const std::string& path) {
  const CsvTable csv = read_csv(path);
  const auto cg = csv.column("group");
  const auto cp = csv.column("p");
  const auto ce = csv.column("estimate");
  const auto cl = csv.column("lower");
  const auto cu = csv.column("upper");
  const auto cr = csv.column("in_range");
  const auto cc = csv.column("upper_clipped");
  QuantileTable table;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    const std::string where = path + ":" + std::to_string(csv.line_numbers[r]);
    if (table.groups.empty() || table.groups.back().label != row[cg]) {
      table.groups.push_back(QuantileCurve{row[cg], {}});
    }
    QuantilePoint q;
    q.p = parse_double(row[cp], where);
    q.estimate = parse_double(row[ce], where);
    q.lower = parse_double(row[cl], where);
    q.upper = parse_double(row[cu], where);
    q.in_range = row[cr] == "1";
    q.upper_clipped = row[cc] == "1";
    table.groups.back().points.push_back(q);
  }
  return table;
}

}  // namespace transqr

#include <transqr/cli_io.hpp>

#include <boost/math/distributions/normal.hpp>
#include <boost/version.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#ifndef TRANSQR_VERSION
#define TRANSQR_VERSION "0.0.0"
#endif

namespace transqr {

namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e)) return 2;
  if (dynamic_cast<const ConvergenceError*>(&e)) return 3;
  return 4;
}

namespace {

struct Manifest {
  json body;
  std::vector<std::string> warnings;
  std::vector<std::string> outputs;
};

std::string out_path(const RunConfig& config, const std::string& name) {
  return (fs::path(config.out) / name).string();
}

void emit(const RunConfig& config, Manifest& manifest, const std::string& name,
          const std::string& text) {
  write_text(out_path(config, name), text);
  manifest.outputs.push_back(name);
}

void finish_manifest(const RunConfig& config, Manifest& manifest) {
  json j;
  j["tool"] = "transqr";
  j["version"] = TRANSQR_VERSION;
  j["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                  std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"boost", BOOST_LIB_VERSION}};
  j["command"] = config.command;
  j["seed"] = config.seed;
  j["config"] = to_json(config);
  j["warnings"] = manifest.warnings;
  j["outputs"] = manifest.outputs;
  for (auto& [key, value] : manifest.body.items()) j[key] = value;
  write_text(out_path(config, "manifest.json"), json_text(j));
}

FitConfig fit_config(const RunConfig& config) {
  FitConfig fc;
  fc.tolerance = config.tolerance;
  fc.max_iter = config.max_iter;
  fc.phi_mode = config.phi_mode;
  return fc;
}

double wald_p_value(double estimate, double se) {
  if (!(se > 0)) return std::numeric_limits<double>::quiet_NaN();
  const double z = std::abs(estimate / se);
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), z));
}

std::string coefficient_csv(const ScoreFit& result, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "covariate,estimate,se,z,p_value\n";
  for (Eigen::Index j = 0; j < result.theta_hat.size(); ++j) {
    const double est = result.theta_hat(j);
    const double se = result.se(j);
    out << csv_field(names[static_cast<std::size_t>(j)]) << ',' << format_double(est) << ','
        << format_double(se) << ',' << format_double(est / se) << ','
        << format_double(wald_p_value(est, se)) << '\n';
  }
  return out.str();
}

void print_coefficients(std::ostream& log, const ScoreFit& result,
                        const std::vector<std::string>& names) {
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %10s %10s %10s\n", "covariate", "estimate", "se",
                "p-value");
  log << line;
  for (Eigen::Index j = 0; j < result.theta_hat.size(); ++j) {
    std::snprintf(line, sizeof line, "%-20s %10.4f %10.4f %10.4g\n",
                  names[static_cast<std::size_t>(j)].c_str(), result.theta_hat(j), result.se(j),
                  wald_p_value(result.theta_hat(j), result.se(j)));
    log << line;
  }
}

json fit_summary(const ScoreFit& result) {
  return {{"converged", result.converged},
          {"iterations", result.iterations},
          {"score_norm", result.score_norm},
          {"n", result.n},
          {"events", result.transform.size()},
          {"phi_mode", to_string(result.phi_mode)},
          {"theta_hat", std::vector<double>(result.theta_hat.data(),
                                            result.theta_hat.data() + result.theta_hat.size())}};
}

std::string curves_csv(const GroupCurves& curves) {
  std::ostringstream out;
  out << "group,time,cdf,sd\n";
  for (const auto& g : curves.groups) {
    for (Eigen::Index k = 0; k < curves.event_times.size(); ++k) {
      out << csv_field(g.label) << ',' << format_double(curves.event_times(k)) << ','
          << format_double(g.cdf(k)) << ',' << format_double(g.sd.size() ? g.sd(k) : 0.0) << '\n';
    }
  }
  return out.str();
}

void note_quantile_range(const QuantileTable& table, Manifest& manifest, std::ostream& log) {
  std::size_t out_of_range = 0;
  std::size_t clipped = 0;
  for (const auto& g : table.groups) {
    for (const auto& q : g.points) {
      out_of_range += !q.in_range;
      clipped += q.upper_clipped;
    }
  }
  if (out_of_range > 0) {
    manifest.warnings.push_back(std::to_string(out_of_range) +
                                " quantile level(s) beyond F-hat_D(tau); rows flagged out of range");
  }
  if (clipped > 0) {
    manifest.warnings.push_back(std::to_string(clipped) +
                                " upper bound(s) clipped at the last event time");
  }
  for (const auto& w : manifest.warnings) log << "warning: " << w << '\n';
}

struct FittedData {
  Dataset data;
  std::unique_ptr<HazardFamily<double>> family;
  ScoreFit result;
};

FittedData fit_dataset(const RunConfig& config, Manifest& manifest, std::ostream& log) {
  Dataset data = ingest(*config.data, config.tau);
  auto family = make_family<double>(config.family);
  ScoreFit result = fit(data.sample, *family, std::nullopt, fit_config(config));
  manifest.body["fit"] = fit_summary(result);
  manifest.body["rows_read"] = data.rows_read;
  manifest.body["tau"] = data.sample.tau();
  for (const auto& w : result.warnings) manifest.warnings.push_back(w);
  if (!result.converged) {
    std::ostringstream msg;
    msg << "fit did not converge after " << result.iterations
        << " iteration(s); |U_n|_inf = " << result.score_norm;
    manifest.warnings.push_back(msg.str());
    finish_manifest(config, manifest);
    throw ConvergenceError(msg.str());
  }
  emit(config, manifest, "coefficients.csv", coefficient_csv(result, data.covariate_names));
  log << "n = " << data.sample.size() << ", events = " << result.transform.size()
      << ", family = " << family_short_name(config.family) << "\n";
  print_coefficients(log, result, data.covariate_names);
  return {std::move(data), std::move(family), std::move(result)};
}

int cmd_fit(const RunConfig& config, Manifest& manifest, std::ostream& log) {
  fit_dataset(config, manifest, log);
  return 0;
}

int cmd_quantiles(const RunConfig& config, Manifest& manifest, std::ostream& log) {
  const FittedData f = fit_dataset(config, manifest, log);
  const GroupCurves curves = grouped_curves(f.result, f.data.sample, *f.family, f.data.partition);
  if (curves.clamped_variances > 0) {
    manifest.warnings.push_back(std::to_string(curves.clamped_variances) +
                                " negative plug-in variance(s) clamped to 0");
  }
  const auto grid = default_p_grid(config.p_min, config.p_max, config.p_points);
  const QuantileTable table = pointwise_ci(curves, grid, config.alpha,
                                           ProbabilityTransform::parse(config.transform));
  emit(config, manifest, "curves.csv", curves_csv(curves));
  write_quantile_csv(out_path(config, "quantiles.csv"), table);
  manifest.outputs.push_back("quantiles.csv");
  manifest.body["critical_value"] = table.critical;
  note_quantile_range(table, manifest, log);
  return 0;
}

int cmd_bands(const RunConfig& config, Manifest& manifest, std::ostream& log, int threads) {
  const FittedData f = fit_dataset(config, manifest, log);
  const GroupCurves curves = grouped_curves(f.result, f.data.sample, *f.family, f.data.partition);
  if (curves.clamped_variances > 0) {
    manifest.warnings.push_back(std::to_string(curves.clamped_variances) +
                                " negative plug-in variance(s) clamped to 0");
  }
  BandConfig bc;
  bc.alpha = config.alpha;
  bc.p_min = config.p_min;
  bc.p_max = config.p_max;
  bc.replicates = config.replicates;
  bc.seed = config.seed;
  bc.threads = threads;
  bc.transform = ProbabilityTransform::parse(config.transform);
  const auto grid = default_p_grid(config.p_min, config.p_max, config.p_points);
  const BandResult bands = simultaneous_bands(f.result, f.data.sample, curves, f.data.partition,
                                              grid, bc);
  for (const auto& w : bands.critical.warnings) manifest.warnings.push_back(w);

  std::ostringstream sups;
  sups << "replicate,sup\n";
  for (std::size_t r = 0; r < bands.critical.sups.size(); ++r) {
    sups << r << ',' << format_double(bands.critical.sups[r]) << '\n';
  }
  std::vector<double> sorted = bands.critical.sups;
  std::sort(sorted.begin(), sorted.end());
  const auto m = sorted.size();
  json summary{{"alpha", config.alpha},
               {"replicates", m},
               {"seed", config.seed},
               {"u_star", bands.critical.u_star},
               {"z_alpha", normal_critical(config.alpha)},
               {"p_min", config.p_min},
               {"p_max", config.p_max},
               {"transform", bc.transform.name()},
               {"excluded_points", bands.critical.excluded_points},
               {"sup_min", sorted.front()},
               {"sup_median", m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2])},
               {"sup_max", sorted.back()}};
  emit(config, manifest, "curves.csv", curves_csv(curves));
  write_quantile_csv(out_path(config, "bands.csv"), bands.bands);
  manifest.outputs.push_back("bands.csv");
  emit(config, manifest, "replicate_sups.csv", sups.str());
  emit(config, manifest, "band_summary.json", json_text(summary));
  manifest.body["u_star"] = bands.critical.u_star;
  log << "u#(" << config.alpha << ") = " << format_double(bands.critical.u_star) << " from " << m
      << " multiplier replicates\n";
  note_quantile_range(bands.bands, manifest, log);
  return 0;
}

int cmd_simulate(const RunConfig& config, Manifest& manifest, std::ostream& log) {
  const SimScenario& scenario = *config.scenario;
  const GeneratedSample gen = generate(scenario, config.sim_replicate);
  const auto d = gen.covariates.cols();
  std::ostringstream out;
  out << "time,status";
  for (Eigen::Index j = 0; j < d; ++j) out << ",z" << j + 1;
  out << ",support\n";
  for (Eigen::Index i = 0; i < gen.time.size(); ++i) {
    out << format_double(gen.time(i)) << ',' << gen.status[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_double(gen.covariates(i, j));
    out << ',' << gen.support_index[static_cast<std::size_t>(i)] << '\n';
  }
  emit(config, manifest, "sample.csv", out.str());
  const auto events = std::count(gen.status.begin(), gen.status.end(), 1);
  manifest.body["events"] = events;
  log << "generated n = " << gen.time.size() << " (" << events << " uncensored), replicate "
      << config.sim_replicate << "\n";
  return 0;
}

int cmd_coverage(const RunConfig& config, Manifest& manifest, std::ostream& log, int threads) {
  const SimScenario& scenario = *config.scenario;
  CoverageTargets targets;
  targets.alpha = config.alpha;
  targets.median_p = config.median_p;
  targets.p_min = config.p_min;
  targets.p_max = config.p_max;
  targets.p_points = config.p_points;
  targets.bands = config.coverage_bands;
  targets.multiplier_draws = config.replicates;
  targets.transform = ProbabilityTransform::parse(config.transform);
  targets.fit = fit_config(config);
  targets.threads = threads;
  const CoverageReport report = run_coverage(scenario, targets);

  json j;
  j["replications"] = report.replications;
  j["fitted"] = report.fitted;
  j["failures"] = report.failures;
  j["alpha"] = report.alpha;
  j["theta"] = json::array();
  for (const auto& t : report.theta) {
    j["theta"].push_back({{"truth", t.truth},
                          {"bias", t.bias},
                          {"sd", t.sd},
                          {"mean_se", t.mean_se},
                          {"coverage", t.coverage}});
  }
  j["medians"] = json::array();
  for (const auto& m : report.medians) {
    j["medians"].push_back({{"group", m.group},
                            {"truth", m.truth},
                            {"bias", m.bias},
                            {"sd", m.sd},
                            {"pointwise_coverage", m.pointwise_coverage},
                            {"band_coverage", m.band_coverage}});
  }
  j["band_coverage"] = report.band_coverage;
  j["median_u_star"] = report.median_u_star;
  j["fraction_u_star_above_z"] = report.fraction_u_star_above_z;

  std::ostringstream rows;
  rows << "replicate,ok,failure";
  for (Eigen::Index k = 0; k < scenario.theta0.size(); ++k) rows << ",theta" << k + 1 << ",se" << k + 1;
  rows << ",u_star,band_covers_function\n";
  for (const auto& rec : report.records) {
    rows << rec.index << ',' << int(rec.ok) << ',' << csv_field(rec.failure);
    for (Eigen::Index k = 0; k < scenario.theta0.size(); ++k) {
      if (rec.ok) {
        rows << ',' << format_double(rec.theta_hat(k)) << ',' << format_double(rec.se(k));
      } else {
        rows << ",NA,NA";
      }
    }
    rows << ',' << format_double(rec.ok ? rec.u_star : std::numeric_limits<double>::quiet_NaN())
         << ',' << rec.band_covers_function << '\n';
  }
  emit(config, manifest, "coverage.json", json_text(j));
  emit(config, manifest, "replicates.csv", rows.str());
  if (report.failures > 0) {
    manifest.warnings.push_back(std::to_string(report.failures) + " replicate(s) failed");
  }
  log << json_text(j);
  return 0;
}

}  // namespace

int run_command(const RunConfig& config, int threads, std::ostream& log) {
  config.validate();
  fs::create_directories(config.out);
  Manifest manifest;
  int code = 0;
  if (config.command == "fit") {
    code = cmd_fit(config, manifest, log);
  } else if (config.command == "quantiles") {
    code = cmd_quantiles(config, manifest, log);
  } else if (config.command == "bands") {
    code = cmd_bands(config, manifest, log, threads);
  } else if (config.command == "simulate") {
    code = cmd_simulate(config, manifest, log);
  } else {
    code = cmd_coverage(config, manifest, log, threads);
  }
  finish_manifest(config, manifest);
  return code;
}

}  // namespace transqr

#include <transqr/parallel.hpp>
#include <transqr/sim_harness.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace transqr {

double PowerTransformation::apply(double t) const { return power == 1.0 ? t : std::pow(t, power); }

double PowerTransformation::inverse(double x) const {
  return power == 1.0 ? x : std::pow(x, 1.0 / power);
}

Eigen::Index CovariateLaw::dim() const {
  if (kind == Kind::uniform) return lower.size();
  return support.empty() ? 0 : support.front().size();
}

void CovariateLaw::validate() const {
  if (kind == Kind::uniform) {
    if (lower.size() == 0 || lower.size() != upper.size()) {
      throw InputError("uniform covariate law needs lower and upper bounds of equal length");
    }
    if (!lower.allFinite() || !upper.allFinite() || (upper - lower).minCoeff() < 0) {
      throw InputError("uniform covariate law needs finite bounds with lower <= upper");
    }
    return;
  }
  if (support.empty() || support.size() != probabilities.size()) {
    throw InputError("discrete covariate law needs one probability per support point");
  }
  double total = 0;
  for (std::size_t s = 0; s < support.size(); ++s) {
    if (support[s].size() != support.front().size() || !support[s].allFinite()) {
      throw InputError("support points must be finite and of equal dimension");
    }
    if (!(probabilities[s] > 0)) throw InputError("support probabilities must be positive");
    total += probabilities[s];
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("support probabilities must sum to 1");
}

void SimScenario::validate() const {
  covariates.validate();
  if (theta0.size() != covariates.dim() || !theta0.allFinite()) {
    throw InputError("theta0 must be finite with the covariate dimension");
  }
  if (!(gamma0.power > 0)) throw InputError("transformation power must be positive");
  if (censoring.kind != CensoringLaw::Kind::none && !(censoring.parameter > 0)) {
    throw InputError("censoring parameter must be positive");
  }
  if (n < 2) throw InputError("scenario sample size must be at least 2");
  if (replications < 1) throw InputError("scenario needs at least one replication");
  if (!groups.empty()) {
    if (covariates.kind != CovariateLaw::Kind::discrete) {
      throw InputError("groups are defined on discrete covariate laws only");
    }
    std::vector<int> seen(covariates.support.size(), 0);
    for (const auto& g : groups) {
      if (g.empty()) throw InputError("scenario group is empty");
      for (int s : g) {
        if (s < 0 || static_cast<std::size_t>(s) >= seen.size()) {
          throw InputError("scenario group refers to an unknown support point");
        }
        if (seen[static_cast<std::size_t>(s)]++) {
          throw InputError("scenario groups overlap");
        }
      }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
      throw InputError("scenario groups do not cover the support");
    }
    if (!group_labels.empty() && group_labels.size() != groups.size()) {
      throw InputError("one label per scenario group expected");
    }
  }
}

std::size_t SimScenario::group_count() const { return resolved_groups().size(); }

std::vector<std::vector<int>> SimScenario::resolved_groups() const {
  if (covariates.kind != CovariateLaw::Kind::discrete) return {};
  if (!groups.empty()) return groups;
  std::vector<std::vector<int>> out;
  for (std::size_t s = 0; s < covariates.support.size(); ++s) out.push_back({static_cast<int>(s)});
  return out;
}

std::vector<std::string> SimScenario::resolved_labels() const {
  const auto g = resolved_groups();
  if (!group_labels.empty()) return group_labels;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < g.size(); ++i) out.push_back("group" + std::to_string(i + 1));
  return out;
}

GeneratedSample generate(const SimScenario& scenario, std::uint64_t replicate) {
  scenario.validate();
  const auto family = make_family<double>(scenario.family);
  const auto n = scenario.n;
  const auto d = scenario.covariates.dim();
  std::mt19937_64 engine = stream_engine(scenario.seed, replicate);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::discrete_distribution<int> pick(scenario.covariates.probabilities.begin(),
                                       scenario.covariates.probabilities.end());
  std::exponential_distribution<double> exponential(
      scenario.censoring.kind == CensoringLaw::Kind::exponential ? scenario.censoring.parameter
                                                                 : 1.0);
  auto open_unit = [&] {
    double u = unit(engine);
    while (u <= 0.0) u = unit(engine);
    return u;
  };

  GeneratedSample out;
  out.time.resize(n);
  out.failure_time.resize(n);
  out.status.resize(static_cast<std::size_t>(n));
  out.covariates.resize(n, d);
  out.support_index.assign(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXd z(d);
    if (scenario.covariates.kind == CovariateLaw::Kind::discrete) {
      const int s = pick(engine);
      out.support_index[static_cast<std::size_t>(i)] = s;
      z = scenario.covariates.support[static_cast<std::size_t>(s)];
    } else {
      for (Eigen::Index j = 0; j < d; ++j) {
        z(j) = scenario.covariates.lower(j) +
               (scenario.covariates.upper(j) - scenario.covariates.lower(j)) * unit(engine);
      }
    }
    const double u = open_unit();
    const double t =
        scenario.gamma0.inverse(std::exp(-scenario.theta0.dot(z)) * family->baseline_quantile(u));
    double c = std::numeric_limits<double>::infinity();
    switch (scenario.censoring.kind) {
      case CensoringLaw::Kind::none:
        break;
      case CensoringLaw::Kind::uniform:
        c = scenario.censoring.parameter * unit(engine);
        break;
      case CensoringLaw::Kind::exponential:
        c = exponential(engine);
        break;
    }
    out.covariates.row(i) = z.transpose();
    out.failure_time(i) = t;
    out.time(i) = std::min(t, c);
    out.status[static_cast<std::size_t>(i)] = t <= c ? 1 : 0;
  }
  return out;
}

Partition scenario_partition(const SimScenario& scenario, const GeneratedSample& sample) {
  const auto groups = scenario.resolved_groups();
  if (groups.empty()) return Partition::whole_sample(sample.time.size());
  std::vector<int> group_of(scenario.covariates.support.size(), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (int s : groups[g]) group_of[static_cast<std::size_t>(s)] = static_cast<int>(g);
  }
  std::vector<int> assignment;
  assignment.reserve(sample.support_index.size());
  for (int s : sample.support_index) assignment.push_back(group_of[static_cast<std::size_t>(s)]);
  return {scenario.resolved_labels(), std::move(assignment)};
}

double true_conditional_quantile(const SimScenario& scenario, const VectorXd& z, double p) {
  if (!(p > 0 && p < 1)) throw InputError("quantile level must lie in (0, 1)");
  const auto family = make_family<double>(scenario.family);
  return scenario.gamma0.inverse(std::exp(-scenario.theta0.dot(z)) * family->baseline_quantile(p));
}

namespace {

void check_group(const SimScenario& scenario, std::size_t group) {
  if (scenario.covariates.kind != CovariateLaw::Kind::discrete) {
    throw InputError("group targets need a discrete covariate law");
  }
  if (group >= scenario.group_count()) throw InputError("group index out of range");
}

}  // namespace

double true_group_cdf(const SimScenario& scenario, std::size_t group, double t) {
  check_group(scenario, group);
  if (t <= 0) return 0.0;
  const auto family = make_family<double>(scenario.family);
  const double x = scenario.gamma0.apply(t);
  const auto groups = scenario.resolved_groups();
  double weight = 0;
  double value = 0;
  for (int s : groups[group]) {
    const double w = scenario.covariates.probabilities[static_cast<std::size_t>(s)];
    weight += w;
    value += w * family->cdf(x, scenario.theta0, scenario.covariates.support[static_cast<std::size_t>(s)]);
  }
  return value / weight;
}

double true_group_quantile(const SimScenario& scenario, std::size_t group, double p) {
  check_group(scenario, group);
  const auto members = scenario.resolved_groups()[group];
  if (members.size() == 1) {
    return true_conditional_quantile(
        scenario, scenario.covariates.support[static_cast<std::size_t>(members.front())], p);
  }
  double hi = 0;
  for (int s : members) {
    hi = std::max(hi, true_conditional_quantile(
                          scenario, scenario.covariates.support[static_cast<std::size_t>(s)], p));
  }
  double lo = 0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (true_group_cdf(scenario, group, mid) >= p) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double check_quantile_identities(const SimScenario& scenario, const std::vector<double>& levels,
                                 double tolerance) {
  const auto family = make_family<double>(scenario.family);
  std::vector<VectorXd> points = scenario.covariates.support;
  if (scenario.covariates.kind == CovariateLaw::Kind::uniform) {
    points = {scenario.covariates.lower, scenario.covariates.upper};
  }
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
  double worst = 0;
  for (const VectorXd& z : points) {
    for (double p1 : levels) {
      for (double p2 : levels) {
        const double lhs = scenario.gamma0.apply(true_conditional_quantile(scenario, z, p1)) /
                           scenario.gamma0.apply(true_conditional_quantile(scenario, z, p2));
        worst = std::max(worst, rel(lhs, family->baseline_quantile(p1) /
                                             family->baseline_quantile(p2)));
      }
    }
  }
  for (double p : levels) {
    for (const VectorXd& z1 : points) {
      for (const VectorXd& z2 : points) {
        const double lhs = scenario.gamma0.apply(true_conditional_quantile(scenario, z1, p)) /
                           scenario.gamma0.apply(true_conditional_quantile(scenario, z2, p));
        worst = std::max(worst, rel(lhs, std::exp(-scenario.theta0.dot(z1)) /
                                             std::exp(-scenario.theta0.dot(z2))));
      }
    }
  }
  if (worst > tolerance) {
    throw NumericError("true quantiles violate the invariance identities (relative error " +
                       std::to_string(worst) + ")");
  }
  return worst;
}

namespace {

ReplicateRecord run_replicate(const SimScenario& scenario, const CoverageTargets& targets,
                              std::uint64_t index, const std::vector<double>& truth_median,
                              const std::vector<std::vector<double>>& truth_grid,
                              const std::vector<double>& p_grid) {
  ReplicateRecord rec;
  rec.index = index;
  try {
    const GeneratedSample gen = generate(scenario, index);
    const SurvivalSample<double> sample(gen.time, gen.status, gen.covariates);
    const auto family = make_family<double>(scenario.family);
    const ScoreFit result = fit(sample, *family, std::nullopt, targets.fit);
    if (!result.converged) {
      rec.failure = "fit did not converge (|U| = " + std::to_string(result.score_norm) + ")";
      return rec;
    }
    rec.theta_hat = result.theta_hat;
    rec.se = result.se;
    if (!truth_median.empty()) {
      const Partition partition = scenario_partition(scenario, gen);
      const GroupCurves curves = grouped_curves(result, sample, *family, partition);
      const QuantileTable point = pointwise_ci(curves, {targets.median_p}, targets.alpha,
                                               targets.transform);
      const auto groups = partition.size();
      rec.median_estimate.resize(groups);
      rec.pointwise_covers_median.assign(groups, 0);
      for (std::size_t g = 0; g < groups; ++g) {
        const QuantilePoint& q = point.groups[g].points.front();
        rec.median_estimate[g] = q.estimate;
        rec.pointwise_covers_median[g] =
            q.in_range && q.lower <= truth_median[g] && truth_median[g] <= q.upper;
      }
      if (targets.bands) {
        BandConfig band;
        band.alpha = targets.alpha;
        band.p_min = targets.p_min;
        band.p_max = targets.p_max;
        band.replicates = targets.multiplier_draws;
        band.seed = stream_engine(scenario.seed ^ 0x6d756c7469706c79ULL, index)();
        band.threads = 1;
        band.transform = targets.transform;
        const BandResult bands = simultaneous_bands(result, sample, curves, partition, p_grid, band);
        rec.u_star = bands.critical.u_star;
        const QuantileTable at_median =
            confidence_set(curves, {targets.median_p}, rec.u_star, targets.transform);
        rec.band_covers_median.assign(groups, 0);
        bool all = true;
        for (std::size_t g = 0; g < groups; ++g) {
          const QuantilePoint& q = at_median.groups[g].points.front();
          rec.band_covers_median[g] =
              q.in_range && q.lower <= truth_median[g] && truth_median[g] <= q.upper;
          const auto& pts = bands.bands.groups[g].points;
          for (std::size_t j = 0; j < pts.size(); ++j) {
            const double truth = truth_grid[g][j];
            if (!(pts[j].in_range && pts[j].lower <= truth && truth <= pts[j].upper)) all = false;
          }
        }
        rec.band_covers_function = all;
      }
    }
    rec.ok = true;
  } catch (const std::exception& e) {
    rec.failure = e.what();
  }
  return rec;
}

}  // namespace

CoverageReport run_coverage(const SimScenario& scenario, const CoverageTargets& targets) {
  scenario.validate();
  if (scenario.replications < 50) {
    throw InputError("coverage studies need at least 50 replications");
  }
  const auto d = scenario.theta0.size();
  const std::vector<double> p_grid = default_p_grid(targets.p_min, targets.p_max, targets.p_points);
  const bool grouped = scenario.covariates.kind == CovariateLaw::Kind::discrete;
  std::vector<double> truth_median;
  std::vector<std::vector<double>> truth_grid;
  if (grouped) {
    check_quantile_identities(scenario, {targets.p_min, targets.median_p, targets.p_max});
    for (std::size_t g = 0; g < scenario.group_count(); ++g) {
      truth_median.push_back(true_group_quantile(scenario, g, targets.median_p));
      std::vector<double> row;
      for (double p : p_grid) row.push_back(true_group_quantile(scenario, g, p));
      truth_grid.push_back(std::move(row));
    }
  }

  CoverageReport report;
  report.replications = scenario.replications;
  report.alpha = targets.alpha;
  report.records.resize(static_cast<std::size_t>(scenario.replications));
  parallel_for(report.records.size(), targets.threads, [&](std::size_t r) {
    report.records[r] = run_replicate(scenario, targets, r, truth_median, truth_grid, p_grid);
  });

  const double z = normal_critical(targets.alpha);
  std::vector<const ReplicateRecord*> ok;
  for (const auto& rec : report.records) {
    if (rec.ok) ok.push_back(&rec);
  }
  report.fitted = static_cast<int>(ok.size());
  report.failures = report.replications - report.fitted;
  if (ok.empty()) return report;
  const double count = static_cast<double>(ok.size());

  report.theta.resize(static_cast<std::size_t>(d));
  for (Eigen::Index j = 0; j < d; ++j) {
    ThetaSummary& s = report.theta[static_cast<std::size_t>(j)];
    s.truth = scenario.theta0(j);
    double mean = 0;
    double se = 0;
    double covered = 0;
    for (const auto* rec : ok) {
      mean += rec->theta_hat(j);
      se += rec->se(j);
      covered += std::abs(rec->theta_hat(j) - s.truth) <= z * rec->se(j);
    }
    mean /= count;
    double ss = 0;
    for (const auto* rec : ok) ss += (rec->theta_hat(j) - mean) * (rec->theta_hat(j) - mean);
    s.bias = mean - s.truth;
    s.sd = ok.size() > 1 ? std::sqrt(ss / (count - 1)) : 0.0;
    s.mean_se = se / count;
    s.coverage = covered / count;
  }

  if (grouped) {
    const auto labels = scenario.resolved_labels();
    for (std::size_t g = 0; g < truth_median.size(); ++g) {
      MedianSummary s;
      s.group = labels[g];
      s.truth = truth_median[g];
      double mean = 0;
      double finite = 0;
      for (const auto* rec : ok) {
        if (!std::isnan(rec->median_estimate[g])) {
          mean += rec->median_estimate[g];
          ++finite;
        }
        s.pointwise_coverage += rec->pointwise_covers_median[g];
        if (targets.bands) s.band_coverage += rec->band_covers_median[g];
      }
      mean = finite > 0 ? mean / finite : std::numeric_limits<double>::quiet_NaN();
      double ss = 0;
      for (const auto* rec : ok) {
        if (!std::isnan(rec->median_estimate[g])) {
          ss += (rec->median_estimate[g] - mean) * (rec->median_estimate[g] - mean);
        }
      }
      s.bias = mean - s.truth;
      s.sd = finite > 1 ? std::sqrt(ss / (finite - 1)) : 0.0;
      s.pointwise_coverage /= count;
      s.band_coverage /= count;
      report.medians.push_back(s);
    }
    if (targets.bands) {
      std::vector<double> u;
      double above = 0;
      for (const auto* rec : ok) {
        report.band_coverage += rec->band_covers_function;
        u.push_back(rec->u_star);
        above += rec->u_star > z;
      }
      report.band_coverage /= count;
      std::sort(u.begin(), u.end());
      const auto k = u.size();
      report.median_u_star = k % 2 ? u[k / 2] : 0.5 * (u[k / 2 - 1] + u[k / 2]);
      report.fraction_u_star_above_z = above / count;
    }
  }
  return report;
}

}  // namespace transqr

#include <transqr/grouped_quantiles.hpp>

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace transqr {

Partition::Partition(std::vector<std::string> labels, std::vector<int> assignment)
    : labels_(std::move(labels)), assignment_(std::move(assignment)) {
  const auto k = labels_.size();
  if (k == 0) throw InputError("partition needs at least one group");
  counts_.assign(k, 0);
  members_.assign(k, {});
  for (std::size_t i = 0; i < assignment_.size(); ++i) {
    const int g = assignment_[i];
    if (g < 0 || static_cast<std::size_t>(g) >= k) {
      throw InputError("subject " + std::to_string(i) + " is not assigned to a partition cell");
    }
    ++counts_[static_cast<std::size_t>(g)];
    members_[static_cast<std::size_t>(g)].push_back(static_cast<Eigen::Index>(i));
  }
  for (std::size_t g = 0; g < k; ++g) {
    if (counts_[g] == 0) throw InputError("partition cell '" + labels_[g] + "' is empty");
  }
}

Partition Partition::from_predicates(const SurvivalSample<double>& sample,
                                     std::vector<std::string> labels,
                                     const std::vector<Predicate>& predicates) {
  if (labels.size() != predicates.size()) {
    throw InputError("partition labels and predicates differ in number");
  }
  std::vector<int> assignment(static_cast<std::size_t>(sample.size()), -1);
  for (Eigen::Index i = 0; i < sample.size(); ++i) {
    for (std::size_t g = 0; g < predicates.size(); ++g) {
      if (!predicates[g](sample.covariate(i))) continue;
      if (assignment[static_cast<std::size_t>(i)] >= 0) {
        throw InputError("partition cells overlap at subject " + std::to_string(i));
      }
      assignment[static_cast<std::size_t>(i)] = static_cast<int>(g);
    }
  }
  return {std::move(labels), std::move(assignment)};
}

Partition Partition::whole_sample(Eigen::Index n, std::string label) {
  return {{std::move(label)}, std::vector<int>(static_cast<std::size_t>(n), 0)};
}

double GroupCurves::cdf_at(std::size_t group, double t) const {
  const auto* begin = event_times.data();
  const auto k = std::upper_bound(begin, begin + event_times.size(), t) - begin - 1;
  return k < 0 ? 0.0 : groups[group].cdf(k);
}

double GroupCurves::sd_at(std::size_t group, double t) const {
  const auto* begin = event_times.data();
  const auto k = std::upper_bound(begin, begin + event_times.size(), t) - begin - 1;
  return k < 0 ? 0.0 : groups[group].sd(k);
}

namespace {

void check_sizes(const ScoreFit& fit, const SurvivalSample<double>& sample,
                 const Partition& partition) {
  if (static_cast<Eigen::Index>(partition.assignment().size()) != sample.size()) {
    throw InputError("partition does not match the sample size");
  }
  if (fit.n != sample.size() || fit.transform.size() != sample.event_count()) {
    throw InputError("fit was not computed on this sample");
  }
}

}  // namespace

GroupCurves group_cdf(const ScoreFit& fit, const SurvivalSample<double>& sample,
                      const HazardFamily<double>& family, const Partition& partition) {
  check_sizes(fit, sample, partition);
  const auto m = fit.transform.size();
  const auto n = sample.size();
  GroupCurves out;
  out.event_times = fit.transform.event_times;
  out.n = n;
  out.subject_cdf.resize(m, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorXd& z = sample.covariate(i);
    for (Eigen::Index k = 0; k < m; ++k) {
      out.subject_cdf(k, i) = family.cdf(fit.transform.gamma(k), fit.theta_hat, z);
    }
  }
  out.groups.resize(partition.size());
  for (std::size_t g = 0; g < partition.size(); ++g) {
    GroupCurve& curve = out.groups[g];
    curve.label = partition.labels()[g];
    curve.pi_hat = partition.proportion(g);
    curve.cdf = VectorXd::Zero(m);
    for (Eigen::Index i : partition.members(g)) curve.cdf += out.subject_cdf.col(i);
    curve.cdf /= static_cast<double>(partition.count(g));
  }
  return out;
}

void auxiliary_functions(GroupCurves& curves, const ScoreFit& fit,
                         const SurvivalSample<double>& sample, const HazardFamily<double>& family,
                         const Partition& partition) {
  check_sizes(fit, sample, partition);
  const auto m = fit.transform.size();
  const auto d = sample.dim();
  VectorXd cdf_dot(d);
  for (std::size_t g = 0; g < partition.size(); ++g) {
    GroupCurve& curve = curves.groups[g];
    curve.psi1 = VectorXd::Zero(m);
    MatrixXd mean_cdf_dot = MatrixXd::Zero(m, d);
    for (Eigen::Index i : partition.members(g)) {
      const VectorXd& z = sample.covariate(i);
      for (Eigen::Index k = 0; k < m; ++k) {
        double f_value;
        double f_density;
        family.cdf_all(fit.transform.gamma(k), fit.theta_hat, z, f_value, f_density, cdf_dot);
        curve.psi1(k) += f_density;
        mean_cdf_dot.row(k) += cdf_dot.transpose();
      }
    }
    const double count = static_cast<double>(partition.count(g));
    curve.psi1 /= count;
    mean_cdf_dot /= count;
    curve.psi2 = curve.psi1.asDiagonal() * fit.transform.gamma_dot + mean_cdf_dot;
  }
}

void variance_curve(GroupCurves& curves, const ScoreFit& fit, const Partition& partition) {
  if (fit.phi_mode != PhiMode::efficient) {
    throw InputError("variance_curve requires the efficient weight function");
  }
  const auto m = fit.transform.size();
  const MatrixXd& sigma_inv = fit.sigma_inverse;
  const MatrixXd w3_form = sigma_inv * fit.sigma1 * sigma_inv;
  const VectorXd k_diag = kernel_diagonal(fit.transform);
  const MatrixXd& psi = fit.phi.psi;  // phi + Gamma-dot
  curves.clamped_variances = 0;
  for (std::size_t g = 0; g < partition.size(); ++g) {
    GroupCurve& curve = curves.groups[g];
    curve.sd.resize(m);
    const double count = static_cast<double>(partition.count(g));
    for (Eigen::Index k = 0; k < m; ++k) {
      double second_moment = 0;
      for (Eigen::Index i : partition.members(g)) {
        const double f = curves.subject_cdf(k, i);
        second_moment += f * f;
      }
      second_moment /= count;
      const double within = std::max(0.0, second_moment - curve.cdf(k) * curve.cdf(k));
      const double var1 = within / curve.pi_hat;

      const VectorXd psi2 = curve.psi2.row(k).transpose();
      const double psi1 = curve.psi1(k);
      const double var3 = psi2.dot(w3_form * psi2);
      const double var2 = k_diag(k) * psi1 * psi1 -
                          2.0 * psi1 * psi2.dot(sigma_inv * psi.row(k).transpose()) +
                          psi2.dot(sigma_inv * psi2) - var3;
      double total = var1 + var2 + var3;
      if (total < 0) {
        ++curves.clamped_variances;
        total = 0;
      }
      curve.sd(k) = std::sqrt(total);
    }
  }
}

GroupCurves grouped_curves(const ScoreFit& fit, const SurvivalSample<double>& sample,
                           const HazardFamily<double>& family, const Partition& partition) {
  GroupCurves curves = group_cdf(fit, sample, family, partition);
  auxiliary_functions(curves, fit, sample, family, partition);
  variance_curve(curves, fit, partition);
  return curves;
}

double step_quantile(const VectorXd& times, const VectorXd& values, double p) {
  for (Eigen::Index k = 0; k < values.size(); ++k) {
    if (values(k) >= p) return times(k);
  }
  return std::numeric_limits<double>::quiet_NaN();
}

double ProbabilityTransform::forward(double x) const {
  if (kind == Kind::cloglog) return -std::expm1(-std::exp(x));
  return 1.0 / (1.0 + std::exp(-x));
}

double ProbabilityTransform::inverse(double p) const {
  if (kind == Kind::cloglog) return std::log(-std::log1p(-p));
  return std::log(p / (1.0 - p));
}

double ProbabilityTransform::derivative(double x) const {
  if (kind == Kind::cloglog) return std::exp(x - std::exp(x));
  const double g = forward(x);
  return g * (1.0 - g);
}

std::string ProbabilityTransform::name() const {
  return kind == Kind::cloglog ? "cloglog" : "logit";
}

ProbabilityTransform ProbabilityTransform::parse(const std::string& s) {
  if (s == "cloglog") return {Kind::cloglog};
  if (s == "logit") return {Kind::logit};
  throw InputError("unknown probability transform '" + s + "' (expected cloglog or logit)");
}

std::vector<double> default_p_grid(double p_min, double p_max, int points) {
  if (!(p_min > 0 && p_max < 1 && p_min <= p_max) || points < 1) {
    throw InputError("p-grid must satisfy 0 < p_min <= p_max < 1 with at least one point");
  }
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) {
    grid[static_cast<std::size_t>(i)] =
        points == 1 ? p_min : p_min + (p_max - p_min) * i / static_cast<double>(points - 1);
  }
  return grid;
}

QuantileTable quantile_curve(const GroupCurves& curves, const std::vector<double>& p_grid) {
  QuantileTable table;
  table.critical = 0;
  for (const GroupCurve& curve : curves.groups) {
    QuantileCurve qc;
    qc.label = curve.label;
    for (double p : p_grid) {
      QuantilePoint point;
      point.p = p;
      point.estimate = step_quantile(curves.event_times, curve.cdf, p);
      point.in_range = !std::isnan(point.estimate);
      point.lower = point.upper = point.estimate;
      qc.points.push_back(point);
    }
    table.groups.push_back(std::move(qc));
  }
  return table;
}

QuantileTable confidence_set(const GroupCurves& curves, const std::vector<double>& p_grid,
                             double critical, const ProbabilityTransform& transform) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double root_n = std::sqrt(static_cast<double>(curves.n));
  QuantileTable table;
  table.critical = critical;
  table.transform = transform.name();
  for (const GroupCurve& curve : curves.groups) {
    QuantileCurve qc;
    qc.label = curve.label;
    const auto m = curve.cdf.size();
    const double top = m > 0 ? curve.cdf(m - 1) : 0.0;
    for (double p : p_grid) {
      if (!(p > 0 && p < 1)) throw InputError("quantile level must lie in (0, 1)");
      QuantilePoint point;
      point.p = p;
      point.estimate = step_quantile(curves.event_times, curve.cdf, p);
      if (std::isnan(point.estimate)) {
        point.in_range = false;
        point.lower = point.upper = nan;
        qc.points.push_back(point);
        continue;
      }
      const auto* begin = curves.event_times.data();
      const auto k = std::lower_bound(begin, begin + m, point.estimate) - begin;
      const double x = transform.inverse(p);
      const double radius = curve.sd(k) * critical / (root_n * transform.derivative(x));
      double p_lower = p;
      double p_upper = p;
      if (radius > 0) {
        p_lower = transform.forward(x - radius);
        p_upper = transform.forward(x + radius);
      }
      point.lower = step_quantile(curves.event_times, curve.cdf, p_lower);
      if (p_upper > top) {
        point.upper_clipped = true;
        p_upper = top;
      }
      point.upper = step_quantile(curves.event_times, curve.cdf, p_upper);
      qc.points.push_back(point);
    }
    table.groups.push_back(std::move(qc));
  }
  return table;
}

double normal_critical(double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw InputError("alpha must lie in (0, 1)");
  return boost::math::quantile(boost::math::complement(boost::math::normal(), alpha / 2));
}

QuantileTable pointwise_ci(const GroupCurves& curves, const std::vector<double>& p_grid,
                           double alpha, const ProbabilityTransform& transform) {
  QuantileTable table = confidence_set(curves, p_grid, normal_critical(alpha), transform);
  table.alpha = alpha;
  return table;
}

}  // namespace transqr

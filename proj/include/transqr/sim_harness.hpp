#pragma once

#include <transqr/multiplier_bands.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace transqr {

/// Gamma_0(t) = t^r (r = 1 is the identity).
struct PowerTransformation {
  double power = 1.0;
  double apply(double t) const;
  double inverse(double x) const;
};

struct CovariateLaw {
  enum class Kind { discrete, uniform };
  Kind kind = Kind::discrete;
  // discrete: support points and their probabilities
  std::vector<VectorXd> support;
  std::vector<double> probabilities;
  // uniform: independent components on [lower_j, upper_j]
  VectorXd lower;
  VectorXd upper;

  Eigen::Index dim() const;
  void validate() const;
};

struct CensoringLaw {
  enum class Kind { none, uniform, exponential };
  Kind kind = Kind::uniform;
  double parameter = 1.0;  // upper end c of uniform[0, c], or the exponential rate
};

struct SimScenario {
  FamilyId family = FamilyId::proportional_odds;
  VectorXd theta0;
  PowerTransformation gamma0;
  CovariateLaw covariates;
  CensoringLaw censoring;
  Eigen::Index n = 200;
  int replications = 500;
  std::uint64_t seed = 1;
  /// Groups as lists of support indices (discrete law only). Empty means one
  /// group per support point.
  std::vector<std::vector<int>> groups;
  std::vector<std::string> group_labels;

  void validate() const;
  std::size_t group_count() const;
  std::vector<std::vector<int>> resolved_groups() const;
  std::vector<std::string> resolved_labels() const;
};

struct GeneratedSample {
  VectorXd time;
  std::vector<int> status;
  MatrixXd covariates;
  VectorXd failure_time;         // uncensored T, kept for generator checks
  std::vector<int> support_index;  // -1 under the uniform law
};

/// Replicate `replicate` of the scenario: Z, then U, then the censoring
/// time per subject from one stream; T = Gamma_0^{-1}(e^{-theta0^T Z} G^{-1}(U)).
GeneratedSample generate(const SimScenario& scenario, std::uint64_t replicate);

/// Partition of a generated sample by the scenario's groups.
Partition scenario_partition(const SimScenario& scenario, const GeneratedSample& sample);

/// Q(p | z) = Gamma_0^{-1}(e^{-theta0^T z} G^{-1}(p)).
double true_conditional_quantile(const SimScenario& scenario, const VectorXd& z, double p);

/// F_D(t) for a group of support points.
double true_group_cdf(const SimScenario& scenario, std::size_t group, double t);

/// Q_D(p) by bisection on F_D.
double true_group_quantile(const SimScenario& scenario, std::size_t group, double p);

/// Largest relative error in the two invariance identities of the true
/// conditional quantiles over the support and the given levels. Throws
/// NumericError above `tolerance`.
double check_quantile_identities(const SimScenario& scenario, const std::vector<double>& levels,
                                 double tolerance = 1e-10);

struct CoverageTargets {
  double alpha = 0.05;
  double median_p = 0.5;  // pointwise target level
  double p_min = 0.25;
  double p_max = 0.75;
  int p_points = 101;
  bool bands = true;
  int multiplier_draws = 500;
  ProbabilityTransform transform;
  FitConfig fit;
  int threads = 1;
};

struct ReplicateRecord {
  std::uint64_t index = 0;
  bool ok = false;
  std::string failure;
  VectorXd theta_hat;
  VectorXd se;
  std::vector<double> median_estimate;      // per group
  std::vector<int> pointwise_covers_median;  // per group
  std::vector<int> band_covers_median;       // per group
  int band_covers_function = 0;
  double u_star = 0;
};

struct ThetaSummary {
  double truth = 0;
  double bias = 0;
  double sd = 0;
  double mean_se = 0;
  double coverage = 0;  // Wald interval at level 1 - alpha
};

struct MedianSummary {
  std::string group;
  double truth = 0;
  double bias = 0;
  double sd = 0;
  double pointwise_coverage = 0;
  double band_coverage = 0;
};

struct CoverageReport {
  int replications = 0;
  int fitted = 0;
  int failures = 0;
  double alpha = 0.05;
  std::vector<ThetaSummary> theta;
  std::vector<MedianSummary> medians;
  double band_coverage = 0;  // whole quantile function over [p_min, p_max] and all groups
  double median_u_star = 0;
  double fraction_u_star_above_z = 0;
  std::vector<ReplicateRecord> records;
};

/// Fits every replicate and tallies coverage against the closed-form truth.
/// Failed replicates are recorded and excluded from the denominators.
CoverageReport run_coverage(const SimScenario& scenario, const CoverageTargets& targets);

}  // namespace transqr

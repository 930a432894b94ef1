#pragma once

#include <transqr/estimator.hpp>

#include <functional>
#include <string>
#include <vector>

namespace transqr {

/// Finite partition of the covariate space, realised on a sample as a
/// group index per subject.
class Partition {
 public:
  using Predicate = std::function<bool(const VectorXd&)>;

  Partition(std::vector<std::string> labels, std::vector<int> assignment);

  /// Every subject must satisfy exactly one predicate.
  static Partition from_predicates(const SurvivalSample<double>& sample,
                                   std::vector<std::string> labels,
                                   const std::vector<Predicate>& predicates);

  static Partition whole_sample(Eigen::Index n, std::string label = "all");

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<int>& assignment() const { return assignment_; }
  Eigen::Index count(std::size_t group) const { return counts_[group]; }
  /// Members of a group in subject order.
  const std::vector<Eigen::Index>& members(std::size_t group) const { return members_[group]; }
  /// pi-hat(D) = n^{-1} #{i : Z_i in D}.
  double proportion(std::size_t group) const {
    return static_cast<double>(counts_[group]) / static_cast<double>(assignment_.size());
  }

 private:
  std::vector<std::string> labels_;
  std::vector<int> assignment_;
  std::vector<Eigen::Index> counts_;
  std::vector<std::vector<Eigen::Index>> members_;
};

/// Per-group curves on the event grid of the fit.
struct GroupCurve {
  std::string label;
  double pi_hat = 0;
  VectorXd cdf;   // F-hat_D
  VectorXd psi1;  // m
  MatrixXd psi2;  // m x d
  VectorXd sd;    // v-hat_D, the pointwise sd of sqrt(n)(F-hat_D - F_D)
};

struct GroupCurves {
  VectorXd event_times;
  Eigen::Index n = 0;
  std::vector<GroupCurve> groups;
  /// F(Gamma(t), theta-hat | Z_i) for every grid point (rows) and subject (columns).
  MatrixXd subject_cdf;
  std::size_t clamped_variances = 0;

  double cdf_at(std::size_t group, double t) const;
  double sd_at(std::size_t group, double t) const;
};

/// F-hat_D(t) = pi-hat(D)^{-1} n^{-1} sum_i 1(Z_i in D) F(Gamma(t), theta-hat | Z_i).
GroupCurves group_cdf(const ScoreFit& fit, const SurvivalSample<double>& sample,
                      const HazardFamily<double>& family, const Partition& partition);

/// Fills psi-hat_1 (group mean density) and psi-hat_2 = psi1 Gamma-dot + group mean F-dot.
void auxiliary_functions(GroupCurves& curves, const ScoreFit& fit,
                         const SurvivalSample<double>& sample, const HazardFamily<double>& family,
                         const Partition& partition);

/// Plug-in sd v-hat_D(t) from the three uncorrelated components
/// var W1 + var W2 + var W3. Negative plug-in variances clamp to 0 and are
/// counted in `clamped_variances`. Requires the efficient phi mode.
void variance_curve(GroupCurves& curves, const ScoreFit& fit, const Partition& partition);

/// All three stages.
GroupCurves grouped_curves(const ScoreFit& fit, const SurvivalSample<double>& sample,
                           const HazardFamily<double>& family, const Partition& partition);

// ---------------------------------------------------------------------------
// Quantiles and confidence sets.

/// Left-continuous inverse inf{t : F(t) >= p} of a step function given by
/// (times, values). NaN when p exceeds the last value.
double step_quantile(const VectorXd& times, const VectorXd& values, double p);

/// Strictly increasing cdf g on the real line used to transform p before
/// adding the +- radius.
struct ProbabilityTransform {
  enum class Kind { cloglog, logit };
  Kind kind = Kind::cloglog;

  double forward(double x) const;     // g
  double inverse(double p) const;     // g^{-1}
  double derivative(double x) const;  // g'
  std::string name() const;
  static ProbabilityTransform parse(const std::string& s);
};

struct QuantilePoint {
  double p = 0;
  double estimate = 0;  // Q-hat_D(p)
  double lower = 0;
  double upper = 0;
  bool in_range = true;        // p <= F-hat_D(tau)
  bool upper_clipped = false;  // g(p+) beyond F-hat_D(tau); upper set to the last jump
};

struct QuantileCurve {
  std::string label;
  std::vector<QuantilePoint> points;
};

struct QuantileTable {
  double alpha = 0.05;
  double critical = 0;  // z(alpha) or u#(alpha)
  std::string transform;
  std::vector<QuantileCurve> groups;
};

/// 101 equally spaced points on [p_min, p_max].
std::vector<double> default_p_grid(double p_min = 0.25, double p_max = 0.75, int points = 101);

/// Point estimates only.
QuantileTable quantile_curve(const GroupCurves& curves, const std::vector<double>& p_grid);

/// [Q-hat(g(p-)), Q-hat(g(p+))] with p+- = g^{-1}(p) +- n^{-1/2} v-hat_D(Q-hat_D(p)) c / g'(g^{-1}(p)).
QuantileTable confidence_set(const GroupCurves& curves, const std::vector<double>& p_grid,
                             double critical, const ProbabilityTransform& transform);

/// Upper alpha/2 standard normal point.
double normal_critical(double alpha);

/// Pointwise intervals with critical value z(alpha).
QuantileTable pointwise_ci(const GroupCurves& curves, const std::vector<double>& p_grid,
                           double alpha, const ProbabilityTransform& transform = {});

}  // namespace transqr

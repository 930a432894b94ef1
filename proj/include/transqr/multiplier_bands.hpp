#pragma once

#include <transqr/grouped_quantiles.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace transqr {

/// Three independent N(0,1) sequences of length n, plus a d-vector for W3.
struct MultiplierDraw {
  VectorXd v1;  // n
  VectorXd v2;  // n
  VectorXd v3;  // d
};

/// Replicate `replicate` of the run seeded with `seed`.
MultiplierDraw draw_multipliers(Eigen::Index n, Eigen::Index d, std::uint64_t seed,
                                std::uint64_t replicate);

/// W0#(t_k) = n^{-1/2} P(0,t_k) sum_{j<=k} e_j / (S_j P(0,t_j)),
/// e_j = sum of V2 over the failures at t_j.
VectorXd multiplier_w0(const ScoreFit& fit, const SurvivalSample<double>& sample,
                       const VectorXd& v2);

/// Symmetric square root of a positive semi-definite matrix; negative
/// eigenvalues from rounding are set to zero.
MatrixXd symmetric_sqrt(const MatrixXd& a);

/// Precomputed pieces of W# that do not depend on the multipliers.
class MultiplierProcess {
 public:
  MultiplierProcess(const ScoreFit& fit, const SurvivalSample<double>& sample,
                    const GroupCurves& curves, const Partition& partition);

  /// W#_D on the event grid; m x (number of groups).
  MatrixXd operator()(const MultiplierDraw& draw) const;

  Eigen::Index grid_size() const { return m_; }

 private:
  const ScoreFit* fit_;
  const SurvivalSample<double>* sample_;
  const GroupCurves* curves_;
  const Partition* partition_;
  Eigen::Index m_;
  MatrixXd weighted_rho_;  // m x d, N.(Delta t_k) (rho - v phi)(t_k)
  MatrixXd w3_map_;       // d x d, Sigma_1^{1/2}
};

/// Convenience single-draw evaluation.
MatrixXd multiplier_process(const ScoreFit& fit, const SurvivalSample<double>& sample,
                            const GroupCurves& curves, const Partition& partition,
                            const MultiplierDraw& draw);

struct BandConfig {
  double alpha = 0.05;
  double p_min = 0.25;
  double p_max = 0.75;
  int replicates = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  ProbabilityTransform transform;
};

struct CriticalValue {
  double u_star = 0;
  std::vector<double> sups;  // per replicate, in replicate order
  /// Grid points inside some sup range whose v-hat_D is 0 (excluded).
  std::size_t excluded_points = 0;
  /// Groups whose Q-hat_D(p_max) is undefined; their range runs to tau.
  std::vector<std::string> truncated_groups;
  std::vector<std::string> warnings;
};

/// Order statistic ceil(m (1 - alpha)) of the multiplier sups of |W#_D| / v-hat_D
/// over t in [Q-hat_D(p_min), Q-hat_D(p_max)] and all D.
CriticalValue critical_value(const ScoreFit& fit, const SurvivalSample<double>& sample,
                             const GroupCurves& curves, const Partition& partition,
                             const BandConfig& config);

/// ceil(m (1 - alpha))-th smallest of the values.
double upper_order_statistic(std::vector<double> values, double alpha);

struct BandResult {
  CriticalValue critical;
  QuantileTable bands;
};

/// Simultaneous bands on the p grid, using u# in place of z(alpha).
BandResult simultaneous_bands(const ScoreFit& fit, const SurvivalSample<double>& sample,
                              const GroupCurves& curves, const Partition& partition,
                              const std::vector<double>& p_grid, const BandConfig& config);

}  // namespace transqr

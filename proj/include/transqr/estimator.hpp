#pragma once

#include <transqr/fredholm.hpp>
#include <transqr/model_family.hpp>
#include <transqr/survival_sample.hpp>
#include <transqr/transform_solver.hpp>

#include <optional>
#include <string>
#include <vector>

namespace transqr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Weight function entering the score: the Fredholm solution, or one of the
/// two inefficient fixed choices (phi = -Gamma-dot, phi = 0).
enum class PhiMode { efficient, minus_gamma_dot, zero };

PhiMode parse_phi_mode(const std::string& s);
std::string to_string(PhiMode mode);

struct FitConfig {
  double tolerance = 1e-8;  // on ||U_n||_inf
  int max_iter = 50;
  int max_halvings = 10;
  PhiMode phi_mode = PhiMode::efficient;
  /// Without a user start, solve the phi = -Gamma-dot equation first.
  bool warm_start = true;
};

struct CovarianceMatrices {
  MatrixXd sigma1;
  MatrixXd sigma2;
  MatrixXd sigma;
};

/// Transform, weight function, score and information at one theta.
struct ScoreState {
  VectorXd theta;
  TransformEstimate<double> transform;
  FredholmSolution<double> phi;
  VectorXd score;
  CovarianceMatrices cov;
};

struct ScoreFit {
  VectorXd theta_hat;
  VectorXd score;
  double score_norm = 0;
  int iterations = 0;
  bool converged = false;
  PhiMode phi_mode = PhiMode::efficient;
  Eigen::Index n = 0;
  MatrixXd sigma1;
  MatrixXd sigma2;
  MatrixXd sigma;
  MatrixXd sigma_inverse;
  VectorXd se;  // sqrt(diag(Sigma^-1) / n); NaN for the inefficient phi modes
  TransformEstimate<double> transform;
  FredholmSolution<double> phi;
  std::vector<std::string> warnings;
};

/// phi on the grid for the requested mode (the efficient mode solves the
/// tridiagonal Fredholm system).
FredholmSolution<double> weight_function(const TransformEstimate<double>& est, PhiMode mode);

/// U_n(theta) from a completed transform and phi values on its grid.
VectorXd score_from(const TransformEstimate<double>& est, const MatrixXd& phi_values);

/// U_n(theta) = n^{-1} sum_i int [b_1i - b_2i phi] dN_i.
VectorXd score(const SurvivalSample<double>& sample, const HazardFamily<double>& family,
               const VectorXd& theta, const MatrixXd& phi_values);

/// Plug-in Sigma_1n, Sigma_2n and Sigma_n = Sigma_1n + Sigma_2n.
CovarianceMatrices covariance_matrices(const TransformEstimate<double>& est,
                                       const MatrixXd& phi_values);

ScoreState evaluate(const SurvivalSample<double>& sample, const HazardFamily<double>& family,
                    const VectorXd& theta, PhiMode mode);

/// Central-difference Jacobian dU_n/dtheta.
MatrixXd numerical_score_jacobian(const SurvivalSample<double>& sample,
                                  const HazardFamily<double>& family, const VectorXd& theta,
                                  PhiMode mode, double relative_step = 1e-6);

/// Inverse of a symmetric information matrix; throws NumericError naming the
/// null direction when it is singular.
MatrixXd checked_inverse(const MatrixXd& sigma, const char* what = "Sigma_n");

/// Fisher scoring theta <- theta + Sigma_n^{-1} U_n with step halving and a
/// numerical-Jacobian Newton fallback. Non-convergence is reported through
/// `converged`, never thrown.
ScoreFit fit(const SurvivalSample<double>& sample, const HazardFamily<double>& family,
             const std::optional<VectorXd>& theta0, const FitConfig& config = {});

}  // namespace transqr

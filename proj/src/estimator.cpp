#include <transqr/estimator.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <sstream>

namespace transqr {

PhiMode parse_phi_mode(const std::string& s) {
  if (s == "efficient") return PhiMode::efficient;
  if (s == "minus_gamma_dot") return PhiMode::minus_gamma_dot;
  if (s == "zero") return PhiMode::zero;
  throw InputError("unknown phi mode '" + s + "'");
}

std::string to_string(PhiMode mode) {
  switch (mode) {
    case PhiMode::efficient:
      return "efficient";
    case PhiMode::minus_gamma_dot:
      return "minus_gamma_dot";
    case PhiMode::zero:
      return "zero";
  }
  return "efficient";
}

FredholmSolution<double> weight_function(const TransformEstimate<double>& est, PhiMode mode) {
  const auto m = est.size();
  const auto d = est.dim();
  if (mode == PhiMode::efficient) {
    return solve_phi(build_system(est), est.gamma_dot);
  }
  FredholmSolution<double> out;
  if (mode == PhiMode::minus_gamma_dot) {
    out.psi = MatrixXd::Zero(m, d);
    out.phi = -est.gamma_dot;
  } else {
    out.psi = est.gamma_dot;
    out.phi = MatrixXd::Zero(m, d);
  }
  return out;
}

VectorXd score_from(const TransformEstimate<double>& est, const MatrixXd& phi_values) {
  if (phi_values.rows() != est.size() || phi_values.cols() != est.dim()) {
    throw InputError("score: phi must be an m x d matrix on the event grid");
  }
  VectorXd u = VectorXd::Zero(est.dim());
  for (Eigen::Index k = 0; k < est.size(); ++k) {
    u += est.b1_sum.row(k).transpose() - est.b2_sum(k) * phi_values.row(k).transpose();
  }
  return u / static_cast<double>(est.n);
}

VectorXd score(const SurvivalSample<double>& sample, const HazardFamily<double>& family,
               const VectorXd& theta, const MatrixXd& phi_values) {
  return score_from(solve_gamma(sample, family, theta), phi_values);
}

CovarianceMatrices covariance_matrices(const TransformEstimate<double>& est,
                                       const MatrixXd& phi_values) {
  const auto m = est.size();
  const auto d = est.dim();
  CovarianceMatrices out;
  out.sigma1 = MatrixXd::Zero(d, d);
  MatrixXd weighted_rho(m, d);  // N.(Delta t) rho_phi(t)
  for (Eigen::Index k = 0; k < m; ++k) {
    const VectorXd phi = phi_values.row(k).transpose();
    const VectorXd rho = est.rho.row(k).transpose();
    const MatrixXd cross = rho * phi.transpose();
    const MatrixXd v_phi = est.v_bar[static_cast<std::size_t>(k)] +
                           est.v(k) * phi * phi.transpose() - cross - cross.transpose();
    out.sigma1 += est.event_mass(k) * v_phi;
    weighted_rho.row(k) = est.event_mass(k) * (rho - est.v(k) * phi).transpose();
  }
  out.sigma2 = weighted_rho.transpose() * apply_kernel(est, weighted_rho);
  out.sigma2 = 0.5 * (out.sigma2 + out.sigma2.transpose()).eval();
  out.sigma1 = 0.5 * (out.sigma1 + out.sigma1.transpose()).eval();
  out.sigma = out.sigma1 + out.sigma2;
  return out;
}

ScoreState evaluate(const SurvivalSample<double>& sample, const HazardFamily<double>& family,
                    const VectorXd& theta, PhiMode mode) {
  ScoreState state;
  state.theta = theta;
  state.transform = solve_transform(sample, family, theta);
  state.phi = weight_function(state.transform, mode);
  state.score = score_from(state.transform, state.phi.phi);
  state.cov = covariance_matrices(state.transform, state.phi.phi);
  return state;
}

MatrixXd numerical_score_jacobian(const SurvivalSample<double>& sample,
                                  const HazardFamily<double>& family, const VectorXd& theta,
                                  PhiMode mode, double relative_step) {
  const auto d = theta.size();
  MatrixXd jac(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double h = relative_step * (1.0 + std::abs(theta(j)));
    VectorXd up = theta;
    VectorXd down = theta;
    up(j) += h;
    down(j) -= h;
    const VectorXd u_up = evaluate(sample, family, up, mode).score;
    const VectorXd u_down = evaluate(sample, family, down, mode).score;
    jac.col(j) = (u_up - u_down) / (2 * h);
  }
  return jac;
}

MatrixXd checked_inverse(const MatrixXd& sigma, const char* what) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success) throw NumericError(std::string(what) + ": eigensolver failed");
  const VectorXd& values = eig.eigenvalues();
  const double largest = values.cwiseAbs().maxCoeff();
  if (!(values(0) > 1e-12 * std::max(largest, 1e-300))) {
    std::ostringstream msg;
    msg << what << " is singular; null direction (" << eig.eigenvectors().col(0).transpose()
        << ")";
    throw NumericError(msg.str());
  }
  return eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
}

namespace {

double inf_norm(const VectorXd& u) { return u.size() > 0 ? u.cwiseAbs().maxCoeff() : 0.0; }

// Tries theta + lambda * step for lambda = 1, 1/2, ..., accepting the first
// point whose score norm is smaller than the current one.
std::optional<ScoreState> damped_step(const SurvivalSample<double>& sample,
                                      const HazardFamily<double>& family,
                                      const ScoreState& current, const VectorXd& step,
                                      const FitConfig& config) {
  const double current_norm = inf_norm(current.score);
  double lambda = 1.0;
  for (int h = 0; h <= config.max_halvings; ++h, lambda *= 0.5) {
    const VectorXd candidate = current.theta + lambda * step;
    if (!candidate.allFinite()) continue;
    try {
      ScoreState next = evaluate(sample, family, candidate, config.phi_mode);
      if (next.score.allFinite() && inf_norm(next.score) < current_norm) return next;
    } catch (const DomainError&) {
    } catch (const NumericError&) {
    }
  }
  return std::nullopt;
}

}  // namespace

ScoreFit fit(const SurvivalSample<double>& sample, const HazardFamily<double>& family,
             const std::optional<VectorXd>& theta0, const FitConfig& config) {
  const auto d = sample.dim();
  VectorXd theta = VectorXd::Zero(d);
  ScoreFit out;
  if (theta0) {
    if (theta0->size() != d || !theta0->allFinite()) {
      throw InputError("theta0 must be a finite vector of covariate dimension");
    }
    theta = *theta0;
  } else if (config.warm_start && config.phi_mode == PhiMode::efficient) {
    FitConfig warm = config;
    warm.phi_mode = PhiMode::minus_gamma_dot;
    warm.warm_start = false;
    const ScoreFit start = fit(sample, family, VectorXd::Zero(d), warm);
    if (start.converged) theta = start.theta_hat;
  }

  ScoreState state = evaluate(sample, family, theta, config.phi_mode);
  int iter = 0;
  bool converged = inf_norm(state.score) < config.tolerance;
  while (!converged && iter < config.max_iter) {
    ++iter;
    std::optional<ScoreState> next;
    const VectorXd scoring_step = checked_inverse(state.cov.sigma) * state.score;
    next = damped_step(sample, family, state, scoring_step, config);
    if (!next) {
      const MatrixXd jac = numerical_score_jacobian(sample, family, state.theta, config.phi_mode);
      const Eigen::FullPivLU<MatrixXd> lu(jac);
      if (lu.isInvertible()) {
        next = damped_step(sample, family, state, -lu.solve(state.score), config);
      }
    }
    if (!next) break;
    state = std::move(*next);
    converged = inf_norm(state.score) < config.tolerance;
  }

  out.theta_hat = state.theta;
  out.score = state.score;
  out.score_norm = inf_norm(state.score);
  out.iterations = iter;
  out.converged = converged;
  out.phi_mode = config.phi_mode;
  out.n = sample.size();
  out.sigma1 = state.cov.sigma1;
  out.sigma2 = state.cov.sigma2;
  out.sigma = state.cov.sigma;
  out.sigma_inverse = checked_inverse(out.sigma);
  if (config.phi_mode == PhiMode::efficient) {
    out.se = (out.sigma_inverse.diagonal() / static_cast<double>(out.n)).cwiseSqrt();
  } else {
    out.se = VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());
  }
  if (state.transform.clamped_predictors > 0) {
    out.warnings.push_back(std::to_string(state.transform.clamped_predictors) +
                           " linear predictor(s) clamped to |theta^T z| <= 700");
  }
  out.transform = std::move(state.transform);
  out.phi = std::move(state.phi);
  return out;
}

}  // namespace transqr

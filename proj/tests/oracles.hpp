#pragma once
// Reference implementations used as test oracles. They share no code with
// the library beyond Eigen.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Data {
  VectorXd time;
  std::vector<int> status;
  MatrixXd z;
};

/// Exponential PH data with uniform censoring and standard normal covariates.
inline Data simulate_ph(int n, const VectorXd& beta, std::uint64_t seed, double censor = 3.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Data d;
  d.time.resize(n);
  d.status.resize(static_cast<std::size_t>(n));
  d.z.resize(n, beta.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < beta.size(); ++j) d.z(i, j) = normal(rng);
    const double rate = std::exp(d.z.row(i).dot(beta));
    const double t = -std::log(1.0 - unit(rng)) / rate;
    const double c = censor * unit(rng);
    d.time(i) = std::min(t, c);
    d.status[static_cast<std::size_t>(i)] = t <= c;
  }
  return d;
}

/// Proportional odds data: T = U / (1 - U) * exp(-beta^T z) with binary or normal z.
inline Data simulate_po(int n, const VectorXd& beta, std::uint64_t seed, double censor = 6.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  Data d;
  d.time.resize(n);
  d.status.resize(static_cast<std::size_t>(n));
  d.z.resize(n, beta.size());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < beta.size(); ++j) {
      d.z(i, j) = j == 0 ? (unit(rng) < 0.5 ? 0.0 : 1.0) : 0.5 * normal(rng);
    }
    const double u = unit(rng);
    const double t = u / (1.0 - u) * std::exp(-d.z.row(i).dot(beta));
    const double c = censor * unit(rng);
    d.time(i) = std::min(t, c);
    d.status[static_cast<std::size_t>(i)] = t <= c;
  }
  return d;
}

/// Distinct uncensored times <= tau with their tie counts.
inline std::map<double, int> event_counts(const Data& d, double tau) {
  std::map<double, int> out;
  for (int i = 0; i < d.time.size(); ++i) {
    if (d.status[static_cast<std::size_t>(i)] == 1 && d.time(i) <= tau) ++out[d.time(i)];
  }
  return out;
}

/// Nelson-Aalen cumulative hazard at each distinct event time <= tau.
inline std::vector<double> nelson_aalen(const Data& d, double tau) {
  std::vector<double> out;
  double acc = 0;
  for (const auto& [t, count] : event_counts(d, tau)) {
    int at_risk = 0;
    for (int i = 0; i < d.time.size(); ++i) at_risk += d.time(i) >= t;
    acc += static_cast<double>(count) / at_risk;
    out.push_back(acc);
  }
  return out;
}

struct CoxResult {
  VectorXd beta;
  VectorXd score;
  MatrixXd information;
  std::vector<double> baseline;  // Breslow cumulative hazard at event times
};

/// Breslow partial log-likelihood score and information at beta.
inline void cox_derivatives(const Data& d, double tau, const VectorXd& beta, VectorXd& score,
                            MatrixXd& info, double& loglik) {
  const int p = static_cast<int>(beta.size());
  score = VectorXd::Zero(p);
  info = MatrixXd::Zero(p, p);
  loglik = 0;
  for (const auto& [t, count] : event_counts(d, tau)) {
    double s0 = 0;
    VectorXd s1 = VectorXd::Zero(p);
    MatrixXd s2 = MatrixXd::Zero(p, p);
    for (int i = 0; i < d.time.size(); ++i) {
      if (d.time(i) < t) continue;
      const VectorXd zi = d.z.row(i).transpose();
      const double w = std::exp(zi.dot(beta));
      s0 += w;
      s1 += w * zi;
      s2 += w * zi * zi.transpose();
    }
    for (int i = 0; i < d.time.size(); ++i) {
      if (d.status[static_cast<std::size_t>(i)] == 1 && d.time(i) == t) {
        score += d.z.row(i).transpose();
        loglik += d.z.row(i).dot(beta);
      }
    }
    score -= count * s1 / s0;
    info += count * (s2 / s0 - (s1 / s0) * (s1 / s0).transpose());
    loglik -= count * std::log(s0);
  }
}

/// Newton-Raphson on the Breslow partial likelihood.
inline CoxResult cox_fit(const Data& d, double tau) {
  const int p = static_cast<int>(d.z.cols());
  CoxResult r;
  r.beta = VectorXd::Zero(p);
  double loglik = 0;
  cox_derivatives(d, tau, r.beta, r.score, r.information, loglik);
  for (int it = 0; it < 100 && r.score.cwiseAbs().maxCoeff() > 1e-13; ++it) {
    VectorXd step = r.information.ldlt().solve(r.score);
    for (int h = 0; h < 30; ++h) {
      VectorXd s;
      MatrixXd info;
      double ll = 0;
      cox_derivatives(d, tau, r.beta + step, s, info, ll);
      if (ll >= loglik - 1e-12) {
        r.beta += step;
        r.score = s;
        r.information = info;
        loglik = ll;
        break;
      }
      step *= 0.5;
    }
  }
  double acc = 0;
  for (const auto& [t, count] : event_counts(d, tau)) {
    double s0 = 0;
    for (int i = 0; i < d.time.size(); ++i) {
      if (d.time(i) >= t) s0 += std::exp(d.z.row(i).dot(r.beta));
    }
    acc += count / s0;
    r.baseline.push_back(acc);
  }
  return r;
}

/// Central difference of a vector-valued function of a scalar.
inline VectorXd central_difference(const std::function<VectorXd(double)>& f, double h) {
  return (f(h) - f(-h)) / (2 * h);
}

/// Random symmetric positive definite tridiagonal matrix as a dense matrix.
inline MatrixXd random_pd_tridiagonal(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.1, 2.0);
  MatrixXd g = MatrixXd::Zero(m, m);
  for (int i = 0; i + 1 < m; ++i) {
    const double c = unit(rng);
    g(i, i + 1) = g(i + 1, i) = -c;
    g(i, i) += c;
    g(i + 1, i + 1) += c;
  }
  for (int i = 0; i < m; ++i) g(i, i) += unit(rng);
  return g;
}

}  // namespace oracle

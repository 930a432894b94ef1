#pragma once

#include <transqr/common.hpp>
#include <transqr/model_family.hpp>
#include <transqr/survival_sample.hpp>

#include <algorithm>
#include <string>
#include <vector>

namespace transqr {

/// Sample transformation Gamma_{n theta} on the event grid with the
/// ingredients of its theta-derivative, the measures C_n, B_n and the
/// product integral P_{n theta}(0, .).
///
/// All risk-set aggregates are evaluated at the left limit Gamma(t-).
/// Vectors are indexed by grid point k = 0..m-1.
template <typename Scalar>
struct TransformEstimate {
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  Eigen::Index n = 0;
  VectorType theta;

  VectorType event_times;
  VectorType event_mass;  // N.(Delta t) = ties / n
  VectorType gamma;       // Gamma(X_(k))
  VectorType gamma_left;  // Gamma(X_(k)-)

  VectorType s_values;  // S
  MatrixType s_dot;     // m x d, S-dot
  VectorType s_prime;   // S'

  // Conditional (risk-set, alpha-weighted) moments of l-dot and l'.
  std::vector<MatrixType> v_bar;  // d x d each
  VectorType v;
  MatrixType rho;  // m x d

  // Sums over the failures at each grid point of b1 = l-dot - S-dot/S and
  // b2 = l' - S'/S; the score is assembled from these.
  MatrixType b1_sum;  // m x d
  VectorType b2_sum;

  MatrixType gamma_dot;   // m x d
  VectorType c_jumps;     // C_n(Delta X_(k))
  VectorType b_jumps;     // B_n(Delta X_(k))
  VectorType prodint;     // P(0, X_(k))

  std::size_t clamped_predictors = 0;

  Eigen::Index size() const { return event_times.size(); }
  Eigen::Index dim() const { return theta.size(); }

  /// Grid index of the last event time <= t, -1 before the first.
  Eigen::Index grid_index(Scalar t) const {
    const auto* begin = event_times.data();
    const auto* end = begin + event_times.size();
    return static_cast<Eigen::Index>(std::upper_bound(begin, end, t) - begin) - 1;
  }

  /// Right-continuous step evaluation of Gamma.
  Scalar gamma_at(Scalar t) const {
    const auto k = grid_index(t);
    return k < 0 ? Scalar(0) : gamma(k);
  }

  VectorType gamma_dot_at(Scalar t) const {
    const auto k = grid_index(t);
    return k < 0 ? VectorType::Zero(dim()).eval() : gamma_dot.row(k).transpose().eval();
  }

  /// P(X_(i), X_(j)) = prod over grid points i < k <= j; 1 when j <= i.
  Scalar prodint_between(Eigen::Index i, Eigen::Index j) const {
    if (j <= i) return Scalar(1);
    return prodint(j) / prodint(i);
  }
};

namespace detail {

// Accumulates alpha-weighted risk-set moments at one grid point.
template <typename Scalar>
struct MomentWorkspace {
  Vector<Scalar> alpha;
  Vector<Scalar> d_x;
  Matrix<Scalar> d_theta;  // d x n

  MomentWorkspace(Eigen::Index n, Eigen::Index d) : alpha(n), d_x(n), d_theta(d, n) {}
};

}  // namespace detail

/// Volterra recursion Gamma(t) = Gamma(t-) + N.(Delta t) / S(Gamma(t-), theta, t)
/// plus every risk-set aggregate the later stages consume.
template <typename Scalar>
TransformEstimate<Scalar> solve_gamma(const SurvivalSample<Scalar>& sample,
                                      const HazardFamily<Scalar>& family,
                                      const Vector<Scalar>& theta) {
  using Index = Eigen::Index;
  using std::isfinite;
  const Index n = sample.size();
  const Index d = sample.dim();
  const Index m = sample.event_count();
  if (theta.size() != d) {
    throw InputError("theta has " + std::to_string(theta.size()) + " components, covariates " +
                     std::to_string(d));
  }
  if (!theta.allFinite()) throw InputError("theta must be finite");

  TransformEstimate<Scalar> est;
  est.n = n;
  est.theta = theta;
  est.event_times = sample.event_times();
  est.event_mass.resize(m);
  est.gamma.resize(m);
  est.gamma_left.resize(m);
  est.s_values.resize(m);
  est.s_dot.resize(m, d);
  est.s_prime.resize(m);
  est.v_bar.assign(static_cast<std::size_t>(m), Matrix<Scalar>::Zero(d, d));
  est.v.resize(m);
  est.rho.resize(m, d);
  est.b1_sum.resize(m, d);
  est.b2_sum.resize(m);

  for (Index i = 0; i < n; ++i) {
    if (family.clamps(theta, sample.covariate(i))) ++est.clamped_predictors;
  }

  detail::MomentWorkspace<Scalar> ws(n, d);
  const auto& order = sample.order();
  const Scalar inv_n = Scalar(1) / Scalar(n);
  Scalar g = 0;

  for (Index k = 0; k < m; ++k) {
    const Index start = sample.risk_start(k);
    Scalar total = 0;
    Scalar total_x = 0;
    Vector<Scalar> total_theta = Vector<Scalar>::Zero(d);
    for (Index r = start; r < n; ++r) {
      const Index i = order[static_cast<std::size_t>(r)];
      Scalar dx;
      const Scalar a = family.first_order(g, theta, sample.covariate(i), dx, ws.d_theta.col(i));
      ws.alpha(i) = a;
      ws.d_x(i) = dx;
      total += a;
      total_x += a * dx;
      total_theta.noalias() += a * ws.d_theta.col(i);
    }
    if (!(total > Scalar(0)) || !isfinite(total)) {
      throw DomainError("risk-set hazard S vanishes at t = " + std::to_string(double(est.event_times(k))) +
                        "; choose a smaller tau");
    }
    const Vector<Scalar> mean_theta = total_theta / total;
    const Scalar mean_x = total_x / total;

    Matrix<Scalar> vb = Matrix<Scalar>::Zero(d, d);
    Scalar vv = 0;
    Vector<Scalar> rr = Vector<Scalar>::Zero(d);
    for (Index r = start; r < n; ++r) {
      const Index i = order[static_cast<std::size_t>(r)];
      const Scalar w = ws.alpha(i);
      const Vector<Scalar> dt = ws.d_theta.col(i) - mean_theta;
      const Scalar dx = ws.d_x(i) - mean_x;
      vb.noalias() += w * dt * dt.transpose();
      vv += w * dx * dx;
      rr.noalias() += (w * dx) * dt;
    }
    est.v_bar[static_cast<std::size_t>(k)] = vb / total;
    est.v(k) = vv / total;
    est.rho.row(k) = (rr / total).transpose();

    Vector<Scalar> b1 = Vector<Scalar>::Zero(d);
    Scalar b2 = 0;
    for (Index i : sample.failures_at(k)) {
      b1 += ws.d_theta.col(i) - mean_theta;
      b2 += ws.d_x(i) - mean_x;
    }
    est.b1_sum.row(k) = b1.transpose();
    est.b2_sum(k) = b2;

    const Scalar s = total * inv_n;
    est.s_values(k) = s;
    est.s_dot.row(k) = (total_theta * inv_n).transpose();
    est.s_prime(k) = total_x * inv_n;
    est.event_mass(k) = Scalar(sample.event_multiplicity()[static_cast<std::size_t>(k)]) * inv_n;
    est.gamma_left(k) = g;
    g += est.event_mass(k) / s;
    est.gamma(k) = g;
  }
  return est;
}

/// Gamma-dot(t) = Gamma-dot(t-) - [S-dot + S' Gamma-dot(t-)] N.(Delta t) / S^2.
template <typename Scalar>
Matrix<Scalar> solve_gamma_dot(const TransformEstimate<Scalar>& est) {
  const auto m = est.size();
  const auto d = est.dim();
  Matrix<Scalar> out(m, d);
  Vector<Scalar> gd = Vector<Scalar>::Zero(d);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Scalar c = est.event_mass(k) / (est.s_values(k) * est.s_values(k));
    gd = gd - (est.s_dot.row(k).transpose() + est.s_prime(k) * gd) * c;
    out.row(k) = gd.transpose();
  }
  return out;
}

/// C_n(Delta X_(k)) = N.(Delta X_(k)) / S^2.
template <typename Scalar>
Vector<Scalar> c_measure(const TransformEstimate<Scalar>& est) {
  return (est.event_mass.array() / est.s_values.array().square()).matrix();
}

/// P(0, X_(k)) = prod_{j <= k} (1 - S'_j C_n(Delta X_(j))). Identically 1 when S' = 0.
template <typename Scalar>
Vector<Scalar> product_integral(const TransformEstimate<Scalar>& est) {
  const auto m = est.size();
  const Vector<Scalar> c = c_measure(est);
  Vector<Scalar> out(m);
  Scalar p = 1;
  for (Eigen::Index k = 0; k < m; ++k) {
    const Scalar factor = Scalar(1) - est.s_prime(k) * c(k);
    if (!(factor > Scalar(0))) {
      throw NumericError("product integral factor is not positive at t = " +
                         std::to_string(double(est.event_times(k))));
    }
    p *= factor;
    out(k) = p;
  }
  return out;
}

template <typename Scalar>
struct CBJumps {
  Vector<Scalar> c;  // C_n(Delta X_(k))
  Vector<Scalar> b;  // B_n(Delta X_(k)) = v(X_(k)) N.(Delta X_(k))
};

template <typename Scalar>
CBJumps<Scalar> accumulate_cb(const TransformEstimate<Scalar>& est) {
  CBJumps<Scalar> out;
  out.c = c_measure(est);
  out.b = (est.v.array() * est.event_mass.array()).matrix();
  return out;
}

/// All stages at one theta.
template <typename Scalar>
TransformEstimate<Scalar> solve_transform(const SurvivalSample<Scalar>& sample,
                                          const HazardFamily<Scalar>& family,
                                          const Vector<Scalar>& theta) {
  TransformEstimate<Scalar> est = solve_gamma(sample, family, theta);
  est.gamma_dot = solve_gamma_dot(est);
  CBJumps<Scalar> cb = accumulate_cb(est);
  est.c_jumps = std::move(cb.c);
  est.b_jumps = std::move(cb.b);
  est.prodint = product_integral(est);
  return est;
}

}  // namespace transqr

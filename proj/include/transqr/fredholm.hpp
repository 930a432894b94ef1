#pragma once

#include <transqr/common.hpp>
#include <transqr/transform_solver.hpp>

#include <algorithm>
#include <string>

namespace transqr {

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
template <typename Scalar>
class SymmetricTridiagonal {
 public:
  using Index = Eigen::Index;
  using VectorType = Vector<Scalar>;
  using MatrixType = Matrix<Scalar>;

  SymmetricTridiagonal() = default;

  SymmetricTridiagonal(VectorType diagonal, VectorType off_diagonal)
      : diag_(std::move(diagonal)), off_(std::move(off_diagonal)) {
    const Index expected = diag_.size() > 0 ? diag_.size() - 1 : 0;
    if (off_.size() != expected) {
      throw InputError("off-diagonal must have one entry fewer than the diagonal");
    }
  }

  Index size() const { return diag_.size(); }
  const VectorType& diagonal() const { return diag_; }
  const VectorType& off_diagonal() const { return off_; }

  MatrixType dense() const {
    const Index m = size();
    MatrixType out = MatrixType::Zero(m, m);
    out.diagonal() = diag_;
    if (m > 1) {
      out.diagonal(1) = off_;
      out.diagonal(-1) = off_;
    }
    return out;
  }

  MatrixType multiply(const MatrixType& x) const {
    MatrixType out = diag_.asDiagonal() * x;
    const Index m = size();
    for (Index i = 0; i + 1 < m; ++i) {
      out.row(i) += off_(i) * x.row(i + 1);
      out.row(i + 1) += off_(i) * x.row(i);
    }
    return out;
  }

  /// LDL^T solve in O(m) per right-hand side. A non-positive pivot means
  /// the matrix is not positive definite; the exception names its index.
  MatrixType solve(const MatrixType& rhs) const {
    const Index m = size();
    if (rhs.rows() != m) throw InputError("tridiagonal solve: row count mismatch");
    VectorType pivot(m);
    VectorType lower(m > 0 ? m - 1 : 0);
    for (Index i = 0; i < m; ++i) {
      pivot(i) = diag_(i) - (i > 0 ? lower(i - 1) * off_(i - 1) : Scalar(0));
      if (!(pivot(i) > Scalar(0))) {
        throw NumericError("tridiagonal matrix is not positive definite (pivot " +
                           std::to_string(i) + ")");
      }
      if (i + 1 < m) lower(i) = off_(i) / pivot(i);
    }
    MatrixType x = rhs;
    for (Index i = 1; i < m; ++i) x.row(i) -= lower(i - 1) * x.row(i - 1);
    for (Index i = 0; i < m; ++i) x.row(i) /= pivot(i);
    for (Index i = m - 2; i >= 0; --i) x.row(i) -= lower(i) * x.row(i + 1);
    return x;
  }

 private:
  VectorType diag_;
  VectorType off_;
};

/// g_ii = c_i + c_{i+1} + b_i, g_{i,i+1} = -c_{i+1}, g_mm = c_m + b_m.
template <typename Scalar>
SymmetricTridiagonal<Scalar> tridiagonal_from_jumps(const Vector<Scalar>& c,
                                                    const Vector<Scalar>& b) {
  const auto m = c.size();
  if (b.size() != m) throw InputError("c and b must have equal length");
  Vector<Scalar> diag = c + b;
  Vector<Scalar> off(m > 0 ? m - 1 : 0);
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    diag(i) += c(i + 1);
    off(i) = -c(i + 1);
  }
  return {std::move(diag), std::move(off)};
}

/// Discrete Fredholm system for psi = phi + Gamma-dot on the event grid.
template <typename Scalar>
struct FredholmSystem {
  SymmetricTridiagonal<Scalar> g_matrix;
  Vector<Scalar> c;       // P(0,X_(i))^2 / C_n(Delta X_(i))
  Vector<Scalar> b;       // P(0,X_(i))^2 B_n(Delta X_(i))
  Vector<Scalar> p_diag;  // P(0, X_(i))
  Matrix<Scalar> rho;     // m x d plug-in of rho_{-Gamma-dot} = rho + v Gamma-dot
  Matrix<Scalar> rhs;     // N.(Delta X_(i)) rho: the discrete dN.-integral weights
};

template <typename Scalar>
struct FredholmSolution {
  Matrix<Scalar> psi;  // m x d
  Matrix<Scalar> phi;  // psi - Gamma-dot
  FredholmSystem<Scalar> system;
  bool degenerate = false;  // rho vanished: psi = 0, phi = -Gamma-dot
};

template <typename Scalar>
FredholmSystem<Scalar> build_system(const TransformEstimate<Scalar>& est) {
  const auto m = est.size();
  if (est.prodint.size() != m || est.c_jumps.size() != m || est.gamma_dot.rows() != m) {
    throw InputError("build_system: transform estimate is incomplete");
  }
  FredholmSystem<Scalar> sys;
  sys.p_diag = est.prodint;
  sys.c.resize(m);
  sys.b.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(est.c_jumps(i) > Scalar(0))) {
      throw InputError("C_n jump is zero at t = " + std::to_string(double(est.event_times(i))));
    }
    const Scalar p2 = est.prodint(i) * est.prodint(i);
    sys.c(i) = p2 / est.c_jumps(i);
    sys.b(i) = p2 * est.b_jumps(i);
  }
  sys.g_matrix = tridiagonal_from_jumps(sys.c, sys.b);
  sys.rho = est.rho + est.v.asDiagonal() * est.gamma_dot;
  sys.rhs = est.event_mass.asDiagonal() * sys.rho;
  return sys;
}

/// psi = P g^{-1} P rhs; the rho == 0 case short-circuits to psi = 0.
template <typename Scalar>
FredholmSolution<Scalar> solve_phi(FredholmSystem<Scalar> system, const Matrix<Scalar>& gamma_dot,
                                   Scalar zero_tolerance = Scalar(1e-14)) {
  using std::max;
  const auto m = system.g_matrix.size();
  const auto d = gamma_dot.cols();
  if (gamma_dot.rows() != m || system.rhs.rows() != m) {
    throw InputError("solve_phi: dimension mismatch");
  }
  FredholmSolution<Scalar> out;
  const Scalar scale = max<Scalar>(Scalar(1), m > 0 ? gamma_dot.cwiseAbs().maxCoeff() : Scalar(0));
  const Scalar rho_max = system.rho.size() > 0 ? system.rho.cwiseAbs().maxCoeff() : Scalar(0);
  if (m == 0 || rho_max < zero_tolerance * scale) {
    out.psi = Matrix<Scalar>::Zero(m, d);
    out.degenerate = true;
  } else {
    const auto& p = system.p_diag;
    out.psi = p.asDiagonal() * system.g_matrix.solve(p.asDiagonal() * system.rhs);
  }
  out.phi = out.psi - gamma_dot;
  out.system = std::move(system);
  return out;
}

/// Dense K_n(X_(i), X_(j)) = sum_{k <= min(i,j)} C_n(Delta X_(k)) P(X_(k), X_(i)) P(X_(k), X_(j)).
template <typename Scalar>
Matrix<Scalar> kernel_matrix(const TransformEstimate<Scalar>& est) {
  const auto m = est.size();
  Vector<Scalar> cumulative(m);
  Scalar acc = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    acc += est.c_jumps(k) / (est.prodint(k) * est.prodint(k));
    cumulative(k) = acc;
  }
  Matrix<Scalar> out(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      out(i, j) = est.prodint(i) * est.prodint(j) * cumulative(std::min(i, j));
    }
  }
  return out;
}

/// K_n(t, t) on the grid, O(m).
template <typename Scalar>
Vector<Scalar> kernel_diagonal(const TransformEstimate<Scalar>& est) {
  const auto m = est.size();
  Vector<Scalar> out(m);
  Scalar acc = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    acc += est.c_jumps(k) / (est.prodint(k) * est.prodint(k));
    out(k) = est.prodint(k) * est.prodint(k) * acc;
  }
  return out;
}

/// K_n r without materialising K_n:
/// (K r)_i = P_i sum_{k <= i} (C_k / P_k^2) sum_{j >= k} P_j r_j.
template <typename Scalar>
Matrix<Scalar> apply_kernel(const TransformEstimate<Scalar>& est, const Matrix<Scalar>& r) {
  const auto m = est.size();
  const auto d = r.cols();
  Matrix<Scalar> tail(m, d);
  Vector<Scalar> acc = Vector<Scalar>::Zero(d);
  for (Eigen::Index j = m - 1; j >= 0; --j) {
    acc += est.prodint(j) * r.row(j).transpose();
    tail.row(j) = acc.transpose();
  }
  Matrix<Scalar> out(m, d);
  acc.setZero();
  for (Eigen::Index i = 0; i < m; ++i) {
    acc += (est.c_jumps(i) / (est.prodint(i) * est.prodint(i))) * tail.row(i).transpose();
    out.row(i) = (est.prodint(i) * acc).transpose();
  }
  return out;
}

/// Max-norm of (I + K_n B_n) psi - K_n rho_n for the discrete Fredholm equation.
template <typename Scalar>
Scalar fredholm_residual(const FredholmSolution<Scalar>& solution,
                         const TransformEstimate<Scalar>& est) {
  const auto m = est.size();
  if (m == 0) return Scalar(0);
  const Matrix<Scalar> k = kernel_matrix(est);
  const Matrix<Scalar> lhs =
      solution.psi + k * (est.b_jumps.asDiagonal() * solution.psi);
  const Matrix<Scalar> residual = lhs - k * solution.system.rhs;
  return residual.size() > 0 ? residual.cwiseAbs().maxCoeff() : Scalar(0);
}

}  // namespace transqr

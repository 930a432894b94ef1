#include <transqr/multiplier_bands.hpp>
#include <transqr/parallel.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

namespace transqr {

MultiplierDraw draw_multipliers(Eigen::Index n, Eigen::Index d, std::uint64_t seed,
                                std::uint64_t replicate) {
  std::mt19937_64 engine = stream_engine(seed, replicate);
  std::normal_distribution<double> normal;
  MultiplierDraw draw;
  draw.v1.resize(n);
  draw.v2.resize(n);
  draw.v3.resize(d);
  for (Eigen::Index i = 0; i < n; ++i) draw.v1(i) = normal(engine);
  for (Eigen::Index i = 0; i < n; ++i) draw.v2(i) = normal(engine);
  for (Eigen::Index j = 0; j < d; ++j) draw.v3(j) = normal(engine);
  return draw;
}

VectorXd multiplier_w0(const ScoreFit& fit, const SurvivalSample<double>& sample,
                       const VectorXd& v2) {
  const auto& est = fit.transform;
  const auto m = est.size();
  if (v2.size() != sample.size()) throw InputError("multiplier vector has the wrong length");
  VectorXd out(m);
  double acc = 0;
  for (Eigen::Index k = 0; k < m; ++k) {
    double e = 0;
    for (Eigen::Index i : sample.failures_at(k)) e += v2(i);
    acc += e / (est.s_values(k) * est.prodint(k));
    out(k) = est.prodint(k) * acc;
  }
  return out / std::sqrt(static_cast<double>(sample.size()));
}

MatrixXd symmetric_sqrt(const MatrixXd& a) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(a);
  if (eig.info() != Eigen::Success) throw NumericError("eigensolver failed in matrix square root");
  const VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

MultiplierProcess::MultiplierProcess(const ScoreFit& fit, const SurvivalSample<double>& sample,
                                     const GroupCurves& curves, const Partition& partition)
    : fit_(&fit), sample_(&sample), curves_(&curves), partition_(&partition),
      m_(fit.transform.size()) {
  if (fit.phi_mode != PhiMode::efficient) {
    throw InputError("multiplier bands require the efficient weight function");
  }
  if (curves.groups.size() != partition.size() || curves.event_times.size() != m_) {
    throw InputError("group curves do not match the fit");
  }
  for (const GroupCurve& g : curves.groups) {
    if (g.sd.size() != m_ || g.psi2.rows() != m_) {
      throw InputError("group curves are missing the variance stage");
    }
  }
  const auto& est = fit.transform;
  weighted_rho_ = est.event_mass.asDiagonal() *
                  (est.rho - MatrixXd(est.v.asDiagonal() * fit.phi.phi));
  w3_map_ = symmetric_sqrt(fit.sigma1);
}

MatrixXd MultiplierProcess::operator()(const MultiplierDraw& draw) const {
  const ScoreFit& fit = *fit_;
  const auto n = sample_->size();
  const double root_n = std::sqrt(static_cast<double>(n));
  const VectorXd w0 = multiplier_w0(fit, *sample_, draw.v2);
  // W2 + W3 share psi2 Sigma^{-1} (Sigma_1^{1/2} V3 - sum_k W0 rho_phi dN).
  const VectorXd coeff =
      fit.sigma_inverse * (w3_map_ * draw.v3 - weighted_rho_.transpose() * w0);
  MatrixXd out(m_, static_cast<Eigen::Index>(partition_->size()));
  for (std::size_t g = 0; g < partition_->size(); ++g) {
    const GroupCurve& curve = curves_->groups[g];
    VectorXd w1 = VectorXd::Zero(m_);
    double v_sum = 0;
    for (Eigen::Index i : partition_->members(g)) {
      w1 += draw.v1(i) * curves_->subject_cdf.col(i);
      v_sum += draw.v1(i);
    }
    w1 = (w1 - v_sum * curve.cdf) / (root_n * curve.pi_hat);
    out.col(static_cast<Eigen::Index>(g)) =
        w1 + w0.cwiseProduct(curve.psi1) + curve.psi2 * coeff;
  }
  return out;
}

MatrixXd multiplier_process(const ScoreFit& fit, const SurvivalSample<double>& sample,
                            const GroupCurves& curves, const Partition& partition,
                            const MultiplierDraw& draw) {
  return MultiplierProcess(fit, sample, curves, partition)(draw);
}

double upper_order_statistic(std::vector<double> values, double alpha) {
  if (values.empty()) throw InputError("no multiplier replicates");
  if (!(alpha > 0 && alpha < 1)) throw InputError("alpha must lie in (0, 1)");
  const auto count = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(count * (1.0 - alpha) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   values.end());
  return values[rank - 1];
}

CriticalValue critical_value(const ScoreFit& fit, const SurvivalSample<double>& sample,
                             const GroupCurves& curves, const Partition& partition,
                             const BandConfig& config) {
  if (config.replicates < 1) throw InputError("the number of multiplier replicates must be >= 1");
  if (!(config.p_min > 0 && config.p_max < 1 && config.p_min <= config.p_max)) {
    throw InputError("band range must satisfy 0 < p_min <= p_max < 1");
  }
  const MultiplierProcess process(fit, sample, curves, partition);
  const auto m = process.grid_size();
  CriticalValue out;

  // Grid points entering the sup, per group.
  std::vector<std::vector<Eigen::Index>> points(partition.size());
  for (std::size_t g = 0; g < partition.size(); ++g) {
    const GroupCurve& curve = curves.groups[g];
    const double lo = step_quantile(curves.event_times, curve.cdf, config.p_min);
    double hi = step_quantile(curves.event_times, curve.cdf, config.p_max);
    if (std::isnan(lo)) {
      out.warnings.push_back("group '" + curve.label + "' never reaches p_min; excluded from the sup");
      continue;
    }
    if (std::isnan(hi)) {
      out.truncated_groups.push_back(curve.label);
      hi = curves.event_times(m - 1);
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      const double t = curves.event_times(k);
      if (t < lo || t > hi) continue;
      if (curve.sd(k) > 0) {
        points[g].push_back(k);
      } else {
        ++out.excluded_points;
      }
    }
  }
  if (out.excluded_points > 0) {
    out.warnings.push_back(std::to_string(out.excluded_points) +
                           " grid point(s) with zero variance excluded from the sup");
  }
  if (!out.truncated_groups.empty()) {
    out.warnings.push_back("p_max beyond F-hat_D(tau) for some group; sup runs to tau");
  }
  if (config.replicates < 100) {
    out.warnings.push_back("fewer than 100 multiplier replicates");
  }

  out.sups.assign(static_cast<std::size_t>(config.replicates), 0.0);
  const auto n = sample.size();
  const auto d = sample.dim();
  parallel_for(out.sups.size(), config.threads, [&](std::size_t r) {
    const MultiplierDraw draw = draw_multipliers(n, d, config.seed, r);
    const MatrixXd w = process(draw);
    double sup = 0;
    for (std::size_t g = 0; g < points.size(); ++g) {
      const GroupCurve& curve = curves.groups[g];
      for (Eigen::Index k : points[g]) {
        sup = std::max(sup, std::abs(w(k, static_cast<Eigen::Index>(g))) / curve.sd(k));
      }
    }
    out.sups[r] = sup;
  });
  out.u_star = upper_order_statistic(out.sups, config.alpha);
  return out;
}

BandResult simultaneous_bands(const ScoreFit& fit, const SurvivalSample<double>& sample,
                              const GroupCurves& curves, const Partition& partition,
                              const std::vector<double>& p_grid, const BandConfig& config) {
  BandResult out;
  out.critical = critical_value(fit, sample, curves, partition, config);
  out.bands = confidence_set(curves, p_grid, out.critical.u_star, config.transform);
  out.bands.alpha = config.alpha;
  return out;
}

}  // namespace transqr

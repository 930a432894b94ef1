#pragma once

#include <transqr/common.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <string_view>

namespace transqr {

enum class FamilyId { proportional_hazards, proportional_odds };

/// Largest |theta^T z| passed to exp(); beyond it the linear predictor is clamped.
inline constexpr double kMaxLinearPredictor = 700.0;

/// Log-hazard l = log alpha together with its x (prime) and theta (dot) derivatives.
template <typename Scalar>
struct HazardDerivatives {
  Scalar alpha{};
  Scalar log_alpha{};
  Scalar d_x{};   // l'
  Scalar d_xx{};  // l''
  Vector<Scalar> d_theta;        // l-dot
  Vector<Scalar> d_theta_x;      // l-dot'
  Matrix<Scalar> d_theta_theta;  // l-double-dot
};

/// Parametric core alpha(x, theta, z) of a transformation model.
///
/// Member functions assume validated arguments; the free functions below
/// (`hazard`, `log_hazard_derivatives`, `conditional_cdf`, ...) check
/// dimensions, finiteness and ranges before dispatching.
template <typename Scalar>
class HazardFamily {
 public:
  using VectorType = Vector<Scalar>;

  virtual ~HazardFamily() = default;

  virtual std::string name() const = 0;

  virtual Scalar hazard(Scalar x, const VectorType& theta, const VectorType& z) const = 0;

  virtual HazardDerivatives<Scalar> derivatives(Scalar x, const VectorType& theta,
                                                const VectorType& z) const = 0;

  /// Hot path used by the solvers: returns alpha, writes l' and l-dot.
  virtual Scalar first_order(Scalar x, const VectorType& theta, const VectorType& z, Scalar& d_x,
                             Eigen::Ref<VectorType> d_theta) const = 0;

  /// F(x, theta | z).
  virtual Scalar cdf(Scalar x, const VectorType& theta, const VectorType& z) const = 0;

  /// f = dF/dx.
  virtual Scalar density(Scalar x, const VectorType& theta, const VectorType& z) const = 0;

  /// F-dot = dF/dtheta.
  virtual VectorType cdf_theta(Scalar x, const VectorType& theta, const VectorType& z) const = 0;

  /// F, f and F-dot in one call; F-dot is written into `cdf_dot`.
  virtual void cdf_all(Scalar x, const VectorType& theta, const VectorType& z, Scalar& cdf_value,
                       Scalar& density_value, Eigen::Ref<VectorType> cdf_dot) const = 0;

  /// Baseline inverse G^{-1}(p); only scale families define it.
  virtual Scalar baseline_quantile(Scalar p) const = 0;

  /// True when the linear predictor theta^T z exceeds the clamp range.
  virtual bool clamps(const VectorType& /*theta*/, const VectorType& /*z*/) const { return false; }
};

/// Scale regression family F(x, theta | z) = G(x e^{theta^T z}).
///
/// Subclasses supply the baseline G through its log-hazard k(y) = log h0(y)
/// and first two derivatives, the cdf G, density g, and quantile G^{-1}.
/// With y = x e^eta:
///   alpha = e^eta h0(y),        l' = e^eta k'(y),   l'' = e^{2 eta} k''(y)
///   l-dot = z (1 + y k'(y)),    l-dot' = z e^eta (k'(y) + y k''(y))
///   l-ddot = z z^T (y k'(y) + y^2 k''(y))
template <typename Scalar>
class ScaleFamily : public HazardFamily<Scalar> {
 public:
  using VectorType = Vector<Scalar>;

  struct BaselineLogHazard {
    Scalar value;  // k(y)
    Scalar d1;     // k'(y)
    Scalar d2;     // k''(y)
  };

  virtual BaselineLogHazard baseline_log_hazard(Scalar y) const = 0;
  virtual Scalar baseline_cdf(Scalar y) const = 0;
  virtual Scalar baseline_density(Scalar y) const = 0;

  static Scalar linear_predictor(const VectorType& theta, const VectorType& z) {
    using std::clamp;
    const Scalar eta = theta.dot(z);
    return clamp(eta, Scalar(-kMaxLinearPredictor), Scalar(kMaxLinearPredictor));
  }

  bool clamps(const VectorType& theta, const VectorType& z) const override {
    using std::abs;
    return abs(theta.dot(z)) > Scalar(kMaxLinearPredictor);
  }

  Scalar hazard(Scalar x, const VectorType& theta, const VectorType& z) const override {
    using std::exp;
    const Scalar e = exp(linear_predictor(theta, z));
    return e * exp(baseline_log_hazard(x * e).value);
  }

  HazardDerivatives<Scalar> derivatives(Scalar x, const VectorType& theta,
                                        const VectorType& z) const override {
    using std::exp;
    const Scalar eta = linear_predictor(theta, z);
    const Scalar e = exp(eta);
    const Scalar y = x * e;
    const BaselineLogHazard k = baseline_log_hazard(y);
    HazardDerivatives<Scalar> out;
    out.log_alpha = eta + k.value;
    out.alpha = exp(out.log_alpha);
    out.d_x = e * k.d1;
    out.d_xx = e * e * k.d2;
    out.d_theta = z * (Scalar(1) + y * k.d1);
    out.d_theta_x = z * (e * (k.d1 + y * k.d2));
    out.d_theta_theta = (z * z.transpose()) * (y * k.d1 + y * y * k.d2);
    return out;
  }

  Scalar first_order(Scalar x, const VectorType& theta, const VectorType& z, Scalar& d_x,
                     Eigen::Ref<VectorType> d_theta) const override {
    using std::exp;
    const Scalar eta = linear_predictor(theta, z);
    const Scalar e = exp(eta);
    const Scalar y = x * e;
    const BaselineLogHazard k = baseline_log_hazard(y);
    d_x = e * k.d1;
    d_theta = z * (Scalar(1) + y * k.d1);
    return exp(eta + k.value);
  }

  Scalar cdf(Scalar x, const VectorType& theta, const VectorType& z) const override {
    using std::exp;
    return baseline_cdf(x * exp(linear_predictor(theta, z)));
  }

  Scalar density(Scalar x, const VectorType& theta, const VectorType& z) const override {
    using std::exp;
    const Scalar e = exp(linear_predictor(theta, z));
    return e * baseline_density(x * e);
  }

  VectorType cdf_theta(Scalar x, const VectorType& theta, const VectorType& z) const override {
    using std::exp;
    const Scalar y = x * exp(linear_predictor(theta, z));
    return z * (baseline_density(y) * y);
  }

  void cdf_all(Scalar x, const VectorType& theta, const VectorType& z, Scalar& cdf_value,
               Scalar& density_value, Eigen::Ref<VectorType> cdf_dot) const override {
    using std::exp;
    const Scalar e = exp(linear_predictor(theta, z));
    const Scalar y = x * e;
    const Scalar g = baseline_density(y);
    cdf_value = baseline_cdf(y);
    density_value = e * g;
    cdf_dot = z * (g * y);
  }
};

/// G exponential: alpha = e^{theta^T z}, constant in x.
template <typename Scalar>
class ProportionalHazards final : public ScaleFamily<Scalar> {
 public:
  using Base = ScaleFamily<Scalar>;

  std::string name() const override { return "proportional_hazards"; }

  typename Base::BaselineLogHazard baseline_log_hazard(Scalar) const override {
    return {Scalar(0), Scalar(0), Scalar(0)};
  }
  Scalar baseline_cdf(Scalar y) const override {
    using std::expm1;
    return -expm1(-y);
  }
  Scalar baseline_density(Scalar y) const override {
    using std::exp;
    return exp(-y);
  }
  Scalar baseline_quantile(Scalar p) const override {
    using std::log1p;
    return -log1p(-p);
  }
};

/// G standard log-logistic: alpha = e^{theta^T z} / (1 + e^{theta^T z} x).
template <typename Scalar>
class ProportionalOdds final : public ScaleFamily<Scalar> {
 public:
  using Base = ScaleFamily<Scalar>;

  std::string name() const override { return "proportional_odds"; }

  typename Base::BaselineLogHazard baseline_log_hazard(Scalar y) const override {
    using std::log1p;
    const Scalar r = Scalar(1) / (Scalar(1) + y);
    return {-log1p(y), -r, r * r};
  }
  Scalar baseline_cdf(Scalar y) const override { return y / (Scalar(1) + y); }
  Scalar baseline_density(Scalar y) const override {
    const Scalar r = Scalar(1) / (Scalar(1) + y);
    return r * r;
  }
  Scalar baseline_quantile(Scalar p) const override { return p / (Scalar(1) - p); }
};

template <typename Scalar = double>
std::unique_ptr<HazardFamily<Scalar>> make_family(FamilyId id) {
  switch (id) {
    case FamilyId::proportional_hazards:
      return std::make_unique<ProportionalHazards<Scalar>>();
    case FamilyId::proportional_odds:
      return std::make_unique<ProportionalOdds<Scalar>>();
  }
  throw InputError("unknown hazard family");
}

inline FamilyId parse_family(std::string_view s) {
  if (s == "ph" || s == "proportional_hazards") return FamilyId::proportional_hazards;
  if (s == "po" || s == "proportional_odds") return FamilyId::proportional_odds;
  throw InputError("unknown family '" + std::string(s) + "' (expected ph or po)");
}

inline std::string family_short_name(FamilyId id) {
  return id == FamilyId::proportional_hazards ? "ph" : "po";
}

// ---------------------------------------------------------------------------
// Checked entry points.

namespace detail {

template <typename Scalar>
void check_arguments(Scalar x, const Vector<Scalar>& theta, const Vector<Scalar>& z) {
  using std::isfinite;
  if (theta.size() != z.size()) {
    throw InputError("dimension mismatch: theta has " + std::to_string(theta.size()) +
                     " components, z has " + std::to_string(z.size()));
  }
  if (!isfinite(x) || !theta.allFinite() || !z.allFinite()) {
    throw InputError("non-finite hazard argument");
  }
  if (x < Scalar(0)) throw InputError("hazard argument x must be nonnegative");
}

}  // namespace detail

template <typename Scalar>
Scalar hazard(const HazardFamily<Scalar>& family, Scalar x, const Vector<Scalar>& theta,
              const Vector<Scalar>& z) {
  detail::check_arguments(x, theta, z);
  return family.hazard(x, theta, z);
}

template <typename Scalar>
HazardDerivatives<Scalar> log_hazard_derivatives(const HazardFamily<Scalar>& family, Scalar x,
                                                 const Vector<Scalar>& theta,
                                                 const Vector<Scalar>& z) {
  detail::check_arguments(x, theta, z);
  return family.derivatives(x, theta, z);
}

template <typename Scalar>
Scalar conditional_cdf(const HazardFamily<Scalar>& family, Scalar x, const Vector<Scalar>& theta,
                       const Vector<Scalar>& z) {
  detail::check_arguments(x, theta, z);
  return family.cdf(x, theta, z);
}

template <typename Scalar>
Scalar conditional_density(const HazardFamily<Scalar>& family, Scalar x,
                           const Vector<Scalar>& theta, const Vector<Scalar>& z) {
  detail::check_arguments(x, theta, z);
  return family.density(x, theta, z);
}

template <typename Scalar>
Scalar baseline_quantile(const HazardFamily<Scalar>& family, Scalar p) {
  if (!(p > Scalar(0) && p < Scalar(1))) {
    throw InputError("baseline_quantile: p must lie in (0, 1)");
  }
  return family.baseline_quantile(p);
}

}  // namespace transqr

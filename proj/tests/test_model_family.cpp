#include <transqr/model_family.hpp>

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace transqr;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

const ProportionalOdds<double> po;
const ProportionalHazards<double> ph;

}  // namespace

TEST_CASE("hazard values") {
  CHECK(hazard(po, 0.0, vec({0}), vec({3.7})) == doctest::Approx(1.0));
  CHECK(hazard(po, 1.0, vec({0}), vec({1})) == doctest::Approx(0.5));
  CHECK(hazard(ph, 7.3, vec({std::log(2.0)}), vec({1})) == doctest::Approx(2.0).epsilon(1e-14));
  // e^{eta} / (1 + e^{eta} x) for PO
  const double eta = 0.3 * 1.5 - 0.2 * 0.7;
  CHECK(hazard(po, 2.0, vec({0.3, -0.2}), vec({1.5, 0.7})) ==
        doctest::Approx(std::exp(eta) / (1 + std::exp(eta) * 2.0)).epsilon(1e-14));
}

TEST_CASE("hazard rejects bad input") {
  CHECK_THROWS_AS(hazard(po, 1.0, vec({0, 1}), vec({1})), InputError);
  CHECK_THROWS_AS(hazard(po, -1.0, vec({0}), vec({1})), InputError);
  CHECK_THROWS_AS(hazard(po, std::numeric_limits<double>::quiet_NaN(), vec({0}), vec({1})), InputError);
  CHECK_THROWS_AS(hazard(po, 1.0, vec({std::numeric_limits<double>::infinity()}), vec({1})), InputError);
}

TEST_CASE("log-hazard derivatives at closed-form points") {
  const auto d = log_hazard_derivatives(po, 1.0, vec({0}), vec({1}));
  CHECK(d.d_x == doctest::Approx(-0.5));
  CHECK(d.d_theta(0) == doctest::Approx(0.5));
  // PO: l' = -alpha and l-dot = z e^{-theta^T z} alpha
  const auto e = log_hazard_derivatives(po, 2.5, vec({0.4}), vec({1.3}));
  CHECK(e.d_x == doctest::Approx(-e.alpha).epsilon(1e-14));
  CHECK(e.d_theta(0) == doctest::Approx(1.3 * std::exp(-0.4 * 1.3) * e.alpha).epsilon(1e-14));

  const auto h = log_hazard_derivatives(ph, 4.0, vec({0}), vec({2}));
  CHECK(h.d_x == 0.0);
  CHECK(h.d_theta(0) == doctest::Approx(2.0));
  CHECK(h.d_xx == 0.0);
}

TEST_CASE("log-hazard derivatives match central differences") {
  const double hx = 1e-5;
  const auto at = [&](const HazardFamily<double>& f, double x, const VectorXd& th,
                      const VectorXd& z) { return std::log(f.hazard(x, th, z)); };
  const auto d = log_hazard_derivatives(po, 1.0, vec({0}), vec({1}));
  CHECK(std::abs(d.d_x - (at(po, 1 + hx, vec({0}), vec({1})) - at(po, 1 - hx, vec({0}), vec({1}))) /
                             (2 * hx)) < 1e-8);

  for (const HazardFamily<double>* f : {static_cast<const HazardFamily<double>*>(&po),
                                        static_cast<const HazardFamily<double>*>(&ph)}) {
    for (double x : {0.1, 0.9, 3.0}) {
      for (double t0 : {-0.7, 0.0, 0.5}) {
        const VectorXd th = vec({t0, 0.25});
        const VectorXd z = vec({1.2, -0.8});
        const auto der = f->derivatives(x, th, z);
        const double h = 1e-6;
        const double fd_x = (at(*f, x + h, th, z) - at(*f, x - h, th, z)) / (2 * h);
        CHECK(std::abs(der.d_x - fd_x) <= 1e-6 * std::max(1.0, std::abs(fd_x)));
        const double fd_xx =
            (f->derivatives(x + h, th, z).d_x - f->derivatives(x - h, th, z).d_x) / (2 * h);
        CHECK(std::abs(der.d_xx - fd_xx) <= 1e-6 * std::max(1.0, std::abs(fd_xx)));
        for (int j = 0; j < 2; ++j) {
          VectorXd up = th, down = th;
          up(j) += h;
          down(j) -= h;
          const double fd = (at(*f, x, up, z) - at(*f, x, down, z)) / (2 * h);
          CHECK(std::abs(der.d_theta(j) - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
          const double fd_tx =
              (f->derivatives(x + h, th, z).d_theta(j) - f->derivatives(x - h, th, z).d_theta(j)) /
              (2 * h);
          CHECK(std::abs(der.d_theta_x(j) - fd_tx) <= 1e-6 * std::max(1.0, std::abs(fd_tx)));
          const VectorXd fd_tt =
              (f->derivatives(x, up, z).d_theta - f->derivatives(x, down, z).d_theta) / (2 * h);
          CHECK((der.d_theta_theta.col(j) - fd_tt).cwiseAbs().maxCoeff() <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("first_order agrees with the full derivative set") {
  VectorXd d_theta(2);
  double d_x = 0;
  const VectorXd th = vec({0.3, -1.1});
  const VectorXd z = vec({0.5, 2.0});
  const double alpha = po.first_order(1.7, th, z, d_x, d_theta);
  const auto full = po.derivatives(1.7, th, z);
  CHECK(alpha == doctest::Approx(full.alpha).epsilon(1e-15));
  CHECK(d_x == doctest::Approx(full.d_x).epsilon(1e-15));
  CHECK((d_theta - full.d_theta).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("conditional cdf") {
  CHECK(conditional_cdf(po, 1.0, vec({0}), vec({5})) == doctest::Approx(0.5));
  CHECK(conditional_cdf(po, 0.0, vec({0.3}), vec({5})) == 0.0);
  CHECK(conditional_cdf(ph, 0.0, vec({0.3}), vec({5})) == 0.0);
  CHECK(conditional_cdf(ph, std::log(2.0), vec({0}), vec({1})) == doctest::Approx(0.5));
  CHECK_THROWS_AS(conditional_cdf(ph, -0.1, vec({0}), vec({1})), InputError);
}

TEST_CASE("cumulative hazard closed forms agree") {
  // -log(1 - F) against the integral of alpha: x e^eta (PH), log(1 + x e^eta) (PO)
  for (double x : {0.0, 0.01, 0.5, 2.0, 40.0}) {
    for (double eta : {-2.0, 0.0, 1.3}) {
      const VectorXd th = vec({eta});
      const VectorXd z = vec({1.0});
      const double e = std::exp(eta);
      // 1 - F underflows relative to 1 once x e^eta passes ~36
      if (x * e < 30) {
        CHECK(std::abs(-std::log1p(-ph.cdf(x, th, z)) - x * e) <= 1e-12 * std::max(1.0, x * e));
      }
      CHECK(std::abs(-std::log1p(-po.cdf(x, th, z)) - std::log1p(x * e)) <= 1e-12);
    }
  }
}

TEST_CASE("cdf is nondecreasing, within [0, 1), density is its derivative") {
  const VectorXd th = vec({0.8});
  const VectorXd z = vec({-0.4});
  for (const HazardFamily<double>* f : {static_cast<const HazardFamily<double>*>(&po),
                                        static_cast<const HazardFamily<double>*>(&ph)}) {
    double prev = 0;
    for (double x = 0; x < 30; x += 0.37) {
      const double v = f->cdf(x, th, z);
      CHECK(v >= prev);
      CHECK(v < 1.0);
      prev = v;
      const double h = 1e-6;
      if (x > h) {
        const double fd = (f->cdf(x + h, th, z) - f->cdf(x - h, th, z)) / (2 * h);
        CHECK(f->density(x, th, z) == doctest::Approx(fd).epsilon(1e-6));
      }
      const double fd_t = (f->cdf(x, vec({0.8 + h}), z) - f->cdf(x, vec({0.8 - h}), z)) / (2 * h);
      CHECK(f->cdf_theta(x, th, z)(0) == doctest::Approx(fd_t).epsilon(1e-6).scale(1e-3));
    }
  }
}

TEST_CASE("baseline quantile") {
  CHECK(baseline_quantile(po, 0.5) == doctest::Approx(1.0));
  CHECK(baseline_quantile(ph, 1 - std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(baseline_quantile(po, 0.25) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(baseline_quantile(po, 0.0), InputError);
  CHECK_THROWS_AS(baseline_quantile(po, 1.0), InputError);
  CHECK_THROWS_AS(baseline_quantile(ph, -0.2), InputError);
}

TEST_CASE("PO hazard is bounded on compact ranges with bounded covariates") {
  // alpha between e^{-|eta|}/(1 + e^{|eta|} x_max) and e^{|eta|}
  const double bound = 2.0;
  const double x_max = 10.0;
  const double m1 = std::exp(-bound) / (1 + std::exp(bound) * x_max);
  const double m2 = std::exp(bound);
  for (double z = -1; z <= 1; z += 0.25) {
    for (double x = 0; x <= x_max; x += 0.5) {
      const double a = po.hazard(x, vec({bound}), vec({z}));
      CHECK(a >= m1);
      CHECK(a <= m2);
    }
  }
}

TEST_CASE("linear predictor clamp is reported") {
  CHECK(po.clamps(vec({800}), vec({1})));
  CHECK_FALSE(po.clamps(vec({699}), vec({1})));
  CHECK(std::isfinite(po.hazard(1.0, vec({800}), vec({1}))));
}

TEST_CASE("family lookup") {
  CHECK(parse_family("ph") == FamilyId::proportional_hazards);
  CHECK(parse_family("po") == FamilyId::proportional_odds);
  CHECK_THROWS_AS(parse_family("weibull"), InputError);
  CHECK(make_family(FamilyId::proportional_odds)->name() == "proportional_odds");
}

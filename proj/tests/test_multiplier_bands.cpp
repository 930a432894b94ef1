#include <transqr/multiplier_bands.hpp>

#include <doctest.h>

#include <numeric>

#include "oracles.hpp"

using namespace transqr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const ProportionalOdds<double> po;
const ProportionalHazards<double> ph;

struct Fitted {
  SurvivalSample<double> sample;
  ScoreFit fit;
  Partition partition;
  GroupCurves curves;
};

Fitted po_example(int n, std::uint64_t seed) {
  auto d = oracle::simulate_po(n, (VectorXd(2) << 1.0, -0.5).finished(), seed);
  SurvivalSample<double> s(d.time, d.status, d.z);
  auto f = fit(s, po, std::nullopt);
  auto part = Partition::from_predicates(
      s, {"z0", "z1"},
      {[](const VectorXd& z) { return z(0) < 0.5; }, [](const VectorXd& z) { return z(0) >= 0.5; }});
  auto curves = grouped_curves(f, s, po, part);
  return {std::move(s), std::move(f), std::move(part), std::move(curves)};
}

const Fitted& shared_example() {
  static const Fitted ex = po_example(250, 31);
  return ex;
}

}  // namespace

TEST_CASE("multiplier draws are reproducible and independent across replicates") {
  const auto a = draw_multipliers(10, 2, 42, 3);
  const auto b = draw_multipliers(10, 2, 42, 3);
  const auto c = draw_multipliers(10, 2, 42, 4);
  const auto e = draw_multipliers(10, 2, 43, 3);
  CHECK(a.v1 == b.v1);
  CHECK(a.v2 == b.v2);
  CHECK(a.v3 == b.v3);
  CHECK(a.v1 != c.v1);
  CHECK(a.v1 != e.v1);
  CHECK(a.v3.size() == 2);
}

TEST_CASE("zero multipliers give a zero process") {
  const auto& ex = shared_example();
  MultiplierDraw zero{VectorXd::Zero(250), VectorXd::Zero(250), VectorXd::Zero(2)};
  CHECK(multiplier_process(ex.fit, ex.sample, ex.curves, ex.partition, zero).isZero());
}

TEST_CASE("the process is linear in the multipliers") {
  const auto& ex = shared_example();
  const MultiplierProcess w(ex.fit, ex.sample, ex.curves, ex.partition);
  const auto a = draw_multipliers(250, 2, 1, 0);
  const auto b = draw_multipliers(250, 2, 1, 1);
  const MultiplierDraw mix{2 * a.v1 - 3 * b.v1, 2 * a.v2 - 3 * b.v2, 2 * a.v3 - 3 * b.v3};
  const MatrixXd lhs = w(mix);
  const MatrixXd rhs = 2 * w(a) - 3 * w(b);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12 * rhs.cwiseAbs().maxCoeff());
}

TEST_CASE("PH with a single event: W0 = V2 / (sqrt(n) S)") {
  VectorXd t(3);
  t << 1, 2, 3;
  MatrixXd z(3, 1);
  z << 0.2, -0.1, 0.4;
  const SurvivalSample<double> s(t, {1, 0, 0}, z, 2.5);
  ScoreFit f;
  f.n = 3;
  f.theta_hat = VectorXd::Constant(1, 0.7);
  f.transform = solve_transform(s, ph, f.theta_hat);
  REQUIRE(f.transform.size() == 1);
  VectorXd v2(3);
  v2 << 1.3, -5, 7;
  const double s_value = (std::exp(0.7 * 0.2) + std::exp(-0.07) + std::exp(0.28)) / 3;
  CHECK(multiplier_w0(f, s, v2)(0) == doctest::Approx(1.3 / (std::sqrt(3.0) * s_value)));
  CHECK_THROWS_AS(multiplier_w0(f, s, VectorXd::Zero(2)), InputError);
}

TEST_CASE("multiplier variances match the plug-in quantities") {
  const auto& ex = shared_example();
  const MultiplierProcess w(ex.fit, ex.sample, ex.curves, ex.partition);
  const int draws = 4000;
  const auto m = ex.fit.transform.size();
  VectorXd w0_sq = VectorXd::Zero(m);
  MatrixXd w_sq = MatrixXd::Zero(m, 2);
  for (int r = 0; r < draws; ++r) {
    const auto draw = draw_multipliers(250, 2, 2024, static_cast<std::uint64_t>(r));
    w0_sq += multiplier_w0(ex.fit, ex.sample, draw.v2).cwiseAbs2();
    w_sq += w(draw).cwiseAbs2();
  }
  w0_sq /= draws;
  w_sq /= draws;
  const VectorXd k_diag = kernel_diagonal(ex.fit.transform);
  // away from the first few events, where a handful of failures dominate
  for (Eigen::Index k = m / 10; k < m; k += 4) {
    CHECK(w0_sq(k) / k_diag(k) == doctest::Approx(1.0).epsilon(0.1));
    for (Eigen::Index g = 0; g < 2; ++g) {
      const double sd = ex.curves.groups[static_cast<std::size_t>(g)].sd(k);
      CHECK(w_sq(k, g) / (sd * sd) == doctest::Approx(1.0).epsilon(0.1));
    }
  }
}

TEST_CASE("order statistic") {
  CHECK(upper_order_statistic({3.5}, 0.05) == 3.5);
  std::vector<double> values(1000);
  std::iota(values.begin(), values.end(), 1.0);
  std::reverse(values.begin(), values.end());
  CHECK(upper_order_statistic(values, 0.05) == 950.0);
  CHECK(upper_order_statistic(values, 0.10) == 900.0);
  std::vector<double> few{5, 1, 4, 2, 3};
  CHECK(upper_order_statistic(few, 0.5) == 3.0);  // ceil(2.5) = 3rd smallest
  CHECK_THROWS_AS(upper_order_statistic({}, 0.05), InputError);
  CHECK_THROWS_AS(upper_order_statistic({1.0}, 1.0), InputError);
}

TEST_CASE("symmetric square root") {
  MatrixXd a(2, 2);
  a << 4, 1, 1, 3;
  const MatrixXd r = symmetric_sqrt(a);
  CHECK((r * r - a).cwiseAbs().maxCoeff() < 1e-13);
  MatrixXd b(2, 2);
  b << 1, 1, 1, 1 - 1e-14;  // rounding makes it slightly indefinite
  CHECK(symmetric_sqrt(b).allFinite());
}

TEST_CASE("u* = z(alpha) reproduces the pointwise intervals") {
  const auto& ex = shared_example();
  const auto grid = default_p_grid(0.2, 0.6, 21);
  const auto pw = pointwise_ci(ex.curves, grid, 0.05);
  const auto cs = confidence_set(ex.curves, grid, normal_critical(0.05), ProbabilityTransform{});
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const auto& a = pw.groups[g].points[j];
      const auto& b = cs.groups[g].points[j];
      CHECK(a.lower == b.lower);
      CHECK(a.upper == b.upper);
    }
  }
}

TEST_CASE("critical value: determinism, threads and band width") {
  const auto& ex = shared_example();
  BandConfig cfg;
  cfg.replicates = 400;
  cfg.seed = 77;
  const auto a = critical_value(ex.fit, ex.sample, ex.curves, ex.partition, cfg);
  const auto b = critical_value(ex.fit, ex.sample, ex.curves, ex.partition, cfg);
  cfg.threads = 4;
  const auto c = critical_value(ex.fit, ex.sample, ex.curves, ex.partition, cfg);
  CHECK(a.sups == b.sups);
  CHECK(a.sups == c.sups);
  CHECK(a.u_star == c.u_star);
  // a sup over many points exceeds the pointwise critical value
  CHECK(a.u_star > normal_critical(0.05));
  CHECK(a.u_star < 5.0);
  CHECK(a.warnings.empty());

  const auto grid = default_p_grid();
  const auto bands = simultaneous_bands(ex.fit, ex.sample, ex.curves, ex.partition, grid, cfg);
  const auto pw = pointwise_ci(ex.curves, grid, 0.05);
  for (std::size_t g = 0; g < 2; ++g) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      const auto& band = bands.bands.groups[g].points[j];
      const auto& point = pw.groups[g].points[j];
      if (!band.in_range) continue;
      CHECK(band.lower <= point.lower);
      CHECK(band.upper >= point.upper);
      CHECK(band.lower <= band.estimate);
      CHECK(band.upper >= band.estimate);
    }
  }
}

TEST_CASE("critical value warnings and validation") {
  const auto& ex = shared_example();
  BandConfig cfg;
  cfg.replicates = 20;
  const auto few = critical_value(ex.fit, ex.sample, ex.curves, ex.partition, cfg);
  CHECK(few.sups.size() == 20);
  CHECK(few.warnings.size() == 1);

  cfg.replicates = 50;
  cfg.p_max = 0.99;  // beyond F-hat_D(tau)
  const auto trunc = critical_value(ex.fit, ex.sample, ex.curves, ex.partition, cfg);
  CHECK_FALSE(trunc.truncated_groups.empty());

  cfg.replicates = 0;
  CHECK_THROWS_AS(critical_value(ex.fit, ex.sample, ex.curves, ex.partition, cfg), InputError);
  cfg.replicates = 10;
  cfg.p_min = 0.8;
  cfg.p_max = 0.3;
  CHECK_THROWS_AS(critical_value(ex.fit, ex.sample, ex.curves, ex.partition, cfg), InputError);
}

TEST_CASE("bands need the efficient weight function") {
  auto d = oracle::simulate_po(80, VectorXd::Constant(1, 1.0), 2);
  const SurvivalSample<double> s(d.time, d.status, d.z);
  const auto eff = fit(s, po, std::nullopt);
  const auto part = Partition::whole_sample(80);
  const auto curves = grouped_curves(eff, s, po, part);
  FitConfig cfg;
  cfg.phi_mode = PhiMode::zero;
  const auto other = fit(s, po, std::nullopt, cfg);
  CHECK_THROWS_AS(MultiplierProcess(other, s, curves, part), InputError);
}

#include <transqr/transform_solver.hpp>

#include <doctest.h>

#include "oracles.hpp"

using namespace transqr;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Two uncensored times 1 < 2 with z = 0, 1; tau = 2 so both are on the grid.
SurvivalSample<double> two_point() {
  VectorXd t(2);
  t << 1, 2;
  MatrixXd z(2, 1);
  z << 0, 1;
  return {t, {1, 1}, z, 2.0};
}

const ProportionalOdds<double> po;
const ProportionalHazards<double> ph;

SurvivalSample<double> from(const oracle::Data& d, std::optional<double> tau = std::nullopt) {
  return {d.time, d.status, d.z, tau};
}

}  // namespace

TEST_CASE("sample grid, ties and risk sets") {
  VectorXd t(6);
  t << 3, 1, 2, 2, 5, 2;
  MatrixXd z = MatrixXd::Zero(6, 1);
  const SurvivalSample<double> s(t, {1, 0, 1, 1, 1, 0}, z);
  // distinct uncensored times 2, 3, 5; default tau is the last with >= 2 at risk
  CHECK(s.tau() == 3.0);
  REQUIRE(s.event_count() == 2);
  CHECK(s.event_times()(0) == 2.0);
  CHECK(s.event_multiplicity()[0] == 2);
  // a censored time tied with an event time is at risk there
  CHECK(s.risk_count(0) == 5);
  CHECK(s.risk_count(1) == 2);
  CHECK(s.grid_index(2.5) == 0);
  CHECK(s.grid_index(1.0) == -1);
}

TEST_CASE("sample validation") {
  MatrixXd z = MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(SurvivalSample<double>(VectorXd::Ones(2), {0, 0}, z), InputError);
  CHECK_THROWS_AS(SurvivalSample<double>(VectorXd::Constant(2, -1.0), {1, 1}, z), InputError);
  CHECK_THROWS_AS(SurvivalSample<double>(VectorXd::Ones(2), {1, 2}, z), InputError);
  CHECK_THROWS_AS(SurvivalSample<double>(VectorXd::Ones(2), {1, 1}, z, 5.0), InputError);
  MatrixXd big = MatrixXd::Constant(2, 1, 50.0);
  CHECK_THROWS_AS(SurvivalSample<double>(VectorXd::Ones(2), {1, 1}, big, std::nullopt, 10.0),
                  InputError);
}

TEST_CASE("two-point data: hand recursion") {
  const auto s = two_point();
  SUBCASE("PH at theta = 0 is Nelson-Aalen") {
    const auto est = solve_transform(s, ph, VectorXd(VectorXd::Zero(1)));
    CHECK(est.gamma(0) == doctest::Approx(0.5));
    CHECK(est.gamma(1) == doctest::Approx(1.5));
    // Gamma-dot(1) = -(mean z over the risk set) (1/2) / 1^2
    CHECK(est.gamma_dot(0, 0) == doctest::Approx(-0.25));
    CHECK(est.prodint.isOnes());
    CHECK(est.b_jumps.isZero());
    CHECK(est.rho.isZero());
    CHECK(est.v.isZero());
  }
  SUBCASE("PO at theta = 0") {
    const auto est = solve_transform(s, po, VectorXd(VectorXd::Zero(1)));
    CHECK(est.gamma(0) == doctest::Approx(0.5));
    CHECK(est.gamma(1) == doctest::Approx(2.0));
    // S' = -1 at t = 1 (C = 1/2), S' = -2/9 at t = 2 (C = 9/2)
    CHECK(est.c_jumps(0) == doctest::Approx(0.5));
    CHECK(est.c_jumps(1) == doctest::Approx(4.5));
    CHECK(est.prodint(0) == doctest::Approx(1.5));
    CHECK(est.prodint(1) == doctest::Approx(3.0));
    CHECK(est.prodint_between(0, 1) == doctest::Approx(2.0));
    // Gamma-dot(1) = -1/4, Gamma-dot(2) = -1/4 - (2/9 + 2/9 * 1/4) * 9/2
    CHECK(est.gamma_dot(0, 0) == doctest::Approx(-0.25));
    CHECK(est.gamma_dot(1, 0) == doctest::Approx(-1.5));
    // singleton risk set at t = 2 has no spread
    CHECK(est.v(1) == doctest::Approx(0.0));
    CHECK(est.b_jumps(1) == doctest::Approx(0.0));
  }
  SUBCASE("PO Gamma-dot against central differences") {
    const double h = 1e-5;
    const auto est = solve_transform(s, po, VectorXd(VectorXd::Zero(1)));
    const VectorXd fd = oracle::central_difference(
        [&](double e) { return solve_gamma(s, po, VectorXd(VectorXd::Constant(1, e))).gamma; }, h);
    CHECK((est.gamma_dot.col(0) - fd).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("no events before tau leaves Gamma at zero") {
  VectorXd t(3);
  t << 1, 2, 3;
  const SurvivalSample<double> s(t, {0, 0, 1}, MatrixXd::Zero(3, 1), 2.0);
  const auto est = solve_transform(s, po, VectorXd(VectorXd::Zero(1)));
  CHECK(est.size() == 0);
  CHECK(est.gamma_at(1.5) == 0.0);
}

TEST_CASE("PH at theta = 0 equals Nelson-Aalen on simulated data") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto d = oracle::simulate_ph(60, VectorXd(VectorXd::Constant(2, 0.5)), seed);
    // induce ties
    for (int i = 0; i < d.time.size(); ++i) d.time(i) = std::round(d.time(i) * 20) / 20;
    const auto s = from(d);
    const auto est = solve_gamma(s, ph, VectorXd(VectorXd::Zero(2)));
    const auto na = oracle::nelson_aalen(d, s.tau());
    REQUIRE(static_cast<std::size_t>(est.size()) == na.size());
    for (std::size_t k = 0; k < na.size(); ++k) {
      CHECK(std::abs(est.gamma(static_cast<Eigen::Index>(k)) - na[k]) < 1e-12);
    }
  }
}

TEST_CASE("Gamma-dot matches central differences on PO data") {
  const auto d = oracle::simulate_po(80, (VectorXd(2) << 0.8, -0.5).finished(), 11);
  const auto s = from(d);
  const VectorXd theta = (VectorXd(2) << 0.6, -0.3).finished();
  const auto est = solve_transform(s, po, theta);
  for (int j = 0; j < 2; ++j) {
    const VectorXd fd = oracle::central_difference(
        [&](double e) {
          VectorXd th = theta;
          th(j) += e;
          return solve_gamma(s, po, th).gamma;
        },
        1e-5);
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    CHECK((est.gamma_dot.col(j) - fd).cwiseAbs().maxCoeff() < 1e-6 * scale);
  }
}

TEST_CASE("estimate invariants") {
  const auto d = oracle::simulate_po(120, (VectorXd(2) << 1.0, 0.4).finished(), 5);
  const auto s = from(d);
  const auto est = solve_transform(s, po, (VectorXd(2) << 1.0, 0.4).finished());
  for (Eigen::Index k = 0; k < est.size(); ++k) {
    CHECK(est.c_jumps(k) > 0);
    CHECK(est.b_jumps(k) >= 0);
    if (k > 0) CHECK(est.gamma(k) > est.gamma(k - 1));
  }
  // multiplicativity of the product integral
  for (Eigen::Index u = 0; u < est.size(); u += 7) {
    for (Eigen::Index t = u; t < est.size(); t += 5) {
      CHECK(std::abs(est.prodint(t) - est.prodint(u) * est.prodint_between(u, t)) <=
            1e-12 * est.prodint(t));
    }
  }
  // Gamma jumps only at uncensored times
  CHECK(est.gamma_at(est.event_times(0) - 1e-9) == 0.0);
  CHECK(est.gamma_at(est.event_times(3)) == est.gamma(3));
}

TEST_CASE("constant covariates give no spread") {
  const auto d = oracle::simulate_po(40, VectorXd(VectorXd::Zero(1)), 3);
  const SurvivalSample<double> s(d.time, d.status, MatrixXd::Constant(40, 1, 0.7));
  const auto est = solve_transform(s, po, VectorXd(VectorXd::Constant(1, 0.2)));
  for (const auto& vb : est.v_bar) CHECK(vb.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("an observation censored beyond tau keeps the grid") {
  const auto d = oracle::simulate_po(50, VectorXd(VectorXd::Constant(1, 1.0)), 9);
  const auto s = from(d);
  oracle::Data more = d;
  more.time.conservativeResize(51);
  more.time(50) = d.time.maxCoeff() + 1;
  more.status.push_back(0);
  more.z.conservativeResize(51, 1);
  more.z(50, 0) = 0.3;
  const SurvivalSample<double> s2(more.time, more.status, more.z, s.tau());
  REQUIRE(s2.event_count() == s.event_count());
  CHECK(s2.event_times() == s.event_times());
  // the new subject is at risk on all of [0, tau]
  const auto b = solve_gamma(s2, ph, VectorXd(VectorXd::Zero(1)));
  const auto na = oracle::nelson_aalen(more, s.tau());
  for (Eigen::Index k = 0; k < b.size(); ++k) {
    CHECK(std::abs(b.gamma(k) - na[static_cast<std::size_t>(k)]) < 1e-12);
  }
}

TEST_CASE("theta dimension mismatch is rejected") {
  CHECK_THROWS_AS(solve_gamma(two_point(), po, VectorXd(VectorXd::Zero(2))), InputError);
}

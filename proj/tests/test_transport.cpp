#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "diskrt/transport.hpp"

using namespace diskrt;

namespace {
// small shared grid keeps per-case solves around a second
const PolarGrid& test_grid() {
  static PolarGrid grid(32, 64);
  return grid;
}
const PeierlsSolver::FanSpec test_fan{48, 32};

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15 * tol) return left + right;
  return adaptive_simpson(f, a, m, fa, flm, fm, tol / 2, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, tol / 2, depth - 1);
}

double adaptive_integral(const std::function<double(double)>& f, double a, double b,
                         double tol = 1e-12) {
  const double m = 0.5 * (a + b);
  return adaptive_simpson(f, a, b, f(a), f(m), f(b), tol, 40);
}
}  // namespace

TEST_CASE("kernel hat") {
  REQUIRE(kernel_hat(0.0, 0.1, 1.0) == 1.0);

  SECTION("quadrature oracle at a = 1 and a = 3") {
    // (1/pi) int_0^pi dtheta / (1 + a^2 cos^2)
    auto oracle = [](double a) {
      return adaptive_integral(
                 [a](double t) { return 1.0 / (1.0 + a * a * std::cos(t) * std::cos(t)); }, 0.0,
                 pi) /
             pi;
    };
    REQUIRE(oracle(1.0) == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-10));
    REQUIRE(oracle(3.0) == Catch::Approx(1.0 / std::sqrt(10.0)).epsilon(1e-10));
    REQUIRE(kernel_hat(1.0, 1.0, 1.0) == Catch::Approx(oracle(1.0)).epsilon(1e-12));
    REQUIRE(kernel_hat(3.0, 1.0, 1.0) == Catch::Approx(oracle(3.0)).epsilon(1e-12));
  }

  SECTION("closed form vs integral form over a in [0, 10]") {
    for (double a = 0.0; a <= 10.0; a += 0.25)
      REQUIRE(kernel_hat_integral(a, 1.0, 1.0) == Catch::Approx(kernel_hat(a, 1.0, 1.0)).margin(1e-6));
  }

  SECTION("strictly decreasing") {
    double prev = 2.0;
    for (double a = 0.0; a <= 5.0; a += 0.5) {
      const double v = kernel_hat(a, 1.0, 1.0);
      REQUIRE(v < prev);
      REQUIRE(v > 0.0);
      REQUIRE(v <= 1.0);
      prev = v;
    }
  }
}

TEST_CASE("optical depth") {
  Medium med0(0.1, 1.0, absorption::zero());
  SECTION("constant integrand") {
    REQUIRE(optical_depth(Vec2(0.1, 0), Vec2(0.3, 0), med0) == Catch::Approx(2.0));
  }

  SECTION("symmetry and adaptive-quadrature oracle through the bump") {
    Medium med(0.1, 1.0, absorption::radial_bump(0.4, 0.25, 0.2, 0.5));
    const Vec2 x(-0.8, 0.1), y(0.6, -0.3);
    REQUIRE(optical_depth(x, y, med) == optical_depth(y, x, med));

    const double dist = (y - x).norm();
    const Vec2 dir = (y - x) / dist;
    auto sig = [&](double t) { return med.sigma_a(x + t * dir); };
    const double line = adaptive_integral(sig, 0.0, dist, 1e-14);
    const double expected = (med.sigma_s * dist + med.epsilon * med.epsilon * line) / med.epsilon;
    REQUIRE(optical_depth(x, y, med) == Catch::Approx(expected).epsilon(1e-8));
  }

  SECTION("degenerate pair rejected") {
    REQUIRE_THROWS_AS(optical_depth(Vec2(0.1, 0.1), Vec2(0.1, 0.1), med0),
                      std::invalid_argument);
  }
}

TEST_CASE("medium validation") {
  REQUIRE_THROWS_AS(Medium(0.6, 1.0, absorption::zero()), std::invalid_argument);
  REQUIRE_THROWS_AS(Medium(0.0, 1.0, absorption::zero()), std::invalid_argument);
  REQUIRE_THROWS_AS(Medium(0.1, -1.0, absorption::zero()), std::invalid_argument);
}

TEST_CASE("constant preservation across the eps range") {
  for (double eps : {0.5, 0.1, 0.02, 1e-3}) {
    Medium med(eps, 1.0, absorption::zero());
    PeierlsSolver solver(med, test_grid(), test_fan);
    ScalarFlux flux = solver.solve(BoundarySource::constant(1.0));
    REQUIRE((flux.values.array() - 1.0).abs().maxCoeff() < 1e-8);
    REQUIRE(flux.residual_norm < 1e-10);
  }
}

TEST_CASE("positivity and maximum principle for absorbing media") {
  Medium med(0.1, 1.0, absorption::radial_bump(0.4, 0.25, 0.2, 0.5));
  PeierlsSolver solver(med, test_grid(), test_fan);
  ScalarFlux flux = solver.solve(BoundarySource::constant(1.0));
  REQUIRE(flux.values.minCoeff() > -1e-8);
  REQUIRE(flux.values.maxCoeff() < 1.0 + 1e-8);
}

TEST_CASE("flux approaches the harmonic extension in the interior") {
  Medium med(0.02, 1.0, absorption::zero());
  PeierlsSolver solver(med, test_grid(), test_fan);
  ScalarFlux flux = solver.solve(BoundarySource::mode(1, 1));
  double num = 0.0, den = 0.0;
  for (int idx = 0; idx < test_grid().size(); ++idx) {
    const Vec2 x = test_grid().point(idx);
    if (x.norm() > 0.8) continue;
    const double ref = HarmonicBasis::extension_value(1, 1, x);
    num += test_grid().weight(idx) * std::pow(flux.values[idx] - ref, 2);
    den += test_grid().weight(idx) * ref * ref;
  }
  REQUIRE(std::sqrt(num / den) < 0.1);
}

TEST_CASE("uniform flux bound across eps (boundedness sanity check)") {
  BoundarySource f = BoundarySource::mode(2, 1);
  const double h32 = std::pow(3.0, 1.5);  // ||Y_2||_{H^{3/2}} in the (1+m)^s model
  std::vector<double> ratios;
  for (double eps : {0.2, 0.1, 0.05, 0.02}) {
    Medium med(eps, 1.0, absorption::zero());
    PeierlsSolver solver(med, test_grid(), test_fan);
    ScalarFlux flux = solver.solve(f);
    double l2 = 0.0;
    for (int idx = 0; idx < test_grid().size(); ++idx)
      l2 += test_grid().weight(idx) * flux.values[idx] * flux.values[idx];
    ratios.push_back(std::sqrt(l2) / h32);
  }
  const double lo = *std::min_element(ratios.begin(), ratios.end());
  const double hi = *std::max_element(ratios.begin(), ratios.end());
  REQUIRE(hi / lo < 2.0);
}

TEST_CASE("first moment") {
  SECTION("constant solution has zero current") {
    Medium med(0.1, 1.0, absorption::zero());
    PeierlsSolver solver(med, test_grid(), test_fan);
    BoundarySource f = BoundarySource::constant(1.0);
    ScalarFlux flux = solver.solve(f);
    CurrentField cur = solver.first_moment(f, flux);
    REQUIRE(cur.jx.cwiseAbs().maxCoeff() < 1e-12);
    REQUIRE(cur.jy.cwiseAbs().maxCoeff() < 1e-12);
  }

  SECTION("diffusion expansion: J ~ -(eps/(2 sigma_s)) grad extension") {
    const double eps = 0.05;
    Medium med(eps, 1.0, absorption::zero());
    PeierlsSolver solver(med, test_grid(), test_fan);
    BoundarySource f = BoundarySource::mode(1, 1);
    ScalarFlux flux = solver.solve(f);
    CurrentField cur = solver.first_moment(f, flux);
    double num = 0.0, den = 0.0;
    for (int idx = 0; idx < test_grid().size(); ++idx) {
      const Vec2 x = test_grid().point(idx);
      if (x.norm() > 0.6) continue;
      const Vec2 ref = -(eps / 2.0) * HarmonicBasis::extension_gradient(1, 1, x);
      num += test_grid().weight(idx) *
             (std::pow(cur.jx[idx] - ref[0], 2) + std::pow(cur.jy[idx] - ref[1], 2));
      den += test_grid().weight(idx) * ref.squaredNorm();
    }
    REQUIRE(std::sqrt(num / den) < 0.25);
  }
}

TEST_CASE("boundary current") {
  SECTION("constant illumination of a conservative medium measures zero") {
    Medium med(0.1, 1.0, absorption::zero());
    PeierlsSolver solver(med, test_grid(), test_fan);
    BoundarySource f = BoundarySource::constant(2.0);
    ScalarFlux flux = solver.solve(f);
    BoundaryCurrent cur = solver.boundary_current(f, flux, 6);
    REQUIRE(cur.coeff.cwiseAbs().maxCoeff() < 1e-8);
  }

  SECTION("matches the Dirichlet-to-Neumann prediction -(m/2) Y_m at small eps") {
    Medium med(0.02, 1.0, absorption::zero());
    PeierlsSolver solver(med, test_grid(), test_fan);
    for (int m : {1, 2, 3}) {
      BoundarySource f = BoundarySource::mode(m, 1);
      ScalarFlux flux = solver.solve(f);
      BoundaryCurrent cur = solver.boundary_current(f, flux, 6);
      const int idx = HarmonicBasis::flat_index(m, 1);
      const double predicted = -0.5 * m;  // -(m / (d sigma_s)) at d = 2
      REQUIRE(cur.coeff[idx] == Catch::Approx(predicted).epsilon(0.15));
    }
  }

  SECTION("global balance against the absorbed power") {
    Medium med(0.2, 1.0, absorption::radial_bump(0.3, 0.25, 0.2, 0.5));
    PeierlsSolver solver(med, test_grid(), test_fan);
    BoundarySource f = BoundarySource::constant(1.0);
    ScalarFlux flux = solver.solve(f);
    BoundaryCurrent cur = solver.boundary_current(f, flux, 4);
    const double outflow = std::sqrt(2.0 * pi) * cur.coeff[0];  // int J dS
    const double absorbed = integrate_against(
        med.sigma_a, [&](const Vec2& x) { return test_grid().interpolate(flux.values, x); });
    REQUIRE(outflow <= 0.0);
    REQUIRE(outflow == Catch::Approx(-absorbed).epsilon(1e-4));
  }
}

TEST_CASE("k1 spectral properties") {
  auto gap = [&](double eps) {
    Medium med(eps, 1.0, absorption::zero());
    PeierlsSolver solver(med, test_grid(), test_fan);
    OperatorNormResult r = solver.k1_operator_norm();
    REQUIRE(r.converged);
    REQUIRE(r.value < 1.0);
    return 1.0 - r.value;
  };
  const double g02 = gap(0.2), g01 = gap(0.1);
  REQUIRE(g01 > 0.0);
  REQUIRE(g02 / g01 == Catch::Approx(4.0).margin(1.6));  // Theta(eps^2) law
}

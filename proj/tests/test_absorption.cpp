#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "diskrt/absorption.hpp"

using namespace diskrt;

TEST_CASE("bump profile") {
  REQUIRE(bump_profile(0.0) == Catch::Approx(1.0));
  REQUIRE(bump_profile(1.0) == 0.0);
  REQUIRE(bump_profile(-1.2) == 0.0);
  REQUIRE(bump_profile(0.5) > 0.0);
  REQUIRE(bump_profile(0.5) < 1.0);
}

TEST_CASE("radial bump invariants") {
  AbsorptionField f = absorption::radial_bump(0.3, 0.3, 0.15, 0.5, 2.0);
  auto rep = f.check_invariants();
  REQUIRE(rep.nonnegative);
  REQUIRE(rep.supported);
  REQUIRE(rep.cq_within_bound);
  REQUIRE(rep.sampled_sup == Catch::Approx(0.3).epsilon(0.01));
  REQUIRE(f(Vec2(0.3, 0.0)) == Catch::Approx(0.3));
  REQUIRE(f(Vec2(0.5, 0.0)) == 0.0);
  REQUIRE(f(Vec2(0.0, 0.0)) == 0.0);

  REQUIRE_THROWS_AS(absorption::radial_bump(0.3, 0.45, 0.15, 0.5), std::invalid_argument);
  REQUIRE_THROWS_AS(absorption::radial_bump(0.3, 0.1, 0.15, 0.5), std::invalid_argument);
}

TEST_CASE("disk and polar bump invariants") {
  AbsorptionField d = absorption::disk_bump(0.2, Vec2(0.2, 0.1), 0.12, 0.5);
  auto drep = d.check_invariants();
  REQUIRE(drep.nonnegative);
  REQUIRE(drep.supported);
  REQUIRE(drep.cq_within_bound);
  REQUIRE(d(Vec2(0.2, 0.1)) == Catch::Approx(0.2));

  AbsorptionField p = absorption::polar_bump(0.25, 0.44, 0.06, 0.3, 0.12, 0.5);
  auto prep = p.check_invariants();
  REQUIRE(prep.nonnegative);
  REQUIRE(prep.supported);
  REQUIRE(prep.cq_within_bound);
  REQUIRE(p(Vec2(0.44 * std::cos(0.3), 0.44 * std::sin(0.3))) == Catch::Approx(0.25));

  REQUIRE_THROWS_AS(absorption::polar_bump(0.25, 0.05, 0.06, 0.0, 0.1, 0.5),
                    std::invalid_argument);
}

TEST_CASE("zero field") {
  AbsorptionField z = absorption::zero(0.5);
  REQUIRE(z.is_zero);
  REQUIRE(z(Vec2(0.1, 0.1)) == 0.0);
  REQUIRE(integrate_against(z, [](const Vec2&) { return 1.0; }) == 0.0);
}

TEST_CASE("patch quadrature against dense radial oracle") {
  const double amp = 0.4, c = 0.25, w = 0.2, r0 = 0.5;
  AbsorptionField f = absorption::radial_bump(amp, c, w, r0);

  // mass: 2 pi amp int chi((r-c)/w) r dr by dense Simpson
  const int ns = 200000;
  double oracle = 0.0;
  const double lo = c - w, hi = c + w, h = (hi - lo) / ns;
  for (int i = 0; i < ns; ++i) {
    const double a = lo + i * h, m = a + 0.5 * h, b = a + h;
    auto g = [&](double r) { return bump_profile((r - c) / w) * r; };
    oracle += h / 6.0 * (g(a) + 4.0 * g(m) + g(b));
  }
  oracle *= 2.0 * pi * amp;

  const double mass = integrate_against(f, [](const Vec2&) { return 1.0; });
  REQUIRE(mass == Catch::Approx(oracle).epsilon(1e-8));

  // first moment against a smooth factor
  auto gfun = [](const Vec2& x) { return x[0] * x[0] + 0.3 * x[1]; };
  double oracle2 = 0.0;
  const int nr = 400, nt = 800;
  for (int i = 0; i < nr; ++i) {
    const double r = lo + (i + 0.5) * (hi - lo) / nr;
    for (int q = 0; q < nt; ++q) {
      const double th = 2.0 * pi * (q + 0.5) / nt;
      Vec2 x(r * std::cos(th), r * std::sin(th));
      oracle2 += f(x) * gfun(x) * r * ((hi - lo) / nr) * (2.0 * pi / nt);
    }
  }
  REQUIRE(integrate_against(f, gfun) == Catch::Approx(oracle2).margin(1e-7));
}

TEST_CASE("scaled field") {
  AbsorptionField f = absorption::radial_bump(0.3, 0.3, 0.15, 0.5);
  AbsorptionField g = absorption::scaled(f, 2.0);
  REQUIRE(g(Vec2(0.3, 0.0)) == Catch::Approx(0.6));
  REQUIRE(g.sup_bound == Catch::Approx(0.6));
}

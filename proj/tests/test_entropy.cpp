#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "diskrt/entropy.hpp"

using namespace diskrt;

TEST_CASE("omega solve") {
  SECTION("eps = 0 reduces to omega = exp(-t)") {
    OmegaSolution s = omega_solve(3.0, 0.0, -1.0);
    REQUIRE(s.omega == Catch::Approx(std::exp(-3.0)).epsilon(1e-15));
    REQUIRE(s.residual == 0.0);
  }

  SECTION("independent bisection oracle at eps = 0.1, t = 2") {
    // plain bisection to 1e-13 on log(1/w) + 0.2/w = 2
    auto F = [](double w) { return std::log(1.0 / w) + 0.2 / w; };
    double lo = 1e-12, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
      double mid = 0.5 * (lo + hi);
      (F(mid) > 2.0 ? lo : hi) = mid;
    }
    OmegaSolution s = omega_solve(2.0, 0.1, -1.0);
    REQUIRE(s.omega == Catch::Approx(0.5 * (lo + hi)).epsilon(1e-12));
    REQUIRE(std::abs(s.residual) <= 1e-12);
  }

  SECTION("monotone in t") {
    OmegaSolution a = omega_solve(2.0, 0.1, -1.0);
    OmegaSolution b = omega_solve(4.0, 0.1, -1.0);
    REQUIRE(b.omega < a.omega);
  }

  SECTION("residuals on a (t, eps) grid") {
    for (double t : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0})
      for (double eps : {0.0, 1e-3, 1e-2, 0.1, 0.3}) {
        OmegaSolution s = omega_solve(t, eps, -1.0);
        REQUIRE(std::abs(s.residual) <= 1e-12);
        if (eps > 0.0) REQUIRE(s.in_regime == (t > eps + eps));
      }
  }

  SECTION("out-of-regime flag when the root is >= 1") {
    OmegaSolution s = omega_solve(0.05, 0.3, -1.0);
    REQUIRE_FALSE(s.in_regime);
    REQUIRE(s.omega >= 1.0);
  }

  REQUIRE_THROWS_AS(omega_solve(-1.0, 0.1, -1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(omega_solve(1.0, 0.1, 1.0), std::invalid_argument);
}

TEST_CASE("regime classification") {
  SECTION("worked example d=2, q=1, theta=0.01") {
    RegimeDecision r = regime_classify(0.01, 1e-4, 2, 1.0);
    REQUIRE(r.exponent == Catch::Approx(0.4));
    const double x = std::pow(10.0, 0.8) / 3.0;
    REQUIRE(r.threshold == Catch::Approx(x * std::exp(-x)).epsilon(1e-14));
  }

  SECTION("boundary included in the diffusive case") {
    RegimeDecision probe = regime_classify(0.01, 1e-4, 2, 1.0);
    RegimeDecision r = regime_classify(0.01, probe.threshold, 2, 1.0);
    REQUIRE(r.diffusive);
    REQUIRE(r.label == "diffusive-exponential");
    RegimeDecision r2 = regime_classify(0.01, probe.threshold * 1.0001, 2, 1.0);
    REQUIRE_FALSE(r2.diffusive);
    REQUIRE(r2.label == "transport-holder");
  }

  SECTION("threshold decreases with theta once x > 1") {
    // x e^{-x} decreasing for x > 1
    RegimeDecision a = regime_classify(0.02, 1e-4, 2, 1.0);
    RegimeDecision b = regime_classify(0.01, 1e-4, 2, 1.0);
    REQUIRE(std::pow(0.02, -0.4) / 3.0 > 1.0);
    REQUIRE(b.threshold < a.threshold);
  }

  SECTION("bound values per corollary") {
    RegimeDecision hol = regime_classify(0.1, 0.45, 2, 1.0);
    REQUIRE_FALSE(hol.diffusive);
    REQUIRE(hol.bound ==
            Catch::Approx(24.0 * std::sqrt(2.0) * 0.45 * std::pow(0.1, 0.4)));
    RegimeDecision dif = regime_classify(1e-4, 1e-8, 2, 1.0);
    REQUIRE(dif.diffusive);
    const double x = std::pow(1e-4, -0.4) / 3.0;
    REQUIRE(dif.bound == Catch::Approx(8.0 * std::sqrt(2.0) * std::exp(-x)));
  }

  REQUIRE_THROWS_AS(regime_classify(1.5, 0.1, 2, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(regime_classify(0.1, 0.1, 1, 1.0), std::invalid_argument);
}

TEST_CASE("truncation order") {
  SECTION("worked value l = 10") {
    // threshold delta/(4 C0 R) = 1e-3 at tau=-1, r0=0.5, eps=0.01
    TruncationOrder t = truncation_order(4e-3, 0.01, 0.5, -1.0, 1.0);
    REQUIRE(t.threshold == Catch::Approx(1e-3));
    REQUIRE(t.l == 10);
    REQUIRE(t.minimal_verified);
    // linear scan oracle
    auto g = [](int l) { return (std::pow(0.5, l) + 0.01) / (1.0 + l); };
    REQUIRE(g(10) <= 1e-3);
    REQUIRE(g(9) > 1e-3);
  }

  SECTION("eps = 0 hand scan: threshold 0.25 gives l = 1") {
    TruncationOrder t = truncation_order(0.25, 0.0, 0.5, -1.0, 0.25);
    REQUIRE(t.threshold == Catch::Approx(0.25));
    REQUIRE(t.l == 1);
    REQUIRE(t.minimal_verified);
  }

  SECTION("monotone in delta") {
    int prev = 0;
    for (double delta : {3e-1, 1e-1, 1e-2, 1e-3, 1e-4}) {
      TruncationOrder t = truncation_order(delta, 0.01, 0.5, -1.0, 1.0);
      REQUIRE(t.l >= prev);
      REQUIRE(t.minimal_verified);
      prev = t.l;
    }
  }

  REQUIRE_THROWS_AS(truncation_order(0.5, 0.01, 0.5, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("net cardinality bound") {
  SECTION("C0' at r0 = 0.5 equals 1") {
    REQUIRE(c0_prime(0.5) == Catch::Approx(1.0));
    REQUIRE((1.0 + 0) * std::pow(0.5, 0) == 1.0);
    REQUIRE((1.0 + 1) * std::pow(0.5, 1) == 1.0);
  }

  SECTION("monotone in delta") {
    double prev = 0.0;
    for (double delta : {1e-1, 1e-2, 1e-3, 1e-4}) {
      NetCardinality n = net_log_cardinality(delta, 0.01, 0.5, -1.0, 2, 1.0);
      REQUIRE(n.log_explicit > prev);
      prev = n.log_explicit;
    }
  }

  SECTION("explicit bound sits under the eta envelope") {
    double eta = 0.0;
    std::vector<NetCardinality> rows;
    for (double delta : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
      rows.push_back(net_log_cardinality(delta, 0.01, 0.5, -1.0, 2, 1.0));
      eta = std::max(eta, rows.back().eta_required);
    }
    for (const auto& n : rows)
      REQUIRE(n.log_explicit <= eta * std::pow(n.envelope_base, 5) * (1.0 + 1e-12));
  }

  SECTION("eps = 0 polylog growth: slope of log|Y| vs log delta^{-1} is 2d-1") {
    std::vector<double> lx, ly;
    for (double ld = 8.0; ld <= 48.0; ld += 4.0) {
      const double delta = std::exp(-ld);
      NetCardinality n = net_log_cardinality(delta, 0.0, 0.5, -1.0, 2, 1.0);
      lx.push_back(std::log(ld));
      ly.push_back(std::log(n.log_explicit));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const int n = static_cast<int>(lx.size());
    for (int i = 0; i < n; ++i) {
      sx += lx[i];
      sy += ly[i];
      sxx += lx[i] * lx[i];
      sxy += lx[i] * ly[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    REQUIRE(slope == Catch::Approx(3.0).margin(0.5));
  }

  SECTION("one-cell toy exceeds a directly enumerated net") {
    // force l = 0: generous threshold
    const double delta = 0.3, C0R = 0.05;
    TruncationOrder t = truncation_order(delta, 0.01, 0.5, -1.0, C0R);
    REQUIRE(t.l == 0);
    NetCardinality nc = net_log_cardinality(delta, 0.01, 0.5, -1.0, 2, C0R);
    const double dprime = delta / (8.0 * std::sqrt(2.0));
    const double y1 = 1 + 2 * std::floor(C0R * c0_prime(0.5) / dprime);
    const double y2 = 1 + 2 * std::floor(C0R * 0.01 / dprime);
    REQUIRE(nc.log_explicit >= std::log(y1 * y2));
  }
}

TEST_CASE("kolmogorov log count") {
  REQUIRE(kolmogorov_log_count(1.0, 10.0, 2.0, 2, 1.0) == Catch::Approx(1.25));
  REQUIRE_THROWS_AS(kolmogorov_log_count(10.0, 10.0, 2.0, 2, 1.0), std::invalid_argument);
  // homogeneity at d = q: doubling beta doubles the count
  const double a = kolmogorov_log_count(0.5, 10.0, 2.0, 2, 1.0);
  const double b = kolmogorov_log_count(0.5, 20.0, 2.0, 2, 1.0);
  REQUIRE(b == Catch::Approx(2.0 * a));
}

TEST_CASE("bump family construction") {
  const double theta = 0.1, q = 2.0, r0 = 0.5;
  const double beta = 2.0 * theta * bump_cq_norm(q) / (0.06 * 0.06);  // aims h ~ 0.042
  BumpFamily fam = build_bump_family(theta, beta, q, r0, 20, 42);

  SECTION("cells fit and members are admissible") {
    REQUIRE(fam.ncells() > 4);
    for (const Vec2& c : fam.cells) REQUIRE(c.norm() + fam.h <= r0 + 1e-12);
    for (int i = 0; i < 3; ++i) {
      AbsorptionField member = fam.bumps_only(fam.patterns[i]);
      auto rep = member.check_invariants(120);
      REQUIRE(rep.nonnegative);
      REQUIRE(rep.supported);
      REQUIRE(rep.sampled_cq <= beta * 1.05);
    }
  }

  SECTION("sup distance is exactly theta at a differing cell center") {
    std::vector<uint8_t> a(fam.ncells(), 0), b(fam.ncells(), 0);
    b[2] = 1;
    REQUIRE(fam.sup_distance(a, b) == Catch::Approx(theta));
    AbsorptionField fa = fam.bumps_only(a), fb = fam.bumps_only(b);
    REQUIRE(std::abs(fb(fam.cells[2]) - fa(fam.cells[2])) == Catch::Approx(theta));
  }

  SECTION("grid-sampled sup distances match the exact cell-center value") {
    for (int trial = 0; trial < 6; ++trial) {
      const auto& pa = fam.patterns[trial];
      const auto& pb = fam.patterns[trial + 6];
      AbsorptionField fa = fam.bumps_only(pa), fb = fam.bumps_only(pb);
      double sampled = 0.0;
      const int n = 300;
      for (int iy = 0; iy <= n; ++iy)
        for (int ix = 0; ix <= n; ++ix) {
          Vec2 x(-r0 + 2.0 * r0 * ix / n, -r0 + 2.0 * r0 * iy / n);
          sampled = std::max(sampled, std::abs(fa(x) - fb(x)));
        }
      for (const Vec2& c : fam.cells) sampled = std::max(sampled, std::abs(fa(c) - fb(c)));
      REQUIRE(sampled == Catch::Approx(fam.sup_distance(pa, pb)).margin(1e-6));
    }
  }

  SECTION("pairwise distances of 20 random patterns") {
    for (size_t i = 0; i < fam.patterns.size(); ++i)
      for (size_t k = i + 1; k < fam.patterns.size(); ++k)
        REQUIRE(fam.sup_distance(fam.patterns[i], fam.patterns[k]) == Catch::Approx(theta));
  }

  SECTION("infeasible combinations are rejected with the limiting constraint") {
    REQUIRE_THROWS_WITH(build_bump_family(0.4, 1.0, 2.0, 0.5, 2),
                        Catch::Matchers::ContainsSubstring("r0/4"));
    REQUIRE_THROWS_WITH(build_bump_family(1e-4, 1e7, 2.0, 0.5, 2),
                        Catch::Matchers::ContainsSubstring("grid resolution"));
  }

  SECTION("checkerboard patterns complement each other") {
    auto a = fam.checkerboard_pattern(0);
    auto b = fam.checkerboard_pattern(1);
    for (int c = 0; c < fam.ncells(); ++c) REQUIRE(a[c] + b[c] == 1);
  }

  SECTION("construction saturates the C^q budget when below the cell cap") {
    // h chosen as (theta chi_cq / beta)^{1/q}
    REQUIRE(fam.h == Catch::Approx(std::pow(theta * fam.chi_cq / beta, 0.5)));
    REQUIRE(fam.h < 0.25 * r0);
  }
}

TEST_CASE("calibrated mu marks the feasibility boundary") {
  const double q = 2.0, r0 = 0.5;
  const double mu = bump_family_mu(q, r0);
  const double beta = 40.0;
  REQUIRE_NOTHROW(build_bump_family(0.98 * mu * beta, beta, q, r0, 2));
  REQUIRE_THROWS(build_bump_family(1.05 * mu * beta, beta, q, r0, 2));
  // log-count formula usable right below the boundary
  REQUIRE(kolmogorov_log_count(0.98 * mu * beta, beta, q, 2, mu) > 0.0);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "diskrt/absorption.hpp"
#include "diskrt/albedo.hpp"
#include "diskrt/geometry.hpp"
#include "diskrt/transport.hpp"

namespace diskrt {

struct OmegaSolution {
  double t = 0.0, eps = 0.0, tau = -1.0;
  double omega = 0.0;
  double residual = 0.0;
  bool in_regime = true;  // omega < 1
};

// Root of  t = log(1/w) + eps/w + (eps/w)^{-1/tau}  in w. The right side is
// strictly decreasing on (0, inf), so bracketing bisection plus a Newton
// polish is initialization-free. eps = 0 reduces to w = exp(-t) exactly.
inline OmegaSolution omega_solve(double t, double eps, double tau) {
  if (!(t > 0.0)) throw std::invalid_argument("omega_solve: t must be positive");
  if (!(eps >= 0.0)) throw std::invalid_argument("omega_solve: eps must be >= 0");
  if (!(tau < 0.0)) throw std::invalid_argument("omega_solve: tau must be negative");
  OmegaSolution sol;
  sol.t = t;
  sol.eps = eps;
  sol.tau = tau;
  if (eps == 0.0) {
    sol.omega = std::exp(-t);
    sol.residual = 0.0;
    sol.in_regime = true;
    return sol;
  }
  const double p = -1.0 / tau;
  auto F = [&](double w) {
    const double r = eps / w;
    return std::log(1.0 / w) + r + std::pow(r, p);
  };
  sol.in_regime = t > F(1.0);
  double lo = 1e-300, hi = 1.0;
  while (F(hi) > t) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (F(mid) > t ? lo : hi) = mid;
  }
  double w = 0.5 * (lo + hi);
  for (int it = 0; it < 40; ++it) {
    const double r = eps / w;
    const double f = std::log(1.0 / w) + r + std::pow(r, p) - t;
    const double df = -(1.0 + r + p * std::pow(r, p)) / w;
    const double step = f / df;
    double wn = w - step;
    if (!(wn > lo && wn < hi)) break;
    w = wn;
    if (std::abs(step) < 1e-16 * w) break;
  }
  sol.omega = w;
  sol.residual = F(w) - t;
  return sol;
}

struct RegimeDecision {
  double theta = 0.0, eps = 0.0, q = 1.0;
  int d = 2;
  double exponent = 0.0;   // d / ((2d+1) q)
  double threshold = 0.0;  // T(theta)
  bool diffusive = false;
  std::string label;
  double bound = 0.0;  // matching corollary bound on ||Lambda_1 - Lambda_2||
};

// Diffusive vs transport classification: diffusive-exponential iff
//   eps <= T(theta) = (1/3) theta^{-a} exp(-(1/3) theta^{-a}),  a = d/((2d+1)q),
// with the corresponding norm bound attached.
inline RegimeDecision regime_classify(double theta, double eps, int d, double q) {
  if (!(theta > 0.0 && theta < 1.0))
    throw std::invalid_argument("regime_classify: theta must lie in (0,1)");
  if (!(eps > 0.0 && eps < 1.0))
    throw std::invalid_argument("regime_classify: eps must lie in (0,1)");
  if (!(q > 0.0)) throw std::invalid_argument("regime_classify: q must be positive");
  if (d < 2) throw std::invalid_argument("regime_classify: d must be >= 2");
  RegimeDecision r;
  r.theta = theta;
  r.eps = eps;
  r.d = d;
  r.q = q;
  r.exponent = d / ((2.0 * d + 1.0) * q);
  const double x = std::pow(theta, -r.exponent) / 3.0;
  r.threshold = x * std::exp(-x);
  r.diffusive = eps <= r.threshold;
  if (r.diffusive) {
    r.label = "diffusive-exponential";
    r.bound = 8.0 * std::sqrt(2.0) * std::exp(-x);
  } else {
    r.label = "transport-holder";
    r.bound = 24.0 * std::sqrt(2.0) * eps * std::pow(theta, r.exponent);
  }
  return r;
}

struct TruncationOrder {
  int l = 0;
  double threshold = 0.0;   // delta / (4 C0 R)
  double value_at_l = 0.0;  // (1+l)^tau (r0^l + eps)
  double chat_fitted = 0.0;
  bool minimal_verified = false;
};

// Smallest l with (1+l)^tau (r0^l + eps) <= delta/(4 C0 R); the left side is
// decreasing in l, so a linear scan finds it and verifies minimality.
inline TruncationOrder truncation_order(double delta, double eps, double r0, double tau,
                                        double C0R) {
  if (!(delta > 0.0 && delta < std::exp(-1.0)))
    throw std::invalid_argument("truncation_order: delta must lie in (0, 1/e)");
  if (!(tau < 0.0)) throw std::invalid_argument("truncation_order: tau must be negative");
  if (!(r0 > 0.0 && r0 < 1.0))
    throw std::invalid_argument("truncation_order: r0 must lie in (0,1)");
  if (!(C0R > 0.0)) throw std::invalid_argument("truncation_order: C0R must be positive");
  if (!(eps >= 0.0)) throw std::invalid_argument("truncation_order: eps must be >= 0");
  TruncationOrder out;
  out.threshold = delta / (4.0 * C0R);
  auto g = [&](int l) { return std::pow(1.0 + l, tau) * (std::pow(r0, l) + eps); };
  int l = 0;
  while (g(l) > out.threshold) {
    ++l;
    if (l > 100000000) throw std::runtime_error("truncation_order: scan exceeded 1e8");
  }
  out.l = l;
  out.value_at_l = g(l);
  out.minimal_verified = (l == 0 || g(l - 1) > out.threshold) && g(l + 1) <= g(l);
  const double p = -1.0 / tau;
  const double base = std::log(1.0 / delta) + (eps > 0.0 ? std::pow(eps / delta, p) : 0.0);
  out.chat_fitted = (1.0 + l) / base;
  return out;
}

inline double c0_prime(double r0, int lmax = 2000) {
  double sup = 0.0;
  for (int l = 0; l <= lmax; ++l) sup = std::max(sup, (1.0 + l) * std::pow(r0, l));
  return sup;
}

struct NetCardinality {
  int l_trunc = 0;
  double c0prime = 0.0;
  double log_explicit = 0.0;  // proof-level product bound on log|Y|
  double envelope_base = 0.0; // log(1/delta) + eps/delta + (eps/delta)^{-1/tau}
  double eta_required = 0.0;  // log_explicit / base^{2d+1}
};

// Proof-level cardinality bound for the delta-net of the Gamma image:
//   log|Y| <= 8 (1+l)^{2d-2} [ log(1 + 16 sqrt2 C0 C0' R / delta)
//                            + log(1 + 16 sqrt2 C0 R eps (1+l)^2 / delta) ],
// together with the eta-form envelope it sits under.
inline NetCardinality net_log_cardinality(double delta, double eps, double r0, double tau,
                                          int d, double C0R) {
  TruncationOrder tr = truncation_order(delta, eps, r0, tau, C0R);
  NetCardinality out;
  out.l_trunc = tr.l;
  out.c0prime = c0_prime(r0);
  const double lp1 = 1.0 + tr.l;
  const double s16 = 16.0 * std::sqrt(2.0);
  out.log_explicit = 8.0 * std::pow(lp1, 2 * d - 2) *
                     (std::log1p(s16 * C0R * out.c0prime / delta) +
                      std::log1p(s16 * C0R * eps * lp1 * lp1 / delta));
  const double p = -1.0 / tau;
  out.envelope_base = std::log(1.0 / delta) + eps / delta +
                      (eps > 0.0 ? std::pow(eps / delta, p) : 0.0);
  out.eta_required = out.log_explicit / std::pow(out.envelope_base, 2 * d + 1);
  return out;
}

// Kolmogorov packing lower bound: log|Z| >= 2^{-d-1} (mu beta / theta)^{d/q}.
inline double kolmogorov_log_count(double theta, double beta, double q, int d, double mu) {
  if (!(theta > 0.0 && theta < mu * beta))
    throw std::invalid_argument("kolmogorov_log_count: need theta in (0, mu beta)");
  return std::pow(2.0, -d - 1) * std::pow(mu * beta / theta, d / q);
}

// Calibrated mu of the bump construction: the largest theta/beta ratio the
// cell size cap h <= r0/4 admits, mu = (r0/4)^q / ||chi||_{C^q}.
inline double bump_family_mu(double q, double r0) {
  return std::pow(0.25 * r0, q) / bump_cq_norm(q);
}

// theta-distinguishable set of C^q absorption perturbations: disjoint cells
// of radius h on a square lattice inside K, each carrying theta chi(|x-c|/h)
// when switched on. Distinct patterns differ by exactly theta in sup norm at
// some cell center.
struct BumpFamily {
  double theta = 0.0, beta = 0.0, q = 2.0, r0 = 0.5;
  double h = 0.0;
  double chi_cq = 0.0;  // calibrated ||chi||_{C^q}
  double mu = 0.0;
  AbsorptionField base;
  std::vector<Vec2> cells;
  std::vector<std::pair<int, int>> lattice;  // integer cell coordinates
  std::vector<std::vector<uint8_t>> patterns;

  int ncells() const { return static_cast<int>(cells.size()); }
  int size() const { return static_cast<int>(patterns.size()); }

  std::vector<uint8_t> checkerboard_pattern(int parity) const {
    std::vector<uint8_t> pat(cells.size());
    for (size_t c = 0; c < cells.size(); ++c)
      pat[c] = static_cast<uint8_t>(((lattice[c].first + lattice[c].second) & 1) == parity);
    return pat;
  }

  // perturbation field of a pattern, without the base coefficient.
  // Cells are disjoint on a lattice of pitch 2h, so evaluation reduces to one
  // lattice lookup: the disk around center ((ix+.5) 2h, (iy+.5) 2h) lies in
  // the square [ix 2h, (ix+1) 2h) x [iy 2h, (iy+1) 2h).
  AbsorptionField bumps_only(const std::vector<uint8_t>& pattern) const {
    if (pattern.size() != cells.size())
      throw std::invalid_argument("BumpFamily: pattern size mismatch");
    AbsorptionField f;
    const double th = theta, hh = h;
    std::map<std::pair<int, int>, Vec2> on_cells;
    for (size_t c = 0; c < cells.size(); ++c)
      if (pattern[c]) on_cells[lattice[c]] = cells[c];
    f.value = [th, hh, on_cells](const Vec2& x) {
      const int ix = static_cast<int>(std::floor(x[0] / (2.0 * hh)));
      const int iy = static_cast<int>(std::floor(x[1] / (2.0 * hh)));
      auto it = on_cells.find({ix, iy});
      if (it == on_cells.end()) return 0.0;
      return th * bump_profile((x - it->second).norm() / hh);
    };
    f.support_radius = r0;
    f.smoothness_q = q;
    f.sup_bound = theta;
    f.cq_bound = beta;
    f.feature_scale = h;
    f.family = "kolmogorov";
    for (size_t c = 0; c < cells.size(); ++c) {
      if (!pattern[c]) continue;
      QuadPatch p;
      p.kind = QuadPatch::Kind::cartesian_box;
      p.a0 = cells[c][0] - h;
      p.a1 = cells[c][0] + h;
      p.b0 = cells[c][1] - h;
      p.b1 = cells[c][1] + h;
      p.na = 12;
      p.nb = 12;
      f.patches.push_back(p);
    }
    return f;
  }

  // base + pattern perturbation
  AbsorptionField member(const std::vector<uint8_t>& pattern) const {
    AbsorptionField bumps = bumps_only(pattern);
    if (base.is_zero) return bumps;
    AbsorptionField f = bumps;
    auto bval = base.value;
    auto pval = bumps.value;
    f.value = [bval, pval](const Vec2& x) { return bval(x) + pval(x); };
    f.sup_bound = base.sup_bound + theta;
    f.cq_bound = base.cq_bound + beta;
    f.feature_scale = std::min(base.feature_scale, h);
    f.family = "kolmogorov+" + base.family;
    for (const QuadPatch& p : base.patches) f.patches.push_back(p);
    f.is_radial = false;
    return f;
  }

  AbsorptionField member(int idx) const { return member(patterns.at(idx)); }

  // exact sup distance between two members, attained at a cell center
  double sup_distance(const std::vector<uint8_t>& a, const std::vector<uint8_t>& b) const {
    for (size_t c = 0; c < cells.size(); ++c)
      if (a[c] != b[c]) return theta;
    return 0.0;
  }
};

inline BumpFamily build_bump_family(double theta, double beta, double q, double r0, int count,
                                    uint64_t seed = 0,
                                    const AbsorptionField* base = nullptr,
                                    double min_h = 0.015) {
  if (!(theta > 0.0)) throw std::invalid_argument("build_bump_family: theta must be positive");
  if (!(beta > 0.0)) throw std::invalid_argument("build_bump_family: beta must be positive");
  if (!(q > 0.0 && r0 > 0.0 && r0 < 1.0))
    throw std::invalid_argument("build_bump_family: bad q or r0");
  BumpFamily fam;
  fam.theta = theta;
  fam.beta = beta;
  fam.q = q;
  fam.r0 = r0;
  fam.chi_cq = bump_cq_norm(q);
  fam.mu = bump_family_mu(q, r0);
  fam.base = base ? *base : absorption::zero(r0);
  const double h_budget = std::pow(theta * fam.chi_cq / beta, 1.0 / q);
  fam.h = std::min(0.25 * r0, h_budget);
  if (h_budget > 0.25 * r0)
    throw std::invalid_argument(
        "build_bump_family: infeasible, C^q budget needs cell size " + std::to_string(h_budget) +
        " > r0/4 (limiting constraint: theta <= mu*beta)");
  if (fam.h < min_h)
    throw std::invalid_argument("build_bump_family: infeasible, cell size " +
                                std::to_string(fam.h) +
                                " below grid resolution (limiting constraint: min_h)");
  const double a = 2.0 * fam.h;
  const int n = static_cast<int>(std::ceil(r0 / a)) + 1;
  for (int iy = -n; iy < n; ++iy) {
    for (int ix = -n; ix < n; ++ix) {
      const Vec2 c((ix + 0.5) * a, (iy + 0.5) * a);
      if (c.norm() <= r0 - fam.h) {
        fam.cells.push_back(c);
        fam.lattice.emplace_back(ix, iy);
      }
    }
  }
  if (fam.cells.empty())
    throw std::invalid_argument("build_bump_family: no cells fit inside K");
  if (count > 0) {
    if (fam.ncells() < 63 && count > (1LL << fam.ncells()))
      throw std::invalid_argument("build_bump_family: count exceeds 2^ncells");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> bit(0, 1);
    std::vector<std::vector<uint8_t>> seen;
    while (static_cast<int>(fam.patterns.size()) < count) {
      std::vector<uint8_t> pat(fam.cells.size());
      for (auto& v : pat) v = static_cast<uint8_t>(bit(rng));
      if (std::find(seen.begin(), seen.end(), pat) != seen.end()) continue;
      seen.push_back(pat);
      fam.patterns.push_back(std::move(pat));
    }
  }
  return fam;
}

struct ProbeRow {
  double eps = 0.0;
  double sup_distance = 0.0;
  double hs_norm = 0.0;
  double xs = 0.0;
  Eigen::VectorXd singular_values;
  std::string regime_label;
  double regime_bound = 0.0;
  bool ok = false;
  std::string error;
};

struct ProbeResult {
  BumpFamily family;
  std::vector<uint8_t> pattern_a, pattern_b;
  double s = 4.0;
  int L = 12;
  std::vector<ProbeRow> rows;
};

// End-to-end instability probe: one theta-separated bump pair (complementary
// checkerboard patterns), Gamma assembled for both members across the eps
// sweep, weighted norms and singular values recorded per row. Per-eps
// failures are recorded and the sweep continues.
inline ProbeResult instability_probe(const AbsorptionField& base, double theta,
                                     std::vector<double> eps_list, int L, double s, double q,
                                     double beta, const PolarGrid& grid,
                                     PeierlsSolver::FanSpec fan = {}, uint64_t seed = 0,
                                     double sigma_s = 1.0, double amplitude_cap = 0.5) {
  if (base.sup_bound + theta > amplitude_cap)
    throw std::invalid_argument("instability_probe: base amplitude plus theta exceeds cap");
  ProbeResult out;
  out.family = build_bump_family(theta, beta, q, base.support_radius, 0, seed, &base);
  out.pattern_a = out.family.checkerboard_pattern(0);
  out.pattern_b = out.family.checkerboard_pattern(1);
  out.s = s;
  out.L = L;
  std::sort(eps_list.begin(), eps_list.end(), std::greater<double>());
  AbsorptionField sigma1 = out.family.member(out.pattern_a);
  AbsorptionField sigma2 = out.family.member(out.pattern_b);
  const double sup_dist = out.family.sup_distance(out.pattern_a, out.pattern_b);
  for (double eps : eps_list) {
    ProbeRow row;
    row.eps = eps;
    row.sup_distance = sup_dist;
    try {
      GammaBaseline zero = GammaBaseline::compute(eps, sigma_s, L, grid, fan);
      GammaMatrix g1 = assemble_gamma(Medium(eps, sigma_s, sigma1), L, grid, fan, &zero);
      GammaMatrix g2 = assemble_gamma(Medium(eps, sigma_s, sigma2), L, grid, fan, &zero);
      GammaMatrix diff = g1;
      diff.value -= g2.value;
      diff.addend1 -= g2.addend1;
      diff.addend2 -= g2.addend2;
      NormReport norm = hs_operator_norm(diff, s);
      row.hs_norm = norm.hs_norm;
      row.xs = norm.xs;
      row.singular_values = norm.singular_values;
      RegimeDecision dec = regime_classify(theta, eps, 2, q);
      row.regime_label = dec.label;
      row.regime_bound = dec.bound;
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace diskrt

#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "diskrt/absorption.hpp"
#include "diskrt/geometry.hpp"
#include "diskrt/transport.hpp"

namespace diskrt {

// Truncated matrix of Gamma(sigma_a) = Lambda_{sigma_a} - Lambda_0 in the
// boundary harmonic basis. Entries are stored as two addends:
//   addend1 = - int_K sigma_a Yhat_test <u_solve> dx          (volume term)
//   addend2 = (1/eps) int_D grad Yhat_test . J^phi_solve dx   (current term)
// with (solve, test) = (mj, nk) for n > m (direct representation) and
// (nk, mj) for m >= n (adjoint representation, realized by velocity reversal).
struct GammaMatrix {
  int L = 0;
  Medium medium;
  Eigen::MatrixXd value;    // (mj, nk)
  Eigen::MatrixXd addend1;  // volume addend per selected representation
  Eigen::MatrixXd addend2;  // current addend per selected representation
  std::vector<uint8_t> repr;  // 'D' direct, 'A' adjoint, row-major (mj, nk)
  int grid_nr = 0, grid_ntheta = 0, fan_ndir = 0, fan_nray = 0;

  int size() const { return 2 * L + 1; }
  uint8_t representation(int mj, int nk) const { return repr[mj * size() + nk]; }
  double max_abs() const { return value.size() ? value.cwiseAbs().maxCoeff() : 0.0; }
};

struct GammaEntry {
  double value = 0.0, addend1 = 0.0, addend2 = 0.0;
  uint8_t repr = 'D';
};

namespace detail {

struct PatchNodes {
  std::vector<Vec2> x;
  std::vector<double> w;  // sigma_a(x) * jacobian * quadrature weight
};

inline PatchNodes sigma_patch_nodes(const AbsorptionField& sigma, int refine = 1) {
  PatchNodes out;
  if (sigma.is_zero) return out;
  if (sigma.patches.empty())
    throw std::logic_error("sigma_patch_nodes: field declares no quadrature patches");
  for (const QuadPatch& p : sigma.patches) {
    visit_patch(p, refine, [&](const Vec2& x, double w) {
      const double s = sigma(x);
      if (s == 0.0) return;
      out.x.push_back(x);
      out.w.push_back(s * w);
    });
  }
  return out;
}

}  // namespace detail

inline std::vector<BoundarySource> basis_sources(int L) {
  std::vector<BoundarySource> sources;
  sources.reserve(2 * L + 1);
  for (int b = 0; b < 2 * L + 1; ++b) {
    auto [m, j] = HarmonicBasis::unflatten(b);
    sources.push_back(BoundarySource::mode(m, j));
  }
  return sources;
}

// Zero-absorption basis solves and moments, shared between the media of a
// sweep at fixed (eps, grid, fan).
struct GammaBaseline {
  double epsilon = 0.0, sigma_s = 1.0;
  Eigen::MatrixXd flux, jx, jy;

  static GammaBaseline compute(double eps, double sigma_s, int L, const PolarGrid& grid,
                               PeierlsSolver::FanSpec fan = {}) {
    GammaBaseline base;
    base.epsilon = eps;
    base.sigma_s = sigma_s;
    Medium med(eps, sigma_s, absorption::zero());
    PeierlsSolver solver(med, grid, fan);
    base.flux = solver.solve_basis(L);
    solver.first_moment_batch(base.flux, basis_sources(L), base.jx, base.jy);
    return base;
  }
};

// Assembles both volume representations of the Gamma entries from forward
// solves only: the adjoint solutions coincide with forward ones under
// velocity reversal (isotropic scattering), flipping the sign of the current.
// One transport factorization per medium serves every basis function.
class GammaAssembler {
 public:
  GammaAssembler(const Medium& med, int L, const PolarGrid& grid,
                 PeierlsSolver::FanSpec fan = {}, const GammaBaseline* shared = nullptr)
      : med_(med), L_(L), grid_(&grid), fan_(fan) {
    if (L < 0) throw std::invalid_argument("GammaAssembler: L >= 0 required");
    const int nb = 2 * L + 1;

    PeierlsSolver solver_med(med, grid, fan);
    Eigen::MatrixXd flux_med = solver_med.solve_basis(L);
    std::vector<BoundarySource> sources = basis_sources(L);
    Eigen::MatrixXd jx_med, jy_med;
    solver_med.first_moment_batch(flux_med, sources, jx_med, jy_med);

    if (shared) {
      if (shared->epsilon != med.epsilon || shared->sigma_s != med.sigma_s ||
          shared->flux.cols() < nb)
        throw std::invalid_argument("GammaAssembler: baseline mismatch");
      jx_med -= shared->jx.leftCols(nb);  // J^phi = J - J_0
      jy_med -= shared->jy.leftCols(nb);
    } else {
      GammaBaseline base = GammaBaseline::compute(med.epsilon, med.sigma_s, L, grid, fan);
      jx_med -= base.jx;
      jy_med -= base.jy;
    }

    // volume addend: M1(test, solve) = - sum_t w_t Y_test(x_t) <u_solve>(x_t)
    detail::PatchNodes nodes = detail::sigma_patch_nodes(med.sigma_a);
    const int nt = static_cast<int>(nodes.x.size());
    Eigen::MatrixXd ext(nt, nb), flux_at(nt, nb);
    for (int t = 0; t < nt; ++t) {
      const InterpStencil st = grid.stencil(nodes.x[t]);
      for (int b = 0; b < nb; ++b) {
        auto [m, j] = HarmonicBasis::unflatten(b);
        ext(t, b) = HarmonicBasis::extension_value(m, j, nodes.x[t]) * nodes.w[t];
        double v = 0.0;
        for (int c = 0; c < st.count; ++c) v += st.w[c] * flux_med(st.idx[c], b);
        flux_at(t, b) = v;
      }
    }
    m1_ = nt ? Eigen::MatrixXd(-ext.transpose() * flux_at)
             : Eigen::MatrixXd::Zero(nb, nb);

    // current addend: M2(test, solve) = (1/eps) int grad Y_test . J^phi_solve
    const int n = grid.size();
    Eigen::MatrixXd gradx(n, nb), grady(n, nb);
    for (int p = 0; p < n; ++p) {
      const Vec2 x = grid.point(p);
      const double w = grid.weight(p);
      for (int b = 0; b < nb; ++b) {
        auto [m, j] = HarmonicBasis::unflatten(b);
        const Vec2 g = HarmonicBasis::extension_gradient(m, j, x);
        gradx(p, b) = w * g[0];
        grady(p, b) = w * g[1];
      }
    }
    m2_ = (gradx.transpose() * jx_med + grady.transpose() * jy_med) / med.epsilon;
  }

  int L() const { return L_; }
  // both-representation tables, indexed (test, solve)
  const Eigen::MatrixXd& m1() const { return m1_; }
  const Eigen::MatrixXd& m2() const { return m2_; }

  GammaEntry entry(int m, int j, int n, int k) const {
    const int mj = HarmonicBasis::flat_index(m, j);
    const int nk = HarmonicBasis::flat_index(n, k);
    if (m > L_ || n > L_) throw std::invalid_argument("GammaAssembler: order exceeds L");
    GammaEntry e;
    if (m >= n) {  // adjoint path: solve with the lower-order datum Y_nk
      e.addend1 = m1_(mj, nk);
      e.addend2 = m2_(mj, nk);
      e.repr = 'A';
    } else {  // direct path: solve with Y_mj
      e.addend1 = m1_(nk, mj);
      e.addend2 = m2_(nk, mj);
      e.repr = 'D';
    }
    e.value = e.addend1 + e.addend2;
    return e;
  }

  // direct and adjoint evaluations of the same entry (Lemma-style duality
  // check); they agree up to discretization error.
  std::pair<GammaEntry, GammaEntry> entry_both(int m, int j, int n, int k) const {
    const int mj = HarmonicBasis::flat_index(m, j);
    const int nk = HarmonicBasis::flat_index(n, k);
    GammaEntry direct{m1_(nk, mj) + m2_(nk, mj), m1_(nk, mj), m2_(nk, mj), 'D'};
    GammaEntry adjoint{m1_(mj, nk) + m2_(mj, nk), m1_(mj, nk), m2_(mj, nk), 'A'};
    return {direct, adjoint};
  }

  GammaMatrix matrix() const {
    const int nb = 2 * L_ + 1;
    GammaMatrix g;
    g.L = L_;
    g.medium = med_;
    g.value.resize(nb, nb);
    g.addend1.resize(nb, nb);
    g.addend2.resize(nb, nb);
    g.repr.assign(static_cast<size_t>(nb) * nb, 'D');
    for (int mj = 0; mj < nb; ++mj) {
      auto [m, j] = HarmonicBasis::unflatten(mj);
      for (int nk = 0; nk < nb; ++nk) {
        auto [n, k] = HarmonicBasis::unflatten(nk);
        GammaEntry e = entry(m, j, n, k);
        g.value(mj, nk) = e.value;
        g.addend1(mj, nk) = e.addend1;
        g.addend2(mj, nk) = e.addend2;
        g.repr[mj * nb + nk] = e.repr;
      }
    }
    g.grid_nr = grid_->nr();
    g.grid_ntheta = grid_->ntheta();
    g.fan_ndir = fan_.ndir;
    g.fan_nray = fan_.nray;
    return g;
  }

 private:
  Medium med_;
  int L_;
  const PolarGrid* grid_;
  PeierlsSolver::FanSpec fan_;
  Eigen::MatrixXd m1_, m2_;  // (test, solve)
};

inline GammaMatrix assemble_gamma(const Medium& med, int L, const PolarGrid& grid,
                                  PeierlsSolver::FanSpec fan = {},
                                  const GammaBaseline* shared = nullptr) {
  return GammaAssembler(med, L, grid, fan, shared).matrix();
}

inline GammaEntry gamma_entry(const Medium& med, int m, int j, int n, int k,
                              const PolarGrid& grid, PeierlsSolver::FanSpec fan = {}) {
  return GammaAssembler(med, std::max(m, n), grid, fan).entry(m, j, n, k);
}

// sup over tuples of (1 + max(m,n))^{d/2 - s} |a_{mjnk}|
inline double xs_seminorm(const GammaMatrix& g, double s, int d = 2) {
  if (!(s > 0.5 * d)) throw std::invalid_argument("xs_seminorm: require s > d/2");
  const int nb = g.size();
  double sup = 0.0;
  for (int mj = 0; mj < nb; ++mj) {
    const int m = HarmonicBasis::unflatten(mj).first;
    for (int nk = 0; nk < nb; ++nk) {
      const int n = HarmonicBasis::unflatten(nk).first;
      const double w = std::pow(1.0 + std::max(m, n), 0.5 * d - s);
      sup = std::max(sup, w * std::abs(g.value(mj, nk)));
    }
  }
  return sup;
}

struct NormReport {
  double s = 4.0;
  double tau = -1.0;  // (d+4)/2 - s at d = 2
  double xs = 0.0;
  double hs_norm = 0.0;
  Eigen::VectorXd singular_values;  // of the weighted matrix, nonincreasing
};

// H^s -> H^{-s} operator norm under the (1+m)^s coefficient-weight model:
// spectral norm of W A W with W = diag((1+m)^{-s}).
inline NormReport hs_operator_norm(const GammaMatrix& g, double s, int d = 2) {
  if (!(s > 0.5 * d)) throw std::invalid_argument("hs_operator_norm: require s > d/2");
  const int nb = g.size();
  Eigen::VectorXd w(nb);
  for (int b = 0; b < nb; ++b)
    w[b] = std::pow(1.0 + HarmonicBasis::unflatten(b).first, -s);
  // operator matrix maps source coefficients (mj) to output coefficients (nk)
  Eigen::MatrixXd A = w.asDiagonal() * g.value.transpose() * w.asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
  NormReport rep;
  rep.s = s;
  rep.tau = 0.5 * (d + 4) - s;
  rep.xs = xs_seminorm(g, s, d);
  rep.singular_values = svd.singularValues();
  rep.hs_norm = rep.singular_values.size() ? rep.singular_values[0] : 0.0;
  return rep;
}

struct DecayReport {
  std::vector<int> l;
  std::vector<double> sup_a1, sup_a2;    // shell sup of |addend| over max(m,n) = l
  std::vector<double> diag_a1, diag_a2;  // largest diagonal |addend| at order l
  double m1_slope_shell = 0.0;  // LS slope of log(sup|a1|/(1+l)) vs l
  double m1_slope_diag = 0.0;
  bool fit_valid = false;
  int fit_lmin = 0, fit_lmax = 0;  // usable range above the noise floor
  int crossover_l = 0;             // first l with r0^l <= eps (1+l)
  double noise_floor = 1e-8;
};

inline DecayReport entry_decay_report(const GammaMatrix& g, int fit_lmin = 2,
                                      int fit_lmax = -1) {
  DecayReport rep;
  const int nb = g.size();
  if (fit_lmax < 0) fit_lmax = g.L - 2;
  rep.l.resize(g.L + 1);
  rep.sup_a1.assign(g.L + 1, 0.0);
  rep.sup_a2.assign(g.L + 1, 0.0);
  rep.diag_a1.assign(g.L + 1, 0.0);
  rep.diag_a2.assign(g.L + 1, 0.0);
  for (int l = 0; l <= g.L; ++l) rep.l[l] = l;
  for (int mj = 0; mj < nb; ++mj) {
    const int m = HarmonicBasis::unflatten(mj).first;
    for (int nk = 0; nk < nb; ++nk) {
      const int n = HarmonicBasis::unflatten(nk).first;
      const int l = std::max(m, n);
      rep.sup_a1[l] = std::max(rep.sup_a1[l], std::abs(g.addend1(mj, nk)));
      rep.sup_a2[l] = std::max(rep.sup_a2[l], std::abs(g.addend2(mj, nk)));
      if (mj == nk) {
        rep.diag_a1[l] = std::max(rep.diag_a1[l], std::abs(g.addend1(mj, nk)));
        rep.diag_a2[l] = std::max(rep.diag_a2[l], std::abs(g.addend2(mj, nk)));
      }
    }
  }
  // least-squares slope over usable l range (entries above the noise floor)
  auto fit = [&](const std::vector<double>& a, int lo, int hi, bool& valid, int& out_lo,
                 int& out_hi) {
    std::vector<double> xs, ys;
    for (int l = lo; l <= hi && l <= g.L; ++l) {
      if (a[l] < rep.noise_floor) continue;
      xs.push_back(l);
      ys.push_back(std::log(a[l] / (1.0 + l)));
    }
    valid = xs.size() >= 3;
    if (!valid) return 0.0;
    out_lo = static_cast<int>(xs.front());
    out_hi = static_cast<int>(xs.back());
    const size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
  };
  bool valid_diag = false;
  int dlo = 0, dhi = 0;
  rep.m1_slope_shell = fit(rep.sup_a1, fit_lmin, fit_lmax, rep.fit_valid, rep.fit_lmin,
                           rep.fit_lmax);
  rep.m1_slope_diag = fit(rep.diag_a1, fit_lmin, fit_lmax, valid_diag, dlo, dhi);
  const double r0 = g.medium.sigma_a.support_radius;
  const double eps = g.medium.epsilon;
  int l = 0;
  while (l < 1000 && std::pow(r0, l) > eps * (1.0 + l)) ++l;
  rep.crossover_l = l;
  return rep;
}

// scaling exponent of the current addend across an eps family:
// LS slope of log sup_{max=l} |a2| against log eps
struct EpsScaling {
  int l = 0;
  std::vector<double> eps, sup_a2;
  double exponent = 0.0;
  std::vector<double> ratios;  // consecutive |a2| ratios
};

inline EpsScaling m2_eps_scaling(const std::vector<GammaMatrix>& family, int l) {
  EpsScaling out;
  out.l = l;
  for (const GammaMatrix& g : family) {
    double sup = 0.0;
    const int nb = g.size();
    for (int mj = 0; mj < nb; ++mj)
      for (int nk = 0; nk < nb; ++nk) {
        const int m = HarmonicBasis::unflatten(mj).first;
        const int n = HarmonicBasis::unflatten(nk).first;
        if (std::max(m, n) == l)
          sup = std::max(sup, std::abs(g.addend2(mj, nk)));
      }
    out.eps.push_back(g.medium.epsilon);
    out.sup_a2.push_back(sup);
  }
  const size_t n = out.eps.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double x = std::log(out.eps[i]);
    const double y = std::log(std::max(out.sup_a2[i], 1e-300));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  if (n >= 2) out.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  for (size_t i = 1; i < n; ++i) out.ratios.push_back(out.sup_a2[i] / out.sup_a2[i - 1]);
  return out;
}

}  // namespace diskrt

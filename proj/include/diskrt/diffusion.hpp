#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diskrt/absorption.hpp"
#include "diskrt/geometry.hpp"
#include "diskrt/transport.hpp"

namespace diskrt {

// Scalar field on the cell-centered polar grid with Dirichlet data attached.
// Evaluation blends the outermost ring with the boundary values, so traces at
// r = 1 are honored exactly.
struct DiffusionField {
  PolarGrid grid{8, 16, PolarGrid::Radial::cells};
  Eigen::VectorXd values;
  std::function<double(double)> dirichlet;  // boundary values by angle
  std::string boundary_desc, source_desc;
  double residual = 0.0;  // max-norm residual of the discrete operator

  double eval(const Vec2& x) const {
    const double r = x.norm();
    const double theta = std::atan2(x[1], x[0]);
    const double r_last = grid.radius(grid.nr() - 1);
    if (r >= r_last) {
      const double t = std::min(1.0, (r - r_last) / (1.0 - r_last));
      InterpStencil st = grid.stencil(r_last, theta);
      double ring = 0.0;
      for (int k = 0; k < 4; ++k) ring += st.w[k] * values[st.idx[k]];
      return (1.0 - t) * ring + t * dirichlet(theta);
    }
    return grid.interpolate(values, x);
  }
};

// Five-point finite differences for  -(1/(d sigma_s)) div(grad U) + sigma_a U = S
// on the unit disk, d = 2, cell-centered polar nodes. The conservative radial
// stencil has zero flux area at the r = 0 face, so no pole unknowns are
// needed; the Dirichlet trace enters through a reflected ghost ring.
class DiffusionSolver {
 public:
  DiffusionSolver(double sigma_s, AbsorptionField sigma_a, int nr = 128, int ntheta = 256)
      : sigma_s_(sigma_s),
        sigma_a_(std::move(sigma_a)),
        grid_(nr, ntheta, PolarGrid::Radial::cells) {
    if (!(sigma_s > 0.0)) throw std::invalid_argument("DiffusionSolver: sigma_s > 0 required");
    if (ntheta % 2 != 0) throw std::invalid_argument("DiffusionSolver: ntheta must be even");
    assemble();
  }

  const PolarGrid& grid() const { return grid_; }

  DiffusionField solve(const std::function<double(const Vec2&)>& source,
                       const std::function<double(double)>& dirichlet) const {
    const int nr = grid_.nr(), nt = grid_.ntheta();
    const double h = grid_.radial_step();
    Eigen::VectorXd rhs(grid_.size());
    for (int i = 0; i < nr; ++i)
      for (int q = 0; q < nt; ++q) rhs[grid_.index(i, q)] = source(grid_.point(i, q));
    // ghost fold: Phi_ghost = 2 g - Phi_last adds 2 c_east g to the rhs
    const double D0 = 1.0 / (2.0 * sigma_s_);
    const double r_last = grid_.radius(nr - 1);
    const double c_east = D0 * (r_last + 0.5 * h) / (r_last * h * h);
    for (int q = 0; q < nt; ++q)
      rhs[grid_.index(nr - 1, q)] += 2.0 * c_east * dirichlet(grid_.angle(q));
    DiffusionField field;
    field.grid = grid_;
    field.values = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("DiffusionSolver: sparse solve failed");
    field.dirichlet = dirichlet;
    field.residual = (mat_ * field.values - rhs).cwiseAbs().maxCoeff();
    return field;
  }

  // Nodal gradient by centered differences; across-pole values close the
  // stencil at the innermost ring, boundary data at the outermost.
  void gradient(const DiffusionField& f, Eigen::VectorXd& gx, Eigen::VectorXd& gy) const {
    const int nr = grid_.nr(), nt = grid_.ntheta();
    const double h = grid_.radial_step();
    gx.resize(grid_.size());
    gy.resize(grid_.size());
    for (int i = 0; i < nr; ++i) {
      for (int q = 0; q < nt; ++q) {
        const int idx = grid_.index(i, q);
        const double r = grid_.radius(i);
        double dphi_dr;
        if (i == 0) {
          const double across = f.values[grid_.index(0, (q + nt / 2) % nt)];
          dphi_dr = (f.values[grid_.index(1, q)] - across) / (2.0 * h);
        } else if (i == nr - 1) {
          const double gb = f.dirichlet ? f.dirichlet(grid_.angle(q)) : 0.0;
          dphi_dr = (gb - f.values[grid_.index(i - 1, q)]) / (1.5 * h);
        } else {
          dphi_dr = (f.values[grid_.index(i + 1, q)] - f.values[grid_.index(i - 1, q)]) /
                    (2.0 * h);
        }
        const double dphi_dt = (f.values[grid_.index(i, (q + 1) % nt)] -
                                f.values[grid_.index(i, (q + nt - 1) % nt)]) /
                               (2.0 * grid_.dtheta());
        const double ct = std::cos(grid_.angle(q)), st = std::sin(grid_.angle(q));
        gx[idx] = ct * dphi_dr - st * dphi_dt / r;
        gy[idx] = st * dphi_dr + ct * dphi_dt / r;
      }
    }
  }

 private:
  void assemble() {
    const int nr = grid_.nr(), nt = grid_.ntheta();
    const double h = grid_.radial_step();
    const double ht = grid_.dtheta();
    const double D0 = 1.0 / (2.0 * sigma_s_);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(grid_.size()) * 5);
    for (int i = 0; i < nr; ++i) {
      const double r = grid_.radius(i);
      const double rw = (i == 0) ? 0.0 : r - 0.5 * h;
      const double re = r + 0.5 * h;
      const double cw = D0 * rw / (r * h * h);
      const double ce = D0 * re / (r * h * h);
      const double ca = D0 / (r * r * ht * ht);
      for (int q = 0; q < nt; ++q) {
        const int idx = grid_.index(i, q);
        double diag = cw + ce + 2.0 * ca + sigma_a_(grid_.point(i, q));
        if (i > 0) trip.emplace_back(idx, grid_.index(i - 1, q), -cw);
        if (i < nr - 1)
          trip.emplace_back(idx, grid_.index(i + 1, q), -ce);
        else
          diag += ce;  // ghost fold for the Dirichlet ring
        trip.emplace_back(idx, grid_.index(i, (q + 1) % nt), -ca);
        trip.emplace_back(idx, grid_.index(i, (q + nt - 1) % nt), -ca);
        trip.emplace_back(idx, idx, diag);
      }
    }
    mat_.resize(grid_.size(), grid_.size());
    mat_.setFromTriplets(trip.begin(), trip.end());
    lu_.compute(mat_);
    if (lu_.info() != Eigen::Success)
      throw std::runtime_error("DiffusionSolver: singular discrete operator");
  }

  double sigma_s_;
  AbsorptionField sigma_a_;
  PolarGrid grid_;
  Eigen::SparseMatrix<double> mat_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

inline DiffusionField solve_diffusion(const AbsorptionField& sigma_a, double sigma_s,
                                      const std::function<double(const Vec2&)>& source,
                                      const std::function<double(double)>& dirichlet,
                                      int nr = 128, int ntheta = 256) {
  DiffusionSolver solver(sigma_s, sigma_a, nr, ntheta);
  return solver.solve(source, dirichlet);
}

struct EntryPrediction {
  double value = 0.0;
  double volume_term = 0.0;    // -int sigma_a Y_nk (U0 + Phi)
  double gradient_term = 0.0;  // -(1/(d sigma_s)) int grad Y_nk . grad Phi  (~0)
};

// Diffusion-limit prediction of the albedo matrix entry: the eps -> 0 value
// that gamma entries approach at O(eps).
inline EntryPrediction diffusion_entry_prediction(const AbsorptionField& sigma_a, int m, int j,
                                                  int n, int k, double sigma_s, int nr = 128,
                                                  int ntheta = 256) {
  EntryPrediction out;
  if (sigma_a.is_zero) return out;
  const HarmonicMode src = harmonic_mode(m, j);
  const HarmonicMode test = harmonic_mode(n, k);
  DiffusionSolver solver(sigma_s, sigma_a, nr, ntheta);
  auto source = [&](const Vec2& x) { return -sigma_a(x) * src.extension(x); };
  auto zero_bc = [](double) { return 0.0; };
  DiffusionField phi = solver.solve(source, zero_bc);
  out.volume_term = -integrate_against(
      sigma_a, [&](const Vec2& x) { return test.extension(x) * (src.extension(x) + phi.eval(x)); });
  Eigen::VectorXd gx, gy;
  solver.gradient(phi, gx, gy);
  double acc = 0.0;
  const PolarGrid& g = solver.grid();
  for (int idx = 0; idx < g.size(); ++idx) {
    const Vec2 grad_test = test.gradient(g.point(idx));
    acc += g.weight(idx) * (grad_test[0] * gx[idx] + grad_test[1] * gy[idx]);
  }
  out.gradient_term = -acc / (2.0 * sigma_s);
  out.value = out.volume_term + out.gradient_term;
  return out;
}

struct DiffusionLimitRow {
  double epsilon = 0.0;
  double interior_error = 0.0;  // L2 error on |x| <= 0.8
};

struct DiffusionLimitReport {
  int mode_m = 0;
  std::vector<DiffusionLimitRow> rows;
  std::vector<double> ratios;  // error ratios between consecutive eps
};

// Interior comparison of the transport flux <u_m> against U_0 + Phi for a
// family of Knudsen numbers. Boundary layers are excluded by the 0.8 cut.
inline DiffusionLimitReport diffusion_limit_report(const AbsorptionField& sigma_a, double sigma_s,
                                                   int m, const std::vector<double>& eps_list,
                                                   const PolarGrid& tgrid,
                                                   PeierlsSolver::FanSpec fan = {},
                                                   int diff_nr = 128, int diff_ntheta = 256) {
  DiffusionLimitReport rep;
  rep.mode_m = m;
  const HarmonicMode mode = harmonic_mode(m, 1);
  BoundarySource f = BoundarySource::mode(m, 1);

  DiffusionField phi;
  bool have_phi = false;
  if (!sigma_a.is_zero) {
    DiffusionSolver dsolver(sigma_s, sigma_a, diff_nr, diff_ntheta);
    auto source = [&](const Vec2& x) { return -sigma_a(x) * mode.extension(x); };
    phi = dsolver.solve(source, [](double) { return 0.0; });
    have_phi = true;
  }

  for (double eps : eps_list) {
    Medium med(eps, sigma_s, sigma_a);
    PeierlsSolver solver(med, tgrid, fan);
    ScalarFlux flux = solver.solve(f);
    double err2 = 0.0;
    for (int idx = 0; idx < tgrid.size(); ++idx) {
      const Vec2 x = tgrid.point(idx);
      if (x.norm() > 0.8) continue;
      double ref = mode.extension(x);
      if (have_phi) ref += phi.eval(x);
      const double d = flux.values[idx] - ref;
      err2 += tgrid.weight(idx) * d * d;
    }
    rep.rows.push_back({eps, std::sqrt(err2)});
  }
  for (size_t i = 1; i < rep.rows.size(); ++i)
    rep.ratios.push_back(rep.rows[i - 1].interior_error /
                         std::max(rep.rows[i].interior_error, 1e-300));
  return rep;
}

}  // namespace diskrt

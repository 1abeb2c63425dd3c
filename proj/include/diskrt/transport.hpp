#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "diskrt/absorption.hpp"
#include "diskrt/geometry.hpp"

namespace diskrt {

// Optical state of the scaled transport problem.
struct Medium {
  double epsilon = 0.1;
  double sigma_s = 1.0;
  AbsorptionField sigma_a;

  Medium() : sigma_a(absorption::zero()) {}
  Medium(double eps, double sig_s, AbsorptionField sa)
      : epsilon(eps), sigma_s(sig_s), sigma_a(std::move(sa)) {
    validate();
  }
  void validate() const {
    if (!(epsilon > 0.0 && epsilon <= 0.5))
      throw std::invalid_argument("Medium: epsilon must lie in (0, 0.5]");
    if (!(sigma_s > 0.0)) throw std::invalid_argument("Medium: sigma_s must be positive");
  }
  // transport rate sigma_s/eps governing the exponential kernel
  double beta() const { return sigma_s / epsilon; }
  Medium with_zero_absorption() const {
    Medium m = *this;
    m.sigma_a = absorption::zero(sigma_a.support_radius);
    return m;
  }
};

// Boundary illumination, either as harmonic coefficients or an evaluator.
struct BoundarySource {
  Eigen::VectorXd coeff;
  std::function<double(double)> fn;

  double eval(double theta) const {
    if (fn) return fn(theta);
    const int n = static_cast<int>(coeff.size());
    if (n == 0) return 0.0;
    const int L = n / 2;  // covers sizes 2L and 2L+1
    std::vector<double> vals(2 * L + 1);
    HarmonicBasis::boundary_values(L, theta, vals.data());
    double v = 0.0;
    for (int b = 0; b < n; ++b) v += coeff[b] * vals[b];
    return v;
  }

  static BoundarySource constant(double c) {
    BoundarySource s;
    s.coeff = Eigen::VectorXd::Constant(1, c * std::sqrt(2.0 * pi));
    return s;
  }
  static BoundarySource mode(int m, int j, double amp = 1.0) {
    BoundarySource s;
    s.coeff = Eigen::VectorXd::Zero(2 * m + 1);
    s.coeff[HarmonicBasis::flat_index(m, j)] = amp;
    return s;
  }
};

struct ScalarFlux {
  Eigen::VectorXd values;  // <u> at grid nodes
  BoundarySource source;
  double residual_norm = 0.0;  // ||(I-K1)u - K2 f|| / ||K2 f||
};

struct CurrentField {
  Eigen::VectorXd jx, jy;  // J = int v u dmu at grid nodes
};

struct BoundaryCurrent {
  Eigen::VectorXd theta;   // boundary angles
  Eigen::VectorXd values;  // scaled normal current (1/eps) J.n
  Eigen::VectorXd coeff;   // harmonic coefficients up to order L
};

namespace detail {

struct RayClip {
  double t0 = 0.0, t1 = 0.0;
  bool hit = false;
};

// intersection of {origin + t dir, t >= 0} with B(0, radius)
inline RayClip clip_ray_to_ball(const Vec2& origin, const Vec2& dir, double radius) {
  RayClip c;
  const double b = origin.dot(dir);
  const double disc = b * b - (origin.squaredNorm() - radius * radius);
  if (disc <= 0.0) return c;
  const double s = std::sqrt(disc);
  c.t0 = std::max(0.0, -b - s);
  c.t1 = std::max(0.0, -b + s);
  c.hit = c.t1 > c.t0;
  return c;
}

// integral of sigma_a along origin + t dir for t in [a,b], subdivided to the
// field's feature scale, fixed-order Gauss per chunk
inline double line_absorption(const AbsorptionField& f, const Vec2& origin, const Vec2& dir,
                              double a, double b) {
  if (f.is_zero || b <= a) return 0.0;
  static const GaussRule g8 = gauss_legendre(8);
  double step = f.feature_scale * 0.25;
  if (!std::isfinite(step) || step <= 0.0) step = b - a;
  const int nchunk = std::max(1, static_cast<int>(std::ceil((b - a) / step)));
  const double h = (b - a) / nchunk;
  double acc = 0.0;
  for (int c = 0; c < nchunk; ++c) {
    const double t0 = a + c * h;
    for (int i = 0; i < 8; ++i) {
      const double t = t0 + h * g8.node[i];
      acc += g8.weight[i] * f(origin + t * dir);
    }
  }
  return acc * h;
}

}  // namespace detail

// Exponent of the Peierls kernel attenuation between two points:
//   (|x-y|/eps) * (sigma_s + eps^2 * mean of sigma_a along [x,y]).
// Symmetric in (x,y) by construction.
inline double optical_depth(const Vec2& x, const Vec2& y, const Medium& med) {
  const double dist = (y - x).norm();
  if (dist == 0.0) throw std::invalid_argument("optical_depth: x and y must differ");
  double absorb = 0.0;
  if (!med.sigma_a.is_zero) {
    const Vec2 dir = (y - x) / dist;
    // direction-independent sweep order keeps exact (x,y) symmetry
    if (x[0] < y[0] || (x[0] == y[0] && x[1] <= y[1])) {
      detail::RayClip c = detail::clip_ray_to_ball(x, dir, med.sigma_a.support_radius);
      if (c.hit) absorb = detail::line_absorption(med.sigma_a, x, dir, c.t0, std::min(c.t1, dist));
    } else {
      return optical_depth(y, x, med);
    }
  }
  return (med.sigma_s * dist + med.epsilon * med.epsilon * absorb) / med.epsilon;
}

inline double sphere_area(int d) {
  // area of S^{d-1}
  return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d);
}

// Fourier transform of the ballistic kernel, closed form at d = 2.
inline double kernel_hat(double xi_norm, double eps, double sigma_s) {
  const double a = eps * xi_norm / sigma_s;
  return 1.0 / std::sqrt(1.0 + a * a);
}

// Integral form (nu_{d-1}/nu_d) int_0^pi sin^{d-2} / (1 + a^2 cos^2) dtheta,
// exposed for cross-checking the closed form.
inline double kernel_hat_integral(double xi_norm, double eps, double sigma_s, int d = 2,
                                  int nquad = 200) {
  const double a2 = std::pow(eps * xi_norm / sigma_s, 2);
  GaussRule g = gauss_legendre(nquad);
  double acc = 0.0;
  for (int i = 0; i < nquad; ++i) {
    const double t = pi * g.node[i];
    const double c = std::cos(t);
    acc += g.weight[i] * std::pow(std::sin(t), d - 2) / (1.0 + a2 * c * c);
  }
  return acc * pi * sphere_area(d - 1) / sphere_area(d);
}

struct OperatorNormResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Nystrom discretization of the Peierls integral equation on a polar grid.
// Per-target ray fans absorb the 1/|x-y| singularity into polar coordinates
// and the exponential weight into the node map, so rows assemble from plain
// Gauss weights times an interpolation stencil. The fans rotate with the
// target's polar angle, which keeps the discrete operator equivariant under
// grid rotations.
struct FanSpec {
  int ndir = 64;
  int nray = 48;
};

class PeierlsSolver {
 public:
  using FanSpec = ::diskrt::FanSpec;

  PeierlsSolver(Medium med, const PolarGrid& grid, FanSpec fan = {})
      : med_(std::move(med)), grid_(&grid), fan_(fan) {
    med_.validate();
    assemble();
  }

  const Medium& medium() const { return med_; }
  const PolarGrid& grid() const { return *grid_; }

  // K2 f at every grid node
  Eigen::VectorXd boundary_term(const BoundarySource& f) const {
    const int n = grid_->size();
    Eigen::VectorXd b(n);
    for (int p = 0; p < n; ++p) {
      double acc = 0.0;
      for (int k = 0; k < fan_.ndir; ++k)
        acc += exit_atten_(p, k) * f.eval(exit_angle_(p, k));
      b[p] = acc / fan_.ndir;
    }
    return b;
  }

  ScalarFlux solve(const BoundarySource& f) const {
    ensure_factorized();
    Eigen::VectorXd rhs = boundary_term(f);
    ScalarFlux flux;
    flux.values = lu_.solve(rhs);
    flux.source = f;
    const double rhs_norm = rhs.norm();
    const double res = (flux.values - K1_ * flux.values - rhs).norm();
    flux.residual_norm = rhs_norm > 0.0 ? res / rhs_norm : res;
    if (flux.residual_norm > 1e-10 && rhs_norm > 0.0)
      throw std::runtime_error("PeierlsSolver: linear solve failed, smallest singular value ~ " +
                               std::to_string(smallest_singular_value()));
    return flux;
  }

  // fluxes for all basis functions up to order L, one column each
  Eigen::MatrixXd solve_basis(int L) const {
    ensure_factorized();
    const int n = grid_->size();
    const int nb = 2 * L + 1;
    Eigen::MatrixXd rhs(n, nb);
    std::vector<double> vals(nb);
    for (int p = 0; p < n; ++p) {
      for (int b = 0; b < nb; ++b) rhs(p, b) = 0.0;
      for (int k = 0; k < fan_.ndir; ++k) {
        HarmonicBasis::boundary_values(L, exit_angle_(p, k), vals.data());
        const double a = exit_atten_(p, k);
        for (int b = 0; b < nb; ++b) rhs(p, b) += a * vals[b];
      }
      for (int b = 0; b < nb; ++b) rhs(p, b) /= fan_.ndir;
    }
    return lu_.solve(rhs);
  }

  // First angular moments of several solutions in one pass over the fans.
  // fluxes: one column per solution; sources: matching boundary data.
  void first_moment_batch(const Eigen::MatrixXd& fluxes,
                          const std::vector<BoundarySource>& sources, Eigen::MatrixXd& jx,
                          Eigen::MatrixXd& jy) const {
    const int n = grid_->size();
    const int nb = static_cast<int>(fluxes.cols());
    if (static_cast<int>(sources.size()) != nb)
      throw std::invalid_argument("first_moment_batch: sources/fluxes mismatch");
    jx.setZero(n, nb);
    jy.setZero(n, nb);
    const double beta = med_.beta();
    std::vector<double> acc(nb);
    for (int p = 0; p < n; ++p) {
      const Vec2 x = grid_->point(p);
      const double anchor = grid_->angle(p % grid_->ntheta());
      RayFan fan(x, fan_.ndir, fan_.nray, beta, anchor);
      for (int k = 0; k < fan_.ndir; ++k) {
        const Vec2 w = fan.direction(k);
        std::fill(acc.begin(), acc.end(), 0.0);
        detail::RayClip clip;
        if (!med_.sigma_a.is_zero)
          clip = detail::clip_ray_to_ball(x, w, med_.sigma_a.support_radius);
        double cum = 0.0, prev = 0.0;
        for (int i = 0; i < fan_.nray; ++i) {
          const double l = fan.node_distance(k, i);
          double afac = 1.0;
          if (clip.hit) {
            const double a = std::max(prev, clip.t0), b = std::min(l, clip.t1);
            if (b > a) cum += detail::line_absorption(med_.sigma_a, x, w, a, b);
            afac = std::exp(-med_.epsilon * cum);
            prev = l;
          }
          const Vec2 y = fan.node_point(k, i);
          const InterpStencil st = grid_->stencil(y);
          const double wt = fan.node_weight(k, i) * afac;
          for (int c = 0; c < st.count; ++c) {
            const double wc = wt * st.w[c];
            const int row = st.idx[c];
            for (int b = 0; b < nb; ++b) acc[b] += wc * fluxes(row, b);
          }
        }
        double exit_fac = fan.survival(k);
        if (clip.hit) {
          const double a = std::max(prev, clip.t0);
          const double b = std::min(fan.exit_distance(k), clip.t1);
          if (b > a) cum += detail::line_absorption(med_.sigma_a, x, w, a, b);
          exit_fac *= std::exp(-med_.epsilon * cum);
        }
        const Vec2 e = fan.exit_point(k);
        const double alpha = std::atan2(e[1], e[0]);
        for (int b = 0; b < nb; ++b) {
          const double tot = acc[b] + exit_fac * sources[b].eval(alpha);
          jx(p, b) -= w[0] * tot / fan_.ndir;
          jy(p, b) -= w[1] * tot / fan_.ndir;
        }
      }
    }
  }

  CurrentField first_moment(const BoundarySource& f, const ScalarFlux& flux) const {
    Eigen::MatrixXd fx(flux.values.size(), 1), jx, jy;
    fx.col(0) = flux.values;
    first_moment_batch(fx, {f}, jx, jy);
    CurrentField cur;
    cur.jx = jx.col(0);
    cur.jy = jy.col(0);
    return cur;
  }

  // Scaled outgoing normal current (1/eps) int v.n u dmu on the boundary.
  // The outward half-sphere contributes -f(x)/pi exactly; the inward half is
  // integrated by Gauss-Legendre in the incidence angle.
  BoundaryCurrent boundary_current(const BoundarySource& f, const ScalarFlux& flux, int L,
                                   int nboundary = 256, int nhalf = 64) const {
    static thread_local int cached_n = -1;
    static thread_local GaussRule half;
    if (cached_n != nhalf) {
      half = gauss_legendre(nhalf);
      cached_n = nhalf;
    }
    const double beta = med_.beta();
    BoundaryCurrent cur;
    cur.theta.resize(nboundary);
    cur.values.resize(nboundary);
    std::vector<double> node_l(fan_.nray), node_w(fan_.nray);
    for (int bidx = 0; bidx < nboundary; ++bidx) {
      const double tb = (bidx + 0.5) * 2.0 * pi / nboundary;
      cur.theta[bidx] = tb;
      const Vec2 xb(std::cos(tb), std::sin(tb));
      double acc = 0.0;
      for (int ia = 0; ia < nhalf; ++ia) {
        const double alpha = pi * (half.node[ia] - 0.5);  // incidence angle
        const double ca = std::cos(alpha);
        const double phi = tb + pi + alpha;  // ray direction angle
        const Vec2 w(std::cos(phi), std::sin(phi));
        const double tau = 2.0 * ca;
        exponential_ray_rule(beta, tau, fan_.nray, node_l.data(), node_w.data());
        detail::RayClip clip;
        if (!med_.sigma_a.is_zero)
          clip = detail::clip_ray_to_ball(xb, w, med_.sigma_a.support_radius);
        double cum = 0.0, prev = 0.0, ray_acc = 0.0;
        for (int i = 0; i < fan_.nray; ++i) {
          const double l = node_l[i];
          double afac = 1.0;
          if (clip.hit) {
            const double a = std::max(prev, clip.t0), b = std::min(l, clip.t1);
            if (b > a) cum += detail::line_absorption(med_.sigma_a, xb, w, a, b);
            afac = std::exp(-med_.epsilon * cum);
            prev = l;
          }
          ray_acc += node_w[i] * afac * grid_->interpolate(flux.values, xb + l * w);
        }
        double exit_fac = std::exp(-beta * tau);
        if (clip.hit) {
          const double a = std::max(prev, clip.t0), b = std::min(tau, clip.t1);
          if (b > a) cum += detail::line_absorption(med_.sigma_a, xb, w, a, b);
          exit_fac *= std::exp(-med_.epsilon * cum);
        }
        const Vec2 e = xb + tau * w;
        ray_acc += exit_fac * f.eval(std::atan2(e[1], e[0]));
        acc += half.weight[ia] * ca * ray_acc;
      }
      // acc approximates (1/pi) int_{-pi/2}^{pi/2} cos(a) [...] da  (gauss on [0,1], x pi/(2pi))
      const double inward = acc * pi / (2.0 * pi);
      cur.values[bidx] = (inward - f.eval(tb) / pi) / med_.epsilon;
    }
    cur.coeff.setZero(2 * L + 1);
    std::vector<double> vals(2 * L + 1);
    const double dth = 2.0 * pi / nboundary;
    for (int bidx = 0; bidx < nboundary; ++bidx) {
      HarmonicBasis::boundary_values(L, cur.theta[bidx], vals.data());
      for (int b = 0; b < 2 * L + 1; ++b) cur.coeff[b] += dth * cur.values[bidx] * vals[b];
    }
    return cur;
  }

  // L^2(D)-weighted spectral norm of the discrete K1 by power iteration on
  // the quadrature-symmetrized matrix D^{1/2} K1 D^{-1/2}.
  OperatorNormResult k1_operator_norm(double tol = 1e-11, int maxit = 20000) const {
    const int n = grid_->size();
    Eigen::VectorXd sq(n), isq(n);
    for (int p = 0; p < n; ++p) {
      const double w = grid_->weight(p);
      sq[p] = std::sqrt(w);
      isq[p] = 1.0 / sq[p];
    }
    Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
    OperatorNormResult res;
    double prev = 0.0;
    for (int it = 0; it < maxit; ++it) {
      Eigen::VectorXd mv = sq.asDiagonal() * (K1_ * (isq.asDiagonal() * v));
      Eigen::VectorXd mtmv = isq.asDiagonal() * (K1_.transpose() * (sq.asDiagonal() * mv));
      const double s2 = v.dot(mtmv);
      v = mtmv.normalized();
      res.iterations = it + 1;
      if (it > 4 && std::abs(s2 - prev) <= tol * std::abs(s2)) {
        res.value = std::sqrt(s2);
        res.converged = true;
        return res;
      }
      prev = s2;
    }
    res.value = std::sqrt(prev);
    return res;
  }

  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>& k1() const {
    return K1_;
  }

  double smallest_singular_value() const {
    ensure_factorized();
    // inverse power iteration with the existing factorization
    const int n = grid_->size();
    Eigen::VectorXd v = Eigen::VectorXd::Random(n).normalized();
    double s = 0.0;
    for (int it = 0; it < 50; ++it) {
      Eigen::VectorXd w = lu_.solve(v);
      w = lu_.transpose().solve(w);
      s = 1.0 / std::sqrt(w.norm());
      v = w.normalized();
    }
    return s;
  }

 private:
  void assemble_row(int p) {
    const Vec2 x = grid_->point(p);
    const double anchor = grid_->angle(p % grid_->ntheta());
    const double dirw = 1.0 / fan_.ndir;
    RayFan fan(x, fan_.ndir, fan_.nray, med_.beta(), anchor);
    for (int k = 0; k < fan_.ndir; ++k) {
      const Vec2 w = fan.direction(k);
      detail::RayClip clip;
      if (!med_.sigma_a.is_zero)
        clip = detail::clip_ray_to_ball(x, w, med_.sigma_a.support_radius);
      double cum = 0.0, prev = 0.0;
      for (int i = 0; i < fan_.nray; ++i) {
        const double l = fan.node_distance(k, i);
        double afac = 1.0;
        if (clip.hit) {
          const double a = std::max(prev, clip.t0), b = std::min(l, clip.t1);
          if (b > a) cum += detail::line_absorption(med_.sigma_a, x, w, a, b);
          afac = std::exp(-med_.epsilon * cum);
          prev = l;
        }
        const InterpStencil st = grid_->stencil(fan.node_point(k, i));
        const double wt = dirw * fan.node_weight(k, i) * afac;
        for (int c = 0; c < st.count; ++c) K1_(p, st.idx[c]) += wt * st.w[c];
      }
      double exit_fac = fan.survival(k);
      if (clip.hit) {
        const double a = std::max(prev, clip.t0);
        const double b = std::min(fan.exit_distance(k), clip.t1);
        if (b > a) cum += detail::line_absorption(med_.sigma_a, x, w, a, b);
        exit_fac *= std::exp(-med_.epsilon * cum);
      }
      const Vec2 e = fan.exit_point(k);
      exit_angle_(p, k) = std::atan2(e[1], e[0]);
      exit_atten_(p, k) = exit_fac;
    }
  }

  void assemble() {
    const int n = grid_->size();
    const int nt = grid_->ntheta();
    K1_.setZero(n, n);
    exit_angle_.resize(n, fan_.ndir);
    exit_atten_.resize(n, fan_.ndir);
    // rotation-invariant media: assemble one target per ring, rotate the row
    const bool rot = med_.sigma_a.is_zero || med_.sigma_a.is_radial;
    if (!rot) {
      for (int p = 0; p < n; ++p) assemble_row(p);
      return;
    }
    for (int i = 0; i < grid_->nr(); ++i) {
      const int p0 = grid_->index(i, 0);
      assemble_row(p0);
      const double* src = K1_.data() + static_cast<size_t>(p0) * n;
      for (int q = 1; q < nt; ++q) {
        const int p = grid_->index(i, q);
        double* dst = K1_.data() + static_cast<size_t>(p) * n;
        for (int ip = 0; ip < grid_->nr(); ++ip) {
          const double* s = src + ip * nt;
          double* d = dst + ip * nt;
          std::copy(s, s + nt - q, d + q);
          std::copy(s + nt - q, s + nt, d);
        }
        for (int k = 0; k < fan_.ndir; ++k) {
          exit_angle_(p, k) = exit_angle_(p0, k) + grid_->angle(q);
          exit_atten_(p, k) = exit_atten_(p0, k);
        }
      }
    }
  }

  void ensure_factorized() const {
    if (!factorized_) {
      const int n = grid_->size();
      Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - K1_;
      lu_.compute(A);
      factorized_ = true;
    }
  }

  Medium med_;
  const PolarGrid* grid_;
  FanSpec fan_;
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> K1_;
  mutable Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  mutable bool factorized_ = false;
  Eigen::MatrixXd exit_angle_, exit_atten_;
};

// Convenience wrappers matching the operation-level interface.

inline ScalarFlux solve_scalar_flux(const Medium& med, const BoundarySource& f,
                                    const PolarGrid& grid, PeierlsSolver::FanSpec fan = {}) {
  return PeierlsSolver(med, grid, fan).solve(f);
}

}  // namespace diskrt

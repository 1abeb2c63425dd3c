#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace diskrt {

using Vec2 = Eigen::Vector2d;

inline constexpr double pi = 3.14159265358979323846;

// Gauss-Legendre nodes and weights on [0,1], by Newton iteration on P_n.
struct GaussRule {
  std::vector<double> node;
  std::vector<double> weight;
};

inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  GaussRule rule;
  rule.node.resize(n);
  rule.weight.resize(n);
  for (int k = 0; k < n; ++k) {
    // initial guess on [-1,1], roots ordered decreasing
    double x = std::cos(pi * (k + 0.75) / (n + 0.5));
    double p1 = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // evaluate P_n(x) and P_{n-1}(x)
      double pm1 = 1.0, pm = x;
      for (int j = 2; j <= n; ++j) {
        double pj = ((2.0 * j - 1.0) * x * pm - (j - 1.0) * pm1) / j;
        pm1 = pm;
        pm = pj;
      }
      double dp = n * (x * pm - pm1) / (x * x - 1.0);
      double dx = pm / dp;
      x -= dx;
      p1 = dp;
      if (std::abs(dx) < 1e-15) break;
    }
    // map from [-1,1] to [0,1]
    rule.node[k] = 0.5 * (1.0 - x);
    rule.weight[k] = 1.0 / ((1.0 - x * x) * p1 * p1);
  }
  return rule;
}

// shared table of small rules; ray quadratures look these up per panel
inline const GaussRule& gauss_legendre_cached(int n) {
  static const std::vector<GaussRule> cache = [] {
    std::vector<GaussRule> c(129);
    for (int k = 1; k <= 128; ++k) c[k] = gauss_legendre(k);
    return c;
  }();
  if (n < 1 || n > 128) throw std::invalid_argument("gauss_legendre_cached: n out of range");
  return cache[n];
}

// D = B(0,1); absorption support K = B(0, r0).
struct DiskDomain {
  double radius = 1.0;
  double r0 = 0.5;

  explicit DiskDomain(double support_radius = 0.5) : r0(support_radius) {
    if (!(r0 > 0.0 && r0 < 1.0))
      throw std::invalid_argument("DiskDomain: require 0 < r0 < 1");
  }
};

// Distance traveled from x along unit direction w until exiting the unit disk.
// Zero when x is on the boundary and w points outward.
inline double boundary_exit_distance(const Vec2& x, const Vec2& w) {
  const double xw = x.dot(w);
  const double disc = 1.0 - x.squaredNorm() + xw * xw;
  if (disc < 0.0) {
    if (disc < -1e-12) throw std::invalid_argument("boundary_exit_distance: x outside disk");
    return std::max(0.0, -xw);
  }
  return std::max(0.0, -xw + std::sqrt(disc));
}

// Real harmonics on the unit circle, orthonormal in L^2(dS):
//   Y_{0,1} = 1/sqrt(2*pi),  Y_{m,1} = cos(m t)/sqrt(pi),  Y_{m,2} = sin(m t)/sqrt(pi).
// The harmonic extension of Y_{m,j} is |x|^m Y_{m,j}(x/|x|) = Re/Im(z^m) up to
// normalization, so values and gradients are evaluated through complex powers.
class HarmonicBasis {
 public:
  explicit HarmonicBasis(int max_order) : max_order_(max_order) {
    if (max_order < 0) throw std::invalid_argument("HarmonicBasis: max_order >= 0");
  }

  int max_order() const { return max_order_; }
  static int multiplicity(int m) { return m == 0 ? 1 : 2; }
  int size() const { return 2 * max_order_ + 1; }

  // flat index over {(m,j)}: (0,1) -> 0, (m,1) -> 2m-1, (m,2) -> 2m
  static int flat_index(int m, int j) {
    check_index(m, j);
    return m == 0 ? 0 : 2 * m - 2 + j;
  }
  static std::pair<int, int> unflatten(int idx) {
    if (idx == 0) return {0, 1};
    return {(idx + 1) / 2, (idx + 1) % 2 + 1};
  }

  static double boundary_value(int m, int j, double theta) {
    check_index(m, j);
    if (m == 0) return 1.0 / std::sqrt(2.0 * pi);
    const double c = 1.0 / std::sqrt(pi);
    return j == 1 ? c * std::cos(m * theta) : c * std::sin(m * theta);
  }

  // fills val[0..2L] with all basis values at angle theta
  static void boundary_values(int max_order, double theta, double* val) {
    val[0] = 1.0 / std::sqrt(2.0 * pi);
    const double c = 1.0 / std::sqrt(pi);
    const double cs = std::cos(theta), sn = std::sin(theta);
    double cm = 1.0, sm = 0.0;  // cos(m t), sin(m t) by recurrence
    for (int m = 1; m <= max_order; ++m) {
      const double cn = cm * cs - sm * sn;
      const double snew = sm * cs + cm * sn;
      cm = cn;
      sm = snew;
      val[2 * m - 1] = c * cm;
      val[2 * m] = c * sm;
    }
  }

  static double extension_value(int m, int j, const Vec2& x) {
    check_index(m, j);
    if (m == 0) return 1.0 / std::sqrt(2.0 * pi);
    const std::complex<double> zm = std::pow(std::complex<double>(x[0], x[1]), m);
    const double c = 1.0 / std::sqrt(pi);
    return j == 1 ? c * zm.real() : c * zm.imag();
  }

  static Vec2 extension_gradient(int m, int j, const Vec2& x) {
    check_index(m, j);
    if (m == 0) return Vec2::Zero();
    const std::complex<double> zp = std::pow(std::complex<double>(x[0], x[1]), m - 1);
    const double c = m / std::sqrt(pi);
    // grad Re(z^m) = m (Re z^{m-1}, -Im z^{m-1}), grad Im(z^m) = m (Im z^{m-1}, Re z^{m-1})
    return j == 1 ? Vec2(c * zp.real(), -c * zp.imag())
                  : Vec2(c * zp.imag(), c * zp.real());
  }

 private:
  static void check_index(int m, int j) {
    if (m < 0 || j < 1 || j > multiplicity(m))
      throw std::invalid_argument("HarmonicBasis: invalid (m,j) index");
  }
  int max_order_;
};

// Single-mode evaluator bundling trace, harmonic extension and its gradient.
struct HarmonicMode {
  int m = 0, j = 1;
  double boundary(double theta) const { return HarmonicBasis::boundary_value(m, j, theta); }
  double extension(const Vec2& x) const { return HarmonicBasis::extension_value(m, j, x); }
  Vec2 gradient(const Vec2& x) const { return HarmonicBasis::extension_gradient(m, j, x); }
};

inline HarmonicMode harmonic_mode(int m, int j) {
  if (m < 0 || j < 1 || j > HarmonicBasis::multiplicity(m))
    throw std::invalid_argument("harmonic_mode: invalid (m,j) index");
  return HarmonicMode{m, j};
}

// Interpolation stencil: tensor Lagrange, up to 4 radial x 6 angular nodes.
// Low-order interpolation is not an option here: the transport solve applies
// (I - K1)^{-1}, whose gap closes like eps^2, and any systematic interpolation
// bias on smooth angular modes is amplified by that factor.
struct InterpStencil {
  int count = 0;
  std::array<int, 24> idx;
  std::array<double, 24> w;
};

// Tensor quadrature grid on the unit disk in polar coordinates.
// Two node layouts:
//   gauss: Gauss-Legendre radii on (0,1) (clustered at both ends) x uniform angles;
//          weights are exact for the disk area.
//   cells: cell-centered radii (i+1/2)h, used by the finite-difference solver.
class PolarGrid {
 public:
  enum class Radial { gauss, cells };

  PolarGrid(int nr, int ntheta, Radial layout = Radial::gauss)
      : nr_(nr), ntheta_(ntheta), layout_(layout) {
    if (nr < 2 || ntheta < 4) throw std::invalid_argument("PolarGrid: grid too small");
    r_.resize(nr);
    wr_.resize(nr);
    if (layout == Radial::gauss) {
      GaussRule g = gauss_legendre(nr);
      for (int i = 0; i < nr; ++i) {
        r_[i] = g.node[i];
        wr_[i] = g.weight[i];
      }
    } else {
      const double h = 1.0 / nr;
      for (int i = 0; i < nr; ++i) {
        r_[i] = (i + 0.5) * h;
        wr_[i] = h;
      }
    }
    dtheta_ = 2.0 * pi / ntheta;
    theta_.resize(ntheta);
    for (int q = 0; q < ntheta; ++q) theta_[q] = q * dtheta_;
  }

  int nr() const { return nr_; }
  int ntheta() const { return ntheta_; }
  int size() const { return nr_ * ntheta_; }
  Radial layout() const { return layout_; }
  double radial_step() const {
    if (layout_ != Radial::cells) throw std::logic_error("radial_step: cells layout only");
    return 1.0 / nr_;
  }

  double radius(int i) const { return r_[i]; }
  double angle(int q) const { return theta_[q]; }
  double dtheta() const { return dtheta_; }
  int index(int i, int q) const { return i * ntheta_ + q; }

  Vec2 point(int i, int q) const {
    return Vec2(r_[i] * std::cos(theta_[q]), r_[i] * std::sin(theta_[q]));
  }
  Vec2 point(int idx) const { return point(idx / ntheta_, idx % ntheta_); }

  // quadrature weight including polar Jacobian
  double weight(int i, int /*q*/) const { return wr_[i] * r_[i] * dtheta_; }
  double weight(int idx) const { return weight(idx / ntheta_, idx % ntheta_); }

  double area() const {
    double a = 0.0;
    for (int i = 0; i < nr_; ++i) a += wr_[i] * r_[i];
    return a * 2.0 * pi;
  }

  // Tensor Lagrange stencil: cubic in r on the (possibly nonuniform) radial
  // nodes, degree 5 in theta on the periodic uniform angles. Radius outside
  // [r_0, r_{nr-1}] falls back to the nearest ring.
  InterpStencil stencil(double r, double theta) const {
    int ir[4];
    double wr[4];
    int nrad;
    if (r <= r_[0]) {
      ir[0] = 0;
      wr[0] = 1.0;
      nrad = 1;
    } else if (r >= r_[nr_ - 1]) {
      ir[0] = nr_ - 1;
      wr[0] = 1.0;
      nrad = 1;
    } else {
      int lo = 0, hi = nr_ - 1;
      while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        (r_[mid] <= r ? lo : hi) = mid;
      }
      int start = std::clamp(lo - 1, 0, nr_ - 4);
      nrad = 4;
      for (int k = 0; k < 4; ++k) {
        ir[k] = start + k;
        double w = 1.0;
        for (int j = 0; j < 4; ++j)
          if (j != k) w *= (r - r_[start + j]) / (r_[start + k] - r_[start + j]);
        wr[k] = w;
      }
    }
    double a = theta / dtheta_;
    double qf = std::floor(a);
    double t = a - qf;
    int q0 = static_cast<int>(qf) % ntheta_;
    if (q0 < 0) q0 += ntheta_;
    // 6-point window at offsets -2..3 around the bracketing interval
    double wt[6];
    for (int k = 0; k < 6; ++k) {
      const double ok = k - 2.0;
      double w = 1.0;
      for (int j = 0; j < 6; ++j)
        if (j != k) w *= (t - (j - 2.0)) / (ok - (j - 2.0));
      wt[k] = w;
    }
    InterpStencil st;
    st.count = 6 * nrad;
    int pos = 0;
    for (int kr = 0; kr < nrad; ++kr) {
      const int row = ir[kr] * ntheta_;
      for (int kt = 0; kt < 6; ++kt, ++pos) {
        int q = q0 + kt - 2;
        q %= ntheta_;
        if (q < 0) q += ntheta_;
        st.idx[pos] = row + q;
        st.w[pos] = wr[kr] * wt[kt];
      }
    }
    return st;
  }

  InterpStencil stencil(const Vec2& x) const {
    return stencil(x.norm(), std::atan2(x[1], x[0]));
  }

  double interpolate(const Eigen::VectorXd& values, const Vec2& x) const {
    InterpStencil st = stencil(x);
    double v = 0.0;
    for (int k = 0; k < st.count; ++k) v += st.w[k] * values[st.idx[k]];
    return v;
  }

 private:
  int nr_, ntheta_;
  Radial layout_;
  std::vector<double> r_, wr_, theta_;
  double dtheta_;
};

// Quadrature rule for one attenuated line integral,
//   int_0^tau exp(-beta l) beta g(l) dl ~= sum_i w_i g(l_i).
// Panels are uniform at a few mean free paths 1/beta up to the attenuation
// cutoff exp(-30); a single closing panel carries the remaining (negligible)
// mass to tau. Within each panel, Gauss nodes in the optical-depth variable
// carry the evaluated weight, renormalized so the panel mass is exact; the
// weights then telescope to 1 - exp(-beta tau) and constants integrate
// exactly for every (beta, tau).
inline void exponential_ray_rule(double beta, double tau, int nray, double* node_l,
                                 double* node_w) {
  if (tau <= 0.0) {
    for (int i = 0; i < nray; ++i) {
      node_l[i] = 0.0;
      node_w[i] = 0.0;
    }
    return;
  }
  const double S = beta * tau;
  const double s_cut = std::min(S, 30.0);
  const bool tail = S > s_cut && nray >= 3;
  int P = static_cast<int>(std::ceil(s_cut / 2.5));
  P = std::max(1, std::min(P, std::max(1, (nray - (tail ? 1 : 0)) / 5)));
  const int budget = nray - (tail ? 1 : 0);
  const int base = budget / P;
  const int extra = budget % P;
  int pos = 0;
  for (int p = 0; p <= (tail ? P : P - 1); ++p) {
    double lo, hi;
    int np;
    if (p < P) {
      lo = (s_cut * p / P) / beta;
      hi = (p == P - 1 && !tail) ? tau : (s_cut * (p + 1) / P) / beta;
      np = base + (p < extra ? 1 : 0);
    } else {
      lo = s_cut / beta;
      hi = tau;
      np = nray - pos;
    }
    if (pos + np > nray) np = nray - pos;
    if (np < 1) continue;
    const double mass = std::exp(-beta * lo) * -std::expm1(-beta * (hi - lo));
    const GaussRule& rule = gauss_legendre_cached(np);
    double raw = 0.0;
    const int start = pos;
    for (int i = 0; i < np; ++i, ++pos) {
      const double l = lo + (hi - lo) * rule.node[i];
      const double v = rule.weight[i] * (hi - lo) * beta * std::exp(-beta * l);
      node_l[pos] = l;
      node_w[pos] = v;
      raw += v;
    }
    const double scale = raw > 0.0 ? mass / raw : 0.0;
    for (int i = start; i < pos; ++i) node_w[i] *= scale;
  }
  while (pos < nray) {
    node_l[pos] = tau;
    node_w[pos] = 0.0;
    ++pos;
  }
}

// Quadrature fan anchored at a target point x: uniform directions on S^1 with
// weight 1/ndir (the uniform probability measure), and the exponential ray
// rule along each direction up to the exit distance.
class RayFan {
 public:
  RayFan(const Vec2& x, int ndir, int nray, double beta, double anchor_angle = 0.0)
      : x_(x), ndir_(ndir), nray_(nray), beta_(beta) {
    if (ndir < 4 || nray < 2) throw std::invalid_argument("RayFan: too few nodes");
    if (!(beta > 0.0)) throw std::invalid_argument("RayFan: beta must be positive");
    dir_.resize(ndir);
    tau_.resize(ndir);
    wtot_.resize(ndir);
    node_l_.resize(ndir * nray);
    node_w_.resize(ndir * nray);
    for (int k = 0; k < ndir; ++k) {
      const double phi = anchor_angle + (k + 0.5) * 2.0 * pi / ndir;
      dir_[k] = Vec2(std::cos(phi), std::sin(phi));
      const double tau = boundary_exit_distance(x, dir_[k]);
      tau_[k] = tau;
      wtot_[k] = -std::expm1(-beta * tau);
      exponential_ray_rule(beta, tau, nray, &node_l_[k * nray], &node_w_[k * nray]);
    }
  }

  const Vec2& target() const { return x_; }
  int ndir() const { return ndir_; }
  int nray() const { return nray_; }
  double beta() const { return beta_; }
  double direction_weight() const { return 1.0 / ndir_; }

  const Vec2& direction(int k) const { return dir_[k]; }
  double exit_distance(int k) const { return tau_[k]; }
  Vec2 exit_point(int k) const { return x_ + tau_[k] * dir_[k]; }
  // total transported weight along direction k: 1 - exp(-beta tau)
  double transported_weight(int k) const { return wtot_[k]; }
  double survival(int k) const { return 1.0 - wtot_[k]; }  // exp(-beta tau)

  double node_distance(int k, int i) const { return node_l_[k * nray_ + i]; }
  double node_weight(int k, int i) const { return node_w_[k * nray_ + i]; }
  Vec2 node_point(int k, int i) const { return x_ + node_l_[k * nray_ + i] * dir_[k]; }

 private:
  Vec2 x_;
  int ndir_, nray_;
  double beta_;
  std::vector<Vec2> dir_;
  std::vector<double> tau_, wtot_, node_l_, node_w_;
};

}  // namespace diskrt

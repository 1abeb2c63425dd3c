#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "diskrt/absorption.hpp"
#include "diskrt/transport.hpp"

namespace diskrt {

inline const char* version_string = "1.0.0";

struct GridSpec {
  int nr = 48, ntheta = 96;
  int ndir = 64, nray = 48;
  int nboundary = 256;
  int diff_nr = 128, diff_ntheta = 256;
};

struct AbsorptionSpec {
  std::string family = "radial_bump";
  double amplitude = 0.3;
  double center = 0.25, width = 0.2;          // radial_bump
  double x = 0.2, y = 0.1;                    // disk_bump center
  double r_center = 0.44, r_width = 0.06;     // polar_bump
  double theta_center = 0.0, theta_width = 0.12;
};

// Single experiment description; round-trips losslessly through JSON.
struct ExperimentConfig {
  std::vector<double> epsilon{0.1};
  double sigma_s = 1.0;
  double r0 = 0.5;
  AbsorptionSpec absorption;
  int L = 12;
  double s = 4.0;
  double q = 2.0;
  int d = 2;
  double theta = 0.1;
  double beta = 150.0;
  GridSpec grid;
  std::uint64_t seed = 0;
  int source_m = 1, source_j = 1;
  std::vector<double> delta{1e-2, 1e-3, 1e-4};
  double C0R = 1.0;
  double tau = -1.0;
  std::vector<double> t_grid{0.5, 1.0, 2.0, 4.0, 8.0};
  std::string out_dir = "out";
  int workers = 1;

  void validate() const {
    if (epsilon.empty()) throw std::invalid_argument("config: epsilon list is empty");
    for (double e : epsilon)
      if (!(e > 0.0 && e <= 0.5))
        throw std::invalid_argument("config: epsilon must lie in (0, 0.5]");
    if (!(sigma_s > 0.0)) throw std::invalid_argument("config: sigma_s must be positive");
    if (!(r0 > 0.0 && r0 < 1.0)) throw std::invalid_argument("config: r0 must lie in (0,1)");
    if (L < 0) throw std::invalid_argument("config: L must be >= 0");
    if (!(s > 1.0)) throw std::invalid_argument("config: s must exceed d/2 = 1");
    if (!(q > 0.0)) throw std::invalid_argument("config: q must be positive");
    if (d < 2) throw std::invalid_argument("config: d must be >= 2");
    if (!(theta > 0.0 && theta < 1.0))
      throw std::invalid_argument("config: theta must lie in (0,1)");
    if (!(beta > 0.0)) throw std::invalid_argument("config: beta must be positive");
    if (!(tau < 0.0)) throw std::invalid_argument("config: tau must be negative");
    if (grid.nr < 8 || grid.ntheta < 16 || grid.ndir < 8 || grid.nray < 4)
      throw std::invalid_argument("config: grid sizes too small");
    if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
    if (source_m < 0 || source_j < 1 || source_j > HarmonicBasis::multiplicity(source_m))
      throw std::invalid_argument("config: invalid source mode");
    make_absorption();  // family parameters checked by the constructors
  }

  AbsorptionField make_absorption() const {
    const AbsorptionSpec& a = absorption;
    if (a.family == "zero") return absorption::zero(r0);
    if (a.family == "radial_bump")
      return absorption::radial_bump(a.amplitude, a.center, a.width, r0, q);
    if (a.family == "disk_bump")
      return absorption::disk_bump(a.amplitude, Vec2(a.x, a.y), a.width, r0, q);
    if (a.family == "polar_bump")
      return absorption::polar_bump(a.amplitude, a.r_center, a.r_width, a.theta_center,
                                    a.theta_width, r0, q);
    throw std::invalid_argument("config: unknown absorption family '" + a.family + "'");
  }

  Medium make_medium(double eps) const { return Medium(eps, sigma_s, make_absorption()); }
  FanSpec make_fan() const { return FanSpec{grid.ndir, grid.nray}; }
  PolarGrid make_grid() const { return PolarGrid(grid.nr, grid.ntheta); }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["epsilon"] = epsilon;
    j["sigma_s"] = sigma_s;
    j["r0"] = r0;
    j["absorption"] = {{"family", absorption.family},
                       {"amplitude", absorption.amplitude},
                       {"center", absorption.center},
                       {"width", absorption.width},
                       {"x", absorption.x},
                       {"y", absorption.y},
                       {"r_center", absorption.r_center},
                       {"r_width", absorption.r_width},
                       {"theta_center", absorption.theta_center},
                       {"theta_width", absorption.theta_width}};
    j["L"] = L;
    j["s"] = s;
    j["q"] = q;
    j["d"] = d;
    j["theta"] = theta;
    j["beta"] = beta;
    j["grid"] = {{"nr", grid.nr},           {"ntheta", grid.ntheta},
                 {"ndir", grid.ndir},       {"nray", grid.nray},
                 {"nboundary", grid.nboundary}, {"diff_nr", grid.diff_nr},
                 {"diff_ntheta", grid.diff_ntheta}};
    j["seed"] = seed;
    j["source"] = {{"m", source_m}, {"j", source_j}};
    j["delta"] = delta;
    j["C0R"] = C0R;
    j["tau"] = tau;
    j["t_grid"] = t_grid;
    j["out"] = out_dir;
    j["workers"] = workers;
    return j;
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("epsilon")) {
      if (j["epsilon"].is_array())
        c.epsilon = j["epsilon"].get<std::vector<double>>();
      else
        c.epsilon = {j["epsilon"].get<double>()};
    }
    if (j.contains("sigma_s")) c.sigma_s = j["sigma_s"];
    if (j.contains("r0")) c.r0 = j["r0"];
    if (j.contains("absorption")) {
      const auto& a = j["absorption"];
      if (a.contains("family")) c.absorption.family = a["family"];
      if (a.contains("amplitude")) c.absorption.amplitude = a["amplitude"];
      if (a.contains("center")) c.absorption.center = a["center"];
      if (a.contains("width")) c.absorption.width = a["width"];
      if (a.contains("x")) c.absorption.x = a["x"];
      if (a.contains("y")) c.absorption.y = a["y"];
      if (a.contains("r_center")) c.absorption.r_center = a["r_center"];
      if (a.contains("r_width")) c.absorption.r_width = a["r_width"];
      if (a.contains("theta_center")) c.absorption.theta_center = a["theta_center"];
      if (a.contains("theta_width")) c.absorption.theta_width = a["theta_width"];
    }
    if (j.contains("L")) c.L = j["L"];
    if (j.contains("s")) c.s = j["s"];
    if (j.contains("q")) c.q = j["q"];
    if (j.contains("d")) c.d = j["d"];
    if (j.contains("theta")) c.theta = j["theta"];
    if (j.contains("beta")) c.beta = j["beta"];
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("nr")) c.grid.nr = g["nr"];
      if (g.contains("ntheta")) c.grid.ntheta = g["ntheta"];
      if (g.contains("ndir")) c.grid.ndir = g["ndir"];
      if (g.contains("nray")) c.grid.nray = g["nray"];
      if (g.contains("nboundary")) c.grid.nboundary = g["nboundary"];
      if (g.contains("diff_nr")) c.grid.diff_nr = g["diff_nr"];
      if (g.contains("diff_ntheta")) c.grid.diff_ntheta = g["diff_ntheta"];
    }
    if (j.contains("seed")) c.seed = j["seed"];
    if (j.contains("source")) {
      if (j["source"].contains("m")) c.source_m = j["source"]["m"];
      if (j["source"].contains("j")) c.source_j = j["source"]["j"];
    }
    if (j.contains("delta")) c.delta = j["delta"].get<std::vector<double>>();
    if (j.contains("C0R")) c.C0R = j["C0R"];
    if (j.contains("tau")) c.tau = j["tau"];
    if (j.contains("t_grid")) c.t_grid = j["t_grid"].get<std::vector<double>>();
    if (j.contains("out")) c.out_dir = j["out"];
    if (j.contains("workers")) c.workers = j["workers"];
    return c;
  }

  // FNV-1a over the canonical serialized form; the output directory and
  // worker count are execution details and do not change the hash
  std::string hash() const {
    nlohmann::json j = to_json();
    j.erase("out");
    j.erase("workers");
    const std::string dump = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : dump) {
      h ^= ch;
      h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
  }
};

}  // namespace diskrt

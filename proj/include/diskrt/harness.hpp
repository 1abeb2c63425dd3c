#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "diskrt/albedo.hpp"
#include "diskrt/config.hpp"
#include "diskrt/diffusion.hpp"
#include "diskrt/entropy.hpp"
#include "diskrt/io.hpp"
#include "diskrt/transport.hpp"

namespace diskrt {

struct RunResult {
  int status = 0;
  std::vector<std::string> files;
  nlohmann::json summary;
};

namespace detail {

inline std::string eps_tag(double eps) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", eps);
  return buf;
}

inline nlohmann::json module_versions() {
  return {{"geometry", version_string}, {"transport", version_string},
          {"albedo", version_string},   {"diffusion", version_string},
          {"entropy", version_string},  {"harness", version_string}};
}

inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

// Dispatches one experiment. Writes CSV artifacts plus one JSON summary into
// cfg.out_dir; returns the summary and the list of files. Identical config
// and seed reproduce the CSV output byte for byte.
inline RunResult run(const std::string& command, const ExperimentConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  const std::string hash = cfg.hash();
  auto path = [&](const std::string& name) { return cfg.out_dir + "/" + name; };

  RunResult res;
  res.summary["command"] = command;
  res.summary["config_hash"] = hash;
  res.summary["module_versions"] = detail::module_versions();
  res.summary["config"] = cfg.to_json();
  nlohmann::json& head = res.summary["headline"];
  nlohmann::json& failures = res.summary["failures"];
  failures = nlohmann::json::array();

  auto emit_file = [&](const std::string& p) { res.files.push_back(p); };

  if (command == "solve") {
    PolarGrid grid = cfg.make_grid();
    BoundarySource f = BoundarySource::mode(cfg.source_m, cfg.source_j);
    for (double eps : cfg.epsilon) {
      Medium med = cfg.make_medium(eps);
      PeierlsSolver solver(med, grid, cfg.make_fan());
      ScalarFlux flux = solver.solve(f);
      CurrentField cur = solver.first_moment(f, flux);
      BoundaryCurrent bc = solver.boundary_current(f, flux, cfg.L, cfg.grid.nboundary);
      const std::string tag = detail::eps_tag(eps);
      write_flux_csv(path("flux_eps" + tag + ".csv"), hash, grid, flux, &cur);
      emit_file(path("flux_eps" + tag + ".csv"));
      CsvWriter bcsv(path("boundary_current_eps" + tag + ".csv"), hash,
                     {"index", "m", "j", "coeff"});
      for (int b = 0; b < bc.coeff.size(); ++b) {
        auto [m, j] = HarmonicBasis::unflatten(b);
        bcsv.row({static_cast<long long>(b), static_cast<long long>(m),
                  static_cast<long long>(j), bc.coeff[b]});
      }
      emit_file(path("boundary_current_eps" + tag + ".csv"));
      const double outflow = std::sqrt(2.0 * pi) * bc.coeff[0];
      double absorbed = 0.0;
      if (!med.sigma_a.is_zero)
        absorbed = integrate_against(med.sigma_a, [&](const Vec2& x) {
          return grid.interpolate(flux.values, x);
        });
      head["eps_" + tag] = {{"residual", flux.residual_norm},
                            {"flux_min", flux.values.minCoeff()},
                            {"flux_max", flux.values.maxCoeff()},
                            {"outflow", outflow},
                            {"absorbed_power", absorbed},
                            {"balance_mismatch", outflow + absorbed}};
    }
  } else if (command == "matrix" || command == "sweep") {
    PolarGrid grid = cfg.make_grid();
    struct Case {
      double eps;
      nlohmann::json head;
      std::string error;
      bool ok = false;
    };
    std::vector<Case> cases(cfg.epsilon.size());
    for (size_t i = 0; i < cfg.epsilon.size(); ++i) cases[i].eps = cfg.epsilon[i];
    std::mutex next_mutex;
    size_t next = 0;
    auto worker = [&]() {
      for (;;) {
        size_t i;
        {
          std::lock_guard<std::mutex> lock(next_mutex);
          if (next >= cases.size()) return;
          i = next++;
        }
        Case& c = cases[i];
        try {
          Medium med = cfg.make_medium(c.eps);
          GammaMatrix g = assemble_gamma(med, cfg.L, grid, cfg.make_fan());
          NormReport norm = hs_operator_norm(g, cfg.s, cfg.d);
          const std::string tag = detail::eps_tag(c.eps);
          write_gamma_csv(path("gamma_eps" + tag + ".csv"), hash, g);
          nlohmann::json hdr = gamma_json_header(g, cfg.s);
          hdr["config_hash"] = hash;
          write_json(path("gamma_eps" + tag + ".json"), hdr);
          c.head = {{"zero_map", g.max_abs() <= 1e-10},
                    {"max_abs", g.max_abs()},
                    {"hs_norm", norm.hs_norm},
                    {"xs_seminorm", norm.xs},
                    {"norm_chain_ok", norm.hs_norm <= 4.0 * std::sqrt(2.0) * norm.xs}};
          c.ok = true;
        } catch (const std::exception& e) {
          c.error = e.what();
        }
      }
    };
    const int nworkers =
        command == "sweep" ? std::min<int>(cfg.workers, static_cast<int>(cases.size())) : 1;
    if (nworkers > 1) {
      std::vector<std::thread> pool;
      for (int t = 0; t < nworkers; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    } else {
      worker();
    }
    for (const Case& c : cases) {
      const std::string tag = detail::eps_tag(c.eps);
      if (c.ok) {
        head["eps_" + tag] = c.head;
        emit_file(path("gamma_eps" + tag + ".csv"));
        emit_file(path("gamma_eps" + tag + ".json"));
      } else {
        failures.push_back({{"eps", c.eps}, {"error", c.error}});
        res.status = 1;
      }
    }
  } else if (command == "decay") {
    PolarGrid grid = cfg.make_grid();
    std::vector<GammaMatrix> family;
    for (double eps : cfg.epsilon) {
      Medium med = cfg.make_medium(eps);
      family.push_back(assemble_gamma(med, cfg.L, grid, cfg.make_fan()));
      const GammaMatrix& g = family.back();
      DecayReport rep = entry_decay_report(g);
      const std::string tag = detail::eps_tag(eps);
      CsvWriter csv(path("decay_eps" + tag + ".csv"), hash,
                    {"l", "sup_addend1", "diag_addend1", "sup_addend2", "diag_addend2"});
      for (int l = 0; l <= g.L; ++l)
        csv.row({static_cast<long long>(l), rep.sup_a1[l], rep.diag_a1[l], rep.sup_a2[l],
                 rep.diag_a2[l]});
      emit_file(path("decay_eps" + tag + ".csv"));
      head["eps_" + tag] = {{"m1_slope_shell", rep.m1_slope_shell},
                            {"m1_slope_diag", rep.m1_slope_diag},
                            {"fit_valid", rep.fit_valid},
                            {"fit_lmin", rep.fit_lmin},
                            {"fit_lmax", rep.fit_lmax},
                            {"crossover_l", rep.crossover_l},
                            {"log_r0", std::log(cfg.r0)}};
    }
    if (family.size() >= 2) {
      EpsScaling sc = m2_eps_scaling(family, cfg.L);
      head["m2_scaling"] = {{"l", sc.l}, {"exponent", sc.exponent}, {"ratios", sc.ratios}};
    }
  } else if (command == "diffuse") {
    PolarGrid tgrid = cfg.make_grid();
    AbsorptionField sig = cfg.make_absorption();
    DiffusionLimitReport rep =
        diffusion_limit_report(sig, cfg.sigma_s, cfg.source_m, cfg.epsilon, tgrid,
                               cfg.make_fan(), cfg.grid.diff_nr, cfg.grid.diff_ntheta);
    CsvWriter csv(path("diffusion_error.csv"), hash, {"eps", "interior_l2_error"});
    for (const auto& row : rep.rows) csv.row({row.epsilon, row.interior_error});
    emit_file(path("diffusion_error.csv"));
    head["error_ratios"] = rep.ratios;
    // exported field: Phi for the configured mode
    if (!sig.is_zero) {
      DiffusionSolver solver(cfg.sigma_s, sig, cfg.grid.diff_nr, cfg.grid.diff_ntheta);
      HarmonicMode mode = harmonic_mode(cfg.source_m, cfg.source_j);
      auto src = [&](const Vec2& x) { return -sig(x) * mode.extension(x); };
      DiffusionField phi = solver.solve(src, [](double) { return 0.0; });
      CsvWriter fcsv(path("diffusion_field.csv"), hash, {"r", "theta", "value"});
      const PolarGrid& dg = solver.grid();
      for (int idx = 0; idx < dg.size(); ++idx)
        fcsv.row({dg.radius(idx / dg.ntheta()), dg.angle(idx % dg.ntheta()),
                  phi.values[idx]});
      emit_file(path("diffusion_field.csv"));
      head["phi_residual"] = phi.residual;
    }
  } else if (command == "entropy") {
    CsvWriter csv(path("entropy_report.csv"), hash,
                  {"delta", "eps", "l_trunc", "chat_fitted", "net_log_bound",
                   "envelope_base", "eta_required", "kolmogorov_log_count", "verdict"});
    const double mu = bump_family_mu(cfg.q, cfg.r0);
    const double klog = kolmogorov_log_count(cfg.theta, cfg.beta, cfg.q, cfg.d, mu);
    double eta_max = 0.0;
    for (double eps : cfg.epsilon)
      for (double delta : cfg.delta) {
        TruncationOrder tr = truncation_order(delta, eps, cfg.r0, cfg.tau, cfg.C0R);
        NetCardinality net = net_log_cardinality(delta, eps, cfg.r0, cfg.tau, cfg.d, cfg.C0R);
        eta_max = std::max(eta_max, net.eta_required);
        csv.row({delta, eps, static_cast<long long>(tr.l), tr.chat_fitted,
                 net.log_explicit, net.envelope_base, net.eta_required, klog,
                 std::string(klog > net.log_explicit ? "distinguishable_exceeds_net"
                                                     : "net_exceeds")});
      }
    emit_file(path("entropy_report.csv"));
    head["mu_calibrated"] = mu;
    head["c0_prime"] = c0_prime(cfg.r0);
    head["kolmogorov_log_count"] = klog;
    head["eta_fitted"] = eta_max;
    // beta selection rule from the instability proof, stated with R = 2 theta
    const double R = 2.0 * cfg.theta;
    head["beta_rule_lower"] =
        std::max(0.5 * R, std::pow(std::pow(2.0, cfg.d + 1) * eta_max, cfg.q / cfg.d)) / mu;
  } else if (command == "omega") {
    CsvWriter csv(path("omega.csv"), hash, {"t", "eps", "tau", "omega", "residual",
                                            "in_regime"});
    for (double eps : cfg.epsilon)
      for (double t : cfg.t_grid) {
        OmegaSolution s = omega_solve(t, eps, cfg.tau);
        csv.row({t, eps, cfg.tau, s.omega, s.residual,
                 static_cast<long long>(s.in_regime ? 1 : 0)});
      }
    emit_file(path("omega.csv"));
    head["points"] = cfg.epsilon.size() * cfg.t_grid.size();
  } else if (command == "probe") {
    PolarGrid grid = cfg.make_grid();
    AbsorptionField base = cfg.make_absorption();
    ProbeResult probe = instability_probe(base, cfg.theta, cfg.epsilon, cfg.L, cfg.s, cfg.q,
                                          cfg.beta, grid, cfg.make_fan(), cfg.seed,
                                          cfg.sigma_s);
    CsvWriter csv(path("probe_table.csv"), hash,
                  {"eps", "sup_distance", "hs_norm", "xs_seminorm", "regime", "bound"});
    CsvWriter scsv(path("probe_svals.csv"), hash, {"eps", "index", "singular_value"});
    for (const ProbeRow& row : probe.rows) {
      if (!row.ok) {
        failures.push_back({{"eps", row.eps}, {"error", row.error}});
        res.status = 1;
        continue;
      }
      csv.row({row.eps, row.sup_distance, row.hs_norm, row.xs, row.regime_label,
               row.regime_bound});
      for (int i = 0; i < row.singular_values.size(); ++i)
        scsv.row({row.eps, static_cast<long long>(i), row.singular_values[i]});
    }
    emit_file(path("probe_table.csv"));
    emit_file(path("probe_svals.csv"));
    std::vector<double> lx, ly;
    bool monotone = true, have_prev = false;
    double prev = 0.0;
    for (const ProbeRow& row : probe.rows) {
      if (!row.ok) continue;
      if (have_prev && row.hs_norm > prev * 1.05) monotone = false;
      prev = row.hs_norm;
      have_prev = true;
      lx.push_back(std::log(row.eps));
      ly.push_back(std::log(std::max(row.hs_norm, 1e-300)));
    }
    head["cells"] = probe.family.ncells();
    head["cell_radius"] = probe.family.h;
    head["monotone_nonincreasing"] = monotone;
    if (lx.size() >= 2) head["loglog_slope_all"] = detail::least_squares_slope(lx, ly);
  } else if (command == "kernelcheck") {
    CsvWriter csv(path("kernelcheck.csv"), hash,
                  {"a", "closed_form", "quadrature", "abs_diff"});
    double max_diff = 0.0;
    for (int i = 0; i <= 200; ++i) {
      const double a = 10.0 * i / 200.0;
      const double closed = kernel_hat(a, 1.0, 1.0);
      const double quad = kernel_hat_integral(a, 1.0, 1.0);
      max_diff = std::max(max_diff, std::abs(closed - quad));
      csv.row({a, closed, quad, std::abs(closed - quad)});
    }
    emit_file(path("kernelcheck.csv"));
    head["max_abs_diff"] = max_diff;
    head["within_tolerance"] = max_diff <= 1e-6;
  } else {
    throw std::invalid_argument("unknown command '" + command + "'");
  }

  res.summary["outputs"] = res.files;
  const std::string spath = path(command + "_summary.json");
  write_json(spath, res.summary);
  res.files.push_back(spath);
  return res;
}

}  // namespace diskrt

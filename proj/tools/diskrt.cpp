#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "diskrt/harness.hpp"

namespace {

const char* kCommands[] = {"solve",   "matrix", "decay", "diffuse",    "entropy",
                           "omega",   "probe",  "sweep", "kernelcheck"};

const char* kDescriptions[] = {
    "forward transport solve: flux, current and boundary current",
    "assemble the perturbed albedo matrix and its norms",
    "entry-decay profiles and slope fits of the albedo matrix",
    "diffusion solver: interior comparison against the transport flux",
    "truncation order, net cardinality and packing-count report",
    "root of the omega equation over a (t, eps) grid",
    "instability probe: bump pair, norm sweep and regime labels",
    "matrix assembly across the eps list, cases run concurrently",
    "kernel Fourier transform: closed form vs quadrature"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radiative-transport instability laboratory on the unit disk"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  app.add_option("--config", config_path, "experiment configuration (JSON)");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_option("--workers", workers, "concurrent sweep cases (overrides config)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides config)");

  for (size_t i = 0; i < std::size(kCommands); ++i)
    app.add_subcommand(kCommands[i], kDescriptions[i]);

  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    diskrt::ExperimentConfig cfg;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("cannot read config file " + config_path);
      nlohmann::json j;
      in >> j;
      cfg = diskrt::ExperimentConfig::from_json(j);
    }
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (workers > 0) cfg.workers = workers;
    if (seed_opt->count() > 0) cfg.seed = seed;

    diskrt::RunResult result = diskrt::run(command, cfg);
    std::cout << result.summary["headline"].dump(2) << "\n";
    for (const auto& f : result.files) std::cout << f << "\n";
    if (result.status != 0)
      std::cerr << "error: " << result.summary["failures"].dump() << "\n";
    return result.status;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "diskrt/albedo.hpp"
#include "diskrt/transport.hpp"

namespace diskrt {

// CSV with '.' decimal separator, 17 significant digits, a header row, and
// the config hash on a leading comment line.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& config_hash,
            const std::vector<std::string>& columns)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot open output file " + path);
    out_ << "# config_hash=" << config_hash << "\n";
    for (size_t i = 0; i < columns.size(); ++i)
      out_ << columns[i] << (i + 1 < columns.size() ? "," : "\n");
  }

  using Cell = std::variant<double, long long, std::string>;

  void row(const std::vector<Cell>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (std::holds_alternative<double>(cells[i])) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(cells[i]));
        out_ << buf;
      } else if (std::holds_alternative<long long>(cells[i])) {
        out_ << std::get<long long>(cells[i]);
      } else {
        out_ << std::get<std::string>(cells[i]);
      }
      out_ << (i + 1 < cells.size() ? "," : "\n");
    }
  }

 private:
  std::ofstream out_;
};

inline void write_flux_csv(const std::string& path, const std::string& hash,
                           const PolarGrid& grid, const ScalarFlux& flux,
                           const CurrentField* current = nullptr) {
  std::vector<std::string> cols{"r", "theta", "flux"};
  if (current) {
    cols.push_back("jx");
    cols.push_back("jy");
  }
  CsvWriter csv(path, hash, cols);
  for (int idx = 0; idx < grid.size(); ++idx) {
    const int i = idx / grid.ntheta(), q = idx % grid.ntheta();
    std::vector<CsvWriter::Cell> cells{grid.radius(i), grid.angle(q), flux.values[idx]};
    if (current) {
      cells.emplace_back(current->jx[idx]);
      cells.emplace_back(current->jy[idx]);
    }
    csv.row(cells);
  }
}

inline void write_gamma_csv(const std::string& path, const std::string& hash,
                            const GammaMatrix& g) {
  CsvWriter csv(path, hash, {"m", "j", "n", "k", "addend1", "addend2", "value"});
  for (int mj = 0; mj < g.size(); ++mj) {
    auto [m, j] = HarmonicBasis::unflatten(mj);
    for (int nk = 0; nk < g.size(); ++nk) {
      auto [n, k] = HarmonicBasis::unflatten(nk);
      csv.row({static_cast<long long>(m), static_cast<long long>(j),
               static_cast<long long>(n), static_cast<long long>(k), g.addend1(mj, nk),
               g.addend2(mj, nk), g.value(mj, nk)});
    }
  }
}

// content hash of the entry table, for the matrix JSON header
inline std::string gamma_content_hash(const GammaMatrix& g) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](double v) {
    char buf[40];
    int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    for (int i = 0; i < len; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  };
  for (int a = 0; a < g.size(); ++a)
    for (int b = 0; b < g.size(); ++b) {
      mix(g.addend1(a, b));
      mix(g.addend2(a, b));
    }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

inline nlohmann::json gamma_json_header(const GammaMatrix& g, double s) {
  nlohmann::json j;
  j["epsilon"] = g.medium.epsilon;
  j["sigma_s"] = g.medium.sigma_s;
  j["absorption_family"] = g.medium.sigma_a.family;
  j["r0"] = g.medium.sigma_a.support_radius;
  j["L"] = g.L;
  j["s"] = s;
  j["grid"] = {{"nr", g.grid_nr}, {"ntheta", g.grid_ntheta}};
  j["fan"] = {{"ndir", g.fan_ndir}, {"nray", g.fan_nray}};
  j["content_hash"] = gamma_content_hash(g);
  return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file " + path);
  out << j.dump(2) << "\n";
}

}  // namespace diskrt

#include "lodwave/coefficient.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "lodwave/errors.hpp"

namespace lodwave {

double example2_eval(double x1, double x2) {
  const double f1 = std::floor(2 * x1) * std::floor(8 * (1 - x1)) +
                    std::floor(2 * (1 - x1)) * std::floor(8 * x1);
  const double f2 = std::floor(2 * x2) * std::floor(8 * (1 - x2)) +
                    std::floor(2 * (1 - x2)) * std::floor(8 * x2);
  const double s1 = std::sin(std::floor(32 * x1));
  const double s2 = std::sin(std::floor(64 * x2));
  return 1.9 * f1 * f2 * s1 * s1 * s2 * s2 + 1.0;
}

double CoefficientField::eval(double x, double y) const {
  switch (kind) {
    case Kind::Example2:
      return example2_eval(x, y);
    case Kind::Constant:
      return constant;
    case Kind::Grid: {
      const int i = std::min(static_cast<int>(x * grid_cells), grid_cells - 1);
      const int j = std::min(static_cast<int>(y * grid_cells), grid_cells - 1);
      return grid_values[static_cast<std::size_t>(j) * grid_cells + i];
    }
  }
  return constant;
}

CoefficientField example2_field() {
  CoefficientField f;
  f.kind = CoefficientField::Kind::Example2;
  f.alpha = 1.0;
  f.beta = 17.78;
  // The formula's finest scale is the 1/64 grid of the second sin factor;
  // this is what meshes have to resolve.
  f.epsilon = 1.0 / 64.0;
  return f;
}

CoefficientField constant_field(double value) {
  if (value <= 0) throw ArgumentError("coefficient must be positive");
  CoefficientField f;
  f.kind = CoefficientField::Kind::Constant;
  f.alpha = f.beta = f.constant = value;
  f.epsilon = 1.0;
  return f;
}

CoefficientField grid_field(std::vector<double> values, int cells_per_side,
                            double alpha, double beta) {
  if (cells_per_side <= 0 || (cells_per_side & (cells_per_side - 1)) != 0)
    throw ArgumentError("grid cells per side must be a power of two");
  if (values.size() != static_cast<std::size_t>(cells_per_side) * cells_per_side)
    throw ArgumentError("grid value count does not match cells_per_side^2");
  CoefficientField f;
  f.kind = CoefficientField::Kind::Grid;
  f.alpha = alpha;
  f.beta = beta;
  f.epsilon = 1.0 / cells_per_side;
  f.grid_cells = cells_per_side;
  f.grid_values = std::move(values);
  return f;
}

CoefficientField synthetic_checkerboard(std::uint64_t seed, double epsilon,
                                        double alpha, double beta) {
  if (!(alpha > 0) || !(beta >= alpha))
    throw ArgumentError("checkerboard requires 0 < alpha <= beta");
  const double cells_d = 1.0 / epsilon;
  const int cells = static_cast<int>(std::lround(cells_d));
  if (cells <= 0 || std::abs(cells * epsilon - 1.0) > 1e-12 ||
      (cells & (cells - 1)) != 0)
    throw ArgumentError("checkerboard epsilon must be a dyadic fraction 2^-k");

  std::mt19937_64 rng(seed);
  std::vector<double> values(static_cast<std::size_t>(cells) * cells);
  for (double& v : values) {
    // Map the top 53 bits to [0,1); uniform_real_distribution is not
    // reproducible across standard libraries.
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = alpha + (beta - alpha) * u;
  }
  return grid_field(std::move(values), cells, alpha, beta);
}

std::vector<double> sample_to_mesh(const CoefficientField& field,
                                   const StructuredQuadMesh& mesh) {
  if (mesh.side() > field.epsilon * (1.0 + 1e-12))
    throw ResolutionError("mesh cell side " + std::to_string(mesh.side()) +
                          " does not resolve the coefficient scale " +
                          std::to_string(field.epsilon));
  std::vector<double> values(mesh.n_elems());
  for (int e = 0; e < mesh.n_elems(); ++e) {
    const auto mid = mesh.elem_midpoint(e);
    values[e] = field.eval(mid[0], mid[1]);
  }
  return values;
}

std::uint64_t coefficient_hash(const std::vector<double>& values, int mesh_level) {
  std::uint64_t h = 1469598103934665603ull; // FNV offset basis
  auto mix = [&h](const unsigned char* p, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      h ^= p[k];
      h *= 1099511628211ull; // FNV prime
    }
  };
  const std::uint64_t lvl = static_cast<std::uint64_t>(mesh_level);
  mix(reinterpret_cast<const unsigned char*>(&lvl), sizeof lvl);
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    mix(reinterpret_cast<const unsigned char*>(&bits), sizeof bits);
  }
  return h;
}

void write_coefficient_csv(const std::string& path, const std::vector<double>& values,
                           int cells_per_side) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  out.precision(17);
  for (int j = 0; j < cells_per_side; ++j) {
    for (int i = 0; i < cells_per_side; ++i) {
      if (i) out << ',';
      out << values[static_cast<std::size_t>(j) * cells_per_side + i];
    }
    out << '\n';
  }
}

} // namespace lodwave

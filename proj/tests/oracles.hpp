// Independent reference computations shared by unit and acceptance tests.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Frequencies (Hz) of a grid over [0, f_max] that no band covers and that
/// lie strictly between the lowest band minimum and some band minimum <= f_max.
inline std::vector<char> grid_scan(const std::vector<std::vector<double>>& bands, double f_max,
                                   double step, std::size_t* points) {
  const std::size_t nb = bands.front().size();
  std::vector<double> lo(nb, 1e300), hi(nb, -1e300);
  for (const auto& row : bands)
    for (std::size_t j = 0; j < nb; ++j) lo[j] = std::min(lo[j], row[j]), hi[j] = std::max(hi[j], row[j]);
  const std::size_t n = static_cast<std::size_t>(f_max / step) + 1;
  std::vector<char> gap(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = i * step;
    bool covered = false, above = false;
    for (std::size_t j = 0; j < nb; ++j) {
      if (f >= lo[j] && f <= hi[j]) covered = true;
      if (lo[j] > f && lo[j] <= f_max) above = true;
    }
    gap[i] = !covered && f > lo[0] && above;
  }
  *points = n;
  return gap;
}

/// Random band matrix: rows sorted ascending, bands loosely stacked so that
/// gaps appear in some draws and not in others.
inline std::vector<std::vector<double>> random_bands(std::mt19937_64& rng, int n_k, int n_bands,
                                                     double spacing, double spread = 1.0) {
  std::uniform_real_distribution<double> u(-0.6, 0.6);
  std::vector<std::vector<double>> b(n_k, std::vector<double>(n_bands));
  std::vector<double> base(n_bands), amp(n_bands);
  for (int j = 0; j < n_bands; ++j) {
    base[j] = (j + 0.5) * spacing;
    amp[j] = spread * spacing * (0.2 + 0.8 * std::abs(u(rng)));
  }
  for (int i = 0; i < n_k; ++i) {
    for (int j = 0; j < n_bands; ++j) b[i][j] = std::max(0.0, base[j] + amp[j] * u(rng));
    std::sort(b[i].begin(), b[i].end());
  }
  return b;
}

/// Normal-mode frequencies of two resonators (f_r) coupled with strength g
/// to one waveguide mode at f_r + delta, in the rotating-frame 3x3 model.
inline std::array<double, 3> coupled_triplet(double f_r, double delta, double g) {
  Eigen::Matrix3d H;
  H << f_r, g, 0, g, f_r + delta, g, 0, g, f_r;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(H);
  return {es.eigenvalues()(0), es.eigenvalues()(1), es.eigenvalues()(2)};
}

}  // namespace oracle

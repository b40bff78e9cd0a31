#ifndef LEVSIM_GRID_HPP
#define LEVSIM_GRID_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace levsim {

// Uniform position grid, symmetric about zero, laid out FFT-style:
// z_j = (j - n_points/2) * spacing for j = 0 .. n_points-1.
struct GridSpec {
  int n_points = 0;
  double extent = 0.0; // total covered length [m]

  double spacing() const { return extent / n_points; }
  double z(int j) const { return (j - n_points / 2) * spacing(); }
  int center_index() const { return n_points / 2; }
};

// Checks n_points is a power of two (FFT requirement) and extent positive.
inline void validate(const GridSpec& g) {
  if (g.n_points < 2 || (g.n_points & (g.n_points - 1)) != 0)
    throw std::domain_error("grid n_points must be a power of two >= 2");
  if (!(g.extent > 0.0))
    throw std::domain_error("grid extent must be positive");
}

// Complex wavefunction sampled on a grid, one component per spin level.
// Normalization convention: sum_j |psi(z_j)|^2 * spacing = 1 summed over
// components.
struct GridWavefunction {
  std::vector<Eigen::VectorXcd> components;
  GridSpec grid;
  double mass = 0.0; // particle mass [kg], needed for free propagation

  double discrete_norm_sq() const {
    double s = 0.0;
    for (const auto& c : components) s += c.squaredNorm();
    return s * grid.spacing();
  }

  // Total probability density at each grid point.
  Eigen::VectorXd density() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(grid.n_points);
    for (const auto& c : components) d += c.cwiseAbs2();
    return d;
  }
};

} // namespace levsim

#endif

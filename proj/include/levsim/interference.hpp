#ifndef LEVSIM_INTERFERENCE_HPP
#define LEVSIM_INTERFERENCE_HPP

#include <Eigen/Dense>

#include "levsim/grid.hpp"
#include "levsim/units.hpp"
#include "levsim/warnings.hpp"

namespace levsim {

// Result of a fringe analysis. density is the total probability density
// sampled on grid [1/m]: nonnegative, and its Riemann sum is one within
// 1e-6 whenever the input state is normalized. period_predicted comes from
// the branch geometry (+infinity when the branches coincide or there is no
// flight, i.e. nothing to interfere); period_measured is read off the
// density's spatial spectrum (0 when extraction is impossible).
// visibility = (max - min) / (max + min) of the density over the central
// +-1.5 fringe periods, in [0, 1]; 0 when no fringe window exists.
struct FringeReport {
  Eigen::VectorXd density;
  GridSpec grid;
  double period_measured = 0.0;  // [m]
  double period_predicted = 0.0; // [m]
  double visibility = 0.0;
};

// Free-flight evolution for time t (either sign): each momentum component
// is multiplied by exp(-i hbar k^2 t / (2 m)) between a forward and an
// inverse FFT, so the map is exactly unitary and the discrete norm is
// preserved to rounding. Before propagating, the flight is checked to stay
// on the grid: the position support radius (outside which less than 1e-10
// of the probability lives) plus the ballistic reach hbar*k_support*|t|/m
// of the matching momentum support must stay within 98% of the grid
// half-extent, else std::domain_error asks for a larger extent. t = 0
// returns the input unchanged.
GridWavefunction free_propagate(const GridWavefunction& psi, double t);

// Closed-form fringe pattern after free flight t > 0 for two equal-weight
// vacuum branches centered at -b and +b, recombined with the + sign, in a
// trap of inverse length unit beta = sqrt(m omega / hbar). The mass is an
// explicit argument because the dimensionless flight time needs it: with
// z~ = beta z, b~ = beta b, t~ = hbar beta^2 t / (2 m) and s^2 = 1 + 4 t~^2,
// the density in the scaled units is
//   rho(z~) = [ exp(-(z~-b~)^2/s^2) + exp(-(z~+b~)^2/s^2)
//               + 2 exp(-(z~^2+b~^2)/s^2) cos(4 b~ z~ t~ / s^2) ]
//             / (2 sqrt(pi s^2) (1 + exp(-b~^2)))
// and period_predicted = 2 pi (1 + 4 t~^2) / (4 b~ t~) / beta. The measured
// period and the visibility are extracted from the sampled density with the
// same estimator the numeric patterns use, so this doubles as that
// estimator's oracle. b = 0 degenerates to a single spreading Gaussian:
// period_predicted = +infinity, period_measured = 0, visibility = 0, and a
// warning is emitted.
FringeReport analytic_pattern_vacuum(double b, double t, double beta,
                                     double mass, const GridSpec& grid,
                                     WarningSink* warnings = nullptr);

struct PatternOptions {
  // Expected fringe period [m]; 0 derives the far-field prediction
  // 2 pi hbar t / (m D) from the input state's branch separation estimate
  // D = 2 E|z| (exact for well-separated symmetric branches).
  double period_hint = 0.0;
  WarningSink* warnings = nullptr;
};

// Fringe pattern of a prepared superposition: free-propagate psi for
// flight_time (> 0), take the total probability density, and extract the
// fringe period and visibility. The period estimator subtracts a smoothed
// envelope (Gaussian kernel of width 5 predicted periods), takes the
// magnitude spectrum of the residual, and refines the dominant spectral
// peak within one octave of the predicted spatial frequency by parabolic
// interpolation. psi must be normalized within 1e-6.
FringeReport pattern(const GridWavefunction& psi, double flight_time,
                     const PatternOptions& options = {});

struct ThermalOptions {
  int sign = +1;             // branch recombination sign for both components
  int grid_points = 1 << 16; // power of two
  double grid_extent = 4e-6; // [m]; explicit so both components share a grid
  int dim = 0;               // Fock dimension override for the pipeline runs
  WarningSink* warnings = nullptr;
};

// Fringe pattern for an initial thermal occupation nbar, truncated to the
// lowest two Fock states and renormalized: the |1> weight is
// w1 = nbar / (1 + nbar)^2 and the |0> weight 1 - w1. Runs the full
// superposition pipeline for n = 0 and (when w1 > 0) for n = 1 on the
// shared grid, free-propagates each result for flight_time, and mixes the
// densities incoherently. Warns when nbar > 0.2, where the two-term
// truncation misplaces more than a few percent of the population.
// nbar = 0 reproduces the pure n = 0 pattern exactly.
FringeReport thermal_pattern(double nbar, const ExperimentParams& params,
                             double flight_time,
                             const ThermalOptions& options = {});

} // namespace levsim

#endif

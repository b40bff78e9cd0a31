#ifndef LEVSIM_CONSTANTS_HPP
#define LEVSIM_CONSTANTS_HPP

#include <numbers>

// Physical constants (SI, CODATA 2018) and unit conversions used throughout.
namespace levsim::constants {

inline constexpr double pi = std::numbers::pi;

inline constexpr double hbar = 1.054571817e-34;  // reduced Planck constant [J s]
inline constexpr double k_B = 1.380649e-23;      // Boltzmann constant [J/K]
inline constexpr double mu_B = 9.2740100783e-24; // Bohr magneton [J/T]
inline constexpr double c_light = 299792458.0;   // speed of light [m/s]
inline constexpr double g_s = 2.0;               // electron spin g-factor (approx.)

inline constexpr double pa_per_torr = 133.322;   // pressure conversion [Pa/Torr]

// Angular frequency from ordinary frequency: omega = 2*pi*f.
// All frequencies are stored internally as angular rates [rad/s]; user-facing
// inputs are in Hz and converted exactly once at the boundary.
inline constexpr double angular(double f_hz) { return 2.0 * pi * f_hz; }
inline constexpr double to_hz(double omega) { return omega / (2.0 * pi); }

inline constexpr double torr_to_pa(double p_torr) { return p_torr * pa_per_torr; }

} // namespace levsim::constants

#endif

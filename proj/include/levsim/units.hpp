#ifndef LEVSIM_UNITS_HPP
#define LEVSIM_UNITS_HPP

#include <string>

#include "levsim/constants.hpp"
#include "levsim/warnings.hpp"

// Parameter handling and closed-form scale estimates for the levitated
// nanodiamond experiments. Everything here is scalar arithmetic; all angular
// frequencies are rad/s, all lengths meters, all masses kg.
namespace levsim {

// Full experiment description. Defaults reproduce the headline scenario:
// a 30 nm diamond in a 20 kHz trap with a 3e4 T/m magnetic gradient,
// interrogated at 1e-11 Torr and 4.5 K after 10 ms of free flight.
struct ExperimentParams {
  double diameter = 30e-9;        // sphere diameter [m]
  double density = 3500.0;        // material density [kg/m^3]
  double omega_m0 = constants::angular(20e3); // initial trap [rad/s]
  double omega_m1 = constants::angular(20e3); // post-sweep trap [rad/s]
  double omega_m2 = constants::angular(20e3); // splitting trap [rad/s]
  double gradient = 3e4;          // magnetic field gradient G [T/m]
  double pressure = constants::torr_to_pa(1e-11); // gas pressure [Pa]
  double gas_temperature = 4.5;   // environment gas temperature [K]
  double internal_temperature = 300.0; // internal (blackbody) temperature [K]
  double gas_mass = 4.83e-26;     // mass of one gas molecule [kg]
  double flight_time = 10e-3;     // free expansion time [s]
  double spin_T2 = 1.8e-3;        // spin dephasing time budget [s]
  double interference_width = 0.0; // blackbody coherence length z [m]; 0 = use D_m
  // Im[(eps-1)/(eps+2)] at thermal wavelengths. This is a calibration knob,
  // not a tabulated material constant: the default is back-solved so that the
  // default scenario at 300 K internal temperature with z = D_m gives 3 Hz.
  double im_eps = 2.7894327656339657;
};

// Values derived from ExperimentParams. derive() below is the single place
// where derived quantities are computed; nothing else re-derives them.
struct DerivedParams {
  double mass = 0;        // sphere mass [kg]
  double a0 = 0;          // zero-point width at omega_m0 [m]
  double a1 = 0;          // zero-point width at omega_m1 [m]
  double a2 = 0;          // zero-point width at omega_m2 [m]
  double lambda0 = 0;     // spin-mechanical coupling at omega_m0 [rad/s]
  double lambda2 = 0;     // spin-mechanical coupling at omega_m2 [rad/s]
  double omega_qnd = 0;   // default drive splitting for the QND hold [rad/s]
  double chi = 0;         // dispersive phase-shift rate at omega_qnd [rad/s]
  double d_m = 0;         // maximal branch separation D_m at omega_m2 [m]
  double splitting = 0;   // spin transition splitting at separation D_m [rad/s]
  double fringe_period = 0; // far-field fringe period after flight_time [m]
  double beta2 = 0;       // inverse length unit sqrt(m*omega_m2/hbar) [1/m]
};

// m = rho * pi * d^3 / 6 for a homogeneous sphere.
double mass_from_diameter(double diameter, double density);

// Zero-point width a = sqrt(hbar / (2 m omega)).
double zero_point_width(double mass, double omega);

// Spin-mechanical coupling lambda = g_s mu_B G a / hbar with a = a(m, omega).
double coupling_lambda(double gradient, double mass, double omega);

// Maximal splitting of the two spin branches,
// D_m = 4 g_s mu_B G / (m omega^2); identical to 8 lambda a / omega.
double max_separation(double gradient, double mass, double omega);

// Dispersive phonon phase-shift rate chi = 4 Omega lambda^2 / (4 Omega^2 - omega_m^2).
// Throws std::domain_error at the 2|Omega| = omega_m singularity.
double qnd_chi(double omega_spin, double lambda, double omega_m);

// Effective two-level splitting Omega = |Omega_NV|^2 / (4 Delta) of the
// dressed spin driven at Rabi frequency Omega_NV with detuning Delta.
// Warns when the large-detuning condition |Delta| >= 4 |Omega_NV| fails.
double effective_rabi(double omega_nv, double delta, WarningSink* warnings = nullptr);

// Spin transition splitting between the two displaced branches,
// g_s mu_B G D_m / hbar.
double spin_splitting(double gradient, double d_m);

// Far-field interference fringe period 2 pi hbar t / (m D_m).
double fringe_period(double time, double mass, double d_m);

// Finite-time fringe period in the dimensionless units of the free-flight
// analysis (lengths in 1/beta, times in 2m/(hbar beta^2)): 2 pi (1+4t^2)/(4bt).
double fringe_period_dimensionless(double b, double t);

// One-stop derivation of every derived quantity. A zero gradient is allowed
// (no coupling): lambda, d_m, splitting and chi are then 0 and fringe_period
// is +infinity.
DerivedParams derive(const ExperimentParams& p);

// Validate physical ranges (positive lengths, densities, frequencies, ...;
// the gradient may be zero). Throws std::domain_error naming the offending
// field.
void validate(const ExperimentParams& p);

} // namespace levsim

#endif

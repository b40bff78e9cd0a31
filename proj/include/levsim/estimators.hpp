#ifndef LEVSIM_ESTIMATORS_HPP
#define LEVSIM_ESTIMATORS_HPP

#include <string>
#include <vector>

#include "levsim/units.hpp"
#include "levsim/warnings.hpp"

namespace levsim {

// One feasibility comparison: a dimensionless number (rate times duration,
// or a ratio of timescales) that must stay well below one for the scheme to
// work. pass means value < 0.1; larger values are flagged, with the
// interpretation spelled out in the note.
struct BudgetLine {
  std::string name;  // stable key, snake_case
  double value = 0.0;
  bool pass = false;
  std::string note;
};

// Decoherence rates and the timescale budget for one parameter set.
struct DecoherenceReport {
  double gamma_gas = 0.0;     // gas-collision decoherence rate [Hz]
  double gamma_bb = 0.0;      // blackbody-emission decoherence rate [Hz]
  double mean_velocity = 0.0; // mean gas-molecule velocity [m/s]
  std::vector<BudgetLine> budget;
  // Scale notes that are not dynamical results (weak-gradient coupling
  // reference, gravitational decoherence orders of magnitude).
  std::vector<std::string> annotations;
};

// Mean thermal velocity of a gas molecule, sqrt(8 k_B T / (pi m_a)) [m/s].
double mean_velocity(double temperature, double gas_mass);

// Gas-collision decoherence rate
//   4 pi sqrt(2 pi) P d^2 / (sqrt(3) vbar m_a)  [Hz]
// for pressure P, sphere diameter d, and gas molecules of mass m_a at the
// given temperature (which sets vbar).
double gas_collision_rate(double pressure, double diameter,
                          double temperature, double gas_mass);

// Blackbody-emission decoherence rate
//   (2 pi^5 / 189) c d^3 (k_B T_i / (hbar c))^6 im_eps z^2  [Hz]
// for sphere diameter d, internal temperature T_i, material response
// im_eps = Im[(eps-1)/(eps+2)] at thermal wavelengths, and interference
// width z (z = 0 gives 0). The sixth power is computed by explicit
// multiplication, so halving T_i divides the rate by exactly 64. im_eps is
// a calibration knob, not a tabulated constant — see ExperimentParams.
double blackbody_rate(double diameter, double internal_temperature,
                      double im_eps, double width);

// Compiles the protocol timescales — phonon exchange 1/lambda, dispersive
// readout 1/(2|chi|), superposition preparation pi/omega_m2, and the free
// flight — against the spin coherence budget T2 and against both
// decoherence rates, one BudgetLine per comparison (value < 0.1 passes).
// The blackbody interference width defaults to the derived maximal branch
// separation when params.interference_width is 0. Pure function of params;
// flagged lines are mirrored into `warnings`.
DecoherenceReport feasibility_report(const ExperimentParams& params,
                                     WarningSink* warnings = nullptr);

} // namespace levsim

#endif

#ifndef LEVSIM_PROTOCOLS_HPP
#define LEVSIM_PROTOCOLS_HPP

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "levsim/dynamics.hpp"
#include "levsim/grid.hpp"
#include "levsim/hilbert.hpp"
#include "levsim/units.hpp"
#include "levsim/warnings.hpp"

// Experiment sequences composed from the dynamics primitives: phonon ladder
// climbing, state transfer with a fidelity scan, dispersive phase
// accumulation, and the full two-branch superposition pipeline.
namespace levsim {

// One step of a pulse program.
struct PulseStep {
  enum class Kind {
    JC,          // resonant co-rotating coupling for `duration`
    AntiJC,      // resonant counter-rotating coupling for `duration`
    QndHold,     // dispersive sigma_z a^dag a coupling for `duration`
    Idle,        // no drive: trap evolution; for the triplet the static
                 // gradient coupling lambda S_z (a + a^dag) stays on
    SpinPulse,   // instantaneous unitary on the spin factor
    FrameChange, // sudden trap retune to new_omega (basis re-expansion)
    SetSpin,     // instantaneous re-preparation of the spin factor
  };
  Kind kind = Kind::Idle;
  double duration = 0.0;       // [s]; JC / AntiJC / QndHold / Idle
  double new_omega = 0.0;      // [rad/s]; FrameChange
  Eigen::MatrixXcd spin_op;    // SpinPulse unitary, spin_dim x spin_dim
  Eigen::VectorXcd spin_state; // SetSpin target (any spin dimension 1..3)
};

// Durations must be >= 0 and finite; FrameChange needs new_omega > 0;
// SpinPulse needs a square unitary; SetSpin a nonzero vector of size 1..3.
void validate(const PulseStep& step);

struct SequenceOptions {
  double lambda = 0.0;      // [rad/s] coupling for JC/AntiJC and triplet Idle
  double chi = 0.0;         // [rad/s] dispersive rate for QndHold
  bool full_model = false;  // realize JC/AntiJC through the full coupling
                            // (counter-rotating terms retained)
  WarningSink* warnings = nullptr;
};

// Applies the steps in order. JC/AntiJC/QndHold require a doublet state;
// Idle on the triplet evolves under the conditional-displacement Hamiltonian
// with `lambda`; Idle on other spin dimensions is pure trap evolution (the
// drive that defines the doublet's dressed coupling is off). SetSpin requires
// the current spin level to be definite (population > 1 - 1e-9 in one level)
// and rebuilds the state as new_spin (x) current mechanics.
QuantumState run_sequence(QuantumState psi, const std::vector<PulseStep>& steps,
                          const SequenceOptions& options = {});

// Resonant-sector Hamiltonians only, or the full coupling with the
// counter-rotating terms kept.
enum class ProtocolMode { Ideal, Full };

struct ProtocolResult {
  QuantumState final_state;
  // (time [s], fidelity in [0,1]); meaning documented per protocol. State
  // preparation fidelities use the square-root (Uhlmann) convention for a
  // pure target, F = sqrt(<T| rho_m |T>); F^2 is the target population.
  std::vector<std::pair<double, double>> fidelity_series;
  // (time [s], observable); cat_pipeline: branch separation [m] vs time.
  std::vector<std::pair<double, double>> trace;
  std::map<std::string, double> summary;
  std::optional<GridWavefunction> grid; // filled by pipelines that end on a grid
};

struct LadderOptions {
  ProtocolMode mode = ProtocolMode::Ideal;
  int dim = 0; // Fock truncation; 0 = automatic
  WarningSink* warnings = nullptr;
};

// Climbs |+,0> -> |n_target> by alternating the two resonant couplings, step
// i lasting pi / (2 lambda sqrt(i)). fidelity_series holds (cumulative time,
// mechanical fidelity to |i> in the square-root convention) after each step.
// Summary keys:
// coupling_rad_s, t1_s, step_<i>_s, total_time_s, final_fidelity, fock_dim.
// Requires n_target < dim/2.
ProtocolResult fock_ladder(int n_target, const ExperimentParams& params,
                           const LadderOptions& options = {});

struct TransferOptions {
  ProtocolMode mode = ProtocolMode::Full;
  double window_lo = 0.5;       // scan window in units of t1 = pi/(2 lambda)
  double window_hi = 1.5;
  int samples_per_period = 400; // samples per pi/lambda of scan window
  int dim = 0;                  // 0 = automatic
  double lambda_override = 0.0; // [rad/s]; 0 = derive from params.gradient
  bool convergence_check = false; // re-run peak at 1.5x dim, drift < 1e-6
  WarningSink* warnings = nullptr;
};

// Starting from (c0 |+> + c1 |->) (x) |0>, transfers the spin superposition
// onto the phonon: target c1 |0> + i c0 |1>, reached exactly when the slow
// exchange completes on a crest of the trap rotation (w t = pi mod 2 pi).
// Scans the window for the peak of the mechanical fidelity (square-root
// convention); fidelity_series is the full (t, F) trace; final_state is the
// state at the refined peak time. Summary keys:
// peak_fidelity, peak_time_s, t1_s, s_ratio, coupling_rad_s, fock_dim.
// Preconditions: |c0|^2 + |c1|^2 = 1 within 1e-9; omega/lambda > 2.
ProtocolResult superposition_transfer(complexd c0, complexd c1,
                                      const ExperimentParams& params,
                                      const TransferOptions& options = {});

// Peak transfer fidelity of (|0> + i|1>)/sqrt(2) preparation as a function of
// s = omega/lambda (coupling varied, trap fixed at params.omega_m0). Each s
// must exceed 2. Returns (s, peak fidelity) in input order.
std::vector<std::pair<double, double>> fidelity_scan(
    const std::vector<double>& s_values, const ExperimentParams& params,
    const TransferOptions& options = {});

struct QndOptions {
  double omega_spin = 0.0; // [rad/s]; 0 = default omega_m0/2 + 5 lambda
  int samples = 64;        // phase samples over the hold (raised if aliasing)
  double min_detuning_multiple = 3.0; // warn when ||Omega| - w/2| below this x lambda
  int dim = 0;
  bool full_companion = true; // also evolve the full coupling and report deviation
  WarningSink* warnings = nullptr;
};

struct QndResult {
  double phase = 0.0;    // accumulated relative spin phase at hold_time [rad]
  double chi = 0.0;      // dispersive rate used [rad/s]
  double rate_fit = 0.0; // least-squares d(phase)/dt [rad/s], = 2 chi n exactly
  double full_model_deviation = 0.0; // max |phase_full(n,t)-phase_full(0,t) - 2 chi n t|
  std::vector<std::pair<double, double>> phase_series; // (t, unwrapped phase)
};

// Evolves (|+> + |->)/sqrt(2) (x) |n> under the dispersive Hamiltonian and
// returns the unwrapped relative phase between the spin components, which
// grows as 2 chi n t. The companion run under the full coupling reports how
// far the real phase (referenced against an n=0 run) strays from that line.
QndResult qnd_phase(int n, double hold_time, const ExperimentParams& params,
                    const QndOptions& options = {});

struct CatOptions {
  int sign = +1;          // branch recombination sign
  int dim = 0;            // 0 = automatic
  int grid_points = 4096; // power of two
  double grid_extent = 0.0; // [m]; 0 = automatic
  int trace_samples = 129;  // separation-vs-time samples over one trap period
  bool convergence_check = false; // re-run at 1.5x dim, drift < 1e-6
  WarningSink* warnings = nullptr;
};

// Full superposition pipeline: prepare |n> in the omega_m0 trap, re-express
// in the omega_m1 trap (lossless sweep), put the spin into
// (|+1> + |-1>)/sqrt(2), suddenly drop to the omega_m2 trap, evolve half a
// trap period to maximal branch separation, cross-check against the
// closed-form propagator, remove the spin with the chosen sign, and project
// the mechanical superposition onto a position grid. trace holds branch
// separation vs time over one full trap period. Summary keys: separation_m,
// separation_over_width, prep_time_s, coherence_ratio, verify_closed_form,
// verify_ideal (-1 when the traps differ), splitting_rad_s, branch_overlap,
// fock_dim. Requires omega_m2 <= omega_m1 <= omega_m0 and sign = +-1.
ProtocolResult cat_pipeline(int n, const ExperimentParams& params,
                            const CatOptions& options = {});

} // namespace levsim

#endif

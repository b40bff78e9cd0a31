#ifndef LEVSIM_DYNAMICS_HPP
#define LEVSIM_DYNAMICS_HPP

#include <Eigen/Dense>
#include <vector>

#include "levsim/hilbert.hpp"
#include "levsim/warnings.hpp"

// Spin-mechanical Hamiltonians and exact (eigendecomposition-based) time
// evolution on the truncated Fock space. All Hamiltonians are stored as
// H / hbar in rad/s.
namespace levsim {

// Spin bases, fixed by convention:
//  - doublet {|+>, |->}       (dressed two-level sector), spin_dim = 2,
//    sigma_z = diag(+1, -1), sigma_+ = |+><-|;
//  - triplet {|+1>, |0>, |-1>} (bare S = 1 triplet),       spin_dim = 3,
//    S_z = diag(+1, 0, -1).
enum class HamiltonianKind {
  // omega a^dag a + Omega sigma_z + lambda (sigma_+ + sigma_-)(a + a^dag).
  // The full dressed-state model; omega_spin = Omega is a free parameter.
  Effective,
  // omega a^dag a + lambda S_z (a + a^dag) on the triplet. The workhorse for
  // conditional displacement; admits the exact closed-form propagator below.
  SpinMech,
  // omega a^dag a + (omega/2) sigma_z + lambda (sigma_+ a + sigma_- a^dag).
  // Resonant beam-splitter sector of Effective; omega_spin is fixed to
  // +omega/2 (passing anything else is an error).
  JC,
  // omega a^dag a - (omega/2) sigma_z + lambda (sigma_+ a^dag + sigma_- a).
  // Two-mode-squeezer sector; omega_spin fixed to -omega/2.
  AntiJC,
  // chi sigma_z a^dag a with chi passed through `lambda`. The dispersive
  // phonon-number readout interaction (spin-local terms dropped).
  QND,
};

// Spin dimension used by each kind (3 for SpinMech, else 2).
int spin_dimension(HamiltonianKind kind);

struct HamiltonianSpec {
  HamiltonianKind kind = HamiltonianKind::Effective;
  FockBasis basis;
  double lambda = 0.0;     // coupling [rad/s]; the dispersive shift chi for QND
  double omega_spin = 0.0; // sigma_z coefficient Omega [rad/s]; see per-kind rules
};

// Enforces the per-kind omega_spin rules: free for Effective; 0 (meaning
// "default") or exactly +omega/2 for JC; 0 or -omega/2 for AntiJC; 0 for
// SpinMech and QND. Throws std::domain_error.
void validate(const HamiltonianSpec& spec);

// Dense H / hbar in rad/s, spin-major layout.
OperatorMatrix build_hamiltonian(const HamiltonianSpec& spec);

// Exact evolution exp(-i H t) |psi> through the spectral decomposition of H,
// computed once at construction. When H has no off-diagonal spin blocks
// (SpinMech, QND) each spin block is decomposed separately, which is ~10x
// cheaper at fixed Fock dimension.
class Propagator {
 public:
  explicit Propagator(const HamiltonianSpec& spec);

  const HamiltonianSpec& spec() const { return spec_; }
  const Eigen::MatrixXcd& hamiltonian() const { return h_; }

  // |psi(t)> = exp(-i H t) |psi0>; any real t (negative runs backwards).
  QuantumState evolve(const QuantumState& psi0, double t) const;

  // <psi|H|psi> [rad/s].
  double energy(const QuantumState& psi) const;

 private:
  struct Block {
    Eigen::MatrixXcd vectors;
    Eigen::VectorXd values;
    Eigen::Index offset;
  };
  HamiltonianSpec spec_;
  Eigen::MatrixXcd h_;
  std::vector<Block> blocks_;
};

// One-shot convenience wrapper around Propagator.
QuantumState evolve(const HamiltonianSpec& spec, const QuantumState& psi0, double t);

// Closed-form propagator for the SpinMech Hamiltonian, used as an independent
// cross-check of the numerical evolution. Per S_z eigenvalue s the exact
// result is
//   exp(i s^2 theta(t)) exp(-i omega a^dag a t) D(s g (1 - e^{i omega t})),
//   g = lambda/omega,  theta(t) = lambda^2 (t/omega - sin(omega t)/omega^2).
// Throws std::invalid_argument for any other kind. `warnings` receives
// displacement-truncation notes when the basis is too small for the reach.
QuantumState magnus_propagate(const HamiltonianSpec& spec, const QuantumState& psi0,
                              double t, WarningSink* warnings = nullptr);

// The maximally separated two-branch state reached from
// (|+1> + |-1>)/sqrt(2) (x) |n> after a half period under SpinMech:
//   (|+1> (x) P D(+2g) |n>  +  |-1> (x) P D(-2g) |n>) / sqrt(2),
// with P the phonon parity and g = lambda/omega. The |+1> branch sits at
// z = -2 g w (2 w = distance unit), the |-1> branch mirrored. Normalized on
// the truncated basis; `warnings` receives displacement-truncation notes.
QuantumState cat_state(const FockBasis& basis, double lambda, int n,
                       WarningSink* warnings = nullptr);

struct DisentangleOptions {
  // Magnetic gradient [T/m] behind the branch-selective pulse. When positive,
  // the branches must be spectrally resolvable: the differential Zeeman
  // splitting g_s mu_B * gradient * separation / hbar must exceed
  // resolution_multiple * linewidth, unless the branches are coincident
  // (separation below coincidence_tolerance in units of the zero-point
  // width), in which case the pulse addresses both identically and the check
  // is moot. Zero gradient skips the check.
  double gradient = 0.0;
  double linewidth = 2.0 * 3.14159265358979323846 * 1e3; // [rad/s]
  double resolution_multiple = 10.0;
  double coincidence_tolerance = 1e-6;
};

struct DisentangleResult {
  QuantumState state;       // spin left in |0>, mechanics in the chosen combination
  double splitting = 0.0;   // differential Zeeman splitting at the branch separation [rad/s]
  double branch_separation = 0.0; // |<z>_+1 - <z>_-1| [m]
};

// Removes the spin from a two-branch state |+1>(x)u + |-1>(x)v (triplet with
// an empty |0> component), mapping it to |0> (x) (u + sign*v)/norm. sign is
// +1 or -1, matching the parity of the final microwave pulse sequence.
// Throws std::domain_error when the requested combination has (numerically)
// vanishing weight or when the resolution check fails; std::invalid_argument
// for states that are not of the two-branch form.
DisentangleResult disentangle(const QuantumState& psi, int sign,
                              const DisentangleOptions& options = {});

} // namespace levsim

#endif

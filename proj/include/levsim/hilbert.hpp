#ifndef LEVSIM_HILBERT_HPP
#define LEVSIM_HILBERT_HPP

#include <Eigen/Dense>
#include <complex>
#include <utility>

#include "levsim/errors.hpp"
#include "levsim/grid.hpp"
#include "levsim/warnings.hpp"

// Truncated Fock-space machinery: states, operators, displacement, basis
// changes between traps of different frequency, and projection onto position
// grids. Dense complex linear algebra throughout; dimensions stay modest
// (a few hundred levels), so no sparse structure is needed.
namespace levsim {

using complexd = std::complex<double>;

// Truncated harmonic-oscillator basis |0..dim-1> of a trap at `omega` for a
// particle of mass `mass`.
struct FockBasis {
  int dim = 0;
  double omega = 0.0; // trap angular frequency [rad/s]
  double mass = 0.0;  // particle mass [kg]

  // Zero-point width sqrt(hbar / (2 m omega)) [m].
  double width() const;
  // Inverse length unit beta = sqrt(m omega / hbar) = 1/(sqrt(2) width) [1/m].
  double beta() const;
};

bool same_basis(const FockBasis& a, const FockBasis& b);
void validate(const FockBasis& b);

// Pure state on spin (x) Fock space. Amplitudes are spin-major:
// index = s * basis.dim + n. spin_dim is 1 (mechanics only), 2 (the {|+>,|->}
// dressed doublet) or 3 (the {|+1>,|0>,|-1>} triplet, in that order).
struct QuantumState {
  Eigen::VectorXcd amplitudes;
  int spin_dim = 1;
  FockBasis basis;

  double norm() const { return amplitudes.norm(); }
  // View of the Fock amplitudes attached to spin level s.
  Eigen::VectorBlock<const Eigen::VectorXcd> component(int s) const;
  Eigen::VectorBlock<Eigen::VectorXcd> component(int s);

  // |n> with the given spin level occupied (default: single-component state).
  static QuantumState fock_state(const FockBasis& basis, int n, int spin_dim = 1,
                                 int spin_index = 0);
  // Normalized product state spin (x) mechanics.
  static QuantumState product(const Eigen::VectorXcd& spin, const Eigen::VectorXcd& fock,
                              const FockBasis& basis);
};

// Throws std::domain_error unless the state is normalized within 1e-9.
void validate_normalized(const QuantumState& psi);

// Dense operator on spin (x) Fock space (spin_dim = 1 for purely mechanical
// operators). Flags are verified at construction: hermitian within 1e-10 and
// unitary within 1e-10, both relative to the largest entry magnitude.
struct OperatorMatrix {
  Eigen::MatrixXcd entries;
  FockBasis basis;
  int spin_dim = 1;
  bool hermitian = false;
  bool unitary = false;
};

OperatorMatrix make_operator(Eigen::MatrixXcd entries, const FockBasis& basis, int spin_dim,
                             bool hermitian, bool unitary);

// Annihilation / creation pair: <n-1| a |n> = sqrt(n).
std::pair<OperatorMatrix, OperatorMatrix> ladder_ops(const FockBasis& basis);
// Number operator diag(0 .. dim-1).
OperatorMatrix number_op(const FockBasis& basis);
// Position operator z = width * (a + a^dag) [m].
OperatorMatrix position_op(const FockBasis& basis);
// Phonon parity diag((-1)^n).
OperatorMatrix parity(const FockBasis& basis);

// Displacement D(alpha) = exp(alpha a^dag - alpha^* a), computed as the
// exponential of the (anti-Hermitian) truncated generator via eigen-
// decomposition, hence exactly unitary on the truncated space. Emits a
// truncation warning when the displaced vacuum leaks more than 1e-6
// probability into the top 10% of levels.
OperatorMatrix displacement(const FockBasis& basis, complexd alpha,
                            WarningSink* warnings = nullptr);

// Probability the displaced vacuum D(alpha)|0> carries in the top 10% of the
// truncated basis; the adequacy measure behind the displacement warning.
double displacement_leakage(const FockBasis& basis, complexd alpha);

// Suggested truncation for states displaced by |alpha| from Fock level n:
// max(64, ceil(4 (|alpha| + sqrt(n+1))^2) + 20).
int recommended_dim(double alpha_abs, int n_max = 0);

// Spin (x) Fock tensor product (Kronecker product, spin factor left).
Eigen::MatrixXcd spin_fock_kron(const Eigen::MatrixXcd& spin, const Eigen::MatrixXcd& fock);

// Re-expresses the same physical wavefunction in the Fock basis of a trap at
// new_omega (sudden frequency change). Computed by projecting onto the new
// eigenfunctions on a fine position grid with trapezoidal quadrature; matrix
// elements between opposite-parity levels are zeroed exactly. Throws
// TruncationError when the re-expressed state loses more than 1e-6 of its
// norm (truncation too small for the frequency ratio).
QuantumState frame_change(const QuantumState& psi, double new_omega);

// Ideal phonon-number-preserving trap retune: amplitudes unchanged, basis
// frequency replaced. Models a lossless non-adiabatic frequency sweep.
QuantumState retune_ideal(const QuantumState& psi, double new_omega);

// |<a|b>|^2. Throws std::invalid_argument on basis or spin mismatch.
double fidelity(const QuantumState& a, const QuantumState& b);

// Fidelity of the reduced mechanical state against a pure phonon target:
// sum_s |<target|psi_s>|^2.
double phonon_fidelity(const QuantumState& psi, const Eigen::VectorXcd& fock_target);

// Position expectation [m] and spread of the full state.
double mean_position(const QuantumState& psi);
double position_spread(const QuantumState& psi);
// Position expectation of the (unnormalized) branch attached to spin level s;
// returns 0 for an empty branch.
double branch_position(const QuantumState& psi, int s);
// Population of spin level s.
double spin_population(const QuantumState& psi, int s);

// Samples the state on a position grid (one component per spin level).
// Preconditions (std::domain_error): the grid covers mean +- 6 sigma of the
// position distribution, and the spacing resolves the momentum content,
// (|<k>| + 5 sigma_k) * spacing < pi. The momentum margin is 5 sigma (tail
// amplitude ~ e^{-12.5}); the discrete-norm backstop below catches any state
// whose tails decay slower than that. The sampled state must keep discrete
// norm within 1e-6 of one (TruncationError otherwise).
GridWavefunction to_grid(const QuantumState& psi, const GridSpec& grid);

// Orthonormal Hermite functions h_0..h_{nmax-1} at dimensionless x, stable
// for large nmax and large |x| (internally rescaled against underflow).
void hermite_functions(double x, int nmax, double* out);

} // namespace levsim

#endif

#include "levsim/hilbert.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "levsim/constants.hpp"

namespace levsim {

using namespace constants;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

double FockBasis::width() const { return std::sqrt(hbar / (2.0 * mass * omega)); }
double FockBasis::beta() const { return std::sqrt(mass * omega / hbar); }

bool same_basis(const FockBasis& a, const FockBasis& b) {
  return a.dim == b.dim && a.omega == b.omega && a.mass == b.mass;
}

void validate(const FockBasis& b) {
  if (b.dim < 2) throw std::domain_error("Fock basis needs dim >= 2");
  if (!(b.omega > 0.0)) throw std::domain_error("Fock basis needs omega > 0");
  if (!(b.mass > 0.0)) throw std::domain_error("Fock basis needs mass > 0");
}

Eigen::VectorBlock<const VectorXcd> QuantumState::component(int s) const {
  return amplitudes.segment(s * basis.dim, basis.dim);
}

Eigen::VectorBlock<VectorXcd> QuantumState::component(int s) {
  return amplitudes.segment(s * basis.dim, basis.dim);
}

QuantumState QuantumState::fock_state(const FockBasis& basis, int n, int spin_dim,
                                      int spin_index) {
  validate(basis);
  if (n < 0 || n >= basis.dim) throw std::domain_error("Fock level outside basis");
  if (spin_dim < 1 || spin_dim > 3 || spin_index < 0 || spin_index >= spin_dim)
    throw std::domain_error("bad spin layout");
  QuantumState psi;
  psi.spin_dim = spin_dim;
  psi.basis = basis;
  psi.amplitudes = VectorXcd::Zero(spin_dim * basis.dim);
  psi.amplitudes[spin_index * basis.dim + n] = 1.0;
  return psi;
}

QuantumState QuantumState::product(const VectorXcd& spin, const VectorXcd& fock,
                                   const FockBasis& basis) {
  validate(basis);
  if (spin.size() < 1 || spin.size() > 3) throw std::domain_error("bad spin dimension");
  if (fock.size() != basis.dim) throw std::domain_error("fock vector size mismatch");
  QuantumState psi;
  psi.spin_dim = static_cast<int>(spin.size());
  psi.basis = basis;
  psi.amplitudes = VectorXcd::Zero(psi.spin_dim * basis.dim);
  for (int s = 0; s < psi.spin_dim; ++s) psi.component(s) = spin[s] * fock;
  const double nn = psi.amplitudes.norm();
  if (nn == 0.0) throw std::domain_error("zero product state");
  psi.amplitudes /= nn;
  return psi;
}

void validate_normalized(const QuantumState& psi) {
  validate(psi.basis);
  if (psi.amplitudes.size() != static_cast<Eigen::Index>(psi.spin_dim) * psi.basis.dim)
    throw std::domain_error("state layout inconsistent");
  if (std::abs(psi.norm() - 1.0) > 1e-9)
    throw std::domain_error("state is not normalized");
}

namespace {

// Flag verification tolerance is relative to the largest entry so that
// Hamiltonians in rad/s (entries ~1e6) are judged fairly.
void verify_flags(const OperatorMatrix& op) {
  const double scale = std::max(1.0, op.entries.cwiseAbs().maxCoeff());
  if (op.hermitian) {
    const double asym = (op.entries - op.entries.adjoint()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * scale)
      throw std::invalid_argument("operator flagged hermitian is not");
  }
  if (op.unitary) {
    const MatrixXcd g = op.entries.adjoint() * op.entries -
                        MatrixXcd::Identity(op.entries.rows(), op.entries.cols());
    if (g.cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw std::invalid_argument("operator flagged unitary is not");
  }
}

} // namespace

OperatorMatrix make_operator(MatrixXcd entries, const FockBasis& basis, int spin_dim,
                             bool hermitian, bool unitary) {
  validate(basis);
  if (entries.rows() != entries.cols() ||
      entries.rows() != static_cast<Eigen::Index>(spin_dim) * basis.dim)
    throw std::invalid_argument("operator dimension mismatch");
  OperatorMatrix op{std::move(entries), basis, spin_dim, hermitian, unitary};
  verify_flags(op);
  return op;
}

std::pair<OperatorMatrix, OperatorMatrix> ladder_ops(const FockBasis& basis) {
  validate(basis);
  MatrixXcd a = MatrixXcd::Zero(basis.dim, basis.dim);
  for (int n = 1; n < basis.dim; ++n) a(n - 1, n) = std::sqrt(double(n));
  MatrixXcd adag = a.adjoint();
  return {make_operator(std::move(a), basis, 1, false, false),
          make_operator(std::move(adag), basis, 1, false, false)};
}

OperatorMatrix number_op(const FockBasis& basis) {
  validate(basis);
  MatrixXcd n = MatrixXcd::Zero(basis.dim, basis.dim);
  for (int k = 0; k < basis.dim; ++k) n(k, k) = double(k);
  return make_operator(std::move(n), basis, 1, true, false);
}

OperatorMatrix position_op(const FockBasis& basis) {
  validate(basis);
  const double w = basis.width();
  MatrixXcd z = MatrixXcd::Zero(basis.dim, basis.dim);
  for (int n = 1; n < basis.dim; ++n) {
    z(n - 1, n) = w * std::sqrt(double(n));
    z(n, n - 1) = w * std::sqrt(double(n));
  }
  return make_operator(std::move(z), basis, 1, true, false);
}

OperatorMatrix parity(const FockBasis& basis) {
  validate(basis);
  MatrixXcd p = MatrixXcd::Zero(basis.dim, basis.dim);
  for (int n = 0; n < basis.dim; ++n) p(n, n) = (n % 2 == 0) ? 1.0 : -1.0;
  return make_operator(std::move(p), basis, 1, true, true);
}

OperatorMatrix displacement(const FockBasis& basis, complexd alpha, WarningSink* warnings) {
  validate(basis);
  // Generator alpha a^dag - alpha^* a = i K with K Hermitian; exponentiate K
  // through its spectral decomposition so D is unitary by construction.
  MatrixXcd K = MatrixXcd::Zero(basis.dim, basis.dim);
  const complexd minus_i(0.0, -1.0);
  for (int n = 1; n < basis.dim; ++n) {
    K(n, n - 1) = minus_i * alpha * std::sqrt(double(n));
    K(n - 1, n) = std::conj(K(n, n - 1));
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(K);
  if (es.info() != Eigen::Success) throw NumericError("displacement: eigensolver failed");
  VectorXcd phases(basis.dim);
  for (int k = 0; k < basis.dim; ++k)
    phases[k] = std::exp(complexd(0.0, es.eigenvalues()[k]));
  MatrixXcd D = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();

  if (displacement_leakage(basis, alpha) > 1e-6)
    warn(warnings, "displacement: displaced vacuum leaks > 1e-6 probability into the "
                   "top 10% of the basis; increase dim");
  return make_operator(std::move(D), basis, 1, false, true);
}

double displacement_leakage(const FockBasis& basis, complexd alpha) {
  validate(basis);
  // Poisson weights |<n|D(alpha)|0>|^2 = e^{-|a|^2} |a|^{2n} / n!, summed over
  // the top 10% of levels. Evaluated in log space to avoid overflow.
  const double x = std::norm(alpha); // |alpha|^2
  if (x == 0.0) return 0.0;
  const int start = basis.dim - basis.dim / 10 - 1;
  double leak = 0.0;
  double log_px = -x; // log weight at n = 0
  for (int n = 1; n < basis.dim; ++n) {
    log_px += std::log(x) - std::log(double(n));
    if (n >= start) leak += std::exp(log_px);
  }
  return leak;
}

int recommended_dim(double alpha_abs, int n_max) {
  const double reach = std::abs(alpha_abs) + std::sqrt(double(n_max) + 1.0);
  const int dim = static_cast<int>(std::ceil(4.0 * reach * reach)) + 20;
  return std::max(64, dim);
}

Eigen::MatrixXcd spin_fock_kron(const MatrixXcd& spin, const MatrixXcd& fock) {
  MatrixXcd out(spin.rows() * fock.rows(), spin.cols() * fock.cols());
  for (Eigen::Index i = 0; i < spin.rows(); ++i)
    for (Eigen::Index j = 0; j < spin.cols(); ++j)
      out.block(i * fock.rows(), j * fock.cols(), fock.rows(), fock.cols()) =
          spin(i, j) * fock;
  return out;
}

void hermite_functions(double x, int nmax, double* out) {
  // Orthonormal oscillator eigenfunctions via the stable upward recurrence
  //   h_{n+1} = sqrt(2/(n+1)) x h_n - sqrt(n/(n+1)) h_{n-1}.
  // For large |x| the Gaussian seed underflows long before the mid-basis
  // values become negligible, so the working pair carries a power-of-two
  // scale that is re-applied on output.
  constexpr double ln2_512 = 512.0 * 0.6931471805599453;
  double log_h0 = -0.5 * x * x - 0.25 * std::log(pi);
  int scale = 0; // stored value = true value * 2^(-512*scale)
  while (log_h0 < -600.0) {
    log_h0 += ln2_512;
    --scale;
  }
  double h_prev = 0.0, h_cur = std::exp(log_h0);
  for (int n = 0; n < nmax; ++n) {
    out[n] = (scale == 0) ? h_cur : std::ldexp(h_cur, 512 * scale);
    const double h_next = std::sqrt(2.0 / (n + 1)) * x * h_cur -
                          std::sqrt(double(n) / (n + 1)) * h_prev;
    h_prev = h_cur;
    h_cur = h_next;
    if (scale < 0 && std::abs(h_cur) > 0x1p512) {
      h_cur = std::ldexp(h_cur, -512);
      h_prev = std::ldexp(h_prev, -512);
      ++scale;
    }
  }
}

namespace {

// Dimensionless half-range sample layout shared by frame_change: the
// integrands are parity-definite, so integrals run over z >= 0 and are
// doubled for even (m+n) and zeroed for odd.
struct HalfGrid {
  Eigen::VectorXd z;       // z_i = i*h, i = 0..M
  Eigen::VectorXd weights; // trapezoid weights
};

HalfGrid make_half_grid(double z_max, double spacing) {
  const int m = static_cast<int>(std::ceil(z_max / spacing));
  HalfGrid g;
  g.z.resize(m + 1);
  g.weights.resize(m + 1);
  for (int i = 0; i <= m; ++i) {
    g.z[i] = i * spacing;
    g.weights[i] = (i == 0 || i == m) ? spacing / 2.0 : spacing;
  }
  return g;
}

// Rows = basis functions sqrt(beta) h_n(beta z) evaluated on the half grid.
Eigen::MatrixXd basis_samples(const FockBasis& basis, const Eigen::VectorXd& z) {
  Eigen::MatrixXd phi(basis.dim, z.size());
  const double beta = basis.beta();
  const double root = std::sqrt(beta);
  std::vector<double> buf(basis.dim);
  for (Eigen::Index j = 0; j < z.size(); ++j) {
    hermite_functions(beta * z[j], basis.dim, buf.data());
    for (int n = 0; n < basis.dim; ++n) phi(n, j) = root * buf[n];
  }
  return phi;
}

} // namespace

QuantumState frame_change(const QuantumState& psi, double new_omega) {
  validate_normalized(psi);
  if (!(new_omega > 0.0)) throw std::domain_error("frame_change: omega must be positive");
  FockBasis nb = psi.basis;
  nb.omega = new_omega;
  if (new_omega == psi.basis.omega) return psi;

  const double beta_old = psi.basis.beta();
  const double beta_new = nb.beta();
  const int dim = psi.basis.dim;
  const double reach = std::sqrt(2.0 * dim + 1.0) + 10.0;
  const double z_max = reach / std::min(beta_old, beta_new);
  const double kappa = std::sqrt(2.0 * dim + 1.0) * std::max(beta_old, beta_new);
  const double spacing = pi / (6.0 * kappa);

  const HalfGrid g = make_half_grid(z_max, spacing);
  const Eigen::MatrixXd phi_old = basis_samples(psi.basis, g.z);
  const Eigen::MatrixXd phi_new = basis_samples(nb, g.z);
  Eigen::MatrixXd overlap =
      2.0 * (phi_new * g.weights.asDiagonal() * phi_old.transpose());
  // Opposite-parity overlaps vanish identically (odd integrand).
  for (int m = 0; m < dim; ++m)
    for (int n = (m % 2 == 0) ? 1 : 0; n < dim; n += 2) overlap(m, n) = 0.0;

  const MatrixXcd overlap_c = overlap.cast<complexd>();
  QuantumState out;
  out.spin_dim = psi.spin_dim;
  out.basis = nb;
  out.amplitudes.resize(psi.amplitudes.size());
  for (int s = 0; s < psi.spin_dim; ++s)
    out.component(s) = overlap_c * psi.component(s);

  const double kept = out.amplitudes.squaredNorm();
  if (kept < 1.0 - 1e-6)
    throw TruncationError("frame_change: truncated basis keeps only a fraction " +
                          std::to_string(kept) + " of the norm; increase dim");
  return out;
}

QuantumState retune_ideal(const QuantumState& psi, double new_omega) {
  validate_normalized(psi);
  if (!(new_omega > 0.0)) throw std::domain_error("retune_ideal: omega must be positive");
  QuantumState out = psi;
  out.basis.omega = new_omega;
  return out;
}

double fidelity(const QuantumState& a, const QuantumState& b) {
  validate_normalized(a);
  validate_normalized(b);
  if (!same_basis(a.basis, b.basis) || a.spin_dim != b.spin_dim)
    throw std::invalid_argument("fidelity: states live in different spaces");
  return std::norm(a.amplitudes.dot(b.amplitudes));
}

double phonon_fidelity(const QuantumState& psi, const VectorXcd& fock_target) {
  validate_normalized(psi);
  if (fock_target.size() != psi.basis.dim)
    throw std::invalid_argument("phonon_fidelity: target size mismatch");
  double f = 0.0;
  for (int s = 0; s < psi.spin_dim; ++s) f += std::norm(fock_target.dot(psi.component(s)));
  return f;
}

namespace {

// <a> and <a^2> accumulated across spin components; everything else derives
// from them and <n>.
struct LadderMoments {
  complexd a{0, 0}, a2{0, 0};
  double n = 0.0;
};

LadderMoments moments(const QuantumState& psi) {
  LadderMoments m;
  const int dim = psi.basis.dim;
  for (int s = 0; s < psi.spin_dim; ++s) {
    auto c = psi.component(s);
    for (int k = 0; k < dim; ++k) {
      m.n += double(k) * std::norm(c[k]);
      if (k + 1 < dim) m.a += std::conj(c[k]) * std::sqrt(k + 1.0) * c[k + 1];
      if (k + 2 < dim)
        m.a2 += std::conj(c[k]) * std::sqrt((k + 1.0) * (k + 2.0)) * c[k + 2];
    }
  }
  return m;
}

} // namespace

double mean_position(const QuantumState& psi) {
  validate_normalized(psi);
  return psi.basis.width() * 2.0 * moments(psi).a.real();
}

double position_spread(const QuantumState& psi) {
  validate_normalized(psi);
  const LadderMoments m = moments(psi);
  const double w = psi.basis.width();
  const double z2 = w * w * (2.0 * m.a2.real() + 2.0 * m.n + 1.0);
  const double z = w * 2.0 * m.a.real();
  return std::sqrt(std::max(0.0, z2 - z * z));
}

double branch_position(const QuantumState& psi, int s) {
  validate_normalized(psi);
  if (s < 0 || s >= psi.spin_dim) throw std::invalid_argument("branch_position: bad spin");
  auto c = psi.component(s);
  const double pop = c.squaredNorm();
  if (pop < 1e-30) return 0.0;
  complexd a{0, 0};
  for (int k = 0; k + 1 < psi.basis.dim; ++k)
    a += std::conj(c[k]) * std::sqrt(k + 1.0) * c[k + 1];
  return psi.basis.width() * 2.0 * a.real() / pop;
}

double spin_population(const QuantumState& psi, int s) {
  validate_normalized(psi);
  if (s < 0 || s >= psi.spin_dim) throw std::invalid_argument("spin_population: bad spin");
  return psi.component(s).squaredNorm();
}

GridWavefunction to_grid(const QuantumState& psi, const GridSpec& grid) {
  validate_normalized(psi);
  validate(grid);

  const LadderMoments m = moments(psi);
  const double w = psi.basis.width();
  const double beta = psi.basis.beta();
  const double mean_z = w * 2.0 * m.a.real();
  const double var_z =
      w * w * (2.0 * m.a2.real() + 2.0 * m.n + 1.0) - mean_z * mean_z;
  const double sigma_z = std::sqrt(std::max(0.0, var_z));
  if (std::abs(mean_z) + 6.0 * sigma_z > grid.extent / 2.0)
    throw std::domain_error("to_grid: grid extent does not cover mean +- 6 sigma");

  const double mean_k = std::sqrt(2.0) * beta * m.a.imag();
  const double k2 = beta * beta / 2.0 * (2.0 * m.n + 1.0 - 2.0 * m.a2.real());
  const double sigma_k = std::sqrt(std::max(0.0, k2 - mean_k * mean_k));
  // 5-sigma momentum margin: the heavier 6-sigma rule rejects states whose
  // actual content beyond the grid Nyquist edge is ~1e-10 in amplitude; the
  // discrete-norm check below backstops slowly decaying tails.
  if ((std::abs(mean_k) + 5.0 * sigma_k) * grid.spacing() >= pi)
    throw std::domain_error("to_grid: grid spacing does not resolve the momentum content");

  GridWavefunction out;
  out.grid = grid;
  out.mass = psi.basis.mass;
  out.components.assign(psi.spin_dim, VectorXcd::Zero(grid.n_points));
  const double root = std::sqrt(beta);
  std::vector<double> buf(psi.basis.dim);
  for (int j = 0; j < grid.n_points; ++j) {
    hermite_functions(beta * grid.z(j), psi.basis.dim, buf.data());
    for (int s = 0; s < psi.spin_dim; ++s) {
      auto c = psi.component(s);
      complexd acc{0, 0};
      for (int n = 0; n < psi.basis.dim; ++n) acc += c[n] * buf[n];
      out.components[s][j] = root * acc;
    }
  }

  if (std::abs(out.discrete_norm_sq() - 1.0) > 1e-6)
    throw TruncationError("to_grid: sampled state loses norm (grid too small or coarse)");
  return out;
}

} // namespace levsim

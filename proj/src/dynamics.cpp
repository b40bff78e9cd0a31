#include "levsim/dynamics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "levsim/constants.hpp"
#include "levsim/errors.hpp"

namespace levsim {

using namespace constants;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

int spin_dimension(HamiltonianKind kind) {
  return kind == HamiltonianKind::SpinMech ? 3 : 2;
}

void validate(const HamiltonianSpec& spec) {
  validate(spec.basis);
  if (!std::isfinite(spec.lambda) || !std::isfinite(spec.omega_spin))
    throw std::domain_error("Hamiltonian coefficients must be finite");
  const double half = spec.basis.omega / 2.0;
  switch (spec.kind) {
    case HamiltonianKind::Effective:
      break;
    case HamiltonianKind::JC:
      if (spec.omega_spin != 0.0 && spec.omega_spin != half)
        throw std::domain_error("JC requires omega_spin = +omega/2 (or 0 for default)");
      break;
    case HamiltonianKind::AntiJC:
      if (spec.omega_spin != 0.0 && spec.omega_spin != -half)
        throw std::domain_error("AntiJC requires omega_spin = -omega/2 (or 0 for default)");
      break;
    case HamiltonianKind::SpinMech:
    case HamiltonianKind::QND:
      if (spec.omega_spin != 0.0)
        throw std::domain_error("this Hamiltonian kind carries no sigma_z term; "
                                "omega_spin must be 0");
      break;
  }
}

OperatorMatrix build_hamiltonian(const HamiltonianSpec& spec) {
  validate(spec);
  const int dim = spec.basis.dim;
  const int sd = spin_dimension(spec.kind);
  const double w = spec.basis.omega;

  MatrixXcd n = MatrixXcd::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = double(k);
  MatrixXcd a = MatrixXcd::Zero(dim, dim);
  for (int k = 1; k < dim; ++k) a(k - 1, k) = std::sqrt(double(k));
  const MatrixXcd adag = a.adjoint();
  const MatrixXcd x = a + adag;

  MatrixXcd spin_id = MatrixXcd::Identity(sd, sd);
  MatrixXcd h;
  switch (spec.kind) {
    case HamiltonianKind::Effective: {
      MatrixXcd sz(2, 2), sx(2, 2);
      sz << 1, 0, 0, -1;
      sx << 0, 1, 1, 0;
      h = w * spin_fock_kron(spin_id, n) +
          spec.omega_spin * spin_fock_kron(sz, MatrixXcd::Identity(dim, dim)) +
          spec.lambda * spin_fock_kron(sx, x);
      break;
    }
    case HamiltonianKind::SpinMech: {
      MatrixXcd s_z = MatrixXcd::Zero(3, 3);
      s_z(0, 0) = 1.0;
      s_z(2, 2) = -1.0;
      h = w * spin_fock_kron(spin_id, n) + spec.lambda * spin_fock_kron(s_z, x);
      break;
    }
    case HamiltonianKind::JC:
    case HamiltonianKind::AntiJC: {
      const double sign = spec.kind == HamiltonianKind::JC ? 1.0 : -1.0;
      MatrixXcd sz(2, 2), sp(2, 2);
      sz << 1, 0, 0, -1;
      sp << 0, 1, 0, 0; // |+><-|
      const MatrixXcd sm = sp.adjoint();
      const MatrixXcd& lower = spec.kind == HamiltonianKind::JC ? a : adag;
      const MatrixXcd& raise = spec.kind == HamiltonianKind::JC ? adag : a;
      h = w * spin_fock_kron(spin_id, n) +
          sign * (w / 2.0) * spin_fock_kron(sz, MatrixXcd::Identity(dim, dim)) +
          spec.lambda * (spin_fock_kron(sp, lower) + spin_fock_kron(sm, raise));
      break;
    }
    case HamiltonianKind::QND: {
      MatrixXcd sz(2, 2);
      sz << 1, 0, 0, -1;
      h = spec.lambda * spin_fock_kron(sz, n);
      break;
    }
  }
  return make_operator(std::move(h), spec.basis, sd, true, false);
}

Propagator::Propagator(const HamiltonianSpec& spec) : spec_(spec) {
  const OperatorMatrix op = build_hamiltonian(spec);
  h_ = op.entries;
  const int dim = spec.basis.dim;
  const int sd = spin_dimension(spec.kind);

  // Decompose per spin block when every off-diagonal spin block vanishes.
  bool block_diagonal = true;
  for (int r = 0; r < sd && block_diagonal; ++r)
    for (int c = 0; c < sd && block_diagonal; ++c)
      if (r != c && h_.block(r * dim, c * dim, dim, dim).cwiseAbs().maxCoeff() != 0.0)
        block_diagonal = false;

  const auto decompose = [this](Eigen::Index offset, Eigen::Index size) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h_.block(offset, offset, size, size));
    if (es.info() != Eigen::Success)
      throw NumericError("Propagator: eigendecomposition failed");
    blocks_.push_back(Block{es.eigenvectors(), es.eigenvalues(), offset});
  };
  if (block_diagonal)
    for (int s = 0; s < sd; ++s) decompose(static_cast<Eigen::Index>(s) * dim, dim);
  else
    decompose(0, static_cast<Eigen::Index>(sd) * dim);
}

QuantumState Propagator::evolve(const QuantumState& psi0, double t) const {
  validate_normalized(psi0);
  if (!same_basis(psi0.basis, spec_.basis) ||
      psi0.spin_dim != spin_dimension(spec_.kind))
    throw std::invalid_argument("Propagator: state does not match the Hamiltonian space");
  if (!std::isfinite(t)) throw std::domain_error("evolve: time must be finite");

  QuantumState out = psi0;
  for (const Block& b : blocks_) {
    const Eigen::Index size = b.values.size();
    VectorXcd modal = b.vectors.adjoint() * psi0.amplitudes.segment(b.offset, size);
    for (Eigen::Index k = 0; k < size; ++k)
      modal[k] *= std::exp(complexd(0.0, -b.values[k] * t));
    out.amplitudes.segment(b.offset, size) = b.vectors * modal;
  }
  return out;
}

double Propagator::energy(const QuantumState& psi) const {
  validate_normalized(psi);
  if (!same_basis(psi.basis, spec_.basis) || psi.spin_dim != spin_dimension(spec_.kind))
    throw std::invalid_argument("Propagator: state does not match the Hamiltonian space");
  return (psi.amplitudes.adjoint() * h_ * psi.amplitudes)(0, 0).real();
}

QuantumState evolve(const HamiltonianSpec& spec, const QuantumState& psi0, double t) {
  return Propagator(spec).evolve(psi0, t);
}

QuantumState magnus_propagate(const HamiltonianSpec& spec, const QuantumState& psi0,
                              double t, WarningSink* warnings) {
  validate(spec);
  if (spec.kind != HamiltonianKind::SpinMech)
    throw std::invalid_argument("magnus_propagate: closed form exists for SpinMech only");
  validate_normalized(psi0);
  if (!same_basis(psi0.basis, spec.basis) || psi0.spin_dim != 3)
    throw std::invalid_argument("magnus_propagate: state does not match the space");

  const double w = spec.basis.omega;
  const double g = spec.lambda / w;
  const double theta = spec.lambda * spec.lambda * (t / w - std::sin(w * t) / (w * w));
  const complexd loop = 1.0 - std::exp(complexd(0.0, w * t));

  QuantumState out = psi0;
  const double s_z[3] = {1.0, 0.0, -1.0};
  for (int s = 0; s < 3; ++s) {
    VectorXcd branch = psi0.component(s);
    if (branch.norm() == 0.0) continue;
    if (s_z[s] != 0.0) {
      const OperatorMatrix d = displacement(spec.basis, s_z[s] * g * loop, warnings);
      branch = d.entries * branch;
    }
    const complexd branch_phase =
        std::exp(complexd(0.0, s_z[s] * s_z[s] * theta));
    for (int n = 0; n < spec.basis.dim; ++n)
      branch[n] *= branch_phase * std::exp(complexd(0.0, -w * n * t));
    out.component(s) = branch;
  }
  return out;
}

QuantumState cat_state(const FockBasis& basis, double lambda, int n,
                       WarningSink* warnings) {
  validate(basis);
  if (n < 0 || n >= basis.dim) throw std::domain_error("cat_state: bad Fock level");
  if (!(lambda > 0.0)) throw std::domain_error("cat_state: coupling must be positive");
  const double g = lambda / basis.omega;

  const OperatorMatrix p = parity(basis);
  const OperatorMatrix d_plus = displacement(basis, 2.0 * g, warnings);
  const OperatorMatrix d_minus = displacement(basis, -2.0 * g, warnings);
  VectorXcd seed = VectorXcd::Zero(basis.dim);
  seed[n] = 1.0;

  QuantumState cat;
  cat.spin_dim = 3;
  cat.basis = basis;
  cat.amplitudes = VectorXcd::Zero(3 * basis.dim);
  cat.component(0) = p.entries * (d_plus.entries * seed) / std::sqrt(2.0);
  cat.component(2) = p.entries * (d_minus.entries * seed) / std::sqrt(2.0);
  cat.amplitudes /= cat.amplitudes.norm();
  return cat;
}

DisentangleResult disentangle(const QuantumState& psi, int sign,
                              const DisentangleOptions& options) {
  validate_normalized(psi);
  if (psi.spin_dim != 3)
    throw std::invalid_argument("disentangle: expects a triplet-spin state");
  if (sign != 1 && sign != -1)
    throw std::invalid_argument("disentangle: sign must be +1 or -1");
  if (psi.component(1).squaredNorm() > 1e-12)
    throw std::invalid_argument("disentangle: |0> spin component must be empty");

  DisentangleResult res;
  res.branch_separation = std::abs(branch_position(psi, 0) - branch_position(psi, 2));
  res.splitting =
      g_s * mu_B * options.gradient * res.branch_separation / hbar;

  const bool coincident =
      res.branch_separation < options.coincidence_tolerance * psi.basis.width();
  if (options.gradient > 0.0 && !coincident &&
      res.splitting < options.resolution_multiple * options.linewidth)
    throw std::domain_error(
        "disentangle: branches are not spectrally resolvable (splitting " +
        std::to_string(res.splitting) + " rad/s < " +
        std::to_string(options.resolution_multiple * options.linewidth) + " rad/s)");

  VectorXcd combined =
      psi.component(0) + (sign > 0 ? 1.0 : -1.0) * psi.component(2).eval();
  const double nn = combined.norm();
  if (nn < 1e-9)
    throw std::domain_error("disentangle: the requested branch combination has "
                            "vanishing weight");

  QuantumState out;
  out.spin_dim = 3;
  out.basis = psi.basis;
  out.amplitudes = VectorXcd::Zero(3 * psi.basis.dim);
  out.component(1) = combined / nn;
  res.state = std::move(out);
  return res;
}

} // namespace levsim

// Dynamics tests. The numerical propagator (spectral decomposition) is checked
// against independent closed forms: two-level Rabi flopping in the resonant
// sectors, the displaced-oscillator spectrum, and the exact interaction-frame
// propagator of the conditional-displacement Hamiltonian.
#include <cmath>
#include <complex>
#include <random>

#include "doctest.h"
#include "levsim/constants.hpp"
#include "levsim/dynamics.hpp"
#include "levsim/errors.hpp"

using namespace levsim;
using levsim::constants::pi;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

const double kOmega = 2.0 * pi * 20e3;
const double kMass = 4.948008429404e-20;

FockBasis basis(int dim, double omega = kOmega) { return FockBasis{dim, omega, kMass}; }

QuantumState random_triplet_state(const FockBasis& b, std::mt19937& rng, int nmax) {
  std::normal_distribution<double> gauss;
  QuantumState psi;
  psi.spin_dim = 3;
  psi.basis = b;
  psi.amplitudes = VectorXcd::Zero(3 * b.dim);
  for (int s = 0; s < 3; ++s)
    for (int n = 0; n <= nmax; ++n)
      psi.amplitudes[s * b.dim + n] = complexd(gauss(rng), gauss(rng));
  psi.amplitudes /= psi.amplitudes.norm();
  return psi;
}

} // namespace

TEST_CASE("spin dimensions and omega_spin rules per Hamiltonian kind") {
  CHECK(spin_dimension(HamiltonianKind::Effective) == 2);
  CHECK(spin_dimension(HamiltonianKind::SpinMech) == 3);
  CHECK(spin_dimension(HamiltonianKind::QND) == 2);

  const FockBasis b = basis(8);
  CHECK_THROWS_AS(validate(HamiltonianSpec{HamiltonianKind::JC, b, 1.0, kOmega / 3.0}),
                  std::domain_error);
  CHECK_NOTHROW(validate(HamiltonianSpec{HamiltonianKind::JC, b, 1.0, kOmega / 2.0}));
  CHECK_NOTHROW(validate(HamiltonianSpec{HamiltonianKind::JC, b, 1.0, 0.0}));
  CHECK_THROWS_AS(
      validate(HamiltonianSpec{HamiltonianKind::AntiJC, b, 1.0, kOmega / 2.0}),
      std::domain_error);
  CHECK_NOTHROW(validate(HamiltonianSpec{HamiltonianKind::AntiJC, b, 1.0, -kOmega / 2.0}));
  CHECK_THROWS_AS(validate(HamiltonianSpec{HamiltonianKind::SpinMech, b, 1.0, 1.0}),
                  std::domain_error);
  CHECK_THROWS_AS(validate(HamiltonianSpec{HamiltonianKind::QND, b, 1.0, 1.0}),
                  std::domain_error);
  CHECK_NOTHROW(validate(HamiltonianSpec{HamiltonianKind::Effective, b, 1.0, 12.34}));
}

TEST_CASE("Hamiltonian matrix elements land in the documented places") {
  const FockBasis b = basis(6);
  const double lam = 2.0 * pi * 5e3;

  const MatrixXcd full =
      build_hamiltonian({HamiltonianKind::Effective, b, lam, kOmega / 2.0}).entries;
  // <+,1| H |-,0> couples through the counter-rotating sigma_x (a + a^dag).
  CHECK(std::abs(full(0 * 6 + 1, 1 * 6 + 0) - lam) < 1e-9);
  // <+,0| H |-,1> is the co-rotating element.
  CHECK(std::abs(full(0 * 6 + 0, 1 * 6 + 1) - lam) < 1e-9);
  CHECK(std::abs(full(0 * 6 + 2, 0 * 6 + 2) - (2.0 * kOmega + kOmega / 2.0)) < 1e-9);

  const MatrixXcd jc = build_hamiltonian({HamiltonianKind::JC, b, lam, 0.0}).entries;
  // Co-rotating element survives, counter-rotating one is absent.
  CHECK(std::abs(jc(0 * 6 + 0, 1 * 6 + 1) - lam) < 1e-9);
  CHECK(std::abs(jc(0 * 6 + 1, 1 * 6 + 0)) == 0.0);
  CHECK(std::abs(jc(1 * 6 + 0, 1 * 6 + 0) - (-kOmega / 2.0)) < 1e-9);

  const MatrixXcd ajc = build_hamiltonian({HamiltonianKind::AntiJC, b, lam, 0.0}).entries;
  CHECK(std::abs(ajc(0 * 6 + 1, 1 * 6 + 0) - lam) < 1e-9);
  CHECK(std::abs(ajc(0 * 6 + 0, 1 * 6 + 1)) == 0.0);

  const MatrixXcd sm = build_hamiltonian({HamiltonianKind::SpinMech, b, lam, 0.0}).entries;
  CHECK(std::abs(sm(0 * 6 + 0, 0 * 6 + 1) - lam) < 1e-9);         // S_z = +1 branch
  CHECK(std::abs(sm(1 * 6 + 0, 1 * 6 + 1)) == 0.0);               // S_z = 0 branch
  CHECK(std::abs(sm(2 * 6 + 0, 2 * 6 + 1) - (-lam)) < 1e-9);      // S_z = -1 branch

  const MatrixXcd qnd = build_hamiltonian({HamiltonianKind::QND, b, 321.0, 0.0}).entries;
  CHECK(std::abs(qnd(0 * 6 + 3, 0 * 6 + 3) - 3.0 * 321.0) < 1e-12);
  CHECK(std::abs(qnd(1 * 6 + 3, 1 * 6 + 3) + 3.0 * 321.0) < 1e-12);
}

TEST_CASE("conditional displacement spectrum is the displaced-oscillator ladder") {
  // Exact eigenvalues of omega n + s lambda (a + a^dag): k omega - s^2 lambda^2/omega.
  const FockBasis b = basis(128);
  const double lam = 0.15 * kOmega;
  const MatrixXcd h = build_hamiltonian({HamiltonianKind::SpinMech, b, lam, 0.0}).entries;
  for (int s : {0, 2}) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h.block(s * 128, s * 128, 128, 128));
    const double shift = -lam * lam / kOmega;
    for (int k = 0; k < 5; ++k)
      CHECK(es.eigenvalues()[k] ==
            doctest::Approx(k * kOmega + shift).epsilon(1e-12));
  }
  Eigen::SelfAdjointEigenSolver<MatrixXcd> mid(h.block(128, 128, 128, 128));
  CHECK(std::abs(mid.eigenvalues()[0]) < 1e-9);
}

TEST_CASE("resonant sector Rabi flopping matches the two-level closed form") {
  const FockBasis b = basis(32);
  const double lam = 2.0 * pi * 50e3;
  const Propagator u({HamiltonianKind::JC, b, lam, 0.0});

  const QuantumState start = QuantumState::fock_state(b, 0, 2, 0); // |+, 0>
  for (double t : {0.3 / lam, 1.1 / lam, pi / (2.0 * lam)}) {
    const QuantumState psi = u.evolve(start, t);
    // e^{-i w t / 2} (cos(lam t) |+,0> - i sin(lam t) |-,1>)
    const complexd ph = std::exp(complexd(0.0, -kOmega * t / 2.0));
    CHECK(std::abs(psi.amplitudes[0] - ph * std::cos(lam * t)) < 1e-12);
    CHECK(std::abs(psi.amplitudes[32 + 1] - ph * complexd(0.0, -std::sin(lam * t))) <
          1e-12);
    CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-13));
  }
  // At t = pi/(2 lam) the transfer is complete.
  const QuantumState swapped = u.evolve(start, pi / (2.0 * lam));
  CHECK(spin_population(swapped, 1) == doctest::Approx(1.0).epsilon(1e-12));

  // |-, 0> is dark: only a phase e^{+i w t / 2}.
  const QuantumState dark = QuantumState::fock_state(b, 0, 2, 1);
  const QuantumState still = u.evolve(dark, 0.7 / lam);
  CHECK(std::abs(still.amplitudes[32] -
                 std::exp(complexd(0.0, kOmega * 0.7 / lam / 2.0))) < 1e-12);

  // Anti-resonant sector: |-, 0> <-> |+, 1>.
  const Propagator v({HamiltonianKind::AntiJC, b, lam, 0.0});
  const QuantumState flipped = v.evolve(dark, pi / (2.0 * lam));
  CHECK(spin_population(flipped, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(flipped.amplitudes[1] -
                 std::exp(complexd(0.0, -kOmega * pi / (2.0 * lam) / 2.0)) *
                     complexd(0.0, -1.0)) < 1e-12);
}

TEST_CASE("higher rungs flop faster by sqrt(n+1)") {
  const FockBasis b = basis(32);
  const double lam = 2.0 * pi * 50e3;
  const Propagator u({HamiltonianKind::JC, b, lam, 0.0});
  // |+, n> <-> |-, n+1> at Rabi rate lam sqrt(n+1).
  for (int n : {1, 3, 5}) {
    const QuantumState start = QuantumState::fock_state(b, n, 2, 0);
    const double tn = pi / (2.0 * lam * std::sqrt(n + 1.0));
    const QuantumState done = u.evolve(start, tn);
    CHECK(spin_population(done, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::norm(done.amplitudes[32 + n + 1]) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("exact interaction-frame propagator agrees with the numerical one") {
  const FockBasis b = basis(160);
  const double lam = 0.6 * kOmega; // strong coupling, displacement ~ 1.2
  const HamiltonianSpec spec{HamiltonianKind::SpinMech, b, lam, 0.0};
  const Propagator u(spec);

  std::mt19937 rng(20240817u);
  for (double t : {0.08 / kOmega, 1.9 / kOmega, pi / kOmega, 7.3 / kOmega}) {
    const QuantumState psi0 = random_triplet_state(b, rng, 6);
    const QuantumState numeric = u.evolve(psi0, t);
    const QuantumState analytic = magnus_propagate(spec, psi0, t);
    CHECK(fidelity(numeric, analytic) > 1.0 - 1e-10);
    // Componentwise too: the closed form fixes every phase, not just overlaps.
    CHECK((numeric.amplitudes - analytic.amplitudes).norm() < 1e-7);
  }
  CHECK_THROWS_AS(
      magnus_propagate({HamiltonianKind::JC, b, lam, 0.0},
                       QuantumState::fock_state(b, 0, 2, 0), 1.0 / kOmega),
      std::invalid_argument);
}

TEST_CASE("branch centers follow -s (D/4)(1 - cos wt) during the conditional sweep") {
  const FockBasis b = basis(224);
  const double lam = 2.0 * pi * 77.333153e3; // the 20 kHz trap working point
  const HamiltonianSpec spec{HamiltonianKind::SpinMech, b, lam, 0.0};
  const double d_m = 8.0 * lam * b.width() / kOmega;

  VectorXcd spin(3);
  spin << 1.0, 0.0, 1.0;
  VectorXcd vac = VectorXcd::Zero(b.dim);
  vac[0] = 1.0;
  const QuantumState psi0 = QuantumState::product(spin, vac, b);

  const Propagator u(spec);
  for (double frac : {0.25, 0.5, 1.0}) {
    const double t = frac * pi / kOmega;
    const QuantumState psi = u.evolve(psi0, t);
    const double expect = -(d_m / 4.0) * (1.0 - std::cos(kOmega * t));
    CHECK(branch_position(psi, 0) == doctest::Approx(expect).epsilon(1e-7));
    CHECK(branch_position(psi, 2) == doctest::Approx(-expect).epsilon(1e-7));
  }
  // Full period: branches recombine at the origin.
  const QuantumState loop = u.evolve(psi0, 2.0 * pi / kOmega);
  CHECK(std::abs(branch_position(loop, 0)) < 1e-15);
  CHECK(fidelity(loop, psi0) > 1.0 - 1e-9);
}

TEST_CASE("norm and energy are conserved over long evolutions") {
  const FockBasis b = basis(48);
  const HamiltonianSpec spec{HamiltonianKind::Effective, b, 0.3 * kOmega, 0.37 * kOmega};
  const Propagator u(spec);
  QuantumState psi;
  psi.spin_dim = 2;
  psi.basis = b;
  psi.amplitudes = VectorXcd::Zero(96);
  psi.amplitudes[0] = 0.6;
  psi.amplitudes[48 + 2] = complexd(0.0, 0.8);
  const double e0 = u.energy(psi);
  const QuantumState late = u.evolve(psi, 1000.0 * 2.0 * pi / kOmega);
  CHECK(std::abs(late.norm() - 1.0) < 1e-12);
  CHECK(u.energy(late) == doctest::Approx(e0).epsilon(1e-10));
}

TEST_CASE("evolution composes: U(t1+t2) = U(t2) U(t1)") {
  const FockBasis b = basis(40);
  const Propagator u({HamiltonianKind::Effective, b, 0.2 * kOmega, kOmega / 2.0});
  const QuantumState psi0 = QuantumState::fock_state(b, 0, 2, 0);
  const double t1 = 0.9 / kOmega, t2 = 2.3 / kOmega;
  const QuantumState two_steps = u.evolve(u.evolve(psi0, t1), t2);
  const QuantumState one_step = u.evolve(psi0, t1 + t2);
  CHECK((two_steps.amplitudes - one_step.amplitudes).norm() < 1e-12);
  // Backwards evolution inverts.
  const QuantumState back = u.evolve(one_step, -(t1 + t2));
  CHECK(fidelity(back, psi0) > 1.0 - 1e-13);
}

TEST_CASE("dispersive readout phases are exactly linear in the phonon number") {
  const FockBasis b = basis(24);
  const double chi = 2.0 * pi * 6.9e3;
  const Propagator u({HamiltonianKind::QND, b, chi, 0.0});
  const double t = 13.7e-6;
  for (int n : {0, 1, 2, 5, 9}) {
    QuantumState psi;
    psi.spin_dim = 2;
    psi.basis = b;
    psi.amplitudes = VectorXcd::Zero(48);
    psi.amplitudes[n] = 1.0 / std::sqrt(2.0);
    psi.amplitudes[24 + n] = 1.0 / std::sqrt(2.0);
    const QuantumState out = u.evolve(psi, t);
    // |+> branch advances by -chi n t, |-> branch by +chi n t.
    const complexd ratio = out.amplitudes[24 + n] / out.amplitudes[n];
    CHECK(std::abs(std::arg(ratio) - std::remainder(2.0 * chi * n * t, 2.0 * pi)) <
          1e-12);
  }
}

TEST_CASE("maximally separated two-branch state: geometry and dynamical origin") {
  const double lam = 2.0 * pi * 77.333153e3;
  const double g = lam / kOmega;
  const FockBasis b = basis(recommended_dim(2.0 * g) + 32);
  const double d_m = 8.0 * lam * b.width() / kOmega;

  WarningSink sink;
  const QuantumState cat = cat_state(b, lam, 0, &sink);
  CHECK(sink.empty());
  CHECK(cat.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spin_population(cat, 0) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(spin_population(cat, 1) < 1e-20);
  CHECK(branch_position(cat, 0) == doctest::Approx(-d_m / 2.0).epsilon(1e-9));
  CHECK(branch_position(cat, 2) == doctest::Approx(+d_m / 2.0).epsilon(1e-9));
  // Separation equals the quoted maximum.
  CHECK(std::abs(branch_position(cat, 2) - branch_position(cat, 0)) ==
        doctest::Approx(d_m).epsilon(1e-9));

  // The same state emerges dynamically after half a period.
  VectorXcd spin(3);
  spin << 1.0, 0.0, 1.0;
  VectorXcd seed = VectorXcd::Zero(b.dim);
  seed[0] = 1.0;
  const QuantumState psi0 = QuantumState::product(spin, seed, b);
  const HamiltonianSpec spec{HamiltonianKind::SpinMech, b, lam, 0.0};
  const QuantumState evolved = evolve(spec, psi0, pi / kOmega);
  CHECK(fidelity(evolved, cat) > 1.0 - 1e-8);

  // Also from an excited seed.
  const QuantumState cat1 = cat_state(b, lam, 1);
  VectorXcd seed1 = VectorXcd::Zero(b.dim);
  seed1[1] = 1.0;
  const QuantumState psi1 = QuantumState::product(spin, seed1, b);
  CHECK(fidelity(evolve(spec, psi1, pi / kOmega), cat1) > 1.0 - 1e-8);
}

TEST_CASE("disentangle merges branches with the requested sign") {
  const FockBasis b = basis(96);
  const double beta = 0.5;
  QuantumState psi;
  psi.spin_dim = 3;
  psi.basis = b;
  psi.amplitudes = VectorXcd::Zero(3 * 96);
  psi.component(0) = displacement(b, beta).entries.col(0) / std::sqrt(2.0);
  psi.component(2) = displacement(b, -beta).entries.col(0) / std::sqrt(2.0);

  const DisentangleResult plus = disentangle(psi, +1);
  CHECK(plus.branch_separation == doctest::Approx(4.0 * beta * b.width()).epsilon(1e-9));
  CHECK(spin_population(plus.state, 1) == doctest::Approx(1.0).epsilon(1e-12));
  // Even combination: only even Fock levels survive.
  CHECK(std::abs(plus.state.amplitudes[96 + 1]) < 1e-14);
  CHECK(std::abs(plus.state.amplitudes[96 + 0]) > 0.1);

  const DisentangleResult minus = disentangle(psi, -1);
  CHECK(std::abs(minus.state.amplitudes[96 + 0]) < 1e-14);
  CHECK(std::abs(minus.state.amplitudes[96 + 1]) > 0.1);
  // The two outputs are orthogonal (branch overlap is real here).
  CHECK(std::abs(minus.state.amplitudes.dot(plus.state.amplitudes)) < 1e-12);

  // Norms match 1 +- <u|v> with <u|v> = e^{-2 beta^2}.
  const double ov = std::exp(-2.0 * beta * beta);
  VectorXcd even = (displacement(b, beta).entries.col(0) +
                    displacement(b, -beta).entries.col(0)) /
                   std::sqrt(2.0);
  CHECK(even.norm() == doctest::Approx(std::sqrt(1.0 + ov)).epsilon(1e-10));
}

TEST_CASE("disentangle enforces spectral resolvability unless branches coincide") {
  const FockBasis b = basis(96);
  DisentangleOptions opt;
  opt.gradient = 3e4;

  // Wide separation: passes, and the splitting matches the frozen value.
  const double lam = 2.0 * pi * 77.333153e3;
  const FockBasis bc = basis(recommended_dim(2.0 * lam / kOmega) + 32);
  const QuantumState cat = cat_state(bc, lam, 0);
  const DisentangleResult res = disentangle(cat, +1, opt);
  CHECK(res.splitting == doctest::Approx(1.5030426336e7).epsilon(1e-6));
  CHECK(res.splitting / (2.0 * pi * 1e6) == doctest::Approx(2.392).epsilon(1e-3));

  // Narrow separation: unresolvable, must throw.
  QuantumState narrow;
  narrow.spin_dim = 3;
  narrow.basis = b;
  narrow.amplitudes = VectorXcd::Zero(3 * 96);
  narrow.component(0) = displacement(b, 0.005).entries.col(0) / std::sqrt(2.0);
  narrow.component(2) = displacement(b, -0.005).entries.col(0) / std::sqrt(2.0);
  CHECK_THROWS_AS(disentangle(narrow, +1, opt), std::domain_error);

  // Coincident branches: resolution check is bypassed; '+' works, '-' is empty.
  QuantumState merged;
  merged.spin_dim = 3;
  merged.basis = b;
  merged.amplitudes = VectorXcd::Zero(3 * 96);
  merged.amplitudes[0] = 1.0 / std::sqrt(2.0);
  merged.amplitudes[2 * 96] = 1.0 / std::sqrt(2.0);
  CHECK_NOTHROW(disentangle(merged, +1, opt));
  CHECK_THROWS_AS(disentangle(merged, -1, opt), std::domain_error);

  // Malformed inputs.
  CHECK_THROWS_AS(disentangle(QuantumState::fock_state(b, 0, 2, 0), +1),
                  std::invalid_argument);
  CHECK_THROWS_AS(disentangle(QuantumState::fock_state(b, 0, 3, 1), +1),
                  std::invalid_argument);
  CHECK_THROWS_AS(disentangle(cat, 2), std::invalid_argument);
}

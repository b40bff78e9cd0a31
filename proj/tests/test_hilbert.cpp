// Fock-space machinery tests. Expected values come from closed forms computed
// inline: Gaussian overlap between traps of different frequency, coherent-state
// wavefunctions and overlaps, and ladder-operator algebra.
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "doctest.h"
#include "levsim/constants.hpp"
#include "levsim/errors.hpp"
#include "levsim/hilbert.hpp"

using namespace levsim;
using levsim::constants::pi;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;

namespace {

FockBasis test_basis(int dim, double omega = 2.0 * pi * 20e3,
                     double mass = 4.9480084322e-20) {
  return FockBasis{dim, omega, mass};
}

// Coherent-state Fock amplitudes c_n = alpha^n e^{-|alpha|^2/2} / sqrt(n!),
// evaluated in log space so large alpha stays finite.
VectorXcd coherent_amplitudes(double alpha, int dim) {
  VectorXcd c(dim);
  for (int n = 0; n < dim; ++n) {
    const double log_mag = n * std::log(std::abs(alpha)) - 0.5 * std::lgamma(n + 1.0) -
                           0.5 * alpha * alpha;
    c[n] = std::exp(log_mag) * (alpha < 0 && n % 2 ? -1.0 : 1.0);
  }
  return c;
}

} // namespace

TEST_CASE("basis geometry: width and beta are consistent inverses") {
  const FockBasis b = test_basis(8);
  CHECK(b.width() == doctest::Approx(9.2087808e-11).epsilon(1e-6));
  CHECK(b.beta() * b.width() * std::sqrt(2.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fock_state and product construct normalized states") {
  const FockBasis b = test_basis(16);
  const QuantumState n3 = QuantumState::fock_state(b, 3);
  CHECK(n3.norm() == doctest::Approx(1.0));
  CHECK(std::abs(n3.amplitudes[3]) == doctest::Approx(1.0));

  VectorXcd spin(2);
  spin << 3.0, complexd(0.0, 4.0); // unnormalized on purpose
  VectorXcd fock = VectorXcd::Zero(16);
  fock[0] = 2.0;
  const QuantumState p = QuantumState::product(spin, fock, b);
  CHECK(p.norm() == doctest::Approx(1.0));
  CHECK(spin_population(p, 0) == doctest::Approx(9.0 / 25.0));
  CHECK(spin_population(p, 1) == doctest::Approx(16.0 / 25.0));

  CHECK_THROWS_AS(QuantumState::fock_state(b, 16), std::domain_error);
  CHECK_THROWS_AS(QuantumState::fock_state(b, -1), std::domain_error);
}

TEST_CASE("ladder operators satisfy a|n> = sqrt(n)|n-1> and the commutator") {
  const FockBasis b = test_basis(12);
  auto [a, adag] = ladder_ops(b);
  for (int n = 1; n < 12; ++n) {
    VectorXcd en = VectorXcd::Zero(12);
    en[n] = 1.0;
    const VectorXcd lowered = a.entries * en;
    CHECK(std::abs(lowered[n - 1] - std::sqrt(double(n))) < 1e-14);
    CHECK(lowered.norm() == doctest::Approx(std::sqrt(double(n))));
  }
  // [a, a^dag] = 1 away from the truncation edge.
  const MatrixXcd comm = a.entries * adag.entries - adag.entries * a.entries;
  for (int n = 0; n < 11; ++n) CHECK(std::abs(comm(n, n) - 1.0) < 1e-14);
  CHECK(std::abs(comm(11, 11) + 11.0) < 1e-12); // truncation artifact, by design
}

TEST_CASE("number and position operators have the textbook matrix elements") {
  const FockBasis b = test_basis(6);
  const OperatorMatrix n = number_op(b);
  CHECK(n.entries(4, 4) == complexd(4.0, 0.0));
  const OperatorMatrix z = position_op(b);
  CHECK(std::abs(z.entries(0, 1) - b.width()) < 1e-25);
  CHECK(std::abs(z.entries(3, 2) - b.width() * std::sqrt(3.0)) < 1e-25);
  const OperatorMatrix p = parity(b);
  CHECK(p.entries(2, 2) == complexd(1.0, 0.0));
  CHECK(p.entries(3, 3) == complexd(-1.0, 0.0));
}

TEST_CASE("make_operator rejects wrong flags and wrong shapes") {
  const FockBasis b = test_basis(4);
  MatrixXcd m = MatrixXcd::Zero(4, 4);
  m(0, 1) = 1.0; // not hermitian, not unitary
  CHECK_THROWS_AS(make_operator(m, b, 1, true, false), std::invalid_argument);
  CHECK_THROWS_AS(make_operator(m, b, 1, false, true), std::invalid_argument);
  CHECK_NOTHROW(make_operator(m, b, 1, false, false));
  CHECK_THROWS_AS(make_operator(MatrixXcd::Zero(3, 3), b, 1, false, false),
                  std::invalid_argument);
}

TEST_CASE("displacement reproduces the coherent state: overlap, center, spread") {
  const FockBasis b = test_basis(96);
  const double alpha = 2.5;
  const OperatorMatrix d = displacement(b, alpha);
  CHECK(d.unitary);

  QuantumState psi = QuantumState::fock_state(b, 0);
  psi.amplitudes = d.entries * psi.amplitudes;

  // <0|D(alpha)|0> = e^{-|alpha|^2/2}
  CHECK(std::abs(psi.amplitudes[0] - std::exp(-alpha * alpha / 2.0)) < 1e-12);
  // Fock distribution is Poissonian.
  const VectorXcd ref = coherent_amplitudes(alpha, 96);
  CHECK((psi.amplitudes - ref).norm() < 1e-10);
  // Center at 2 alpha w, spread exactly the zero-point width.
  CHECK(mean_position(psi) == doctest::Approx(2.0 * alpha * b.width()).epsilon(1e-10));
  CHECK(position_spread(psi) == doctest::Approx(b.width()).epsilon(1e-9));

  // D(-alpha) undoes it.
  const OperatorMatrix dinv = displacement(b, -alpha);
  const VectorXcd back = dinv.entries * psi.amplitudes;
  CHECK(std::abs(back[0] - 1.0) < 1e-10);
}

TEST_CASE("displacement warns exactly when the vacuum leaks past the basis") {
  const FockBasis small = test_basis(24);
  WarningSink sink;
  displacement(small, 3.5, &sink); // recommended dim would be ~101
  CHECK(sink.size() == 1);

  WarningSink clean;
  displacement(test_basis(recommended_dim(3.5)), 3.5, &clean);
  CHECK(clean.empty());

  CHECK(displacement_leakage(small, 3.5) > 1e-6);
  CHECK(displacement_leakage(test_basis(recommended_dim(3.5)), 3.5) < 1e-6);
  CHECK(displacement_leakage(small, 0.0) == 0.0);
}

TEST_CASE("recommended_dim formula and floor") {
  CHECK(recommended_dim(0.0) == 64);
  CHECK(recommended_dim(0.0, 3) == 64);
  // 4*(5 + 1)^2 + 20 = 164
  CHECK(recommended_dim(5.0) == 164);
  // 4*(3 + sqrt(5))^2 + 20 = ceil(109.66) + 20 = 130
  CHECK(recommended_dim(3.0, 4) == 130);
}

TEST_CASE("hermite functions: parity, orthonormality, coherent closed form") {
  // Parity h_n(-x) = (-1)^n h_n(x).
  std::vector<double> plus(40), minus(40);
  hermite_functions(1.7, 40, plus.data());
  hermite_functions(-1.7, 40, minus.data());
  for (int n = 0; n < 40; ++n)
    CHECK(std::abs(minus[n] - (n % 2 ? -plus[n] : plus[n])) < 1e-15);

  // h_0(0) = pi^{-1/4}, h_1(0) = 0.
  std::vector<double> at0(4);
  hermite_functions(0.0, 4, at0.data());
  CHECK(at0[0] == doctest::Approx(std::pow(pi, -0.25)).epsilon(1e-14));
  CHECK(at0[1] == 0.0);

  // Quadrature orthonormality for a moderate basis.
  const int nmax = 32;
  const double h = 0.02, xmax = 14.0;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(nmax, nmax);
  std::vector<double> buf(nmax);
  for (double x = -xmax; x <= xmax; x += h) {
    hermite_functions(x, nmax, buf.data());
    for (int i = 0; i < nmax; ++i)
      for (int j = i; j < nmax; ++j) gram(i, j) += buf[i] * buf[j] * h;
  }
  for (int i = 0; i < nmax; ++i)
    for (int j = i; j < nmax; ++j)
      CHECK(std::abs(gram(i, j) - (i == j ? 1.0 : 0.0)) < 1e-9);

  // Deep-underflow regime: sum_n c_n h_n(x) must rebuild the coherent-state
  // Gaussian pi^{-1/4} exp(-(x - sqrt(2) alpha)^2 / 2) even where the naive
  // recurrence seed e^{-x^2/2} underflows (x ~ 42 here).
  const double alpha = 30.0;
  const int dim = recommended_dim(alpha); // 3864
  const VectorXcd c = coherent_amplitudes(alpha, dim);
  std::vector<double> hv(dim);
  for (double x : {std::sqrt(2.0) * alpha, std::sqrt(2.0) * alpha - 1.3,
                   std::sqrt(2.0) * alpha + 2.1}) {
    hermite_functions(x, dim, hv.data());
    double sum = 0.0;
    for (int n = 0; n < dim; ++n) sum += c[n].real() * hv[n];
    const double expected =
        std::pow(pi, -0.25) * std::exp(-0.5 * std::pow(x - std::sqrt(2.0) * alpha, 2));
    CHECK(sum == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("frame_change matches the two-frequency Gaussian overlap closed form") {
  // |<0_new|0_old>|^2 = 2 sqrt(w1 w2) / (w1 + w2); at ratio 5 this is
  // 2 sqrt(5)/6 = 0.7453559924999299.
  const double w_old = 2.0 * pi * 100e3, w_new = 2.0 * pi * 20e3;
  const FockBasis b = test_basis(160, w_old);
  const QuantumState vac = QuantumState::fock_state(b, 0);
  const QuantumState moved = frame_change(vac, w_new);
  CHECK(moved.basis.omega == w_new);
  CHECK(std::norm(moved.amplitudes[0]) ==
        doctest::Approx(2.0 * std::sqrt(5.0) / 6.0).epsilon(1e-10));
  // Parity is conserved exactly: odd levels are identically zero.
  for (int n = 1; n < 160; n += 2) CHECK(std::abs(moved.amplitudes[n]) == 0.0);
  // Norm is preserved to truncation accuracy.
  CHECK(moved.norm() == doctest::Approx(1.0).epsilon(1e-7));
}

TEST_CASE("frame_change round trip restores the state") {
  const double w1 = 2.0 * pi * 100e3, w2 = 2.0 * pi * 20e3;
  const FockBasis b = test_basis(220, w1);
  // Two-component state with structure in both spin levels.
  VectorXcd spin(2);
  spin << 1.0, complexd(0.0, 1.0);
  VectorXcd fock = VectorXcd::Zero(220);
  fock[0] = 0.6;
  fock[1] = complexd(0.0, 0.64);
  fock[4] = 0.48;
  QuantumState psi = QuantumState::product(spin, fock, b);
  const QuantumState there = frame_change(psi, w2);
  const QuantumState back = frame_change(there, w1);
  CHECK(fidelity(psi, back) > 1.0 - 1e-8);
}

TEST_CASE("frame_change throws TruncationError when the basis cannot hold the state") {
  const FockBasis b = test_basis(8, 2.0 * pi * 500e3);
  const QuantumState vac = QuantumState::fock_state(b, 0);
  CHECK_THROWS_AS(frame_change(vac, 2.0 * pi * 20e3), TruncationError);
}

TEST_CASE("retune_ideal keeps amplitudes and rescales the length unit") {
  const FockBasis b = test_basis(32, 2.0 * pi * 100e3);
  QuantumState psi = QuantumState::fock_state(b, 2);
  const QuantumState re = retune_ideal(psi, 2.0 * pi * 20e3);
  CHECK(re.amplitudes == psi.amplitudes);
  CHECK(re.basis.omega == 2.0 * pi * 20e3);
  CHECK(re.basis.width() == doctest::Approx(b.width() * std::sqrt(5.0)).epsilon(1e-12));
}

TEST_CASE("fidelity and phonon_fidelity agree with hand-computed overlaps") {
  const FockBasis b = test_basis(8);
  const QuantumState s0 = QuantumState::fock_state(b, 0, 2, 0);
  const QuantumState s1 = QuantumState::fock_state(b, 1, 2, 0);
  CHECK(fidelity(s0, s0) == doctest::Approx(1.0));
  CHECK(fidelity(s0, s1) == 0.0);

  // |psi> = (|spin 0>|0> + |spin 1>|1>)/sqrt(2): reduced phonon fidelity with
  // |0> is 1/2, with (|0>+|1>)/sqrt(2) is also 1/2 (cross terms die with spin).
  QuantumState cat;
  cat.spin_dim = 2;
  cat.basis = b;
  cat.amplitudes = VectorXcd::Zero(16);
  cat.amplitudes[0] = 1.0 / std::sqrt(2.0);
  cat.amplitudes[8 + 1] = 1.0 / std::sqrt(2.0);
  VectorXcd t0 = VectorXcd::Zero(8);
  t0[0] = 1.0;
  CHECK(phonon_fidelity(cat, t0) == doctest::Approx(0.5));
  VectorXcd tplus = VectorXcd::Zero(8);
  tplus[0] = tplus[1] = 1.0 / std::sqrt(2.0);
  CHECK(phonon_fidelity(cat, tplus) == doctest::Approx(0.5));

  const QuantumState other = QuantumState::fock_state(test_basis(9), 0, 2, 0);
  CHECK_THROWS_AS(fidelity(s0, other), std::invalid_argument);
}

TEST_CASE("branch positions of a two-branch superposition sit at +-2 alpha w") {
  const FockBasis b = test_basis(96);
  const double alpha = 2.0;
  const VectorXcd right = displacement(b, alpha).entries.col(0);
  const VectorXcd left = displacement(b, -alpha).entries.col(0);
  QuantumState psi;
  psi.spin_dim = 3;
  psi.basis = b;
  psi.amplitudes = VectorXcd::Zero(3 * 96);
  psi.component(0) = right / std::sqrt(2.0);
  psi.component(2) = left / std::sqrt(2.0);
  CHECK(branch_position(psi, 0) == doctest::Approx(2 * alpha * b.width()).epsilon(1e-9));
  CHECK(branch_position(psi, 2) == doctest::Approx(-2 * alpha * b.width()).epsilon(1e-9));
  CHECK(branch_position(psi, 1) == 0.0); // empty branch
  // Full-state mean splits the difference.
  CHECK(std::abs(mean_position(psi)) < 1e-20);
  CHECK(spin_population(psi, 0) == doctest::Approx(0.5));
}

TEST_CASE("to_grid reproduces Fock-space overlaps and norms on the grid") {
  const FockBasis b = test_basis(64);
  const double alpha = 1.5;
  QuantumState psi = QuantumState::fock_state(b, 0);
  psi.amplitudes = displacement(b, alpha).entries * psi.amplitudes;

  GridSpec g{4096, 80.0 * b.width()};
  const GridWavefunction wf = to_grid(psi, g);
  CHECK(wf.discrete_norm_sq() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(wf.mass == b.mass);

  // Density integrates to 1 and is centered at 2 alpha w.
  const Eigen::VectorXd rho = wf.density();
  double total = 0.0, first = 0.0;
  for (int j = 0; j < g.n_points; ++j) {
    total += rho[j] * g.spacing();
    first += g.z(j) * rho[j] * g.spacing();
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(first == doctest::Approx(2 * alpha * b.width()).epsilon(1e-7));

  // Discrete overlap with a second state equals the Fock-space overlap.
  QuantumState psi2 = QuantumState::fock_state(b, 1);
  const GridWavefunction wf2 = to_grid(psi2, g);
  complexd ol = 0.0;
  for (int j = 0; j < g.n_points; ++j)
    ol += std::conj(wf2.components[0][j]) * wf.components[0][j] * g.spacing();
  const complexd expected = psi2.amplitudes.dot(psi.amplitudes);
  CHECK(std::abs(ol - expected) < 1e-5);
}

TEST_CASE("to_grid rejects grids that cannot hold the state") {
  const FockBasis b = test_basis(64);
  const QuantumState vac = QuantumState::fock_state(b, 0);
  // Extent too small for mean +- 6 sigma.
  CHECK_THROWS_AS(to_grid(vac, GridSpec{4096, 4.0 * b.width()}), std::domain_error);
  // Spacing too coarse for the momentum content.
  CHECK_THROWS_AS(to_grid(vac, GridSpec{16, 4000.0 * b.width()}), std::domain_error);
}

TEST_CASE("spin_fock_kron lays out blocks in spin-major order") {
  MatrixXcd spin(2, 2);
  spin << 1.0, 2.0, 3.0, 4.0;
  MatrixXcd fock(2, 2);
  fock << 0.0, 1.0, 1.0, 0.0;
  const MatrixXcd k = spin_fock_kron(spin, fock);
  CHECK(k.rows() == 4);
  CHECK(k(0, 1) == complexd(1.0, 0.0));  // block (0,0) = 1 * fock
  CHECK(k(0, 3) == complexd(2.0, 0.0));  // block (0,1) = 2 * fock
  CHECK(k(3, 0) == complexd(3.0, 0.0));  // block (1,0) = 3 * fock
  CHECK(k(2, 3) == complexd(4.0, 0.0));  // block (1,1) = 4 * fock
}

TEST_CASE("validate_normalized and basis validation catch malformed inputs") {
  FockBasis bad{1, 2.0 * pi * 20e3, 1e-20};
  CHECK_THROWS_AS(validate(bad), std::domain_error);
  FockBasis neg{8, -1.0, 1e-20};
  CHECK_THROWS_AS(validate(neg), std::domain_error);

  QuantumState unnorm = QuantumState::fock_state(test_basis(8), 0);
  unnorm.amplitudes *= 2.0;
  CHECK_THROWS_AS(validate_normalized(unnorm), std::domain_error);
}

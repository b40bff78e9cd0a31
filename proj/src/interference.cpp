#include "levsim/interference.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "levsim/constants.hpp"
#include "levsim/protocols.hpp"

namespace levsim {

using Eigen::VectorXcd;
using Eigen::VectorXd;
using complexd = std::complex<double>;
using constants::hbar;
using constants::pi;

namespace {

// Fraction of the total probability allowed beyond the declared support
// radius on each side (position and momentum alike).
constexpr double kSupportTail = 1e-10;
// The ballistically transported support must stay within this fraction of
// the grid half-extent.
constexpr double kSupportMargin = 0.98;

// Signed FFT wavenumber for bin j of an n-point grid with total extent L:
// k_j = 2 pi j~ / L with j~ = j for j < n/2 and j - n otherwise.
double fft_wavenumber(int j, int n, double extent) {
  const int jt = (j < n / 2) ? j : j - n;
  return 2.0 * pi * jt / extent;
}

void validate_input(const GridWavefunction& psi) {
  validate(psi.grid);
  if (!(psi.mass > 0.0) || !std::isfinite(psi.mass))
    throw std::domain_error("free_propagate: mass must be positive and finite");
  if (psi.components.empty())
    throw std::domain_error("free_propagate: state has no components");
  for (const auto& c : psi.components)
    if (c.size() != psi.grid.n_points)
      throw std::domain_error(
          "free_propagate: component length does not match the grid");
}

// Radius [m] outside which less than kSupportTail of the probability sits.
double position_support(const GridWavefunction& psi) {
  const int n = psi.grid.n_points;
  const VectorXd rho = psi.density();
  const double total = rho.sum();
  if (!(total > 0.0)) return 0.0;
  const double tail = kSupportTail * total;
  double acc = 0.0;
  int lo = 0;
  for (; lo < n - 1; ++lo) {
    acc += rho[lo];
    if (acc > tail) break;
  }
  acc = 0.0;
  int hi = n - 1;
  for (; hi > 0; --hi) {
    acc += rho[hi];
    if (acc > tail) break;
  }
  return std::max(std::abs(psi.grid.z(lo)), std::abs(psi.grid.z(hi)));
}

// Matching support radius in momentum space [1/m], from the transformed
// components.
double momentum_support(const std::vector<VectorXcd>& spectra, int n,
                        double extent) {
  VectorXd power = VectorXd::Zero(n);
  for (const auto& s : spectra) power += s.cwiseAbs2();
  const double total = power.sum();
  if (!(total > 0.0)) return 0.0;
  const double tail = kSupportTail * total;
  double acc = 0.0;
  // Walk |k| downward from the Nyquist bin; bins m and n-m share |k|.
  for (int m = n / 2; m >= 1; --m) {
    acc += power[m];
    if (m != n / 2) acc += power[n - m];
    if (acc > tail) return 2.0 * pi * m / extent;
  }
  return 0.0;
}

struct Extraction {
  double period_measured = 0.0;
  double visibility = 0.0;
};

// Shared fringe estimator: subtract a Gaussian-smoothed envelope (kernel
// width 5 predicted periods), locate the dominant peak of the residual's
// magnitude spectrum within one octave of the predicted spatial frequency,
// refine it parabolically, and read the visibility over the central
// +-1.5 measured periods.
Extraction extract_fringes(const VectorXd& density, const GridSpec& grid,
                           double period_predicted, WarningSink* warnings) {
  Extraction out;
  const int n = grid.n_points;
  const double extent = grid.extent;

  if (!(period_predicted > 0.0) || !std::isfinite(period_predicted)) {
    warn(warnings,
         "fringe extraction skipped: no finite predicted period "
         "(coincident branches or no flight)");
    return out;
  }

  Eigen::FFT<double> fft;
  VectorXcd dens_c = density.cast<complexd>();
  VectorXcd spec(n);
  fft.fwd(spec, dens_c);

  // The smoothed envelope is a spectral low-pass of the density, so the
  // residual's spectrum is the complementary high-pass, applied directly.
  const double sigma_s = 5.0 * period_predicted;
  VectorXd mag = VectorXd::Zero(n / 2 + 1);
  for (int j = 0; j <= n / 2; ++j) {
    const double k = 2.0 * pi * j / extent;
    const double highpass = 1.0 - std::exp(-0.5 * k * k * sigma_s * sigma_s);
    mag[j] = std::abs(spec[j]) * highpass;
  }

  const double k_pred = 2.0 * pi / period_predicted;
  const double dk = 2.0 * pi / extent;
  const int jlo = std::max(1, (int)std::ceil(0.5 * k_pred / dk));
  const int jhi = std::min(n / 2 - 1, (int)std::floor(2.0 * k_pred / dk));
  if (jhi < jlo) {
    warn(warnings,
         "fringe extraction skipped: predicted period is unresolvable on "
         "this grid");
  } else {
    int jpk = jlo;
    for (int j = jlo; j <= jhi; ++j)
      if (mag[j] > mag[jpk]) jpk = j;
    // Parabolic sub-bin refinement of the magnitude peak.
    double delta = 0.0;
    const double m0 = mag[jpk - 1], m1 = mag[jpk], m2 = mag[jpk + 1];
    const double denom = m0 - 2.0 * m1 + m2;
    if (denom < -1e-300) delta = 0.5 * (m0 - m2) / denom;
    delta = std::clamp(delta, -0.5, 0.5);
    out.period_measured = extent / (jpk + delta);
  }

  // Visibility over the central +-1.5 periods (measured when available).
  const double period =
      out.period_measured > 0.0 ? out.period_measured : period_predicted;
  const int c = grid.center_index();
  const int reach = (int)std::floor(1.5 * period / grid.spacing());
  const int a = std::max(0, c - reach);
  const int b = std::min(n - 1, c + reach);
  if (b > a) {
    double vmax = 0.0, vmin = std::numeric_limits<double>::infinity();
    for (int j = a; j <= b; ++j) {
      vmax = std::max(vmax, density[j]);
      vmin = std::min(vmin, density[j]);
    }
    vmin = std::max(vmin, 0.0);
    if (vmax > 0.0) out.visibility = (vmax - vmin) / (vmax + vmin);
  }
  return out;
}

// Far-field fringe period 2 pi hbar t / (m D) from the state's own branch
// separation estimate D = 2 E|z| (exact for symmetric, well-separated
// branches).
double far_field_period(const GridWavefunction& psi, double t,
                        WarningSink* warnings) {
  const VectorXd rho = psi.density();
  const double h = psi.grid.spacing();
  double mean_abs_z = 0.0;
  for (int j = 0; j < psi.grid.n_points; ++j)
    mean_abs_z += std::abs(psi.grid.z(j)) * rho[j];
  mean_abs_z *= h;
  const double separation = 2.0 * mean_abs_z;
  if (!(separation > 0.0)) {
    warn(warnings, "pattern: state has no branch separation; no fringes");
    return std::numeric_limits<double>::infinity();
  }
  return 2.0 * pi * hbar * t / (psi.mass * separation);
}

} // namespace

GridWavefunction free_propagate(const GridWavefunction& psi, double t) {
  validate_input(psi);
  if (!std::isfinite(t))
    throw std::domain_error("free_propagate: flight time must be finite");
  if (t == 0.0) return psi;

  const int n = psi.grid.n_points;
  const double extent = psi.grid.extent;

  Eigen::FFT<double> fft;
  std::vector<VectorXcd> spectra(psi.components.size());
  for (std::size_t s = 0; s < psi.components.size(); ++s) {
    VectorXcd in = psi.components[s];
    spectra[s].resize(n);
    fft.fwd(spectra[s], in);
  }

  const double z_supp = position_support(psi);
  const double k_supp = momentum_support(spectra, n, extent);
  const double reach = z_supp + hbar * k_supp * std::abs(t) / psi.mass;
  const double limit = kSupportMargin * 0.5 * extent;
  if (reach > limit) {
    std::ostringstream msg;
    msg << "free_propagate: flight leaves the grid (ballistic support "
        << reach << " m exceeds " << limit << " m); increase the grid extent";
    throw std::domain_error(msg.str());
  }

  const double phase_scale = hbar * t / (2.0 * psi.mass);
  VectorXcd multiplier(n);
  for (int j = 0; j < n; ++j) {
    const double k = fft_wavenumber(j, n, extent);
    multiplier[j] = std::exp(complexd(0.0, -phase_scale * k * k));
  }

  GridWavefunction out;
  out.grid = psi.grid;
  out.mass = psi.mass;
  out.components.resize(psi.components.size());
  for (std::size_t s = 0; s < psi.components.size(); ++s) {
    VectorXcd shifted = spectra[s].cwiseProduct(multiplier);
    out.components[s].resize(n);
    fft.inv(out.components[s], shifted);
  }
  return out;
}

FringeReport analytic_pattern_vacuum(double b, double t, double beta,
                                     double mass, const GridSpec& grid,
                                     WarningSink* warnings) {
  validate(grid);
  if (!(beta > 0.0) || !std::isfinite(beta))
    throw std::domain_error(
        "analytic_pattern_vacuum: beta must be positive and finite");
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw std::domain_error(
        "analytic_pattern_vacuum: mass must be positive and finite");
  if (!(b >= 0.0) || !std::isfinite(b))
    throw std::domain_error(
        "analytic_pattern_vacuum: branch offset must be nonnegative and finite");
  if (!(t > 0.0) || !std::isfinite(t))
    throw std::domain_error(
        "analytic_pattern_vacuum: flight time must be positive and finite");

  const double bt = beta * b;                          // b~
  const double tt = 0.5 * hbar * beta * beta * t / mass; // t~
  const double s2 = 1.0 + 4.0 * tt * tt;
  const double norm =
      beta / (2.0 * std::sqrt(pi * s2) * (1.0 + std::exp(-bt * bt)));

  FringeReport rep;
  rep.grid = grid;
  rep.density.resize(grid.n_points);
  for (int j = 0; j < grid.n_points; ++j) {
    const double zt = beta * grid.z(j); // z~
    const double left = std::exp(-(zt - bt) * (zt - bt) / s2);
    const double right = std::exp(-(zt + bt) * (zt + bt) / s2);
    const double cross = 2.0 * std::exp(-(zt * zt + bt * bt) / s2) *
                         std::cos(4.0 * bt * zt * tt / s2);
    rep.density[j] = norm * (left + right + cross);
  }

  rep.period_predicted =
      bt > 0.0 ? 2.0 * pi * s2 / (4.0 * bt * tt) / beta
               : std::numeric_limits<double>::infinity();
  const Extraction ex =
      extract_fringes(rep.density, grid, rep.period_predicted, warnings);
  rep.period_measured = ex.period_measured;
  rep.visibility = ex.visibility;
  return rep;
}

FringeReport pattern(const GridWavefunction& psi, double flight_time,
                     const PatternOptions& options) {
  validate_input(psi);
  if (!(flight_time > 0.0) || !std::isfinite(flight_time))
    throw std::domain_error("pattern: flight time must be positive and finite");
  if (std::abs(psi.discrete_norm_sq() - 1.0) > 1e-6)
    throw std::domain_error("pattern: state must be normalized");

  const double predicted =
      options.period_hint > 0.0
          ? options.period_hint
          : far_field_period(psi, flight_time, options.warnings);

  const GridWavefunction flown = free_propagate(psi, flight_time);

  FringeReport rep;
  rep.grid = psi.grid;
  rep.density = flown.density();
  rep.period_predicted = predicted;
  const Extraction ex =
      extract_fringes(rep.density, rep.grid, predicted, options.warnings);
  rep.period_measured = ex.period_measured;
  rep.visibility = ex.visibility;
  return rep;
}

FringeReport thermal_pattern(double nbar, const ExperimentParams& params,
                             double flight_time,
                             const ThermalOptions& options) {
  if (!(nbar >= 0.0) || !std::isfinite(nbar))
    throw std::domain_error(
        "thermal_pattern: occupation must be nonnegative and finite");
  if (!(flight_time > 0.0) || !std::isfinite(flight_time))
    throw std::domain_error(
        "thermal_pattern: flight time must be positive and finite");
  if (!(options.grid_extent > 0.0))
    throw std::domain_error(
        "thermal_pattern: grid extent must be explicit so both components "
        "share one grid");
  if (nbar > 0.2)
    warn(options.warnings,
         "thermal_pattern: two-term truncation of the thermal distribution "
         "is unreliable above occupation 0.2");

  const double w1 = nbar / ((1.0 + nbar) * (1.0 + nbar));

  CatOptions copt;
  copt.sign = options.sign;
  copt.dim = options.dim;
  copt.grid_points = options.grid_points;
  copt.grid_extent = options.grid_extent;
  copt.warnings = options.warnings;

  const ProtocolResult r0 = cat_pipeline(0, params, copt);
  const GridWavefunction f0 = free_propagate(*r0.grid, flight_time);

  FringeReport rep;
  rep.grid = f0.grid;
  rep.density = (1.0 - w1) * f0.density();
  if (w1 > 0.0) {
    const ProtocolResult r1 = cat_pipeline(1, params, copt);
    const GridWavefunction f1 = free_propagate(*r1.grid, flight_time);
    rep.density += w1 * f1.density();
  }

  // Exact finite-time prediction from the branch geometry of the scenario.
  const DerivedParams d = derive(params);
  const double bt = d.beta2 * d.d_m / 2.0;
  const double tt = 0.5 * hbar * d.beta2 * d.beta2 * flight_time / d.mass;
  rep.period_predicted =
      bt > 0.0 && tt > 0.0
          ? 2.0 * pi * (1.0 + 4.0 * tt * tt) / (4.0 * bt * tt) / d.beta2
          : std::numeric_limits<double>::infinity();

  const Extraction ex = extract_fringes(rep.density, rep.grid,
                                        rep.period_predicted, options.warnings);
  rep.period_measured = ex.period_measured;
  rep.visibility = ex.visibility;
  return rep;
}

} // namespace levsim

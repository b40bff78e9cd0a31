#include "levsim/units.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace levsim {

using namespace constants;

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw std::domain_error(std::string(name) + " must be positive and finite");
}

void require_nonnegative(double v, const char* name) {
  if (v < 0.0 || !std::isfinite(v))
    throw std::domain_error(std::string(name) + " must be non-negative and finite");
}

} // namespace

double mass_from_diameter(double diameter, double density) {
  require_positive(diameter, "diameter");
  require_positive(density, "density");
  return density * pi * diameter * diameter * diameter / 6.0;
}

double zero_point_width(double mass, double omega) {
  require_positive(mass, "mass");
  require_positive(omega, "omega");
  return std::sqrt(hbar / (2.0 * mass * omega));
}

double coupling_lambda(double gradient, double mass, double omega) {
  require_nonnegative(gradient, "gradient");
  return g_s * mu_B * gradient * zero_point_width(mass, omega) / hbar;
}

double max_separation(double gradient, double mass, double omega) {
  require_nonnegative(gradient, "gradient");
  require_positive(mass, "mass");
  require_positive(omega, "omega");
  return 4.0 * g_s * mu_B * gradient / (mass * omega * omega);
}

double qnd_chi(double omega_spin, double lambda, double omega_m) {
  require_nonnegative(lambda, "lambda");
  require_positive(omega_m, "omega_m");
  if (lambda == 0.0) return 0.0; // no coupling, no dispersive shift
  const double denom = 4.0 * omega_spin * omega_spin - omega_m * omega_m;
  // 2|Omega| = omega_m makes the dispersive expansion singular; refuse rather
  // than return a huge meaningless rate. The guard band is relative.
  if (std::abs(denom) < 1e-9 * omega_m * omega_m)
    throw std::domain_error("qnd_chi: 2|Omega| too close to omega_m (dispersive singularity)");
  return 4.0 * omega_spin * lambda * lambda / denom;
}

double effective_rabi(double omega_nv, double delta, WarningSink* warnings) {
  require_positive(std::abs(omega_nv), "omega_nv");
  if (delta == 0.0)
    throw std::domain_error("effective_rabi: zero detuning");
  if (std::abs(delta) < 4.0 * std::abs(omega_nv))
    warn(warnings, "effective_rabi: detuning is not large compared to the drive; "
                   "second-order expansion is marginal");
  return omega_nv * omega_nv / (4.0 * delta);
}

double spin_splitting(double gradient, double d_m) {
  require_nonnegative(gradient, "gradient");
  require_nonnegative(d_m, "spin_splitting separation");
  return g_s * mu_B * gradient * d_m / hbar;
}

double fringe_period(double time, double mass, double d_m) {
  require_positive(time, "time");
  require_positive(mass, "mass");
  require_positive(d_m, "d_m");
  return 2.0 * pi * hbar * time / (mass * d_m);
}

double fringe_period_dimensionless(double b, double t) {
  require_positive(b, "b");
  require_positive(t, "t");
  return 2.0 * pi * (1.0 + 4.0 * t * t) / (4.0 * b * t);
}

DerivedParams derive(const ExperimentParams& p) {
  validate(p);
  DerivedParams d;
  d.mass = mass_from_diameter(p.diameter, p.density);
  d.a0 = zero_point_width(d.mass, p.omega_m0);
  d.a1 = zero_point_width(d.mass, p.omega_m1);
  d.a2 = zero_point_width(d.mass, p.omega_m2);
  d.lambda0 = coupling_lambda(p.gradient, d.mass, p.omega_m0);
  d.lambda2 = coupling_lambda(p.gradient, d.mass, p.omega_m2);
  d.omega_qnd = p.omega_m0 / 2.0 + 5.0 * d.lambda0;
  d.chi = qnd_chi(d.omega_qnd, d.lambda0, p.omega_m0);
  d.d_m = max_separation(p.gradient, d.mass, p.omega_m2);
  d.splitting = spin_splitting(p.gradient, d.d_m);
  // No separation means no fringes: the period diverges rather than vanishes.
  d.fringe_period = d.d_m > 0.0
                        ? fringe_period(p.flight_time, d.mass, d.d_m)
                        : std::numeric_limits<double>::infinity();
  d.beta2 = std::sqrt(d.mass * p.omega_m2 / hbar);
  return d;
}

void validate(const ExperimentParams& p) {
  require_positive(p.diameter, "diameter");
  require_positive(p.density, "density");
  require_positive(p.omega_m0, "omega_m0");
  require_positive(p.omega_m1, "omega_m1");
  require_positive(p.omega_m2, "omega_m2");
  require_nonnegative(p.gradient, "gradient");
  require_positive(p.pressure, "pressure");
  require_positive(p.gas_temperature, "gas_temperature");
  require_positive(p.internal_temperature, "internal_temperature");
  require_positive(p.gas_mass, "gas_mass");
  require_positive(p.flight_time, "flight_time");
  require_positive(p.spin_T2, "spin_T2");
  if (p.interference_width < 0.0)
    throw std::domain_error("interference_width must be non-negative");
  if (p.im_eps <= 0.0)
    throw std::domain_error("im_eps must be positive");
}

} // namespace levsim

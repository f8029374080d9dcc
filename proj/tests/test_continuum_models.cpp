#include <cmath>
#include <numbers>

#include <doctest.h>

#include "mintime/continuum_models.hpp"
#include "mintime/errors.hpp"

using namespace mintime;

namespace {

constexpr double kPi = std::numbers::pi;

// Golden-section maximization on [a, b].
template <typename F>
double argmax(F&& f, double a, double b) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 300; ++it) {
    const double c1 = b - r * (b - a), c2 = a + r * (b - a);
    if (f(c1) > f(c2)) b = c2; else a = c1;
  }
  return 0.5 * (a + b);
}

// Undeformed Gaussian packet in position space:
// |psi(x, t)|^2 = exp(-(x - p0 t / m)^2 / (2 s^2)) / sqrt(2 pi s^2),
// s^2 = sx^2 + (dp t / m)^2, sx = hbar / (2 dp).
double free_gaussian_density(double x, double t, double p0, double dp, double m, double hbar) {
  const double sx = hbar / (2.0 * dp);
  const double s2 = sx * sx + std::pow(dp * t / m, 2);
  return std::exp(-std::pow(x - p0 * t / m, 2) / (2.0 * s2)) / std::sqrt(2.0 * kPi * s2);
}

#include "golden_oscillator.inc"

}  // namespace

TEST_CASE("Planck units and the v_max figures") {
  using namespace constants;
  CHECK(planck_mass() * planck_time() == doctest::Approx(hbar / (c * c)).epsilon(1e-15));
  CHECK(planck_mass() == doctest::Approx(2.176434e-8).epsilon(1e-6));
  CHECK(planck_time() == doctest::Approx(5.391247e-44).epsilon(1e-6));

  // SI units: kappa = t_P^2.
  const ClockParams planck(planck_time() * planck_time(), 0.0, hbar);
  const double ratio = v_max(planck_mass(), planck) / c;
  CHECK(std::abs(ratio / std::sqrt(3.0 * std::sqrt(3.0) / 8.0) - 1.0) < 1e-12);

  const double proton = v_max(proton_mass, planck);
  CHECK(proton == doctest::Approx(8.72e17).epsilon(5e-3));

  const double heavy = v_max(150.0 * std::sqrt(3.0) * planck_mass(), planck) / c;
  CHECK(std::abs(heavy / 0.05 - 1.0) < 1e-3);
}

TEST_CASE("dispersion and velocity") {
  const Deformation flat(0.0), def(0.1);
  CHECK(dispersion(3.0, 2.0, flat) == doctest::Approx(2.25));
  CHECK(velocity(3.0, 2.0, flat) == doctest::Approx(1.5));
  // dE/dp by central differences.
  for (double p : {-4.0, 0.3, 1.7, 6.0}) {
    const double h = 1e-5;
    const double fd = (dispersion(p + h, 2.0, def) - dispersion(p - h, 2.0, def)) / (2.0 * h);
    CHECK(velocity(p, 2.0, def) == doctest::Approx(fd).epsilon(1e-8));
  }
  // The energy saturates below hbar pi / (2 sqrt k).
  CHECK(dispersion(1e8, 2.0, def) < kPi / (2.0 * std::sqrt(0.1)));
}

TEST_CASE("v_max is the maximum of the group velocity") {
  for (double kappa : {0.01, 0.1, 2.0}) {
    for (double m : {0.5, 2.0}) {
      const Deformation def(kappa, 1.3);
      auto v = [&](double p) { return velocity(p, m, def); };
      const double p_star = argmax(v, 0.0, 100.0);
      CHECK(v(p_star) == doctest::Approx(v_max(m, ClockParams(kappa, 0.0, 1.3))).epsilon(1e-12));
      // Maximizer p^4 = 4 m^2 hbar^2 / (3 k).
      CHECK(std::pow(p_star, 4) == doctest::Approx(4.0 * m * m * 1.69 / (3.0 * kappa)).epsilon(1e-6));
    }
  }
}

TEST_CASE("gaussian_packet: normalization, moments, gates") {
  const auto g = gaussian_packet(3.0, 1.0 / std::sqrt(2.0), 2.0);
  CHECK(g.norm_sq() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(momentum_expectation(g) == doctest::Approx(3.0).epsilon(1e-12));
  const auto pm = position_moments(g);
  CHECK(std::abs(pm.mean_x) < 1e-12);
  CHECK(pm.delta_x == doctest::Approx(1.0 / (2.0 / std::sqrt(2.0))).epsilon(1e-9));

  // A grid that truncates the packet fails the decay gate.
  CHECK_THROWS_AS(gaussian_packet(3.0, 1.0, 1.0, 1.0, {512, 3.0}), NumericalError);
  // Unnormalized values are rejected.
  CHECK_THROWS_AS(MomentumWavepacket(g.p_grid(), g.f_values() * 2.0, 2.0), NumericalError);
}

TEST_CASE("free evolution at kappa = 0 reproduces the textbook Gaussian") {
  const double p0 = 3.0, dp = 1.0 / std::sqrt(2.0), m = 1.0;
  const auto g = gaussian_packet(p0, dp, m);
  const Deformation flat(0.0);
  Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(81, -6.0, 14.0);
  for (double t : {0.0, 1.0, 3.0}) {
    const auto psi = position_wavefunction(evolve_free(g, flat, t), x);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      CHECK(std::abs(std::norm(psi[i]) - free_gaussian_density(x[i], t, p0, dp, m, 1.0)) < 1e-10);
    }
  }
  // Moments use finite differences in p, whose error grows like t^4 with the
  // evolution phase; at m = 1 it is about 1e-8 at t = 2.
  for (double t : {0.0, 1.0, 2.0}) {
    const auto mom = position_moments(g, flat, t);
    CHECK(std::abs(mom.mean_x - p0 * t / m) < 2e-8);
    const double sx = 1.0 / (2.0 * dp);
    CHECK(std::abs(mom.delta_x - std::sqrt(sx * sx + std::pow(dp * t / m, 2))) < 2e-8);
  }
  // Aliasing gate: x too far for the momentum spacing.
  Eigen::ArrayXd far(1);
  far[0] = 1e6;
  CHECK_THROWS_AS(position_wavefunction(g, far), PreconditionError);
}

TEST_CASE("deformed free evolution: conservation, linear drift, spreading law") {
  const Deformation def(0.1);
  const auto g = gaussian_packet(3.0, 1.0 / std::sqrt(2.0), 2.0);
  const auto c = spreading_coefficients(g, def);
  for (double t : {0.5, 2.0, 4.5}) {
    const auto e = evolve_free(g, def, t);
    CHECK(e.phase_time() == t);
    CHECK(e.norm_sq() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(momentum_expectation(e) == doctest::Approx(momentum_expectation(g)).epsilon(1e-12));
    CHECK(velocity_expectation(e, def) == doctest::Approx(c.mean_v).epsilon(1e-12));
    const auto mom = position_moments(g, def, t);
    CHECK(std::abs(mom.mean_x - (c.mean_x + c.mean_v * t)) < 1e-7);
    CHECK(std::abs(mom.delta_x - spreading_closed_form(c, t)) < 1e-6);
  }
  // Real f: <vx + xv> vanishes, so the spread law is symmetric in tau.
  CHECK(std::abs(c.anticommutator) < 1e-10);
  CHECK(spreading_closed_form(c, 2.0) == doctest::Approx(spreading_closed_form(c, -2.0)));
  // Deformed packets spread more slowly.
  const auto c0 = spreading_coefficients(g, Deformation(0.0));
  CHECK(c.delta_v < c0.delta_v);
  CHECK(spreading_closed_form(c, 4.0) < spreading_closed_form(c0, 4.0));
}

TEST_CASE("mean velocity decreases with kappa") {
  const auto g = gaussian_packet(4.0, 0.5, 1.0);
  double prev = velocity_expectation(g, Deformation(0.0));
  for (double kappa : {1e-4, 1e-3, 1e-2, 0.1, 1.0}) {
    const double v = velocity_expectation(g, Deformation(kappa));
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("coherent state coefficients and the Poisson tail") {
  const OscillatorParams params{1.0, 2.0 * kPi / 3.0, 1.0};
  const auto alpha = coherent_alpha(1.0, 0.0, params);
  CHECK(alpha.real() == doctest::Approx(std::sqrt(params.omega / 2.0)));
  CHECK(coherent_alpha(0.0, 1.0, params).imag() == doctest::Approx(1.0 / std::sqrt(2.0 * params.omega)));

  const auto fock = coherent_coefficients(alpha, params, 40);
  CHECK(fock.norm_sq() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fock.mean_number() == doctest::Approx(std::norm(alpha)).epsilon(1e-12));
  // Direct product form a^n / sqrt(n!) for small n.
  std::complex<double> direct = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n <= 10; ++n) {
    CHECK(std::abs(fock.coefficients()[n] - direct) < 1e-15);
    direct *= alpha / std::sqrt(double(n + 1));
  }

  // Poisson tail against 1 - sum of the first n_max + 1 terms.
  const std::complex<double> big{3.0, 1.0};
  for (int n_max : {5, 10, 20}) {
    double head = 0.0, term = std::exp(-std::norm(big));
    for (int n = 0; n <= n_max; ++n) {
      head += term;
      term *= std::norm(big) / (n + 1);
    }
    CHECK(coherent_tail(big, n_max) == doctest::Approx(1.0 - head).epsilon(1e-10));
  }
  CHECK_THROWS_AS(coherent_coefficients(big, params, 10), NumericalError);
}

TEST_CASE("Hermite functions: ground state, orthonormality") {
  const OscillatorParams params{1.3, 0.7, 1.0};
  const double a = params.mass * params.omega / params.hbar;
  const auto h0 = hermite_functions(0.4, 3, params);
  CHECK(h0[0] == doctest::Approx(std::pow(a / kPi, 0.25) * std::exp(-0.5 * a * 0.16)));
  CHECK(h0[1] == doctest::Approx(std::sqrt(2.0 * a) * 0.4 * h0[0]));

  const int n = 12;
  const Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(4001, -15.0, 15.0);
  const double dx = x[1] - x[0];
  Eigen::MatrixXd table(x.size(), n + 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) table.row(i) = hermite_functions(x[i], n, params).transpose();
  const Eigen::MatrixXd gram = table.transpose() * table * dx;
  CHECK((gram - Eigen::MatrixXd::Identity(n + 1, n + 1)).cwiseAbs().maxCoeff() < 1e-10);
  // Stays finite far out in the tail.
  CHECK(hermite_functions(60.0, 200, params).allFinite());
}

TEST_CASE("oscillator evolution: revival, populations, coherent fit") {
  const OscillatorParams params{1.0, 2.0 * kPi / 3.0, 1.0};
  const auto fock = coherent_coefficients(1.0, 0.0, params, 40);
  const auto back = oscillator_evolve(fock, Deformation(0.0), 2.0 * kPi / params.omega);
  CHECK(fock_fidelity(fock, back) >= 1.0 - 1e-10);

  const Deformation def(0.01);
  for (double t : {1.0, 2.0, 3.0}) {
    const auto e = oscillator_evolve(fock, def, t);
    CHECK((e.coefficients().cwiseAbs() - fock.coefficients().cwiseAbs()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(best_coherent_overlap(e, coherent_alpha(1.0, 0.0, params) * std::polar(1.0, -params.omega * t)).fidelity <
          1.0 - 1e-6);
  }
  // Undeformed evolution stays coherent, beta = alpha e^{-i w t}.
  const auto e0 = oscillator_evolve(fock, Deformation(0.0), 1.0);
  const auto alpha_t = coherent_alpha(1.0, 0.0, params) * std::polar(1.0, -params.omega);
  const auto fit = best_coherent_overlap(e0, alpha_t * 1.05);
  CHECK(fit.fidelity > 1.0 - 1e-12);
  CHECK(std::abs(fit.beta - alpha_t) < 1e-6);
}

TEST_CASE("oscillator position density") {
  const OscillatorParams params{1.0, 2.0 * kPi / 3.0, 1.0};
  const auto fock = coherent_coefficients(1.0, 0.0, params, 40);
  const Eigen::ArrayXd x = Eigen::ArrayXd::LinSpaced(401, -4.0, 4.0);
  const auto d = oscillator_position_density(fock, x);
  const double a = params.mass * params.omega / params.hbar;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    CHECK(std::abs(d.density[i] - std::sqrt(a / kPi) * std::exp(-a * (x[i] - 1.0) * (x[i] - 1.0))) < 1e-12);
  }
  const auto e = oscillator_evolve(fock, Deformation(0.01), 3.0);
  const auto de = oscillator_position_density(e, x);
  CHECK(de.density.minCoeff() >= 0.0);
  const double dx = x[1] - x[0];
  CHECK(de.density.sum() * dx <= 1.0 + 1e-9);

  // Frozen regression values for the deformed density.
  const auto golden = oscillator_position_density(e, Eigen::Map<const Eigen::ArrayXd>(kGoldenX, kGoldenCount));
  for (int i = 0; i < kGoldenCount; ++i) CHECK(golden.density[i] == doctest::Approx(kGoldenDensity[i]).epsilon(1e-12));
}

#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "mintime/operator_calculus.hpp"
#include "test_util.hpp"

using namespace mintime;
using mintime::test::max_entry;
using mintime::test::random_hermitian;

namespace {

Eigen::MatrixXcd sigma_z() {
  Eigen::MatrixXcd z = Eigen::MatrixXcd::Zero(2, 2);
  z(0, 0) = 1.0;
  z(1, 1) = -1.0;
  return z;
}

}  // namespace

TEST_CASE("HermitianOperator rejects non-Hermitian and empty input") {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(HermitianOperatord{m}, PreconditionError);
  CHECK_THROWS_AS(HermitianOperatord{Eigen::MatrixXcd(0, 0)}, PreconditionError);
  CHECK_THROWS_AS(HermitianOperatord{Eigen::MatrixXcd::Zero(2, 3)}, PreconditionError);

  // A defect below the relative gate is accepted and reported.
  Eigen::MatrixXcd n = sigma_z();
  n(0, 1) = 1e-14;
  HermitianOperatord h(n);
  CHECK(h.hermiticity_defect() == doctest::Approx(1e-14));
}

TEST_CASE("diagonalize: identity, sigma_z and random reconstruction") {
  const auto id = diagonalize(HermitianOperatord(Eigen::MatrixXcd::Identity(2, 2)));
  CHECK(id.eigenvalues[0] == 1.0);
  CHECK(id.eigenvalues[1] == 1.0);
  CHECK(max_entry(id.eigenvectors.adjoint() * id.eigenvectors - Eigen::MatrixXcd::Identity(2, 2)) < 1e-14);

  const auto z = diagonalize(HermitianOperatord(sigma_z()));
  CHECK(z.eigenvalues[0] == -1.0);
  CHECK(z.eigenvalues[1] == 1.0);
  // Eigenvectors are the standard basis up to phase, ordered ascending.
  CHECK(std::abs(z.eigenvectors(1, 0)) == doctest::Approx(1.0));
  CHECK(std::abs(z.eigenvectors(0, 1)) == doctest::Approx(1.0));

  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const HermitianOperatord h(random_hermitian(5, rng, 3.0));
    const auto dec = diagonalize(h);
    CHECK(max_entry(dec.reconstruct(dec.eigenvalues) - h.matrix()) < 1e-10 * (1.0 + dec.spectral_radius()));
    CHECK(dec.orthonormality_residual < 1e-12);
    for (Eigen::Index i = 1; i < dec.eigenvalues.size(); ++i) CHECK(dec.eigenvalues[i - 1] <= dec.eigenvalues[i]);
  }
}

TEST_CASE("apply_spectral_function: identity, arctan on sigma_z, Taylor oracle") {
  std::mt19937_64 rng(3);
  const HermitianOperatord h(random_hermitian(4, rng, 2.0));
  CHECK(max_entry(apply_spectral_function(h, [](double x) { return x; }).matrix() - h.matrix()) < 1e-12);

  // arctan(a sigma_z) = arctan(a) sigma_z since sigma_z^2 = I.
  for (double a : {0.3, 1.0, 7.5}) {
    const auto f = apply_spectral_function(HermitianOperatord(a * sigma_z()), [](double x) { return std::atan(x); });
    CHECK(max_entry(f.matrix() - std::atan(a) * sigma_z()) < 1e-15);
  }

  // Small spectral radius: x - x^3/3 + x^5/5 - x^7/7.
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXcd m = random_hermitian(3, rng, 0.1);
    const Eigen::MatrixXcd m2 = m * m;
    const Eigen::MatrixXcd m3 = m2 * m;
    const Eigen::MatrixXcd m5 = m3 * m2;
    const Eigen::MatrixXcd m7 = m5 * m2;
    const Eigen::MatrixXcd series = m - m3 / 3.0 + m5 / 5.0 - m7 / 7.0;
    const auto f = apply_spectral_function(HermitianOperatord(m), [](double x) { return std::atan(x); });
    CHECK(max_entry(f.matrix() - series) < 1e-10);
  }
}

TEST_CASE("apply_spectral_function: non-finite value names the eigenvalue") {
  const HermitianOperatord h(Eigen::MatrixXcd(Eigen::Vector2cd(0.0, 2.0).asDiagonal()));
  try {
    apply_spectral_function(h, [](double x) { return 1.0 / x; });
    FAIL("expected a domain error");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("eigenvalue 0") != std::string::npos);
  }
}

TEST_CASE("apply_spectral_function: result commutes with the input") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const HermitianOperatord h(random_hermitian(6, rng, 4.0));
    const auto f = apply_spectral_function(h, [](double x) { return std::tanh(x); });
    CHECK(max_entry(f.matrix() * h.matrix() - h.matrix() * f.matrix()) < 1e-10);
    CHECK(f.hermiticity_defect() == 0.0);
  }
}

TEST_CASE("effective_hamiltonian: zero eigenvalue, spin case, boundedness") {
  const ClockParams clock(0.25);
  const double sk = clock.delta_t0();

  const HermitianOperatord with_zero(Eigen::MatrixXcd(Eigen::Vector3cd(0.0, 1.0, -2.0).asDiagonal()));
  const auto eff = effective_hamiltonian(with_zero, clock);
  CHECK(std::abs(eff.matrix()(0, 0)) == 0.0);

  const double omega0 = 3.0;
  const auto spin = effective_hamiltonian(HermitianOperatord(0.5 * omega0 * sigma_z()), clock);
  CHECK(max_entry(spin.matrix() - std::atan(0.5 * sk * omega0) / sk * sigma_z()) < 1e-15);

  const double huge = 1e6 / sk;
  const auto capped = effective_hamiltonian(HermitianOperatord(huge * sigma_z()), clock);
  const auto dec = diagonalize(capped);
  CHECK(dec.spectral_radius() < std::numbers::pi / (2.0 * sk));
}

TEST_CASE("effective_hamiltonian: small-kappa limit and parameter validation") {
  std::mt19937_64 rng(9);
  const HermitianOperatord h(random_hermitian(4, rng, 1.0));
  const auto eff = effective_hamiltonian(h, ClockParams(1e-12));
  CHECK(max_entry(eff.matrix() - h.matrix()) <= 1e-8);
  CHECK_THROWS_AS(ClockParams(0.0), DomainError);
  CHECK_THROWS_AS(ClockParams(-1.0), DomainError);
}

TEST_CASE("propagator: tau = 0, diagonal case, group law") {
  std::mt19937_64 rng(21);
  const HermitianOperatord h(random_hermitian(5, rng, 2.0));
  CHECK(max_entry(propagator(h, 0.0).matrix() - Eigen::MatrixXcd::Identity(5, 5)) < 1e-14);

  const HermitianOperatord d(Eigen::MatrixXcd(Eigen::Vector2cd(0.7, -1.9).asDiagonal()));
  const double tau = 1.3;
  const double hbar = 0.5;
  const auto u = propagator(d, tau, hbar);
  CHECK(std::abs(u.matrix()(0, 0) - std::polar(1.0, -tau * 0.7 / hbar)) < 1e-15);
  CHECK(std::abs(u.matrix()(1, 1) - std::polar(1.0, tau * 1.9 / hbar)) < 1e-15);
  CHECK(std::abs(u.matrix()(0, 1)) == 0.0);

  const auto u1 = propagator(h, 0.4);
  const auto u2 = propagator(h, 1.1);
  const auto u12 = propagator(h, 1.5);
  CHECK(max_entry((u1 * u2).matrix() - u12.matrix()) < 1e-10);
  CHECK(u12.unitarity_defect() < 1e-12);
}

TEST_CASE("propagator: single spin precesses at the deformed frequency") {
  const ClockParams clock(1.0);
  const double omega0 = 2.0;
  const double omega_k = 2.0 / clock.delta_t0() * std::atan(0.5 * clock.delta_t0() * omega0);
  const auto eff = effective_hamiltonian(HermitianOperatord(0.5 * omega0 * sigma_z()), clock);
  const double theta = 0.9, phi = 0.2, tau = 0.8;
  Eigen::VectorXcd psi(2);
  psi << std::cos(0.5 * theta) * std::polar(1.0, -0.5 * phi), std::sin(0.5 * theta) * std::polar(1.0, 0.5 * phi);
  const Eigen::VectorXcd out = propagator(eff, tau).apply(psi);
  const double phi_out = std::arg(std::conj(out[0]) * out[1]);
  CHECK(phi_out == doctest::Approx(phi + omega_k * tau).epsilon(1e-14));
  CHECK(std::abs(out[1]) == doctest::Approx(std::sin(0.5 * theta)));
}

TEST_CASE("deformed_propagator matches propagator of the effective Hamiltonian") {
  std::mt19937_64 rng(4);
  const ClockParams clock(0.3);
  const HermitianOperatord h(random_hermitian(6, rng, 5.0));
  const auto a = deformed_propagator(h, Deformation(clock), 2.2);
  const auto b = propagator(effective_hamiltonian(h, clock), 2.2);
  CHECK(max_entry(a.matrix() - b.matrix()) < 1e-12);
  // kappa = 0 reference path is the ordinary propagator.
  CHECK(max_entry(deformed_propagator(h, Deformation(0.0), 2.2).matrix() - propagator(h, 2.2).matrix()) < 1e-14);
}

TEST_CASE("UnitaryOperator rejects a non-unitary matrix") {
  CHECK_THROWS_AS(UnitaryOperatord(2.0 * Eigen::MatrixXcd::Identity(2, 2)), NumericalError);
}

TEST_CASE("verify_function_transfer: equal operators and shared eigenvector") {
  std::mt19937_64 rng(8);
  const HermitianOperatord a(random_hermitian(4, rng));
  const Eigen::VectorXcd psi = mintime::test::random_unit_vector(4, rng);
  CHECK(verify_function_transfer(a, a, psi, [](double x) { return std::atan(x); }) < 1e-14);

  const HermitianOperatord d1(Eigen::MatrixXcd(Eigen::Vector3cd(1.0, 2.0, 5.0).asDiagonal()));
  const HermitianOperatord d2(Eigen::MatrixXcd(Eigen::Vector3cd(1.0, 2.0, 7.0).asDiagonal()));
  const Eigen::VectorXcd e0 = Eigen::VectorXcd::Unit(3, 0);
  CHECK(verify_function_transfer(d1, d2, e0, [](double x) { return std::atan(x); }) <= 1e-12);
}

TEST_CASE("verify_function_transfer names the violated hypothesis") {
  const HermitianOperatord d1(Eigen::MatrixXcd(Eigen::Vector3cd(1.0, 2.0, 5.0).asDiagonal()));
  const HermitianOperatord d2(Eigen::MatrixXcd(Eigen::Vector3cd(1.0, 2.0, 7.0).asDiagonal()));
  auto f = [](double x) { return std::atan(x); };

  const Eigen::VectorXcd e2 = Eigen::VectorXcd::Unit(3, 2);
  try {
    verify_function_transfer(d1, d2, e2, f);
    FAIL("expected precondition error");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("A psi != B psi") != std::string::npos);
  }

  Eigen::MatrixXcd x = Eigen::MatrixXcd::Zero(3, 3);
  x(0, 1) = x(1, 0) = 1.0;
  try {
    verify_function_transfer(d1, HermitianOperatord(x), e2, f);
    FAIL("expected precondition error");
  } catch (const PreconditionError& e) {
    CHECK(std::string(e.what()).find("do not commute") != std::string::npos);
  }

  CHECK_THROWS_WITH_AS(verify_function_transfer(d1, d2, Eigen::VectorXcd(2.0 * Eigen::VectorXcd::Unit(3, 0)), f),
                       doctest::Contains("not normalized"), PreconditionError);
}

TEST_CASE("Tolerances are configurable") {
  Tolerances<double> loose;
  loose.shared_action = 10.0;
  const HermitianOperatord d1(Eigen::MatrixXcd(Eigen::Vector2cd(1.0, 5.0).asDiagonal()));
  const HermitianOperatord d2(Eigen::MatrixXcd(Eigen::Vector2cd(1.0, 7.0).asDiagonal()));
  const Eigen::VectorXcd e1 = Eigen::VectorXcd::Unit(2, 1);
  auto f = [](double x) { return x; };
  CHECK_THROWS_AS(verify_function_transfer(d1, d2, e1, f), PreconditionError);
  CHECK(verify_function_transfer(d1, d2, e1, f, loose) == doctest::Approx(2.0));
}

TEST_CASE("templated on the scalar: long double instantiation") {
  using L = long double;
  CMatrix<L> m = CMatrix<L>::Zero(2, 2);
  m(0, 0) = 1.0L;
  m(1, 1) = -3.0L;
  const HermitianOperator<L> h(m);
  const auto f = apply_spectral_function(h, [](L x) { return std::atan(x); });
  CHECK(std::abs(f.matrix()(1, 1) - std::complex<L>(std::atan(-3.0L))) < 1e-18L);
}

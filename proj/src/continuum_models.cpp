#include "mintime/continuum_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "mintime/errors.hpp"

namespace mintime {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::complex<double> kI{0.0, 1.0};

Eigen::ArrayXd trapezoid_weights(Eigen::Index n, double h) {
  Eigen::ArrayXd w = Eigen::ArrayXd::Constant(n, h);
  w[0] = w[n - 1] = 0.5 * h;
  return w;
}

// Fourth-order central derivative; the decay gate makes zero extension exact
// to the gate tolerance.
Eigen::ArrayXcd derivative_p(const Eigen::ArrayXcd& f, double h) {
  const Eigen::Index n = f.size();
  auto at = [&](Eigen::Index j) -> std::complex<double> { return (j < 0 || j >= n) ? 0.0 : f[j]; };
  Eigen::ArrayXcd d(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d[j] = (-at(j + 2) + 8.0 * at(j + 1) - 8.0 * at(j - 1) + at(j - 2)) / (12.0 * h);
  }
  return d;
}

Eigen::ArrayXd velocities(const MomentumWavepacket& packet, const Deformation& def) {
  return packet.p_grid().unaryExpr([&](double p) { return velocity(p, packet.mass(), def); });
}

// Coherent amplitudes without the tail gate (used while scanning).
Eigen::VectorXcd coherent_vector(std::complex<double> alpha, int n_max) {
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(n_max + 1);
  const double r = std::abs(alpha);
  if (r == 0.0) {
    c[0] = 1.0;
    return c;
  }
  const double lr = std::log(r);
  const double arg = std::arg(alpha);
  for (int n = 0; n <= n_max; ++n) {
    const double log_mag = -0.5 * r * r + n * lr - 0.5 * std::lgamma(n + 1.0);
    c[n] = std::polar(std::exp(log_mag), n * arg);
  }
  return c;
}

}  // namespace

namespace constants {
double planck_mass() { return std::sqrt(hbar * c / G); }
double planck_time() { return std::sqrt(hbar * G / (c * c * c * c * c)); }
}  // namespace constants

// --- free particle ------------------------------------------------------------

MomentumWavepacket::MomentumWavepacket(Eigen::ArrayXd p_grid, Eigen::ArrayXcd f_values, double mass, double hbar,
                                       double phase_time)
    : p_(std::move(p_grid)), f_(std::move(f_values)), mass_(mass), hbar_(hbar), phase_time_(phase_time) {
  if (p_.size() < 8 || p_.size() != f_.size()) {
    throw PreconditionError("MomentumWavepacket: grid and values must match and hold at least 8 points");
  }
  if (!(mass > 0.0) || !(hbar > 0.0)) throw DomainError("MomentumWavepacket: mass and hbar must be > 0");
  const double edge = std::max(std::abs(f_[0]), std::abs(f_[f_.size() - 1]));
  if (edge > kDecayGate) {
    std::ostringstream msg;
    msg << "MomentumWavepacket: |f| = " << edge << " at the grid ends exceeds the decay gate " << kDecayGate;
    throw NumericalError(msg.str(), edge);
  }
  const double nrm = norm_sq();
  if (std::abs(nrm - 1.0) > 1e-10) {
    throw NumericalError("MomentumWavepacket: packet is not normalized", std::abs(nrm - 1.0));
  }
}

double MomentumWavepacket::norm_sq() const { return (trapezoid_weights(p_.size(), dp()) * f_.abs2()).sum(); }

MomentumWavepacket gaussian_packet(double p0, double delta_p, double mass, double hbar, const MomentumGridSpec& grid) {
  if (!(delta_p > 0.0)) throw DomainError("gaussian_packet: delta_p must be > 0");
  const double half = grid.half_width_sigmas * delta_p;
  const auto n = static_cast<Eigen::Index>(grid.n_points);
  Eigen::ArrayXd p = Eigen::ArrayXd::LinSpaced(n, p0 - half, p0 + half);
  const double amp = std::pow(2.0 * kPi, -0.25) / std::sqrt(delta_p);
  Eigen::ArrayXcd f = p.unaryExpr([&](double q) {
                         const double d = q - p0;
                         return amp * std::exp(-d * d / (4.0 * delta_p * delta_p));
                       }).cast<std::complex<double>>();
  return {std::move(p), std::move(f), mass, hbar};
}

double dispersion(double p, double mass, const Deformation& def) {
  return def.hbar * deformed_rate(p * p / (2.0 * mass * def.hbar), def.kappa);
}

double velocity(double p, double mass, const Deformation& def) {
  const double p2 = p * p;
  return (p / mass) / (1.0 + def.kappa * p2 * p2 / (4.0 * mass * mass * def.hbar * def.hbar));
}

double v_max(double mass, const ClockParams& clock) {
  if (!(mass > 0.0)) throw DomainError("v_max: mass must be > 0");
  return std::sqrt(3.0 * std::sqrt(3.0) * clock.hbar() / (8.0 * mass * clock.delta_t0()));
}

MomentumWavepacket evolve_free(const MomentumWavepacket& packet, const Deformation& def, double tau) {
  if (std::abs(def.hbar - packet.hbar()) > 1e-15 * packet.hbar()) {
    throw PreconditionError("evolve_free: hbar of deformation and packet differ");
  }
  const Eigen::ArrayXcd phases = packet.p_grid().unaryExpr([&](double p) {
    return std::polar(1.0, -dispersion(p, packet.mass(), def) * tau / def.hbar);
  });
  return {packet.p_grid(), packet.f_values() * phases, packet.mass(), packet.hbar(), packet.phase_time() + tau};
}

double momentum_expectation(const MomentumWavepacket& packet) {
  const auto w = trapezoid_weights(packet.p_grid().size(), packet.dp());
  return (w * packet.p_grid() * packet.f_values().abs2()).sum();
}

double velocity_expectation(const MomentumWavepacket& packet, const Deformation& def) {
  const auto w = trapezoid_weights(packet.p_grid().size(), packet.dp());
  return (w * velocities(packet, def) * packet.f_values().abs2()).sum();
}

Eigen::VectorXcd position_wavefunction(const MomentumWavepacket& packet, const Eigen::ArrayXd& x_grid) {
  const double hbar = packet.hbar();
  const double dp = packet.dp();
  if (x_grid.size() > 0 && x_grid.abs().maxCoeff() * dp / hbar >= kPi) {
    throw PreconditionError("position_wavefunction: x window exceeds the momentum-grid Nyquist limit |x| < " +
                            std::to_string(kPi * hbar / dp));
  }
  const auto w = trapezoid_weights(packet.p_grid().size(), dp);
  const Eigen::ArrayXcd wf = w.cast<std::complex<double>>() * packet.f_values();
  const double pref = 1.0 / std::sqrt(2.0 * kPi * hbar);
  Eigen::VectorXcd out(x_grid.size());
  for (Eigen::Index i = 0; i < x_grid.size(); ++i) {
    const double x = x_grid[i];
    std::complex<double> acc{0.0, 0.0};
    for (Eigen::Index j = 0; j < wf.size(); ++j) acc += wf[j] * std::polar(1.0, packet.p_grid()[j] * x / hbar);
    out[i] = pref * acc;
  }
  return out;
}

PositionMoments position_moments(const MomentumWavepacket& packet) {
  const auto w = trapezoid_weights(packet.p_grid().size(), packet.dp());
  const Eigen::ArrayXcd xf = kI * packet.hbar() * derivative_p(packet.f_values(), packet.dp());
  const double mean = (w.cast<std::complex<double>>() * packet.f_values().conjugate() * xf).sum().real();
  const double x2 = (w * xf.abs2()).sum();
  return {mean, std::sqrt(std::max(0.0, x2 - mean * mean))};
}

PositionMoments position_moments(const MomentumWavepacket& packet, const Deformation& def, double tau) {
  return position_moments(evolve_free(packet, def, tau));
}

SpreadingCoefficients spreading_coefficients(const MomentumWavepacket& packet, const Deformation& def) {
  const auto w = trapezoid_weights(packet.p_grid().size(), packet.dp());
  const auto& f = packet.f_values();
  const Eigen::ArrayXd v = velocities(packet, def);
  const Eigen::ArrayXcd xf = kI * packet.hbar() * derivative_p(f, packet.dp());
  const auto m = position_moments(packet);
  SpreadingCoefficients c{};
  c.mean_x = m.mean_x;
  c.delta_x = m.delta_x;
  c.mean_v = (w * v * f.abs2()).sum();
  const double v2 = (w * v.square() * f.abs2()).sum();
  c.delta_v = std::sqrt(std::max(0.0, v2 - c.mean_v * c.mean_v));
  c.anticommutator =
      2.0 * (w.cast<std::complex<double>>() * (v.cast<std::complex<double>>() * f).conjugate() * xf).sum().real();
  return c;
}

double spreading_closed_form(const SpreadingCoefficients& c, double tau) {
  const double var = c.delta_x * c.delta_x + tau * (c.anticommutator - 2.0 * c.mean_x * c.mean_v) +
                     tau * tau * c.delta_v * c.delta_v;
  return std::sqrt(std::max(0.0, var));
}

// --- harmonic oscillator ------------------------------------------------------

FockExpansion::FockExpansion(Eigen::VectorXcd coefficients, OscillatorParams params)
    : c_(std::move(coefficients)), params_(params) {
  if (c_.size() < 1) throw PreconditionError("FockExpansion: need at least one coefficient");
  if (!(params_.mass > 0.0 && params_.omega > 0.0 && params_.hbar > 0.0)) {
    throw DomainError("FockExpansion: mass, omega and hbar must be > 0");
  }
}

double FockExpansion::mean_number() const {
  double acc = 0.0;
  for (Eigen::Index n = 0; n < c_.size(); ++n) acc += static_cast<double>(n) * std::norm(c_[n]);
  return acc;
}

std::complex<double> coherent_alpha(double x0, double p0, const OscillatorParams& p) {
  return {std::sqrt(p.mass * p.omega / (2.0 * p.hbar)) * x0, p0 / std::sqrt(2.0 * p.mass * p.omega * p.hbar)};
}

double coherent_tail(std::complex<double> alpha, int n_max) {
  const double mean = std::norm(alpha);
  if (mean == 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(n_max) + 1.0, mean);
}

FockExpansion coherent_coefficients(std::complex<double> alpha, const OscillatorParams& params, int n_max) {
  if (n_max < 0) throw PreconditionError("coherent_coefficients: n_max must be >= 0");
  const double tail = coherent_tail(alpha, n_max);
  if (tail >= kFockTailGate) {
    int suggested = n_max;
    while (coherent_tail(alpha, suggested) >= kFockTailGate) ++suggested;
    std::ostringstream msg;
    msg << "coherent_coefficients: Fock tail " << tail << " beyond n_max = " << n_max
        << " exceeds the gate; use n_max >= " << suggested;
    throw NumericalError(msg.str(), tail);
  }
  return {coherent_vector(alpha, n_max), params};
}

FockExpansion coherent_coefficients(double x0, double p0, const OscillatorParams& params, int n_max) {
  return coherent_coefficients(coherent_alpha(x0, p0, params), params, n_max);
}

FockExpansion oscillator_evolve(const FockExpansion& fock, const Deformation& def, double tau) {
  Eigen::VectorXcd c = fock.coefficients();
  const double w = fock.params().omega;
  for (Eigen::Index n = 0; n < c.size(); ++n) {
    const double level = w * (static_cast<double>(n) + 0.5);
    c[n] *= std::polar(1.0, -tau * deformed_rate(level, def.kappa));
  }
  return {std::move(c), fock.params()};
}

double fock_fidelity(const FockExpansion& a, const FockExpansion& b) {
  if (a.coefficients().size() != b.coefficients().size()) {
    throw PreconditionError("fock_fidelity: expansions have different n_max");
  }
  return std::norm(a.coefficients().dot(b.coefficients()));
}

CoherentFit best_coherent_overlap(const FockExpansion& state, std::complex<double> guess, double radius) {
  const int n_max = state.n_max();
  auto score = [&](std::complex<double> beta) {
    return std::norm(coherent_vector(beta, n_max).dot(state.coefficients()));
  };
  constexpr int kSteps = 10;  // 21 x 21 scan per level
  CoherentFit best{guess, score(guess)};
  double r = radius;
  while (r > 1e-9) {
    const std::complex<double> center = best.beta;
    for (int i = -kSteps; i <= kSteps; ++i) {
      for (int j = -kSteps; j <= kSteps; ++j) {
        const std::complex<double> beta = center + std::complex<double>(i * r / kSteps, j * r / kSteps);
        const double s = score(beta);
        if (s > best.fidelity) best = {beta, s};
      }
    }
    r *= 0.25;
  }
  return best;
}

Eigen::VectorXd hermite_functions(double x, int n_max, const OscillatorParams& params) {
  if (n_max < 0) throw PreconditionError("hermite_functions: n_max must be >= 0");
  const double scale = params.mass * params.omega / params.hbar;
  const double xi = std::sqrt(scale) * x;
  Eigen::VectorXd psi(n_max + 1);
  psi[0] = std::pow(scale / kPi, 0.25) * std::exp(-0.5 * xi * xi);
  if (n_max >= 1) psi[1] = std::sqrt(2.0) * xi * psi[0];
  for (int n = 1; n < n_max; ++n) {
    psi[n + 1] = std::sqrt(2.0 / (n + 1.0)) * xi * psi[n] - std::sqrt(n / (n + 1.0)) * psi[n - 1];
  }
  if (!psi.allFinite()) {
    throw NumericalError("hermite_functions: recurrence overflowed; reduce n_max", std::abs(xi));
  }
  return psi;
}

PositionDensity oscillator_position_density(const FockExpansion& fock, const Eigen::ArrayXd& x_grid) {
  PositionDensity out{x_grid, Eigen::ArrayXd(x_grid.size())};
  for (Eigen::Index i = 0; i < x_grid.size(); ++i) {
    const Eigen::VectorXd h = hermite_functions(x_grid[i], fock.n_max(), fock.params());
    out.density[i] = std::norm(h.cast<std::complex<double>>().dot(fock.coefficients()));
  }
  return out;
}

}  // namespace mintime

#pragma once

// Free particle and harmonic oscillator under the deformed evolution.
// Everything is computed on the momentum side (free particle) or in the Fock
// basis (oscillator); there is no position-space PDE integration.

#include <complex>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mintime/clock_params.hpp"

namespace mintime {

// --- physical constants (CODATA 2018) -----------------------------------------

namespace constants {
inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double c = 299792458.0;               // m / s
inline constexpr double G = 6.67430e-11;               // m^3 / (kg s^2)
inline constexpr double proton_mass = 1.67262192369e-27;  // kg

/// Planck units derived from hbar, G and c so that m_P t_P = hbar / c^2 holds
/// to rounding.
double planck_mass();
double planck_time();
}  // namespace constants

// --- free particle ------------------------------------------------------------

/// f(p) on a uniform momentum grid.
class MomentumWavepacket {
 public:
  static constexpr double kDecayGate = 1e-12;

  MomentumWavepacket(Eigen::ArrayXd p_grid, Eigen::ArrayXcd f_values, double mass, double hbar = 1.0,
                     double phase_time = 0.0);

  const Eigen::ArrayXd& p_grid() const noexcept { return p_; }
  const Eigen::ArrayXcd& f_values() const noexcept { return f_; }
  double mass() const noexcept { return mass_; }
  double hbar() const noexcept { return hbar_; }
  /// Accumulated evolution time.
  double phase_time() const noexcept { return phase_time_; }
  double dp() const noexcept { return p_[1] - p_[0]; }

  /// Trapezoid integral of |f|^2.
  double norm_sq() const;

 private:
  Eigen::ArrayXd p_;
  Eigen::ArrayXcd f_;
  double mass_;
  double hbar_;
  double phase_time_;
};

struct MomentumGridSpec {
  /// Moments use fourth-order differences; 8192 points keep their error
  /// near 1e-9 for evolution phases up to ~10 rad across the packet.
  std::size_t n_points = 8192;
  /// Half width of the grid in units of the momentum spread.
  double half_width_sigmas = 12.0;
};

/// f(p) = (2 pi)^{-1/4} dp^{-1/2} exp(-(p - p0)^2 / (4 dp^2)).
MomentumWavepacket gaussian_packet(double p0, double delta_p, double mass, double hbar = 1.0,
                                   const MomentumGridSpec& grid = {});

/// E(p) = (hbar / sqrt k) arctan(sqrt k p^2 / (2 m hbar)); p^2 / 2m at k = 0.
double dispersion(double p, double mass, const Deformation& def);

/// Group velocity dE/dp = (p/m) / (1 + k p^4 / (4 m^2 hbar^2)).
double velocity(double p, double mass, const Deformation& def);

/// sqrt(3 sqrt(3) hbar / (8 m sqrt(k))).
double v_max(double mass, const ClockParams& clock);

MomentumWavepacket evolve_free(const MomentumWavepacket& packet, const Deformation& def, double tau);

double momentum_expectation(const MomentumWavepacket& packet);
double velocity_expectation(const MomentumWavepacket& packet, const Deformation& def);

/// psi(x) = (2 pi hbar)^{-1/2} int f(p) e^{i p x / hbar} dp for the packet as
/// stored (evolution phases already applied).
Eigen::VectorXcd position_wavefunction(const MomentumWavepacket& packet, const Eigen::ArrayXd& x_grid);

struct PositionMoments {
  double mean_x;
  double delta_x;
};

/// Moments of x = i hbar d/dp on the packet as stored.
PositionMoments position_moments(const MomentumWavepacket& packet);
/// Moments after evolving the packet by tau.
PositionMoments position_moments(const MomentumWavepacket& packet, const Deformation& def, double tau);

/// Initial-state quantities entering the spreading law.
struct SpreadingCoefficients {
  double mean_x;
  double delta_x;
  double mean_v;
  double delta_v;
  double anticommutator;  // <v x + x v>
};

SpreadingCoefficients spreading_coefficients(const MomentumWavepacket& packet, const Deformation& def);

/// sqrt(dx0^2 + tau (<vx + xv> - 2 <x><v>) + tau^2 dv^2).
double spreading_closed_form(const SpreadingCoefficients& c, double tau);

// --- harmonic oscillator ------------------------------------------------------

struct OscillatorParams {
  double mass = 1.0;
  double omega = 1.0;
  double hbar = 1.0;
};

class FockExpansion {
 public:
  FockExpansion(Eigen::VectorXcd coefficients, OscillatorParams params);

  const Eigen::VectorXcd& coefficients() const noexcept { return c_; }
  const OscillatorParams& params() const noexcept { return params_; }
  int n_max() const noexcept { return static_cast<int>(c_.size()) - 1; }

  double norm_sq() const { return c_.squaredNorm(); }
  double mean_number() const;

 private:
  Eigen::VectorXcd c_;
  OscillatorParams params_;
};

/// alpha = sqrt(m w / 2 hbar) x0 + i p0 / sqrt(2 m w hbar).
std::complex<double> coherent_alpha(double x0, double p0, const OscillatorParams& params);

/// Largest admissible probability mass beyond n_max.
inline constexpr double kFockTailGate = 1e-12;

/// c_n = e^{-|a|^2/2} a^n / sqrt(n!), evaluated in log space.
FockExpansion coherent_coefficients(std::complex<double> alpha, const OscillatorParams& params, int n_max);
FockExpansion coherent_coefficients(double x0, double p0, const OscillatorParams& params, int n_max);

/// Poisson tail P(N > n_max) for mean |alpha|^2.
double coherent_tail(std::complex<double> alpha, int n_max);

/// c_n <- c_n exp(-i tau (1/sqrt k) arctan(sqrt k w (n + 1/2))).
FockExpansion oscillator_evolve(const FockExpansion& fock, const Deformation& def, double tau);

/// |<a|b>|^2 of two expansions over the same basis.
double fock_fidelity(const FockExpansion& a, const FockExpansion& b);

struct CoherentFit {
  std::complex<double> beta;
  double fidelity;
};

/// Best overlap of `state` with any coherent state near `guess`, by a
/// refining two-parameter scan over (Re beta, Im beta).
CoherentFit best_coherent_overlap(const FockExpansion& state, std::complex<double> guess, double radius = 0.5);

/// Normalized Hermite functions psi_0..psi_{n_max} at x, by the stable
/// three-term recurrence.
Eigen::VectorXd hermite_functions(double x, int n_max, const OscillatorParams& params);

struct PositionDensity {
  Eigen::ArrayXd x_grid;
  Eigen::ArrayXd density;
};

PositionDensity oscillator_position_density(const FockExpansion& fock, const Eigen::ArrayXd& x_grid);

}  // namespace mintime

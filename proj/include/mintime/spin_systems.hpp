#pragma once

// Spin-1/2 models: single-spin precession, the two-spin XY + Zeeman model and
// three non-interacting spins in a field.
//
// Tensor ordering: the first factor is the slowest index, so |a b c> sits at
// index 4a + 2b + c with 0 = up, 1 = down.

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "mintime/clock_params.hpp"
#include "mintime/operator_calculus.hpp"

namespace mintime {

struct BlochState {
  double theta = 0.0;
  double phi = 0.0;

  /// cos(theta/2) e^{-i phi/2} |up> + sin(theta/2) e^{i phi/2} |down>.
  Eigen::Vector2cd amplitudes() const;
};

class MultiSpinState {
 public:
  explicit MultiSpinState(Eigen::VectorXcd amplitudes, double tol = 1e-12);

  static MultiSpinState product(const std::vector<BlochState>& spins);

  int n_spins() const noexcept { return n_spins_; }
  const Eigen::VectorXcd& amplitudes() const noexcept { return amplitudes_; }

 private:
  Eigen::VectorXcd amplitudes_;
  int n_spins_;
};

class DensityMatrix {
 public:
  explicit DensityMatrix(Eigen::MatrixXcd entries, double tol = 1e-12);

  Eigen::Index dim() const noexcept { return entries_.rows(); }
  const Eigen::MatrixXcd& matrix() const noexcept { return entries_; }
  double purity() const { return (entries_ * entries_).trace().real(); }

 private:
  Eigen::MatrixXcd entries_;
};

// --- Pauli algebra ------------------------------------------------------------

namespace pauli {
Eigen::Matrix2cd identity();
Eigen::Matrix2cd x();
Eigen::Matrix2cd y();
Eigen::Matrix2cd z();
}  // namespace pauli

/// Kronecker product of the factors, first factor slowest.
Eigen::MatrixXcd kron(const std::vector<Eigen::MatrixXcd>& factors);

/// `op` acting on spin `site` of an n-spin register.
Eigen::MatrixXcd embed(const Eigen::Matrix2cd& op, int site, int n_spins);

/// Hilbert-Schmidt coefficient Tr(P^dag H) / dim of H on the Pauli string P.
double pauli_coefficient(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& pauli_string);

double fidelity(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b);

// --- single spin --------------------------------------------------------------

/// (2/sqrt(kappa)) arctan(sqrt(kappa) w0 / 2); w0 at kappa = 0. Always below
/// pi / sqrt(kappa) in magnitude.
double larmor_frequency_kappa(double omega0, double kappa);

/// (hbar w0 / 2) sigma_z.
HermitianOperatord single_spin_hamiltonian(double omega0, double hbar = 1.0);

BlochState single_spin_evolve(const BlochState& s, double omega0, const Deformation& def, double tau);

/// <sigma_+> = conj(psi_up) psi_down; its phase is the azimuth phi.
std::complex<double> sigma_plus_expectation(const Eigen::Vector2cd& psi);

// --- two spins ----------------------------------------------------------------

struct TwoSpinHamiltonians {
  HermitianOperatord zeeman;       // (hbar w0 / 2)(Z1 + Z2)
  HermitianOperatord interaction;  // (hbar^2 lambda / 4)(X1 X2 + Y1 Y2)
  double product_defect = 0.0;     // max |H0 H1|, |H1 H0|

  HermitianOperatord total() const { return zeeman + interaction; }
};

TwoSpinHamiltonians two_spin_hamiltonians(double omega0, double coupling, double hbar = 1.0);

/// Deformed two-spin rates: w_k = (1/sqrt k) arctan(sqrt k w0),
/// l_k = (2/(hbar sqrt k)) arctan(hbar sqrt k l / 2).
struct TwoSpinRates {
  double omega_kappa;
  double lambda_kappa;
};
TwoSpinRates two_spin_rates(double omega0, double coupling, const Deformation& def);

/// Closed-form evolution of (theta, phi) x (theta, phi).
MultiSpinState two_spin_evolve(double theta, double phi, double omega0, double coupling, const Deformation& def,
                               double tau);

/// exp(-i tau (1/sqrt k) arctan(sqrt k H / hbar)) applied to the state.
MultiSpinState evolve_operator_route(const HermitianOperatord& h, const MultiSpinState& psi, const Deformation& def,
                                     double tau);

// --- reduced states and entropy -----------------------------------------------

/// Reduced density matrix of spin `keep` (0-based).
DensityMatrix partial_trace(const MultiSpinState& state, int keep);

/// Reduced state of spin 1 for the closed-form two-spin evolution, written out
/// entrywise: diagonal (cos^2(theta/2), sin^2(theta/2)), off-diagonal
/// (1/2) sin(theta) e^{-i(phi + w_k tau)} (cos^2(theta/2) e^{i a} + sin^2(theta/2) e^{-i a}),
/// a = hbar lambda_kappa tau / 2.
Eigen::Matrix2cd two_spin_reduced_closed_form(double theta, double phi, const TwoSpinRates& rates, double tau,
                                              double hbar = 1.0);

/// -k_B sum p ln p over the eigenvalues of rho.
double entanglement_entropy(const DensityMatrix& rho, double k_b = 1.0);

/// -k_B (p1 ln p1 + p2 ln p2), p = (1 +- sqrt(1 - sin^4 theta sin^2 a)) / 2,
/// a = hbar lambda_kappa tau / 2.
double two_spin_entropy_closed_form(double theta, double lambda_kappa, double tau, double hbar = 1.0,
                                    double k_b = 1.0);

/// The same entropy written through artanh: -k_B (ln(sin^2 theta |sin a| / 2)
/// + r artanh r), r = sqrt(1 - sin^4 theta sin^2 a). Singular at sin a = 0.
double two_spin_entropy_artanh_form(double theta, double lambda_kappa, double tau, double hbar = 1.0,
                                    double k_b = 1.0);

/// Brute force: evolve (operator route), trace out spin 2, take the entropy.
std::vector<double> two_spin_entropy_series(double theta, double omega0, double coupling, const Deformation& def,
                                            const std::vector<double>& tau_grid, double k_b = 1.0);

/// 2 pi / (hbar lambda_kappa).
double two_spin_entropy_period(double coupling, const Deformation& def);

/// Period of S(tau) measured on the operator route: zeros of the purity
/// deficit 1 - Tr(rho_1^2) in (0, tau_max] are bracketed on a scan grid and
/// refined by Brent minimization. Throws if no zero is found.
double measure_entropy_period(double theta, double omega0, double coupling, const Deformation& def, double tau_max,
                              int n_scan = 4000);

// --- three spins --------------------------------------------------------------

struct ThreeSpinEffective {
  /// (1/(4 sqrt k))(arctan(3 sqrt k w0 / 2) + arctan(sqrt k w0 / 2))
  double omega_kappa;
  /// (1/(4 sqrt k))(arctan(3 sqrt k w0 / 2) - 3 arctan(sqrt k w0 / 2))
  double lambda_kappa;
  HermitianOperatord h_eff;
  /// Pauli projections of h_eff (per spin on Z_i, and on Z Z Z), divided by hbar.
  std::array<double, 3> z_coefficients;
  double zzz_coefficient;
};

/// (hbar w0 / 2)(Z1 + Z2 + Z3).
HermitianOperatord three_spin_hamiltonian(double omega0, double hbar = 1.0);

ThreeSpinEffective three_spin_effective(double omega0, const ClockParams& clock);

/// cos(l tau) (x)|theta_i, phi_i + w' tau> - i sin(l tau) (x)|-theta_i, phi_i + w' tau>,
/// with w' = 2 * (Z coefficient) and l = (ZZZ coefficient) from the projection.
MultiSpinState three_spin_evolve(const std::array<BlochState, 3>& spins, double omega0, const ClockParams& clock,
                                 double tau);

}  // namespace mintime

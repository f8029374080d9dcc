#include "mintime/spin_systems.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/tools/minima.hpp>

#include "mintime/errors.hpp"

namespace mintime {

namespace {
constexpr std::complex<double> kI{0.0, 1.0};

int count_spins(Eigen::Index dim) {
  int n = 0;
  while ((Eigen::Index{1} << n) < dim) ++n;
  if ((Eigen::Index{1} << n) != dim || n < 1 || n > 3) {
    throw PreconditionError("MultiSpinState: dimension must be 2, 4 or 8");
  }
  return n;
}
}  // namespace

Eigen::Vector2cd BlochState::amplitudes() const {
  return {std::cos(0.5 * theta) * std::polar(1.0, -0.5 * phi), std::sin(0.5 * theta) * std::polar(1.0, 0.5 * phi)};
}

MultiSpinState::MultiSpinState(Eigen::VectorXcd amplitudes, double tol)
    : amplitudes_(std::move(amplitudes)), n_spins_(count_spins(amplitudes_.size())) {
  const double defect = std::abs(amplitudes_.norm() - 1.0);
  if (defect > tol) {
    throw NumericalError("MultiSpinState: state is not normalized", defect);
  }
}

MultiSpinState MultiSpinState::product(const std::vector<BlochState>& spins) {
  std::vector<Eigen::MatrixXcd> factors;
  factors.reserve(spins.size());
  for (const auto& s : spins) factors.emplace_back(s.amplitudes());
  return MultiSpinState(kron(factors).col(0));
}

DensityMatrix::DensityMatrix(Eigen::MatrixXcd entries, double tol) : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
    throw PreconditionError("DensityMatrix: expected a non-empty square matrix");
  }
  if (max_abs_entry((entries_ - entries_.adjoint()).eval()) > tol) {
    throw PreconditionError("DensityMatrix: not Hermitian");
  }
  const double tr = entries_.trace().real();
  if (std::abs(tr - 1.0) > tol) throw PreconditionError("DensityMatrix: trace is not 1");
}

// --- Pauli algebra ------------------------------------------------------------

namespace pauli {
Eigen::Matrix2cd identity() { return Eigen::Matrix2cd::Identity(); }
Eigen::Matrix2cd x() {
  Eigen::Matrix2cd m;
  m << 0, 1, 1, 0;
  return m;
}
Eigen::Matrix2cd y() {
  Eigen::Matrix2cd m;
  m << 0, -kI, kI, 0;
  return m;
}
Eigen::Matrix2cd z() {
  Eigen::Matrix2cd m;
  m << 1, 0, 0, -1;
  return m;
}
}  // namespace pauli

Eigen::MatrixXcd kron(const std::vector<Eigen::MatrixXcd>& factors) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Ones(1, 1);
  for (const auto& f : factors) {
    Eigen::MatrixXcd next(out.rows() * f.rows(), out.cols() * f.cols());
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = 0; j < out.cols(); ++j) {
        next.block(i * f.rows(), j * f.cols(), f.rows(), f.cols()) = out(i, j) * f;
      }
    }
    out = std::move(next);
  }
  return out;
}

Eigen::MatrixXcd embed(const Eigen::Matrix2cd& op, int site, int n_spins) {
  if (site < 0 || site >= n_spins) throw RangeError("embed: site out of range");
  std::vector<Eigen::MatrixXcd> factors(static_cast<std::size_t>(n_spins), pauli::identity());
  factors[static_cast<std::size_t>(site)] = op;
  return kron(factors);
}

double pauli_coefficient(const Eigen::MatrixXcd& h, const Eigen::MatrixXcd& pauli_string) {
  return (pauli_string.adjoint() * h).trace().real() / static_cast<double>(h.rows());
}

double fidelity(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return std::norm(a.dot(b)); }

// --- single spin --------------------------------------------------------------

double larmor_frequency_kappa(double omega0, double kappa) {
  if (kappa < 0.0) throw DomainError("larmor_frequency_kappa: kappa must be >= 0");
  return 2.0 * deformed_rate(0.5 * omega0, kappa);
}

HermitianOperatord single_spin_hamiltonian(double omega0, double hbar) {
  return HermitianOperatord(Eigen::MatrixXcd(0.5 * hbar * omega0 * pauli::z()));
}

BlochState single_spin_evolve(const BlochState& s, double omega0, const Deformation& def, double tau) {
  return {s.theta, s.phi + larmor_frequency_kappa(omega0, def.kappa) * tau};
}

std::complex<double> sigma_plus_expectation(const Eigen::Vector2cd& psi) { return std::conj(psi[0]) * psi[1]; }

// --- two spins ----------------------------------------------------------------

TwoSpinHamiltonians two_spin_hamiltonians(double omega0, double coupling, double hbar) {
  const Eigen::MatrixXcd z_sum = embed(pauli::z(), 0, 2) + embed(pauli::z(), 1, 2);
  const Eigen::MatrixXcd xy = kron({pauli::x(), pauli::x()}) + kron({pauli::y(), pauli::y()});
  const Eigen::MatrixXcd h0 = 0.5 * hbar * omega0 * z_sum;
  const Eigen::MatrixXcd h1 = 0.25 * hbar * hbar * coupling * xy;
  const double defect = std::max(max_abs_entry((h0 * h1).eval()), max_abs_entry((h1 * h0).eval()));
  return {HermitianOperatord(h0), HermitianOperatord(h1), defect};
}

TwoSpinRates two_spin_rates(double omega0, double coupling, const Deformation& def) {
  return {deformed_rate(omega0, def.kappa), 2.0 / def.hbar * deformed_rate(0.5 * def.hbar * coupling, def.kappa)};
}

MultiSpinState two_spin_evolve(double theta, double phi, double omega0, double coupling, const Deformation& def,
                               double tau) {
  const auto r = two_spin_rates(omega0, coupling, def);
  const double c = std::cos(0.5 * theta);
  const double s = std::sin(0.5 * theta);
  const double angle = phi + r.omega_kappa * tau;
  Eigen::Vector4cd v;
  const auto mixed = 0.5 * std::sin(theta) * std::polar(1.0, -0.5 * def.hbar * r.lambda_kappa * tau);
  v << c * c * std::polar(1.0, -angle), mixed, mixed, s * s * std::polar(1.0, angle);
  return MultiSpinState(v);
}

MultiSpinState evolve_operator_route(const HermitianOperatord& h, const MultiSpinState& psi, const Deformation& def,
                                     double tau) {
  const auto u = deformed_propagator(h, def, tau);
  return MultiSpinState(u.apply(psi.amplitudes()), 1e-10);
}

// --- reduced states and entropy -----------------------------------------------

DensityMatrix partial_trace(const MultiSpinState& state, int keep) {
  const int n = state.n_spins();
  if (n < 2) throw PreconditionError("partial_trace: need at least two spins");
  if (keep < 0 || keep >= n) {
    throw RangeError("partial_trace: subsystem " + std::to_string(keep) + " not in [0, " + std::to_string(n - 1) +
                     "]");
  }
  const int shift = n - 1 - keep;  // bit position of the kept spin
  const auto& a = state.amplitudes();
  Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      const Eigen::Index rest_mask = ~(Eigen::Index{1} << shift);
      if ((i & rest_mask) != (j & rest_mask)) continue;
      rho((i >> shift) & 1, (j >> shift) & 1) += a[i] * std::conj(a[j]);
    }
  }
  return DensityMatrix(rho);
}

Eigen::Matrix2cd two_spin_reduced_closed_form(double theta, double phi, const TwoSpinRates& rates, double tau,
                                              double hbar) {
  const double c2 = std::pow(std::cos(0.5 * theta), 2);
  const double s2 = std::pow(std::sin(0.5 * theta), 2);
  const double a = 0.5 * hbar * rates.lambda_kappa * tau;
  const std::complex<double> up_down = 0.5 * std::sin(theta) * std::polar(1.0, -(phi + rates.omega_kappa * tau)) *
                                       (c2 * std::polar(1.0, a) + s2 * std::polar(1.0, -a));
  Eigen::Matrix2cd rho;
  rho << c2, up_down, std::conj(up_down), s2;
  return rho;
}

double entanglement_entropy(const DensityMatrix& rho, double k_b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(rho.matrix(), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    double p = solver.eigenvalues()[i];
    if (p < -1e-10) {
      std::ostringstream msg;
      msg << "entanglement_entropy: eigenvalue " << p << " is negative";
      throw DomainError(msg.str());
    }
    p = std::clamp(p, 0.0, 1.0);
    if (p > 0.0) s -= p * std::log(p);
  }
  return k_b * s;
}

double two_spin_entropy_closed_form(double theta, double lambda_kappa, double tau, double hbar, double k_b) {
  const double st = std::sin(theta);
  const double sa = std::sin(0.5 * hbar * lambda_kappa * tau);
  const double r = std::sqrt(std::max(0.0, 1.0 - st * st * st * st * sa * sa));
  const double p1 = 0.5 * (1.0 + r);
  const double p2 = 0.5 * (1.0 - r);
  double s = 0.0;
  if (p1 > 0.0) s -= p1 * std::log(p1);
  if (p2 > 0.0) s -= p2 * std::log(p2);
  return k_b * s;
}

double two_spin_entropy_artanh_form(double theta, double lambda_kappa, double tau, double hbar, double k_b) {
  const double st = std::sin(theta);
  const double sa = std::sin(0.5 * hbar * lambda_kappa * tau);
  const double r = std::sqrt(std::max(0.0, 1.0 - st * st * st * st * sa * sa));
  return -k_b * (std::log(st * st * std::abs(sa) / 2.0) + r * std::atanh(r));
}

std::vector<double> two_spin_entropy_series(double theta, double omega0, double coupling, const Deformation& def,
                                            const std::vector<double>& tau_grid, double k_b) {
  const auto hs = two_spin_hamiltonians(omega0, coupling, def.hbar);
  const auto h = hs.total();
  const auto dec = diagonalize(h);
  const auto psi0 = MultiSpinState::product({{theta, 0.0}, {theta, 0.0}});
  Eigen::VectorXd rates(dec.eigenvalues.size());
  for (Eigen::Index i = 0; i < rates.size(); ++i) rates[i] = deformed_rate(dec.eigenvalues[i] / def.hbar, def.kappa);
  const Eigen::VectorXcd coeffs = dec.eigenvectors.adjoint() * psi0.amplitudes();

  std::vector<double> out;
  out.reserve(tau_grid.size());
  for (double tau : tau_grid) {
    Eigen::VectorXcd phased(coeffs.size());
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) phased[i] = std::polar(1.0, -tau * rates[i]) * coeffs[i];
    const MultiSpinState psi(dec.eigenvectors * phased, 1e-10);
    out.push_back(entanglement_entropy(partial_trace(psi, 0), k_b));
  }
  return out;
}

double two_spin_entropy_period(double coupling, const Deformation& def) {
  const auto r = two_spin_rates(0.0, coupling, def);
  return 2.0 * std::numbers::pi / std::abs(def.hbar * r.lambda_kappa);
}

double measure_entropy_period(double theta, double omega0, double coupling, const Deformation& def, double tau_max,
                              int n_scan) {
  if (!(tau_max > 0.0) || n_scan < 3) throw PreconditionError("measure_entropy_period: need tau_max > 0, n_scan >= 3");
  const auto dec = diagonalize(two_spin_hamiltonians(omega0, coupling, def.hbar).total());
  const auto psi0 = MultiSpinState::product({{theta, 0.0}, {theta, 0.0}});
  Eigen::VectorXd rates(dec.eigenvalues.size());
  for (Eigen::Index i = 0; i < rates.size(); ++i) rates[i] = deformed_rate(dec.eigenvalues[i] / def.hbar, def.kappa);
  const Eigen::VectorXcd coeffs = dec.eigenvectors.adjoint() * psi0.amplitudes();
  auto deficit = [&](double tau) {
    Eigen::VectorXcd phased(coeffs.size());
    for (Eigen::Index i = 0; i < coeffs.size(); ++i) phased[i] = std::polar(1.0, -tau * rates[i]) * coeffs[i];
    return 1.0 - partial_trace(MultiSpinState(dec.eigenvectors * phased, 1e-10), 0).purity();
  };

  const double h = tau_max / (n_scan - 1);
  std::vector<double> scan(n_scan);
  for (int i = 0; i < n_scan; ++i) scan[i] = deficit(i * h);
  std::vector<double> zeros;
  for (int i = 1; i + 1 < n_scan; ++i) {
    if (scan[i] <= scan[i - 1] && scan[i] < scan[i + 1]) {
      zeros.push_back(boost::math::tools::brent_find_minima(deficit, (i - 1) * h, (i + 1) * h, 52).first);
    }
  }
  if (zeros.empty()) throw NumericalError("measure_entropy_period: no zero of the entropy inside the window", tau_max);
  // tau = 0 is the first zero (product initial state).
  return zeros.back() / static_cast<double>(zeros.size());
}

// --- three spins --------------------------------------------------------------

HermitianOperatord three_spin_hamiltonian(double omega0, double hbar) {
  Eigen::MatrixXcd z_sum = Eigen::MatrixXcd::Zero(8, 8);
  for (int i = 0; i < 3; ++i) z_sum += embed(pauli::z(), i, 3);
  return HermitianOperatord(Eigen::MatrixXcd(0.5 * hbar * omega0 * z_sum));
}

ThreeSpinEffective three_spin_effective(double omega0, const ClockParams& clock) {
  const double sk = clock.delta_t0();
  const double a3 = std::atan(1.5 * sk * omega0);
  const double a1 = std::atan(0.5 * sk * omega0);
  const auto h_eff = effective_hamiltonian(three_spin_hamiltonian(omega0, clock.hbar()), clock);
  const Eigen::MatrixXcd zzz = kron({pauli::z(), pauli::z(), pauli::z()});
  std::array<double, 3> zc{};
  for (int i = 0; i < 3; ++i) zc[i] = pauli_coefficient(h_eff.matrix(), embed(pauli::z(), i, 3)) / clock.hbar();
  return {(a3 + a1) / (4.0 * sk), (a3 - 3.0 * a1) / (4.0 * sk), h_eff, zc,
          pauli_coefficient(h_eff.matrix(), zzz) / clock.hbar()};
}

MultiSpinState three_spin_evolve(const std::array<BlochState, 3>& spins, double omega0, const ClockParams& clock,
                                 double tau) {
  const auto eff = three_spin_effective(omega0, clock);
  const double rotation = 2.0 * eff.z_coefficients[0];
  const double l = eff.zzz_coefficient;
  std::vector<BlochState> plus, minus;
  for (const auto& s : spins) {
    plus.push_back({s.theta, s.phi + rotation * tau});
    minus.push_back({-s.theta, s.phi + rotation * tau});
  }
  const Eigen::VectorXcd v = std::cos(l * tau) * MultiSpinState::product(plus).amplitudes() -
                             kI * std::sin(l * tau) * MultiSpinState::product(minus).amplitudes();
  return MultiSpinState(v, 1e-10);
}

}  // namespace mintime

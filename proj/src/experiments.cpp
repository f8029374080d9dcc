#include "mintime/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "mintime/continuum_models.hpp"
#include "mintime/errors.hpp"
#include "mintime/spin_systems.hpp"

namespace mintime {

namespace {

constexpr double kPi = std::numbers::pi;

struct Experiment {
  ExperimentInfo info;
  std::function<ExperimentResult(const ExperimentConfig&)> body;
};

double param(const ExperimentConfig& cfg, const std::string& key) {
  const auto it = cfg.parameters.find(key);
  if (it == cfg.parameters.end()) throw UsageError("missing parameter '" + key + "'");
  return it->second;
}

int int_param(const ExperimentConfig& cfg, const std::string& key, int min_value) {
  const double v = param(cfg, key);
  if (v != std::floor(v) || v < min_value || v > 1e7) {
    throw UsageError("parameter '" + key + "' must be an integer >= " + std::to_string(min_value));
  }
  return static_cast<int>(v);
}

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return out;
}

std::vector<double> logspace(double a, double b, int n) {
  auto e = linspace(std::log10(a), std::log10(b), n);
  for (auto& v : e) v = std::pow(10.0, v);
  return e;
}

// Independent stream per sweep index, so results do not depend on the
// number of workers.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

CheckResult strict_below(std::string name, double value, double bound, std::string note = {}) {
  return {std::move(name), value < bound, value, bound, std::move(note)};
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Unwrap a phase series so consecutive differences stay in (-pi, pi].
void unwrap(std::vector<double>& phase) {
  for (std::size_t i = 1; i < phase.size(); ++i) {
    double d = phase[i] - phase[i - 1];
    d -= 2.0 * kPi * std::round(d / (2.0 * kPi));
    phase[i] = phase[i - 1] + d;
  }
}

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

// --- gup-surface ----------------------------------------------------------------

ExperimentResult run_gup_surface(const ExperimentConfig& cfg) {
  const double kappa = param(cfg, "kappa");
  const ClockParams clock(kappa);
  const auto grid = make_frequency_grid(clock, static_cast<std::size_t>(int_param(cfg, "grid_points", 64)));
  ExperimentResult res;

  CsvTable surface{"gup_surface.csv", {"delta_omega", "mean_omega", "delta_t_min"}, {}};
  CsvTable minimum{"gup_minimum.csv", {"mean_omega", "delta_t_min", "argmin_delta_omega"}, {}};
  const auto dws = linspace(param(cfg, "delta_omega_min"), param(cfg, "delta_omega_max"),
                            int_param(cfg, "n_delta_omega", 2));
  const double mmax = param(cfg, "mean_omega_max");
  const auto means = linspace(-mmax, mmax, int_param(cfg, "n_mean_omega", 1));
  double below_minimum = -std::numeric_limits<double>::infinity();
  for (double m : means) {
    const double floor = gup_minimum(m, kappa);
    for (double dw : dws) {
      const double bound = gup_bound(dw, m, kappa);
      surface.rows.push_back({dw, m, bound});
      below_minimum = std::max(below_minimum, floor - bound);
    }
    minimum.rows.push_back({m, floor, std::sqrt((1.0 + kappa * m * m) / kappa)});
  }
  res.checks.push_back(make_check("surface_above_minimum", below_minimum, 1e-12 * (1.0 + std::sqrt(kappa))));

  CsvTable states{"gup_states.csv", {"state", "is_ml", "tau", "mean_t", "delta_t", "mean_omega", "delta_omega", "bound"},
                  {}};
  const int n_ml = int_param(cfg, "n_ml_states", 1);
  double e_mt = 0, e_dt = 0, e_mo = 0, e_do = 0;
  for (int k = 0; k < n_ml; ++k) {
    const double tau = (k - 0.5 * (n_ml - 1)) * 0.7 * clock.delta_t0();
    const auto s = uncertainty_stats(maximal_localization_state(tau, clock, grid));
    e_mt = std::max(e_mt, std::abs(s.mean_t - tau));
    e_dt = std::max(e_dt, std::abs(s.delta_t - clock.delta_t0()));
    e_mo = std::max(e_mo, std::abs(s.mean_omega));
    e_do = std::max(e_do, std::abs(s.delta_omega - 1.0 / clock.delta_t0()));
    states.rows.push_back({double(k), 1.0, tau, s.mean_t, s.delta_t, s.mean_omega, s.delta_omega,
                           gup_bound(s.delta_omega, s.mean_omega, kappa)});
  }
  res.checks.push_back(make_check("ml_mean_t", e_mt, 1e-6));
  res.checks.push_back(make_check("ml_delta_t", e_dt, 1e-6));
  res.checks.push_back(make_check("ml_mean_omega", e_mo, 1e-8));
  res.checks.push_back(make_check("ml_delta_omega", e_do, 1e-6 / clock.delta_t0()));

  const int n_rand = int_param(cfg, "n_random_states", 0);
  std::vector<UncertaintyStats> stats(n_rand);
  parallel_for(n_rand, [&](std::size_t i) {
    auto rng = stream(cfg.seed, i);
    stats[i] = uncertainty_stats(random_smooth_state(grid, rng));
  });
  double violation = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n_rand; ++i) {
    const auto& s = stats[i];
    const double bound = gup_bound(s.delta_omega, s.mean_omega, kappa);
    violation = std::max(violation, bound - s.delta_t);
    states.rows.push_back({double(n_ml + i), 0.0, 0.0, s.mean_t, s.delta_t, s.mean_omega, s.delta_omega, bound});
  }
  if (n_rand > 0) {
    res.checks.push_back(make_check("gup_random_states", violation, 1e-8, "max(bound - delta_t); negative is margin"));
  }
  res.tables = {surface, minimum, states};
  return res;
}

// --- spin-precession ------------------------------------------------------------

ExperimentResult run_spin_precession(const ExperimentConfig& cfg) {
  const double kappa = param(cfg, "kappa");
  const double hbar = param(cfg, "hbar");
  const ClockParams clock(kappa, 0.0, hbar);
  const double omega0 = param(cfg, "omega0");
  const BlochState s0{param(cfg, "theta"), param(cfg, "phi")};
  const auto taus = linspace(0.0, param(cfg, "tau_max"), int_param(cfg, "n_tau", 3));
  ExperimentResult res;

  const auto h = single_spin_hamiltonian(omega0, hbar);
  CsvTable traj{"spin_precession_trajectory.csv", {"tau", "sigma_plus_re", "sigma_plus_im", "phase_kappa", "phase_0"},
                {}};
  std::vector<double> phase_k, phase_0;
  std::vector<std::complex<double>> sp;
  double infidelity = 0.0;
  for (double tau : taus) {
    const Eigen::Vector2cd psi_k = deformed_propagator(h, Deformation(clock), tau).apply(s0.amplitudes());
    const Eigen::Vector2cd psi_0 = deformed_propagator(h, Deformation(0.0, hbar), tau).apply(s0.amplitudes());
    const Eigen::Vector2cd closed = single_spin_evolve(s0, omega0, clock, tau).amplitudes();
    infidelity = std::max(infidelity, 1.0 - fidelity(closed, psi_k));
    sp.push_back(sigma_plus_expectation(psi_k));
    phase_k.push_back(std::arg(sp.back()));
    phase_0.push_back(std::arg(sigma_plus_expectation(psi_0)));
  }
  unwrap(phase_k);
  unwrap(phase_0);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    traj.rows.push_back({taus[i], sp[i].real(), sp[i].imag(), phase_k[i], phase_0[i]});
  }
  const double measured = fit_slope(taus, phase_k);
  const double expected = larmor_frequency_kappa(omega0, kappa);
  res.checks.push_back(make_check("frequency_from_sigma_plus", std::abs(measured - expected), 1e-8,
                                  "fitted phase slope vs (2/sqrt k) arctan(sqrt k w0 / 2)"));
  res.checks.push_back(make_check("closed_form_vs_operator", infidelity, 1e-10));

  CsvTable sweep{"spin_precession_frequency.csv", {"omega0", "omega_kappa", "omega_kappa_measured", "cap"}, {}};
  const double cap = kPi / clock.delta_t0();
  const double dt = 0.5 * clock.delta_t0();  // keeps w_k dt below pi/2
  double highest = -std::numeric_limits<double>::infinity();
  double mismatch = 0.0;
  for (double w : logspace(param(cfg, "omega0_sweep_min"), param(cfg, "omega0_sweep_max"),
                           int_param(cfg, "n_omega0", 2))) {
    const Eigen::Vector2cd psi =
        deformed_propagator(single_spin_hamiltonian(w, hbar), Deformation(clock), dt).apply(s0.amplitudes());
    const double wk_measured = (std::arg(sigma_plus_expectation(psi)) - s0.phi) / dt;
    const double wk = larmor_frequency_kappa(w, kappa);
    highest = std::max(highest, wk_measured);
    mismatch = std::max(mismatch, std::abs(wk_measured - wk) / cap);
    sweep.rows.push_back({w, wk, wk_measured, cap});
  }
  res.checks.push_back(strict_below("frequency_below_cap", highest, cap, "max measured w_k over the w0 sweep"));
  res.checks.push_back(make_check("sweep_measured_vs_closed_form", mismatch, 1e-12));
  res.tables = {traj, sweep};
  return res;
}

// --- two-spin-entropy -----------------------------------------------------------

ExperimentResult run_two_spin_entropy(const ExperimentConfig& cfg) {
  const double theta = param(cfg, "theta");
  const double omega0 = param(cfg, "omega0");
  const double coupling = param(cfg, "lambda");
  const double hbar = param(cfg, "hbar");
  const double k_b = param(cfg, "k_b");
  const double tau_max = param(cfg, "tau_max");
  const Deformation def(param(cfg, "kappa"), hbar);
  const Deformation ref(0.0, hbar);
  if (!def.deformed()) throw UsageError("two-spin-entropy: kappa must be > 0 (the kappa = 0 curve is always included)");
  const auto taus = linspace(0.0, tau_max, int_param(cfg, "n_tau", 3));
  ExperimentResult res;

  const auto s_k = two_spin_entropy_series(theta, omega0, coupling, def, taus, k_b);
  const auto s_0 = two_spin_entropy_series(theta, omega0, coupling, ref, taus, k_b);
  const auto r_k = two_spin_rates(omega0, coupling, def);
  const auto r_0 = two_spin_rates(omega0, coupling, ref);
  const auto hs = two_spin_hamiltonians(omega0, coupling, hbar);

  CsvTable table{"two_spin_entropy.csv", {"tau", "entropy_kappa", "entropy_0", "entropy_kappa_closed_form"}, {}};
  double closed_err = 0.0, artanh_err = 0.0, rho_err = 0.0, infidelity = 0.0;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double tau = taus[i];
    const double ck = two_spin_entropy_closed_form(theta, r_k.lambda_kappa, tau, hbar, k_b);
    const double c0 = two_spin_entropy_closed_form(theta, r_0.lambda_kappa, tau, hbar, k_b);
    closed_err = std::max({closed_err, std::abs(ck - s_k[i]), std::abs(c0 - s_0[i])});
    if (std::abs(std::sin(0.5 * hbar * r_k.lambda_kappa * tau)) > 1e-3) {
      artanh_err = std::max(artanh_err, std::abs(two_spin_entropy_artanh_form(theta, r_k.lambda_kappa, tau, hbar, k_b) - ck));
    }
    const auto closed_state = two_spin_evolve(theta, 0.0, omega0, coupling, def, tau);
    const auto op_state = evolve_operator_route(hs.total(), MultiSpinState::product({{theta, 0.0}, {theta, 0.0}}), def, tau);
    infidelity = std::max(infidelity, 1.0 - fidelity(closed_state.amplitudes(), op_state.amplitudes()));
    const Eigen::Matrix2cd rho = partial_trace(closed_state, 0).matrix();
    rho_err = std::max(rho_err, (rho - two_spin_reduced_closed_form(theta, 0.0, r_k, tau, hbar)).cwiseAbs().maxCoeff());
    lo = std::min({lo, s_k[i], s_0[i]});
    hi = std::max({hi, s_k[i], s_0[i]});
    table.rows.push_back({tau, s_k[i], s_0[i], ck});
  }
  res.checks.push_back(make_check("closed_form_vs_partial_trace", closed_err, 1e-10));
  res.checks.push_back(make_check("artanh_form_vs_closed_form", artanh_err, 1e-10, "points with |sin a| > 1e-3"));
  res.checks.push_back(make_check("reduced_density_closed_form", rho_err, 1e-12));
  res.checks.push_back(make_check("closed_form_state_vs_operator", infidelity, 1e-10));
  res.checks.push_back(make_check("entropy_bounds", std::max(-lo, hi - k_b * std::log(2.0)), 1e-12));

  CsvTable period{"two_spin_period.csv", {"kappa", "period_measured", "period_formula"}, {}};
  const double pk = measure_entropy_period(theta, omega0, coupling, def, tau_max);
  const double p0 = measure_entropy_period(theta, omega0, coupling, ref, tau_max);
  const double fk = two_spin_entropy_period(coupling, def);
  const double f0 = two_spin_entropy_period(coupling, ref);
  period.rows.push_back({def.kappa, pk, fk});
  period.rows.push_back({0.0, p0, f0});
  res.checks.push_back(make_check("period_measured_vs_formula", std::abs(pk / fk - 1.0), 1e-6));
  res.checks.push_back(make_check("period_kappa0_measured_vs_formula", std::abs(p0 / f0 - 1.0), 1e-6));
  res.checks.push_back(strict_below("period_longer_than_kappa0", p0, pk, "residual = kappa = 0 period"));

  // Two uncoupled spins against one spin: rotation rate of spin 1, measured
  // from the phase of its reduced-state coherence after a short step.
  CsvTable prec{"two_spin_precession.csv",
                {"omega0", "omega_single_kappa", "omega_two_spin_kappa", "omega_two_spin_measured"}, {}};
  double prec_err = 0.0;
  for (double w : linspace(param(cfg, "precession_omega0_max") / int_param(cfg, "n_precession", 2),
                           param(cfg, "precession_omega0_max"), int_param(cfg, "n_precession", 2))) {
    const auto free_h = two_spin_hamiltonians(w, 0.0, hbar).total();
    const auto start = MultiSpinState::product({{theta, 0.0}, {theta, 0.0}});
    const double dt = std::min(0.1, std::sqrt(def.kappa));  // rate * dt < pi / 2
    const auto coh = [&](double t) { return partial_trace(evolve_operator_route(free_h, start, def, t), 0).matrix()(1, 0); };
    const double measured = std::arg(coh(dt) / coh(0.0)) / dt;
    const double expected = two_spin_rates(w, 0.0, def).omega_kappa;
    prec_err = std::max(prec_err, std::abs(measured - expected));
    prec.rows.push_back({w, larmor_frequency_kappa(w, def.kappa), expected, measured});
  }
  res.checks.push_back(make_check("two_spin_rotation_rate", prec_err, 1e-10,
                                  "spin 1 of two uncoupled spins rotates at arctan(sqrt k w0) / sqrt k"));
  res.tables = {table, period, prec};
  return res;
}

// --- three-spin -----------------------------------------------------------------

ExperimentResult run_three_spin(const ExperimentConfig& cfg) {
  const double omega0 = param(cfg, "omega0");
  const ClockParams clock(param(cfg, "kappa"), 0.0, param(cfg, "hbar"));
  const std::array<BlochState, 3> spins{BlochState{param(cfg, "theta1"), param(cfg, "phi1")},
                                        BlochState{param(cfg, "theta2"), param(cfg, "phi2")},
                                        BlochState{param(cfg, "theta3"), param(cfg, "phi3")}};
  ExperimentResult res;

  CsvTable coeffs{"three_spin_coefficients.csv",
                  {"omega0", "omega_kappa", "lambda_kappa", "z_projection", "zzz_projection", "top_eigenvalue"}, {}};
  double z_err = 0.0, zzz_err = 0.0, top_err = 0.0, cube_err = 0.0;
  const double sk = clock.delta_t0();
  const double hbar = clock.hbar();
  for (double w : linspace(param(cfg, "omega0_sweep_min"), param(cfg, "omega0_sweep_max"),
                           int_param(cfg, "n_omega0", 2))) {
    const auto eff = three_spin_effective(w, clock);
    for (double z : eff.z_coefficients) z_err = std::max(z_err, std::abs(z - eff.omega_kappa));
    zzz_err = std::max(zzz_err, std::abs(eff.zzz_coefficient - eff.lambda_kappa));
    // |up up up> is index 0 of the computational basis.
    const double top = eff.h_eff.matrix()(0, 0).real();
    top_err = std::max(top_err, std::abs(top - hbar / sk * std::atan(1.5 * sk * w)));
    const Eigen::MatrixXcd hs = three_spin_hamiltonian(w, hbar).matrix();
    Eigen::MatrixXcd zsum = Eigen::MatrixXcd::Zero(8, 8);
    for (int i = 0; i < 3; ++i) zsum += embed(pauli::z(), i, 3);
    const Eigen::MatrixXcd zzz = kron({pauli::z(), pauli::z(), pauli::z()});
    const double e = 0.5 * hbar * w;
    const Eigen::MatrixXcd cube = 0.25 * e * e * e * (28.0 * zsum + 24.0 * zzz);
    cube_err = std::max(cube_err, (hs * hs * hs - cube).cwiseAbs().maxCoeff() / std::max(1.0, std::pow(3.0 * e, 3)));
    coeffs.rows.push_back({w, eff.omega_kappa, eff.lambda_kappa, eff.z_coefficients[0], eff.zzz_coefficient, top});
  }
  res.checks.push_back(make_check("z_projection_equals_omega_kappa", z_err, 1e-12,
                                  "coefficient on each Z_i is hbar w_k (no factor 1/2)"));
  res.checks.push_back(make_check("zzz_projection_equals_lambda_kappa", zzz_err, 1e-12));
  res.checks.push_back(make_check("top_eigenvalue", top_err, 1e-12));
  res.checks.push_back(make_check("odd_power_identity", cube_err, 1e-12, "relative to (3 hbar w0 / 2)^3"));

  const auto tiny = three_spin_effective(omega0, ClockParams(1e-14, 0.0, hbar));
  res.checks.push_back(make_check("zzz_vanishes_as_kappa_to_zero", std::abs(tiny.zzz_coefficient), 1e-8));

  const auto eff = three_spin_effective(omega0, clock);
  const double l = std::abs(eff.zzz_coefficient);
  if (!(l > 0.0)) throw UsageError("three-spin: omega0 = 0 gives no effective coupling");
  const int n_tau = int_param(cfg, "n_tau", 2);
  const auto psi0 = MultiSpinState::product({spins[0], spins[1], spins[2]});
  CsvTable evo{"three_spin_evolution.csv",
               {"tau", "lambda_kappa_tau", "entropy_1", "entropy_2", "entropy_3", "infidelity"}, {}};
  double worst_infidelity = 0.0, min_entropy = std::numeric_limits<double>::infinity(), norm_err = 0.0;
  for (int k = 0; k < n_tau; ++k) {
    // Open interval (0, pi) in |lambda_k| tau, cell midpoints.
    const double tau = (k + 0.5) / n_tau * kPi / l;
    const auto closed = three_spin_evolve(spins, omega0, clock, tau);
    const auto op = evolve_operator_route(three_spin_hamiltonian(omega0, hbar), psi0, Deformation(clock), tau);
    const double inf = 1.0 - fidelity(closed.amplitudes(), op.amplitudes());
    worst_infidelity = std::max(worst_infidelity, inf);
    norm_err = std::max(norm_err, std::abs(op.amplitudes().norm() - 1.0));
    std::array<double, 3> s{};
    for (int i = 0; i < 3; ++i) s[i] = entanglement_entropy(partial_trace(op, i));
    // lambda_k tau = pi/2 gives the product state -i (x)|-theta_i>; it is
    // checked separately below.
    if (std::abs(l * tau - 0.5 * kPi) > 1e-9) min_entropy = std::min({min_entropy, s[0], s[1], s[2]});
    evo.rows.push_back({tau, l * tau, s[0], s[1], s[2], inf});
  }
  res.checks.push_back(make_check("closed_form_vs_operator", worst_infidelity, 1e-10));
  res.checks.push_back(make_check("norm_preserved", norm_err, 1e-12));
  res.checks.push_back({"entropy_positive_inside_period", min_entropy > 0.0, min_entropy, 0.0,
                        "min single-spin entropy for 0 < |l_k| tau < pi, excluding |l_k| tau = pi/2"});

  const double t_half = 0.5 * kPi / l;
  const auto half = evolve_operator_route(three_spin_hamiltonian(omega0, hbar), psi0, Deformation(clock), t_half);
  double s_half = 0.0;
  for (int i = 0; i < 3; ++i) s_half = std::max(s_half, entanglement_entropy(partial_trace(half, i)));
  res.checks.push_back(make_check("product_state_at_half_period", s_half, 1e-10,
                                  "|l_k| tau = pi/2 returns a product state"));
  res.tables = {coeffs, evo};
  return res;
}

// --- free-packet ----------------------------------------------------------------

ExperimentResult run_free_packet(const ExperimentConfig& cfg) {
  const double hbar = param(cfg, "hbar");
  const double dp = param(cfg, "delta_p");
  const double p0 = param(cfg, "p0");
  const MomentumGridSpec grid{static_cast<std::size_t>(int_param(cfg, "grid_points", 16)),
                              param(cfg, "grid_half_width_sigmas")};
  ExperimentResult res;

  // Density snapshots (first preset).
  const double m_d = param(cfg, "density_mass");
  const Deformation def_d(param(cfg, "density_kappa"), hbar);
  const Deformation ref(0.0, hbar);
  const auto packet_d = gaussian_packet(p0, dp, m_d, hbar, grid);
  const auto xs = linspace(param(cfg, "x_min"), param(cfg, "x_max"), int_param(cfg, "n_x", 2));
  const Eigen::ArrayXd x_grid = Eigen::Map<const Eigen::ArrayXd>(xs.data(), xs.size());
  const auto snap_taus = linspace(0.0, param(cfg, "density_tau_max"), int_param(cfg, "n_density_tau", 1));
  CsvTable density{"free_packet_density.csv", {"tau", "x", "density", "density_0"}, {}};
  std::vector<Eigen::VectorXcd> psi_k(snap_taus.size()), psi_0(snap_taus.size());
  parallel_for(snap_taus.size(), [&](std::size_t i) {
    psi_k[i] = position_wavefunction(evolve_free(packet_d, def_d, snap_taus[i]), x_grid);
    psi_0[i] = position_wavefunction(evolve_free(packet_d, ref, snap_taus[i]), x_grid);
  });
  double analytic_err = 0.0;
  const double dx0 = hbar / (2.0 * dp);
  for (std::size_t i = 0; i < snap_taus.size(); ++i) {
    const double tau = snap_taus[i];
    const double var = dx0 * dx0 + tau * tau * dp * dp / (m_d * m_d);
    for (Eigen::Index j = 0; j < x_grid.size(); ++j) {
      const double x = x_grid[j];
      const double rho0 = std::norm(psi_0[i][j]);
      const double d = x - p0 * tau / m_d;
      analytic_err = std::max(analytic_err, std::abs(rho0 - std::exp(-d * d / (2.0 * var)) / std::sqrt(2.0 * kPi * var)));
      density.rows.push_back({tau, x, std::norm(psi_k[i][j]), rho0});
    }
  }
  res.checks.push_back(make_check("kappa0_density_vs_analytic_gaussian", analytic_err, 1e-10));

  // Velocity and spreading (second preset).
  const double m = param(cfg, "mass");
  const ClockParams clock(param(cfg, "kappa"), 0.0, hbar);
  const Deformation def(clock);
  const double vmax = v_max(m, clock);
  const auto p0s = linspace(param(cfg, "p0_sweep_min"), param(cfg, "p0_sweep_max"), int_param(cfg, "n_p0", 3));
  std::vector<double> v_k(p0s.size()), v_0(p0s.size());
  parallel_for(p0s.size(), [&](std::size_t i) {
    const auto pk = gaussian_packet(p0s[i], dp, m, hbar, grid);
    v_k[i] = velocity_expectation(pk, def);
    v_0[i] = velocity_expectation(pk, ref);
  });
  CsvTable velocity_t{"free_packet_velocity.csv", {"p0", "v_expect", "v_expect_0", "v_max"}, {}};
  for (std::size_t i = 0; i < p0s.size(); ++i) velocity_t.rows.push_back({p0s[i], v_k[i], v_0[i], vmax});
  const auto peak = static_cast<std::size_t>(std::max_element(v_k.begin(), v_k.end()) - v_k.begin());
  bool decays = peak > 0 && peak + 1 < v_k.size();
  for (std::size_t i = peak + 1; i < v_k.size(); ++i) decays = decays && v_k[i] < v_k[i - 1];
  const double tail_ratio = v_k.back() / v_k[peak];
  res.checks.push_back({"velocity_interior_maximum_then_decay", decays && tail_ratio < 0.05, tail_ratio, 0.05,
                        "v(p0_max) / max v; peak must be interior and the tail strictly decreasing"});
  res.checks.push_back(strict_below("velocity_below_v_max", *std::max_element(v_k.begin(), v_k.end()), vmax));

  const auto packet = gaussian_packet(p0, dp, m, hbar, grid);
  const auto coeff = spreading_coefficients(packet, def);
  const auto coeff0 = spreading_coefficients(packet, ref);
  const double v_mean = velocity_expectation(packet, def);
  const auto taus = linspace(0.0, param(cfg, "tau_max"), int_param(cfg, "n_tau", 2));
  std::vector<PositionMoments> mk(taus.size()), m0(taus.size());
  std::vector<double> norm_err(taus.size()), p_err(taus.size()), v_err(taus.size());
  parallel_for(taus.size(), [&](std::size_t i) {
    const auto evolved = evolve_free(packet, def, taus[i]);
    mk[i] = position_moments(evolved);
    m0[i] = position_moments(packet, ref, taus[i]);
    norm_err[i] = std::abs(evolved.norm_sq() - packet.norm_sq());
    p_err[i] = std::abs(momentum_expectation(evolved) - momentum_expectation(packet));
    v_err[i] = std::abs(velocity_expectation(evolved, def) - v_mean);
  });
  CsvTable spread{"free_packet_spread.csv",
                  {"tau", "delta_x", "delta_x_0", "delta_x_closed_form", "mean_x", "mean_x_0"}, {}};
  double lin = 0.0, closed = 0.0, simple = 0.0, textbook = 0.0;
  double slower = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double tau = taus[i];
    const double cf = spreading_closed_form(coeff, tau);
    lin = std::max(lin, std::abs(mk[i].mean_x - mk[0].mean_x - tau * v_mean));
    closed = std::max(closed, std::abs(mk[i].delta_x - cf));
    simple = std::max(simple, std::abs(cf - std::sqrt(coeff.delta_x * coeff.delta_x +
                                                      tau * tau * coeff.delta_v * coeff.delta_v)) / cf);
    const double tb = std::sqrt(dx0 * dx0 + tau * tau * dp * dp / (m * m));
    textbook = std::max({textbook, std::abs(m0[i].delta_x / tb - 1.0),
                         std::abs(spreading_closed_form(coeff0, tau) / tb - 1.0)});
    if (tau > 0.0) slower = std::max(slower, mk[i].delta_x - m0[i].delta_x);
    spread.rows.push_back({tau, mk[i].delta_x, m0[i].delta_x, cf, mk[i].mean_x, m0[i].mean_x});
  }
  res.checks.push_back(make_check("norm_preserved", max_abs(norm_err), 1e-12));
  res.checks.push_back(make_check("momentum_conserved", max_abs(p_err), 1e-12));
  res.checks.push_back(make_check("velocity_conserved", max_abs(v_err), 1e-12));
  res.checks.push_back(make_check("mean_x_linear_in_tau", lin, 1e-8, "max |<x>(t) - <x>(0) - t <v>|"));
  res.checks.push_back(make_check("delta_x_vs_closed_form", closed, 1e-6));
  res.checks.push_back(make_check("real_f_simplified_form", simple, 1e-10));
  res.checks.push_back(make_check("kappa0_textbook_spread", textbook, 1e-6));
  if (taus.size() > 1) res.checks.push_back(strict_below("slower_spreading_than_kappa0", slower, 0.0));
  res.tables = {density, velocity_t, spread};
  return res;
}

// --- oscillator -----------------------------------------------------------------

ExperimentResult run_oscillator(const ExperimentConfig& cfg) {
  const OscillatorParams op{param(cfg, "mass"), param(cfg, "omega"), param(cfg, "hbar")};
  const Deformation def(param(cfg, "kappa"), op.hbar);
  const Deformation ref(0.0, op.hbar);
  const double x0 = param(cfg, "x0");
  const double p0 = param(cfg, "p0");
  const int n_max = int_param(cfg, "n_max", 0);
  ExperimentResult res;

  const auto fock = coherent_coefficients(x0, p0, op, n_max);
  const auto alpha = coherent_alpha(x0, p0, op);
  res.checks.push_back(make_check("fock_norm", std::abs(fock.norm_sq() - 1.0), 1e-12));
  res.checks.push_back(make_check("mean_number", std::abs(fock.mean_number() - std::norm(alpha)), 1e-10));

  const auto revival = oscillator_evolve(fock, ref, 2.0 * kPi / op.omega);
  res.checks.push_back(make_check("kappa0_revival", 1.0 - fock_fidelity(fock, revival), 1e-10));

  const auto xs = linspace(param(cfg, "x_min"), param(cfg, "x_max"), int_param(cfg, "n_x", 2));
  const Eigen::ArrayXd x_grid = Eigen::Map<const Eigen::ArrayXd>(xs.data(), xs.size());
  const double step = param(cfg, "tau_step");
  const int n_snap = int_param(cfg, "n_snapshots", 1);
  std::vector<PositionDensity> dk(n_snap), d0(n_snap);
  std::vector<CoherentFit> fits(n_snap);
  std::vector<double> pop_err(n_snap);
  parallel_for(n_snap, [&](std::size_t i) {
    const double tau = step * static_cast<double>(i);
    const auto ek = oscillator_evolve(fock, def, tau);
    const auto e0 = oscillator_evolve(fock, ref, tau);
    dk[i] = oscillator_position_density(ek, x_grid);
    d0[i] = oscillator_position_density(e0, x_grid);
    fits[i] = best_coherent_overlap(ek, alpha * std::polar(1.0, -op.omega * tau));
    pop_err[i] = (ek.coefficients().cwiseAbs2() - fock.coefficients().cwiseAbs2()).cwiseAbs().maxCoeff();
  });

  CsvTable density{"oscillator_density.csv", {"tau", "x", "density", "density_0"}, {}};
  CsvTable coherence{"oscillator_coherence.csv", {"tau", "best_fidelity", "beta_re", "beta_im"}, {}};
  double worst_fit = 0.0, integral_excess = -1.0, negative = 0.0;
  const double hx = xs.size() > 1 ? xs[1] - xs[0] : 0.0;
  for (int i = 0; i < n_snap; ++i) {
    const double tau = step * i;
    double integral = 0.0;
    for (Eigen::Index j = 0; j < x_grid.size(); ++j) {
      density.rows.push_back({tau, x_grid[j], dk[i].density[j], d0[i].density[j]});
      const double w = (j == 0 || j + 1 == x_grid.size()) ? 0.5 * hx : hx;
      integral += w * dk[i].density[j];
      negative = std::max(negative, -dk[i].density[j]);
    }
    integral_excess = std::max(integral_excess, integral - 1.0);
    coherence.rows.push_back({tau, fits[i].fidelity, fits[i].beta.real(), fits[i].beta.imag()});
    if (tau > 0.0 && def.deformed()) worst_fit = std::max(worst_fit, fits[i].fidelity);
  }
  res.checks.push_back(make_check("populations_constant", max_abs(pop_err), 1e-14));
  res.checks.push_back(make_check("density_nonnegative", negative, 0.0));
  res.checks.push_back(make_check("density_integral_at_most_one", integral_excess, 1e-6));
  if (def.deformed() && n_snap > 1) {
    res.checks.push_back(strict_below("coherence_lost_for_tau_gt_0", worst_fit, 1.0 - 1e-6,
                                      "max best coherent overlap over snapshots with tau > 0"));
  }

  // tau = 0 density is the Gaussian centred at x0 (real alpha).
  double g_err = 0.0;
  if (n_snap > 0 && p0 == 0.0) {
    const double a = op.mass * op.omega / op.hbar;
    for (Eigen::Index j = 0; j < x_grid.size(); ++j) {
      const double d = x_grid[j] - x0;
      g_err = std::max(g_err, std::abs(dk[0].density[j] - std::sqrt(a / kPi) * std::exp(-a * d * d)));
    }
    res.checks.push_back(make_check("initial_density_gaussian", g_err, 1e-10));
  }
  res.tables = {density, coherence};
  return res;
}

// --- transforms-verify ----------------------------------------------------------

struct TransformResiduals {
  double lattice = 0, sinc_off = 0, discrete_round = 0, continuous_round = 0, lattice_change = 0, frame = 0,
         gup = 0, dfa = 0;
};

ExperimentResult run_transforms_verify(const ExperimentConfig& cfg) {
  const ClockParams clock(param(cfg, "kappa"), param(cfg, "lambda"));
  const ClockParams shifted = clock.with_lambda(param(cfg, "lambda_shifted"));
  const auto grid = make_frequency_grid(clock, static_cast<std::size_t>(int_param(cfg, "grid_points", 64)));
  const long n = int_param(cfg, "n_range", 1);
  const long n_dfa = int_param(cfg, "n_range_frequency_operator", 1);
  const int n_states = int_param(cfg, "n_states", 1);
  const DiscreteFrequencyOptions dfa_opts{int_param(cfg, "frequency_operator_order", 1), 1e-8};
  ExperimentResult res;

  std::vector<TransformResiduals> out(n_states);
  parallel_for(n_states, [&](std::size_t s) {
    auto rng = stream(cfg.seed, s);
    const auto psi = random_smooth_state(grid, rng);
    auto& r = out[s];
    const auto seq = freq_to_discrete(psi, -n, n, clock);
    for (long k = -n; k <= n; ++k) {
      r.lattice = std::max(r.lattice, std::abs(seq.at(k) - freq_to_continuous(psi, clock.lattice_time(k))));
    }
    for (int j = 0; j < 8; ++j) {
      const double tau = (2.0 * uniform01(rng) - 1.0) * 20.0 * clock.lattice_spacing();
      r.sinc_off = std::max(r.sinc_off, std::abs(sinc_reconstruct(seq, tau) - freq_to_continuous(psi, tau)));
    }
    // Round trips at interior grid points.
    const auto samples = tabulate_continuous(psi, clock);
    const auto& om = psi.grid().omega();
    for (Eigen::Index j = om.size() / 8; j < 7 * om.size() / 8; j += om.size() / 64) {
      r.discrete_round = std::max(r.discrete_round, std::abs(discrete_to_freq(seq, om[j]).value - psi.values()[j]));
      r.continuous_round =
          std::max(r.continuous_round, std::abs(continuous_to_freq(samples, om[j], clock).value - psi.values()[j]));
    }
    const auto moved = resample_lattice(seq, shifted.lambda(), -n / 2, n / 2);
    const auto direct = freq_to_discrete(psi, -n / 2, n / 2, shifted);
    r.lattice_change = (moved.values() - direct.values()).cwiseAbs().maxCoeff();
    const auto wide = freq_to_discrete(psi, -4 * n, 4 * n, clock);
    const auto wide_shifted = freq_to_discrete(psi, -4 * n, 4 * n, shifted);
    r.frame = std::abs(wide_shifted.norm_sq() / wide.norm_sq() - 1.0);
    const auto st = uncertainty_stats(psi);
    r.gup = gup_bound(st.delta_omega, st.mean_omega, clock.kappa()) - st.delta_t;

    // Frequency operator: narrow state so that |sqrt(k) w| stays inside the
    // convergence disc of the symbol series.
    SmoothBump narrow{std::polar(1.0, 2.0 * kPi * uniform01(rng)), 0.4 * uniform01(rng) - 0.2,
                      0.08 + 0.04 * uniform01(rng), 20.0 * uniform01(rng) - 10.0};
    const auto phi = make_smooth_state(grid, {narrow}).normalized();
    const auto d = discrete_frequency_apply(freq_to_discrete(phi, -n_dfa, n_dfa, clock), dfa_opts);
    const auto ref = freq_to_discrete(phi.times_omega(), d.sequence.n_min(), d.sequence.n_max(), clock);
    r.dfa = (d.sequence.values() - ref.values()).cwiseAbs().maxCoeff() /
            std::max(ref.values().cwiseAbs().maxCoeff(), 1e-300);
  });

  CsvTable table{"transforms_verify.csv",
                 {"state", "lattice_samples", "sinc_off_lattice", "discrete_round_trip", "continuous_round_trip",
                  "lattice_change", "frame_stability", "gup_violation", "frequency_operator"},
                 {}};
  TransformResiduals worst;
  worst.gup = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_states; ++s) {
    const auto& r = out[s];
    table.rows.push_back({double(s), r.lattice, r.sinc_off, r.discrete_round, r.continuous_round, r.lattice_change,
                          r.frame, r.gup, r.dfa});
    worst.lattice = std::max(worst.lattice, r.lattice);
    worst.sinc_off = std::max(worst.sinc_off, r.sinc_off);
    worst.discrete_round = std::max(worst.discrete_round, r.discrete_round);
    worst.continuous_round = std::max(worst.continuous_round, r.continuous_round);
    worst.lattice_change = std::max(worst.lattice_change, r.lattice_change);
    worst.frame = std::max(worst.frame, r.frame);
    worst.gup = std::max(worst.gup, r.gup);
    worst.dfa = std::max(worst.dfa, r.dfa);
  }
  res.checks.push_back(make_check("discrete_equals_lattice_samples", worst.lattice, 1e-12));
  res.checks.push_back(make_check("sinc_reconstruction_off_lattice", worst.sinc_off, 1e-5));
  res.checks.push_back(make_check("discrete_round_trip", worst.discrete_round, 1e-5));
  res.checks.push_back(make_check("continuous_round_trip", worst.continuous_round, 1e-6));
  res.checks.push_back(make_check("lattice_change", worst.lattice_change, 1e-5));
  res.checks.push_back(make_check("frame_stability", worst.frame, 1e-4));
  res.checks.push_back(make_check("gup_random_states", worst.gup, 1e-8));
  res.checks.push_back(make_check("frequency_operator_vs_multiplication", worst.dfa, 1e-6, "relative max-entry"));
  res.tables = {table};
  return res;
}

// --- theorem-a1 -----------------------------------------------------------------

ExperimentResult run_theorem_a1(const ExperimentConfig& cfg) {
  const int n_cases = int_param(cfg, "n_cases", 1);
  std::vector<std::array<double, 4>> rows(n_cases);
  parallel_for(n_cases, [&](std::size_t i) {
    auto rng = stream(cfg.seed, i);
    const auto c = random_commuting_pair(rng);
    rows[i] = {double(c.a.dim()),
               verify_function_transfer(c.a, c.b, c.psi, [](double x) { return std::atan(x); }),
               verify_function_transfer(c.a, c.b, c.psi, [](double x) { return std::tanh(x); }),
               verify_function_transfer(c.a, c.b, c.psi, [](double x) { return x / (1.0 + x * x); })};
  });
  ExperimentResult res;
  CsvTable table{"theorem_a1.csv", {"case", "dim", "residual_arctan", "residual_tanh", "residual_rational"}, {}};
  std::array<double, 3> worst{};
  for (int i = 0; i < n_cases; ++i) {
    table.rows.push_back({double(i), rows[i][0], rows[i][1], rows[i][2], rows[i][3]});
    for (int k = 0; k < 3; ++k) worst[k] = std::max(worst[k], rows[i][k + 1]);
  }
  res.checks.push_back(make_check("transfer_arctan", worst[0], 1e-9));
  res.checks.push_back(make_check("transfer_tanh", worst[1], 1e-9));
  res.checks.push_back(make_check("transfer_rational", worst[2], 1e-9));
  res.tables = {table};
  return res;
}

const std::vector<Experiment>& registry() {
  static const std::vector<Experiment> experiments = {
      {{"gup-surface",
        "Minimal time uncertainty over (delta_omega, <Omega>); ML saturation and random-state GUP checks",
        {{"kappa", 1.0},
         {"delta_omega_min", 0.05},
         {"delta_omega_max", 4.0},
         {"n_delta_omega", 80},
         {"mean_omega_max", 2.0},
         {"n_mean_omega", 41},
         {"n_ml_states", 5},
         {"n_random_states", 20},
         {"grid_points", 4096}}},
       run_gup_surface},
      {{"spin-precession",
        "Single-spin precession frequency from the phase of <sigma_+>, and the frequency cap",
        {{"kappa", 1.0},
         {"hbar", 1.0},
         {"omega0", 2.0},
         {"theta", kPi / 3.0},
         {"phi", 0.0},
         {"tau_max", 20.0},
         {"n_tau", 401},
         {"omega0_sweep_min", 1e-3},
         {"omega0_sweep_max", 1e12},
         {"n_omega0", 151}}},
       run_spin_precession},
      {{"two-spin-entropy",
        "Entanglement entropy of two XY-coupled spins, kappa > 0 against kappa = 0",
        {{"theta", kPi / 4.0},
         {"omega0", 1.0},
         {"lambda", 10.0},
         {"hbar", 1.0},
         {"kappa", 0.01},
         {"k_b", 1.0},
         {"tau_max", 2.0},
         {"n_tau", 1000},
         {"precession_omega0_max", 10.0},
         {"n_precession", 41}}},
       run_two_spin_entropy},
      {{"three-spin",
        "Effective three-spin Hamiltonian: Pauli projections, closed-form evolution, induced entanglement",
        {{"omega0", 2.0},
         {"kappa", 1.0},
         {"hbar", 1.0},
         {"theta1", kPi / 3.0},
         {"phi1", 0.0},
         {"theta2", kPi / 4.0},
         {"phi2", 0.5},
         {"theta3", kPi / 2.0},
         {"phi3", 1.0},
         {"n_tau", 400},
         {"omega0_sweep_min", 0.1},
         {"omega0_sweep_max", 10.0},
         {"n_omega0", 50}}},
       run_three_spin},
      {{"free-packet",
        "Gaussian packet: density snapshots, <v>(p0) and spreading, kappa > 0 against kappa = 0",
        {{"hbar", 1.0},
         {"delta_p", 1.0 / std::numbers::sqrt2},
         {"p0", 3.0},
         {"grid_points", 8192},
         {"grid_half_width_sigmas", 12.0},
         {"density_mass", 1.0},
         {"density_kappa", 0.005},
         {"density_tau_max", 3.0},
         {"n_density_tau", 4},
         {"x_min", -6.0},
         {"x_max", 14.0},
         {"n_x", 401},
         {"mass", 2.0},
         {"kappa", 0.1},
         {"p0_sweep_min", 0.0},
         {"p0_sweep_max", 20.0},
         {"n_p0", 201},
         {"tau_max", 4.5},
         {"n_tau", 10}}},
       run_free_packet},
      {{"oscillator",
        "Coherent state of the harmonic oscillator: density snapshots and loss of coherence",
        {{"x0", 1.0},
         {"p0", 0.0},
         {"mass", 1.0},
         {"omega", 2.0 * kPi / 3.0},
         {"hbar", 1.0},
         {"kappa", 0.01},
         {"n_max", 40},
         {"tau_step", 1.0},
         {"n_snapshots", 8},
         {"x_min", -4.0},
         {"x_max", 4.0},
         {"n_x", 401}}},
       run_oscillator},
      {{"transforms-verify",
        "Frequency / continuous / discrete transforms on seeded random smooth states",
        {{"kappa", 0.01},
         {"lambda", 0.3},
         {"lambda_shifted", 0.75},
         {"n_states", 10},
         {"n_range", 64},
         {"n_range_frequency_operator", 150},
         {"frequency_operator_order", 61},
         {"grid_points", 4096}}},
       run_transforms_verify},
      {{"theorem-a1",
        "Function transfer for commuting pairs with shared action on a vector",
        {{"n_cases", 50}}},
       run_theorem_a1},
  };
  return experiments;
}

const Experiment& find(const std::string& name) {
  for (const auto& e : registry()) {
    if (e.info.name == name) return e;
  }
  throw UsageError("unknown experiment '" + name + "' (see 'mintime-qm list')");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) {
    throw UsageError("parameter '" + key + "': '" + t + "' is not a number");
  }
  if (!std::isfinite(v)) throw UsageError("parameter '" + key + "' must be finite");
  return v;
}

}  // namespace

const std::vector<ExperimentInfo>& experiment_catalog() {
  static const std::vector<ExperimentInfo> infos = [] {
    std::vector<ExperimentInfo> out;
    for (const auto& e : registry()) out.push_back(e.info);
    return out;
  }();
  return infos;
}

const ExperimentInfo& find_experiment(const std::string& name) { return find(name).info; }

ExperimentConfig make_config(const std::string& experiment, const ParamMap& overrides,
                             std::filesystem::path output_dir, std::uint64_t seed) {
  const auto& info = find_experiment(experiment);
  ExperimentConfig cfg{experiment, info.defaults, std::move(output_dir), seed};
  for (const auto& [key, value] : overrides) {
    const auto it = cfg.parameters.find(key);
    if (it == cfg.parameters.end()) {
      throw UsageError("unknown parameter '" + key + "' for experiment '" + experiment + "'");
    }
    if (!std::isfinite(value)) throw UsageError("parameter '" + key + "' must be finite");
    it->second = value;
  }
  return cfg;
}

std::pair<std::string, double> parse_key_value(const std::string& item) {
  const auto eq = item.find('=');
  if (eq == std::string::npos) throw UsageError("expected key=value, got '" + item + "'");
  const std::string key = trim(item.substr(0, eq));
  if (key.empty()) throw UsageError("empty key in '" + item + "'");
  return {key, parse_number(item.substr(eq + 1), key)};
}

ParamMap parse_key_value_text(const std::string& text, const std::string& origin) {
  ParamMap out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      auto [key, value] = parse_key_value(line);
      if (!out.emplace(key, value).second) throw UsageError("duplicate key '" + key + "'");
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

ParamMap parse_key_value_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_key_value_text(buf.str(), path.string());
}

CheckResult make_check(std::string name, double residual, double tolerance, std::string note) {
  return {std::move(name), residual <= tolerance, residual, tolerance, std::move(note)};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

std::string format_csv(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += table.columns[i];
  }
  out += '\n';
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.columns.size()) {
      throw PreconditionError(table.file_name + ": row " + std::to_string(r) + " has the wrong number of columns");
    }
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (!std::isfinite(row[i])) {
        throw NumericalError(table.file_name + ": non-finite value in column '" + table.columns[i] + "', row " +
                                 std::to_string(r),
                             row[i]);
      }
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  const auto& e = find(config.experiment);
  for (const auto& [key, value] : config.parameters) {
    if (!e.info.defaults.count(key)) throw UsageError("unknown parameter '" + key + "'");
    if (!std::isfinite(value)) throw UsageError("parameter '" + key + "' must be finite");
  }
  try {
    return e.body(config);
  } catch (const DomainError& ex) {
    throw UsageError(ex.what());
  }
}

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["experiment"] = m.experiment;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  j["parameters"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : m.parameters) j["parameters"][k] = v;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : m.checks) {
    nlohmann::ordered_json cj;
    cj["name"] = c.name;
    cj["passed"] = c.passed;
    // JSON has no NaN / inf; store them as strings.
    if (std::isfinite(c.residual)) {
      cj["residual"] = c.residual;
    } else {
      cj["residual"] = format_double(c.residual);
    }
    cj["tolerance"] = c.tolerance;
    if (!c.note.empty()) cj["note"] = c.note;
    j["checks"].push_back(cj);
  }
  j["outputs"] = m.outputs;
  j["passed"] = m.passed;
  return j.dump(2) + "\n";
}

RunManifest run(const ExperimentConfig& config) {
  RunManifest m;
  m.experiment = config.experiment;
  m.seed = config.seed;
  m.parameters = config.parameters;
  auto result = run_experiment(config);
  m.checks = result.checks;

  std::filesystem::create_directories(config.output_dir);
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& t : result.tables) {
    try {
      files.emplace_back(t.file_name, format_csv(t));
    } catch (const NumericalError& e) {
      m.checks.push_back({"emit:" + t.file_name, false, e.residual(), 0.0, e.what()});
    }
  }
  for (const auto& [name, text] : files) {
    std::ofstream out(config.output_dir / name, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + (config.output_dir / name).string());
    m.outputs.push_back(name);
  }
  m.passed = std::all_of(m.checks.begin(), m.checks.end(), [](const CheckResult& c) { return c.passed; });
  std::ofstream mf(config.output_dir / "manifest.json", std::ios::binary);
  mf << manifest_json(m);
  if (!mf) throw std::runtime_error("cannot write manifest.json");
  return m;
}

unsigned sweep_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MINTIME_QM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(sweep_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

FrequencyWavefunction random_smooth_state(FrequencyGridPtr grid, std::mt19937_64& rng) {
  std::vector<SmoothBump> bumps;
  const int n = uniform01(rng) < 0.5 ? 1 : 2;
  for (int i = 0; i < n; ++i) {
    const double amp = 0.5 + uniform01(rng);
    const double phase = 2.0 * kPi * uniform01(rng);
    const double center = uniform01(rng) - 0.5;
    const double width = 0.15 + 0.15 * uniform01(rng);
    const double slope = 30.0 * uniform01(rng) - 15.0;
    bumps.push_back({std::polar(amp, phase), center, width, slope});
  }
  return make_smooth_state(std::move(grid), bumps).normalized();
}

CommutingPairCase random_commuting_pair(std::mt19937_64& rng) {
  const int dim = 3 + static_cast<int>(uniform01(rng) * 6.0);  // 3..8
  auto u = [&] { return 2.0 * uniform01(rng) - 1.0; };
  Eigen::MatrixXcd m(dim, dim);
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) m(i, j) = {u(), u()};
  }
  Eigen::MatrixXcd c = 0.5 * (m + m.adjoint());
  const HermitianOperatord c_op(c);
  const auto dec = diagonalize(c_op);
  c /= dec.spectral_radius();
  const auto dec_c = diagonalize(HermitianOperatord(c));

  auto poly = [&](const std::array<double, 4>& k) {
    // Horner: k0 + C (k1 + C (k2 + C k3)).
    Eigen::MatrixXcd acc = k[3] * Eigen::MatrixXcd::Identity(dim, dim);
    for (int d = 2; d >= 0; --d) acc = (c * acc).eval() + k[d] * Eigen::MatrixXcd::Identity(dim, dim);
    return acc;
  };
  const std::array<double, 4> p{u(), u(), u(), u()};
  const std::array<double, 4> r{u(), u(), u(), u()};
  const int j = static_cast<int>(uniform01(rng) * dim);
  const double cj = dec_c.eigenvalues[j];
  const Eigen::MatrixXcd a = poly(p);
  const Eigen::MatrixXcd b = a + (c - cj * Eigen::MatrixXcd::Identity(dim, dim)) * poly(r);
  // Exact products of Hermitian commuting factors are Hermitian; symmetrize
  // away the rounding.
  return {HermitianOperatord(Eigen::MatrixXcd(0.5 * (a + a.adjoint()))),
          HermitianOperatord(Eigen::MatrixXcd(0.5 * (b + b.adjoint()))), dec_c.eigenvectors.col(j)};
}

}  // namespace mintime

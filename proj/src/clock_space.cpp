#include "mintime/clock_space.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <utility>

#include "mintime/errors.hpp"

namespace mintime {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr complexd kI{0.0, 1.0};

void require_same_kappa(const FrequencyGrid& grid, const ClockParams& clock) {
  if (std::abs(grid.kappa() - clock.kappa()) > 1e-15 * clock.kappa()) {
    throw PreconditionError("frequency grid was built for a different kappa");
  }
}

// Fourth-order central first derivative on a uniform grid. Outside the grid
// the profile is continued as an odd reflection about x = +-pi, where states
// in the domain of the time operator vanish.
Eigen::ArrayXcd derivative_x(const Eigen::ArrayXcd& f, double h) {
  const Eigen::Index n = f.size();
  auto at = [&](Eigen::Index j) -> complexd {
    if (j < 0) return -f[-j - 1];
    if (j >= n) return -f[2 * n - j - 1];
    return f[j];
  };
  Eigen::ArrayXcd d(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    d[j] = (-at(j + 2) + 8.0 * at(j + 1) - 8.0 * at(j - 1) + at(j - 2)) / (12.0 * h);
  }
  return d;
}

}  // namespace

// --- FrequencyGrid ----------------------------------------------------------

FrequencyGrid::FrequencyGrid(const ClockParams& clock, std::size_t n_points) : kappa_(clock.kappa()) {
  if (n_points < 16) throw PreconditionError("FrequencyGrid: need at least 16 points");
  const auto n = static_cast<Eigen::Index>(n_points);
  const double sk = std::sqrt(kappa_);
  dx_ = 2.0 * kPi / static_cast<double>(n_points);
  x_ = Eigen::ArrayXd::LinSpaced(n, -kPi + 0.5 * dx_, kPi - 0.5 * dx_);
  omega_ = (0.5 * x_).tan() / sk;
  weights_ = Eigen::ArrayXd::Constant(n, dx_ / (2.0 * sk));
}

FrequencyGridPtr make_frequency_grid(const ClockParams& clock, std::size_t n_points) {
  return std::make_shared<const FrequencyGrid>(clock, n_points);
}

// --- FrequencyWavefunction --------------------------------------------------

FrequencyWavefunction::FrequencyWavefunction(FrequencyGridPtr grid, Eigen::ArrayXcd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (!grid_) throw PreconditionError("FrequencyWavefunction: null grid");
  if (static_cast<std::size_t>(values_.size()) != grid_->size()) {
    throw PreconditionError("FrequencyWavefunction: value count does not match grid");
  }
  norm_sq_ = (grid_->weights() * values_.abs2()).sum();
  if (!std::isfinite(norm_sq_)) throw DomainError("FrequencyWavefunction: norm is not finite");
}

FrequencyWavefunction FrequencyWavefunction::from_omega(FrequencyGridPtr grid,
                                                        const std::function<complexd(double)>& psi) {
  Eigen::ArrayXcd v(static_cast<Eigen::Index>(grid->size()));
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = psi(grid->omega()[j]);
  return {std::move(grid), std::move(v)};
}

FrequencyWavefunction FrequencyWavefunction::from_x(FrequencyGridPtr grid,
                                                    const std::function<complexd(double)>& profile) {
  Eigen::ArrayXcd v(static_cast<Eigen::Index>(grid->size()));
  for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = profile(grid->x()[j]);
  return {std::move(grid), std::move(v)};
}

FrequencyWavefunction FrequencyWavefunction::zero(FrequencyGridPtr grid) {
  const auto n = static_cast<Eigen::Index>(grid->size());
  return {std::move(grid), Eigen::ArrayXcd::Zero(n)};
}

FrequencyWavefunction FrequencyWavefunction::normalized() const {
  if (!(norm_sq_ > 0.0)) throw DomainError("cannot normalize the zero state");
  return {grid_, values_ / std::sqrt(norm_sq_)};
}

complexd FrequencyWavefunction::inner(const FrequencyWavefunction& other) const {
  if (grid_ != other.grid_ && grid_->size() != other.grid_->size()) {
    throw PreconditionError("inner: states live on different grids");
  }
  return (grid_->weights().cast<complexd>() * values_.conjugate() * other.values_).sum();
}

FrequencyWavefunction FrequencyWavefunction::times_omega() const {
  return {grid_, values_ * grid_->omega().cast<complexd>()};
}

FrequencyWavefunction FrequencyWavefunction::operator+(const FrequencyWavefunction& rhs) const {
  if (grid_->size() != rhs.grid_->size()) throw PreconditionError("operator+: grid mismatch");
  return {grid_, values_ + rhs.values_};
}

FrequencyWavefunction FrequencyWavefunction::operator*(complexd s) const { return {grid_, values_ * s}; }

// --- TimeSampleSequence -----------------------------------------------------

TimeSampleSequence::TimeSampleSequence(long n_min, Eigen::VectorXcd values, ClockParams clock)
    : n_min_(n_min), values_(std::move(values)), clock_(clock) {
  if (values_.size() < 3) {
    throw PreconditionError("TimeSampleSequence: need at least 3 samples");
  }
}

complexd TimeSampleSequence::at(long n) const {
  if (!contains(n)) {
    throw RangeError("TimeSampleSequence: index " + std::to_string(n) + " outside [" + std::to_string(n_min()) +
                     ", " + std::to_string(n_max()) + "]");
  }
  return values_[n - n_min_];
}

double TimeSampleSequence::edge_magnitude() const noexcept {
  return std::abs(values_[0]) + std::abs(values_[values_.size() - 1]);
}

// --- uncertainty relation ---------------------------------------------------

double gup_bound(double delta_omega, double mean_omega, double kappa) {
  if (!(delta_omega > 0.0)) throw DomainError("gup_bound: delta_omega must be > 0");
  if (kappa < 0.0) throw DomainError("gup_bound: kappa must be >= 0");
  return (1.0 + kappa * delta_omega * delta_omega + kappa * mean_omega * mean_omega) / (2.0 * delta_omega);
}

double gup_minimum(double mean_omega, double kappa) {
  if (kappa < 0.0) throw DomainError("gup_minimum: kappa must be >= 0");
  return std::sqrt(kappa * (1.0 + kappa * mean_omega * mean_omega));
}

// --- maximal localization ---------------------------------------------------

FrequencyWavefunction maximal_localization_state(double tau, const ClockParams& clock, FrequencyGridPtr grid) {
  require_same_kappa(*grid, clock);
  const double sk = clock.delta_t0();
  const double amp = std::sqrt(2.0 * sk / kPi);
  return FrequencyWavefunction::from_omega(std::move(grid), [=](double w) {
    const double phase = -tau * std::atan(sk * w) / sk;
    return amp / std::sqrt(1.0 + sk * sk * w * w) * std::polar(1.0, phase);
  });
}

double sinc(double u) {
  if (u == 0.0) return 1.0;
  if (std::abs(u) < 1e-4) {
    const double a = kPi * u;
    const double a2 = a * a;
    return 1.0 - a2 / 6.0 + a2 * a2 / 120.0;
  }
  const double r = std::round(u);
  const double d = u - r;
  if (d == 0.0) return 0.0;
  const double s = (static_cast<long long>(r) % 2 == 0 ? 1.0 : -1.0) * std::sin(kPi * d);
  return s / (kPi * u);
}

double ml_overlap(double tau, double tau_prime, const ClockParams& clock) {
  const double u = (tau - tau_prime) / clock.lattice_spacing();
  constexpr double kNear = 1e-4;
  if (std::abs(u) < kNear) return sinc(u) / (1.0 - u * u);
  if (std::abs(u - 1.0) < kNear) return sinc(u - 1.0) / (u * (1.0 + u));
  if (std::abs(u + 1.0) < kNear) return -sinc(u + 1.0) / (u * (1.0 - u));
  return sinc(u) / ((1.0 - u) * (1.0 + u));
}

// --- transforms -------------------------------------------------------------

complexd freq_to_continuous(const FrequencyWavefunction& psi, double tau) {
  const auto& g = psi.grid();
  const double sk = std::sqrt(g.kappa());
  const double amp = std::sqrt(2.0 * sk / kPi);
  complexd acc{0.0, 0.0};
  for (Eigen::Index j = 0; j < psi.values().size(); ++j) {
    const double w = g.omega()[j];
    const double one_plus = 1.0 + g.kappa() * w * w;
    // dw = (1 + kappa w^2) * (measure weight)
    const double d_omega = g.weights()[j] * one_plus;
    const double phase = tau * std::atan(sk * w) / sk;
    acc += d_omega * std::pow(one_plus, -1.5) * std::polar(1.0, phase) * psi.values()[j];
  }
  return amp * acc;
}

ContinuousSamples tabulate_continuous(const std::function<complexd(double)>& psi_tau, const ClockParams& clock,
                                      const ContinuousWindow& window) {
  if (window.samples_per_cell < 1 || !(window.half_width_cells > 0.0)) {
    throw PreconditionError("tabulate_continuous: invalid window");
  }
  ContinuousSamples s;
  const double cell = clock.lattice_spacing();
  s.step = cell / window.samples_per_cell;
  const auto half = static_cast<long>(std::ceil(window.half_width_cells * window.samples_per_cell));
  s.tau_min = -static_cast<double>(half) * s.step;
  s.values.resize(2 * half + 1);
  for (long k = 0; k < 2 * half + 1; ++k) {
    s.values[k] = psi_tau(s.tau_min + static_cast<double>(k) * s.step);
  }
  return s;
}

ContinuousSamples tabulate_continuous(const FrequencyWavefunction& psi, const ClockParams& clock,
                                      const ContinuousWindow& window) {
  require_same_kappa(psi.grid(), clock);
  return tabulate_continuous([&psi](double tau) { return freq_to_continuous(psi, tau); }, clock, window);
}

TransformValue continuous_to_freq(const ContinuousSamples& samples, double omega, const ClockParams& clock,
                                  double tail_tolerance) {
  const double sk = clock.delta_t0();
  const double pref = std::sqrt(1.0 + clock.kappa() * omega * omega) / std::sqrt(8.0 * kPi * sk);
  const double rate = std::atan(sk * omega) / sk;
  complexd acc{0.0, 0.0};
  const auto n = samples.values.size();
  for (Eigen::Index k = 0; k < n; ++k) {
    const double tau = samples.tau_min + static_cast<double>(k) * samples.step;
    acc += std::polar(1.0, -tau * rate) * samples.values[k];
  }
  TransformValue out;
  out.value = pref * samples.step * acc;
  const double edge = std::abs(samples.values[0]) + std::abs(samples.values[n - 1]);
  out.tail_estimate = pref * clock.lattice_spacing() * edge;
  out.accurate = out.tail_estimate <= tail_tolerance;
  return out;
}

TransformValue continuous_to_freq(const std::function<complexd(double)>& psi_tau, double omega,
                                  const ClockParams& clock, const ContinuousWindow& window) {
  return continuous_to_freq(tabulate_continuous(psi_tau, clock, window), omega, clock, window.tail_tolerance);
}

TimeSampleSequence freq_to_discrete(const FrequencyWavefunction& psi, long n_min, long n_max,
                                    const ClockParams& clock) {
  require_same_kappa(psi.grid(), clock);
  if (n_max - n_min + 1 < 3) throw PreconditionError("freq_to_discrete: need at least 3 lattice sites");
  const auto& g = psi.grid();
  const double sk = clock.delta_t0();
  const double amp = std::sqrt(2.0 * sk / kPi);
  const auto m = psi.values().size();

  // Integrand pieces shared by every n.
  Eigen::ArrayXcd base(m);
  Eigen::ArrayXd angle(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double w = g.omega()[j];
    const double one_plus = 1.0 + clock.kappa() * w * w;
    angle[j] = std::atan(sk * w);
    base[j] = g.weights()[j] * one_plus * std::pow(one_plus, -1.5) * psi.values()[j];
  }

  Eigen::VectorXcd out(n_max - n_min + 1);
  for (long n = n_min; n <= n_max; ++n) {
    const double k = 2.0 * (clock.lambda() + static_cast<double>(n));
    complexd acc{0.0, 0.0};
    for (Eigen::Index j = 0; j < m; ++j) acc += std::polar(1.0, k * angle[j]) * base[j];
    out[n - n_min] = amp * acc;
  }
  return {n_min, std::move(out), clock};
}

TransformValue discrete_to_freq(const TimeSampleSequence& seq, double omega, double tail_tolerance) {
  const auto& clock = seq.clock();
  const double sk = clock.delta_t0();
  const double pref = std::sqrt(sk / (2.0 * kPi)) * std::sqrt(1.0 + clock.kappa() * omega * omega);
  const double a = std::atan(sk * omega);

  // Partial sum over the stored range; callers pass a symmetric range.
  const long lo = seq.n_min();
  const long hi = seq.n_max();
  complexd acc{0.0, 0.0};
  for (long n = lo; n <= hi; ++n) {
    acc += std::polar(1.0, -2.0 * (clock.lambda() + static_cast<double>(n)) * a) * seq.values()[n - lo];
  }
  TransformValue out;
  out.value = pref * acc;
  out.tail_estimate = pref * seq.edge_magnitude();
  out.accurate = out.tail_estimate <= tail_tolerance;
  return out;
}

complexd sinc_reconstruct(const TimeSampleSequence& seq, double tau) {
  const auto& clock = seq.clock();
  const double offset = tau / clock.lattice_spacing() - clock.lambda();
  complexd acc{0.0, 0.0};
  for (long n = seq.n_min(); n <= seq.n_max(); ++n) {
    acc += seq.values()[n - seq.n_min()] * sinc(offset - static_cast<double>(n));
  }
  return acc;
}

TimeSampleSequence resample_lattice(const TimeSampleSequence& seq, double new_lambda, long n_min, long n_max) {
  const ClockParams target = seq.clock().with_lambda(new_lambda);
  Eigen::VectorXcd out(n_max - n_min + 1);
  for (long n = n_min; n <= n_max; ++n) out[n - n_min] = sinc_reconstruct(seq, target.lattice_time(n));
  return {n_min, std::move(out), target};
}

// --- discrete-time operators ------------------------------------------------

complexd discrete_derivative(const TimeSampleSequence& seq, long n) {
  if (!seq.contains(n - 1) || !seq.contains(n + 1)) {
    throw RangeError("discrete_derivative: site " + std::to_string(n) + " has no neighbor on both sides");
  }
  return (seq.at(n + 1) - seq.at(n - 1)) / (4.0 * seq.clock().delta_t0());
}

TimeSampleSequence discrete_derivative(const TimeSampleSequence& seq) {
  const auto len = static_cast<Eigen::Index>(seq.size());
  if (len < 5) throw RangeError("discrete_derivative: sequence too short to keep 3 samples");
  const double scale = 1.0 / (4.0 * seq.clock().delta_t0());
  Eigen::VectorXcd out = (seq.values().segment(2, len - 2) - seq.values().segment(0, len - 2)) * scale;
  return {seq.n_min() + 1, std::move(out), seq.clock()};
}

double symbol_f(double x) {
  if (!(std::abs(x) <= 0.5)) {
    std::ostringstream msg;
    msg << "symbol_f: |x| must not exceed 1/2, got " << x;
    throw DomainError(msg.str());
  }
  return 2.0 * x / (1.0 + std::sqrt(1.0 - 4.0 * x * x));
}

double symbol_f_inverse(double x) { return x / (1.0 + x * x); }

std::vector<double> symbol_f_series(int max_odd_order) {
  if (max_odd_order < 1 || max_odd_order % 2 == 0) {
    throw PreconditionError("symbol_f_series: order must be a positive odd integer");
  }
  // C_0 = 1, C_{k+1} = C_k * 2(2k+1)/(k+2)
  std::vector<double> c;
  double ck = 1.0;
  for (int k = 0; 2 * k + 1 <= max_odd_order; ++k) {
    c.push_back(ck);
    ck *= 2.0 * (2.0 * k + 1.0) / (k + 2.0);
  }
  return c;
}

DiscreteFrequencyResult discrete_frequency_apply(const TimeSampleSequence& seq,
                                                 const DiscreteFrequencyOptions& options) {
  const auto coeffs = symbol_f_series(options.order);
  const long shrink = options.order;
  const auto len = static_cast<long>(seq.size());
  if (len - 2 * shrink < 3) {
    throw PreconditionError("discrete_frequency_apply: sequence too short for series order " +
                            std::to_string(options.order));
  }
  const double sk = seq.clock().delta_t0();
  const long out_len = len - 2 * shrink;

  // term = (-i sqrt(kappa) D)^(2k+1) psi, kept on its natural (shrinking) range.
  auto step = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
    const auto m = v.size();
    return (v.segment(2, m - 2) - v.segment(0, m - 2)) * (-kI * 0.25);
  };

  Eigen::VectorXcd term = step(seq.values());
  long term_offset = 1;  // term[0] corresponds to site n_min + term_offset
  Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(out_len);
  Eigen::VectorXcd last;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    last = coeffs[k] * term.segment(shrink - term_offset, out_len);
    acc += last;
    if (k + 1 < coeffs.size()) {
      term = step(step(term));
      term_offset += 2;
    }
  }

  DiscreteFrequencyResult res{TimeSampleSequence(seq.n_min() + shrink, acc / sk, seq.clock()), 0.0, true};
  const double acc_norm = acc.norm();
  res.last_term_relative = acc_norm > 0.0 ? last.norm() / acc_norm : 0.0;
  res.accurate = res.last_term_relative <= options.tolerance;
  return res;
}

// --- moments ----------------------------------------------------------------

Eigen::ArrayXcd apply_time_operator(const FrequencyWavefunction& psi) {
  const auto& g = psi.grid();
  return derivative_x(psi.values(), g.x_spacing()) * (2.0 * kI * std::sqrt(g.kappa()));
}

UncertaintyStats uncertainty_stats(const FrequencyWavefunction& psi_in) {
  UncertaintyStats st;
  const FrequencyWavefunction* psi = &psi_in;
  FrequencyWavefunction normalized = psi_in;
  if (std::abs(psi_in.norm_sq() - 1.0) > 1e-12) {
    normalized = psi_in.normalized();
    psi = &normalized;
    st.normalized_internally = true;
  }
  const auto& g = psi->grid();
  const Eigen::ArrayXd dens = psi->values().abs2();
  st.mean_omega = (g.weights() * g.omega() * dens).sum();
  const double omega2 = (g.weights() * g.omega().square() * dens).sum();
  st.delta_omega = std::sqrt(std::max(0.0, omega2 - st.mean_omega * st.mean_omega));

  const Eigen::ArrayXcd t_psi = apply_time_operator(*psi);
  st.mean_t = (g.weights().cast<complexd>() * psi->values().conjugate() * t_psi).sum().real();
  const double t2 = (g.weights() * t_psi.abs2()).sum();
  st.delta_t = std::sqrt(std::max(0.0, t2 - st.mean_t * st.mean_t));
  return st;
}

// --- test states ------------------------------------------------------------

FrequencyWavefunction make_smooth_state(FrequencyGridPtr grid, const std::vector<SmoothBump>& bumps) {
  if (bumps.empty()) throw PreconditionError("make_smooth_state: need at least one bump");
  for (const auto& b : bumps) {
    if (!(b.width > 0.0)) throw DomainError("make_smooth_state: bump width must be > 0");
  }
  return FrequencyWavefunction::from_x(std::move(grid), [&bumps](double x) {
    complexd v{0.0, 0.0};
    for (const auto& b : bumps) {
      const double d = (x - b.center) / b.width;
      v += b.amplitude * std::exp(-0.5 * d * d) * std::polar(1.0, b.phase_slope * x);
    }
    return v;
  });
}

}  // namespace mintime

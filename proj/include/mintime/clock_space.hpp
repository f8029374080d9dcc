#pragma once

// The deformed clock space: frequency, continuous-time and discrete-time
// representations and the transforms between them.
//
// Frequency-side integrals use the substitution x = 2 arctan(sqrt(kappa) w),
// which maps the real line onto (-pi, pi) and turns the measure
// dw / (1 + kappa w^2) into dx / (2 sqrt(kappa)). The grid is uniform in x
// (midpoints), so the quadrature is the periodic trapezoid rule.

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "mintime/clock_params.hpp"

namespace mintime {

using complexd = std::complex<double>;

class FrequencyGrid {
 public:
  static constexpr std::size_t kDefaultPoints = 4096;

  FrequencyGrid(const ClockParams& clock, std::size_t n_points = kDefaultPoints);

  std::size_t size() const noexcept { return static_cast<std::size_t>(x_.size()); }
  double kappa() const noexcept { return kappa_; }
  /// Uniform spacing in the warped variable x.
  double x_spacing() const noexcept { return dx_; }

  const Eigen::ArrayXd& x() const noexcept { return x_; }
  const Eigen::ArrayXd& omega() const noexcept { return omega_; }
  /// Weights of the measure dw / (1 + kappa w^2); all equal dx / (2 sqrt(kappa)).
  const Eigen::ArrayXd& weights() const noexcept { return weights_; }

 private:
  double kappa_;
  double dx_;
  Eigen::ArrayXd x_;
  Eigen::ArrayXd omega_;
  Eigen::ArrayXd weights_;
};

using FrequencyGridPtr = std::shared_ptr<const FrequencyGrid>;

FrequencyGridPtr make_frequency_grid(const ClockParams& clock,
                                     std::size_t n_points = FrequencyGrid::kDefaultPoints);

/// psi(w) sampled on a warped grid, square integrable against dw/(1+kappa w^2).
class FrequencyWavefunction {
 public:
  FrequencyWavefunction(FrequencyGridPtr grid, Eigen::ArrayXcd values);

  static FrequencyWavefunction from_omega(FrequencyGridPtr grid, const std::function<complexd(double)>& psi);
  /// Build from a profile in the warped variable x = 2 arctan(sqrt(kappa) w).
  static FrequencyWavefunction from_x(FrequencyGridPtr grid, const std::function<complexd(double)>& profile);
  static FrequencyWavefunction zero(FrequencyGridPtr grid);

  const FrequencyGrid& grid() const noexcept { return *grid_; }
  const FrequencyGridPtr& grid_ptr() const noexcept { return grid_; }
  const Eigen::ArrayXcd& values() const noexcept { return values_; }
  double norm_sq() const noexcept { return norm_sq_; }

  FrequencyWavefunction normalized() const;
  /// <this|other> under the deformed measure.
  complexd inner(const FrequencyWavefunction& other) const;
  /// Multiplication by w (the frequency operator in this representation).
  FrequencyWavefunction times_omega() const;

  FrequencyWavefunction operator+(const FrequencyWavefunction& rhs) const;
  FrequencyWavefunction operator*(complexd s) const;

 private:
  FrequencyGridPtr grid_;
  Eigen::ArrayXcd values_;
  double norm_sq_ = 0.0;
};

/// psi_n on the lattice 2 sqrt(kappa)(lambda + n), n = n_min .. n_max.
class TimeSampleSequence {
 public:
  TimeSampleSequence(long n_min, Eigen::VectorXcd values, ClockParams clock);

  long n_min() const noexcept { return n_min_; }
  long n_max() const noexcept { return n_min_ + static_cast<long>(values_.size()) - 1; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  const Eigen::VectorXcd& values() const noexcept { return values_; }
  const ClockParams& clock() const noexcept { return clock_; }

  bool contains(long n) const noexcept { return n >= n_min() && n <= n_max(); }
  complexd at(long n) const;
  /// Sum of |psi_n|^2 over the stored range.
  double norm_sq() const noexcept { return values_.squaredNorm(); }
  /// Magnitude of the outermost samples, a proxy for the truncated tail.
  double edge_magnitude() const noexcept;

 private:
  long n_min_;
  Eigen::VectorXcd values_;
  ClockParams clock_;
};

/// A transform value together with a truncation-tail estimate.
struct TransformValue {
  complexd value;
  double tail_estimate = 0.0;
  bool accurate = true;
};

// --- uncertainty relation ---------------------------------------------------

/// (1 + kappa dw^2 + kappa <W>^2) / (2 dw): smallest admissible time spread.
double gup_bound(double delta_omega, double mean_omega, double kappa);
/// Minimum of gup_bound over dw: sqrt(kappa (1 + kappa <W>^2)).
double gup_minimum(double mean_omega, double kappa);

// --- maximal localization ---------------------------------------------------

FrequencyWavefunction maximal_localization_state(double tau, const ClockParams& clock, FrequencyGridPtr grid);

/// Closed-form <phi_tau'|phi_tau> of two maximally localized states.
double ml_overlap(double tau, double tau_prime, const ClockParams& clock);

// --- transforms -------------------------------------------------------------

/// psi(tau) = <phi_tau^ML | psi>.
complexd freq_to_continuous(const FrequencyWavefunction& psi, double tau);

/// Samples of a continuous-time wavefunction on a uniform tau window.
struct ContinuousSamples {
  double tau_min = 0.0;
  double step = 0.0;
  Eigen::VectorXcd values;
};

struct ContinuousWindow {
  /// Half width of the window in lattice cells (units of 2 sqrt(kappa)).
  double half_width_cells = 80.0;
  /// Samples per lattice cell. The integrand is band limited, so 4 is ample.
  int samples_per_cell = 4;
  double tail_tolerance = 1e-8;
};

ContinuousSamples tabulate_continuous(const std::function<complexd(double)>& psi_tau, const ClockParams& clock,
                                      const ContinuousWindow& window = {});
ContinuousSamples tabulate_continuous(const FrequencyWavefunction& psi, const ClockParams& clock,
                                      const ContinuousWindow& window = {});

/// psi(w) from continuous-time samples (inverse of freq_to_continuous).
TransformValue continuous_to_freq(const ContinuousSamples& samples, double omega, const ClockParams& clock,
                                  double tail_tolerance = 1e-8);
TransformValue continuous_to_freq(const std::function<complexd(double)>& psi_tau, double omega,
                                  const ClockParams& clock, const ContinuousWindow& window = {});

TimeSampleSequence freq_to_discrete(const FrequencyWavefunction& psi, long n_min, long n_max, const ClockParams& clock);

/// Symmetric partial sum of the lattice series back to psi(w).
TransformValue discrete_to_freq(const TimeSampleSequence& seq, double omega, double tail_tolerance = 1e-8);

/// sin(pi u) / (pi u), exact at the integers.
double sinc(double u);

/// sum_n psi_n sinc((tau - 2 sqrt(kappa)(lambda + n)) / (2 sqrt(kappa))).
complexd sinc_reconstruct(const TimeSampleSequence& seq, double tau);

/// Resample the band-limited function carried by seq on another lattice shift.
TimeSampleSequence resample_lattice(const TimeSampleSequence& seq, double new_lambda, long n_min, long n_max);

// --- discrete-time operators ------------------------------------------------

/// (psi_{n+1} - psi_{n-1}) / (4 dt0).
complexd discrete_derivative(const TimeSampleSequence& seq, long n);
/// D applied on the whole sequence; the range shrinks by one on each side.
TimeSampleSequence discrete_derivative(const TimeSampleSequence& seq);

/// 2x / (1 + sqrt(1 - 4x^2)), defined for |x| <= 1/2.
double symbol_f(double x);
/// x / (1 + x^2).
double symbol_f_inverse(double x);
/// Coefficients of x, x^3, x^5, ... in the Taylor series of symbol_f
/// (the Catalan numbers 1, 1, 2, 5, 14, ...).
std::vector<double> symbol_f_series(int max_odd_order);

struct DiscreteFrequencyOptions {
  /// Highest odd power of (-i sqrt(kappa) D) kept.
  int order = 61;
  double tolerance = 1e-8;
};

struct DiscreteFrequencyResult {
  TimeSampleSequence sequence;
  /// Norm of the last series term kept, relative to the result norm.
  double last_term_relative = 0.0;
  bool accurate = true;
};

/// Frequency operator f(-i sqrt(kappa) D) / sqrt(kappa) on lattice samples.
DiscreteFrequencyResult discrete_frequency_apply(const TimeSampleSequence& seq,
                                                 const DiscreteFrequencyOptions& options = {});

// --- moments ----------------------------------------------------------------

struct UncertaintyStats {
  double mean_t = 0.0;
  double delta_t = 0.0;
  double mean_omega = 0.0;
  double delta_omega = 0.0;
  bool normalized_internally = false;
};

/// Moments of W (multiplication by w) and T = i (1 + kappa w^2) d/dw.
/// On the warped grid T = 2 i sqrt(kappa) d/dx, differentiated with
/// fourth-order central differences.
UncertaintyStats uncertainty_stats(const FrequencyWavefunction& psi);

/// T psi on the grid (zero outside (-pi, pi)).
Eigen::ArrayXcd apply_time_operator(const FrequencyWavefunction& psi);

// --- test states ------------------------------------------------------------

/// A Gaussian bump in the warped variable with a linear phase, used as a
/// smooth, effectively band-limited clock state.
struct SmoothBump {
  complexd amplitude{1.0, 0.0};
  double center = 0.0;
  double width = 0.25;
  double phase_slope = 0.0;
};

FrequencyWavefunction make_smooth_state(FrequencyGridPtr grid, const std::vector<SmoothBump>& bumps);

}  // namespace mintime

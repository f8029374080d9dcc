#pragma once

#include <cmath>
#include <string>

#include "mintime/errors.hpp"

namespace mintime {

/// Deformation parameter kappa (time^2), lattice shift lambda in [0, 1) and
/// hbar of the deformed clock. kappa = 0 is not representable here; the
/// undeformed reference paths of the models take a Deformation instead.
class ClockParams {
 public:
  explicit ClockParams(double kappa, double lambda = 0.0, double hbar = 1.0)
      : kappa_(kappa), lambda_(lambda), hbar_(hbar) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) {
      throw DomainError("ClockParams: kappa must be finite and > 0, got " + std::to_string(kappa));
    }
    if (!(lambda >= 0.0 && lambda < 1.0)) {
      throw DomainError("ClockParams: lattice shift must lie in [0, 1), got " + std::to_string(lambda));
    }
    if (!(hbar > 0.0) || !std::isfinite(hbar)) {
      throw DomainError("ClockParams: hbar must be finite and > 0, got " + std::to_string(hbar));
    }
  }

  double kappa() const noexcept { return kappa_; }
  double lambda() const noexcept { return lambda_; }
  double hbar() const noexcept { return hbar_; }

  /// Smallest achievable time uncertainty, sqrt(kappa).
  double delta_t0() const noexcept { return std::sqrt(kappa_); }
  double lattice_spacing() const noexcept { return 2.0 * std::sqrt(kappa_); }

  /// Clock time of lattice site n, 2 sqrt(kappa) (lambda + n).
  double lattice_time(long n) const noexcept {
    return lattice_spacing() * (lambda_ + static_cast<double>(n));
  }

  ClockParams with_lambda(double lambda) const { return ClockParams(kappa_, lambda, hbar_); }

 private:
  double kappa_;
  double lambda_;
  double hbar_;
};

/// kappa >= 0 and hbar for model code that also runs the undeformed limit.
struct Deformation {
  double kappa = 0.0;
  double hbar = 1.0;

  Deformation() = default;
  Deformation(double kappa_, double hbar_ = 1.0) : kappa(kappa_), hbar(hbar_) {
    if (!(kappa >= 0.0) || !std::isfinite(kappa)) {
      throw DomainError("Deformation: kappa must be finite and >= 0");
    }
    if (!(hbar > 0.0)) throw DomainError("Deformation: hbar must be > 0");
  }
  Deformation(const ClockParams& clock)  // NOLINT(google-explicit-constructor)
      : kappa(clock.kappa()), hbar(clock.hbar()) {}

  bool deformed() const noexcept { return kappa > 0.0; }
};

/// arctan(sqrt(kappa) x) / sqrt(kappa), reducing to x at kappa = 0.
inline double deformed_rate(double x, double kappa) noexcept {
  if (kappa == 0.0) return x;
  const double s = std::sqrt(kappa);
  return std::atan(s * x) / s;
}

}  // namespace mintime

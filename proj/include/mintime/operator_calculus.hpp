#pragma once

// Dense spectral functional calculus for Hermitian matrices.
//
// Every matrix function here goes diagonalize -> map eigenvalues ->
// reconstruct. Power series are never used to evaluate a function (arctan's
// series diverges for spectral radius > 1); they only show up in tests.

#include <cmath>
#include <complex>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>

#include <Eigen/Dense>

#include "mintime/clock_params.hpp"
#include "mintime/errors.hpp"

namespace mintime {

template <typename Real>
using CMatrix = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Real>
using CVector = Eigen::Matrix<std::complex<Real>, Eigen::Dynamic, 1>;
template <typename Real>
using RVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

using CMatrixd = CMatrix<double>;
using CVectord = CVector<double>;
using RVectord = RVector<double>;

/// Gate tolerances. Defaults are the library-wide contract; callers may
/// tighten or loosen them per call.
template <typename Real>
struct Tolerances {
  Real hermiticity = Real(1e-12);     // relative to 1 + max|entry|
  Real reconstruction = Real(1e-10);  // relative to 1 + spectral radius
  Real orthonormality = Real(1e-12);
  Real unitarity = Real(1e-10);
  Real commutator = Real(1e-10);
  Real shared_action = Real(1e-10);
  Real normalization = Real(1e-10);
};

template <typename Derived>
auto max_abs_entry(const Eigen::MatrixBase<Derived>& m) {
  using Real = typename Eigen::NumTraits<typename Derived::Scalar>::Real;
  if (m.size() == 0) return Real(0);
  return m.cwiseAbs().maxCoeff();
}

template <typename Real>
Real hermiticity_defect(const CMatrix<Real>& m) {
  return max_abs_entry((m - m.adjoint()).eval());
}

template <typename Real = double>
class HermitianOperator {
 public:
  using Scalar = std::complex<Real>;
  using Matrix = CMatrix<Real>;

  explicit HermitianOperator(Matrix entries, Real tol = Tolerances<Real>{}.hermiticity)
      : entries_(std::move(entries)) {
    if (entries_.rows() < 1 || entries_.rows() != entries_.cols()) {
      throw PreconditionError("HermitianOperator: expected a non-empty square matrix");
    }
    if (!entries_.allFinite()) {
      throw DomainError("HermitianOperator: non-finite entry");
    }
    defect_ = ::mintime::hermiticity_defect<Real>(entries_);
    if (defect_ > tol * (Real(1) + max_abs_entry(entries_))) {
      std::ostringstream msg;
      msg << "HermitianOperator: hermiticity defect " << defect_ << " exceeds tolerance";
      throw PreconditionError(msg.str());
    }
  }

  Eigen::Index dim() const noexcept { return entries_.rows(); }
  const Matrix& matrix() const noexcept { return entries_; }
  Real hermiticity_defect() const noexcept { return defect_; }

  HermitianOperator operator+(const HermitianOperator& rhs) const {
    return HermitianOperator(entries_ + rhs.entries_);
  }
  HermitianOperator operator*(Real s) const { return HermitianOperator(entries_ * s); }

 private:
  Matrix entries_;
  Real defect_ = 0;
};

using HermitianOperatord = HermitianOperator<double>;

template <typename Real = double>
class UnitaryOperator {
 public:
  using Matrix = CMatrix<Real>;

  explicit UnitaryOperator(Matrix entries, Real tol = Tolerances<Real>{}.unitarity)
      : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() < 1) {
      throw PreconditionError("UnitaryOperator: expected a non-empty square matrix");
    }
    const Matrix id = Matrix::Identity(entries_.rows(), entries_.cols());
    defect_ = max_abs_entry((entries_.adjoint() * entries_ - id).eval());
    if (!(defect_ <= tol)) {
      throw NumericalError("UnitaryOperator: |U^dag U - I| exceeds tolerance", static_cast<double>(defect_));
    }
  }

  Eigen::Index dim() const noexcept { return entries_.rows(); }
  const Matrix& matrix() const noexcept { return entries_; }
  Real unitarity_defect() const noexcept { return defect_; }

  CVector<Real> apply(const CVector<Real>& psi) const { return entries_ * psi; }

  UnitaryOperator operator*(const UnitaryOperator& rhs) const {
    return UnitaryOperator(entries_ * rhs.entries_);
  }

 private:
  Matrix entries_;
  Real defect_ = 0;
};

using UnitaryOperatord = UnitaryOperator<double>;

/// Eigenvalues ascending, eigenvectors as orthonormal columns.
template <typename Real = double>
struct SpectralDecomposition {
  RVector<Real> eigenvalues;
  CMatrix<Real> eigenvectors;
  Real reconstruction_residual = 0;
  Real orthonormality_residual = 0;

  Real spectral_radius() const {
    return eigenvalues.size() == 0 ? Real(0) : eigenvalues.cwiseAbs().maxCoeff();
  }

  /// U diag(values) U^dag for arbitrary complex or real eigenvalue images.
  template <typename Derived>
  CMatrix<Real> reconstruct(const Eigen::MatrixBase<Derived>& values) const {
    using V = CVector<Real>;
    const V d = values.template cast<std::complex<Real>>();
    return eigenvectors * d.asDiagonal() * eigenvectors.adjoint();
  }
};

using SpectralDecompositiond = SpectralDecomposition<double>;

template <typename Real>
SpectralDecomposition<Real> diagonalize(const HermitianOperator<Real>& h,
                                        const Tolerances<Real>& tol = {}) {
  Eigen::SelfAdjointEigenSolver<CMatrix<Real>> solver(h.matrix());
  if (solver.info() != Eigen::Success) {
    throw NumericalError("diagonalize: eigensolver did not converge", std::nan(""));
  }
  SpectralDecomposition<Real> out;
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();

  const auto n = h.dim();
  out.orthonormality_residual =
      max_abs_entry((out.eigenvectors.adjoint() * out.eigenvectors - CMatrix<Real>::Identity(n, n)).eval());
  out.reconstruction_residual = max_abs_entry((out.reconstruct(out.eigenvalues) - h.matrix()).eval());

  if (out.orthonormality_residual > tol.orthonormality) {
    throw NumericalError("diagonalize: eigenvectors not orthonormal",
                         static_cast<double>(out.orthonormality_residual));
  }
  if (out.reconstruction_residual > tol.reconstruction * (Real(1) + out.spectral_radius())) {
    throw NumericalError("diagonalize: reconstruction residual too large",
                         static_cast<double>(out.reconstruction_residual));
  }
  return out;
}

namespace detail {

template <typename Real>
CMatrix<Real> hermitian_part(const CMatrix<Real>& m) {
  return (m + m.adjoint()) * Real(0.5);
}

template <typename Real, typename F>
RVector<Real> map_eigenvalues(const RVector<Real>& ev, F&& f) {
  RVector<Real> out(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    const Real y = static_cast<Real>(f(ev[i]));
    if (!std::isfinite(static_cast<double>(y))) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "apply_spectral_function: function is not finite at eigenvalue " << ev[i];
      throw DomainError(msg.str());
    }
    out[i] = y;
  }
  return out;
}

}  // namespace detail

/// f(H) = U f(Lambda) U^dag for a real scalar function f.
template <typename Real, typename F>
HermitianOperator<Real> apply_spectral_function(const SpectralDecomposition<Real>& dec, F&& f) {
  const RVector<Real> mapped = detail::map_eigenvalues<Real>(dec.eigenvalues, std::forward<F>(f));
  return HermitianOperator<Real>(detail::hermitian_part<Real>(dec.reconstruct(mapped)));
}

template <typename Real, typename F>
HermitianOperator<Real> apply_spectral_function(const HermitianOperator<Real>& h, F&& f) {
  return apply_spectral_function(diagonalize(h), std::forward<F>(f));
}

/// (hbar / sqrt(kappa)) arctan(sqrt(kappa) H / hbar). Spectrum stays inside
/// (-hbar pi / (2 sqrt(kappa)), hbar pi / (2 sqrt(kappa))) whatever H is.
template <typename Real>
HermitianOperator<Real> effective_hamiltonian(const HermitianOperator<Real>& h, const ClockParams& clock) {
  const Real s = static_cast<Real>(std::sqrt(clock.kappa()));
  const Real hbar = static_cast<Real>(clock.hbar());
  return apply_spectral_function(h, [s, hbar](Real e) { return hbar / s * std::atan(s * e / hbar); });
}

/// exp(-i tau H / hbar).
template <typename Real>
UnitaryOperator<Real> propagator(const HermitianOperator<Real>& h, Real tau, Real hbar = Real(1)) {
  const auto dec = diagonalize(h);
  CVector<Real> phases(dec.eigenvalues.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    phases[i] = std::polar(Real(1), -tau * dec.eigenvalues[i] / hbar);
  }
  return UnitaryOperator<Real>(dec.reconstruct(phases));
}

/// exp(-i tau (1/sqrt(kappa)) arctan(sqrt(kappa) H / hbar)), the deformed
/// evolution of a system Hamiltonian. kappa = 0 gives exp(-i tau H / hbar).
template <typename Real>
UnitaryOperator<Real> deformed_propagator(const HermitianOperator<Real>& h, const Deformation& def, Real tau) {
  const auto dec = diagonalize(h);
  CVector<Real> phases(dec.eigenvalues.size());
  for (Eigen::Index i = 0; i < phases.size(); ++i) {
    const Real rate = static_cast<Real>(deformed_rate(static_cast<double>(dec.eigenvalues[i]) / def.hbar, def.kappa));
    phases[i] = std::polar(Real(1), -tau * rate);
  }
  return UnitaryOperator<Real>(dec.reconstruct(phases));
}

/// Numerical form of the function-transfer theorem: if A and B commute and
/// A psi = B psi, then f(A) psi = f(B) psi. Returns |f(A) psi - f(B) psi|.
template <typename Real, typename F>
Real verify_function_transfer(const HermitianOperator<Real>& a, const HermitianOperator<Real>& b,
                              const CVector<Real>& psi, F&& f, const Tolerances<Real>& tol = {}) {
  if (a.dim() != b.dim() || a.dim() != psi.size()) {
    throw PreconditionError("verify_function_transfer: dimension mismatch");
  }
  const Real comm = max_abs_entry((a.matrix() * b.matrix() - b.matrix() * a.matrix()).eval());
  if (comm > tol.commutator) {
    std::ostringstream msg;
    msg << "verify_function_transfer: A and B do not commute (|AB - BA| = " << comm << ")";
    throw PreconditionError(msg.str());
  }
  const Real action = (a.matrix() * psi - b.matrix() * psi).norm();
  if (action > tol.shared_action) {
    std::ostringstream msg;
    msg << "verify_function_transfer: A psi != B psi (|A psi - B psi| = " << action << ")";
    throw PreconditionError(msg.str());
  }
  if (std::abs(psi.norm() - Real(1)) > tol.normalization) {
    throw PreconditionError("verify_function_transfer: psi is not normalized");
  }
  const auto fa = apply_spectral_function(a, f);
  const auto fb = apply_spectral_function(b, f);
  return (fa.matrix() * psi - fb.matrix() * psi).norm();
}

}  // namespace mintime

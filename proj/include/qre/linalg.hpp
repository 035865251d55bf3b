#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "qre/tolerances.hpp"

namespace qre {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Index = Eigen::Index;

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline bool all_finite(const Matrix& m) {
  for (Index c = 0; c < m.cols(); ++c)
    for (Index r = 0; r < m.rows(); ++r)
      if (!std::isfinite(m(r, c).real()) || !std::isfinite(m(r, c).imag())) return false;
  return true;
}

inline double hermitian_residual(const Matrix& m) {
  if (m.rows() != m.cols()) return INFINITY;
  if (m.size() == 0) return 0.0;
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

// max |P^2 - P| and max |P - P^dagger|, whichever is larger
inline double projector_residual(const Matrix& p) {
  if (p.rows() != p.cols()) return INFINITY;
  if (p.size() == 0) return 0.0;
  return std::max((p * p - p).cwiseAbs().maxCoeff(), hermitian_residual(p));
}

// Frobenius norm of AB - BA.
inline double commutator_norm(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() != a.cols())
    throw ValidationError("commutator_norm: operands must be square and of equal size");
  return (a * b - b * a).norm();
}

class PureState {
 public:
  explicit PureState(Vector amplitudes) : amps_(std::move(amplitudes)) {
    if (amps_.size() == 0) throw ValidationError("PureState: empty amplitude vector");
    if (!all_finite(amps_)) throw ValidationError("PureState: non-finite amplitude");
    double norm = amps_.norm();
    if (std::abs(norm - 1.0) > tol::normalization)
      throw ValidationError("PureState: amplitudes not normalized (norm " + std::to_string(norm) + ")");
  }

  static PureState normalized(const Vector& v) {
    double norm = v.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) throw ValidationError("PureState::normalized: zero or non-finite vector");
    return PureState(v / norm);
  }

  static PureState basis(Index dim, Index k) {
    if (dim < 1 || k < 0 || k >= dim) throw ValidationError("PureState::basis: index out of range");
    Vector v = Vector::Zero(dim);
    v(k) = 1.0;
    return PureState(v);
  }

  const Vector& amplitudes() const { return amps_; }
  Index dim() const { return amps_.size(); }
  Matrix projector() const { return amps_ * amps_.adjoint(); }

 private:
  Vector amps_;
};

class DensityMatrix {
 public:
  explicit DensityMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols() || m_.rows() == 0) throw ValidationError("DensityMatrix: matrix must be square and non-empty");
    if (!all_finite(m_)) throw ValidationError("DensityMatrix: non-finite entry");
    if (hermitian_residual(m_) > tol::hermiticity) throw ValidationError("DensityMatrix: not Hermitian");
    double tr = m_.trace().real();
    if (std::abs(tr - 1.0) > tol::unit_trace)
      throw ValidationError("DensityMatrix: trace " + std::to_string(tr) + " differs from 1");
    Eigen::SelfAdjointEigenSolver<Matrix> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -tol::psd_floor) throw ValidationError("DensityMatrix: negative eigenvalue");
  }

  DensityMatrix(const PureState& psi) : m_(psi.projector()) {}

  // Symmetrizes and renormalizes before validating; for states computed by
  // conjugation where rounding leaves a residual anti-Hermitian part.
  static DensityMatrix from_unnormalized(const Matrix& m) {
    if (m.rows() != m.cols()) throw ValidationError("DensityMatrix::from_unnormalized: matrix must be square");
    Matrix h = 0.5 * (m + m.adjoint());
    double tr = h.trace().real();
    if (!(tr > 0.0)) throw ValidationError("DensityMatrix::from_unnormalized: non-positive trace");
    return DensityMatrix(h / tr);
  }

  static DensityMatrix maximally_mixed(Index dim) {
    if (dim < 1) throw ValidationError("DensityMatrix::maximally_mixed: dim must be positive");
    return DensityMatrix(Matrix::Identity(dim, dim) / static_cast<double>(dim));
  }

  const Matrix& matrix() const { return m_; }
  Index dim() const { return m_.rows(); }

 private:
  Matrix m_;
};

inline Matrix projector_from_vector(const PureState& v) { return v.projector(); }

inline Matrix projector_from_vector(const Vector& v) { return PureState(v).projector(); }

inline Matrix tensor(const Matrix& a, const Matrix& b) { return Eigen::kroneckerProduct(a, b).eval(); }

inline Vector tensor(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Index i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
  return out;
}

// Subsystem i of a product space has dimension dims[i]; index order is
// row-major (the first subsystem is the most significant digit), matching
// the Kronecker product. The result keeps the listed subsystems in
// increasing order.
inline Matrix partial_trace(const Matrix& m, const std::vector<Index>& dims, const std::vector<Index>& keep) {
  if (m.rows() != m.cols()) throw ValidationError("partial_trace: matrix must be square");
  Index total = 1;
  for (Index d : dims) {
    if (d < 1) throw ValidationError("partial_trace: subsystem dimensions must be positive");
    total *= d;
  }
  if (total != m.rows()) throw ValidationError("partial_trace: product of dims does not match matrix dimension");

  const std::size_t k = dims.size();
  std::vector<bool> kept(k, false);
  for (Index s : keep) {
    if (s < 0 || static_cast<std::size_t>(s) >= k) throw ValidationError("partial_trace: keep index out of range");
    if (kept[s]) throw ValidationError("partial_trace: duplicate keep index");
    kept[s] = true;
  }

  std::vector<Index> stride(k, 1);
  for (std::size_t s = k; s-- > 1;) stride[s - 1] = stride[s] * dims[s];

  // Flat offsets contributed by the kept and traced digits respectively.
  auto offsets = [&](bool want_kept) {
    std::vector<Index> out{0};
    for (std::size_t s = 0; s < k; ++s) {
      if (kept[s] != want_kept) continue;
      std::vector<Index> next;
      next.reserve(out.size() * dims[s]);
      for (Index base : out)
        for (Index x = 0; x < dims[s]; ++x) next.push_back(base + x * stride[s]);
      out = std::move(next);
    }
    return out;
  };
  const std::vector<Index> ko = offsets(true);
  const std::vector<Index> to = offsets(false);

  const Index dk = static_cast<Index>(ko.size());
  Matrix out = Matrix::Zero(dk, dk);
  for (Index c = 0; c < dk; ++c)
    for (Index r = 0; r < dk; ++r) {
      Complex acc = 0.0;
      for (Index t : to) acc += m(ko[r] + t, ko[c] + t);
      out(r, c) = acc;
    }
  return out;
}

// Sum of singular values. Hermitian inputs use |eigenvalues| directly, which
// keeps exact zeros at the rounding level; otherwise the singular values come
// from the eigenvalues of A^dagger A.
inline double trace_norm(const Matrix& a) {
  if (a.rows() != a.cols()) throw ValidationError("trace_norm: matrix must be square");
  if (a.size() == 0) return 0.0;
  if (!all_finite(a)) throw ValidationError("trace_norm: non-finite entry");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (hermitian_residual(a) <= 1e-14 * scale) {
    Matrix h = 0.5 * (a + a.adjoint());
    Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
  }
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().sum();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw ValidationError("trace_distance: dimension mismatch");
  return 0.5 * trace_norm(a.matrix() - b.matrix());
}

namespace detail {

// Multiplies v by a unit phase so its largest-magnitude entry (first one on
// ties) is real and positive.
inline Vector canonical_phase(const Vector& v) {
  Index best = 0;
  double mag = -1.0;
  for (Index i = 0; i < v.size(); ++i) {
    double a = std::abs(v(i));
    if (a > mag + 1e-12) {
      mag = a;
      best = i;
    }
  }
  if (mag <= 0.0) return v;
  Complex phase = std::conj(v(best)) / mag;
  return v * phase;
}

}  // namespace detail

// Purification on system (x) environment: sum_l sqrt(c_l) |phi_l> |l> with
// eigenvalues in descending order.
inline PureState purify(const DensityMatrix& rho, Index env_dim) {
  if (env_dim < 1) throw ValidationError("purify: env_dim must be positive");
  const Index d = rho.dim();
  Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix());
  const auto& evals = es.eigenvalues();
  Index rank = 0;
  for (Index i = 0; i < d; ++i)
    if (evals(i) > tol::rank) ++rank;
  if (rank > env_dim)
    throw ValidationError("purify: env_dim " + std::to_string(env_dim) + " smaller than rank " + std::to_string(rank));

  Vector psi = Vector::Zero(d * env_dim);
  const Index used = std::min(d, env_dim);
  for (Index l = 0; l < used; ++l) {
    Index src = d - 1 - l;  // ascending storage
    const double c = evals(src);
    if (c <= tol::rank) continue;
    Vector phi = detail::canonical_phase(es.eigenvectors().col(src));
    for (Index a = 0; a < d; ++a) psi(a * env_dim + l) += std::sqrt(c) * phi(a);
  }
  return PureState::normalized(detail::canonical_phase(psi));
}

inline Matrix random_unitary_from(const Matrix& gaussian) {
  Eigen::HouseholderQR<Matrix> qr(gaussian);
  Matrix q = qr.householderQ() * Matrix::Identity(gaussian.rows(), gaussian.cols());
  Matrix r = qr.matrixQR();
  for (Index i = 0; i < q.cols(); ++i) {
    Complex d = r(i, i);
    double a = std::abs(d);
    if (a > 0.0) q.col(i) *= d / a;
  }
  return q;
}

// Columns orthonormal: V^dagger V = I.
inline double isometry_residual(const Matrix& v) {
  if (v.rows() < v.cols()) return INFINITY;
  return (v.adjoint() * v - Matrix::Identity(v.cols(), v.cols())).cwiseAbs().maxCoeff();
}

}  // namespace qre

#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "qre/linalg.hpp"

namespace qre {

// Outcome a of a two-outcome measurement: 1 <-> P, 0 <-> I - P.
inline Matrix outcome_operator(const Matrix& p, int a) {
  if (a != 0 && a != 1) throw ValidationError("outcome_operator: outcome must be 0 or 1");
  if (a == 1) return p;
  return Matrix::Identity(p.rows(), p.cols()) - p;
}

namespace detail {

inline void check_operator(const DensityMatrix& rho, const Matrix& op, const char* fn) {
  if (op.rows() != op.cols() || op.rows() != rho.dim())
    throw ValidationError(std::string(fn) + ": operator dimension does not match state");
}

inline double clip_probability(double p) {
  if (p < -tol::probability || p > 1.0 + tol::probability)
    throw ValidationError("probability " + std::to_string(p) + " outside [0, 1]");
  return std::clamp(p, 0.0, 1.0);
}

// Snaps probabilities within the tolerance of 0 or 1 so that a rounding-level
// branch is never selected.
inline double snap_probability(double p) {
  if (p < tol::probability) return 0.0;
  if (p > 1.0 - tol::probability) return 1.0;
  return p;
}

// Hermitian square root of a positive semidefinite effect.
inline Matrix psd_sqrt(const Matrix& e) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (e + e.adjoint()));
  Eigen::VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.cast<Complex>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace detail

struct MeasurementOutcome {
  int outcome = 0;
  DensityMatrix post_state;
  double probability = 0.0;
};

inline double outcome_probability(const DensityMatrix& rho, const Matrix& p, int a) {
  detail::check_operator(rho, p, "outcome_probability");
  return detail::clip_probability((outcome_operator(p, a) * rho.matrix()).trace().real());
}

// Unnormalized Lueders branch P^a rho P^a.
inline Matrix luders_branch(const DensityMatrix& rho, const Matrix& p, int a) {
  detail::check_operator(rho, p, "luders_branch");
  Matrix pa = outcome_operator(p, a);
  return pa * rho.matrix() * pa;
}

// Outcome 1 iff u < p(1); post-state by the Lueders rule.
inline MeasurementOutcome measure(const DensityMatrix& rho, const Matrix& p, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw ValidationError("measure: u must lie in [0, 1)");
  double p1 = detail::snap_probability(outcome_probability(rho, p, 1));
  int a = u < p1 ? 1 : 0;
  double pa = a == 1 ? p1 : 1.0 - p1;
  return {a, DensityMatrix::from_unnormalized(luders_branch(rho, p, a)), pa};
}

// Two-outcome instrument for a general effect E (0 <= E <= I) with Kraus
// operators sqrt(E) and sqrt(I - E). Used for non-projective test fixtures.
inline MeasurementOutcome measure_effect(const DensityMatrix& rho, const Matrix& effect, double u) {
  detail::check_operator(rho, effect, "measure_effect");
  if (!(u >= 0.0 && u < 1.0)) throw ValidationError("measure_effect: u must lie in [0, 1)");
  double p1 = detail::snap_probability(detail::clip_probability((effect * rho.matrix()).trace().real()));
  int a = u < p1 ? 1 : 0;
  Matrix k = detail::psd_sqrt(outcome_operator(effect, a));
  double pa = a == 1 ? p1 : 1.0 - p1;
  return {a, DensityMatrix::from_unnormalized(k * rho.matrix() * k.adjoint()), pa};
}

// tr(P2^b P1^a rho P1^a). Non-commuting pairs are still evaluated; if a
// warning sink is supplied, a message is appended for them.
inline double sequential_joint_prob(const DensityMatrix& rho, const Matrix& first, const Matrix& second, int a, int b,
                                    std::vector<std::string>* warnings = nullptr) {
  detail::check_operator(rho, first, "sequential_joint_prob");
  detail::check_operator(rho, second, "sequential_joint_prob");
  if (warnings != nullptr) {
    double c = commutator_norm(first, second);
    if (c > tol::commutation)
      warnings->push_back("sequential_joint_prob: measurements do not commute (||[A,B]|| = " + std::to_string(c) + ")");
  }
  Matrix branch = luders_branch(rho, first, a);
  return detail::clip_probability((outcome_operator(second, b) * branch).trace().real());
}

// Probability that a repeated instrument gives equal outcomes,
// sum_a tr(E_a K_a rho K_a^dagger) with K_a = sqrt(E_a).
inline double repeatability_analytic(const DensityMatrix& rho, const Matrix& effect) {
  detail::check_operator(rho, effect, "repeatability_analytic");
  double r = 0.0;
  for (int a = 0; a < 2; ++a) {
    Matrix e = outcome_operator(effect, a);
    Matrix k = detail::psd_sqrt(e);
    r += (e * k * rho.matrix() * k.adjoint()).trace().real();
  }
  return detail::clip_probability(r);
}

}  // namespace qre

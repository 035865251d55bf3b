#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "qre/measurement.hpp"
#include "qre/randomness.hpp"
#include "qre/scenarios.hpp"

namespace qre {

// Fraction of trials in which measuring the same instrument twice in
// sequence gives equal outcomes. The RNG is a diagnostic stream, separate
// from any protocol ledger.
inline double repeatability_statistic(const DensityMatrix& rho, const Matrix& effect, std::uint64_t samples,
                                      CounterRng& rng) {
  if (samples == 0) throw ValidationError("repeatability_statistic: samples must be positive");
  // Both branches of the first measurement are fixed, so tabulate them.
  double p1 = detail::snap_probability(detail::clip_probability((effect * rho.matrix()).trace().real()));
  double again[2] = {0.0, 0.0};
  for (int a = 0; a < 2; ++a) {
    double pa = a == 1 ? p1 : 1.0 - p1;
    if (pa == 0.0) continue;
    Matrix k = detail::psd_sqrt(outcome_operator(effect, a));
    DensityMatrix post = DensityMatrix::from_unnormalized(k * rho.matrix() * k.adjoint());
    again[a] = detail::snap_probability(detail::clip_probability((effect * post.matrix()).trace().real()));
  }
  std::uint64_t equal = 0;
  for (std::uint64_t t = 0; t < samples; ++t) {
    int a = rng.uniform01() < p1 ? 1 : 0;
    int b = rng.uniform01() < again[a] ? 1 : 0;
    equal += a == b;
  }
  return static_cast<double>(equal) / static_cast<double>(samples);
}

inline double repeatability_statistic(const Strategy& s, int i, std::uint64_t samples, CounterRng& rng) {
  return repeatability_statistic(s.density(), s.projector(i), samples, rng);
}

// max over edges and outcomes of |p(a,b|i,j) - p(b,a|j,i)|.
inline double no_disturbance_residual(const Strategy& s) {
  double r = 0.0;
  for (const Edge& e : s.scenario().edges()) {
    const Matrix& pi = s.projector(e.first);
    const Matrix& pj = s.projector(e.second);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        r = std::max(r, std::abs(sequential_joint_prob(s.density(), pi, pj, a, b) -
                                 sequential_joint_prob(s.density(), pj, pi, b, a)));
  }
  return r;
}

// Same quantity from simulated relative frequencies, samples per order and edge.
inline double no_disturbance_residual_empirical(const Strategy& s, std::uint64_t samples, CounterRng& rng) {
  if (samples == 0) throw ValidationError("no_disturbance_residual_empirical: samples must be positive");
  double r = 0.0;
  for (const Edge& e : s.scenario().edges()) {
    double freq[2][4] = {};
    for (int order = 0; order < 2; ++order) {
      const Matrix& first = s.projector(order == 0 ? e.first : e.second);
      const Matrix& second = s.projector(order == 0 ? e.second : e.first);
      for (std::uint64_t t = 0; t < samples; ++t) {
        MeasurementOutcome m1 = measure(s.density(), first, rng.uniform01());
        MeasurementOutcome m2 = measure(m1.post_state, second, rng.uniform01());
        // Index by (outcome of e.first, outcome of e.second).
        int a = order == 0 ? m1.outcome : m2.outcome;
        int b = order == 0 ? m2.outcome : m1.outcome;
        freq[order][2 * a + b] += 1.0;
      }
    }
    for (int c = 0; c < 4; ++c) r = std::max(r, std::abs(freq[0][c] - freq[1][c]) / static_cast<double>(samples));
  }
  return r;
}

}  // namespace qre

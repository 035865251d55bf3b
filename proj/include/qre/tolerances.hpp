#pragma once

// Numerical tolerances used across the library. Tests reference these
// names rather than literals so there is a single tuning point.

namespace qre::tol {

inline constexpr double normalization = 1e-12;  // | ||v|| - 1 |
inline constexpr double hermiticity = 1e-12;    // max |M - M^dagger|
inline constexpr double unit_trace = 1e-12;     // | tr(rho) - 1 |
inline constexpr double psd_floor = 1e-10;      // smallest admissible eigenvalue is -psd_floor
inline constexpr double projector = 1e-10;      // max |P^2 - P| for accepted projectors
inline constexpr double commutation = 1e-10;    // ||[A, B]|| on compatibility edges
inline constexpr double rank = 1e-10;           // eigenvalues above this count toward the rank
inline constexpr double purification = 1e-10;   // reduced-state round trip
inline constexpr double weight_sum = 1e-10;     // | sum of branch weights - 1 |
inline constexpr double uniform_weight = 1e-9;  // post-selected branch weights vs 1/2
inline constexpr double probability = 1e-12;    // probabilities in [-p, 1 + p] are clipped

}  // namespace qre::tol

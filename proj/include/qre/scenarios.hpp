#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qre/linalg.hpp"
#include "qre/measurement.hpp"

namespace qre {

enum class Parity { odd, even };

inline const char* to_string(Parity p) { return p == Parity::odd ? "odd" : "even"; }

inline Parity parse_parity(const std::string& s) {
  if (s == "odd") return Parity::odd;
  if (s == "even") return Parity::even;
  throw ValidationError("parse_parity: expected 'odd' or 'even', got '" + s + "'");
}

// Ordered pair of 1-based measurement indices.
struct Edge {
  int first = 0;
  int second = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// One probability term p(a, b | first, second) of a cycle inequality.
struct InequalityTerm {
  Edge edge;
  int a = 0;
  int b = 0;
};

class CycleScenario {
 public:
  CycleScenario(int n, Parity parity) : n_(n), parity_(parity) {
    if (parity == Parity::odd && (n < 5 || n % 2 == 0))
      throw ValidationError("CycleScenario: odd parity requires odd N >= 5, got " + std::to_string(n));
    if (parity == Parity::even && (n < 4 || n % 2 != 0))
      throw ValidationError("CycleScenario: even parity requires even N >= 4, got " + std::to_string(n));
    for (int i = 1; i <= n; ++i) edges_.push_back({i, successor(i)});
  }

  int size() const { return n_; }
  Parity parity() const { return parity_; }
  const std::vector<Edge>& edges() const { return edges_; }
  int exclusivity_order() const { return parity_ == Parity::even ? 2 * n_ : n_; }

  void check_index(int i) const {
    if (i < 1 || i > n_) throw ValidationError("CycleScenario: measurement index " + std::to_string(i) + " out of range");
  }

  int successor(int i) const {
    check_index(i);
    return i % n_ + 1;
  }
  int predecessor(int i) const {
    check_index(i);
    return (i - 2 + n_) % n_ + 1;
  }

  // Cyclic successor for l = 0, predecessor for l = 1.
  int neighbor(int i, int l) const {
    if (l != 0 && l != 1) throw ValidationError("CycleScenario::neighbor: l must be 0 or 1");
    return l == 0 ? successor(i) : predecessor(i);
  }

  bool adjacent(int i, int j) const { return successor(i) == j || predecessor(i) == j; }

  // Odd:  beta  = sum_i p(1,0|i,i+1).
  // Even: gamma = sum_{i<N} [p(0,0|i,i+1) + p(1,1|i,i+1)] + p(0,1|N,1) + p(1,0|N,1).
  std::vector<InequalityTerm> terms() const {
    std::vector<InequalityTerm> t;
    if (parity_ == Parity::odd) {
      for (const Edge& e : edges_) t.push_back({e, 1, 0});
      return t;
    }
    for (int i = 1; i < n_; ++i) {
      t.push_back({{i, i + 1}, 0, 0});
      t.push_back({{i, i + 1}, 1, 1});
    }
    t.push_back({{n_, 1}, 0, 1});
    t.push_back({{n_, 1}, 1, 0});
    return t;
  }

  friend bool operator==(const CycleScenario& a, const CycleScenario& b) {
    return a.n_ == b.n_ && a.parity_ == b.parity_;
  }

 private:
  int n_;
  Parity parity_;
  std::vector<Edge> edges_;
};

inline double nchv_bound(const CycleScenario& sc) {
  const double n = sc.size();
  return sc.parity() == Parity::odd ? (n - 1.0) / 2.0 : n - 1.0;
}

inline double quantum_bound(const CycleScenario& sc) {
  const double n = sc.size();
  const double c = std::cos(std::numbers::pi / n);
  return sc.parity() == Parity::odd ? n * c / (1.0 + c) : 0.5 * n * (1.0 + c);
}

// A pure state and one projector per measurement index. Immutable.
class Strategy {
 public:
  Strategy(CycleScenario scenario, PureState state, std::vector<Matrix> projectors)
      : scenario_(std::move(scenario)), state_(std::move(state)), rho_(state_), projectors_(std::move(projectors)) {
    if (static_cast<int>(projectors_.size()) != scenario_.size())
      throw ValidationError("Strategy: expected " + std::to_string(scenario_.size()) + " projectors, got " +
                            std::to_string(projectors_.size()));
    for (std::size_t k = 0; k < projectors_.size(); ++k) {
      const Matrix& p = projectors_[k];
      if (p.rows() != state_.dim() || p.cols() != state_.dim())
        throw ValidationError("Strategy: projector " + std::to_string(k + 1) + " has wrong dimension");
      if (!all_finite(p)) throw ValidationError("Strategy: projector " + std::to_string(k + 1) + " has non-finite entries");
      if (projector_residual(p) > tol::projector)
        throw ValidationError("Strategy: operator " + std::to_string(k + 1) + " is not a projector");
    }
  }

  const CycleScenario& scenario() const { return scenario_; }
  const PureState& state() const { return state_; }
  const DensityMatrix& density() const { return rho_; }
  const std::vector<Matrix>& projectors() const { return projectors_; }
  Index dim() const { return state_.dim(); }

  // 1-based.
  const Matrix& projector(int i) const {
    scenario_.check_index(i);
    return projectors_[i - 1];
  }

 private:
  CycleScenario scenario_;
  PureState state_;
  DensityMatrix rho_;
  std::vector<Matrix> projectors_;
};

// cos^2(theta) for the optimal odd-cycle vectors.
inline double odd_cycle_cos2_theta(int n) {
  const double c = std::cos(std::numbers::pi / n);
  return c / (1.0 + c);
}

// |v_i> = (cos t, sin t sin phi_i, sin t cos phi_i), phi_i = i pi (N-1)/N, i = 1..N.
inline Vector odd_cycle_vector(int n, int i) {
  const double ct = std::sqrt(odd_cycle_cos2_theta(n));
  const double st = std::sqrt(1.0 - ct * ct);
  const double phi = i * std::numbers::pi * (n - 1) / n;
  Vector v(3);
  v << ct, st * std::sin(phi), st * std::cos(phi);
  return v;
}

inline Strategy odd_cycle_strategy(int n) {
  CycleScenario sc(n, Parity::odd);
  std::vector<Matrix> projectors;
  for (int i = 1; i <= n; ++i) projectors.push_back(projector_from_vector(odd_cycle_vector(n, i)));
  return Strategy(sc, PureState::basis(3, 0), std::move(projectors));
}

// Rank-1 qubit projector (I + s.sigma)/2 with s in the x-y plane at angle t.
inline Matrix qubit_projector(double t) {
  Matrix p(2, 2);
  p << 0.5, 0.5 * std::polar(1.0, -t), 0.5 * std::polar(1.0, t), 0.5;
  return p;
}

// Even indices act on qubit 1 with Bloch angle i pi/N; odd indices act on
// qubit 2 with the conjugate angle -i pi/N. The conjugation on qubit 2 is what
// makes the Phi+ correlations reach the quantum bound.
inline Strategy even_cycle_strategy(int n) {
  CycleScenario sc(n, Parity::even);
  const Matrix id2 = Matrix::Identity(2, 2);
  std::vector<Matrix> projectors;
  for (int i = 1; i <= n; ++i) {
    const double t = i * std::numbers::pi / n;
    if (i % 2 == 0)
      projectors.push_back(tensor(qubit_projector(t), id2));
    else
      projectors.push_back(tensor(id2, qubit_projector(-t)));
  }
  Vector phi(4);
  phi << 1.0, 0.0, 0.0, 1.0;
  return Strategy(sc, PureState::normalized(phi), std::move(projectors));
}

inline Strategy ideal_strategy(const CycleScenario& sc) {
  return sc.parity() == Parity::odd ? odd_cycle_strategy(sc.size()) : even_cycle_strategy(sc.size());
}

// Replace measurement i (1-based) by another projector.
inline Strategy with_projector(const Strategy& s, int i, Matrix p) {
  s.scenario().check_index(i);
  std::vector<Matrix> ps = s.projectors();
  ps[i - 1] = std::move(p);
  return Strategy(s.scenario(), s.state(), std::move(ps));
}

inline Strategy with_state(const Strategy& s, PureState psi) { return Strategy(s.scenario(), std::move(psi), s.projectors()); }

// Inequality value from sequential joint probabilities on an arbitrary state.
inline double inequality_value(const CycleScenario& sc, const DensityMatrix& rho, const std::vector<Matrix>& projectors) {
  if (static_cast<int>(projectors.size()) != sc.size()) throw ValidationError("inequality_value: projector count mismatch");
  double v = 0.0;
  for (const InequalityTerm& t : sc.terms())
    v += sequential_joint_prob(rho, projectors[t.edge.first - 1], projectors[t.edge.second - 1], t.a, t.b);
  return v;
}

inline double inequality_value(const Strategy& s) { return inequality_value(s.scenario(), s.density(), s.projectors()); }

struct StrategyReport {
  std::optional<double> edge_orthogonality;  // max |tr(P_i P_j)| on edges, odd parity only
  double commutation = 0.0;                  // max ||[P_i, P_j]|| on edges
  double achieved_value = 0.0;
  double bound_gap = 0.0;  // quantum_bound - achieved_value
};

inline StrategyReport verify_strategy(const Strategy& s) {
  const CycleScenario& sc = s.scenario();
  StrategyReport r;
  double orth = 0.0;
  for (const Edge& e : sc.edges()) {
    const Matrix& a = s.projector(e.first);
    const Matrix& b = s.projector(e.second);
    r.commutation = std::max(r.commutation, commutator_norm(a, b));
    orth = std::max(orth, std::abs((a * b).trace()));
  }
  if (sc.parity() == Parity::odd) r.edge_orthogonality = orth;
  r.achieved_value = inequality_value(s);
  r.bound_gap = quantum_bound(sc) - r.achieved_value;
  return r;
}

}  // namespace qre

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "qre/scenarios.hpp"

using namespace qre;

TEST(CycleScenario, ParityValidation) {
  EXPECT_THROW(CycleScenario(3, Parity::odd), ValidationError);
  EXPECT_THROW(CycleScenario(6, Parity::odd), ValidationError);
  EXPECT_THROW(CycleScenario(5, Parity::even), ValidationError);
  EXPECT_THROW(CycleScenario(2, Parity::even), ValidationError);
  EXPECT_NO_THROW(CycleScenario(5, Parity::odd));
  EXPECT_NO_THROW(CycleScenario(4, Parity::even));
  EXPECT_THROW(parse_parity("neither"), ValidationError);
}

TEST(CycleScenario, EdgesFormACycle) {
  for (int n : {5, 7, 9}) {
    CycleScenario sc(n, Parity::odd);
    ASSERT_EQ(static_cast<int>(sc.edges().size()), n);
    for (int i = 1; i <= n; ++i) {
      EXPECT_EQ(sc.predecessor(sc.successor(i)), i);
      EXPECT_TRUE(sc.adjacent(i, sc.neighbor(i, 0)));
      EXPECT_TRUE(sc.adjacent(i, sc.neighbor(i, 1)));
      EXPECT_FALSE(sc.adjacent(i, i));
    }
    EXPECT_EQ(sc.successor(n), 1);
    EXPECT_EQ(sc.predecessor(1), n);
  }
  EXPECT_EQ(CycleScenario(4, Parity::even).exclusivity_order(), 8);
  EXPECT_THROW(CycleScenario(5, Parity::odd).check_index(6), ValidationError);
}

TEST(Bounds, NchvValues) {
  EXPECT_EQ(nchv_bound(CycleScenario(5, Parity::odd)), 2.0);
  EXPECT_EQ(nchv_bound(CycleScenario(4, Parity::even)), 3.0);
  EXPECT_EQ(nchv_bound(CycleScenario(7, Parity::odd)), 3.0);
}

TEST(Bounds, NchvMatchesBruteForceAssignments) {
  for (int n : {5, 7, 9, 11}) {
    CycleScenario sc(n, Parity::odd);
    EXPECT_EQ(nchv_bound(sc), oracle::brute_force_alpha(sc)) << n;
  }
  for (int n : {4, 6, 8, 10}) {
    CycleScenario sc(n, Parity::even);
    EXPECT_EQ(nchv_bound(sc), oracle::brute_force_alpha(sc)) << n;
  }
}

TEST(Bounds, QuantumValues) {
  EXPECT_NEAR(quantum_bound(CycleScenario(5, Parity::odd)), std::sqrt(5.0), 1e-12);
  EXPECT_NEAR(quantum_bound(CycleScenario(4, Parity::even)), 2.0 + std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(quantum_bound(CycleScenario(6, Parity::even)), 5.598076211353314, 1e-12);
  EXPECT_NEAR(quantum_bound(CycleScenario(8, Parity::even)), 7.695518130045145, 1e-12);
  // bound / N -> 1/2 for large odd N
  EXPECT_NEAR(quantum_bound(CycleScenario(100001, Parity::odd)) / 100001.0, 0.5, 1e-9);
  for (int n : {5, 7, 9, 11, 13})
    EXPECT_GT(quantum_bound(CycleScenario(n, Parity::odd)), nchv_bound(CycleScenario(n, Parity::odd)));
}

TEST(OddStrategy, CosThetaAndFirstVector) {
  EXPECT_NEAR(odd_cycle_cos2_theta(5), 0.447213595499958, 1e-14);
  Vector v0 = ideal_strategy(CycleScenario(5, Parity::odd)).state().amplitudes();
  EXPECT_NEAR(std::abs(v0(0) - 1.0), 0.0, 1e-15);
  EXPECT_NEAR(v0.tail(2).norm(), 0.0, 1e-15);
}

TEST(OddStrategy, NeighborsOrthogonalAndBoundAttained) {
  for (int n : {5, 7, 9, 11, 15}) {
    for (int i = 1; i <= n; ++i) {
      Vector a = odd_cycle_vector(n, i), b = odd_cycle_vector(n, i % n + 1);
      EXPECT_NEAR(std::abs(a.dot(b)), 0.0, 1e-12) << n << " " << i;
      EXPECT_NEAR(a.norm(), 1.0, 1e-14);
    }
    Strategy s = odd_cycle_strategy(n);
    StrategyReport r = verify_strategy(s);
    EXPECT_LE(r.bound_gap, 1e-9) << n;
    EXPECT_LE(std::abs(r.bound_gap), 1e-9) << n;
    EXPECT_LT(r.commutation, 1e-12);
    ASSERT_TRUE(r.edge_orthogonality.has_value());
    EXPECT_LT(*r.edge_orthogonality, 1e-12);
    EXPECT_NEAR(inequality_value(s), oracle::inequality_by_edges(s), 1e-12);
  }
}

TEST(OddStrategy, KcbsValueSqrtFive) {
  Strategy s = odd_cycle_strategy(5);
  EXPECT_NEAR(inequality_value(s), std::sqrt(5.0), 1e-9);
  EXPECT_NEAR(oracle::inequality_by_edges(s), 2.23606797749979, 1e-12);
}

TEST(EvenStrategy, BellStateAndCommutingNeighbors) {
  Strategy s = even_cycle_strategy(4);
  Vector phi = s.state().amplitudes();
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(std::abs(phi(0) - r), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(phi(3) - r), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(phi(1)) + std::abs(phi(2)), 0.0, 1e-15);
  for (int n : {4, 6, 8, 10}) {
    Strategy e = even_cycle_strategy(n);
    StrategyReport rep = verify_strategy(e);
    EXPECT_LT(rep.commutation, 1e-12) << n;
    EXPECT_FALSE(rep.edge_orthogonality.has_value());
    EXPECT_LE(std::abs(rep.bound_gap), 1e-9) << n;
    EXPECT_NEAR(inequality_value(e), oracle::inequality_by_edges(e), 1e-12);
  }
}

TEST(EvenStrategy, ValuesForFourSixEight) {
  EXPECT_NEAR(inequality_value(even_cycle_strategy(4)), 3.41421356237310, 1e-12);
  EXPECT_NEAR(inequality_value(even_cycle_strategy(6)), 5.598076211353314, 1e-12);
  EXPECT_NEAR(inequality_value(even_cycle_strategy(8)), 7.695518130045145, 1e-12);
}

TEST(QubitProjector, IsRankOneProjector) {
  for (double t : {0.0, 0.3, 1.7, -2.0}) {
    Matrix p = qubit_projector(t);
    EXPECT_LT(projector_residual(p), 1e-14);
    EXPECT_NEAR(p.trace().real(), 1.0, 1e-14);
  }
}

TEST(Strategy, Validation) {
  Strategy s = odd_cycle_strategy(5);
  std::vector<Matrix> four(s.projectors().begin(), s.projectors().begin() + 4);
  EXPECT_THROW(Strategy(s.scenario(), s.state(), four), ValidationError);
  EXPECT_THROW(with_projector(s, 2, 0.9 * s.projector(2)), ValidationError);
  EXPECT_THROW(with_projector(s, 2, Matrix::Identity(2, 2)), ValidationError);
  EXPECT_THROW(s.projector(0), ValidationError);
  EXPECT_THROW(s.projector(6), ValidationError);
}

TEST(Strategy, ComplementCorruptionBreaksBound) {
  for (int i = 1; i <= 5; ++i) {
    Strategy s = odd_cycle_strategy(5);
    Matrix comp = Matrix::Identity(3, 3) - s.projector(i);
    StrategyReport r = verify_strategy(with_projector(s, i, comp));
    EXPECT_GT(r.bound_gap, 0.1) << i;
  }
}

TEST(Strategy, InequalityAtMostQuantumBoundForRandomStates) {
  // Fixed projectors, random states: value must stay below the Lovasz bound.
  std::mt19937_64 g(21);
  Strategy s = odd_cycle_strategy(5);
  for (int t = 0; t < 100; ++t) {
    Strategy r = with_state(s, oracle::random_pure(g, 3));
    EXPECT_LE(inequality_value(r), quantum_bound(s.scenario()) + 1e-12);
  }
}

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qre/security.hpp"

using namespace qre;

namespace {

// Single-round cq state of the correlated model, post-selected to uniform.
CqState noisy_round(double delta) {
  Strategy s = odd_cycle_strategy(5);
  return post_select(post_measurement_cq(correlated_joint_state(s, delta), s.projector(1)));
}

double classical_distance_from_uniform(const std::vector<CqState>& rounds) {
  // sum_k |p(k) - 2^-m| for the product of the rounds' label distributions
  const int m = static_cast<int>(rounds.size());
  double d = 0.0;
  for (std::uint32_t k = 0; k < (1u << m); ++k) {
    double p = 1.0;
    for (int j = 0; j < m; ++j) p *= rounds[j].weight_of(static_cast<std::uint8_t>((k >> (m - 1 - j)) & 1u));
    d += std::abs(p - std::ldexp(1.0, -m));
  }
  return d;
}

}  // namespace

TEST(JointState, Validation) {
  EXPECT_THROW(JointState(PureState::basis(4, 0), 3, 2), ValidationError);
  EXPECT_THROW(JointState(PureState::basis(4, 0), 0, 4), ValidationError);
}

TEST(Purification, PureStateWithTrivialEve) {
  Strategy s = odd_cycle_strategy(5);
  JointState j = adversarial_purification(s, 1);
  EXPECT_EQ(j.eve_dim(), 1);
  EXPECT_LT((j.alice_marginal().matrix() - s.density().matrix()).norm(), 1e-12);
  EXPECT_NEAR(std::abs(j.psi().amplitudes().dot(s.state().amplitudes())), 1.0, 1e-12);
}

TEST(Purification, MixedQubitEmbeddedInQutrit) {
  std::mt19937_64 g(41);
  Matrix v = oracle::random_isometry(g, 3, 2);
  JointState j = adversarial_purification(DensityMatrix::maximally_mixed(2), 2, v);
  EXPECT_EQ(j.alice_dim(), 3);
  Eigen::JacobiSVD<Matrix> svd(j.coefficients());
  EXPECT_NEAR(svd.singularValues()(0), std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(svd.singularValues()(1), std::sqrt(0.5), 1e-12);
  Matrix expect = 0.5 * v * v.adjoint();
  EXPECT_LT((j.alice_marginal().matrix() - expect).norm(), 1e-12);
  Matrix by_loops = oracle::partial_trace_loops(j.psi().projector(), {3, 2}, {0});
  EXPECT_LT((by_loops - expect).norm(), 1e-12);
  EXPECT_THROW(adversarial_purification(DensityMatrix::maximally_mixed(2), 1, v), ValidationError);
  EXPECT_THROW(adversarial_purification(DensityMatrix::maximally_mixed(2), 2, Matrix::Ones(3, 2)), ValidationError);
}

TEST(PostMeasurementCq, ProductEveConditionalsEqualMarginal) {
  std::mt19937_64 g(42);
  Strategy s = odd_cycle_strategy(5);
  JointState j = product_joint_state(s.state(), oracle::random_pure(g, 3));
  CqState cq = post_measurement_cq(j, s.projector(1));
  ASSERT_EQ(cq.branches().size(), 2u);
  for (const auto& b : cq.branches()) {
    EXPECT_LE(trace_norm(b.eve_state.matrix() - j.eve_marginal().matrix()) / 2, 1e-12);
    EXPECT_NEAR(b.weight, outcome_probability(s.density(), s.projector(1), b.label[0]), 1e-12);
  }
}

TEST(PostMeasurementCq, MaximallyEntangledGivesOrthogonalConditionals) {
  Vector phi = Vector::Zero(4);
  phi(0) = phi(3) = 1.0 / std::sqrt(2.0);
  JointState j(PureState(phi), 2, 2);
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 1.0;
  CqState cq = post_measurement_cq(j, z);
  ASSERT_EQ(cq.branches().size(), 2u);
  EXPECT_NEAR(std::abs((cq.branches()[0].eve_state.matrix() * cq.branches()[1].eve_state.matrix()).trace()), 0.0, 1e-14);
}

TEST(PostMeasurementCq, DropsZeroBranch) {
  JointState j = product_joint_state(PureState::basis(2, 0), PureState::basis(2, 0));
  Matrix z = Matrix::Zero(2, 2);
  z(0, 0) = 1.0;
  CqState cq = post_measurement_cq(j, z);
  EXPECT_EQ(cq.branches().size(), 1u);
  EXPECT_EQ(cq.weight_of(1), 1.0);
  EXPECT_THROW(post_measurement_cq(j, Matrix::Identity(3, 3)), ValidationError);
}

TEST(SingleRound, ProductEveIsZero) {
  EXPECT_LE(single_round_security_distance(noisy_round(0.0)), 1e-10);
}

TEST(SingleRound, ClassicalCopyIsFourP0P1) {
  for (double p0 : {0.5, 0.3, 0.9}) {
    Vector psi = Vector::Zero(4);
    psi(0) = std::sqrt(p0);
    psi(3) = std::sqrt(1 - p0);
    JointState j(PureState(psi), 2, 2);
    Matrix z = Matrix::Zero(2, 2);
    z(1, 1) = 1.0;
    CqState cq = post_measurement_cq(j, z);
    EXPECT_NEAR(single_round_security_distance(cq), 4 * p0 * (1 - p0), 1e-12);
  }
}

TEST(SingleRound, IdenticalBranchesGiveZero) {
  DensityMatrix e = DensityMatrix::maximally_mixed(3);
  CqState cq({{{0}, 0.4, e}, {{1}, 0.6, e}});
  EXPECT_NEAR(single_round_security_distance(cq), 0.0, 1e-15);
}

TEST(IsometricEmbeddings, ProductEveWithinTolerance) {
  std::mt19937_64 g(43);
  Strategy s = odd_cycle_strategy(5);
  for (Index eve_dim : {1, 2, 3})
    for (Index junk_dim : {1, 2, 3})
      for (int t = 0; t < 3; ++t) {
        DensityMatrix junk = oracle::random_pure(g, junk_dim);
        const Index d_in = 3 * junk_dim;
        Matrix v = oracle::random_isometry(g, d_in + 1, d_in);
        EmbeddedRound er = embedded_round(s, junk, v, eve_dim, 1 + t % 5);
        EXPECT_EQ(er.joint.eve_dim(), eve_dim);
        EXPECT_LE(single_round_security_distance(post_measurement_cq(er.joint, er.measurement)), 1e-10);
      }
}

TEST(CqState, Validation) {
  DensityMatrix e = DensityMatrix::maximally_mixed(2);
  EXPECT_THROW(CqState({}), ValidationError);
  EXPECT_THROW(CqState({{{0}, 0.4, e}, {{1}, 0.4, e}}), ValidationError);
  EXPECT_THROW(CqState({{{0}, 0.5, e}, {{1}, 0.5, DensityMatrix::maximally_mixed(3)}}), ValidationError);
}

TEST(PostSelect, UniformWeights) {
  CqState cq = noisy_round(0.05);
  EXPECT_NEAR(cq.weight_of(0), 0.5, 1e-12);
  EXPECT_NEAR(cq.weight_of(1), 0.5, 1e-12);
}

TEST(FinalKey, MatchesDenseOracle) {
  for (double delta : {0.0, 0.01, 0.1, 0.3})
    for (int m = 1; m <= 3; ++m) {
      std::vector<CqState> rounds(m, noisy_round(delta));
      EXPECT_NEAR(key_distance_from_uniform(rounds), oracle::dense_key_distance(rounds), 1e-9) << delta << " " << m;
    }
}

TEST(FinalKey, MixedRoundsMatchDenseOracle) {
  std::vector<CqState> rounds = {noisy_round(0.02), noisy_round(0.2), noisy_round(0.07)};
  EXPECT_NEAR(final_key_distance(rounds).distance, oracle::dense_key_distance(rounds), 1e-9);
  // non-uniform rounds through the unrestricted routine
  Strategy s = odd_cycle_strategy(5);
  std::vector<CqState> raw = {post_measurement_cq(correlated_joint_state(s, 0.1), s.projector(1)),
                              post_measurement_cq(correlated_joint_state(s, 0.3), s.projector(2))};
  EXPECT_NEAR(key_distance_from_uniform(raw), oracle::dense_key_distance(raw), 1e-9);
}

TEST(FinalKey, SingleRoundReduces) {
  CqState cq = noisy_round(0.1);
  SecurityReport r = final_key_distance({cq});
  EXPECT_NEAR(r.distance, single_round_security_distance(cq), 1e-12);
  EXPECT_NEAR(r.epsilon_sec, r.distance, 1e-12);
}

TEST(FinalKey, ProductRoundsAreUniform) {
  for (int m = 1; m <= 8; ++m) {
    std::vector<CqState> rounds(m, noisy_round(0.0));
    EXPECT_LE(final_key_distance(rounds).distance, 1e-9) << m;
  }
}

TEST(FinalKey, GrowsAtMostLinearly) {
  CqState cq = noisy_round(0.05);
  const double d1 = single_round_security_distance(cq);
  for (int m = 1; m <= 6; ++m) {
    SecurityReport r = final_key_distance(std::vector<CqState>(m, cq));
    EXPECT_LE(r.distance, m * d1 * (1 + 1e-6)) << m;
    EXPECT_NEAR(r.epsilon_sec, m * d1, 1e-12);
  }
}

TEST(FinalKey, AtLeastClassicalDistance) {
  Strategy s = odd_cycle_strategy(5);
  for (double delta : {0.0, 0.05, 0.2}) {
    std::vector<CqState> rounds = {post_measurement_cq(correlated_joint_state(s, delta), s.projector(1)),
                                   post_measurement_cq(correlated_joint_state(s, delta), s.projector(3))};
    EXPECT_GE(key_distance_from_uniform(rounds) + 1e-12, classical_distance_from_uniform(rounds));
  }
}

TEST(FinalKey, DroppingRoundsNeverIncreasesDistance) {
  std::vector<CqState> rounds = {noisy_round(0.04), noisy_round(0.15), noisy_round(0.0), noisy_round(0.3)};
  for (std::size_t k = rounds.size(); k > 1; --k) {
    std::vector<CqState> fewer(rounds.begin(), rounds.begin() + static_cast<long>(k) - 1);
    std::vector<CqState> all(rounds.begin(), rounds.begin() + static_cast<long>(k));
    EXPECT_LE(key_distance_from_uniform(fewer), key_distance_from_uniform(all) + 1e-12) << k;
  }
}

TEST(FinalKey, Capacity) {
  EXPECT_THROW(final_key_distance(std::vector<CqState>(9, noisy_round(0.0))), CapacityError);
  EXPECT_THROW(final_key_distance({}), ValidationError);
  Strategy s = odd_cycle_strategy(5);
  CqState raw = post_measurement_cq(correlated_joint_state(s, 0.1), s.projector(1));
  EXPECT_THROW(final_key_distance({raw}), ValidationError);
}

TEST(Perturbation, ZeroIsIdentity) {
  Strategy s = odd_cycle_strategy(5);
  Strategy p = perturbed_strategy(s, 0.0, PerturbationMode::state_rotation);
  EXPECT_EQ((p.state().amplitudes() - s.state().amplitudes()).norm(), 0.0);
  EXPECT_THROW(perturbed_strategy(s, 0.6, PerturbationMode::state_rotation), ValidationError);
}

TEST(Perturbation, DeficitQuadraticInDelta) {
  // beta(delta) = beta_QT - gap sin^2(delta) exactly for the state rotation;
  // check against a least-squares fit of eps = a delta^2.
  Strategy s = odd_cycle_strategy(5);
  const double bq = quantum_bound(s.scenario());
  double sxy = 0, sxx = 0;
  std::vector<double> ds, es;
  for (int k = 1; k <= 10; ++k) {
    double d = 0.005 * k;
    double e = bq - inequality_value(perturbed_strategy(s, d, PerturbationMode::state_rotation));
    ds.push_back(d);
    es.push_back(e);
    sxx += d * d * d * d;
    sxy += d * d * e;
  }
  const double a = sxy / sxx;
  for (std::size_t k = 0; k < ds.size(); ++k) EXPECT_LT(std::abs(es[k] - a * ds[k] * ds[k]) / es[k], 0.05);
  EXPECT_NEAR(a, rotation_gap(s), 0.05 * rotation_gap(s));
  EXPECT_GT(rotation_gap(s), 0.0);
}

TEST(Perturbation, StructurePreserved) {
  Strategy s = odd_cycle_strategy(5);
  for (PerturbationMode mode : {PerturbationMode::state_rotation, PerturbationMode::measurement_rotation}) {
    Strategy p = perturbed_strategy(s, 0.1, mode);
    StrategyReport r = verify_strategy(p);
    EXPECT_LT(r.commutation, 1e-10);
    EXPECT_GT(r.bound_gap, 0.0);
    for (const Matrix& m : p.projectors()) EXPECT_LT(projector_residual(m), 1e-10);
  }
}

TEST(Sweep, CorrelatedSlopeNearHalf) {
  Strategy s = odd_cycle_strategy(5);
  SweepResult r = robustness_sweep(5, delta_grid_for_epsilon(s, 1e-6, 1e-2, 17), EveModel::correlated);
  ASSERT_TRUE(r.fit);
  EXPECT_GE(r.fit->slope, 0.4);
  EXPECT_LE(r.fit->slope, 0.6);
  EXPECT_GE(r.fit->r_squared, 0.98);
  ASSERT_EQ(r.points.size(), 17u);
  EXPECT_NEAR(r.points.front().epsilon, 1e-6, 1e-9);
  EXPECT_NEAR(r.points.back().epsilon, 1e-2, 1e-9);
}

TEST(Sweep, ProductModelStaysZero) {
  Strategy s = odd_cycle_strategy(5);
  SweepResult r = robustness_sweep(5, delta_grid_for_epsilon(s, 1e-6, 1e-2, 9), EveModel::product);
  for (const auto& p : r.points) EXPECT_LE(p.distance, 1e-10);
  EXPECT_FALSE(r.fit.has_value());
}

TEST(Sweep, DegenerateGridsRejected) {
  Strategy s = odd_cycle_strategy(5);
  EXPECT_THROW(robustness_sweep(5, {0.0}, EveModel::correlated), ValidationError);
  EXPECT_THROW(robustness_sweep(5, delta_grid_for_epsilon(s, 1e-4, 1e-3, 5), EveModel::correlated), ValidationError);
  EXPECT_THROW(robustness_sweep(5, delta_grid_for_epsilon(s, 1e-6, 1e-2, 5), EveModel::correlated,
                                PerturbationMode::measurement_rotation),
               ValidationError);
  EXPECT_THROW(delta_grid_for_epsilon(s, 1e-6, 10.0, 5), ValidationError);
}

TEST(Sweep, KcbsNumbers) {
  const double eps = std::sqrt(5.0) - 2.236;
  EXPECT_NEAR(std::sqrt(eps), 8.2e-3, 0.1e-3);
}

TEST(FitLogLog, RecoversPowerLaw) {
  std::vector<double> x, y;
  for (int k = 0; k < 10; ++k) {
    x.push_back(std::pow(10.0, -k * 0.5));
    y.push_back(3.0 * std::pow(x.back(), 0.7));
  }
  LogLogFit f = fit_log_log(x, y);
  EXPECT_NEAR(f.slope, 0.7, 1e-12);
  EXPECT_NEAR(f.intercept, std::log10(3.0), 1e-12);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
  EXPECT_THROW(fit_log_log({1.0}, {1.0}), ValidationError);
}

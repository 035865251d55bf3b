#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qre/linalg.hpp"
#include "qre/measurement.hpp"
#include "qre/protocol.hpp"
#include "qre/scenarios.hpp"

namespace qre {

class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Pure state on Alice (x) Eve, Alice being the more significant factor.
class JointState {
 public:
  JointState(PureState psi, Index alice_dim, Index eve_dim) : psi_(std::move(psi)), da_(alice_dim), de_(eve_dim) {
    if (da_ < 1 || de_ < 1) throw ValidationError("JointState: dimensions must be positive");
    if (da_ * de_ != psi_.dim()) throw ValidationError("JointState: d_A * d_E does not match amplitude length");
  }

  const PureState& psi() const { return psi_; }
  Index alice_dim() const { return da_; }
  Index eve_dim() const { return de_; }

  // Amplitudes as a d_A x d_E matrix.
  Matrix coefficients() const {
    Matrix c(da_, de_);
    for (Index a = 0; a < da_; ++a)
      for (Index e = 0; e < de_; ++e) c(a, e) = psi_.amplitudes()(a * de_ + e);
    return c;
  }

  DensityMatrix alice_marginal() const {
    Matrix c = coefficients();
    return DensityMatrix::from_unnormalized(c * c.adjoint());
  }

  DensityMatrix eve_marginal() const {
    Matrix c = coefficients();
    return DensityMatrix::from_unnormalized(c.transpose() * c.conjugate());
  }

 private:
  PureState psi_;
  Index da_;
  Index de_;
};

inline JointState product_joint_state(const PureState& alice, const PureState& eve) {
  return JointState(PureState::normalized(tensor(alice.amplitudes(), eve.amplitudes())), alice.dim(), eve.dim());
}

// Purification of V rho V^dagger held jointly with Eve. An empty isometry
// means the identity.
inline JointState adversarial_purification(const DensityMatrix& rho, Index eve_dim, const Matrix& isometry = Matrix()) {
  if (isometry.size() == 0) return JointState(purify(rho, eve_dim), rho.dim(), eve_dim);
  if (isometry.cols() != rho.dim()) throw ValidationError("adversarial_purification: isometry has wrong input dimension");
  if (isometry_residual(isometry) > 1e-10) throw ValidationError("adversarial_purification: embedding is not an isometry");
  DensityMatrix embedded = DensityMatrix::from_unnormalized(isometry * rho.matrix() * isometry.adjoint());
  return JointState(purify(embedded, eve_dim), embedded.dim(), eve_dim);
}

inline JointState adversarial_purification(const Strategy& s, Index eve_dim, const Matrix& isometry = Matrix()) {
  return adversarial_purification(s.density(), eve_dim, isometry);
}

// Ideal strategy carried into a larger space: state V(rho (x) junk)V^dagger,
// measurement V(P_i (x) I)V^dagger. Eve purifies the whole.
struct EmbeddedRound {
  JointState joint;
  Matrix measurement;
};

inline EmbeddedRound embedded_round(const Strategy& s, const DensityMatrix& junk, const Matrix& isometry, Index eve_dim,
                                    int i = 1) {
  const Index dj = junk.dim();
  DensityMatrix rho(tensor(s.density().matrix(), junk.matrix()));
  Matrix p = tensor(s.projector(i), Matrix::Identity(dj, dj));
  if (isometry.size() != 0) {
    if (isometry.cols() != rho.dim()) throw ValidationError("embedded_round: isometry has wrong input dimension");
    p = isometry * p * isometry.adjoint();
  }
  return {adversarial_purification(rho, eve_dim, isometry), p};
}

struct CqBranch {
  std::vector<std::uint8_t> label;
  double weight = 0.0;
  DensityMatrix eve_state;
};

// sum_k p(k) |k><k| (x) rho_E^k, stored branch by branch.
class CqState {
 public:
  explicit CqState(std::vector<CqBranch> branches) : branches_(std::move(branches)) {
    if (branches_.empty()) throw ValidationError("CqState: no branches");
    double sum = 0.0;
    for (const auto& b : branches_) {
      if (!(b.weight >= 0.0)) throw ValidationError("CqState: negative branch weight");
      if (b.eve_state.dim() != branches_.front().eve_state.dim()) throw ValidationError("CqState: Eve dimensions differ");
      sum += b.weight;
    }
    if (std::abs(sum - 1.0) > tol::weight_sum) throw ValidationError("CqState: weights do not sum to 1");
  }

  const std::vector<CqBranch>& branches() const { return branches_; }
  Index eve_dim() const { return branches_.front().eve_state.dim(); }

  double weight_of(std::uint8_t bit) const {
    for (const auto& b : branches_)
      if (b.label.size() == 1 && b.label[0] == bit) return b.weight;
    return 0.0;
  }

  Matrix eve_marginal() const {
    Matrix m = Matrix::Zero(eve_dim(), eve_dim());
    for (const auto& b : branches_) m += b.weight * b.eve_state.matrix();
    return m;
  }

 private:
  std::vector<CqBranch> branches_;
};

// Measure P on Alice's factor; Eve's conditional states tr_A[(P^a (x) I)|psi><psi|] / p(a).
inline CqState post_measurement_cq(const JointState& joint, const Matrix& p) {
  if (p.rows() != joint.alice_dim() || p.cols() != joint.alice_dim())
    throw ValidationError("post_measurement_cq: measurement does not act on Alice's space");
  const Matrix c = joint.coefficients();
  std::vector<CqBranch> branches;
  for (int a = 0; a < 2; ++a) {
    Matrix x = outcome_operator(p, a) * c;
    Matrix rho = x.transpose() * x.conjugate();
    double w = rho.trace().real();
    if (w <= tol::probability) continue;
    branches.push_back({{static_cast<std::uint8_t>(a)}, w, DensityMatrix::from_unnormalized(rho)});
  }
  double sum = 0.0;
  for (auto& b : branches) sum += b.weight;
  for (auto& b : branches) b.weight /= sum;
  return CqState(std::move(branches));
}

// Keep outcome a with probability omega_a and renormalize.
inline CqState post_select(const CqState& cq, const PostSelectionWeights& w) {
  std::vector<CqBranch> out;
  double sum = 0.0;
  for (const auto& b : cq.branches()) {
    if (b.label.size() != 1) throw ValidationError("post_select: expects single-bit labels");
    double keep = b.label[0] == 0 ? w.omega0 : w.omega1;
    if (b.weight * keep <= 0.0) continue;
    out.push_back({b.label, b.weight * keep, b.eve_state});
    sum += b.weight * keep;
  }
  if (!(sum > 0.0)) throw ValidationError("post_select: nothing kept");
  for (auto& b : out) b.weight /= sum;
  return CqState(std::move(out));
}

// Weights chosen from the cq state's own marginal, which makes it uniform.
inline CqState post_select(const CqState& cq) { return post_select(cq, post_selection_weights(cq.weight_of(0))); }

// sum_a p(a) || rho_E^a - rho_E ||_1 with rho_E Eve's marginal.
inline double single_round_security_distance(const CqState& cq) {
  const Matrix marginal = cq.eve_marginal();
  double d = 0.0;
  for (const auto& b : cq.branches()) d += b.weight * trace_norm(b.eve_state.matrix() - marginal);
  return d;
}

struct SecurityReport {
  std::optional<double> epsilon;
  double distance = 0.0;
  double epsilon_sec = 0.0;  // sum of single-round distances
  int m = 0;
  std::optional<double> slope;
};

inline constexpr int kMaxExactRounds = 8;
inline constexpr Index kMaxExactEveDim = 256;

// || sum_k |k><k| (x) (prod_j p_j(k_j) rho_j^{k_j}) - 2^-m I (x) (x)_j rho_j ||_1
// summed label by label; labels missing from a round have weight zero.
inline double key_distance_from_uniform(const std::vector<CqState>& rounds) {
  const int m = static_cast<int>(rounds.size());
  if (m < 1) throw ValidationError("final_key_distance: no rounds");
  if (m > kMaxExactRounds)
    throw CapacityError("final_key_distance: exact evaluation limited to m <= " + std::to_string(kMaxExactRounds));
  Index total_dim = 1;
  for (const auto& r : rounds) {
    for (const auto& b : r.branches())
      if (b.label.size() != 1) throw ValidationError("final_key_distance: rounds must carry single-bit labels");
    total_dim *= r.eve_dim();
    if (total_dim > kMaxExactEveDim)
      throw CapacityError("final_key_distance: total Eve dimension exceeds " + std::to_string(kMaxExactEveDim));
  }

  // Per round and bit: p_j(k) rho_j^k (zero if absent), and the marginal.
  std::vector<std::array<Matrix, 2>> weighted(m);
  Matrix reference = Matrix::Ones(1, 1);
  for (int j = 0; j < m; ++j) {
    const Index d = rounds[j].eve_dim();
    weighted[j] = {Matrix::Zero(d, d), Matrix::Zero(d, d)};
    for (const auto& b : rounds[j].branches()) weighted[j][b.label[0] & 1] += b.weight * b.eve_state.matrix();
    reference = tensor(reference, rounds[j].eve_marginal());
  }
  reference /= std::ldexp(1.0, m);

  double total = 0.0;
  for (std::uint32_t k = 0; k < (1u << m); ++k) {
    Matrix prod = Matrix::Ones(1, 1);
    for (int j = 0; j < m; ++j) prod = tensor(prod, weighted[j][(k >> (m - 1 - j)) & 1u]);
    total += trace_norm(prod - reference);
  }
  return total;
}

inline SecurityReport final_key_distance(const std::vector<CqState>& rounds) {
  for (const auto& r : rounds)
    for (const auto& b : r.branches())
      if (r.branches().size() != 2 || std::abs(b.weight - 0.5) > tol::uniform_weight)
        throw ValidationError("final_key_distance: rounds must be post-selected to uniform weights");
  SecurityReport rep;
  rep.m = static_cast<int>(rounds.size());
  rep.distance = key_distance_from_uniform(rounds);
  for (const auto& r : rounds) rep.epsilon_sec += single_round_security_distance(r);
  return rep;
}

enum class PerturbationMode { state_rotation, measurement_rotation };

// Unit vector orthogonal to the state in span{|v0>, P_1|v0>}.
inline Vector perturbation_direction(const Strategy& s) {
  const Vector& v0 = s.state().amplitudes();
  Vector x = s.projector(1) * v0;
  x -= v0 * v0.dot(x);
  double n = x.norm();
  if (n < 1e-12) throw ValidationError("perturbation_direction: state is an eigenvector of the first measurement");
  return x / n;
}

// Rotation by delta in the plane span{|v0>, |w>}: |v0> -> cos|v0> + sin|w>.
inline Matrix plane_rotation(const Vector& v0, const Vector& w, double delta) {
  const Index d = v0.size();
  Matrix r = Matrix::Identity(d, d);
  const double c = std::cos(delta), s = std::sin(delta);
  r += (c - 1.0) * (v0 * v0.adjoint() + w * w.adjoint());
  r += s * (w * v0.adjoint() - v0 * w.adjoint());
  return r;
}

inline Strategy perturbed_strategy(const Strategy& s, double delta, PerturbationMode mode) {
  if (!(std::abs(delta) <= 0.5)) throw ValidationError("perturbed_strategy: |delta| must not exceed 0.5 rad");
  if (delta == 0.0) return s;
  const Vector w = perturbation_direction(s);
  const Matrix r = plane_rotation(s.state().amplitudes(), w, delta);
  if (mode == PerturbationMode::state_rotation) return with_state(s, PureState::normalized(r * s.state().amplitudes()));
  std::vector<Matrix> ps;
  for (const Matrix& p : s.projectors()) {
    Matrix q = r * p * r.adjoint();
    ps.push_back(0.5 * (q + q.adjoint()));
  }
  return Strategy(s.scenario(), s.state(), std::move(ps));
}

enum class EveModel { correlated, product };

inline const char* to_string(EveModel m) { return m == EveModel::correlated ? "correlated" : "product"; }

// Eve holds which branch of the perturbation occurred:
// cos(delta)|v0>|0> + sin(delta)|w>|1>.
inline JointState correlated_joint_state(const Strategy& s, double delta) {
  const Vector& v0 = s.state().amplitudes();
  const Vector w = perturbation_direction(s);
  Vector e0(2), e1(2);
  e0 << 1.0, 0.0;
  e1 << 0.0, 1.0;
  Vector psi = std::cos(delta) * tensor(v0, e0) + std::sin(delta) * tensor(w, e1);
  return JointState(PureState::normalized(psi), s.dim(), 2);
}

struct SweepPoint {
  double delta = 0.0;
  double epsilon = 0.0;
  double distance = 0.0;
};

struct LogLogFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

struct SweepResult {
  int N = 0;
  EveModel model = EveModel::correlated;
  std::vector<SweepPoint> points;
  std::optional<LogLogFit> fit;  // log10(distance) against log10(epsilon)
  SecurityReport report;
};

inline LogLogFit fit_log_log(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw ValidationError("fit_log_log: need at least two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += std::log10(x[i]);
    my += std::log10(y[i]);
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dx = std::log10(x[i]) - mx, dy = std::log10(y[i]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw ValidationError("fit_log_log: x values are all equal");
  LogLogFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r_squared = syy == 0.0 ? 1.0 : sxy * sxy / (sxx * syy);
  return f;
}

// Inequality deficit of the state-rotation family per unit sin^2(delta).
inline double rotation_gap(const Strategy& s) {
  Strategy rotated = with_state(s, PureState::normalized(perturbation_direction(s)));
  return quantum_bound(s.scenario()) - inequality_value(rotated);
}

// delta values whose state-rotation deficit is log-spaced in [eps_min, eps_max].
inline std::vector<double> delta_grid_for_epsilon(const Strategy& s, double eps_min, double eps_max, int points) {
  if (!(eps_min > 0.0 && eps_max >= eps_min) || points < 1) throw ValidationError("delta_grid_for_epsilon: bad range");
  const double gap = rotation_gap(s);
  if (eps_max > gap) throw ValidationError("delta_grid_for_epsilon: eps_max exceeds the reachable deficit");
  std::vector<double> grid;
  for (int k = 0; k < points; ++k) {
    double t = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
    double eps = eps_min * std::pow(eps_max / eps_min, t);
    grid.push_back(std::asin(std::sqrt(eps / gap)));
  }
  return grid;
}

inline SweepResult robustness_sweep(int N, const std::vector<double>& delta_grid, EveModel model,
                                    PerturbationMode mode = PerturbationMode::state_rotation) {
  const Strategy ideal = odd_cycle_strategy(N);
  if (model == EveModel::correlated && mode != PerturbationMode::state_rotation)
    throw ValidationError("robustness_sweep: the correlated model perturbs the state only");
  const CycleScenario& sc = ideal.scenario();
  const double bound = quantum_bound(sc);

  SweepResult res;
  res.N = N;
  res.model = model;
  for (double delta : delta_grid) {
    SweepPoint pt;
    pt.delta = delta;
    if (model == EveModel::correlated) {
      JointState joint = correlated_joint_state(ideal, delta);
      pt.epsilon = bound - inequality_value(sc, joint.alice_marginal(), ideal.projectors());
      pt.distance = single_round_security_distance(post_measurement_cq(joint, ideal.projector(1)));
    } else {
      Strategy s = perturbed_strategy(ideal, delta, mode);
      JointState joint = product_joint_state(s.state(), PureState::basis(2, 0));
      pt.epsilon = bound - inequality_value(s);
      pt.distance = single_round_security_distance(post_measurement_cq(joint, s.projector(1)));
    }
    pt.epsilon = std::max(pt.epsilon, 0.0);
    res.points.push_back(pt);
  }

  std::vector<double> eps;
  for (const auto& p : res.points)
    if (p.epsilon > 0.0) eps.push_back(p.epsilon);
  if (eps.size() < 2) throw ValidationError("robustness_sweep: degenerate grid (fewer than two points with epsilon > 0)");
  const auto [lo, hi] = std::minmax_element(eps.begin(), eps.end());
  if (*hi / *lo < 100.0) throw ValidationError("robustness_sweep: degenerate grid (epsilon spans less than two decades)");

  std::vector<double> x, y;
  for (const auto& p : res.points)
    if (p.epsilon > 0.0 && p.distance > 1e-13) {
      x.push_back(p.epsilon);
      y.push_back(p.distance);
    }
  if (x.size() >= 2) res.fit = fit_log_log(x, y);

  res.report.epsilon = *hi;
  res.report.m = 1;
  for (const auto& p : res.points) res.report.distance = std::max(res.report.distance, p.distance);
  res.report.epsilon_sec = res.report.distance;
  if (res.fit) res.report.slope = res.fit->slope;
  return res;
}

}  // namespace qre

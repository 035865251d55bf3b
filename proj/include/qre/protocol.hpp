#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qre/linalg.hpp"
#include "qre/measurement.hpp"
#include "qre/randomness.hpp"
#include "qre/scenarios.hpp"

namespace qre {

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PostSelectionWeights {
  double omega0 = 1.0;
  double omega1 = 1.0;
  friend bool operator==(const PostSelectionWeights&, const PostSelectionWeights&) = default;
};

// Keep the more likely outcome with probability p_less / p_more and the other
// one always, so both kept values are equally likely.
inline PostSelectionWeights post_selection_weights(double p0) {
  if (!(p0 > tol::probability && p0 < 1.0 - tol::probability))
    throw ValidationError("post_selection_weights: degenerate marginal p0 = " + std::to_string(p0));
  const double p1 = 1.0 - p0;
  if (std::abs(p0 - p1) <= tol::probability) return {1.0, 1.0};
  if (p0 > p1) return {p1 / p0, 1.0};
  return {1.0, p0 / p1};
}

inline PostSelectionWeights post_selection_weights(const Strategy& s) {
  return post_selection_weights(outcome_probability(s.density(), s.projector(1), 0));
}

inline int neighbor(int i, int l, int N) {
  if (N < 1 || i < 1 || i > N) throw ValidationError("neighbor: index out of range");
  if (l != 0 && l != 1) throw ValidationError("neighbor: l must be 0 or 1");
  return l == 0 ? i % N + 1 : (i - 2 + N) % N + 1;
}

struct ProtocolConfig {
  u64 n = 0;
  int N = 5;
  Parity parity = Parity::odd;
  double q = 0.0;
  double epsilon = 0.05;
  u64 seed = 0;
  std::optional<PostSelectionWeights> omega_override;
  std::optional<double> even_tolerance;  // default 1e-3 * quantum bound

  CycleScenario scenario() const { return CycleScenario(N, parity); }

  void validate() const {
    if (n < 1) throw ValidationError("ProtocolConfig: n must be at least 1");
    (void)scenario();
    if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("ProtocolConfig: q must lie in [0, 1]");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw ValidationError("ProtocolConfig: epsilon must lie in the open interval (0, 1)");
    if (omega_override) {
      const auto& w = *omega_override;
      if (!(w.omega0 >= 0.0 && w.omega0 <= 1.0 && w.omega1 >= 0.0 && w.omega1 <= 1.0))
        throw ValidationError("ProtocolConfig: omega_override entries must lie in [0, 1]");
    }
    if (even_tolerance && !(*even_tolerance > 0.0)) throw ValidationError("ProtocolConfig: even_tolerance must be positive");
  }

  double abort_tolerance() const {
    if (parity == Parity::odd) return epsilon;
    return even_tolerance ? *even_tolerance : 1e-3 * quantum_bound(scenario());
  }
};

struct GenerationRecord {
  int a1 = 0;
  bool kept = false;
};

struct SpotRecord {
  int i = 0;
  int l = 0;
  int l_prime = 0;
  int a_i = 0;
  int a_lprime = 0;
};

struct RoundRecord {
  u64 index = 0;  // 1-based
  int type = 0;   // 0 generation, 1 spot check
  std::optional<GenerationRecord> generation;
  std::optional<SpotRecord> spot;
};

// Counts per ordered pair (i, neighbor(i, l)), stored at slot 2(i-1) + l.
class SpotCheckTally {
 public:
  explicit SpotCheckTally(int N) : n_(N), counts_(2 * static_cast<std::size_t>(N)) {
    if (N < 1) throw ValidationError("SpotCheckTally: N must be positive");
  }

  int size() const { return n_; }

  void record(int i, int l, int a, int b) {
    check(i, l);
    if ((a != 0 && a != 1) || (b != 0 && b != 1)) throw ValidationError("SpotCheckTally: outcomes must be bits");
    ++counts_[slot(i, l)][2 * a + b];
    ++total_;
  }

  u64 count(int i, int l, int a, int b) const {
    check(i, l);
    return counts_[slot(i, l)][2 * a + b];
  }

  u64 ordered_total(int i, int l) const {
    check(i, l);
    const auto& c = counts_[slot(i, l)];
    return c[0] + c[1] + c[2] + c[3];
  }

  u64 total() const { return total_; }

  // Both orders of the compatibility edge (j, j+1): samples of (j+1, j)
  // enter with outcomes transposed. Index [2a + b] refers to (a_j, a_{j+1}).
  std::array<u64, 4> pooled(int j) const {
    check(j, 0);
    const int k = j % n_ + 1;
    const auto& fwd = counts_[slot(j, 0)];
    const auto& rev = counts_[slot(k, 1)];
    return {fwd[0] + rev[0], fwd[1] + rev[2], fwd[2] + rev[1], fwd[3] + rev[3]};
  }

  SpotCheckTally& operator+=(const SpotCheckTally& o) {
    if (o.n_ != n_) throw ValidationError("SpotCheckTally: size mismatch in merge");
    for (std::size_t s = 0; s < counts_.size(); ++s)
      for (int c = 0; c < 4; ++c) counts_[s][c] += o.counts_[s][c];
    total_ += o.total_;
    return *this;
  }

  friend bool operator==(const SpotCheckTally&, const SpotCheckTally&) = default;

 private:
  void check(int i, int l) const {
    if (i < 1 || i > n_ || (l != 0 && l != 1)) throw ValidationError("SpotCheckTally: index out of range");
  }
  std::size_t slot(int i, int l) const { return 2 * static_cast<std::size_t>(i - 1) + l; }

  int n_;
  std::vector<std::array<u64, 4>> counts_;
  u64 total_ = 0;
};

struct InequalityEstimate {
  double value = 0.0;
  double standard_error = 0.0;
};

inline InequalityEstimate estimate_inequality_with_error(const SpotCheckTally& tally, const CycleScenario& sc) {
  if (tally.size() != sc.size()) throw ValidationError("estimate_inequality: tally and scenario sizes differ");
  InequalityEstimate est;
  std::vector<double> edge_sum(sc.size(), 0.0);
  std::vector<u64> edge_n(sc.size(), 0);
  for (const Edge& e : sc.edges()) {
    auto pooled = tally.pooled(e.first);
    u64 tot = pooled[0] + pooled[1] + pooled[2] + pooled[3];
    if (tot == 0)
      throw EstimationError("estimate_inequality: no spot-check samples on edge (" + std::to_string(e.first) + "," +
                            std::to_string(e.second) + ")");
    edge_n[e.first - 1] = tot;
  }
  for (const InequalityTerm& t : sc.terms()) {
    auto pooled = tally.pooled(t.edge.first);
    double p = static_cast<double>(pooled[2 * t.a + t.b]) / static_cast<double>(edge_n[t.edge.first - 1]);
    est.value += p;
    edge_sum[t.edge.first - 1] += p;
  }
  double var = 0.0;
  for (int j = 0; j < sc.size(); ++j) var += edge_sum[j] * (1.0 - edge_sum[j]) / static_cast<double>(edge_n[j]);
  est.standard_error = std::sqrt(var);
  return est;
}

inline double estimate_inequality(const SpotCheckTally& tally, const CycleScenario& sc) {
  return estimate_inequality_with_error(tally, sc).value;
}

// Odd: abort iff bound - value >= tolerance (inclusive up to rounding).
// Even: abort iff |bound - value| >= tolerance.
inline bool abort_decision(double value, const CycleScenario& sc, double tolerance) {
  if (!std::isfinite(value)) throw ValidationError("abort_decision: non-finite estimate");
  const double bound = quantum_bound(sc);
  const double slack = 1e-12 * std::max(1.0, bound);
  const double gap = sc.parity() == Parity::odd ? bound - value : std::abs(bound - value);
  return gap + slack >= tolerance;
}

// Memoryless simulated device: every round starts from the same state, so
// the Lueders branches can be tabulated once.
class MemorylessDevice {
 public:
  explicit MemorylessDevice(const Strategy& s) : scenario_(s.scenario()) {
    const int N = scenario_.size();
    first_.resize(N);
    second_.resize(N);
    for (int i = 1; i <= N; ++i) {
      const Matrix& p = s.projector(i);
      double p1 = detail::snap_probability(outcome_probability(s.density(), p, 1));
      first_[i - 1] = p1;
      for (int a = 0; a < 2; ++a) {
        double pa = a == 1 ? p1 : 1.0 - p1;
        if (pa == 0.0) continue;
        DensityMatrix post = DensityMatrix::from_unnormalized(luders_branch(s.density(), p, a));
        for (int l = 0; l < 2; ++l) {
          int j = scenario_.neighbor(i, l);
          second_[i - 1][l][a] = detail::snap_probability(outcome_probability(post, s.projector(j), 1));
        }
      }
    }
  }

  const CycleScenario& scenario() const { return scenario_; }
  double prob_one(int i) const { return first_.at(i - 1); }

  int measure(int i, double u) const { return u < first_.at(i - 1) ? 1 : 0; }

  // Outcome of the neighbor measurement after outcome a of measurement i.
  int measure_after(int i, int l, int a, double u) const { return u < second_.at(i - 1)[l][a] ? 1 : 0; }

 private:
  CycleScenario scenario_;
  std::vector<double> first_;
  std::vector<std::array<std::array<double, 2>, 2>> second_;
};

// Returns the kept bit, if any.
inline std::optional<int> generation_round(const MemorylessDevice& dev, const PostSelectionWeights& w,
                                           IntervalSampler& post, RandomnessLedger& ledger, CounterRng& nature,
                                           GenerationRecord* rec = nullptr) {
  int a = dev.measure(1, nature.uniform01());
  Draw keep = post.bernoulli(a == 0 ? w.omega0 : w.omega1);
  ledger.post_selection += keep.bits;
  bool kept = keep.value == 1;
  if (rec) *rec = {a, kept};
  if (!kept) return std::nullopt;
  return a;
}

inline SpotRecord spot_check_round(const MemorylessDevice& dev, IntervalSampler& spot, RandomnessLedger& ledger,
                                   CounterRng& nature) {
  const CycleScenario& sc = dev.scenario();
  Draw d = spot.uniform(2 * static_cast<u64>(sc.size()));
  ledger.spot_settings += d.bits;
  SpotRecord r;
  r.i = static_cast<int>(d.value / 2) + 1;
  r.l = static_cast<int>(d.value % 2);
  r.l_prime = sc.neighbor(r.i, r.l);
  r.a_i = dev.measure(r.i, nature.uniform01());
  r.a_lprime = dev.measure_after(r.i, r.l, r.a_i, nature.uniform01());
  return r;
}

enum class ProtocolStatus { success, aborted, estimation_failed };

inline const char* to_string(ProtocolStatus s) {
  switch (s) {
    case ProtocolStatus::success: return "success";
    case ProtocolStatus::aborted: return "aborted";
    case ProtocolStatus::estimation_failed: return "estimation_failed";
  }
  return "?";
}

struct ProtocolReport {
  ProtocolConfig config;
  ProtocolStatus status = ProtocolStatus::success;
  bool aborted = false;
  std::vector<std::uint8_t> bits;
  std::optional<double> beta_hat;
  std::optional<double> beta_standard_error;
  double quantum_bound = 0.0;
  double abort_tolerance = 0.0;
  PostSelectionWeights omega;
  RandomnessLedger ledger;
  u64 bits_drawn = 0;
  u64 spot_rounds = 0;
  u64 generation_rounds = 0;
  u64 candidate_bits = 0;  // kept bits before the abort decision
  u64 m_observed = 0;
  double r_observed = 0.0;
  std::string diagnostic;
  SpotCheckTally tally{1};
  std::vector<RoundRecord> rounds;  // filled only when requested
};

struct RunOptions {
  bool record_rounds = false;
  unsigned threads = 1;
};

// Rounds per independent randomness chunk. Chunk c draws round types, spot
// settings and post-selection coins from streams 4c, 4c+1, 4c+2 and the
// simulated measurement outcomes from stream 4c+3.
inline constexpr u64 kChunkRounds = u64{1} << 20;

namespace detail {

struct ChunkResult {
  RandomnessLedger ledger;
  SpotCheckTally tally{1};
  std::vector<std::uint8_t> bits;
  u64 spot_rounds = 0;
  u64 generation_rounds = 0;
  u64 bits_drawn = 0;
  std::vector<RoundRecord> rounds;
};

inline ChunkResult run_chunk(const ProtocolConfig& cfg, const MemorylessDevice& dev, const PostSelectionWeights& w,
                             u64 chunk, bool record) {
  ChunkResult out;
  out.tally = SpotCheckTally(cfg.N);
  BitSource round_bits(cfg.seed, 4 * chunk);
  BitSource spot_bits(cfg.seed, 4 * chunk + 1);
  BitSource post_bits(cfg.seed, 4 * chunk + 2);
  CounterRng nature(cfg.seed, 4 * chunk + 3);
  IntervalSampler round_sampler(round_bits);
  IntervalSampler spot_sampler(spot_bits);
  IntervalSampler post_sampler(post_bits);

  const u64 begin = chunk * kChunkRounds;
  const u64 end = std::min(cfg.n, begin + kChunkRounds);
  if (record) out.rounds.reserve(end - begin);
  for (u64 j = begin; j < end; ++j) {
    Draw t = round_sampler.bernoulli(cfg.q);
    out.ledger.round_selection += t.bits;
    RoundRecord rec;
    rec.index = j + 1;
    rec.type = static_cast<int>(t.value);
    if (t.value == 0) {
      ++out.generation_rounds;
      GenerationRecord g;
      auto bit = generation_round(dev, w, post_sampler, out.ledger, nature, &g);
      if (bit) out.bits.push_back(static_cast<std::uint8_t>(*bit));
      if (record) rec.generation = g;
    } else {
      ++out.spot_rounds;
      SpotRecord s = spot_check_round(dev, spot_sampler, out.ledger, nature);
      out.tally.record(s.i, s.l, s.a_i, s.a_lprime);
      if (record) rec.spot = s;
    }
    if (record) out.rounds.push_back(rec);
  }
  out.bits_drawn = round_bits.bits_drawn() + spot_bits.bits_drawn() + post_bits.bits_drawn();
  return out;
}

}  // namespace detail

inline ProtocolReport run_protocol(const ProtocolConfig& cfg, const Strategy& s, const RunOptions& opts = {}) {
  cfg.validate();
  const CycleScenario sc = cfg.scenario();
  if (!(s.scenario() == sc))
    throw ValidationError("run_protocol: strategy scenario (N=" + std::to_string(s.scenario().size()) + ", " +
                          to_string(s.scenario().parity()) + ") does not match config (N=" + std::to_string(cfg.N) + ", " +
                          to_string(cfg.parity) + ")");

  ProtocolReport rep;
  rep.config = cfg;
  rep.omega = cfg.omega_override ? *cfg.omega_override : post_selection_weights(s);
  rep.quantum_bound = quantum_bound(sc);
  rep.abort_tolerance = cfg.abort_tolerance();

  const MemorylessDevice dev(s);
  const u64 chunks = (cfg.n + kChunkRounds - 1) / kChunkRounds;
  std::vector<detail::ChunkResult> results(chunks);
  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(chunks)));
  if (threads == 1) {
    for (u64 c = 0; c < chunks; ++c) results[c] = detail::run_chunk(cfg, dev, rep.omega, c, opts.record_rounds);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (u64 c = t; c < chunks; c += threads) results[c] = detail::run_chunk(cfg, dev, rep.omega, c, opts.record_rounds);
      });
    for (auto& th : pool) th.join();
  }

  SpotCheckTally tally(cfg.N);
  std::vector<std::uint8_t> bits;
  for (auto& r : results) {
    rep.ledger += r.ledger;
    tally += r.tally;
    bits.insert(bits.end(), r.bits.begin(), r.bits.end());
    rep.spot_rounds += r.spot_rounds;
    rep.generation_rounds += r.generation_rounds;
    rep.bits_drawn += r.bits_drawn;
    if (opts.record_rounds) rep.rounds.insert(rep.rounds.end(), r.rounds.begin(), r.rounds.end());
  }
  rep.candidate_bits = bits.size();
  rep.tally = tally;

  try {
    InequalityEstimate est = estimate_inequality_with_error(tally, sc);
    rep.beta_hat = est.value;
    rep.beta_standard_error = est.standard_error;
    rep.aborted = abort_decision(est.value, sc, rep.abort_tolerance);
    rep.status = rep.aborted ? ProtocolStatus::aborted : ProtocolStatus::success;
    if (rep.aborted) rep.diagnostic = "inequality value outside the accepted window";
  } catch (const EstimationError& e) {
    rep.aborted = true;
    rep.status = ProtocolStatus::estimation_failed;
    rep.diagnostic = e.what();
  }

  if (!rep.aborted) rep.bits = std::move(bits);
  rep.m_observed = rep.bits.size();
  rep.ledger.produced = rep.m_observed;
  rep.r_observed = (static_cast<double>(rep.m_observed) - static_cast<double>(rep.ledger.consumed())) / static_cast<double>(cfg.n);
  return rep;
}

// Rebuilds the spot-check tally from a round log.
inline SpotCheckTally tally_from_rounds(const std::vector<RoundRecord>& rounds, int N) {
  SpotCheckTally t(N);
  for (const auto& r : rounds)
    if (r.spot) t.record(r.spot->i, r.spot->l, r.spot->a_i, r.spot->a_lprime);
  return t;
}

}  // namespace qre

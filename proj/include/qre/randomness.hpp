#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "qre/linalg.hpp"
#include "qre/scenarios.hpp"

namespace qre {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

// SplitMix64 finalizer.
inline u64 mix64(u64 z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Counter-based generator: block c of stream s under seed k is a pure
// function of (k, s, c), so substreams can be replayed or skipped freely.
class CounterRng {
 public:
  explicit CounterRng(u64 seed, u64 stream = 0) : key_(mix64(seed ^ mix64(stream + 0x9E3779B97F4A7C15ULL))) {}

  u64 block(u64 c) const { return mix64(key_ + (c + 1) * 0x9E3779B97F4A7C15ULL); }
  u64 next_u64() { return block(counter_++); }
  // 53 random bits, in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  u64 counter() const { return counter_; }

 private:
  u64 key_;
  u64 counter_ = 0;
};

// Uniform bits, most significant bit of each 64-bit block first.
class BitSource {
 public:
  explicit BitSource(u64 seed, u64 stream = 0) : seed_(seed), stream_(stream), rng_(seed, stream) {}

  int next_bit() {
    if (left_ == 0) {
      buf_ = rng_.next_u64();
      left_ = 64;
    }
    --left_;
    ++drawn_;
    return static_cast<int>((buf_ >> left_) & 1U);
  }

  u64 seed() const { return seed_; }
  u64 stream() const { return stream_; }
  u64 counter() const { return rng_.counter(); }
  u64 bits_drawn() const { return drawn_; }

 private:
  u64 seed_;
  u64 stream_;
  CounterRng rng_;
  u64 buf_ = 0;
  int left_ = 0;
  u64 drawn_ = 0;
};

struct Draw {
  u64 value = 0;
  u64 bits = 0;
};

// Probabilities are realized as multiples of 2^-40.
inline constexpr int kProbabilityBits = 40;

inline u64 quantize_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantize_probability: probability outside [0, 1]");
  return static_cast<u64>(std::llround(std::ldexp(p, kProbabilityBits)));
}

inline double quantized_probability(double p) { return std::ldexp(static_cast<double>(quantize_probability(p)), -kProbabilityBits); }

// A finite distribution as a partition of [0, 1) into cells with rational
// boundaries start[c] / total. Empty cells are dropped.
class CellPartition {
 public:
  CellPartition(const std::vector<u64>& weights, const std::vector<u64>& values) {
    if (weights.size() != values.size() || weights.empty()) throw ValidationError("CellPartition: bad weights");
    u64 g = 0;
    for (u64 w : weights) g = std::gcd(g, w);
    if (g == 0) throw ValidationError("CellPartition: all weights are zero");
    u64 acc = 0;
    for (std::size_t c = 0; c < weights.size(); ++c) {
      if (weights[c] == 0) continue;
      start_.push_back(acc);
      acc += weights[c] / g;
      values_.push_back(values[c]);
    }
    total_ = acc;
    if (total_ > (u64{1} << kProbabilityBits)) throw ValidationError("CellPartition: total weight too large");
    start_.push_back(total_);
  }

  // 1 with probability q.
  static CellPartition bernoulli(double q) {
    u64 b = quantize_probability(q);
    return CellPartition({b, (u64{1} << kProbabilityBits) - b}, {1, 0});
  }

  static CellPartition uniform(u64 k) {
    if (k < 1) throw ValidationError("CellPartition::uniform: k must be at least 1");
    if (k > (u64{1} << kProbabilityBits)) throw ValidationError("CellPartition::uniform: k too large");
    std::vector<u64> vals(k);
    std::iota(vals.begin(), vals.end(), u64{0});
    return CellPartition(std::vector<u64>(k, 1), vals);
  }

  std::size_t cells() const { return values_.size(); }
  u64 total() const { return total_; }
  u64 start(std::size_t c) const { return start_[c]; }
  u64 width(std::size_t c) const { return start_[c + 1] - start_[c]; }
  u64 value(std::size_t c) const { return values_[c]; }

  // Cell containing integer position u in [0, total).
  std::size_t locate(u64 u) const {
    auto it = std::upper_bound(start_.begin(), start_.end(), u);
    return static_cast<std::size_t>(it - start_.begin()) - 1;
  }

 private:
  std::vector<u64> start_;
  std::vector<u64> values_;
  u64 total_ = 0;
};

namespace detail {

// Interval algorithm without state: bits of U are read until the dyadic
// interval [lo, lo + 1) / 2^t lies in one cell. Past 64 bits the interval
// straddles a single boundary and U is compared with that boundary's binary
// expansion instead, so integers stay bounded.
inline Draw interval_fresh(const CellPartition& cells, BitSource& src) {
  if (cells.cells() == 1) return {cells.value(0), 0};
  const u64 before = src.bits_drawn();
  const u128 W = cells.total();
  u128 lo = 0;
  for (int t = 0; t <= 64; ++t) {
    const u128 scale = u128{1} << t;
    std::size_t c = cells.locate(static_cast<u64>((lo * W) >> t));
    const u128 end = cells.start(c + 1);
    if ((lo + 1) * W <= end * scale) return {cells.value(c), src.bits_drawn() - before};
    if (t == 64) {
      u128 r = end * scale - lo * W;  // boundary - lo, in units of 2^-t / W, in (0, W)
      for (;;) {
        int b = src.next_bit();
        r <<= 1;
        int xb = r >= W ? 1 : 0;
        if (xb) r -= W;
        if (b < xb) return {cells.value(c), src.bits_drawn() - before};
        if (b > xb || r == 0) return {cells.value(c + 1), src.bits_drawn() - before};
      }
    }
    lo = 2 * lo + static_cast<u128>(src.next_bit());
  }
  return {cells.value(0), src.bits_drawn() - before};  // unreachable
}

}  // namespace detail

enum class SamplerMode {
  fresh,   // independent interval algorithm per sample
  pooled,  // leftover randomness carried between samples
};

// Draws from finite distributions through an owned bit source.
//
// The pooled mode keeps an integer v uniform on [0, M). A sample with cells
// of widths w_c summing to W splits v into (v / W, v mod W); the cell holding
// v mod W is the outcome and its offset inside the cell is folded back into
// the pool, so M shrinks by the factor w_c / W. Each sample is exact and the
// expected cost is the entropy of the distribution plus the final pool size.
class IntervalSampler {
 public:
  explicit IntervalSampler(BitSource& src, SamplerMode mode = SamplerMode::pooled) : src_(&src), mode_(mode) {}

  Draw sample(const CellPartition& cells) {
    if (mode_ == SamplerMode::fresh) return detail::interval_fresh(cells, *src_);
    return pooled(cells);
  }

  Draw bernoulli(double q) { return sample(CellPartition::bernoulli(q)); }
  Draw uniform(u64 k) { return sample(CellPartition::uniform(k)); }

  SamplerMode mode() const { return mode_; }
  const BitSource& source() const { return *src_; }
  // log2 of the pool size; randomness drawn but not yet spent.
  double pooled_bits() const { return std::log2(static_cast<double>(m_)); }

 private:
  static constexpr int kSlackBits = 24;

  Draw pooled(const CellPartition& cells) {
    if (cells.cells() == 1) return {cells.value(0), 0};
    const u64 before = src_->bits_drawn();
    const u128 W = cells.total();
    const u128 need = W << kSlackBits;
    for (;;) {
      while (m_ < need) {
        v_ = 2 * v_ + static_cast<u128>(src_->next_bit());
        m_ *= 2;
      }
      const u128 q = m_ / W;
      const u128 usable = q * W;
      if (v_ < usable) {
        const u64 u = static_cast<u64>(v_ % W);
        const std::size_t c = cells.locate(u);
        const u128 w = cells.width(c);
        v_ = (v_ / W) * w + (u - cells.start(c));
        m_ = q * w;
        return {cells.value(c), src_->bits_drawn() - before};
      }
      v_ -= usable;
      m_ -= usable;
    }
  }

  BitSource* src_;
  SamplerMode mode_;
  u128 v_ = 0;
  u128 m_ = 1;
};

inline Draw interval_bernoulli(double q, BitSource& src) { return detail::interval_fresh(CellPartition::bernoulli(q), src); }

inline Draw interval_uniform(u64 k, BitSource& src) { return detail::interval_fresh(CellPartition::uniform(k), src); }

struct RandomnessLedger {
  u64 round_selection = 0;
  u64 spot_settings = 0;
  u64 post_selection = 0;
  u64 produced = 0;

  u64 consumed() const { return round_selection + spot_settings + post_selection; }
  double net() const { return static_cast<double>(produced) - static_cast<double>(consumed()); }

  RandomnessLedger& operator+=(const RandomnessLedger& o) {
    round_selection += o.round_selection;
    spot_settings += o.spot_settings;
    post_selection += o.post_selection;
    produced += o.produced;
    return *this;
  }
  friend bool operator==(const RandomnessLedger&, const RandomnessLedger&) = default;
};

inline double binary_entropy(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("binary_entropy: p outside [0, 1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

// Marginal of the generation measurement and the keep probabilities.
struct PostSelectionModel {
  double p0 = 0.5;
  double omega0 = 1.0;
  double omega1 = 1.0;

  double p1() const { return 1.0 - p0; }
  double kept_fraction() const { return p0 * omega0 + p1() * omega1; }
  double keep_entropy() const { return p0 * binary_entropy(omega0) + p1() * binary_entropy(omega1); }
};

inline void check_rate_args(double n, double q) {
  if (!(n > 0.0)) throw ValidationError("rate: n must be positive");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("rate: q outside [0, 1]");
}

inline PostSelectionModel odd_post_selection_model(int N) {
  CycleScenario sc(N, Parity::odd);
  const double c = std::cos(std::numbers::pi / N);
  return {1.0 / (1.0 + c), c, 1.0};
}

// The three readings of the even-cycle post-selection weights.
enum class EvenConvention {
  marginal_derived,   // p(0|1) = 1/2 for the maximally entangled strategy, omega = (1, 1)
  paper_fig3,         // omega0 = (1 + cos(pi/2N)) / (3 - cos(pi/2N)), p(1|i) = (1 + cos(pi/N)) / 2
  paper_appendix_text,  // omega0 = (1 + cos(pi/N)) / (3 - cos(pi/N)), same marginal
};

inline const char* to_string(EvenConvention c) {
  switch (c) {
    case EvenConvention::marginal_derived: return "marginal-derived";
    case EvenConvention::paper_fig3: return "paper-fig3";
    case EvenConvention::paper_appendix_text: return "paper-appD-text";
  }
  return "?";
}

inline EvenConvention parse_even_convention(const std::string& s) {
  if (s == "marginal-derived") return EvenConvention::marginal_derived;
  if (s == "paper-fig3") return EvenConvention::paper_fig3;
  if (s == "paper-appD-text") return EvenConvention::paper_appendix_text;
  throw ValidationError("unknown omega convention '" + s + "' (expected marginal-derived, paper-fig3 or paper-appD-text)");
}

inline PostSelectionModel even_post_selection_model(int N, EvenConvention conv) {
  CycleScenario sc(N, Parity::even);
  if (conv == EvenConvention::marginal_derived) return {0.5, 1.0, 1.0};
  const double c = std::cos(std::numbers::pi / N);
  const double ch = conv == EvenConvention::paper_fig3 ? std::cos(std::numbers::pi / (2.0 * N)) : c;
  return {0.5 * (1.0 - c), (1.0 + ch) / (3.0 - ch), 1.0};
}

inline double expected_output_length(double n, double q, const PostSelectionModel& ps) {
  check_rate_args(n, q);
  return n * (1.0 - q) * ps.kept_fraction();
}

// m = 2n(1-q) cos(pi/N) / (1 + cos(pi/N))
inline double expected_output_length(double n, double q, int N) {
  check_rate_args(n, q);
  CycleScenario sc(N, Parity::odd);
  const double c = std::cos(std::numbers::pi / N);
  return 2.0 * n * (1.0 - q) * c / (1.0 + c);
}

// l_in = n [h(q) + q log2(2N) + (1-q) sum_a p_a h(omega_a)] + 6
inline double expected_input_length(double n, double q, int N, const PostSelectionModel& ps) {
  check_rate_args(n, q);
  if (N < 1) throw ValidationError("expected_input_length: N must be positive");
  return n * (binary_entropy(q) + q * std::log2(2.0 * N) + (1.0 - q) * ps.keep_entropy()) + 6.0;
}

inline double expected_input_length(double n, double q, int N, double p0, double omega0) {
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw ValidationError("expected_input_length: p0 outside [0, 1]");
  if (!(omega0 >= 0.0 && omega0 <= 1.0)) throw ValidationError("expected_input_length: omega0 outside [0, 1]");
  return expected_input_length(n, q, N, PostSelectionModel{p0, omega0, 1.0});
}

inline double expansion_rate(double n, double q, int N, const PostSelectionModel& ps) {
  return (expected_output_length(n, q, ps) - expected_input_length(n, q, N, ps)) / n;
}

inline double expansion_rate(double n, double q, int N, Parity parity,
                             EvenConvention conv = EvenConvention::marginal_derived) {
  if (parity == Parity::odd) {
    const PostSelectionModel ps = odd_post_selection_model(N);
    return (expected_output_length(n, q, N) - expected_input_length(n, q, N, ps)) / n;
  }
  return expansion_rate(n, q, N, even_post_selection_model(N, conv));
}

// n -> infinity with q -> 0.
inline double asymptotic_rate(int N, Parity parity, EvenConvention conv = EvenConvention::marginal_derived) {
  const PostSelectionModel ps = parity == Parity::odd ? odd_post_selection_model(N) : even_post_selection_model(N, conv);
  return ps.kept_fraction() - ps.keep_entropy();
}

}  // namespace qre

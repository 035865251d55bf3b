#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qre/assumptions.hpp"
#include "qre/io.hpp"
#include "qre/protocol.hpp"
#include "qre/randomness.hpp"
#include "qre/scenarios.hpp"
#include "qre/security.hpp"

namespace qre::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitAbort = 2;

// Reference asymptote of the even-cycle rate, echoed next to ours.
inline constexpr double kFig4TargetRate = 0.9637;

namespace detail {

// Writes through `write` to `path`, or to `fallback` when path is empty.
inline void emit(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open '" + path + "' for writing");
  write(f);
  if (!f) throw ValidationError("failed writing '" + path + "'");
}

inline std::string join_ints(const std::vector<int>& v, char sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += sep;
    s += std::to_string(v[i]);
  }
  return s;
}

inline Parity parity_for(int N, const std::optional<std::string>& parity) {
  if (parity) return parse_parity(*parity);
  return N % 2 ? Parity::odd : Parity::even;
}

template <class F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace detail

// ---- run ----

struct RunArgs {
  std::string config;
  std::string strategy;
  std::string out;
  std::string round_log;
  std::optional<u64> seed;
  std::optional<u64> n;
  std::optional<int> N;
  std::optional<double> q;
  std::optional<double> epsilon;
  std::optional<std::string> parity;
  std::optional<std::string> omega_convention;
  std::optional<double> even_tolerance;
  unsigned threads = 1;
};

// Config file first, then flags on top.
inline ProtocolConfig resolve_config(const RunArgs& a) {
  ProtocolConfig c;
  if (!a.config.empty()) {
    c = config_from_json(read_json_file(a.config));
  } else {
    c.n = 100000;
    c.N = 5;
    c.q = 0.01;
    c.epsilon = 0.05;
  }
  if (a.n) c.n = *a.n;
  if (a.N) {
    c.N = *a.N;
    if (!a.parity) c.parity = detail::parity_for(c.N, std::nullopt);
  }
  if (a.parity) c.parity = parse_parity(*a.parity);
  if (a.q) c.q = *a.q;
  if (a.epsilon) c.epsilon = *a.epsilon;
  if (a.seed) c.seed = *a.seed;
  if (a.even_tolerance) c.even_tolerance = *a.even_tolerance;
  if (a.omega_convention) {
    EvenConvention conv = parse_even_convention(*a.omega_convention);
    if (c.parity == Parity::odd && conv != EvenConvention::marginal_derived)
      throw ValidationError("--omega-convention " + *a.omega_convention + " applies to even cycles only");
    if (c.parity == Parity::even && conv != EvenConvention::marginal_derived) {
      PostSelectionModel m = even_post_selection_model(c.N, conv);
      c.omega_override = PostSelectionWeights{m.omega0, m.omega1};
    }
  }
  c.validate();
  return c;
}

inline int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    ProtocolConfig cfg = resolve_config(a);
    Strategy s = a.strategy.empty() ? ideal_strategy(cfg.scenario()) : strategy_from_json(read_json_file(a.strategy));
    RunOptions opts;
    opts.record_rounds = !a.round_log.empty();
    opts.threads = a.threads;
    ProtocolReport rep = run_protocol(cfg, s, opts);
    detail::emit(a.out, out, [&](std::ostream& os) { os << report_to_json(rep).dump(2) << '\n'; });
    if (!a.round_log.empty()) detail::emit(a.round_log, out, [&](std::ostream& os) { write_round_log(os, rep); });
    if (rep.status != ProtocolStatus::success) {
      err << "protocol " << to_string(rep.status) << ": " << rep.diagnostic << '\n';
      return kExitAbort;
    }
    return kExitOk;
  });
}

// ---- verify ----

struct VerifyArgs {
  std::string config;
  std::string strategy;
  std::string out;
  std::optional<int> N;
  std::optional<std::string> parity;
  u64 samples = 100000;
  u64 seed = 0;
};

inline json verify_report(const Strategy& s, u64 samples, u64 seed) {
  const CycleScenario& sc = s.scenario();
  StrategyReport r = verify_strategy(s);
  CounterRng rng(seed, 0xD1A6);
  json j;
  j["N"] = sc.size();
  j["parity"] = to_string(sc.parity());
  j["nchv_bound"] = nchv_bound(sc);
  j["quantum_bound"] = quantum_bound(sc);
  j["achieved_value"] = r.achieved_value;
  j["bound_gap"] = r.bound_gap;
  j["commutation"] = r.commutation;
  j["edge_orthogonality"] = r.edge_orthogonality ? json(*r.edge_orthogonality) : json(nullptr);
  json reps = json::array();
  double rmin = 1.0;
  for (int i = 1; i <= sc.size(); ++i) {
    double rep = repeatability_statistic(s, i, samples, rng);
    rmin = std::min(rmin, rep);
    reps.push_back(rep);
  }
  j["repeatability"] = reps;
  j["repeatability_min"] = rmin;
  double nd = no_disturbance_residual(s);
  j["no_disturbance_residual"] = nd;
  j["no_disturbance_residual_empirical"] = no_disturbance_residual_empirical(s, std::max<u64>(1, samples / 10), rng);
  j["samples"] = samples;
  j["seed"] = seed;
  j["assumptions_hold"] = rmin == 1.0 && nd <= 1e-12 && r.commutation <= tol::commutation;
  return j;
}

inline int cmd_verify(const VerifyArgs& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    if (a.samples == 0) throw ValidationError("--samples must be positive");
    std::optional<Strategy> s;
    if (!a.strategy.empty()) {
      s = strategy_from_json(read_json_file(a.strategy));
    } else {
      int N = 5;
      std::optional<std::string> parity = a.parity;
      if (!a.config.empty()) {
        ProtocolConfig c = config_from_json(read_json_file(a.config));
        N = c.N;
        if (!parity) parity = to_string(c.parity);
      }
      if (a.N) N = *a.N;
      s = ideal_strategy(CycleScenario(N, detail::parity_for(N, parity)));
    }
    json j = verify_report(*s, a.samples, a.seed);
    detail::emit(a.out, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    return kExitOk;
  });
}

// ---- rate tables and figure data ----

inline std::vector<double> default_fig2_n() {
  std::vector<double> ns;
  for (int k = 8; k <= 40; ++k) ns.push_back(std::round(std::pow(10.0, k / 4.0)));
  return ns;
}

struct RateRow {
  double n = 0;
  int N = 0;
  double q = 0;
  double m = 0;
  double l_in = 0;
  double r = 0;
};

inline PostSelectionModel model_for(int N, Parity parity, EvenConvention conv) {
  return parity == Parity::odd ? odd_post_selection_model(N) : even_post_selection_model(N, conv);
}

inline RateRow rate_row(double n, int N, Parity parity, std::optional<double> q, EvenConvention conv) {
  RateRow row;
  row.n = n;
  row.N = N;
  row.q = q ? *q : 1.0 / std::sqrt(n);
  PostSelectionModel ps = model_for(N, parity, conv);
  row.m = parity == Parity::odd ? expected_output_length(n, row.q, N) : expected_output_length(n, row.q, ps);
  row.l_in = expected_input_length(n, row.q, N, ps);
  row.r = (row.m - row.l_in) / n;
  return row;
}

struct RateTableArgs {
  std::vector<double> n_values;
  std::vector<int> Ns;
  std::optional<double> q;
  std::optional<std::string> parity;
  std::string omega_convention = "marginal-derived";
  std::string out;
};

inline int cmd_rate_table(const RateTableArgs& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    std::vector<double> ns = a.n_values.empty() ? std::vector<double>{1e4, 1e5, 1e6, 1e7, 1e8} : a.n_values;
    std::vector<int> Ns = a.Ns.empty() ? std::vector<int>{5, 7, 9} : a.Ns;
    EvenConvention conv = parse_even_convention(a.omega_convention);
    detail::emit(a.out, out, [&](std::ostream& os) {
      CsvWriter csv(os,
                    {{"q", a.q ? format_double(*a.q) : std::string("1/sqrt(n)")},
                     {"N", detail::join_ints(Ns, ';')},
                     {"omega_convention", a.omega_convention}},
                    {"n", "N", "parity", "q", "m", "l_in", "r"});
      for (int N : Ns) {
        Parity p = detail::parity_for(N, a.parity);
        for (double n : ns) {
          RateRow r = rate_row(n, N, p, a.q, conv);
          csv.row({format_double(n), std::to_string(N), to_string(p), format_double(r.q), format_double(r.m),
                   format_double(r.l_in), format_double(r.r)});
        }
      }
    });
    return kExitOk;
  });
}

struct Fig2Args {
  std::vector<double> n_values;
  std::vector<int> Ns;
  std::string out;
};

inline std::vector<RateRow> fig2_rows(const std::vector<double>& ns, const std::vector<int>& Ns) {
  std::vector<RateRow> rows;
  for (int N : Ns)
    for (double n : ns) rows.push_back(rate_row(n, N, Parity::odd, std::nullopt, EvenConvention::marginal_derived));
  return rows;
}

inline int cmd_fig2(const Fig2Args& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    std::vector<double> ns = a.n_values.empty() ? default_fig2_n() : a.n_values;
    std::vector<int> Ns = a.Ns.empty() ? std::vector<int>{5, 7, 9} : a.Ns;
    std::string limits;
    for (int N : Ns) {
      if (!limits.empty()) limits += ';';
      limits += std::to_string(N) + ':' + format_double(asymptotic_rate(N, Parity::odd));
    }
    std::vector<RateRow> rows = fig2_rows(ns, Ns);
    detail::emit(a.out, out, [&](std::ostream& os) {
      CsvWriter csv(os, {{"q", "1/sqrt(n)"}, {"N", detail::join_ints(Ns, ';')}, {"r_limit", limits}}, {"n", "N", "q", "r"});
      for (const RateRow& r : rows) csv.row({format_double(r.n), std::to_string(r.N), format_double(r.q), format_double(r.r)});
    });
    return kExitOk;
  });
}

struct Fig4Series {
  std::vector<int> N;
  std::vector<double> r;
  bool monotone_increasing = true;
  int peak_N = 0;
  double peak_r = -std::numeric_limits<double>::infinity();
};

inline Fig4Series fig4_series(int N_min, int N_max, double n, double q, EvenConvention conv) {
  if (N_min < 4 || N_max < N_min) throw ValidationError("fig4: need 4 <= N_min <= N_max");
  Fig4Series s;
  for (int N = N_min + (N_min % 2); N <= N_max; N += 2) {
    double r = expansion_rate(n, q, N, Parity::even, conv);
    if (!s.r.empty() && r < s.r.back()) s.monotone_increasing = false;
    if (r > s.peak_r) {
      s.peak_r = r;
      s.peak_N = N;
    }
    s.N.push_back(N);
    s.r.push_back(r);
  }
  return s;
}

struct Fig4Args {
  double n = 1e6;
  std::optional<double> q;
  int N_min = 4;
  int N_max = 100;
  std::string omega_convention = "marginal-derived";
  std::string out;
};

inline int cmd_fig4(const Fig4Args& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const double q = a.q ? *a.q : 1.0 / std::sqrt(a.n);
    EvenConvention conv = parse_even_convention(a.omega_convention);
    Fig4Series s = fig4_series(a.N_min, a.N_max, a.n, q, conv);
    detail::emit(a.out, out, [&](std::ostream& os) {
      CsvWriter csv(os,
                    {{"n", format_double(a.n)},
                     {"q", format_double(q)},
                     {"omega_convention", to_string(conv)},
                     {"target_asymptote", format_double(kFig4TargetRate)},
                     {"computed_at_N_max", format_double(s.r.back())},
                     {"peak_N", std::to_string(s.peak_N)},
                     {"peak_r", format_double(s.peak_r)},
                     {"monotone_increasing", s.monotone_increasing ? "true" : "false"}},
                    {"N", "r"});
      for (std::size_t k = 0; k < s.N.size(); ++k) csv.row({std::to_string(s.N[k]), format_double(s.r[k])});
    });
    return kExitOk;
  });
}

// ---- security sweep ----

struct SweepArgs {
  int N = 5;
  std::string model = "correlated";
  double eps_min = 1e-6;
  double eps_max = 1e-2;
  int points = 17;
  std::string out;
  std::string sidecar;  // default: out with .csv replaced by .json
};

inline EveModel parse_eve_model(const std::string& s) {
  if (s == "correlated") return EveModel::correlated;
  if (s == "product") return EveModel::product;
  throw ValidationError("unknown Eve model '" + s + "' (expected correlated or product)");
}

inline std::string sidecar_path(const SweepArgs& a) {
  if (!a.sidecar.empty() || a.out.empty()) return a.sidecar;
  std::string p = a.out;
  if (p.size() > 4 && p.compare(p.size() - 4, 4, ".csv") == 0) p.resize(p.size() - 4);
  return p + ".json";
}

inline SweepResult run_sweep(const SweepArgs& a) {
  Strategy ideal = odd_cycle_strategy(a.N);
  return robustness_sweep(a.N, delta_grid_for_epsilon(ideal, a.eps_min, a.eps_max, a.points), parse_eve_model(a.model));
}

inline int cmd_security_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    SweepResult res = run_sweep(a);
    detail::emit(a.out, out, [&](std::ostream& os) { write_sweep_csv(os, res); });
    const std::string side = sidecar_path(a);
    if (!side.empty()) detail::emit(side, out, [&](std::ostream& os) { os << sweep_fit_to_json(res).dump(2) << '\n'; });
    return kExitOk;
  });
}

// ---- KCBS accessibility ----

struct KcbsAnalysis {
  double beta = 0;
  double quantum_bound = 0;
  double epsilon = 0;
  double per_bit_cost = 0;     // sqrt(epsilon), security cost per output bit
  std::optional<u64> max_m;    // largest m with m sqrt(epsilon) <= 1; none when epsilon = 0
  double n = 0;
  double q = 0;
  double m_expected = 0;
  double l_in = 0;
  double usable_m = 0;
  bool expansion = false;
};

inline KcbsAnalysis kcbs_analysis(double beta, double n) {
  const CycleScenario sc(5, Parity::odd);
  KcbsAnalysis k;
  k.beta = beta;
  k.quantum_bound = quantum_bound(sc);
  if (!(beta > 0.0)) throw ValidationError("kcbs: beta must be positive");
  if (beta > k.quantum_bound + 1e-12) throw ValidationError("kcbs: beta exceeds the quantum bound " + format_double(k.quantum_bound));
  if (!(n >= 1.0)) throw ValidationError("kcbs: n must be at least 1");
  k.epsilon = std::max(0.0, k.quantum_bound - beta);
  k.per_bit_cost = std::sqrt(k.epsilon);
  if (k.epsilon > 0.0) k.max_m = static_cast<u64>(std::floor(1.0 / k.per_bit_cost));
  k.n = n;
  k.q = 1.0 / std::sqrt(n);
  k.m_expected = expected_output_length(n, k.q, 5);
  k.l_in = expected_input_length(n, k.q, 5, odd_post_selection_model(5));
  k.usable_m = k.max_m ? std::min<double>(k.m_expected, static_cast<double>(*k.max_m)) : k.m_expected;
  k.expansion = k.usable_m > k.l_in;
  return k;
}

inline json kcbs_to_json(const KcbsAnalysis& k) {
  json j;
  j["beta"] = k.beta;
  j["quantum_bound"] = k.quantum_bound;
  j["epsilon"] = k.epsilon;
  j["sqrt_epsilon"] = k.per_bit_cost;
  j["per_bit_cost"] = k.per_bit_cost;
  j["max_m"] = k.max_m ? json(*k.max_m) : json(nullptr);
  j["unlimited_m"] = !k.max_m.has_value();
  j["n"] = k.n;
  j["q"] = k.q;
  j["m_expected"] = k.m_expected;
  j["l_in"] = k.l_in;
  j["usable_m"] = k.usable_m;
  j["expansion"] = k.expansion;
  j["verdict"] = k.expansion ? "randomness expansion possible" : "no expansion: usable output does not exceed consumed randomness";
  return j;
}

struct KcbsArgs {
  double beta = 2.236;
  double n = 1e4;
  std::string out;
};

inline int cmd_kcbs(const KcbsArgs& a, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    json j = kcbs_to_json(kcbs_analysis(a.beta, a.n));
    detail::emit(a.out, out, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
    return kExitOk;
  });
}

}  // namespace qre::cli

#pragma once

#include <cstdio>
#include <fstream>
#include <cstdlib>
#include <json.hpp>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qre/protocol.hpp"
#include "qre/randomness.hpp"
#include "qre/scenarios.hpp"
#include "qre/security.hpp"

namespace qre {

using json = nlohmann::json;

// Shortest text that reads back to the same double.
inline std::string format_double(double x) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

// ---- complex arrays ----

inline json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ValidationError("expected a complex number as [re, im]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
  return out;
}

inline Vector vector_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("expected a non-empty array of [re, im] pairs");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = complex_from_json(j[i]);
  return v;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("expected a matrix as an array of rows");
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw ValidationError("matrix rows have unequal length");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Index>(r), static_cast<Index>(c)) = complex_from_json(j[r][c]);
  }
  return m;
}

// ---- strategy ----

inline json strategy_to_json(const Strategy& s) {
  json j;
  j["N"] = s.scenario().size();
  j["parity"] = to_string(s.scenario().parity());
  j["dim"] = s.dim();
  j["state"] = vector_to_json(s.state().amplitudes());
  json ps = json::array();
  for (const Matrix& p : s.projectors()) ps.push_back(matrix_to_json(p));
  j["projectors"] = std::move(ps);
  return j;
}

inline Strategy strategy_from_json(const json& j) {
  try {
    CycleScenario sc(j.at("N").get<int>(), parse_parity(j.at("parity").get<std::string>()));
    PureState psi(vector_from_json(j.at("state")));
    std::vector<Matrix> ps;
    for (const auto& p : j.at("projectors")) ps.push_back(matrix_from_json(p));
    return Strategy(sc, psi, std::move(ps));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("strategy JSON: ") + e.what());
  }
}

// ---- config ----

inline json config_to_json(const ProtocolConfig& c) {
  json j;
  j["n"] = c.n;
  j["N"] = c.N;
  j["parity"] = to_string(c.parity);
  j["q"] = c.q;
  j["epsilon"] = c.epsilon;
  j["seed"] = c.seed;
  if (c.omega_override) j["omega_override"] = {{"omega0", c.omega_override->omega0}, {"omega1", c.omega_override->omega1}};
  if (c.even_tolerance) j["even_tolerance"] = *c.even_tolerance;
  return j;
}

inline ProtocolConfig config_from_json(const json& j) {
  static const char* known[] = {"n", "N", "parity", "q", "epsilon", "seed", "omega_override", "even_tolerance"};
  if (!j.is_object()) throw ValidationError("config: expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("config: unknown key '" + key + "'");
  }
  ProtocolConfig c;
  try {
    const json& n = j.at("n");
    if (!n.is_number_integer() || n.get<long long>() < 1) throw ValidationError("config: n must be a positive integer");
    c.n = n.get<u64>();
    c.N = j.at("N").get<int>();
    c.parity = j.contains("parity") ? parse_parity(j["parity"].get<std::string>()) : (c.N % 2 ? Parity::odd : Parity::even);
    c.q = j.at("q").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw ValidationError("config: seed must be a non-negative integer");
      c.seed = j["seed"].get<u64>();
    }
    if (j.contains("omega_override") && !j["omega_override"].is_null()) {
      const json& w = j["omega_override"];
      if (w.is_array() && w.size() == 2)
        c.omega_override = PostSelectionWeights{w[0].get<double>(), w[1].get<double>()};
      else
        c.omega_override = PostSelectionWeights{w.at("omega0").get<double>(), w.at("omega1").get<double>()};
    }
    if (j.contains("even_tolerance")) c.even_tolerance = j["even_tolerance"].get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- ledger and report ----

inline json ledger_to_json(const RandomnessLedger& l, u64 rounds) {
  json j;
  j["consumed"] = {{"round_selection", l.round_selection}, {"spot_settings", l.spot_settings}, {"post_selection", l.post_selection}};
  j["produced"] = l.produced;
  j["net"] = l.net();
  j["rate"] = rounds ? l.net() / static_cast<double>(rounds) : 0.0;
  return j;
}

inline RandomnessLedger ledger_from_json(const json& j) {
  RandomnessLedger l;
  l.round_selection = j.at("consumed").at("round_selection").get<u64>();
  l.spot_settings = j.at("consumed").at("spot_settings").get<u64>();
  l.post_selection = j.at("consumed").at("post_selection").get<u64>();
  l.produced = j.at("produced").get<u64>();
  return l;
}

// Bits packed most significant first; the last nibble is zero padded.
inline std::string bits_to_hex(const std::vector<std::uint8_t>& bits) {
  static const char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bits.size() / 4 + 1);
  for (std::size_t i = 0; i < bits.size(); i += 4) {
    int v = 0;
    for (std::size_t k = 0; k < 4; ++k) v = 2 * v + (i + k < bits.size() ? (bits[i + k] & 1) : 0);
    out.push_back(digits[v]);
  }
  return out;
}

inline std::vector<std::uint8_t> bits_from_hex(const std::string& hex, std::size_t count) {
  if (hex.size() != (count + 3) / 4) throw ValidationError("bits_from_hex: length does not match bit count");
  std::vector<std::uint8_t> bits;
  bits.reserve(count);
  for (char ch : hex) {
    int v;
    if (ch >= '0' && ch <= '9') v = ch - '0';
    else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
    else throw ValidationError("bits_from_hex: invalid digit");
    for (int k = 3; k >= 0 && bits.size() < count; --k) bits.push_back(static_cast<std::uint8_t>((v >> k) & 1));
  }
  return bits;
}

inline json report_to_json(const ProtocolReport& r) {
  json j;
  j["status"] = to_string(r.status);
  j["aborted"] = r.aborted;
  j["beta_hat"] = r.beta_hat ? json(*r.beta_hat) : json(nullptr);
  j["beta_standard_error"] = r.beta_standard_error ? json(*r.beta_standard_error) : json(nullptr);
  j["quantum_bound"] = r.quantum_bound;
  j["abort_tolerance"] = r.abort_tolerance;
  j["omega"] = {{"omega0", r.omega.omega0}, {"omega1", r.omega.omega1}};
  j["ledger"] = ledger_to_json(r.ledger, r.config.n);
  j["bits_drawn"] = r.bits_drawn;
  j["spot_rounds"] = r.spot_rounds;
  j["generation_rounds"] = r.generation_rounds;
  j["candidate_bits"] = r.candidate_bits;
  j["m_observed"] = r.m_observed;
  j["r_observed"] = r.r_observed;
  j["bits"] = bits_to_hex(r.bits);
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  j["config"] = config_to_json(r.config);
  return j;
}

// ---- CSV ----

// Comment line with the full parameter set, then a header row. LF endings.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& params,
            const std::vector<std::string>& header)
      : out_(out), cols_(header.size()) {
    out_ << '#';
    for (const auto& [k, v] : params) out_ << ' ' << k << '=' << v;
    out_ << '\n';
    row(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw ValidationError("CsvWriter: row width does not match header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ostream& out_;
  std::size_t cols_;
};

inline void write_round_log(std::ostream& out, const ProtocolReport& r) {
  CsvWriter csv(out,
                {{"n", std::to_string(r.config.n)},
                 {"N", std::to_string(r.config.N)},
                 {"parity", to_string(r.config.parity)},
                 {"q", format_double(r.config.q)},
                 {"epsilon", format_double(r.config.epsilon)},
                 {"seed", std::to_string(r.config.seed)}},
                {"j", "T", "i", "l_prime", "a_i", "a_lprime", "k"});
  for (const RoundRecord& rec : r.rounds) {
    if (rec.generation) {
      const auto& g = *rec.generation;
      csv.row({std::to_string(rec.index), "0", "1", "", std::to_string(g.a1), "", g.kept ? std::to_string(g.a1) : ""});
    } else if (rec.spot) {
      const auto& s = *rec.spot;
      csv.row({std::to_string(rec.index), "1", std::to_string(s.i), std::to_string(s.l_prime), std::to_string(s.a_i),
               std::to_string(s.a_lprime), ""});
    }
  }
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& s) {
  CsvWriter csv(out, {{"N", std::to_string(s.N)}, {"model", to_string(s.model)}, {"points", std::to_string(s.points.size())}},
                {"delta", "epsilon", "distance"});
  for (const auto& p : s.points) csv.row({format_double(p.delta), format_double(p.epsilon), format_double(p.distance)});
}

inline json sweep_fit_to_json(const SweepResult& s) {
  json j;
  j["N"] = s.N;
  j["model"] = to_string(s.model);
  if (s.fit) {
    j["slope"] = s.fit->slope;
    j["intercept"] = s.fit->intercept;
    j["r_squared"] = s.fit->r_squared;
  } else {
    j["slope"] = nullptr;
    j["intercept"] = nullptr;
    j["r_squared"] = nullptr;
  }
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace qre

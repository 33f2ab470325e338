#pragma once

// Circuits over {H, X, CNOT, TOFFOLI}, the top row matrix, and the reductions from
// acceptance probabilities and postselected ratios to top-row traces.

#include <gmpxx.h>

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "qsumcheck/errors.hpp"
#include "qsumcheck/linalg.hpp"
#include "qsumcheck/precision.hpp"
#include "qsumcheck/rng.hpp"

namespace qsc {

enum class GateKind { H, X, CNOT, TOFFOLI };

inline int gate_arity(GateKind k) {
  switch (k) {
    case GateKind::H:
    case GateKind::X: return 1;
    case GateKind::CNOT: return 2;
    case GateKind::TOFFOLI: return 3;
  }
  return 0;
}

inline const char* gate_name(GateKind k) {
  switch (k) {
    case GateKind::H: return "H";
    case GateKind::X: return "X";
    case GateKind::CNOT: return "CNOT";
    case GateKind::TOFFOLI: return "TOFFOLI";
  }
  return "?";
}

inline bool parse_gate_kind(const std::string& s, GateKind& out) {
  for (GateKind k : {GateKind::H, GateKind::X, GateKind::CNOT, GateKind::TOFFOLI}) {
    if (s == gate_name(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

/// Controls come first, the target qubit last.
struct Gate {
  GateKind kind = GateKind::H;
  bool adjoint = false;
  QubitSet targets;

  Gate() = default;
  Gate(GateKind k, QubitSet t, bool adj = false) : kind(k), adjoint(adj), targets(std::move(t)) {
    if (static_cast<int>(targets.size()) != gate_arity(kind)) {
      throw InputError(std::string(gate_name(kind)) + " takes " +
                       std::to_string(gate_arity(kind)) + " qubits, got " +
                       std::to_string(targets.size()));
    }
    detail::check_labels(targets);
  }

  /// Every gate in the set is self-inverse, so the adjoint only flips the flag.
  Gate inverse() const { return Gate(kind, targets, !adjoint); }

  friend bool operator==(const Gate&, const Gate&) = default;
};

struct Circuit {
  int n = 0;
  std::vector<Gate> gates;

  Circuit() = default;
  Circuit(int qubits, std::vector<Gate> g) : n(qubits), gates(std::move(g)) { validate(); }

  int T() const noexcept { return static_cast<int>(gates.size()); }

  void validate() const {
    if (n < 1) throw InputError("a circuit needs at least one qubit");
    if (gates.empty()) throw InputError("a circuit needs at least one gate");
    for (const auto& g : gates) {
      for (int q : g.targets) {
        if (q > n) {
          throw InputError("gate qubit " + std::to_string(q) + " outside a register of " +
                           std::to_string(n));
        }
      }
    }
  }

  friend bool operator==(const Circuit&, const Circuit&) = default;
};

struct CanonicalGate {
  Gate gate;
  /// Exactly three labels, sorted ascending, containing gate.targets.
  QubitSet padded_targets;
};

inline QubitSet pad_targets(const QubitSet& targets, int n, int width = 3) {
  QubitSet out = targets;
  for (int q = 1; q <= n && static_cast<int>(out.size()) < width; ++q) {
    if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<CanonicalGate> canonicalize(const Circuit& c) {
  if (c.n < 3) throw InputError("canonical form needs at least 3 qubits");
  std::vector<CanonicalGate> out;
  out.reserve(c.gates.size());
  for (const auto& g : c.gates) out.push_back({g, pad_targets(g.targets, c.n)});
  return out;
}

/// The gate's matrix on its own targets, entries on the 2^-p grid (1/sqrt 2 truncated).
inline DenseOperator gate_matrix(const Gate& g, const PrecisionContext& ctx) {
  const FixedComplex zero = FixedComplex::zero(ctx);
  const FixedComplex one = FixedComplex::one(ctx);
  switch (g.kind) {
    case GateKind::H: {
      const FixedComplex h = FixedComplex::from_real(inv_sqrt2(ctx));
      return DenseOperator(g.targets, {h, h, h, -h});
    }
    case GateKind::X: return DenseOperator(g.targets, {zero, one, one, zero});
    case GateKind::CNOT:
    case GateKind::TOFFOLI: {
      // Flip the last label when all earlier ones are set.
      DenseOperator m = DenseOperator::identity(g.targets, zero);
      const std::size_t d = m.dim();
      m.at(d - 2, d - 2) = zero;
      m.at(d - 1, d - 1) = zero;
      m.at(d - 2, d - 1) = one;
      m.at(d - 1, d - 2) = one;
      return m;
    }
  }
  throw InputError("unknown gate kind");
}

inline DenseOperator canonical_matrix(const CanonicalGate& cg, const PrecisionContext& ctx) {
  return embed(gate_matrix(cg.gate, ctx), cg.padded_targets);
}

/// The truncated inverse on the padded targets; each kind is self-inverse and the
/// truncated Hadamard is symmetric, so this equals the gate's own truncated matrix.
inline DenseOperator canonical_inverse(const CanonicalGate& cg, const PrecisionContext& ctx) {
  return canonical_matrix(cg, ctx);
}

/// <0^n| G_T ... G_1 as a row vector.
inline std::vector<FixedComplex> top_row(const Circuit& c, const PrecisionContext& ctx) {
  if (c.n > kMaxDenseQubits) throw InputError("register too large for the dense simulator");
  std::vector<FixedComplex> row(std::size_t{1} << c.n, FixedComplex::zero(ctx));
  row[0] = FixedComplex::one(ctx);
  for (auto it = c.gates.rbegin(); it != c.gates.rend(); ++it) {
    apply_right(row, c.n, gate_matrix(*it, ctx));
  }
  return row;
}

/// |0^n><0^n| G_T ... G_1 as a dense matrix (reference use).
inline DenseOperator top_row_matrix(const Circuit& c, const PrecisionContext& ctx) {
  const auto row = top_row(c, ctx);
  const std::size_t d = row.size();
  std::vector<FixedComplex> entries(d * d, FixedComplex::zero(ctx));
  for (std::size_t j = 0; j < d; ++j) entries[j] = row[j];
  return DenseOperator(register_labels(c.n), std::move(entries));
}

inline FixedComplex top_row_trace(const Circuit& c, const PrecisionContext& ctx) {
  return top_row(c, ctx)[0];
}

/// g_1..g_L, CNOT(1 -> n+1), g_L^dag..g_1^dag on n+1 qubits; its top-row trace is the
/// probability that qubit 1 of c reads 0.
inline Circuit qcircuit_reduction(const Circuit& c) {
  c.validate();
  std::vector<Gate> gates = c.gates;
  gates.emplace_back(GateKind::CNOT, QubitSet{1, c.n + 1});
  for (auto it = c.gates.rbegin(); it != c.gates.rend(); ++it) gates.push_back(it->inverse());
  return Circuit(c.n + 1, std::move(gates));
}

struct TracePair {
  /// Trace equals Pr(qubit 1 = 0 and qubit 2 = 0).
  Circuit y;
  /// Trace equals Pr(qubit 1 = 0).
  Circuit z;
};

/// Qubit 1 is the postselection qubit and qubit 2 the answer qubit.
inline TracePair postbqp_trace_pair(const Circuit& c) {
  c.validate();
  if (c.n < 2) throw InputError("a postselected circuit needs at least 2 qubits");
  std::vector<Gate> gates = c.gates;
  gates.emplace_back(GateKind::CNOT, QubitSet{1, c.n + 1});
  gates.emplace_back(GateKind::CNOT, QubitSet{2, c.n + 2});
  for (auto it = c.gates.rbegin(); it != c.gates.rend(); ++it) gates.push_back(it->inverse());
  return {Circuit(c.n + 2, std::move(gates)), qcircuit_reduction(c)};
}

/// Flips the answer qubit before measurement.
inline Circuit complement_instance(const Circuit& c) {
  Circuit out = c;
  out.gates.emplace_back(GateKind::X, QubitSet{2});
  out.validate();
  return out;
}

enum class Decision { accept, reject, indeterminate };

inline const char* decision_name(Decision d) {
  switch (d) {
    case Decision::accept: return "accept";
    case Decision::reject: return "reject";
    case Decision::indeterminate: return "indeterminate";
  }
  return "?";
}

/// accept when y/z > 0.51, reject when y/z < 0.49, otherwise indeterminate.
inline Decision decide_from_trace_estimates(const mpq_class& y, const mpq_class& z) {
  if (sgn(z) <= 0) return Decision::indeterminate;
  if (y * 100 > z * 51) return Decision::accept;
  if (y * 100 < z * 49) return Decision::reject;
  return Decision::indeterminate;
}

inline Decision decide_from_trace_estimates(double y, double z) {
  return decide_from_trace_estimates(mpq_class(y), mpq_class(z));
}

inline std::string serialize_circuit(const Circuit& c) {
  std::string out = "qubits " + std::to_string(c.n) + "\n";
  for (const auto& g : c.gates) {
    out += "gate ";
    out += gate_name(g.kind);
    if (g.adjoint) out += "^dag";
    for (int q : g.targets) out += " " + std::to_string(q);
    out += "\n";
  }
  return out;
}

inline Circuit parse_circuit(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  int n = -1;
  std::vector<Gate> gates;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string word;
    if (!(ls >> word)) continue;
    if (word == "qubits") {
      if (n >= 0) throw ParseError(lineno, "qubit count given twice");
      long v = 0;
      if (!(ls >> v) || v < 1 || v > 64) throw ParseError(lineno, "bad qubit count");
      n = static_cast<int>(v);
    } else if (word == "gate") {
      if (n < 0) throw ParseError(lineno, "gate before the qubit count");
      std::string kind_text;
      if (!(ls >> kind_text)) throw ParseError(lineno, "missing gate kind");
      bool adj = false;
      if (kind_text.size() > 4 && kind_text.compare(kind_text.size() - 4, 4, "^dag") == 0) {
        adj = true;
        kind_text.resize(kind_text.size() - 4);
      }
      GateKind kind;
      if (!parse_gate_kind(kind_text, kind)) {
        throw ParseError(lineno, "unknown gate kind '" + kind_text + "'");
      }
      QubitSet targets;
      std::string tok;
      while (ls >> tok) {
        std::size_t used = 0;
        long q = 0;
        try {
          q = std::stol(tok, &used);
        } catch (const std::exception&) {
          throw ParseError(lineno, "bad qubit '" + tok + "'");
        }
        if (used != tok.size() || q < 1 || q > n) {
          throw ParseError(lineno, "qubit '" + tok + "' outside 1.." + std::to_string(n));
        }
        targets.push_back(static_cast<int>(q));
      }
      if (static_cast<int>(targets.size()) != gate_arity(kind)) {
        throw ParseError(lineno, std::string(gate_name(kind)) + " takes " +
                                     std::to_string(gate_arity(kind)) + " qubits");
      }
      for (std::size_t i = 0; i < targets.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
          if (targets[i] == targets[j]) throw ParseError(lineno, "duplicate target qubit");
        }
      }
      gates.emplace_back(kind, std::move(targets), adj);
    } else {
      throw ParseError(lineno, "unexpected '" + word + "'");
    }
  }
  if (n < 0) throw ParseError(lineno, "missing qubit count");
  if (gates.empty()) throw ParseError(lineno, "circuit has no gates");
  return Circuit(n, std::move(gates));
}

/// Uniform kind among those that fit, uniform distinct targets.
inline Circuit random_circuit(Rng& rng, int n, int T,
                              const std::vector<GateKind>& mix = {GateKind::H, GateKind::TOFFOLI,
                                                                  GateKind::CNOT, GateKind::X}) {
  if (n < 1 || T < 1) throw InputError("random circuit needs n >= 1 and T >= 1");
  std::vector<GateKind> kinds;
  for (GateKind k : mix) {
    if (gate_arity(k) <= n) kinds.push_back(k);
  }
  if (kinds.empty()) throw InputError("no gate kind fits the register");
  std::vector<Gate> gates;
  for (int t = 0; t < T; ++t) {
    const GateKind k = kinds[rng.below(kinds.size())];
    QubitSet pool = register_labels(n);
    QubitSet targets;
    for (int j = 0; j < gate_arity(k); ++j) {
      const std::size_t i = rng.below(pool.size());
      targets.push_back(pool[i]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(i));
    }
    gates.emplace_back(k, std::move(targets));
  }
  return Circuit(n, std::move(gates));
}

}  // namespace qsc

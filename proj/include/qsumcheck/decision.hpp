#pragma once

// Decisions built from repeated trace verifications: a postselected-circuit instance
// decided from two verified traces, and a sequence of such queries answered bit by bit.

#include <gmpxx.h>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "qsumcheck/circuit.hpp"
#include "qsumcheck/params.hpp"
#include "qsumcheck/protocol.hpp"
#include "qsumcheck/rng.hpp"

namespace qsc {

/// Which verification a strategy is being built for.
struct RunRole {
  int query_index = 0;
  bool complement = false;
  /// 'y' for the joint-probability trace, 'z' for the postselection trace.
  char role = 'y';
  int repetition = 0;
  /// Which of the two runs per trace.
  int run = 0;
};

using StrategyFactory = std::function<std::unique_ptr<ProverStrategy>(const RunRole&)>;
using ParamsFactory = std::function<ProtocolParams(int n, int T)>;

inline StrategyFactory honest_factory() {
  return [](const RunRole&) { return std::make_unique<HonestStrategy>(); };
}

inline ParamsFactory paper_exact_factory(int max_p = kDefaultMaxPrecision) {
  return [max_p](int n, int T) { return derive_params(n, T, max_p); };
}

enum class PostbqpOutcome { accept, reject, indeterminate, caught_cheating };

inline const char* outcome_name(PostbqpOutcome o) {
  switch (o) {
    case PostbqpOutcome::accept: return "accept";
    case PostbqpOutcome::reject: return "reject";
    case PostbqpOutcome::indeterminate: return "indeterminate";
    case PostbqpOutcome::caught_cheating: return "caught-cheating";
  }
  return "?";
}

struct PostbqpResult {
  PostbqpOutcome outcome = PostbqpOutcome::indeterminate;
  mpq_class y;
  mpq_class z;
  int sessions = 0;
};

/// Runs the trace protocol twice for each of the two traces; any rejection means the
/// prover was caught. Otherwise decides from the verified claims.
inline PostbqpResult decide_postbqp(const Circuit& c, const StrategyFactory& factory,
                                    std::uint64_t seed, RunRole base = {},
                                    const ParamsFactory& params_for = paper_exact_factory()) {
  const TracePair pair = postbqp_trace_pair(c);
  PostbqpResult res;
  std::uint64_t counter = 0;
  for (const char role : {'y', 'z'}) {
    const Circuit& circuit = role == 'y' ? pair.y : pair.z;
    const ProtocolParams params = params_for(circuit.n, circuit.T());
    for (int run = 0; run < 2; ++run) {
      RunRole rr = base;
      rr.role = role;
      rr.run = run;
      auto strategy = factory(rr);
      const std::uint64_t s = splitmix64(seed ^ splitmix64(++counter));
      const SessionResult sr = run_protocol(circuit, params, *strategy, s);
      ++res.sessions;
      if (!sr.verdict.accepted) {
        res.outcome = PostbqpOutcome::caught_cheating;
        return res;
      }
      if (run == 0) (role == 'y' ? res.y : res.z) = sr.claim.re().to_rational();
    }
  }
  switch (decide_from_trace_estimates(res.y, res.z)) {
    case Decision::accept: res.outcome = PostbqpOutcome::accept; break;
    case Decision::reject: res.outcome = PostbqpOutcome::reject; break;
    case Decision::indeterminate: res.outcome = PostbqpOutcome::indeterminate; break;
  }
  return res;
}

/// ceil(log2 m) + 2 repetitions per query.
inline int orchestrator_repetitions(int m) {
  if (m < 1) throw InputError("need at least one query");
  int lg = 0;
  while ((1 << lg) < m) ++lg;
  return lg + 2;
}

/// Union bound on a wrong answer anywhere: 2m / 3^(reps).
inline mpq_class orchestrator_failure_bound(int m) {
  mpz_class pow3;
  mpz_ui_pow_ui(pow3.get_mpz_t(), 3, static_cast<unsigned long>(orchestrator_repetitions(m)));
  mpq_class b(mpz_class(2 * m), pow3);
  b.canonicalize();
  return b;
}

struct OrchestratorResult {
  bool aborted = false;
  int aborted_at = -1;
  std::vector<int> bits;
  int sessions = 0;
};

/// Per query: the positive instance must accept in every repetition to set the bit to 1;
/// otherwise the complement must accept in every repetition to set it to 0; otherwise abort.
inline OrchestratorResult oracle_orchestrator(const std::vector<Circuit>& queries,
                                              const StrategyFactory& factory, std::uint64_t seed,
                                              const ParamsFactory& params_for =
                                                  paper_exact_factory()) {
  OrchestratorResult out;
  const int reps = orchestrator_repetitions(static_cast<int>(queries.size()));
  std::uint64_t counter = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    auto all_accept = [&](const Circuit& c, bool complement) {
      for (int r = 0; r < reps; ++r) {
        RunRole base;
        base.query_index = static_cast<int>(q);
        base.complement = complement;
        base.repetition = r;
        const auto res =
            decide_postbqp(c, factory, splitmix64(seed + (++counter)), base, params_for);
        out.sessions += res.sessions;
        if (res.outcome != PostbqpOutcome::accept) return false;
      }
      return true;
    };
    if (all_accept(queries[q], false)) {
      out.bits.push_back(1);
    } else if (all_accept(complement_instance(queries[q]), true)) {
      out.bits.push_back(0);
    } else {
      out.aborted = true;
      out.aborted_at = static_cast<int>(q);
      return out;
    }
  }
  return out;
}

}  // namespace qsc

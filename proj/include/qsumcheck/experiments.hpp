#pragma once

// Monte Carlo drivers: acceptance rates of honest and cheating provers, tail probabilities
// of |tr(Delta u)|, grid-versus-continuum transfer, error decay of the spreading cheater,
// communication totals, and a replay audit of the honest error chain.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qsumcheck/circuit.hpp"
#include "qsumcheck/params.hpp"
#include "qsumcheck/protocol.hpp"
#include "qsumcheck/rng.hpp"
#include "qsumcheck/sampling.hpp"
#include "qsumcheck/transcript.hpp"

namespace qsc {

enum class ExperimentKind {
  completeness,
  soundness,
  lemma1,
  lemma4,
  claim62,
  delta_trajectory,
  comm_accounting,
};

inline const char* experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::completeness: return "completeness";
    case ExperimentKind::soundness: return "soundness";
    case ExperimentKind::lemma1: return "lemma1";
    case ExperimentKind::lemma4: return "lemma4";
    case ExperimentKind::claim62: return "claim62";
    case ExperimentKind::delta_trajectory: return "delta_trajectory";
    case ExperimentKind::comm_accounting: return "comm_accounting";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(const std::string& s) {
  for (auto k : {ExperimentKind::completeness, ExperimentKind::soundness, ExperimentKind::lemma1,
                 ExperimentKind::lemma4, ExperimentKind::claim62, ExperimentKind::delta_trajectory,
                 ExperimentKind::comm_accounting}) {
    if (s == experiment_name(k)) return k;
  }
  throw InputError("unknown experiment kind '" + s + "'");
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::completeness;
  int trials = 100;
  std::uint64_t seed = 1;

  // Protocol experiments.
  Profile profile = Profile::paper_exact;
  int relaxed_mu_bits = 40;
  int relaxed_xi_exponent = 60;
  std::optional<Circuit> circuit;  // fixed circuit; random circuits otherwise
  int n = 3;
  int T = 2;
  std::string strategy = "spread-error";
  /// |C - tr(A)| as a multiple of K.
  mpq_class offset_in_K{1};
  /// Replay each honest session against a 4p-bit shadow (completeness only).
  bool audit = false;

  // Sampling experiments.
  std::vector<int> n_primes{1, 2, 3};
  std::vector<int> ms{4, 8, 16, 32};
  int deltas = 5;
  int sample_p = 128;
  std::optional<std::vector<std::vector<std::complex<double>>>> fixed_deltas;
  int coarse_exponent = 10;
  double delta_fraction = 0.5;
  int transfer_n_prime = 3;

  ProtocolParams params_for(int n_, int T_) const {
    switch (profile) {
      case Profile::paper_exact: return derive_params(n_, T_);
      case Profile::relaxed: return relaxed_params(n_, T_, relaxed_mu_bits, relaxed_xi_exponent);
      case Profile::fine_grid: return fine_grid_params(n_, T_);
    }
    return derive_params(n_, T_);
  }

  json to_json() const {
    json j{{"kind", experiment_name(kind)},
           {"trials", trials},
           {"seed", seed},
           {"profile", profile_name(profile)}};
    switch (kind) {
      case ExperimentKind::completeness:
      case ExperimentKind::soundness:
      case ExperimentKind::delta_trajectory:
      case ExperimentKind::comm_accounting:
        j["circuit"] = circuit ? json(serialize_circuit(*circuit)) : json("random");
        j["n"] = circuit ? circuit->n : n;
        j["T"] = circuit ? circuit->T() : T;
        if (profile == Profile::relaxed) {
          j["mu_bits"] = relaxed_mu_bits;
          j["xi_exponent"] = relaxed_xi_exponent;
        }
        if (kind == ExperimentKind::soundness || kind == ExperimentKind::delta_trajectory) {
          j["strategy"] = strategy;
          j["offset_in_K"] = offset_in_K.get_str();
        }
        if (kind == ExperimentKind::completeness) j["audit"] = audit;
        break;
      case ExperimentKind::lemma1:
      case ExperimentKind::lemma4:
        j["n_primes"] = n_primes;
        if (kind == ExperimentKind::lemma4) j["m"] = ms;
        j["deltas"] = fixed_deltas ? static_cast<int>(fixed_deltas->size()) : deltas;
        j["sample_p"] = sample_p;
        break;
      case ExperimentKind::claim62:
        j["n_prime"] = transfer_n_prime;
        j["coarse_exponent"] = coarse_exponent;
        j["delta_fraction"] = delta_fraction;
        j["deltas"] = deltas;
        j["sample_p"] = sample_p;
        break;
    }
    return j;
  }
};

struct BoundCheck {
  std::string name;
  /// The inequality being compared, in words.
  std::string statement;
  double empirical = 0;
  double bound = 0;
  double slack = 0;
  bool passed = false;

  json to_json() const {
    return json{{"name", name},     {"statement", statement}, {"empirical", empirical},
                {"bound", bound},   {"slack", slack},         {"passed", passed}};
  }
};

struct ExperimentReport {
  json spec;
  std::vector<json> rows;
  json aggregates = json::object();
  std::vector<BoundCheck> checks;

  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const BoundCheck& c) { return c.passed; });
  }

  json to_json() const {
    json j{{"spec", spec}, {"aggregates", aggregates}};
    j["checks"] = json::array();
    for (const auto& c : checks) j["checks"].push_back(c.to_json());
    j["rows"] = rows;
    j["ok"] = ok();
    return j;
  }

  std::string to_csv() const {
    std::vector<std::string> cols;
    for (const auto& r : rows) {
      for (const auto& [k, v] : r.items()) {
        if (std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
      }
    }
    std::ostringstream o;
    for (std::size_t i = 0; i < cols.size(); ++i) o << (i ? "," : "") << cols[i];
    o << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (i) o << ",";
        if (!r.contains(cols[i])) continue;
        const auto& v = r[cols[i]];
        if (v.is_string()) {
          o << '"' << v.get<std::string>() << '"';
        } else {
          o << v.dump();
        }
      }
      o << "\n";
    }
    return o.str();
  }
};

// ---------------------------------------------------------------------------------------
// Helpers.

inline double binomial_sigma(double prob, int trials) {
  const double q = std::clamp(prob, 0.0, 1.0);
  return std::sqrt(q * (1 - q) / std::max(1, trials));
}

/// log2 |z| with -inf for zero.
inline double log2_modulus(const FixedComplex& z) {
  if (z.is_zero()) return -INFINITY;
  const mpz_class n2 = z.norm2_wide();
  long e = 0;
  const double d = mpz_get_d_2exp(&e, n2.get_mpz_t());
  return 0.5 * (std::log2(d) + static_cast<double>(e)) - z.precision();
}

inline double to_double(const mpq_class& q) { return q.get_d(); }

/// Product u^1 (x) ... (x) u^k of independent draws, on labels 1..k.
inline DenseOperator sample_product_unitary(Rng& rng, int k, const AngleGrid& grid,
                                            const PrecisionContext& ctx) {
  DenseOperator u = realize_unitary(sample_angles(rng, grid), grid, 1, ctx);
  for (int j = 2; j <= k; ++j) {
    u = kron(u, realize_unitary(sample_angles(rng, grid), grid, j, ctx));
  }
  return u;
}

/// Complex Gaussian operator on labels 1..k scaled so that ||Delta||_F >= frob exactly and
/// exceeds it by a relative 2^-40 at most (plus rounding).
inline DenseOperator random_operator(Rng& rng, int k, const PrecisionContext& ctx,
                                     const mpq_class& frob) {
  const std::size_t d = std::size_t{1} << k;
  std::vector<std::complex<double>> v(d * d);
  double s2 = 0;
  for (auto& z : v) {
    z = {rng.normal(), rng.normal()};
    s2 += std::norm(z);
  }
  double scale = frob.get_d() / std::sqrt(s2) * (1 + std::ldexp(1.0, -40));
  for (;;) {
    std::vector<FixedComplex> e;
    e.reserve(v.size());
    for (const auto& z : v) {
      e.emplace_back(FixedReal::from_mantissa(mpz_class(std::ldexp(z.real() * scale, ctx.p)), ctx),
                     FixedReal::from_mantissa(mpz_class(std::ldexp(z.imag() * scale, ctx.p)), ctx));
    }
    DenseOperator out(register_labels(k), std::move(e));
    if (frobenius_norm_ge(out, frob)) return out;
    scale *= 1 + std::ldexp(1.0, -30);
  }
}

inline DenseOperator operator_from_doubles(const std::vector<std::complex<double>>& v,
                                           const PrecisionContext& ctx) {
  int k = 0;
  while ((std::size_t{1} << (2 * k)) < v.size()) ++k;
  std::vector<FixedComplex> e;
  for (const auto& z : v) {
    e.emplace_back(FixedReal::from_mantissa(mpz_class(std::ldexp(z.real(), ctx.p)), ctx),
                   FixedReal::from_mantissa(mpz_class(std::ldexp(z.imag(), ctx.p)), ctx));
  }
  return DenseOperator(register_labels(k), std::move(e));
}

inline std::unique_ptr<ProverStrategy> make_strategy(const std::string& name,
                                                     const mpq_class& offset) {
  if (name == "honest") return std::make_unique<HonestStrategy>();
  if (name == "constant-offset") return std::make_unique<ConstantOffsetStrategy>(offset);
  if (name == "spread-error") return std::make_unique<SpreadErrorStrategy>(offset);
  if (name == "replay") return std::make_unique<ReplayStrategy>();
  throw InputError("unknown strategy '" + name + "'");
}

namespace detail {

inline Circuit trial_circuit(const ExperimentSpec& spec, Rng& rng) {
  if (spec.circuit) return *spec.circuit;
  return random_circuit(rng, spec.n, spec.T);
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// Replay audit of an honest session against a 4p-bit shadow with exact gates and
// exact grid unitaries.

struct ChainDeviation {
  std::string name;
  int round = 0;
  /// log2 of the measured deviation and of the bound.
  double log2_deviation = 0;
  double log2_bound = 0;
  bool within = false;
};

struct ChainAudit {
  std::vector<ChainDeviation> items;
  bool ok() const {
    return std::all_of(items.begin(), items.end(), [](const ChainDeviation& d) { return d.within; });
  }
};

inline ChainAudit audit_error_chain(const Circuit& c, const ProtocolParams& params,
                                    const SessionResult& session) {
  ChainAudit audit;
  if (!session.verdict.accepted || static_cast<int>(session.history.size()) != params.T) {
    audit.items.push_back({"session completed", session.verdict.round, 0, 0, false});
    return audit;
  }
  const PrecisionContext ctx = params.context();
  const PrecisionContext wide(4 * params.p);
  const AngleGrid grid = params.grid();
  const int n = c.n;
  const auto gates = canonicalize(c);

  std::vector<DenseOperator> sent;
  for (const auto& m : session.transcript.messages) {
    if (m.kind == MessageKind::matrix) sent.push_back(wire::parse_matrix(m.payload, ctx));
  }

  auto add = [&](const std::string& name, int round, const FixedComplex& dev,
                 const mpq_class& bound) {
    audit.items.push_back({name, round, log2_modulus(dev), log2q(bound), dev.modulus_le(bound)});
  };
  auto up = [&](const FixedComplex& z) { return z.rescaled(wide.p); };
  auto up_op = [&](const DenseOperator& m) {
    std::vector<FixedComplex> e;
    for (const auto& x : m.entries()) e.push_back(up(x));
    return DenseOperator(m.qubits(), std::move(e));
  };

  // Prover replay at p, exact shadow at 4p.
  HonestEngine prover(c, ctx);
  std::vector<DenseOperator> gates_wide;
  for (const auto& g : c.gates) gates_wide.push_back(gate_matrix(g, wide));
  std::vector<FixedComplex> psi(std::size_t{1} << n, FixedComplex::zero(wide));
  psi[0] = FixedComplex::one(wide);
  auto phi_at = [&](int i) {
    std::vector<FixedComplex> phi(std::size_t{1} << n, FixedComplex::zero(wide));
    phi[0] = FixedComplex::one(wide);
    for (int k = params.T - 1; k >= i; --k) apply_right(phi, n, gates_wide[static_cast<std::size_t>(k)]);
    return phi;
  };
  auto dot = [&](const std::vector<FixedComplex>& a, const std::vector<FixedComplex>& b) {
    DotAccumulator<FixedComplex> acc(a[0]);
    for (std::size_t x = 0; x < a.size(); ++x) acc.add_product(a[x], b[x]);
    return acc.result();
  };

  std::vector<FixedComplex> phi = phi_at(0);
  std::optional<DenseOperator> m_prev_exact;
  for (int i = 0; i <= params.T; ++i) {
    // tr(A'_i) versus tr(A_i).
    add("trace of approximate vs exact A_i", i, up(prover.current_trace()) - dot(phi, psi),
        params.honest_match_bound());
    if (i >= 1) {
      const auto& cg = gates[static_cast<std::size_t>(i - 1)];
      const auto& d = session.history[static_cast<std::size_t>(i - 1)];
      const DenseOperator h_exact =
          matmul(canonical_inverse(cg, wide), realize_local(d, grid, wide));
      const DenseOperator h_trunc = matmul(canonical_inverse(cg, ctx), realize_local(d, grid, ctx));
      const DenseOperator m_sent = up_op(sent[static_cast<std::size_t>(i - 1)]);
      const FixedComplex t_exact = trace_of_product(*m_prev_exact, h_exact);
      const FixedComplex t_sent = trace_of_product(m_sent, h_exact);
      add("exact vs sent matrix against exact g^-1 u", i, t_exact - t_sent, params.sent_matrix_bound());
      const FixedComplex t_hat = up(trace_of_product(sent[static_cast<std::size_t>(i - 1)], h_trunc));
      add("sent matrix against exact vs truncated g^-1 u", i, t_sent - t_hat,
          params.unitary_realization_bound());
    }
    if (i < params.T) {
      m_prev_exact = reduced_outer(psi, phi, n, gates[static_cast<std::size_t>(i)].padded_targets);
      const auto& d = session.history[static_cast<std::size_t>(i)];
      apply_left(psi, n, realize_local(d, grid, wide));
      prover.advance(realize_local(d, grid, ctx));
      phi = phi_at(i + 1);
    }
  }
  // Factorized final trace versus the exact product <0|U_T..U_1|0>.
  add("factorized final trace vs exact", params.T,
      up(final_trace_factorized(n, session.history, grid, ctx)) - psi[0], params.factored_trace_bound());
  for (const auto& r : session.verifier_log) {
    add("honest round slack", r.round, r.lhs - r.rhs, params.honest_slack_bound());
  }
  return audit;
}

// ---------------------------------------------------------------------------------------
// Experiments.

namespace detail {

inline ExperimentReport run_completeness(const ExperimentSpec& spec) {
  ExperimentReport rep;
  rep.spec = spec.to_json();
  int accepted = 0;
  int audit_violations = 0;
  double worst_margin = -INFINITY;
  double worst_slack = -INFINITY;
  for (int t = 0; t < spec.trials; ++t) {
    Rng rng = Rng::for_trial(spec.seed, static_cast<std::uint64_t>(t));
    const Circuit c = trial_circuit(spec, rng);
    const ProtocolParams params = spec.params_for(c.n, c.T());
    HonestStrategy honest;
    const SessionResult r = run_protocol(c, params, honest, rng.next());
    accepted += r.verdict.accepted;
    double slack = -INFINITY;
    for (const auto& rec : r.verifier_log) slack = std::max(slack, log2_modulus(rec.lhs - rec.rhs));
    worst_slack = std::max(worst_slack, slack);
    json row{{"trial", t},
             {"n", c.n},
             {"T", c.T()},
             {"p", params.p},
             {"accepted", r.verdict.accepted},
             {"reason", r.verdict.reason},
             {"log2_max_slack", slack},
             {"log2_mu", log2q(params.mu)},
             {"bits", r.transcript.total_bits()}};
    if (spec.audit) {
      const ChainAudit a = audit_error_chain(c, params, r);
      int bad = 0;
      double margin = -INFINITY;
      for (const auto& item : a.items) {
        bad += !item.within;
        margin = std::max(margin, item.log2_deviation - item.log2_bound);
      }
      audit_violations += bad;
      worst_margin = std::max(worst_margin, margin);
      row["audit_violations"] = bad;
      row["audit_log2_worst_margin"] = margin;
    }
    rep.rows.push_back(row);
  }
  const double rate = static_cast<double>(accepted) / spec.trials;
  rep.aggregates = json{{"accepted", accepted},
                        {"trials", spec.trials},
                        {"acceptance_rate", rate},
                        {"log2_worst_slack", worst_slack}};
  rep.checks.push_back({"honest acceptance", "honest acceptance rate equals 1 (no slack)", rate, 1.0,
                        0.0, accepted == spec.trials});
  if (spec.audit) {
    rep.aggregates["audit_violations"] = audit_violations;
    rep.aggregates["audit_log2_worst_margin"] = worst_margin;
    rep.checks.push_back({"honest error chain", "every replayed deviation within its bound",
                          static_cast<double>(audit_violations), 0.0, 0.0, audit_violations == 0});
  }
  return rep;
}

inline ExperimentReport run_soundness(const ExperimentSpec& spec) {
  ExperimentReport rep;
  rep.spec = spec.to_json();
  int accepted = 0;
  std::map<int, int> reject_rounds;
  for (int t = 0; t < spec.trials; ++t) {
    Rng rng = Rng::for_trial(spec.seed, static_cast<std::uint64_t>(t));
    const Circuit c = trial_circuit(spec, rng);
    const ProtocolParams params = spec.params_for(c.n, c.T());
    auto strategy = make_strategy(spec.strategy, spec.offset_in_K * params.K);
    const SessionResult r = run_protocol(c, params, *strategy, rng.next());
    accepted += r.verdict.accepted;
    if (!r.verdict.accepted) ++reject_rounds[r.verdict.round];
    rep.rows.push_back(json{{"trial", t},
                            {"accepted", r.verdict.accepted},
                            {"round", r.verdict.round},
                            {"reason", r.verdict.reason},
                            {"log2_gap", log2_modulus(r.claim - r.true_trace)},
                            {"log2_K", log2q(params.K)}});
  }
  const double freq = static_cast<double>(accepted) / spec.trials;
  const double sigma = binomial_sigma(1.0 / 3, spec.trials);
  json rounds = json::object();
  for (const auto& [r, k] : reject_rounds) rounds[std::to_string(r)] = k;
  rep.aggregates = json{{"accepted", accepted},
                        {"trials", spec.trials},
                        {"acceptance_rate", freq},
                        {"reject_rounds", rounds}};
  rep.checks.push_back({"cheating acceptance",
                        "acceptance rate with |C - tr A| >= K at most 1/3 (3 sigma slack)", freq,
                        1.0 / 3, 3 * sigma, freq <= 1.0 / 3 + 3 * sigma});
  return rep;
}

inline ExperimentReport run_lemma4(const ExperimentSpec& spec) {
  ExperimentReport rep;
  rep.spec = spec.to_json();
  const PrecisionContext ctx(spec.sample_p);
  const AngleGrid grid = AngleGrid::dyadic(spec.sample_p - 4);
  const mpq_class K(1, 80);
  json cells = json::array();
  std::uint64_t stream = 0;
  for (int np : spec.n_primes) {
    const int ndelta = spec.fixed_deltas ? static_cast<int>(spec.fixed_deltas->size()) : spec.deltas;
    for (int di = 0; di < ndelta; ++di) {
      Rng rng = Rng::for_trial(spec.seed, stream++);
      DenseOperator delta = spec.fixed_deltas
                                ? operator_from_doubles((*spec.fixed_deltas)[static_cast<std::size_t>(di)], ctx)
                                : random_operator(rng, np, ctx, K);
      if (delta.arity() != np) continue;
      // ||Delta||_F as an exact lower bound for the threshold.
      mpq_class frob = K;
      if (spec.fixed_deltas) frob = frobenius_norm(delta).to_rational();
      std::vector<mpq_class> thresholds;
      for (int m : spec.ms) {
        mpz_class base(16 * m * m);
        base *= m;
        mpz_class pw;
        mpz_pow_ui(pw.get_mpz_t(), base.get_mpz_t(), static_cast<unsigned long>(np));
        thresholds.push_back(4 * frob / mpq_class(pw));
      }
      std::vector<int> hits(spec.ms.size(), 0);
      for (int s = 0; s < spec.trials; ++s) {
        const DenseOperator u = sample_product_unitary(rng, np, grid, ctx);
        const FixedComplex t = trace_of_product(delta, u);
        for (std::size_t k = 0; k < spec.ms.size(); ++k) hits[k] += t.modulus_lt(thresholds[k]);
      }
      for (std::size_t k = 0; k < spec.ms.size(); ++k) {
        const int m = spec.ms[k];
        const double freq = static_cast<double>(hits[k]) / spec.trials;
        const double bound = std::min(1.0, 5.0 * np / m);
        const double slack = 3 * binomial_sigma(bound, spec.trials);
        rep.rows.push_back(json{{"n_prime", np},
                                {"delta", di},
                                {"m", m},
                                {"samples", spec.trials},
                                {"hits", hits[k]},
                                {"empirical", freq},
                                {"threshold", thresholds[k].get_d()},
                                {"bound", bound}});
        rep.checks.push_back({"tail n'=" + std::to_string(np) + " m=" + std::to_string(m) +
                                  " delta=" + std::to_string(di),
                              "Pr(|tr(Delta u)| < 4K/(16 m^3)^n') <= 5 n'/m (3 sigma slack)", freq,
                              bound, slack, freq <= bound + slack});
      }
    }
  }
  rep.aggregates = json{{"cells", rep.rows.size()}};
  return rep;
}

inline ExperimentReport run_lemma1(const ExperimentSpec& spec) {
  ExperimentReport rep;
  rep.spec = spec.to_json();
  const PrecisionContext ctx(spec.sample_p);
  const AngleGrid grid = AngleGrid::dyadic(spec.sample_p - 4);
  for (int np : spec.n_primes) {
    Rng rng = Rng::for_trial(spec.seed, static_cast<std::uint64_t>(np));
    std::vector<DenseOperator> deltas;
    if (spec.fixed_deltas) {
      for (const auto& v : *spec.fixed_deltas) {
        DenseOperator d = operator_from_doubles(v, ctx);
        if (d.arity() == np) deltas.push_back(std::move(d));
      }
    } else {
      // One sparse operator (a single basis projector) plus Gaussian ones.
      DenseOperator e = DenseOperator::zeros(register_labels(np), FixedComplex::zero(ctx));
      e.at(0, 0) = FixedComplex::one(ctx);
      deltas.push_back(e);
      while (static_cast<int>(deltas.size()) < spec.deltas) {
        deltas.push_back(random_operator(rng, np, ctx, mpq_class(1)));
      }
    }
    std::vector<int> zeros(deltas.size(), 0);
    std::vector<double> min_log2(deltas.size(), INFINITY);
    for (int s = 0; s < spec.trials; ++s) {
      const DenseOperator u = sample_product_unitary(rng, np, grid, ctx);
      for (std::size_t k = 0; k < deltas.size(); ++k) {
        const FixedComplex t = trace_of_product(deltas[k], u);
        if (t.is_zero()) {
          ++zeros[k];
        } else {
          min_log2[k] = std::min(min_log2[k], log2_modulus(t));
        }
      }
    }
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      rep.rows.push_back(json{{"n_prime", np},
                              {"delta", k},
                              {"samples", spec.trials},
                              {"exact_zeros", zeros[k]},
                              {"log2_min_modulus", min_log2[k]}});
      rep.checks.push_back({"no exact zero n'=" + std::to_string(np) + " delta=" + std::to_string(k),
                            "tr(Delta u) is never exactly zero for nonzero Delta",
                            static_cast<double>(zeros[k]), 0.0, 0.0, zeros[k] == 0});
    }
  }
  return rep;
}

inline ExperimentReport run_claim62(const ExperimentSpec& spec) {
  ExperimentReport rep;
  rep.spec = spec.to_json();
  const int np = spec.transfer_n_prime;
  const PrecisionContext fine_ctx(spec.sample_p);
  const AngleGrid fine = AngleGrid::dyadic(spec.sample_p - 4);
  const PrecisionContext coarse_ctx(spec.coarse_exponent + 4);
  const AngleGrid coarse = AngleGrid::dyadic(spec.coarse_exponent);
  const mpq_class xi = pow2q(-spec.coarse_exponent);
  for (int di = 0; di < spec.deltas; ++di) {
    Rng rng = Rng::for_trial(spec.seed, static_cast<std::uint64_t>(di));
    const DenseOperator delta_fine = random_operator(rng, np, fine_ctx, mpq_class(1));
    std::vector<FixedComplex> ce;
    for (const auto& e : delta_fine.entries()) ce.push_back(e.rescaled(coarse_ctx.p));
    const DenseOperator delta_coarse(delta_fine.qubits(), std::move(ce));
    // The coarse copy is a truncation of the fine one, which has ||.||_F >= 1, so use
    // the fine operator's norm for both thresholds.
    const mpq_class frob = frobenius_norm(delta_fine).to_rational();
    const mpq_class delta_thr = mpq_class(spec.delta_fraction) * frob;
    const mpq_class shrink = pow2q(np) * np * 6 * xi * frob;
    const mpq_class shrunk = delta_thr - shrink;
    int hits_fine = 0;
    int hits_coarse = 0;
    for (int s = 0; s < spec.trials; ++s) {
      hits_fine += trace_of_product(delta_fine, sample_product_unitary(rng, np, fine, fine_ctx))
                       .modulus_lt(delta_thr);
      hits_coarse +=
          sgn(shrunk) > 0 &&
          trace_of_product(delta_coarse, sample_product_unitary(rng, np, coarse, coarse_ctx))
              .modulus_lt(shrunk);
    }
    const double pf = static_cast<double>(hits_fine) / spec.trials;
    const double pc = static_cast<double>(hits_coarse) / spec.trials;
    const double extra = 3.0 * np * xi.get_d() / (2 * M_PI);
    const double slack = 4 * std::sqrt(std::pow(binomial_sigma(pf, spec.trials), 2) +
                                       std::pow(binomial_sigma(pc, spec.trials), 2));
    rep.rows.push_back(json{{"delta", di},
                            {"samples", spec.trials},
                            {"fine_hits", hits_fine},
                            {"coarse_hits", hits_coarse},
                            {"fine_probability", pf},
                            {"coarse_probability", pc},
                            {"threshold", delta_thr.get_d()},
                            {"shrunken_threshold", shrunk.get_d()}});
    rep.checks.push_back({"grid transfer delta=" + std::to_string(di),
                          "Pr_grid(|tr| < delta - 2^n' n' 6 xi ||Delta||) <= Pr_cont(|tr| < delta) "
                          "+ 3 n' xi / 2 pi (4 sigma slack)",
                          pc, pf + extra, slack, pc <= pf + extra + slack});
  }
  return rep;
}

inline ExperimentReport run_delta_trajectory(const ExperimentSpec& spec) {
  ExperimentReport rep;
  rep.spec = spec.to_json();
  std::vector<double> run_logs;  // per-run mean log2 decay
  std::map<int, std::pair<int, int>> above;  // round -> (surviving runs, |tr Delta_i| >= threshold)
  int final_rejections = 0;
  int skipped = 0;
  std::optional<ProtocolParams> shown;
  for (int t = 0; t < spec.trials; ++t) {
    Rng rng = Rng::for_trial(spec.seed, static_cast<std::uint64_t>(t));
    const Circuit c = trial_circuit(spec, rng);
    const ProtocolParams params = spec.params_for(c.n, c.T());
    if (!shown) shown = params;
    SpreadErrorStrategy cheat(spec.offset_in_K * params.K);
    const SessionResult r = run_protocol(c, params, cheat, rng.next());
    final_rejections += !r.verdict.accepted && r.verdict.round == params.T;
    const auto& d = r.deltas;
    json logs = json::array();
    double sum = 0;
    int count = 0;
    bool zero = false;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double l = log2_modulus(d[i]);
      logs.push_back(l);
      const int round = static_cast<int>(i);
      if (round < r.verdict.round || r.verdict.accepted) {
        auto& cell = above[round];
        ++cell.first;
        cell.second += !d[i].modulus_lt(params.soundness_threshold(round));
      }
      if (i + 1 < d.size()) {
        if (d[i].is_zero() || d[i + 1].is_zero()) {
          zero = true;
        } else {
          sum += log2_modulus(d[i + 1]) - l;
          ++count;
        }
      }
    }
    if (count > 0 && !zero) {
      run_logs.push_back(sum / count);
    } else {
      ++skipped;
    }
    rep.rows.push_back(json{{"trial", t},
                            {"accepted", r.verdict.accepted},
                            {"reject_round", r.verdict.round},
                            {"log2_abs_delta", logs},
                            {"mean_log2_decay", count ? sum / count : 0.0}});
  }
  double mean = 0;
  for (double v : run_logs) mean += v;
  const int runs = static_cast<int>(run_logs.size());
  mean /= std::max(1, runs);
  double var = 0;
  for (double v : run_logs) var += (v - mean) * (v - mean);
  var /= std::max(1, runs - 1);
  const double se = std::sqrt(var / std::max(1, runs));
  const double factor = std::exp2(mean);
  const double lo = std::exp2(mean - 3 * se);
  const double hi = std::exp2(mean + 3 * se);
  rep.aggregates = json{{"runs_used", runs},
                        {"runs_skipped", skipped},
                        {"geometric_mean_decay", factor},
                        {"ci_3sigma", json::array({lo, hi})},
                        {"final_round_rejections", final_rejections},
                        {"profile", profile_name(spec.profile)}};
  rep.checks.push_back({"error decay", "geometric-mean per-round factor |delta_{i+1}/delta_i| < 1 "
                                       "(upper 3 sigma bound)",
                        factor, 1.0, hi - factor, runs > 0 && hi < 1.0});
  if (shown) {
    const double per_round = 1.0 / (4.0 * shown->T) +
                             3.0 * shown->n_prime * shown->xi.get_d() / (2 * M_PI);
    json traj = json::array();
    for (const auto& [round, cell] : above) {
      const double frac = cell.first ? static_cast<double>(cell.second) / cell.first : 1.0;
      const double need = 1.0 - round * per_round;
      const double slack = 4 * binomial_sigma(need, cell.first);
      traj.push_back(json{{"round", round},
                          {"surviving", cell.first},
                          {"fraction_at_or_above_threshold", frac},
                          {"log2_threshold", log2q(shown->soundness_threshold(round))},
                          {"required", need}});
      rep.checks.push_back({"trajectory round " + std::to_string(round),
                            "fraction of surviving runs with |tr Delta_i| >= K/(4 chi^i) at least "
                            "1 - i (1/4T + 3 n' xi / 2 pi) (4 sigma slack)",
                            frac, need, slack, frac >= need - slack});
    }
    rep.aggregates["trajectory"] = traj;
  }
  return rep;
}

inline ExperimentReport run_comm(const ExperimentSpec& spec) {
  ExperimentReport rep;
  rep.spec = spec.to_json();
  bool all_ok = true;
  std::uint64_t max_total = 0;
  // Trial closest to its own cap.
  double worst_ratio = -1;
  double worst_total = 0;
  double worst_cap = 0;
  for (int t = 0; t < spec.trials; ++t) {
    Rng rng = Rng::for_trial(spec.seed, static_cast<std::uint64_t>(t));
    const Circuit c = trial_circuit(spec, rng);
    const ProtocolParams params = spec.params_for(c.n, c.T());
    HonestStrategy honest;
    const SessionResult r = run_protocol(c, params, honest, rng.next());
    const CommReport cr = comm_accounting(r.transcript, params);
    const bool ok = cr.within_cap && cr.unitary_messages_well_formed && cr.verdict_final_and_unique;
    all_ok = all_ok && ok;
    max_total = std::max(max_total, cr.total);
    const double cap = cr.cap.get_d();
    if (static_cast<double>(cr.total) / cap > worst_ratio) {
      worst_ratio = static_cast<double>(cr.total) / cap;
      worst_total = static_cast<double>(cr.total);
      worst_cap = cap;
    }
    json row = cr.to_json();
    row.erase("per_round");
    row["trial"] = t;
    rep.rows.push_back(row);
  }
  rep.aggregates = json{{"max_total_bits", max_total}};
  rep.checks.push_back({"communication", "every transcript within the closed-form bit cap, 9 "
                                         "indices per unitary, one final verdict",
                        worst_total, worst_cap, 0.0, all_ok});
  return rep;
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw InputError("trials must be at least 1");
  switch (spec.kind) {
    case ExperimentKind::completeness: return detail::run_completeness(spec);
    case ExperimentKind::soundness: return detail::run_soundness(spec);
    case ExperimentKind::lemma1: return detail::run_lemma1(spec);
    case ExperimentKind::lemma4: return detail::run_lemma4(spec);
    case ExperimentKind::claim62: return detail::run_claim62(spec);
    case ExperimentKind::delta_trajectory: return detail::run_delta_trajectory(spec);
    case ExperimentKind::comm_accounting: return detail::run_comm(spec);
  }
  throw InputError("unknown experiment");
}

}  // namespace qsc

#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"

using namespace qsc;
using oracle::QC;

namespace {

mpz_class pow_ui(unsigned long b, unsigned long e) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), b, e);
  return r;
}

// ceil(log2 N) for a positive integer, by bit length.
int ceil_log2_int(const mpz_class& N) {
  if (N == 1) return 0;
  const mpz_class m = N - 1;
  return static_cast<int>(mpz_sizeinbase(m.get_mpz_t(), 2));
}

Circuit h_toffoli() { return parse_circuit("qubits 3\ngate H 1\ngate TOFFOLI 1 2 3\n"); }

Operator<QC> zero_projector(int n) {
  std::vector<QC> e(std::size_t{1} << (2 * n));
  e[0] = {1, 0};
  return Operator<QC>(register_labels(n), std::move(e));
}

Operator<QC> identity_q(int n) {
  return Operator<QC>::identity(register_labels(n), QC{});
}

}  // namespace

// ----- parameters

TEST(Params, SmallestInstanceBySubstitution) {
  const ProtocolParams pp = derive_params(3, 1);
  EXPECT_EQ(pp.K, mpq_class(1, 80));
  EXPECT_EQ(pp.chi, pow_ui(60, 12));
  EXPECT_EQ(pp.mu, mpq_class(mpz_class(1), 320 * pow_ui(60, 12)));
  const int xi_exp = ceil_log2_int(pow_ui(2, 17) * 320 * pow_ui(60, 12));
  EXPECT_EQ(pp.xi_exponent, xi_exp);
  EXPECT_EQ(pp.p, xi_exp + 4);
  EXPECT_EQ(pp.p, 101);
  EXPECT_EQ(pp.m, 60);
  EXPECT_EQ(pp.n_prime, 3);
}

TEST(Params, FourQubitsFourGates) {
  const ProtocolParams pp = derive_params(4, 4);
  const mpz_class chi = pow_ui(60, 12) * pow_ui(4, 9);
  EXPECT_EQ(pp.chi, chi);
  mpz_class chi4;
  mpz_pow_ui(chi4.get_mpz_t(), chi.get_mpz_t(), 4);
  // 1/mu = 4 chi^4 / K with 1/K = 160.
  EXPECT_EQ(1 / pp.mu, mpq_class(4 * 160 * chi4));
  EXPECT_NEAR(log2q(1 / pp.mu), std::log2(640.0) + 4 * (12 * std::log2(60.0) + 18), 1e-9);
}

TEST(Params, InvariantsAcrossShapes) {
  for (int n : {3, 4, 6, 9}) {
    for (int T : {1, 2, 5, 8}) {
      const ProtocolParams pp = derive_params(n, T);
      mpz_class chiT;
      mpz_pow_ui(chiT.get_mpz_t(), pp.chi.get_mpz_t(), static_cast<unsigned long>(T));
      EXPECT_EQ(pp.mu, pp.K / (4 * mpq_class(chiT)));
      EXPECT_LE(pp.xi, pp.mu / (pow2q(2 * n + 11) * T));
      EXPECT_GT(2 * pp.xi, pp.mu / (pow2q(2 * n + 11) * T));  // snapped to the largest fitting power
      EXPECT_GE(pp.p, ceil_log2(1 / pp.xi) + 4);
      EXPECT_EQ(pp.m, 60 * T);
      EXPECT_LE(pp.honest_slack_bound(), pp.mu);
    }
  }
}

TEST(Params, EightGatesMatchFrozenValues) {
  std::ifstream in(std::string(QSC_GOLDEN_DIR) + "/params_T8.json");
  ASSERT_TRUE(in);
  const json g = json::parse(in);
  for (const auto& c : g.at("cases")) {
    const ProtocolParams pp = derive_params(c.at("n").get<int>(), 8);
    EXPECT_EQ(pp.K.get_str(), c.at("K").get<std::string>());
    EXPECT_EQ(pp.chi.get_str(), c.at("chi").get<std::string>());
    EXPECT_EQ(pp.xi_exponent, c.at("xi_exponent").get<int>());
    EXPECT_EQ(pp.p, c.at("p").get<int>());
    EXPECT_EQ(pp.bit_cap().get_str(), c.at("bit_cap").get<std::string>());
  }
}

TEST(Params, RefusalReportsRequiredPrecision) {
  try {
    derive_params(3, 8, 500);
    FAIL() << "expected a refusal";
  } catch (const ParameterRefusal& e) {
    EXPECT_EQ(e.required_bits(), 816);
    EXPECT_EQ(e.max_bits(), 500);
  }
  EXPECT_THROW(derive_params(2, 1), InputError);
  EXPECT_THROW(derive_params(3, 0), InputError);
}

TEST(Params, ReportMentionsEveryQuantity) {
  const std::string r = derive_params(3, 2).report();
  for (const char* key : {"K ", "chi", "mu", "xi", "m ", "p (bits)", "bit cap"}) {
    EXPECT_NE(r.find(key), std::string::npos) << key;
  }
}

// ----- verifier checks driven message by message

TEST(VerifierRound0, HonestMatrixPasses) {
  const Circuit c = h_toffoli();
  const ProtocolParams pp = derive_params(3, 2);
  HonestEngine e(c, pp.context());
  Verifier v(c, pp, 1, e.true_trace());
  v.open();
  const auto out = v.receive(wire::matrix(0, e.current()));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kind, MessageKind::unitary);
  EXPECT_TRUE(v.log()[0].passed);
  EXPECT_EQ(v.log()[0].lhs, v.log()[0].rhs);
}

TEST(VerifierRound0, OffsetClaimRejected) {
  const Circuit c = h_toffoli();
  const ProtocolParams pp = derive_params(3, 2);
  HonestEngine e(c, pp.context());
  Verifier v(c, pp, 1, detail::offset_value(e.true_trace(), pp.K));
  v.open();
  v.receive(wire::matrix(0, e.current()));
  ASSERT_TRUE(v.done());
  EXPECT_FALSE(v.verdict()->accepted);
  EXPECT_EQ(v.verdict()->round, 0);
}

TEST(VerifierRound0, TweakInsideToleranceAccepted) {
  const Circuit c = h_toffoli();
  const ProtocolParams pp = derive_params(3, 2);
  const PrecisionContext ctx = pp.context();
  HonestEngine e(c, ctx);
  Verifier v(c, pp, 1, e.true_trace());
  v.open();
  const FixedComplex half_mu = FixedComplex::from_real(truncate(pp.mu / 2, ctx));
  v.receive(wire::matrix(0, detail::plus_spread_diagonal(e.current(), half_mu)));
  EXPECT_FALSE(v.done());
  EXPECT_TRUE(v.log()[0].passed);
}

TEST(VerifierRound0, WrongLabelsAreMalformed) {
  const Circuit c = h_toffoli();
  const ProtocolParams pp = derive_params(3, 2);
  HonestEngine e(c, pp.context());
  Verifier v(c, pp, 1, e.true_trace());
  v.open();
  const DenseOperator wrong = partial_trace(e.current(), {1, 2});
  v.receive(wire::matrix(0, wrong));
  ASSERT_TRUE(v.done());
  EXPECT_FALSE(v.verdict()->accepted);
  EXPECT_NE(v.verdict()->reason.find("malformed"), std::string::npos);
}

TEST(VerifierRound0, PrecisionMismatchIsMalformed) {
  const Circuit c = h_toffoli();
  const ProtocolParams pp = derive_params(3, 2);
  HonestEngine e(c, PrecisionContext(pp.p + 1));
  Verifier v(c, pp, 1, FixedComplex::zero(pp.context()));
  v.open();
  v.receive(wire::matrix(0, e.current()));
  ASSERT_TRUE(v.done());
  EXPECT_NE(v.verdict()->reason.find("malformed"), std::string::npos);
}

namespace {

// Drives a verifier through round 0 honestly and returns the engine advanced to round 1.
struct RoundOneFixture {
  Circuit c = h_toffoli();
  ProtocolParams pp = derive_params(3, 2);
  HonestEngine e{c, pp.context()};
  Verifier v{c, pp, 7, e.true_trace()};

  RoundOneFixture() {
    v.open();
    const auto out = v.receive(wire::matrix(0, e.current()));
    const auto d = wire::parse_unitary(out.at(0).payload);
    e.advance(realize_local(d, pp.grid(), pp.context()));
  }
};

}  // namespace

TEST(VerifierRound, EntryJustAboveBoundRejected) {
  RoundOneFixture f;
  DenseOperator m = f.e.current();
  // Off-diagonal, so the trace check is unaffected.
  m.at(0, 1) = FixedComplex::from_real(truncate(mpq_class(9), f.pp.context()));
  f.v.receive(wire::matrix(1, m));
  ASSERT_TRUE(f.v.done());
  EXPECT_TRUE(f.v.log()[1].passed);
  EXPECT_FALSE(f.v.verdict()->accepted);
  EXPECT_EQ(f.v.verdict()->round, 1);
  EXPECT_EQ(f.v.verdict()->reason, "matrix entry exceeds 2^n");
}

TEST(VerifierRound, EntryAtBoundAllowed) {
  RoundOneFixture f;
  DenseOperator m = f.e.current();
  m.at(0, 1) = FixedComplex::from_real(truncate(mpq_class(8), f.pp.context()));
  f.v.receive(wire::matrix(1, m));
  EXPECT_TRUE(f.v.log()[1].passed);
  EXPECT_NE(f.v.verdict()->reason, "matrix entry exceeds 2^n");
}

TEST(VerifierRound, OutOfOrderMatrixIsMalformed) {
  RoundOneFixture f;
  f.v.receive(wire::matrix(2, f.e.current()));
  ASSERT_TRUE(f.v.done());
  EXPECT_NE(f.v.verdict()->reason.find("malformed"), std::string::npos);
}

TEST(VerifierRound, ReplayedMatrixRejected) {
  const ProtocolParams pp = derive_params(3, 2);
  Rng rng(11);
  int rejected = 0;
  const int runs = 100;
  for (int k = 0; k < runs; ++k) {
    const Circuit c = random_circuit(rng, 3, 2);
    ReplayStrategy s;
    const SessionResult r = run_protocol(c, pp, s, 1000 + k);
    if (!r.verdict.accepted) ++rejected;
  }
  EXPECT_EQ(rejected, runs);
}

// ----- factorized final trace

TEST(FinalTrace, IdentityHistoryGivesOne) {
  const PrecisionContext ctx(64);
  const AngleGrid g = AngleGrid::dyadic(60);
  LocalUnitaryDescriptor d;
  d.targets = {1, 3, 4};
  EXPECT_EQ(final_trace_factorized(5, {d, d, d}, g, ctx), FixedComplex::one(ctx));
  EXPECT_EQ(final_trace_factorized(5, {}, g, ctx), FixedComplex::one(ctx));
}

TEST(FinalTrace, OneRoundIsProductOfCorners) {
  const PrecisionContext ctx(64);
  const AngleGrid g = AngleGrid::dyadic(60);
  Rng rng(12);
  const LocalUnitaryDescriptor d = sample_local_unitary(rng, {1, 2, 3}, g);
  const auto a = realize_entries(d.triples[0], g, ctx);
  const auto b = realize_entries(d.triples[1], g, ctx);
  const auto c = realize_entries(d.triples[2], g, ctx);
  EXPECT_EQ(final_trace_factorized(3, {d}, g, ctx), FixedComplex::one(ctx) * a[0] * b[0] * c[0]);
}

TEST(FinalTrace, MatchesDenseProduct) {
  const ProtocolParams pp = derive_params(4, 5);
  const PrecisionContext ctx = pp.context();
  const AngleGrid g = pp.grid();
  const mpq_class bound = pow2q(4) * 5 * pp.xi;
  Rng rng(13);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<LocalUnitaryDescriptor> hist;
    Operator<QC> U = identity_q(4);
    for (int i = 0; i < 5; ++i) {
      QubitSet t = {1, 2, 3, 4};
      t.erase(t.begin() + static_cast<long>(rng.below(4)));
      hist.push_back(sample_local_unitary(rng, t, g));
      U = matmul(embed_gate(oracle::to_rational(realize_local(hist.back(), g, ctx)), 4), U);
    }
    const QC want = trace(matmul(U, zero_projector(4)));
    const QC got = QC::from_fixed(final_trace_factorized(4, hist, g, ctx));
    const QC d = got - want;
    EXPECT_LE(d.re * d.re + d.im * d.im, bound * bound);
  }
}

// ----- honest prover

TEST(HonestProver, RoundZeroTraceIsTheCircuitValue) {
  Rng rng(14);
  const PrecisionContext ctx(120);
  for (int k = 0; k < 10; ++k) {
    const Circuit c = random_circuit(rng, 4, 4);
    HonestEngine e(c, ctx);
    EXPECT_EQ(trace(e.current()), e.true_trace());
    EXPECT_EQ(e.true_trace(), top_row_trace(c, ctx));
  }
}

TEST(HonestProver, RankOneReductionMatchesDenseOracle) {
  const int n = 4;
  const int T = 3;
  const ProtocolParams pp = derive_params(n, T);
  const PrecisionContext ctx = pp.context();
  const AngleGrid g = pp.grid();
  const mpq_class tol = pow2q(-ctx.p + 16);
  Rng rng(15);
  for (int trial = 0; trial < 4; ++trial) {
    const Circuit c = random_circuit(rng, n, T);
    const auto cg = canonicalize(c);
    std::vector<Operator<QC>> G;
    for (const auto& gate : c.gates) G.push_back(embed_gate(oracle::to_rational(gate_matrix(gate, ctx)), n));
    HonestEngine e(c, ctx);
    Operator<QC> U = identity_q(n);
    for (int i = 0; i < T; ++i) {
      Operator<QC> tail = identity_q(n);
      for (int k = T - 1; k >= i; --k) tail = matmul(tail, G[static_cast<std::size_t>(k)]);
      const Operator<QC> A = matmul(matmul(U, zero_projector(n)), tail);
      const auto want = partial_trace(A, cg[static_cast<std::size_t>(i)].padded_targets);
      ASSERT_LE(oracle::max_dist2(oracle::to_rational(e.current()), want), tol * tol) << "round " << i;
      const LocalUnitaryDescriptor d = sample_local_unitary(rng, cg[static_cast<std::size_t>(i)].padded_targets, g);
      const DenseOperator u = realize_local(d, g, ctx);
      U = matmul(embed_gate(oracle::to_rational(u), n), U);
      e.advance(u);
    }
  }
}

TEST(HonestProver, AcceptedWithSlackBelowBound) {
  Rng rng(16);
  for (auto [n, T] : {std::pair{3, 1}, {3, 2}, {4, 3}}) {
    const ProtocolParams pp = derive_params(n, T);
    for (int k = 0; k < 5; ++k) {
      const Circuit c = random_circuit(rng, n, T);
      HonestStrategy s;
      const SessionResult r = run_protocol(c, pp, s, rng.next());
      ASSERT_TRUE(r.verdict.accepted) << r.verdict.reason;
      ASSERT_EQ(static_cast<int>(r.verifier_log.size()), T + 1);
      for (const auto& rec : r.verifier_log) {
        EXPECT_TRUE((rec.lhs - rec.rhs).modulus_le(pp.honest_slack_bound()));
      }
    }
  }
}

TEST(HonestProver, SingleGateRunsBothChecks) {
  const Circuit c = parse_circuit("qubits 3\ngate H 2\n");
  HonestStrategy s;
  const SessionResult r = run_protocol(c, derive_params(3, 1), s, 3);
  EXPECT_TRUE(r.verdict.accepted);
  ASSERT_EQ(r.verifier_log.size(), 2u);
  EXPECT_EQ(r.verifier_log[0].round, 0);
  EXPECT_EQ(r.verifier_log[1].round, 1);
}

TEST(HonestProver, VerifierStaysOnThreeQubits) {
  Rng rng(17);
  const Circuit c = random_circuit(rng, 6, 2);
  HonestStrategy s;
  const SessionResult r = run_protocol(c, derive_params(6, 2), s, 4);
  EXPECT_TRUE(r.verdict.accepted);
  EXPECT_EQ(r.verifier_peak_dimension, 8u);
}

// ----- cheating strategies

TEST(Cheaters, ConstantOffsetCaughtEarly) {
  const ProtocolParams pp = derive_params(3, 2);
  Rng rng(18);
  for (int k = 0; k < 20; ++k) {
    const Circuit c = random_circuit(rng, 3, 2);
    ConstantOffsetStrategy s(pp.K);
    const SessionResult r = run_protocol(c, pp, s, 50 + k);
    ASSERT_FALSE(r.verdict.accepted);
    EXPECT_LE(r.verdict.round, 1);
    EXPECT_GE(abs((r.claim - r.true_trace).re().to_rational()), pp.K);
  }
}

TEST(Cheaters, SpreadErrorMatchesClaimAtRoundZero) {
  const ProtocolParams pp = derive_params(3, 2);
  SpreadErrorStrategy s(pp.K);
  const SessionResult r = run_protocol(h_toffoli(), pp, s, 5);
  EXPECT_EQ(r.verifier_log.at(0).lhs, r.verifier_log.at(0).rhs);
  EXPECT_TRUE(r.verifier_log.at(0).passed);
  EXPECT_FALSE(r.verdict.accepted);
  EXPECT_EQ(r.verdict.round, 2);
  ASSERT_EQ(r.deltas.size(), 2u);
  EXPECT_EQ(r.deltas[0], r.claim - r.true_trace);
}

TEST(Cheaters, VerifierSuppliedClaimRejected) {
  const ProtocolParams pp = derive_params(3, 1);
  const Circuit c = parse_circuit("qubits 3\ngate X 1\n");
  HonestEngine e(c, pp.context());
  HonestStrategy s;
  const SessionResult r = run_protocol(c, pp, s, 6, detail::offset_value(e.true_trace(), pp.K));
  EXPECT_EQ(r.claim_source, "verifier");
  EXPECT_FALSE(r.verdict.accepted);
  EXPECT_EQ(r.verdict.round, 0);
}

TEST(Cheaters, SpreadEvenlySumsExactly) {
  const PrecisionContext ctx(32);
  const FixedComplex d(FixedReal::from_mantissa(mpz_class(-13), ctx), FixedReal::from_mantissa(mpz_class(21), ctx));
  const auto parts = detail::spread_evenly(d, 8);
  FixedComplex sum = FixedComplex::zero(ctx);
  for (const auto& x : parts) sum = sum + x;
  EXPECT_EQ(sum, d);
}

// ----- transcripts

TEST(Transcript, SameSeedSameBytes) {
  const ProtocolParams pp = derive_params(3, 2);
  HonestStrategy a;
  HonestStrategy b;
  HonestStrategy c;
  const auto r1 = run_protocol(h_toffoli(), pp, a, 99);
  const auto r2 = run_protocol(h_toffoli(), pp, b, 99);
  const auto r3 = run_protocol(h_toffoli(), pp, c, 100);
  EXPECT_EQ(r1.transcript.to_jsonl(), r2.transcript.to_jsonl());
  EXPECT_NE(r1.transcript.to_jsonl(), r3.transcript.to_jsonl());
}

TEST(Transcript, JsonLinesRoundTrip) {
  const ProtocolParams pp = derive_params(3, 2);
  SpreadErrorStrategy s(pp.K);
  const auto r = run_protocol(h_toffoli(), pp, s, 8);
  const Transcript back = Transcript::from_jsonl(r.transcript.to_jsonl());
  EXPECT_EQ(back.seed, 8u);
  EXPECT_EQ(back.messages, r.transcript.messages);
  EXPECT_EQ(back.to_jsonl(), r.transcript.to_jsonl());
  ASSERT_TRUE(back.verdict());
  EXPECT_EQ(back.verdict()->accepted, r.verdict.accepted);
  EXPECT_EQ(back.verdict()->round, r.verdict.round);
}

TEST(Transcript, RecordShape) {
  const ProtocolParams pp = derive_params(3, 2);
  HonestStrategy s;
  const auto r = run_protocol(h_toffoli(), pp, s, 9);
  for (const auto& m : r.transcript.messages) {
    const json j = m.to_json();
    for (const char* key : {"round", "from", "kind", "payload", "bits"}) EXPECT_TRUE(j.contains(key)) << key;
    if (m.kind == MessageKind::matrix) {
      EXPECT_EQ(m.payload.at("entries").size(), 64u);
    }
    if (m.kind == MessageKind::unitary) {
      EXPECT_EQ(m.payload.at("indices").size(), 9u);
    }
  }
  EXPECT_LE(mpz_class(static_cast<unsigned long>(r.transcript.total_bits())), pp.bit_cap());
}

TEST(Transcript, MalformedInputRejected) {
  EXPECT_THROW(Transcript::from_jsonl("{\"header\":{}}\nnot json\n"), InputError);
  EXPECT_THROW(Transcript::from_jsonl("{\"round\":0}\n"), InputError);
}

TEST(Transcript, TwoProcessSessionAgreesWithInProcess) {
  const ProtocolParams pp = derive_params(3, 2);
  HonestStrategy a;
  HonestStrategy b;
  const auto local = run_protocol(h_toffoli(), pp, a, 21);
  const auto remote = run_protocol_two_process(h_toffoli(), pp, b, 21);
  EXPECT_TRUE(remote.verdict.accepted);
  EXPECT_EQ(remote.transcript.to_jsonl(), local.transcript.to_jsonl());
}

TEST(Transcript, TwoProcessCheaterStillCaught) {
  const ProtocolParams pp = derive_params(3, 2);
  ConstantOffsetStrategy s(pp.K);
  const auto r = run_protocol_two_process(h_toffoli(), pp, s, 22);
  EXPECT_FALSE(r.verdict.accepted);
}

// ----- decisions built on the protocol

TEST(Postbqp, HonestCertainYesAccepts) {
  const auto res = decide_postbqp(parse_circuit("qubits 3\ngate H 3\n"), honest_factory(), 1);
  EXPECT_EQ(res.outcome, PostbqpOutcome::accept);
  EXPECT_EQ(res.sessions, 4);
}

TEST(Postbqp, HonestCertainNoRejects) {
  const auto res = decide_postbqp(parse_circuit("qubits 3\ngate X 2\n"), honest_factory(), 2);
  EXPECT_EQ(res.outcome, PostbqpOutcome::reject);
}

TEST(Postbqp, DoubledRunsGiveTwoNinths) {
  const mpq_class per_run(1, 3);
  const mpq_class per_trace = per_run * per_run;
  EXPECT_EQ(per_trace, mpq_class(1, 9));
  EXPECT_EQ(2 * per_trace, mpq_class(2, 9));
  EXPECT_LT(2 * per_trace, mpq_class(1, 3));
}

TEST(Postbqp, LyingAboutOneTraceIsCaught) {
  // Claim y is 0.9 higher on a certain-no instance; the union bound says at most 2/9 get through.
  const Circuit c = parse_circuit("qubits 3\ngate X 2\n");
  const int trials = 20;
  int caught = 0;
  for (int k = 0; k < trials; ++k) {
    StrategyFactory liar = [](const RunRole& r) -> std::unique_ptr<ProverStrategy> {
      if (r.role == 'y') return std::make_unique<SpreadErrorStrategy>(mpq_class(9, 10));
      return std::make_unique<HonestStrategy>();
    };
    if (decide_postbqp(c, liar, 300 + k).outcome == PostbqpOutcome::caught_cheating) ++caught;
  }
  EXPECT_GE(caught, trials * 7 / 9);
}

TEST(Orchestrator, HonestBitsExact) {
  const Circuit yes = parse_circuit("qubits 3\ngate H 3\n");
  const Circuit no = parse_circuit("qubits 3\ngate X 2\n");
  const auto res = oracle_orchestrator({yes, no, yes, yes}, honest_factory(), 3);
  EXPECT_FALSE(res.aborted);
  EXPECT_EQ(res.bits, (std::vector<int>{1, 0, 1, 1}));
}

TEST(Orchestrator, FailureBoundArithmetic) {
  for (int m : {2, 4, 8, 16}) {
    int lg = 0;
    while ((1 << lg) < m) ++lg;
    EXPECT_EQ(orchestrator_repetitions(m), lg + 2);
    mpz_class den = pow_ui(3, static_cast<unsigned long>(lg + 2));
    EXPECT_EQ(orchestrator_failure_bound(m), mpq_class(2 * m, den.get_ui()));
    EXPECT_LT(orchestrator_failure_bound(m), mpq_class(1, 3));
  }
}

TEST(Orchestrator, FlippedAnswerAborts) {
  // Query 1 truly answers 1. The adversary sabotages its positive runs and then lies on the
  // complement's joint trace to make 0 look verified.
  const Circuit yes = parse_circuit("qubits 3\ngate H 3\n");
  StrategyFactory flip = [](const RunRole& r) -> std::unique_ptr<ProverStrategy> {
    if (r.query_index != 1) return std::make_unique<HonestStrategy>();
    if (!r.complement) return std::make_unique<ConstantOffsetStrategy>(mpq_class(-1, 2));
    if (r.role == 'y') return std::make_unique<SpreadErrorStrategy>(mpq_class(9, 10));
    return std::make_unique<HonestStrategy>();
  };
  const int trials = 12;
  int aborted = 0;
  for (int k = 0; k < trials; ++k) {
    const auto res = oracle_orchestrator({yes, yes}, flip, 700 + k);
    if (res.aborted) {
      ++aborted;
      EXPECT_EQ(res.aborted_at, 1);
    }
  }
  EXPECT_GE(3 * aborted, 2 * trials);
}

#pragma once

// Verifier and prover endpoints for the trace-verification protocol, prover strategies,
// and in-process / two-process session drivers.
//
// Round structure for a circuit g_1..g_T (canonical targets t_i):
//   V -> P  claim (a value C, or a request for the prover's claim)
//   P -> V  [claim C], M'_0 on t_1                      V checks |C - tr M'_0| <= mu
//   V -> P  u_i on t_i;  P -> V  M'_i on t_{i+1}        V checks |tr M'_i - tr(M'_{i-1} g_i^-1 u_i)| <= mu
//   V -> P  u_T, verdict                                V compares prod_j <0|w_j|0> with tr(M'_{T-1} g_T^-1 u_T)

#include <gmpxx.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "qsumcheck/circuit.hpp"
#include "qsumcheck/errors.hpp"
#include "qsumcheck/linalg.hpp"
#include "qsumcheck/params.hpp"
#include "qsumcheck/precision.hpp"
#include "qsumcheck/rng.hpp"
#include "qsumcheck/sampling.hpp"
#include "qsumcheck/transcript.hpp"

namespace qsc {

// ---------------------------------------------------------------------------------------
// Final trace as a product of per-qubit 2x2 factors.

class FactorizedTrace {
 public:
  FactorizedTrace(int n, const PrecisionContext& ctx) : n_(n), ctx_(ctx) {
    const FixedComplex zero = FixedComplex::zero(ctx);
    const FixedComplex one = FixedComplex::one(ctx);
    w_.assign(static_cast<std::size_t>(n), {one, zero, zero, one});
  }

  /// w_j <- u^(j) w_j for each of the descriptor's three qubits.
  void apply(const LocalUnitaryDescriptor& d, const AngleGrid& grid) {
    for (int k = 0; k < 3; ++k) {
      const int q = d.targets[static_cast<std::size_t>(k)];
      if (q < 1 || q > n_) throw InputError("descriptor qubit outside the register");
      const auto u = realize_entries(d.triples[static_cast<std::size_t>(k)], grid, ctx_);
      auto& w = w_[static_cast<std::size_t>(q - 1)];
      std::array<FixedComplex, 4> next;
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
          WideAccumulator acc(ctx_.p, ctx_.max_integer_bits);
          acc.add_product(u[r * 2], w[c]);
          acc.add_product(u[r * 2 + 1], w[2 + c]);
          next[r * 2 + c] = acc.result();
        }
      }
      w = next;
    }
  }

  const std::array<FixedComplex, 4>& factor(int qubit) const {
    return w_.at(static_cast<std::size_t>(qubit - 1));
  }

  /// prod_j <0| w_j |0>.
  FixedComplex value() const {
    FixedComplex v = FixedComplex::one(ctx_);
    for (const auto& w : w_) v = v * w[0];
    return v;
  }

 private:
  int n_;
  PrecisionContext ctx_;
  std::vector<std::array<FixedComplex, 4>> w_;
};

inline FixedComplex final_trace_factorized(int n, const std::vector<LocalUnitaryDescriptor>& history,
                                           const AngleGrid& grid, const PrecisionContext& ctx) {
  FactorizedTrace f(n, ctx);
  for (const auto& d : history) f.apply(d, grid);
  return f.value();
}

// ---------------------------------------------------------------------------------------
// Honest prover machinery: A_i = psi_i phi_i with psi_i = U_i..U_1|0^n>, phi_i = <0^n|G_T..G_{i+1}.

class HonestEngine {
 public:
  HonestEngine(Circuit c, const PrecisionContext& ctx)
      : circuit_(std::move(c)), ctx_(ctx), gates_(canonicalize(circuit_)) {
    if (circuit_.n > kMaxDenseQubits) throw InputError("register too large for the prover");
    for (const auto& g : circuit_.gates) matrices_.push_back(gate_matrix(g, ctx_));
    psi_.assign(std::size_t{1} << circuit_.n, FixedComplex::zero(ctx_));
    psi_[0] = FixedComplex::one(ctx_);
    rebuild_phi();
    true_trace_ = phi_[0];
  }

  const Circuit& circuit() const noexcept { return circuit_; }
  const std::vector<CanonicalGate>& gates() const noexcept { return gates_; }
  int round() const noexcept { return round_; }
  const std::vector<FixedComplex>& psi() const noexcept { return psi_; }
  const std::vector<FixedComplex>& phi() const noexcept { return phi_; }

  /// tr(A) = <0^n| G_T..G_1 |0^n>.
  const FixedComplex& true_trace() const noexcept { return true_trace_; }

  /// tr(A_i) = phi_i psi_i.
  FixedComplex current_trace() const {
    DotAccumulator<FixedComplex> acc(psi_[0]);
    for (std::size_t x = 0; x < psi_.size(); ++x) acc.add_product(phi_[x], psi_[x]);
    return acc.result();
  }

  /// M_i: A_i reduced to the canonical targets of g_{i+1}.
  DenseOperator current() const {
    if (round_ >= circuit_.T()) throw InputError("no gate follows the last round");
    return reduced_outer(psi_, phi_, circuit_.n,
                         gates_[static_cast<std::size_t>(round_)].padded_targets);
  }

  /// Applies the round's realized local unitary to psi and moves to the next round.
  void advance(const DenseOperator& u) {
    if (round_ >= circuit_.T()) throw InputError("protocol already finished");
    if (u.qubits() != gates_[static_cast<std::size_t>(round_)].padded_targets) {
      throw InputError("unitary does not act on the current gate's targets");
    }
    apply_left(psi_, circuit_.n, u);
    ++round_;
    rebuild_phi();
  }

 private:
  void rebuild_phi() {
    phi_.assign(std::size_t{1} << circuit_.n, FixedComplex::zero(ctx_));
    phi_[0] = FixedComplex::one(ctx_);
    for (int k = circuit_.T() - 1; k >= round_; --k) {
      apply_right(phi_, circuit_.n, matrices_[static_cast<std::size_t>(k)]);
    }
  }

  Circuit circuit_;
  PrecisionContext ctx_;
  std::vector<CanonicalGate> gates_;
  std::vector<DenseOperator> matrices_;
  std::vector<FixedComplex> psi_;
  std::vector<FixedComplex> phi_;
  FixedComplex true_trace_;
  int round_ = 0;
};

// ---------------------------------------------------------------------------------------
// Prover strategies.

struct RoundContext {
  int round = 0;
  const ProtocolParams* params = nullptr;
  /// The claim C under test.
  FixedComplex claim;
  /// M_i from the honest machinery.
  const DenseOperator* honest = nullptr;
  /// g_i^-1 u_i as the verifier computes it (rounds >= 1).
  const DenseOperator* h = nullptr;
  const DenseOperator* previous_sent = nullptr;
  const DenseOperator* previous_honest = nullptr;
};

class ProverStrategy {
 public:
  virtual ~ProverStrategy() = default;
  virtual std::string name() const = 0;
  /// Value claimed when the verifier asks the prover for C.
  virtual FixedComplex claim(const FixedComplex& true_trace) { return true_trace; }
  virtual DenseOperator respond(const RoundContext& ctx) = 0;
  /// Per-round tracked error, for strategies that track one.
  virtual const std::vector<FixedComplex>& deltas() const {
    static const std::vector<FixedComplex> none;
    return none;
  }
};

class HonestStrategy : public ProverStrategy {
 public:
  std::string name() const override { return "honest"; }
  DenseOperator respond(const RoundContext& ctx) override { return *ctx.honest; }
};

namespace detail {

/// Splits delta over `count` diagonal slots so the slots sum to delta exactly; slot values
/// differ by at most one grid unit.
inline std::vector<FixedComplex> spread_evenly(const FixedComplex& delta, std::size_t count) {
  auto split = [&](const FixedReal& v) {
    const mpz_class& m = v.mantissa();
    mpz_class q;
    mpz_class r;
    mpz_tdiv_qr_ui(q.get_mpz_t(), r.get_mpz_t(), m.get_mpz_t(), count);
    std::vector<FixedReal> out;
    const long rem = r.get_si();
    const long step = rem < 0 ? -1 : 1;
    for (std::size_t k = 0; k < count; ++k) {
      mpz_class e = q;
      if (static_cast<long>(k) < rem * step) e += step;
      out.emplace_back(std::move(e), v.precision(), v.integer_bits());
    }
    return out;
  };
  const auto re = split(delta.re());
  const auto im = split(delta.im());
  std::vector<FixedComplex> out;
  for (std::size_t k = 0; k < count; ++k) out.emplace_back(re[k], im[k]);
  return out;
}

inline DenseOperator plus_spread_diagonal(const DenseOperator& m, const FixedComplex& delta) {
  DenseOperator out = m;
  const auto parts = spread_evenly(delta, m.dim());
  for (std::size_t k = 0; k < m.dim(); ++k) out.at(k, k) = out(k, k) + parts[k];
  return out;
}

/// base + offset with the offset rounded away from zero, so the gap is at least |offset|.
inline FixedComplex offset_value(const FixedComplex& base, const mpq_class& offset) {
  const auto ctx = base.context();
  FixedReal step = truncate(offset, ctx);
  if (step.to_rational() != offset) {
    mpz_class m = step.mantissa() + sgn(offset);
    step = FixedReal(std::move(m), ctx.p, ctx.max_integer_bits);
  }
  return base + FixedComplex::from_real(step);
}

}  // namespace detail

/// Claims tr(A) + offset and adds (delta_0 / 8) I to every honest matrix,
/// with delta_0 = C - tr(M_0).
class ConstantOffsetStrategy : public ProverStrategy {
 public:
  explicit ConstantOffsetStrategy(mpq_class offset) : offset_(std::move(offset)) {}
  std::string name() const override { return "constant-offset"; }
  FixedComplex claim(const FixedComplex& true_trace) override {
    return detail::offset_value(true_trace, offset_);
  }
  DenseOperator respond(const RoundContext& ctx) override {
    if (ctx.round == 0) {
      delta0_ = ctx.claim - trace(*ctx.honest);
      log_.push_back(*delta0_);
    }
    return detail::plus_spread_diagonal(*ctx.honest, *delta0_);
  }
  const std::vector<FixedComplex>& deltas() const override { return log_; }

 private:
  mpq_class offset_;
  std::optional<FixedComplex> delta0_;
  std::vector<FixedComplex> log_;
};

/// Claims tr(A) + offset and sends M_i + (delta_i / 8) I where delta_0 = C - tr(M_0) and
/// delta_i = tr((M'_{i-1} - M_{i-1}) g_i^-1 u_i), so every consistency check sees no gap.
class SpreadErrorStrategy : public ProverStrategy {
 public:
  explicit SpreadErrorStrategy(mpq_class offset) : offset_(std::move(offset)) {}
  std::string name() const override { return "spread-error"; }
  FixedComplex claim(const FixedComplex& true_trace) override {
    return detail::offset_value(true_trace, offset_);
  }
  DenseOperator respond(const RoundContext& ctx) override {
    FixedComplex delta;
    if (ctx.round == 0) {
      delta = ctx.claim - trace(*ctx.honest);
    } else {
      delta = trace_of_product(*ctx.previous_sent - *ctx.previous_honest, *ctx.h);
    }
    log_.push_back(delta);
    return detail::plus_spread_diagonal(*ctx.honest, delta);
  }
  const std::vector<FixedComplex>& deltas() const override { return log_; }

 private:
  mpq_class offset_;
  std::vector<FixedComplex> log_;
};

/// Honest at round 0, then resends its previous matrix relabeled onto the new targets.
class ReplayStrategy : public ProverStrategy {
 public:
  std::string name() const override { return "replay"; }
  DenseOperator respond(const RoundContext& ctx) override {
    if (ctx.round == 0) return *ctx.honest;
    return DenseOperator(ctx.honest->qubits(), ctx.previous_sent->entries());
  }
};

// ---------------------------------------------------------------------------------------
// Verifier endpoint.

struct RoundRecord {
  int round = 0;
  /// Left and right sides of the round's comparison.
  FixedComplex lhs;
  FixedComplex rhs;
  bool passed = false;
};

class Verifier {
 public:
  Verifier(const Circuit& c, ProtocolParams params, std::uint64_t seed,
           std::optional<FixedComplex> claim = std::nullopt)
      : params_(std::move(params)),
        ctx_(params_.context()),
        grid_(params_.grid()),
        rng_(seed),
        gates_(canonicalize(c)),
        factors_(c.n, ctx_),
        claim_(std::move(claim)),
        claim_from_verifier_(claim_.has_value()) {
    c.validate();
    if (c.n != params_.n || c.T() != params_.T) {
      throw InputError("parameters were derived for a different circuit shape");
    }
  }

  Message open() {
    if (claim_from_verifier_) return wire::claim(Sender::verifier, *claim_);
    return wire::claim_request();
  }

  std::vector<Message> receive(const Message& m) {
    if (verdict_) throw InputError("session already decided");
    if (m.from != Sender::prover) return reject(round_, "malformed: message not from the prover");
    try {
      if (m.kind == MessageKind::claim) {
        if (claim_from_verifier_ || claim_ || round_ != 0 || m.round != 0) {
          return reject(round_, "malformed: unexpected claim");
        }
        const auto p = m.payload.at("p").get<int>();
        if (p != ctx_.p) return reject(0, "malformed: claim precision mismatch");
        claim_ = wire::parse_complex(m.payload.at("value"), ctx_);
        return {};
      }
      if (m.kind != MessageKind::matrix || m.round != round_) {
        return reject(round_, "malformed: expected the round " + std::to_string(round_) + " matrix");
      }
      if (!claim_) return reject(0, "malformed: matrix before any claim");
      DenseOperator mat = wire::parse_matrix(m.payload, ctx_);
      note_dimension(mat.dim());
      const auto& expected = gates_[static_cast<std::size_t>(round_)].padded_targets;
      if (mat.qubits() != expected || mat.dim() != 8) {
        return reject(round_, "malformed: matrix must act on " + detail::labels_string(expected));
      }
      return round_ == 0 ? on_round0(std::move(mat)) : on_round(std::move(mat));
    } catch (const InputError& e) {
      return reject(round_, std::string("malformed: ") + e.what());
    } catch (const nlohmann::json::exception& e) {
      return reject(round_, std::string("malformed: ") + e.what());
    } catch (const ConfigurationError& e) {
      return reject(round_, std::string("malformed: ") + e.what());
    }
  }

  bool done() const noexcept { return verdict_.has_value(); }
  const std::optional<Verdict>& verdict() const noexcept { return verdict_; }
  const std::optional<FixedComplex>& claim() const noexcept { return claim_; }
  bool claim_from_verifier() const noexcept { return claim_from_verifier_; }
  const std::vector<RoundRecord>& log() const noexcept { return log_; }
  const std::vector<LocalUnitaryDescriptor>& history() const noexcept { return history_; }
  /// Largest operator dimension the verifier ever held.
  std::size_t peak_dimension() const noexcept { return peak_dim_; }
  const ProtocolParams& params() const noexcept { return params_; }

 private:
  std::vector<Message> on_round0(DenseOperator mat) {
    const FixedComplex tr = trace(mat);
    const bool ok = (*claim_ - tr).modulus_le(params_.mu);
    log_.push_back({0, *claim_, tr, ok});
    if (!ok) return reject(0, "claim differs from the trace of the round 0 matrix");
    last_ = std::move(mat);
    return next_unitary();
  }

  std::vector<Message> on_round(DenseOperator mat) {
    const FixedComplex lhs = trace(mat);
    const FixedComplex rhs = trace_of_product(*last_, h_);
    const bool ok = (lhs - rhs).modulus_le(params_.mu);
    log_.push_back({round_, lhs, rhs, ok});
    if (!ok) return reject(round_, "consistency check failed");
    if (!entries_bounded(mat, params_.entry_bound())) {
      return reject(round_, "matrix entry exceeds 2^n");
    }
    last_ = std::move(mat);
    return next_unitary();
  }

  // Samples u_{round+1} for gate g_{round+1}; decides if that was the last gate.
  std::vector<Message> next_unitary() {
    const int i = round_ + 1;
    const auto& cg = gates_[static_cast<std::size_t>(i - 1)];
    LocalUnitaryDescriptor d = sample_local_unitary(rng_, cg.padded_targets, grid_);
    const DenseOperator u = realize_local(d, grid_, ctx_);
    const DenseOperator ginv = canonical_inverse(cg, ctx_);
    note_dimension(u.dim());
    h_ = matmul(ginv, u);
    factors_.apply(d, grid_);
    history_.push_back(d);
    std::vector<Message> out{wire::unitary(i, d, params_.xi_exponent, ctx_.p)};
    round_ = i;
    if (i < params_.T) return out;

    const FixedComplex lhs = factors_.value();
    const FixedComplex rhs = trace_of_product(*last_, h_);
    const bool ok = (lhs - rhs).modulus_le(params_.mu);
    log_.push_back({i, lhs, rhs, ok});
    out.push_back(decide(i, ok, ok ? "final check passed" : "final check failed"));
    return out;
  }

  Message decide(int round, bool accepted, const std::string& reason) {
    verdict_ = Verdict{accepted, round, reason};
    return wire::verdict(round, accepted, reason);
  }

  std::vector<Message> reject(int round, const std::string& reason) {
    return {decide(round, false, reason)};
  }

  void note_dimension(std::size_t d) { peak_dim_ = std::max(peak_dim_, d); }

  ProtocolParams params_;
  PrecisionContext ctx_;
  AngleGrid grid_;
  Rng rng_;
  std::vector<CanonicalGate> gates_;
  FactorizedTrace factors_;
  std::optional<FixedComplex> claim_;
  bool claim_from_verifier_;
  int round_ = 0;
  std::optional<DenseOperator> last_;
  DenseOperator h_;
  std::vector<LocalUnitaryDescriptor> history_;
  std::vector<RoundRecord> log_;
  std::optional<Verdict> verdict_;
  std::size_t peak_dim_ = 0;
};

// ---------------------------------------------------------------------------------------
// Prover endpoint.

class Prover {
 public:
  Prover(const Circuit& c, ProtocolParams params, ProverStrategy& strategy)
      : params_(std::move(params)),
        ctx_(params_.context()),
        grid_(params_.grid()),
        engine_(c, ctx_),
        strategy_(strategy) {}

  std::vector<Message> receive(const Message& m) {
    if (m.from != Sender::verifier) throw InputError("prover received its own message");
    switch (m.kind) {
      case MessageKind::claim: {
        std::vector<Message> out;
        if (m.payload.contains("value")) {
          claim_ = wire::parse_complex(m.payload.at("value"), ctx_);
        } else {
          claim_ = strategy_.claim(engine_.true_trace());
          out.push_back(wire::claim(Sender::prover, *claim_));
        }
        out.push_back(respond(nullptr));
        return out;
      }
      case MessageKind::unitary: {
        const int i = m.round;
        if (i != engine_.round() + 1) throw InputError("unitary out of order");
        if (i >= params_.T) return {};
        const auto d = wire::parse_unitary(m.payload);
        const DenseOperator u = realize_local(d, grid_, ctx_);
        const DenseOperator h =
            matmul(canonical_inverse(engine_.gates()[static_cast<std::size_t>(i - 1)], ctx_), u);
        engine_.advance(u);
        return {respond(&h)};
      }
      case MessageKind::verdict: finished_ = true; return {};
      case MessageKind::matrix: break;
    }
    throw InputError("prover received an unexpected message");
  }

  bool finished() const noexcept { return finished_; }
  const HonestEngine& engine() const noexcept { return engine_; }
  const std::optional<FixedComplex>& claim() const noexcept { return claim_; }

 private:
  Message respond(const DenseOperator* h) {
    DenseOperator honest = engine_.current();
    RoundContext rc;
    rc.round = engine_.round();
    rc.params = &params_;
    rc.claim = *claim_;
    rc.honest = &honest;
    rc.h = h;
    rc.previous_sent = previous_sent_ ? &*previous_sent_ : nullptr;
    rc.previous_honest = previous_honest_ ? &*previous_honest_ : nullptr;
    DenseOperator sent = strategy_.respond(rc);
    Message msg = wire::matrix(rc.round, sent);
    previous_sent_ = std::move(sent);
    previous_honest_ = std::move(honest);
    return msg;
  }

  ProtocolParams params_;
  PrecisionContext ctx_;
  AngleGrid grid_;
  HonestEngine engine_;
  ProverStrategy& strategy_;
  std::optional<FixedComplex> claim_;
  std::optional<DenseOperator> previous_sent_;
  std::optional<DenseOperator> previous_honest_;
  bool finished_ = false;
};

// ---------------------------------------------------------------------------------------
// Sessions.

inline const char* mode_name(const ProtocolParams& p) {
  return p.profile == Profile::fine_grid ? "W" : "W-hat";
}

struct SessionResult {
  Transcript transcript;
  Verdict verdict;
  FixedComplex claim;
  std::string claim_source;
  FixedComplex true_trace;
  std::vector<RoundRecord> verifier_log;
  std::vector<LocalUnitaryDescriptor> history;
  std::size_t verifier_peak_dimension = 0;
  std::vector<FixedComplex> deltas;
};

inline json session_header(const ProtocolParams& params, std::uint64_t seed, bool verifier_claim) {
  return json{{"seed", seed},
              {"mode", mode_name(params)},
              {"profile", profile_name(params.profile)},
              {"n", params.n},
              {"T", params.T},
              {"p", params.p},
              {"xi_exponent", params.xi_exponent},
              {"mu", params.mu.get_str()},
              {"claim_source", verifier_claim ? "verifier" : "prover"}};
}

namespace detail {

// Every message crosses the same text encoding used between processes.
inline Message over_the_wire(const Message& m) {
  return Message::from_json(json::parse(m.to_json().dump()));
}

inline SessionResult collect(const Verifier& v, Transcript t, const FixedComplex& true_trace,
                             const ProverStrategy& s) {
  SessionResult r;
  r.transcript = std::move(t);
  r.verdict = *v.verdict();
  r.claim = v.claim() ? *v.claim() : FixedComplex::zero(v.params().context());
  r.claim_source = v.claim_from_verifier() ? "verifier" : "prover";
  r.true_trace = true_trace;
  r.verifier_log = v.log();
  r.history = v.history();
  r.verifier_peak_dimension = v.peak_dimension();
  r.deltas = s.deltas();
  return r;
}

}  // namespace detail

/// One session with both endpoints in this process. Deterministic given the seed.
inline SessionResult run_protocol(const Circuit& c, const ProtocolParams& params,
                                  ProverStrategy& strategy, std::uint64_t seed,
                                  std::optional<FixedComplex> verifier_claim = std::nullopt) {
  Verifier v(c, params, seed, verifier_claim);
  Prover p(c, params, strategy);
  Transcript t;
  t.seed = seed;
  t.header = session_header(params, seed, verifier_claim.has_value());

  std::vector<Message> to_prover{v.open()};
  while (!to_prover.empty()) {
    std::vector<Message> to_verifier;
    for (const auto& m : to_prover) {
      t.record(m);
      for (auto& r : p.receive(detail::over_the_wire(m))) to_verifier.push_back(std::move(r));
    }
    to_prover.clear();
    for (const auto& m : to_verifier) {
      t.record(m);
      if (v.done()) break;
      for (auto& r : v.receive(detail::over_the_wire(m))) to_prover.push_back(std::move(r));
    }
  }
  if (!v.done()) throw ConfigurationError("session ended without a verdict");
  return detail::collect(v, std::move(t), p.engine().true_trace(), strategy);
}

// ---------------------------------------------------------------------------------------
// Line-framed duplex channel over file descriptors.

class FdChannel {
 public:
  FdChannel(int read_fd, int write_fd) : in_(read_fd), out_(write_fd) {}

  void send(const Message& m) {
    const std::string line = m.to_json().dump() + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const ssize_t w = ::write(out_, line.data() + off, line.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        throw ConfigurationError("channel write failed");
      }
      off += static_cast<std::size_t>(w);
    }
  }

  /// Next message, or nullopt on end of stream.
  std::optional<Message> receive() {
    for (;;) {
      const auto nl = buf_.find('\n');
      if (nl != std::string::npos) {
        const std::string line = buf_.substr(0, nl);
        buf_.erase(0, nl + 1);
        if (line.empty()) continue;
        return Message::from_json(json::parse(line));
      }
      char chunk[65536];
      const ssize_t r = ::read(in_, chunk, sizeof chunk);
      if (r < 0) {
        if (errno == EINTR) continue;
        throw ConfigurationError("channel read failed");
      }
      if (r == 0) return std::nullopt;
      buf_.append(chunk, static_cast<std::size_t>(r));
    }
  }

 private:
  int in_;
  int out_;
  std::string buf_;
};

/// Prover loop over a channel until the verdict arrives or the stream closes.
inline void serve_prover(FdChannel& ch, const Circuit& c, const ProtocolParams& params,
                         ProverStrategy& strategy) {
  Prover p(c, params, strategy);
  while (!p.finished()) {
    auto m = ch.receive();
    if (!m) return;
    for (const auto& r : p.receive(*m)) ch.send(r);
  }
}

/// Verifier loop over a channel; records everything it sends and receives.
inline Verifier drive_verifier(FdChannel& ch, const Circuit& c, const ProtocolParams& params,
                               std::uint64_t seed, std::optional<FixedComplex> claim,
                               Transcript& t) {
  Verifier v(c, params, seed, claim);
  const Message first = v.open();
  t.record(first);
  ch.send(first);
  while (!v.done()) {
    auto m = ch.receive();
    if (!m) throw ConfigurationError("prover closed the channel before the verdict");
    t.record(*m);
    for (const auto& r : v.receive(*m)) {
      t.record(r);
      ch.send(r);
    }
  }
  return v;
}

/// Same session with the prover in a forked child process, messages over two pipes.
inline SessionResult run_protocol_two_process(const Circuit& c, const ProtocolParams& params,
                                              ProverStrategy& strategy, std::uint64_t seed,
                                              std::optional<FixedComplex> verifier_claim =
                                                  std::nullopt) {
  int v2p[2];
  int p2v[2];
  if (::pipe(v2p) != 0 || ::pipe(p2v) != 0) throw ConfigurationError("pipe failed");
  std::fflush(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) throw ConfigurationError("fork failed");
  if (pid == 0) {
    ::close(v2p[1]);
    ::close(p2v[0]);
    int status = 0;
    try {
      FdChannel ch(v2p[0], p2v[1]);
      serve_prover(ch, c, params, strategy);
    } catch (...) {
      status = 1;
    }
    ::close(v2p[0]);
    ::close(p2v[1]);
    ::_exit(status);
  }
  ::close(v2p[0]);
  ::close(p2v[1]);
  Transcript t;
  t.seed = seed;
  t.header = session_header(params, seed, verifier_claim.has_value());
  std::optional<Verifier> v;
  try {
    FdChannel ch(p2v[0], v2p[1]);
    v.emplace(drive_verifier(ch, c, params, seed, verifier_claim, t));
  } catch (...) {
    ::close(p2v[0]);
    ::close(v2p[1]);
    ::waitpid(pid, nullptr, 0);
    throw;
  }
  ::close(p2v[0]);
  ::close(v2p[1]);
  int status = 0;
  ::waitpid(pid, &status, 0);
  HonestEngine reference(c, params.context());
  return detail::collect(*v, std::move(t), reference.true_trace(), strategy);
}

}  // namespace qsc

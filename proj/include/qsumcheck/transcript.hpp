#pragma once

// Wire records exchanged by verifier and prover, and the transcript that collects them.
//
// One JSON object per line:
//   {"round":i,"from":"V"|"P","kind":"claim"|"matrix"|"unitary"|"verdict","payload":...,"bits":b}
// A transcript file starts with a header line {"header":{...}} holding the seed and parameters.

#include <gmpxx.h>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsumcheck/errors.hpp"
#include "qsumcheck/linalg.hpp"
#include "qsumcheck/params.hpp"
#include "qsumcheck/precision.hpp"
#include "qsumcheck/sampling.hpp"

namespace qsc {

using json = nlohmann::ordered_json;

enum class Sender { verifier, prover };
enum class MessageKind { claim, matrix, unitary, verdict };

inline const char* sender_code(Sender s) { return s == Sender::verifier ? "V" : "P"; }

inline const char* kind_name(MessageKind k) {
  switch (k) {
    case MessageKind::claim: return "claim";
    case MessageKind::matrix: return "matrix";
    case MessageKind::unitary: return "unitary";
    case MessageKind::verdict: return "verdict";
  }
  return "?";
}

struct Message {
  int round = 0;
  Sender from = Sender::verifier;
  MessageKind kind = MessageKind::claim;
  json payload;
  std::uint64_t bits = 0;

  json to_json() const {
    return json{{"round", round},
                {"from", sender_code(from)},
                {"kind", kind_name(kind)},
                {"payload", payload},
                {"bits", bits}};
  }

  static Message from_json(const json& j) {
    Message m;
    try {
      m.round = j.at("round").get<int>();
      const auto from = j.at("from").get<std::string>();
      if (from == "V") {
        m.from = Sender::verifier;
      } else if (from == "P") {
        m.from = Sender::prover;
      } else {
        throw InputError("unknown sender '" + from + "'");
      }
      const auto kind = j.at("kind").get<std::string>();
      if (kind == "claim") {
        m.kind = MessageKind::claim;
      } else if (kind == "matrix") {
        m.kind = MessageKind::matrix;
      } else if (kind == "unitary") {
        m.kind = MessageKind::unitary;
      } else if (kind == "verdict") {
        m.kind = MessageKind::verdict;
      } else {
        throw InputError("unknown message kind '" + kind + "'");
      }
      m.payload = j.at("payload");
      m.bits = j.at("bits").get<std::uint64_t>();
    } catch (const json::exception& e) {
      throw InputError(std::string("malformed message: ") + e.what());
    }
    return m;
  }

  friend bool operator==(const Message& a, const Message& b) {
    return a.round == b.round && a.from == b.from && a.kind == b.kind && a.payload == b.payload &&
           a.bits == b.bits;
  }
};

namespace wire {

/// Bits to carry a signed mantissa: its magnitude plus a sign bit.
inline std::uint64_t signed_bits(const mpz_class& m) { return detail::bit_length(m) + 1; }

inline std::uint64_t unsigned_bits(const mpz_class& m) {
  return std::max<std::uint64_t>(1, detail::bit_length(m));
}

inline mpz_class parse_integer(const json& j) {
  if (!j.is_string()) throw InputError("expected a decimal integer string");
  const auto s = j.get<std::string>();
  mpz_class v;
  if (s.empty() || v.set_str(s, 10) != 0) throw InputError("bad decimal integer '" + s + "'");
  return v;
}

inline json complex_json(const FixedComplex& z) {
  return json::array({z.re().mantissa_string(), z.im().mantissa_string()});
}

inline FixedComplex parse_complex(const json& j, const PrecisionContext& ctx) {
  if (!j.is_array() || j.size() != 2) throw InputError("complex entry must be [re, im]");
  return {FixedReal::from_mantissa(parse_integer(j[0]), ctx),
          FixedReal::from_mantissa(parse_integer(j[1]), ctx)};
}

inline Message claim_request(int round = 0) {
  return {round, Sender::verifier, MessageKind::claim, json{{"source", "prover"}}, 1};
}

inline Message claim(Sender from, const FixedComplex& value) {
  json payload{{"source", from == Sender::verifier ? "verifier" : "prover"},
               {"value", complex_json(value)},
               {"p", value.precision()}};
  return {0, from, MessageKind::claim, payload,
          signed_bits(value.re().mantissa()) + signed_bits(value.im().mantissa())};
}

inline Message matrix(int round, const DenseOperator& m) {
  json entries = json::array();
  std::uint64_t bits = 0;
  for (const auto& e : m.entries()) {
    entries.push_back(complex_json(e));
    bits += signed_bits(e.re().mantissa()) + signed_bits(e.im().mantissa());
  }
  json payload{{"qubits", m.qubits()}, {"p", m(0, 0).precision()}, {"entries", entries}};
  return {round, Sender::prover, MessageKind::matrix, payload, bits};
}

inline DenseOperator parse_matrix(const json& payload, const PrecisionContext& ctx) {
  try {
    if (payload.at("p").get<int>() != ctx.p) throw InputError("matrix precision mismatch");
    const auto qubits = payload.at("qubits").get<QubitSet>();
    if (qubits.size() > 3) throw InputError("matrix acts on too many qubits");
    const auto& entries = payload.at("entries");
    if (!entries.is_array()) throw InputError("entries must be an array");
    std::vector<FixedComplex> values;
    values.reserve(entries.size());
    for (const auto& e : entries) values.push_back(parse_complex(e, ctx));
    return DenseOperator(qubits, std::move(values));
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed matrix: ") + e.what());
  } catch (const ConfigurationError& e) {
    throw InputError(std::string("matrix entry out of range: ") + e.what());
  }
}

inline Message unitary(int round, const LocalUnitaryDescriptor& d, int xi_exponent, int p) {
  json indices = json::array();
  std::uint64_t bits = 0;
  for (const auto& t : d.triples) {
    for (const mpz_class* v : {&t.theta, &t.phi1, &t.phi2}) {
      indices.push_back(v->get_str(10));
      bits += unsigned_bits(*v);
    }
  }
  json payload{{"targets", d.targets},
               {"grid", json{{"exponent", xi_exponent}}},
               {"indices", indices},
               {"p", p}};
  return {round, Sender::verifier, MessageKind::unitary, payload, bits};
}

inline LocalUnitaryDescriptor parse_unitary(const json& payload) {
  try {
    LocalUnitaryDescriptor d;
    d.targets = payload.at("targets").get<QubitSet>();
    const auto& idx = payload.at("indices");
    if (!idx.is_array() || idx.size() != 9 || d.targets.size() != 3) {
      throw InputError("unitary descriptor needs 3 targets and 9 indices");
    }
    for (int j = 0; j < 3; ++j) {
      d.triples[j].theta = parse_integer(idx[3 * j]);
      d.triples[j].phi1 = parse_integer(idx[3 * j + 1]);
      d.triples[j].phi2 = parse_integer(idx[3 * j + 2]);
    }
    return d;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed unitary: ") + e.what());
  }
}

inline Message verdict(int round, bool accepted, const std::string& reason) {
  return {round, Sender::verifier, MessageKind::verdict,
          json{{"result", accepted ? "accept" : "reject"}, {"round", round}, {"reason", reason}},
          1};
}

}  // namespace wire

struct Verdict {
  bool accepted = false;
  int round = 0;
  std::string reason;
};

struct Transcript {
  std::uint64_t seed = 0;
  json header;
  std::vector<Message> messages;

  void record(const Message& m) { messages.push_back(m); }

  std::optional<Verdict> verdict() const {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
      if (it->kind == MessageKind::verdict) {
        return Verdict{it->payload.at("result") == "accept", it->payload.at("round").get<int>(),
                       it->payload.at("reason").get<std::string>()};
      }
    }
    return std::nullopt;
  }

  std::uint64_t total_bits() const {
    std::uint64_t s = 0;
    for (const auto& m : messages) s += m.bits;
    return s;
  }

  std::string to_jsonl() const {
    std::string out = json{{"header", header}}.dump() + "\n";
    for (const auto& m : messages) out += m.to_json().dump() + "\n";
    return out;
  }

  static Transcript from_jsonl(const std::string& text) {
    Transcript t;
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string::npos) end = text.size();
      const std::string line = text.substr(pos, end - pos);
      pos = end + 1;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw InputError(std::string("bad transcript line: ") + e.what());
      }
      if (first && j.contains("header")) {
        t.header = j["header"];
        if (t.header.contains("seed")) t.seed = t.header["seed"].get<std::uint64_t>();
      } else {
        t.messages.push_back(Message::from_json(j));
      }
      first = false;
    }
    return t;
  }
};

struct CommReport {
  std::uint64_t total = 0;
  std::uint64_t verifier_bits = 0;
  std::uint64_t prover_bits = 0;
  std::map<int, std::uint64_t> per_round;
  mpz_class cap;
  bool within_cap = false;
  bool unitary_messages_well_formed = true;
  bool verdict_final_and_unique = false;

  json to_json() const {
    json rounds = json::object();
    for (const auto& [r, b] : per_round) rounds[std::to_string(r)] = b;
    return json{{"total_bits", total},
                {"verifier_bits", verifier_bits},
                {"prover_bits", prover_bits},
                {"per_round", rounds},
                {"cap", cap.get_str()},
                {"within_cap", within_cap},
                {"unitary_messages_well_formed", unitary_messages_well_formed},
                {"verdict_final_and_unique", verdict_final_and_unique}};
  }
};

inline CommReport comm_accounting(const Transcript& t, const ProtocolParams& params) {
  CommReport r;
  int verdicts = 0;
  for (const auto& m : t.messages) {
    r.total += m.bits;
    (m.from == Sender::verifier ? r.verifier_bits : r.prover_bits) += m.bits;
    r.per_round[m.round] += m.bits;
    if (m.kind == MessageKind::unitary) {
      const auto& idx = m.payload.value("indices", json::array());
      if (!idx.is_array() || idx.size() != 9) r.unitary_messages_well_formed = false;
    }
    if (m.kind == MessageKind::verdict) ++verdicts;
  }
  r.verdict_final_and_unique =
      verdicts == 1 && !t.messages.empty() && t.messages.back().kind == MessageKind::verdict;
  r.cap = params.bit_cap();
  r.within_cap = mpz_class(static_cast<unsigned long>(r.total)) <= r.cap;
  return r;
}

}  // namespace qsc

#pragma once

// Randomized invariant suite for the operator layer: reduction commutes with a local factor,
// partial traces keep the trace, kron multiplies traces, cyclicity, and trace-vs-Frobenius
// bounds. Every failure is counted; nothing is skipped.

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "qsumcheck/linalg.hpp"
#include "qsumcheck/params.hpp"
#include "qsumcheck/precision.hpp"
#include "qsumcheck/rng.hpp"
#include "qsumcheck/sampling.hpp"

namespace qsc {

struct PropertyTally {
  std::string name;
  std::string statement;
  int instances = 0;
  int failures = 0;
};

struct SelftestResult {
  int p = 0;
  std::vector<PropertyTally> properties;
  /// |tr I_2| = 2 > sqrt(2) = ||I_2||_F: the plain trace-vs-Frobenius bound needs rank one.
  bool identity_counterexample_holds = false;

  int instances() const {
    int s = 0;
    for (const auto& t : properties) s += t.instances;
    return s;
  }
  int failures() const {
    int s = 0;
    for (const auto& t : properties) s += t.failures;
    return s;
  }

  nlohmann::ordered_json to_json() const {
    auto j = nlohmann::ordered_json{{"p", p},
                                    {"instances", instances()},
                                    {"failures", failures()},
                                    {"identity_counterexample", identity_counterexample_holds}};
    j["properties"] = nlohmann::ordered_json::array();
    for (const auto& t : properties) {
      j["properties"].push_back({{"name", t.name},
                                 {"statement", t.statement},
                                 {"instances", t.instances},
                                 {"failures", t.failures}});
    }
    return j;
  }
};

/// Entries uniform on the 2^-p grid inside the unit square.
inline DenseOperator random_matrix(Rng& rng, const QubitSet& labels, const PrecisionContext& ctx) {
  const std::size_t d = std::size_t{1} << labels.size();
  mpz_class span(1);
  span <<= static_cast<unsigned long>(ctx.p + 1);
  const mpz_class half = span >> 1;
  auto draw = [&] {
    return FixedReal::from_mantissa(mpz_class(rng.below(span + 1) - half), ctx);
  };
  std::vector<FixedComplex> e;
  e.reserve(d * d);
  for (std::size_t i = 0; i < d * d; ++i) {
    FixedReal re = draw();
    FixedReal im = draw();
    e.emplace_back(std::move(re), std::move(im));
  }
  return DenseOperator(labels, std::move(e));
}

inline std::vector<FixedComplex> random_vector(Rng& rng, int n, const PrecisionContext& ctx) {
  // The first row of a random matrix on n qubits has 2^n entries.
  const DenseOperator m = random_matrix(rng, register_labels(n), ctx);
  const auto len = static_cast<std::ptrdiff_t>(m.dim());
  return {m.entries().begin(), m.entries().begin() + len};
}

/// Random nonempty subset of 1..n with at most `max_size` labels, in random order.
inline QubitSet random_subset(Rng& rng, int n, int max_size) {
  QubitSet all = register_labels(n);
  for (std::size_t i = all.size(); i > 1; --i) std::swap(all[i - 1], all[rng.below(i)]);
  const int k = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(n, max_size))));
  all.resize(static_cast<std::size_t>(k));
  return all;
}

inline SelftestResult run_selftest(std::uint64_t seed, int per_property = 200, int p = 128) {
  SelftestResult res;
  res.p = p;
  const PrecisionContext ctx(p);
  const mpq_class ulp = pow2q(-p);
  std::uint64_t stream = 0;
  auto tally = [&](const std::string& name, const std::string& statement, auto&& body) {
    PropertyTally t{name, statement, 0, 0};
    for (int k = 0; k < per_property; ++k) {
      Rng rng = Rng::for_trial(seed, stream++);
      ++t.instances;
      if (!body(rng)) ++t.failures;
    }
    res.properties.push_back(t);
  };
  auto entrywise_close = [](const DenseOperator& a, const DenseOperator& b, const mpq_class& tol) {
    for (std::size_t i = 0; i < a.entries().size(); ++i) {
      if (!(a.entries()[i] - b.entries()[i]).modulus_le(tol)) return false;
    }
    return true;
  };

  tally("local factor commutes with reduction",
        "(U (q x I))|_Q = U|_Q q entrywise within 2^(-p+8)", [&](Rng& rng) {
          const int n = 2 + static_cast<int>(rng.below(4));
          const QubitSet Q = random_subset(rng, n, 3);
          const DenseOperator U = random_matrix(rng, register_labels(n), ctx);
          const DenseOperator q = random_matrix(rng, Q, ctx);
          const DenseOperator lhs = partial_trace(matmul(U, embed(q, register_labels(n))), Q);
          const DenseOperator rhs = matmul(partial_trace(U, Q), q);
          return entrywise_close(lhs, rhs, ulp * 256);
        });

  tally("partial trace keeps the trace", "tr(B|_S) = tr(B) exactly", [&](Rng& rng) {
    const int n = 1 + static_cast<int>(rng.below(5));
    const DenseOperator B = random_matrix(rng, register_labels(n), ctx);
    const QubitSet keep = random_subset(rng, n, n);
    return trace(partial_trace(B, keep)) == trace(B);
  });

  tally("kron multiplies traces", "tr(a x b) = tr(a) tr(b) within (dim+2) ulps", [&](Rng& rng) {
    const int ka = 1 + static_cast<int>(rng.below(3));
    const int kb = 1 + static_cast<int>(rng.below(3));
    QubitSet la = register_labels(ka);
    QubitSet lb;
    for (int j = 1; j <= kb; ++j) lb.push_back(ka + j);
    const DenseOperator a = random_matrix(rng, la, ctx);
    const DenseOperator b = random_matrix(rng, lb, ctx);
    const FixedComplex lhs = trace(kron(a, b));
    const FixedComplex rhs = trace(a) * trace(b);
    return (lhs - rhs).modulus_le(ulp * static_cast<long>((a.dim() * b.dim()) + 2));
  });

  tally("trace cyclicity", "tr(AB) = tr(BA) on 8x8 within 2^(-p+8)", [&](Rng& rng) {
    const DenseOperator A = random_matrix(rng, register_labels(3), ctx);
    const DenseOperator B = random_matrix(rng, register_labels(3), ctx);
    return (trace_of_product(A, B) - trace_of_product(B, A)).modulus_le(ulp * 256);
  });

  tally("rank-one trace bound", "|tr(|psi><phi|)| <= ||.||_F + 2^(-p+4) dim", [&](Rng& rng) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const auto psi = random_vector(rng, n, ctx);
    const auto phi = random_vector(rng, n, ctx);
    const DenseOperator B = outer(psi, phi, n);
    const mpq_class bound = frobenius_norm(B).to_rational() + ulp + ulp * 16 * static_cast<long>(B.dim());
    return trace(B).modulus_le(bound);
  });

  tally("trace bound with dimension factor", "|tr B|^2 <= dim ||B||_F^2 exactly",
        [&](Rng& rng) {
          const int n = 1 + static_cast<int>(rng.below(4));
          const DenseOperator B = random_matrix(rng, register_labels(n), ctx);
          // |tr B|^2 <= dim ||B||_F^2, compared exactly at the 2^-2p scale.
          const mpz_class lhs = trace(B).norm2_wide();
          const mpz_class rhs = frobenius_norm2_wide(B) * static_cast<unsigned long>(B.dim());
          return lhs <= rhs;
        });

  tally("Frobenius norm is unitarily invariant", "||u B||_F = ||B||_F within 2^(-p+8) dim",
        [&](Rng& rng) {
          const AngleGrid grid = AngleGrid::dyadic(p - 4);
          const DenseOperator u = realize_local(
              sample_local_unitary(rng, register_labels(3), grid), grid, ctx);
          const DenseOperator B = random_matrix(rng, register_labels(3), ctx);
          const FixedReal a = frobenius_norm(matmul(u, B));
          const FixedReal b = frobenius_norm(B);
          const mpq_class diff = a.to_rational() - b.to_rational();
          return abs(diff) <= ulp * 256 * static_cast<long>(B.dim());
        });

  const DenseOperator id = DenseOperator::identity(register_labels(1), FixedComplex::zero(ctx));
  res.identity_counterexample_holds = !trace(id).modulus_le(frobenius_norm(id).to_rational() + ulp);
  return res;
}

}  // namespace qsc

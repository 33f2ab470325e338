#pragma once

// Single-qubit unitaries drawn through three uniform grid angles, their truncated
// realizations, and three-fold tensor draws on canonical targets.

#include <gmpxx.h>

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "qsumcheck/errors.hpp"
#include "qsumcheck/linalg.hpp"
#include "qsumcheck/precision.hpp"
#include "qsumcheck/rng.hpp"

namespace qsc {

/// Grid indices of (theta, phi1, phi2); each angle is index times the grid spacing.
struct AngleTriple {
  mpz_class theta{0};
  mpz_class phi1{0};
  mpz_class phi2{0};

  friend bool operator==(const AngleTriple& a, const AngleTriple& b) {
    return a.theta == b.theta && a.phi1 == b.phi1 && a.phi2 == b.phi2;
  }
};

struct LocalUnitaryDescriptor {
  std::array<AngleTriple, 3> triples;
  QubitSet targets;

  friend bool operator==(const LocalUnitaryDescriptor& a, const LocalUnitaryDescriptor& b) {
    return a.triples == b.triples && a.targets == b.targets;
  }
};

inline AngleTriple sample_angles(Rng& rng, const AngleGrid& grid) {
  AngleTriple t;
  t.theta = rng.below(grid.count());
  t.phi1 = rng.below(grid.count());
  t.phi2 = rng.below(grid.count());
  return t;
}

inline LocalUnitaryDescriptor sample_local_unitary(Rng& rng, QubitSet targets,
                                                   const AngleGrid& grid) {
  if (targets.size() != 3) throw InputError("local unitaries act on exactly 3 qubits");
  detail::check_labels(targets);
  LocalUnitaryDescriptor d;
  for (auto& t : d.triples) t = sample_angles(rng, grid);
  d.targets = std::move(targets);
  return d;
}

namespace detail {

// Product of two wide trig values, returned as an approximation at `bits`.
inline ApproxReal wide_product(const mpz_class& a, const mpz_class& b, int bits,
                               const mpz_class& err) {
  ApproxReal r;
  r.mantissa = shift_toward_zero(a * b, static_cast<unsigned long>(bits));
  r.bits = bits;
  // |a|, |b| <= 1 + small: error <= e_a + e_b + e_a e_b 2^-bits + 1 for the shift.
  r.error_ulps = 2 * err + 2;
  return r;
}

}  // namespace detail

/// Entries u00, u01, u10, u11 of the truncated unitary, each component within 2^-p of
///   [ cos t e^{i f1}    sin t e^{i f2} ]
///   [ -sin t e^{-i f2}  cos t e^{-i f1} ].
inline std::array<FixedComplex, 4> realize_entries(const AngleTriple& t, const AngleGrid& grid,
                                                   const PrecisionContext& ctx) {
  const int w = ctx.working_bits();
  const WideTrig th = trig_wide({grid, t.theta}, w);
  const WideTrig f1 = trig_wide({grid, t.phi1}, w);
  const WideTrig f2 = trig_wide({grid, t.phi2}, w);
  mpz_class err = th.error_ulps;
  if (f1.error_ulps > err) err = f1.error_ulps;
  if (f2.error_ulps > err) err = f2.error_ulps;

  auto tr = [&](const mpz_class& a, const mpz_class& b) {
    return truncate(detail::wide_product(a, b, w, err), ctx);
  };
  const FixedComplex u00(tr(th.cos, f1.cos), tr(th.cos, f1.sin));
  const FixedComplex u01(tr(th.sin, f2.cos), tr(th.sin, f2.sin));
  // Truncation toward zero commutes with negation.
  return {u00, u01, -u01.conj(), u00.conj()};
}

inline DenseOperator realize_unitary(const AngleTriple& t, const AngleGrid& grid, int label,
                                     const PrecisionContext& ctx) {
  auto e = realize_entries(t, grid, ctx);
  return DenseOperator({label}, {e[0], e[1], e[2], e[3]});
}

/// u^1 (x) u^2 (x) u^3 on the descriptor's targets (first target most significant). Each
/// entry is a triple product formed exactly and truncated once.
inline DenseOperator realize_local(const LocalUnitaryDescriptor& d, const AngleGrid& grid,
                                   const PrecisionContext& ctx) {
  std::array<std::array<FixedComplex, 4>, 3> f;
  for (int j = 0; j < 3; ++j) f[j] = realize_entries(d.triples[j], grid, ctx);
  const auto p = static_cast<unsigned long>(ctx.p);
  std::vector<FixedComplex> out;
  out.reserve(64);
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 8; ++c) {
      const auto& a = f[0][((r >> 2) & 1) * 2 + ((c >> 2) & 1)];
      const auto& b = f[1][((r >> 1) & 1) * 2 + ((c >> 1) & 1)];
      const auto& e = f[2][(r & 1) * 2 + (c & 1)];
      // (a b) exact at 2^-2p, then times e exact at 2^-3p.
      const mpz_class abr = a.re().mantissa() * b.re().mantissa() - a.im().mantissa() * b.im().mantissa();
      const mpz_class abi = a.re().mantissa() * b.im().mantissa() + a.im().mantissa() * b.re().mantissa();
      const mpz_class re = abr * e.re().mantissa() - abi * e.im().mantissa();
      const mpz_class im = abr * e.im().mantissa() + abi * e.re().mantissa();
      out.emplace_back(FixedReal(detail::shift_toward_zero(re, 2 * p), ctx.p, ctx.max_integer_bits),
                       FixedReal(detail::shift_toward_zero(im, 2 * p), ctx.p, ctx.max_integer_bits));
    }
  }
  return DenseOperator(d.targets, std::move(out));
}

}  // namespace qsc

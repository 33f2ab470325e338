#pragma once

// Protocol parameters: acceptance gap K, tolerance mu, grid spacing xi, working precision p.

#include <gmpxx.h>

#include <sstream>
#include <string>

#include "qsumcheck/errors.hpp"
#include "qsumcheck/precision.hpp"

namespace qsc {

inline constexpr int kDefaultMaxPrecision = 16384;
inline constexpr int kFineGridExponent = 252;

enum class Profile {
  /// K, chi, mu, xi exactly as the protocol's soundness analysis requires.
  paper_exact,
  /// Caller-chosen mu and xi; experimental.
  relaxed,
  /// Near-continuous angles (xi = 2^-252) with a tolerance just above rounding noise.
  fine_grid,
};

inline const char* profile_name(Profile p) {
  switch (p) {
    case Profile::paper_exact: return "paper-exact";
    case Profile::relaxed: return "relaxed (experimental)";
    case Profile::fine_grid: return "fine-grid";
  }
  return "?";
}

/// Smallest s with 2^s >= q, for rational q > 0.
inline int ceil_log2(const mpq_class& q) {
  if (sgn(q) <= 0) throw InputError("log of a nonpositive value");
  const mpz_class& num = q.get_num();
  const mpz_class& den = q.get_den();
  long s = static_cast<long>(mpz_sizeinbase(num.get_mpz_t(), 2)) -
           static_cast<long>(mpz_sizeinbase(den.get_mpz_t(), 2)) - 1;
  auto fits = [&](long e) {
    // 2^e * den >= num
    if (e >= 0) {
      mpz_class lhs = den;
      lhs <<= static_cast<unsigned long>(e);
      return lhs >= num;
    }
    mpz_class rhs = num;
    rhs <<= static_cast<unsigned long>(-e);
    return den >= rhs;
  };
  while (!fits(s)) ++s;
  while (fits(s - 1)) --s;
  return static_cast<int>(s);
}

inline mpq_class pow2q(long e) {
  mpz_class one(1);
  if (e >= 0) {
    one <<= static_cast<unsigned long>(e);
    return mpq_class(one);
  }
  one <<= static_cast<unsigned long>(-e);
  return mpq_class(mpz_class(1), one);
}

/// log2 of a positive rational as a double (report use).
inline double log2q(const mpq_class& q) {
  long en = 0;
  long ed = 0;
  const double dn = mpz_get_d_2exp(&en, q.get_num().get_mpz_t());
  const double dd = mpz_get_d_2exp(&ed, q.get_den().get_mpz_t());
  return std::log2(dn / dd) + static_cast<double>(en - ed);
}

struct ProtocolParams {
  int n = 0;
  int T = 0;
  int n_prime = 3;
  Profile profile = Profile::paper_exact;
  mpq_class K;
  mpz_class chi;
  mpq_class mu;
  /// mu / (2^(2n+11) T) before snapping.
  mpq_class xi_target;
  /// Grid spacing and entry accuracy, 2^-xi_exponent.
  int xi_exponent = 0;
  mpq_class xi;
  int m = 0;
  int p = 0;

  PrecisionContext context() const { return PrecisionContext(p); }
  AngleGrid grid() const { return AngleGrid::dyadic(xi_exponent); }

  /// Entries of M'_i may not exceed this modulus.
  mpq_class entry_bound() const { return pow2q(n); }

  mpq_class honest_slack_bound() const { return pow2q(n + 10) * (T + 1) * xi; }
  mpq_class honest_match_bound() const { return pow2q(n) * T * xi; }
  mpq_class sent_matrix_bound() const { return pow2q(2 * n_prime + n) * T * xi; }
  mpq_class unitary_realization_bound() const { return pow2q(1 + 3 * n_prime + n) * xi; }
  mpq_class factored_trace_bound() const { return pow2q(n) * T * xi; }
  mpq_class soundness_threshold(int round) const {
    mpz_class c = 1;
    mpz_pow_ui(c.get_mpz_t(), chi.get_mpz_t(), static_cast<unsigned long>(round));
    return K / (4 * mpq_class(c));
  }

  /// Closed-form cap on transcript bits.
  mpz_class bit_cap() const {
    mpz_class per_round = mpz_class(64) * 2 * p * 64 + mpz_class(9) * (p + 8);
    return per_round * (T + 1) + 1024;
  }

  std::string report() const;
};

namespace detail {

inline void finish_params(ProtocolParams& pp, int max_p) {
  pp.m = 60 * pp.T;
  pp.xi = pow2q(-pp.xi_exponent);
  pp.p = pp.xi_exponent + 4;
  if (pp.p > max_p) throw ParameterRefusal(pp.p, max_p);
}

inline void check_shape(int n, int T) {
  if (n < 3) throw InputError("protocol needs n >= 3 qubits");
  if (T < 1) throw InputError("protocol needs T >= 1 gates");
}

inline mpz_class chi_for(int T) {
  mpz_class a;
  mpz_class b;
  mpz_ui_pow_ui(a.get_mpz_t(), 60, 12);
  mpz_ui_pow_ui(b.get_mpz_t(), static_cast<unsigned long>(T), 9);
  return a * b;
}

}  // namespace detail

inline ProtocolParams derive_params(int n, int T, int max_p = kDefaultMaxPrecision) {
  detail::check_shape(n, T);
  ProtocolParams pp;
  pp.n = n;
  pp.T = T;
  pp.profile = Profile::paper_exact;
  pp.K = mpq_class(1, 10) * pow2q(-n);
  pp.K.canonicalize();
  pp.chi = detail::chi_for(T);
  mpz_class chi_t;
  mpz_pow_ui(chi_t.get_mpz_t(), pp.chi.get_mpz_t(), static_cast<unsigned long>(T));
  pp.mu = pp.K / (4 * mpq_class(chi_t));
  pp.mu.canonicalize();
  pp.xi_target = pp.mu / (pow2q(2 * n + 11) * T);
  pp.xi_target.canonicalize();
  pp.xi_exponent = ceil_log2(1 / pp.xi_target);
  detail::finish_params(pp, max_p);
  return pp;
}

/// Experimental profile: mu = 2^-mu_bits, xi = 2^-xi_exponent.
inline ProtocolParams relaxed_params(int n, int T, int mu_bits, int xi_exponent,
                                     int max_p = kDefaultMaxPrecision) {
  detail::check_shape(n, T);
  if (xi_exponent < 1) throw InputError("grid exponent must be positive");
  ProtocolParams pp;
  pp.n = n;
  pp.T = T;
  pp.profile = Profile::relaxed;
  pp.K = mpq_class(1, 10) * pow2q(-n);
  pp.K.canonicalize();
  pp.chi = detail::chi_for(T);
  pp.mu = pow2q(-mu_bits);
  pp.xi_target = pp.mu / (pow2q(2 * n + 11) * T);
  pp.xi_target.canonicalize();
  pp.xi_exponent = xi_exponent;
  detail::finish_params(pp, max_p);
  return pp;
}

/// Stand-in for the continuous-angle protocol: angles on a 2^-252 grid, p = 256, and a
/// tolerance of 2^(2n+11) T xi, the smallest one the honest error chain clears.
inline ProtocolParams fine_grid_params(int n, int T, int max_p = kDefaultMaxPrecision) {
  detail::check_shape(n, T);
  ProtocolParams pp;
  pp.n = n;
  pp.T = T;
  pp.profile = Profile::fine_grid;
  pp.K = mpq_class(1, 10) * pow2q(-n);
  pp.K.canonicalize();
  pp.chi = detail::chi_for(T);
  pp.xi_exponent = kFineGridExponent;
  pp.mu = pow2q(2 * n + 11 - kFineGridExponent) * T;
  pp.xi_target = pow2q(-kFineGridExponent);
  detail::finish_params(pp, max_p);
  return pp;
}

inline std::string ProtocolParams::report() const {
  std::ostringstream o;
  o << "profile        " << profile_name(profile) << "\n";
  o << "n              " << n << "\n";
  o << "T              " << T << "\n";
  o << "n'             " << n_prime << "\n";
  o << "K              " << K.get_str() << "\n";
  o << "chi            " << chi.get_str() << "  (" << mpz_sizeinbase(chi.get_mpz_t(), 2)
    << " bits)\n";
  o << "log2(1/mu)     " << log2q(1 / mu) << "\n";
  o << "log2(1/xi_tgt) " << log2q(1 / xi_target) << "\n";
  o << "xi             2^-" << xi_exponent << "\n";
  o << "m              " << m << "\n";
  o << "p (bits)       " << p << "\n";
  o << "bit cap        " << bit_cap().get_str() << "\n";
  return o.str();
}

}  // namespace qsc

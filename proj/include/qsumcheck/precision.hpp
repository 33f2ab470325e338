#pragma once

// Dyadic fixed-point reals and complexes on a 2^-p grid, backed by GMP integers.
//
// Every value is mantissa * 2^-p. Addition and subtraction are exact; products
// are truncated toward zero back onto the grid. Trigonometric values of grid
// angles are computed by argument reduction plus a Taylor series at p + guard
// bits and then truncated, so each returned component is within 2^-p of the
// exact value.

#include <gmpxx.h>

#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <utility>

#include "qsumcheck/errors.hpp"

namespace qsc {

inline constexpr int kDefaultGuardBits = 32;
inline constexpr int kDefaultIntegerBits = 4096;

struct PrecisionContext {
  int p = 64;
  int guard = kDefaultGuardBits;
  /// Largest allowed integer part, in bits. Mantissas beyond p + this are fatal.
  int max_integer_bits = kDefaultIntegerBits;

  PrecisionContext() = default;
  explicit PrecisionContext(int bits, int guard_bits = kDefaultGuardBits,
                            int integer_bits = kDefaultIntegerBits)
      : p(bits), guard(guard_bits), max_integer_bits(integer_bits) {
    if (p < 1) throw InputError("precision must be at least one bit");
    if (guard < 32) throw InputError("guard must be at least 32 bits");
    if (max_integer_bits < 1) throw InputError("integer budget must be positive");
  }

  int working_bits() const noexcept { return p + guard; }
  friend bool operator==(const PrecisionContext&, const PrecisionContext&) = default;
};

namespace detail {

inline std::size_t bit_length(const mpz_class& m) {
  return mpz_sgn(m.get_mpz_t()) == 0 ? 0 : mpz_sizeinbase(m.get_mpz_t(), 2);
}

inline void check_budget(const mpz_class& m, int p, int integer_bits) {
  if (bit_length(m) > static_cast<std::size_t>(p) + static_cast<std::size_t>(integer_bits)) {
    throw ConfigurationError("fixed-point mantissa overflow: " + std::to_string(bit_length(m)) +
                             " bits exceeds p + integer budget = " +
                             std::to_string(p + integer_bits));
  }
}

/// Truncates m / 2^k toward zero.
inline mpz_class shift_toward_zero(const mpz_class& m, unsigned long k) {
  mpz_class r;
  mpz_tdiv_q_2exp(r.get_mpz_t(), m.get_mpz_t(), k);
  return r;
}

}  // namespace detail

class FixedReal {
 public:
  FixedReal() = default;
  FixedReal(mpz_class mantissa, int p, int integer_bits = kDefaultIntegerBits)
      : m_(std::move(mantissa)), p_(p), ib_(integer_bits) {
    detail::check_budget(m_, p_, ib_);
  }

  static FixedReal zero(const PrecisionContext& ctx) {
    return FixedReal(mpz_class(0), ctx.p, ctx.max_integer_bits);
  }
  static FixedReal from_int(long v, const PrecisionContext& ctx) {
    mpz_class m(v);
    m <<= ctx.p;
    return FixedReal(std::move(m), ctx.p, ctx.max_integer_bits);
  }
  static FixedReal from_mantissa(mpz_class m, const PrecisionContext& ctx) {
    return FixedReal(std::move(m), ctx.p, ctx.max_integer_bits);
  }

  const mpz_class& mantissa() const noexcept { return m_; }
  int precision() const noexcept { return p_; }
  int integer_bits() const noexcept { return ib_; }
  PrecisionContext context() const { return PrecisionContext(p_, kDefaultGuardBits, ib_); }

  bool is_zero() const { return mpz_sgn(m_.get_mpz_t()) == 0; }
  int sign() const { return mpz_sgn(m_.get_mpz_t()); }

  FixedReal operator-() const { return FixedReal(mpz_class(-m_), p_, ib_); }
  FixedReal abs() const { return FixedReal(mpz_class(::abs(m_)), p_, ib_); }

  FixedReal& operator+=(const FixedReal& o) {
    same_grid(o);
    m_ += o.m_;
    detail::check_budget(m_, p_, ib_);
    return *this;
  }
  FixedReal& operator-=(const FixedReal& o) {
    same_grid(o);
    m_ -= o.m_;
    detail::check_budget(m_, p_, ib_);
    return *this;
  }
  friend FixedReal operator+(FixedReal a, const FixedReal& b) { return a += b; }
  friend FixedReal operator-(FixedReal a, const FixedReal& b) { return a -= b; }

  friend FixedReal operator*(const FixedReal& a, const FixedReal& b) {
    a.same_grid(b);
    mpz_class prod = a.m_ * b.m_;
    return FixedReal(detail::shift_toward_zero(prod, static_cast<unsigned long>(a.p_)), a.p_,
                     a.ib_);
  }
  friend FixedReal operator*(const FixedReal& a, long k) {
    return FixedReal(mpz_class(a.m_ * k), a.p_, a.ib_);
  }

  /// Exact division by 2^k, truncated toward zero.
  FixedReal shifted_down(unsigned k) const {
    return FixedReal(detail::shift_toward_zero(m_, k), p_, ib_);
  }

  /// Moves the value onto a 2^-new_p grid; exact when refining, toward zero when coarsening.
  FixedReal rescaled(int new_p) const {
    if (new_p >= p_) {
      mpz_class m = m_;
      m <<= static_cast<unsigned long>(new_p - p_);
      return FixedReal(std::move(m), new_p, ib_);
    }
    return FixedReal(detail::shift_toward_zero(m_, static_cast<unsigned long>(p_ - new_p)),
                     new_p, ib_);
  }

  mpq_class to_rational() const {
    mpz_class den(1);
    den <<= static_cast<unsigned long>(p_);
    mpq_class q(m_, den);
    q.canonicalize();
    return q;
  }

  double to_double() const {
    // mpz_get_d_2exp keeps the leading 53 bits regardless of p.
    long exp = 0;
    double d = mpz_get_d_2exp(&exp, m_.get_mpz_t());
    return std::ldexp(d, static_cast<int>(exp) - p_);
  }

  std::string mantissa_string() const { return m_.get_str(10); }

  friend bool operator==(const FixedReal& a, const FixedReal& b) {
    return a.p_ == b.p_ && a.m_ == b.m_;
  }
  friend bool operator<(const FixedReal& a, const FixedReal& b) {
    a.same_grid(b);
    return a.m_ < b.m_;
  }
  friend bool operator<=(const FixedReal& a, const FixedReal& b) { return !(b < a); }
  friend bool operator>(const FixedReal& a, const FixedReal& b) { return b < a; }
  friend bool operator>=(const FixedReal& a, const FixedReal& b) { return !(a < b); }

 private:
  void same_grid(const FixedReal& o) const {
    if (p_ != o.p_) {
      throw InputError("fixed-point operands on different grids (p = " + std::to_string(p_) +
                       " vs " + std::to_string(o.p_) + ")");
    }
  }

  mpz_class m_{0};
  int p_ = 0;
  int ib_ = kDefaultIntegerBits;
};

class FixedComplex {
 public:
  FixedComplex() = default;
  FixedComplex(FixedReal re, FixedReal im) : re_(std::move(re)), im_(std::move(im)) {
    if (re_.precision() != im_.precision()) throw InputError("complex parts on different grids");
  }

  static FixedComplex zero(const PrecisionContext& ctx) {
    return {FixedReal::zero(ctx), FixedReal::zero(ctx)};
  }
  static FixedComplex one(const PrecisionContext& ctx) {
    return {FixedReal::from_int(1, ctx), FixedReal::zero(ctx)};
  }
  static FixedComplex from_real(FixedReal re) {
    FixedReal im(mpz_class(0), re.precision(), re.integer_bits());
    return {std::move(re), std::move(im)};
  }

  const FixedReal& re() const noexcept { return re_; }
  const FixedReal& im() const noexcept { return im_; }
  int precision() const noexcept { return re_.precision(); }
  int integer_bits() const noexcept { return re_.integer_bits(); }
  PrecisionContext context() const { return re_.context(); }
  bool is_zero() const { return re_.is_zero() && im_.is_zero(); }

  FixedComplex operator-() const { return {-re_, -im_}; }
  FixedComplex conj() const { return {re_, -im_}; }

  FixedComplex& operator+=(const FixedComplex& o) {
    re_ += o.re_;
    im_ += o.im_;
    return *this;
  }
  FixedComplex& operator-=(const FixedComplex& o) {
    re_ -= o.re_;
    im_ -= o.im_;
    return *this;
  }
  friend FixedComplex operator+(FixedComplex a, const FixedComplex& b) { return a += b; }
  friend FixedComplex operator-(FixedComplex a, const FixedComplex& b) { return a -= b; }

  /// Each component is formed exactly at 2^-2p and truncated once, so its error is below 2^-p.
  friend FixedComplex operator*(const FixedComplex& a, const FixedComplex& b) {
    if (a.precision() != b.precision()) throw InputError("complex operands on different grids");
    const mpz_class& ar = a.re_.mantissa();
    const mpz_class& ai = a.im_.mantissa();
    const mpz_class& br = b.re_.mantissa();
    const mpz_class& bi = b.im_.mantissa();
    mpz_class re = ar * br;
    mpz_submul(re.get_mpz_t(), ai.get_mpz_t(), bi.get_mpz_t());
    mpz_class im = ar * bi;
    mpz_addmul(im.get_mpz_t(), ai.get_mpz_t(), br.get_mpz_t());
    const auto p = static_cast<unsigned long>(a.precision());
    const int ib = a.integer_bits();
    return {FixedReal(detail::shift_toward_zero(re, p), a.precision(), ib),
            FixedReal(detail::shift_toward_zero(im, p), a.precision(), ib)};
  }
  friend FixedComplex operator*(const FixedComplex& a, const FixedReal& s) {
    return {a.re_ * s, a.im_ * s};
  }
  friend FixedComplex operator*(const FixedComplex& a, long k) { return {a.re_ * k, a.im_ * k}; }

  FixedComplex shifted_down(unsigned k) const { return {re_.shifted_down(k), im_.shifted_down(k)}; }
  FixedComplex rescaled(int new_p) const { return {re_.rescaled(new_p), im_.rescaled(new_p)}; }

  /// |z|^2 at 2^-2p scale, exact.
  mpz_class norm2_wide() const {
    mpz_class s = re_.mantissa() * re_.mantissa();
    mpz_addmul(s.get_mpz_t(), im_.mantissa().get_mpz_t(), im_.mantissa().get_mpz_t());
    return s;
  }

  FixedReal norm2() const {
    return FixedReal(
        detail::shift_toward_zero(norm2_wide(), static_cast<unsigned long>(precision())),
        precision(), integer_bits());
  }

  /// floor(sqrt(|z|^2)) on the grid; error below 2^-p.
  FixedReal modulus() const {
    mpz_class r;
    mpz_class s = norm2_wide();
    mpz_sqrt(r.get_mpz_t(), s.get_mpz_t());
    return FixedReal(std::move(r), precision(), integer_bits());
  }

  /// Exact test |z| <= bound for a nonnegative rational bound.
  bool modulus_le(const mpq_class& bound) const {
    if (sgn(bound) < 0) return false;
    mpz_class lhs = norm2_wide() * bound.get_den() * bound.get_den();
    mpz_class rhs = bound.get_num() * bound.get_num();
    rhs <<= 2UL * static_cast<unsigned long>(precision());
    return lhs <= rhs;
  }
  bool modulus_lt(const mpq_class& bound) const {
    if (sgn(bound) <= 0) return false;
    mpz_class lhs = norm2_wide() * bound.get_den() * bound.get_den();
    mpz_class rhs = bound.get_num() * bound.get_num();
    rhs <<= 2UL * static_cast<unsigned long>(precision());
    return lhs < rhs;
  }

  friend bool operator==(const FixedComplex& a, const FixedComplex& b) {
    return a.re_ == b.re_ && a.im_ == b.im_;
  }

 private:
  FixedReal re_;
  FixedReal im_;
};

inline FixedComplex conj(const FixedComplex& z) { return z.conj(); }
inline FixedComplex zero_like(const FixedComplex& z) {
  return FixedComplex::zero(z.context());
}
inline FixedComplex one_like(const FixedComplex& z) { return FixedComplex::one(z.context()); }

/// Fused sum of complex products kept exactly at 2^-2p and truncated once on read-out.
class WideAccumulator {
 public:
  WideAccumulator(int p, int integer_bits) : p_(p), ib_(integer_bits) {}
  explicit WideAccumulator(const FixedComplex& like)
      : p_(like.precision()), ib_(like.integer_bits()) {}

  void add_product(const FixedComplex& a, const FixedComplex& b) {
    mpz_addmul(re_.get_mpz_t(), a.re().mantissa().get_mpz_t(), b.re().mantissa().get_mpz_t());
    mpz_submul(re_.get_mpz_t(), a.im().mantissa().get_mpz_t(), b.im().mantissa().get_mpz_t());
    mpz_addmul(im_.get_mpz_t(), a.re().mantissa().get_mpz_t(), b.im().mantissa().get_mpz_t());
    mpz_addmul(im_.get_mpz_t(), a.im().mantissa().get_mpz_t(), b.re().mantissa().get_mpz_t());
  }

  void add(const FixedComplex& a) {
    mpz_class t;
    const auto p = static_cast<unsigned long>(p_);
    mpz_mul_2exp(t.get_mpz_t(), a.re().mantissa().get_mpz_t(), p);
    re_ += t;
    mpz_mul_2exp(t.get_mpz_t(), a.im().mantissa().get_mpz_t(), p);
    im_ += t;
  }

  FixedComplex result() const {
    const auto p = static_cast<unsigned long>(p_);
    return {FixedReal(detail::shift_toward_zero(re_, p), p_, ib_),
            FixedReal(detail::shift_toward_zero(im_, p), p_, ib_)};
  }

 private:
  mpz_class re_{0};
  mpz_class im_{0};
  int p_;
  int ib_;
};

/// A real known to within `error_ulps` units of 2^-bits of its mantissa.
struct ApproxReal {
  mpz_class mantissa;
  int bits = 0;
  mpz_class error_ulps{0};
};

/// Exact truncation of a rational toward zero onto the 2^-p grid.
inline FixedReal truncate(const mpq_class& x, const PrecisionContext& ctx) {
  mpz_class num = x.get_num();
  num <<= static_cast<unsigned long>(ctx.p);
  mpz_class q;
  mpz_tdiv_q(q.get_mpz_t(), num.get_mpz_t(), x.get_den().get_mpz_t());
  return FixedReal(std::move(q), ctx.p, ctx.max_integer_bits);
}

/// Truncates an approximation onto the 2^-p grid so that the result lies within 2^-p of the
/// exact value it approximates. The result is the toward-zero truncation of the
/// approximation except when the approximation sits within its own error of the next grid
/// point away from zero, where that grid point is taken instead.
inline FixedReal truncate(const ApproxReal& x, const PrecisionContext& ctx) {
  if (x.bits < ctx.p) throw InputError("approximation is coarser than the target grid");
  const auto shift = static_cast<unsigned long>(x.bits - ctx.p);
  mpz_class one(1);
  one <<= shift;
  if (x.error_ulps * 2 > one) {
    throw ConfigurationError("approximation error too large for the requested precision");
  }
  mpz_class mag = ::abs(x.mantissa);
  mpz_class q;
  mpz_class rem;
  mpz_tdiv_qr(q.get_mpz_t(), rem.get_mpz_t(), mag.get_mpz_t(), one.get_mpz_t());
  if (rem + x.error_ulps > one) q += 1;
  if (sgn(x.mantissa) < 0) q = -q;
  return FixedReal(std::move(q), ctx.p, ctx.max_integer_bits);
}

inline FixedReal truncate(const ApproxReal& x, int p) { return truncate(x, PrecisionContext(p)); }

/// floor(sqrt(x)) on the grid of x, for x >= 0.
inline FixedReal sqrt_floor(const FixedReal& x) {
  if (x.sign() < 0) throw InputError("square root of a negative value");
  mpz_class w = x.mantissa();
  w <<= static_cast<unsigned long>(x.precision());
  mpz_class r;
  mpz_sqrt(r.get_mpz_t(), w.get_mpz_t());
  return FixedReal(std::move(r), x.precision(), x.integer_bits());
}

/// floor(2^-1/2) on the 2^-p grid.
inline FixedReal inv_sqrt2(const PrecisionContext& ctx) {
  mpz_class w(1);
  w <<= static_cast<unsigned long>(2 * ctx.p - 1);
  mpz_class r;
  mpz_sqrt(r.get_mpz_t(), w.get_mpz_t());
  return FixedReal(std::move(r), ctx.p, ctx.max_integer_bits);
}

namespace detail {

// sum_k (-1)^k / ((2k+1) x^(2k+1)) at 2^-bits; error below 2 ulps per term.
inline mpz_class arctan_inverse(unsigned long x, unsigned long bits, unsigned long& terms) {
  mpz_class term(1);
  term <<= bits;
  term /= x;
  const unsigned long x2 = x * x;
  mpz_class sum(0);
  for (unsigned long k = 0; term != 0; ++k) {
    mpz_class t = term / (2 * k + 1);
    if (k % 2 == 0) {
      sum += t;
    } else {
      sum -= t;
    }
    term /= x2;
    ++terms;
  }
  return sum;
}

inline mpz_class compute_pi(int bits) {
  constexpr unsigned long kGuard = 40;
  const unsigned long b = static_cast<unsigned long>(bits) + kGuard;
  unsigned long terms = 0;
  mpz_class pi = 16 * arctan_inverse(5, b, terms) - 4 * arctan_inverse(239, b, terms);
  return shift_toward_zero(pi, kGuard);
}

}  // namespace detail

/// pi * 2^bits truncated, within 2 units of the last place.
inline mpz_class pi_mantissa(int bits) {
  static std::mutex mu;
  static std::map<int, mpz_class> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(bits);
  if (it == cache.end()) it = cache.emplace(bits, detail::compute_pi(bits)).first;
  return it->second;
}

/// Angle grid {k * spacing : k * spacing < 2 pi}. Spacing is either 2^-exponent or
/// 2 pi / divisions.
class AngleGrid {
 public:
  static AngleGrid dyadic(int exponent) {
    if (exponent < 0) throw InputError("grid exponent must be nonnegative");
    AngleGrid g;
    g.dyadic_ = true;
    g.exponent_ = exponent;
    // count = floor(2 pi 2^s) + 1; 2 pi 2^s is irrational so the floor is never tight.
    for (int extra = 64;; extra *= 2) {
      mpz_class two_pi = pi_mantissa(exponent + extra) * 2;
      mpz_class lo = (two_pi - 4) >> extra;
      mpz_class hi = (two_pi + 4) >> extra;
      if (lo == hi) {
        g.count_ = lo + 1;
        break;
      }
    }
    return g;
  }

  static AngleGrid divisions(const mpz_class& count) {
    if (count < 1) throw InputError("grid needs at least one point");
    AngleGrid g;
    g.dyadic_ = false;
    g.count_ = count;
    return g;
  }

  bool is_dyadic() const noexcept { return dyadic_; }
  int exponent() const noexcept { return exponent_; }
  /// Number of grid points in [0, 2 pi).
  const mpz_class& count() const noexcept { return count_; }

  /// Exact rational upper bound on the spacing (the spacing itself when dyadic).
  mpq_class spacing_bound() const {
    if (dyadic_) {
      mpz_class den(1);
      den <<= static_cast<unsigned long>(exponent_);
      return mpq_class(1, den);
    }
    // 2 pi < 6.2832
    mpq_class q(62832, 10000);
    q /= count_;
    q.canonicalize();
    return q;
  }

  double spacing() const {
    if (dyadic_) return std::ldexp(1.0, -exponent_);
    return 2.0 * 3.14159265358979323846 / count_.get_d();
  }

  friend bool operator==(const AngleGrid& a, const AngleGrid& b) {
    return a.dyadic_ == b.dyadic_ && a.exponent_ == b.exponent_ && a.count_ == b.count_;
  }

 private:
  AngleGrid() = default;
  bool dyadic_ = true;
  int exponent_ = 0;
  mpz_class count_{1};
};

struct GridAngle {
  AngleGrid grid;
  mpz_class index;
};

/// cos and sin mantissas at 2^-bits, each within error_ulps of the exact value.
struct WideTrig {
  mpz_class cos;
  mpz_class sin;
  int bits = 0;
  mpz_class error_ulps{0};
};

inline WideTrig trig_wide(const GridAngle& angle, int bits) {
  if (angle.index < 0 || angle.index >= angle.grid.count()) {
    throw InputError("angle index " + angle.index.get_str() + " outside the grid [0, " +
                     angle.grid.count().get_str() + ")");
  }
  constexpr int kInner = 16;
  const int w = bits + kInner;
  const auto uw = static_cast<unsigned long>(w);

  const mpz_class pi = pi_mantissa(w);
  mpz_class x;
  if (angle.grid.is_dyadic()) {
    const int s = angle.grid.exponent();
    if (s <= w) {
      x = angle.index;
      x <<= static_cast<unsigned long>(w - s);
    } else {
      x = detail::shift_toward_zero(angle.index, static_cast<unsigned long>(s - w));
    }
  } else {
    x = angle.index * pi * 2;
    x /= angle.grid.count();
  }

  const mpz_class half = pi >> 1;
  const mpz_class quarter = pi >> 2;
  mpz_class q;
  mpz_class r;
  mpz_fdiv_qr(q.get_mpz_t(), r.get_mpz_t(), x.get_mpz_t(), half.get_mpz_t());
  long quadrant = q.get_si() % 4;
  bool swapped = false;
  if (r > quarter) {
    r = half - r;
    swapped = true;
  }

  // Joint Taylor series for cos r and sin r, r in [0, pi/4].
  mpz_class term(1);
  term <<= uw;
  mpz_class c = term;
  mpz_class s(0);
  long terms = 0;
  for (unsigned long j = 1;; ++j) {
    term *= r;
    term >>= uw;
    term /= j;
    if (term == 0) break;
    ++terms;
    switch (j % 4) {
      case 1: s += term; break;
      case 2: c -= term; break;
      case 3: s -= term; break;
      default: c += term; break;
    }
  }
  if (swapped) std::swap(c, s);

  mpz_class cq;
  mpz_class sq;
  switch (quadrant) {
    case 0: cq = c; sq = s; break;
    case 1: cq = -s; sq = c; break;
    case 2: cq = -c; sq = -s; break;
    default: cq = s; sq = -c; break;
  }

  // Reduction error: x (<= 6), q * half (<= 4 * 2), swap (<= 2); Taylor: 2 per term + tail.
  const long inner_error = 24 + 2 * terms + 4;
  WideTrig out;
  out.bits = bits;
  out.cos = detail::shift_toward_zero(cq, kInner);
  out.sin = detail::shift_toward_zero(sq, kInner);
  out.error_ulps = (inner_error >> kInner) + 2;
  return out;
}

struct TrigPair {
  FixedReal cos;
  FixedReal sin;
};

/// cos and sin of a grid angle, each within 2^-p of the exact value.
inline TrigPair trig_pair(const GridAngle& angle, const PrecisionContext& ctx) {
  const WideTrig w = trig_wide(angle, ctx.working_bits());
  return {truncate(ApproxReal{w.cos, w.bits, w.error_ulps}, ctx),
          truncate(ApproxReal{w.sin, w.bits, w.error_ulps}, ctx)};
}

}  // namespace qsc

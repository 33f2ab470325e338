#pragma once

// Dense operators on labeled qubit registers.
//
// An operator on labels (q_1, ..., q_k) is a 2^k x 2^k row-major matrix where q_1
// drives the most significant index bit. State vectors on an n-qubit register use
// labels 1..n in the same order, so label j sits at bit position n - j.

#include <algorithm>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qsumcheck/errors.hpp"
#include "qsumcheck/precision.hpp"

namespace qsc {

inline constexpr int kMaxDenseQubits = 14;

using QubitSet = std::vector<int>;

namespace detail {

inline void check_labels(const QubitSet& labels) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 1) throw InputError("qubit labels start at 1");
    for (std::size_t j = 0; j < i; ++j) {
      if (labels[i] == labels[j]) {
        throw InputError("duplicate qubit label " + std::to_string(labels[i]));
      }
    }
  }
}

inline std::string labels_string(const QubitSet& labels) {
  std::string s = "{";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(labels[i]);
  }
  return s + "}";
}

/// Position of each label of `sub` inside `full`, or throws.
inline std::vector<int> positions_in(const QubitSet& sub, const QubitSet& full) {
  std::vector<int> pos;
  pos.reserve(sub.size());
  for (int q : sub) {
    auto it = std::find(full.begin(), full.end(), q);
    if (it == full.end()) {
      throw InputError("qubit " + std::to_string(q) + " is not among " + labels_string(full));
    }
    pos.push_back(static_cast<int>(it - full.begin()));
  }
  return pos;
}

/// For an index over `full_size` bits, bit masks of the listed positions (MSB first order).
inline std::vector<std::size_t> masks_for(const std::vector<int>& positions, std::size_t full_size) {
  std::vector<std::size_t> m;
  m.reserve(positions.size());
  for (int p : positions) m.push_back(std::size_t{1} << (full_size - 1 - static_cast<std::size_t>(p)));
  return m;
}

/// Scatters a k-bit sub-index onto the given masks.
inline std::size_t scatter(std::size_t sub, const std::vector<std::size_t>& masks) {
  std::size_t out = 0;
  const std::size_t k = masks.size();
  for (std::size_t j = 0; j < k; ++j) {
    if (sub & (std::size_t{1} << (k - 1 - j))) out |= masks[j];
  }
  return out;
}

inline std::size_t gather(std::size_t full, const std::vector<std::size_t>& masks) {
  std::size_t out = 0;
  const std::size_t k = masks.size();
  for (std::size_t j = 0; j < k; ++j) {
    if (full & masks[j]) out |= std::size_t{1} << (k - 1 - j);
  }
  return out;
}

/// All indices whose bits at `masks` are zero, over a register of `size` bits.
inline std::vector<std::size_t> complement_indices(const std::vector<std::size_t>& masks,
                                                   std::size_t size) {
  std::size_t used = 0;
  for (auto m : masks) used |= m;
  std::vector<std::size_t> out;
  out.reserve(std::size_t{1} << (size - masks.size()));
  for (std::size_t x = 0; x < (std::size_t{1} << size); ++x) {
    if ((x & used) == 0) out.push_back(x);
  }
  return out;
}

}  // namespace detail

/// Sum of products with a single rounding step where the scalar type supports it.
template <class Scalar>
class DotAccumulator {
 public:
  explicit DotAccumulator(const Scalar& like) : sum_(zero_like(like)) {}
  void add_product(const Scalar& a, const Scalar& b) { sum_ = sum_ + a * b; }
  void add(const Scalar& a) { sum_ = sum_ + a; }
  Scalar result() const { return sum_; }

 private:
  Scalar sum_;
};

template <>
class DotAccumulator<FixedComplex> {
 public:
  explicit DotAccumulator(const FixedComplex& like) : acc_(like) {}
  void add_product(const FixedComplex& a, const FixedComplex& b) { acc_.add_product(a, b); }
  void add(const FixedComplex& a) { acc_.add(a); }
  FixedComplex result() const { return acc_.result(); }

 private:
  WideAccumulator acc_;
};

template <class Scalar>
class Operator {
 public:
  Operator() = default;
  Operator(QubitSet qubits, std::vector<Scalar> entries)
      : qubits_(std::move(qubits)), entries_(std::move(entries)) {
    detail::check_labels(qubits_);
    if (qubits_.size() > static_cast<std::size_t>(kMaxDenseQubits)) {
      throw InputError("dense operators are capped at " + std::to_string(kMaxDenseQubits) +
                       " qubits");
    }
    const std::size_t d = dim();
    if (entries_.size() != d * d) {
      throw InputError("operator on " + std::to_string(qubits_.size()) + " qubits needs " +
                       std::to_string(d * d) + " entries, got " + std::to_string(entries_.size()));
    }
  }

  static Operator filled(QubitSet qubits, const Scalar& value) {
    const std::size_t d = std::size_t{1} << qubits.size();
    return Operator(std::move(qubits), std::vector<Scalar>(d * d, value));
  }
  static Operator zeros(QubitSet qubits, const Scalar& like) {
    return filled(std::move(qubits), zero_like(like));
  }
  static Operator identity(QubitSet qubits, const Scalar& like) {
    Operator out = zeros(std::move(qubits), like);
    for (std::size_t i = 0; i < out.dim(); ++i) out.at(i, i) = one_like(like);
    return out;
  }

  const QubitSet& qubits() const noexcept { return qubits_; }
  int arity() const noexcept { return static_cast<int>(qubits_.size()); }
  std::size_t dim() const noexcept { return std::size_t{1} << qubits_.size(); }
  const std::vector<Scalar>& entries() const noexcept { return entries_; }

  const Scalar& operator()(std::size_t r, std::size_t c) const { return entries_[r * dim() + c]; }
  Scalar& at(std::size_t r, std::size_t c) { return entries_[r * dim() + c]; }

  /// Same operator with its labels reordered to `order` (a permutation of qubits()).
  Operator permuted(const QubitSet& order) const {
    if (order.size() != qubits_.size()) throw InputError("permutation has the wrong length");
    if (order == qubits_) return *this;
    const auto pos = detail::positions_in(order, qubits_);
    const auto masks = detail::masks_for(pos, qubits_.size());
    const std::size_t d = dim();
    std::vector<Scalar> out;
    out.reserve(d * d);
    for (std::size_t r = 0; r < d; ++r) {
      const std::size_t rr = detail::scatter(r, masks);
      for (std::size_t c = 0; c < d; ++c) out.push_back((*this)(rr, detail::scatter(c, masks)));
    }
    return Operator(order, std::move(out));
  }

  friend Operator operator+(const Operator& a, const Operator& b) {
    a.require_same_labels(b);
    std::vector<Scalar> out;
    out.reserve(a.entries_.size());
    for (std::size_t i = 0; i < a.entries_.size(); ++i) out.push_back(a.entries_[i] + b.entries_[i]);
    return Operator(a.qubits_, std::move(out));
  }
  friend Operator operator-(const Operator& a, const Operator& b) {
    a.require_same_labels(b);
    std::vector<Scalar> out;
    out.reserve(a.entries_.size());
    for (std::size_t i = 0; i < a.entries_.size(); ++i) out.push_back(a.entries_[i] - b.entries_[i]);
    return Operator(a.qubits_, std::move(out));
  }
  friend Operator operator*(const Operator& a, const Scalar& s) {
    std::vector<Scalar> out;
    out.reserve(a.entries_.size());
    for (const auto& e : a.entries_) out.push_back(e * s);
    return Operator(a.qubits_, std::move(out));
  }

  void require_same_labels(const Operator& o) const {
    if (qubits_ != o.qubits_) {
      throw InputError("operator labels differ: " + detail::labels_string(qubits_) + " vs " +
                       detail::labels_string(o.qubits_));
    }
  }

  friend bool operator==(const Operator& a, const Operator& b) {
    return a.qubits_ == b.qubits_ && a.entries_ == b.entries_;
  }

 private:
  QubitSet qubits_;
  std::vector<Scalar> entries_;
};

using DenseOperator = Operator<FixedComplex>;

inline QubitSet register_labels(int n) {
  QubitSet q;
  for (int i = 1; i <= n; ++i) q.push_back(i);
  return q;
}

template <class Scalar>
Operator<Scalar> kron(const Operator<Scalar>& a, const Operator<Scalar>& b) {
  QubitSet labels = a.qubits();
  labels.insert(labels.end(), b.qubits().begin(), b.qubits().end());
  detail::check_labels(labels);
  const std::size_t da = a.dim();
  const std::size_t db = b.dim();
  const std::size_t d = da * db;
  std::vector<Scalar> out;
  out.reserve(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) out.push_back(a(r / db, c / db) * b(r % db, c % db));
  }
  return Operator<Scalar>(std::move(labels), std::move(out));
}

/// Extends g to act on `labels` (a superset of g's labels) as g tensor identity.
template <class Scalar>
Operator<Scalar> embed(const Operator<Scalar>& g, const QubitSet& labels) {
  detail::check_labels(labels);
  const auto pos = detail::positions_in(g.qubits(), labels);
  const auto masks = detail::masks_for(pos, labels.size());
  std::size_t used = 0;
  for (auto m : masks) used |= m;
  const std::size_t d = std::size_t{1} << labels.size();
  if (labels.size() > static_cast<std::size_t>(kMaxDenseQubits)) {
    throw InputError("embedding exceeds the dense qubit cap");
  }
  const Scalar zero = zero_like(g(0, 0));
  std::vector<Scalar> out(d * d, zero);
  for (std::size_t r = 0; r < d; ++r) {
    const std::size_t gr = detail::gather(r, masks);
    const std::size_t rest = r & ~used;
    for (std::size_t gc = 0; gc < g.dim(); ++gc) {
      const std::size_t c = rest | detail::scatter(gc, masks);
      out[r * d + c] = g(gr, gc);
    }
  }
  return Operator<Scalar>(labels, std::move(out));
}

template <class Scalar>
Operator<Scalar> embed_gate(const Operator<Scalar>& g, int n) {
  for (int q : g.qubits()) {
    if (q > n) {
      throw InputError("qubit " + std::to_string(q) + " outside a register of " +
                       std::to_string(n));
    }
  }
  return embed(g, register_labels(n));
}

/// Sums out every label of B not in `keep`; the result carries `keep` in the given order.
/// Sums of fixed-point values are exact, so the trace is preserved exactly.
template <class Scalar>
Operator<Scalar> partial_trace(const Operator<Scalar>& b, const QubitSet& keep) {
  detail::check_labels(keep);
  const auto pos = detail::positions_in(keep, b.qubits());
  const auto masks = detail::masks_for(pos, b.qubits().size());
  const auto rests = detail::complement_indices(masks, b.qubits().size());
  const std::size_t k = std::size_t{1} << keep.size();
  std::vector<Scalar> out;
  out.reserve(k * k);
  for (std::size_t r = 0; r < k; ++r) {
    const std::size_t rr = detail::scatter(r, masks);
    for (std::size_t c = 0; c < k; ++c) {
      const std::size_t cc = detail::scatter(c, masks);
      Scalar s = zero_like(b(0, 0));
      for (std::size_t x : rests) s = s + b(rr | x, cc | x);
      out.push_back(std::move(s));
    }
  }
  return Operator<Scalar>(keep, std::move(out));
}

template <class Scalar>
Operator<Scalar> matmul(const Operator<Scalar>& a, const Operator<Scalar>& b) {
  a.require_same_labels(b);
  const std::size_t d = a.dim();
  std::vector<Scalar> out;
  out.reserve(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      DotAccumulator<Scalar> acc(a(0, 0));
      for (std::size_t k = 0; k < d; ++k) acc.add_product(a(r, k), b(k, c));
      out.push_back(acc.result());
    }
  }
  return Operator<Scalar>(a.qubits(), std::move(out));
}

template <class Scalar>
Operator<Scalar> adjoint(const Operator<Scalar>& a) {
  const std::size_t d = a.dim();
  std::vector<Scalar> out;
  out.reserve(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) out.push_back(conj(a(c, r)));
  }
  return Operator<Scalar>(a.qubits(), std::move(out));
}

template <class Scalar>
Scalar trace(const Operator<Scalar>& a) {
  Scalar s = zero_like(a(0, 0));
  for (std::size_t i = 0; i < a.dim(); ++i) s = s + a(i, i);
  return s;
}

/// tr(A B) as one fused sum.
template <class Scalar>
Scalar trace_of_product(const Operator<Scalar>& a, const Operator<Scalar>& b) {
  a.require_same_labels(b);
  DotAccumulator<Scalar> acc(a(0, 0));
  const std::size_t d = a.dim();
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t k = 0; k < d; ++k) acc.add_product(a(r, k), b(k, r));
  }
  return acc.result();
}

/// Exact sum of |entry|^2 at 2^-2p scale.
inline mpz_class frobenius_norm2_wide(const DenseOperator& a) {
  mpz_class s(0);
  for (const auto& e : a.entries()) s += e.norm2_wide();
  return s;
}

/// floor of the Frobenius norm on the 2^-p grid; error below 2^-p.
inline FixedReal frobenius_norm(const DenseOperator& a) {
  mpz_class r;
  const mpz_class s = frobenius_norm2_wide(a);
  mpz_sqrt(r.get_mpz_t(), s.get_mpz_t());
  const auto& e = a(0, 0);
  return FixedReal(std::move(r), e.precision(), e.integer_bits());
}

/// Exact test of ||A||_F >= bound.
inline bool frobenius_norm_ge(const DenseOperator& a, const mpq_class& bound) {
  if (sgn(bound) <= 0) return true;
  mpz_class lhs = frobenius_norm2_wide(a) * bound.get_den() * bound.get_den();
  mpz_class rhs = bound.get_num() * bound.get_num();
  rhs <<= 2UL * static_cast<unsigned long>(a(0, 0).precision());
  return lhs >= rhs;
}

/// Largest entry modulus test: every |entry| <= bound, exactly.
inline bool entries_bounded(const DenseOperator& a, const mpq_class& bound) {
  return std::all_of(a.entries().begin(), a.entries().end(),
                     [&](const FixedComplex& e) { return e.modulus_le(bound); });
}

/// state <- (g tensor I) state on an n-qubit register.
template <class Scalar>
void apply_left(std::vector<Scalar>& state, int n, const Operator<Scalar>& g) {
  if (state.size() != (std::size_t{1} << n)) throw InputError("state has the wrong length");
  const auto pos = detail::positions_in(g.qubits(), register_labels(n));
  const auto masks = detail::masks_for(pos, static_cast<std::size_t>(n));
  const auto rests = detail::complement_indices(masks, static_cast<std::size_t>(n));
  const std::size_t d = g.dim();
  std::vector<std::size_t> offs(d);
  for (std::size_t a = 0; a < d; ++a) offs[a] = detail::scatter(a, masks);
  std::vector<Scalar> local(d);
  for (std::size_t x : rests) {
    for (std::size_t a = 0; a < d; ++a) local[a] = state[x | offs[a]];
    for (std::size_t r = 0; r < d; ++r) {
      DotAccumulator<Scalar> acc(local[0]);
      for (std::size_t c = 0; c < d; ++c) acc.add_product(g(r, c), local[c]);
      state[x | offs[r]] = acc.result();
    }
  }
}

/// row <- row (g tensor I) for a row vector on an n-qubit register.
template <class Scalar>
void apply_right(std::vector<Scalar>& row, int n, const Operator<Scalar>& g) {
  if (row.size() != (std::size_t{1} << n)) throw InputError("row has the wrong length");
  const auto pos = detail::positions_in(g.qubits(), register_labels(n));
  const auto masks = detail::masks_for(pos, static_cast<std::size_t>(n));
  const auto rests = detail::complement_indices(masks, static_cast<std::size_t>(n));
  const std::size_t d = g.dim();
  std::vector<std::size_t> offs(d);
  for (std::size_t a = 0; a < d; ++a) offs[a] = detail::scatter(a, masks);
  std::vector<Scalar> local(d);
  for (std::size_t x : rests) {
    for (std::size_t a = 0; a < d; ++a) local[a] = row[x | offs[a]];
    for (std::size_t c = 0; c < d; ++c) {
      DotAccumulator<Scalar> acc(local[0]);
      for (std::size_t r = 0; r < d; ++r) acc.add_product(local[r], g(r, c));
      row[x | offs[c]] = acc.result();
    }
  }
}

/// Partial trace of |psi><phi| onto `keep`: M[a][b] = sum_rest psi[a, rest] phi[b, rest].
template <class Scalar>
Operator<Scalar> reduced_outer(const std::vector<Scalar>& psi, const std::vector<Scalar>& phi,
                               int n, const QubitSet& keep) {
  if (psi.size() != (std::size_t{1} << n) || phi.size() != psi.size()) {
    throw InputError("vectors have the wrong length");
  }
  detail::check_labels(keep);
  const auto pos = detail::positions_in(keep, register_labels(n));
  const auto masks = detail::masks_for(pos, static_cast<std::size_t>(n));
  const auto rests = detail::complement_indices(masks, static_cast<std::size_t>(n));
  const std::size_t k = std::size_t{1} << keep.size();
  std::vector<std::size_t> offs(k);
  for (std::size_t a = 0; a < k; ++a) offs[a] = detail::scatter(a, masks);
  std::vector<Scalar> out;
  out.reserve(k * k);
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      DotAccumulator<Scalar> acc(psi[0]);
      for (std::size_t x : rests) acc.add_product(psi[x | offs[a]], phi[x | offs[b]]);
      out.push_back(acc.result());
    }
  }
  return Operator<Scalar>(keep, std::move(out));
}

/// Dense |psi><phi| (oracle use only).
template <class Scalar>
Operator<Scalar> outer(const std::vector<Scalar>& psi, const std::vector<Scalar>& phi, int n) {
  const std::size_t d = psi.size();
  std::vector<Scalar> out;
  out.reserve(d * d);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) out.push_back(psi[a] * phi[b]);
  }
  return Operator<Scalar>(register_labels(n), std::move(out));
}

}  // namespace qsc

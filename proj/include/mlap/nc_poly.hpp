#pragma once

#include <compare>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlap/matrix_core.hpp"

namespace mlap {

enum class LetterKind : int { SelfAdjoint = 0, Cayley = 1, Extern = 2 };

/// One letter of a word. `index` is the 0-based matrix (or unitary) index,
/// `slot` the 0-based time slot the letter reads from (extern unitaries
/// ignore it), `power` is +1 or -1 and always +1 for self-adjoint letters.
struct Letter {
  LetterKind kind = LetterKind::SelfAdjoint;
  int index = 0;
  int slot = 0;
  int power = 1;

  auto operator<=>(const Letter&) const = default;
};

using Word = std::vector<Letter>;

/// Selects a self-adjoint letter class X_i (at a given slot).
struct LetterRef {
  int index = 0;
  int slot = 0;
};

/// Canonically ordered word comparison: shorter words first, then lexicographic.
bool word_less(const Word& a, const Word& b);

struct Term {
  Complex coeff;
  Word word;
};

struct TensorTerm {
  Complex coeff;
  Word left;
  Word right;
};

/// Polynomial in self-adjoint letters, Cayley letters u(X_j)^{+-1} and fixed
/// unitaries v_j^{+-1}. Always held in canonical form.
class NCPolynomial {
 public:
  static constexpr int kDefaultMaxDegree = 16;

  NCPolynomial() = default;
  explicit NCPolynomial(std::vector<Term> terms, int max_degree = kDefaultMaxDegree);

  static NCPolynomial constant(Complex c);
  static NCPolynomial word(Word w, Complex c = 1.0);
  static NCPolynomial letter(Letter l) { return word(Word{l}); }
  /// X_{index} at slot.
  static NCPolynomial x(int index, int slot = 0) {
    return letter(Letter{LetterKind::SelfAdjoint, index, slot, 1});
  }

  const std::vector<Term>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;
  int max_degree() const { return max_degree_; }
  /// Largest matrix index / slot / extern index referenced, or -1.
  int max_index(LetterKind kind) const;
  int max_slot() const;

  NCPolynomial& operator+=(const NCPolynomial& o);
  NCPolynomial& operator-=(const NCPolynomial& o);
  NCPolynomial& operator*=(Complex s);
  friend NCPolynomial operator+(NCPolynomial a, const NCPolynomial& b) { return a += b; }
  friend NCPolynomial operator-(NCPolynomial a, const NCPolynomial& b) { return a -= b; }
  friend NCPolynomial operator*(Complex s, NCPolynomial a) { return a *= s; }
  friend NCPolynomial operator*(const NCPolynomial& a, const NCPolynomial& b);
  friend bool operator==(const NCPolynomial& a, const NCPolynomial& b);

 private:
  void canonicalize();

  std::vector<Term> terms_;
  int max_degree_ = kDefaultMaxDegree;
};

/// Element of P (x) P, canonical form as for NCPolynomial.
class TensorPolynomial {
 public:
  TensorPolynomial() = default;
  explicit TensorPolynomial(std::vector<TensorTerm> terms);

  const std::vector<TensorTerm>& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  TensorPolynomial& operator+=(const TensorPolynomial& o);
  friend TensorPolynomial operator+(TensorPolynomial a, const TensorPolynomial& b) {
    return a += b;
  }
  friend bool operator==(const TensorPolynomial& a, const TensorPolynomial& b);

  /// (p (x) 1) * this
  TensorPolynomial mul_left(const NCPolynomial& p) const;
  /// this * (1 (x) q)
  TensorPolynomial mul_right(const NCPolynomial& q) const;

 private:
  void canonicalize();
  std::vector<TensorTerm> terms_;
};

// ---- text syntax --------------------------------------------------------
//
// Letters: X<i>, u<i>, v<i> with 1-based index, optional "@<slot>" (1-based,
// default 1) and optional "^-1" for unitary letters; "X1^3" expands to
// "X1 X1 X1". A word is a whitespace separated letter list, "1" is the empty
// word. A polynomial is a sum of terms "[coef*]word" where coef is a real
// number or "(re,im)".

Letter parse_letter(std::string_view text);
Word parse_word(std::string_view text);
NCPolynomial parse_polynomial(std::string_view text, int max_degree = NCPolynomial::kDefaultMaxDegree);

std::string to_string(const Letter& l);
std::string to_string(const Word& w);
/// Canonical text; parse_polynomial(to_string(p)) == p.
std::string to_string(const NCPolynomial& p);
std::string to_string(const TensorPolynomial& p);

// ---- evaluation ---------------------------------------------------------

/// Substitutes matrices for letters. Cayley letters are computed once per
/// evaluator and cached. The evaluator keeps references to its inputs.
class WordEvaluator {
 public:
  WordEvaluator(std::span<const HermitianTuple> slots, const UnitaryTuple& unitaries);

  int n() const { return n_; }
  const Matrix& letter(const Letter& l);
  Matrix eval(const Word& w);
  Matrix eval(const NCPolynomial& p);

  /// Resolvent (X - 4i)^{-1} (power +1) or (X + 4i)^{-1} (power -1) used by
  /// derivatives of Cayley letters.
  const Matrix& resolvent(int index, int slot, int power);

 private:
  void check(const Letter& l) const;

  std::span<const HermitianTuple> slots_;
  const UnitaryTuple& unitaries_;
  int n_;
  std::vector<Matrix> cache_;
  std::vector<bool> cached_;
  std::vector<Matrix> res_cache_;
  std::vector<bool> res_cached_;
  std::vector<Matrix> extern_inverse_;
  int m_;
  Matrix identity_;
};

Matrix eval(const NCPolynomial& p, const HermitianTuple& x, const UnitaryTuple& u = {});
Matrix eval(const NCPolynomial& p, std::span<const HermitianTuple> slots, const UnitaryTuple& u = {});

/// Free difference quotient: a X_i b -> a (x) b for every occurrence of X_i.
/// Cayley and extern letters are constants.
TensorPolynomial free_difference_quotient(const NCPolynomial& p, LetterRef i);
inline TensorPolynomial free_difference_quotient(const NCPolynomial& p, int i) {
  return free_difference_quotient(p, LetterRef{i, 0});
}

/// Cyclic gradient: a X_i b -> b a for every occurrence of X_i.
NCPolynomial cyclic_gradient(const NCPolynomial& p, LetterRef i);
inline NCPolynomial cyclic_gradient(const NCPolynomial& p, int i) {
  return cyclic_gradient(p, LetterRef{i, 0});
}

/// sum coeff * tau(left) * tau(right).
Complex bitrace(const TensorPolynomial& tp, const HermitianTuple& x, const UnitaryTuple& u = {});
Complex bitrace(const TensorPolynomial& tp, std::span<const HermitianTuple> slots,
                const UnitaryTuple& u = {});

}  // namespace mlap

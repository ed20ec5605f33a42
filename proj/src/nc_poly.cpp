#include "mlap/nc_poly.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <map>

#include "mlap/errors.hpp"

namespace mlap {

bool word_less(const Word& a, const Word& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

namespace {

Word concat(const Word& a, const Word& b) {
  Word w;
  w.reserve(a.size() + b.size());
  w.insert(w.end(), a.begin(), a.end());
  w.insert(w.end(), b.begin(), b.end());
  return w;
}

Word slice(const Word& w, std::size_t from, std::size_t to) {
  return Word(w.begin() + static_cast<std::ptrdiff_t>(from), w.begin() + static_cast<std::ptrdiff_t>(to));
}

bool matches(const Letter& l, LetterRef r) {
  return l.kind == LetterKind::SelfAdjoint && l.index == r.index && l.slot == r.slot;
}

void validate_letter(const Letter& l) {
  if (l.index < 0) throw ConfigError("letter index must be non-negative");
  if (l.slot < 0) throw ConfigError("letter slot must be non-negative");
  if (l.kind == LetterKind::SelfAdjoint && l.power != 1)
    throw ConfigError("self-adjoint letters carry exponent +1 only");
  if (l.power != 1 && l.power != -1) throw ConfigError("unitary letters carry exponent +1 or -1");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_coeff(Complex c) {
  if (c.imag() == 0.0) return format_double(c.real());
  return "(" + format_double(c.real()) + "," + format_double(c.imag()) + ")";
}

class Scanner {
 public:
  explicit Scanner(std::string_view s) : s_(s) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  char get() { return pos_ < s_.size() ? s_[pos_++] : '\0'; }
  std::size_t pos() const { return pos_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(msg + " at offset " + std::to_string(pos_) + " in \"" + std::string(s_) + "\"",
                      "word");
  }

  int integer() {
    std::size_t start = pos_;
    if (peek() == '-') ++pos_;
    while (std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    int v = 0;
    auto res = std::from_chars(s_.data() + start, s_.data() + pos_, v);
    if (res.ec != std::errc() || start == pos_) fail("expected integer");
    return v;
  }

  double number() {
    skip_ws();
    std::string tmp(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(tmp.c_str(), &end);
    if (end == tmp.c_str()) fail("expected number");
    pos_ += static_cast<std::size_t>(end - tmp.c_str());
    return v;
  }

  bool number_ahead() const {
    const char c = peek();
    return std::isdigit(static_cast<unsigned char>(c)) || c == '.';
  }

 private:
  std::string_view s_;
  std::size_t pos_ = 0;
};

// Parses letters until the end of input or a top-level '+'/'-'.
Word scan_word(Scanner& sc) {
  Word w;
  bool any = false;
  while (true) {
    sc.skip_ws();
    const char c = sc.peek();
    if (c == '\0' || c == '+' || c == '-') break;
    any = true;
    if (c == '1') {
      sc.get();
      if (std::isdigit(static_cast<unsigned char>(sc.peek()))) sc.fail("unexpected number in word");
      continue;
    }
    Letter l;
    switch (c) {
      case 'X': l.kind = LetterKind::SelfAdjoint; break;
      case 'u': l.kind = LetterKind::Cayley; break;
      case 'v': l.kind = LetterKind::Extern; break;
      default: sc.fail(std::string("unknown letter '") + c + "'");
    }
    sc.get();
    const int idx = sc.integer();
    if (idx < 1) sc.fail("letter indices are 1-based");
    l.index = idx - 1;
    int repeat = 1;
    if (sc.peek() == '@') {
      sc.get();
      const int slot = sc.integer();
      if (slot < 1) sc.fail("slots are 1-based");
      l.slot = slot - 1;
    }
    if (sc.peek() == '^') {
      sc.get();
      const int e = sc.integer();
      if (l.kind == LetterKind::SelfAdjoint) {
        if (e < 1) sc.fail("self-adjoint letters take positive integer powers only");
        repeat = e;
      } else {
        if (e != 1 && e != -1) sc.fail("unitary letters take exponent 1 or -1");
        l.power = e;
      }
    }
    if (l.kind == LetterKind::Extern) l.slot = 0;
    for (int r = 0; r < repeat; ++r) w.push_back(l);
  }
  if (!any) sc.fail("empty word");
  return w;
}

}  // namespace

// ---- NCPolynomial -------------------------------------------------------

NCPolynomial::NCPolynomial(std::vector<Term> terms, int max_degree)
    : terms_(std::move(terms)), max_degree_(max_degree) {
  for (const auto& t : terms_)
    for (const auto& l : t.word) validate_letter(l);
  canonicalize();
}

NCPolynomial NCPolynomial::constant(Complex c) { return NCPolynomial({Term{c, {}}}); }

NCPolynomial NCPolynomial::word(Word w, Complex c) { return NCPolynomial({Term{c, std::move(w)}}); }

void NCPolynomial::canonicalize() {
  std::sort(terms_.begin(), terms_.end(),
            [](const Term& a, const Term& b) { return word_less(a.word, b.word); });
  std::vector<Term> out;
  for (auto& t : terms_) {
    if (static_cast<int>(t.word.size()) > max_degree_)
      throw ConfigError("word degree " + std::to_string(t.word.size()) +
                        " exceeds the maximum degree " + std::to_string(max_degree_));
    if (!out.empty() && out.back().word == t.word)
      out.back().coeff += t.coeff;
    else
      out.push_back(std::move(t));
  }
  std::erase_if(out, [](const Term& t) { return t.coeff == Complex(0.0, 0.0); });
  terms_ = std::move(out);
}

int NCPolynomial::degree() const {
  int d = 0;
  for (const auto& t : terms_) d = std::max(d, static_cast<int>(t.word.size()));
  return d;
}

int NCPolynomial::max_index(LetterKind kind) const {
  int r = -1;
  for (const auto& t : terms_)
    for (const auto& l : t.word)
      if (l.kind == kind) r = std::max(r, l.index);
  return r;
}

int NCPolynomial::max_slot() const {
  int r = -1;
  for (const auto& t : terms_)
    for (const auto& l : t.word)
      if (l.kind != LetterKind::Extern) r = std::max(r, l.slot);
  return r;
}

NCPolynomial& NCPolynomial::operator+=(const NCPolynomial& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  max_degree_ = std::max(max_degree_, o.max_degree_);
  canonicalize();
  return *this;
}

NCPolynomial& NCPolynomial::operator-=(const NCPolynomial& o) {
  for (const auto& t : o.terms_) terms_.push_back(Term{-t.coeff, t.word});
  max_degree_ = std::max(max_degree_, o.max_degree_);
  canonicalize();
  return *this;
}

NCPolynomial& NCPolynomial::operator*=(Complex s) {
  for (auto& t : terms_) t.coeff *= s;
  canonicalize();
  return *this;
}

NCPolynomial operator*(const NCPolynomial& a, const NCPolynomial& b) {
  std::vector<Term> terms;
  terms.reserve(a.terms_.size() * b.terms_.size());
  for (const auto& ta : a.terms_)
    for (const auto& tb : b.terms_) terms.push_back(Term{ta.coeff * tb.coeff, concat(ta.word, tb.word)});
  return NCPolynomial(std::move(terms), std::max(a.max_degree_, b.max_degree_));
}

bool operator==(const NCPolynomial& a, const NCPolynomial& b) {
  if (a.terms_.size() != b.terms_.size()) return false;
  for (std::size_t i = 0; i < a.terms_.size(); ++i)
    if (a.terms_[i].coeff != b.terms_[i].coeff || a.terms_[i].word != b.terms_[i].word) return false;
  return true;
}

// ---- TensorPolynomial ---------------------------------------------------

TensorPolynomial::TensorPolynomial(std::vector<TensorTerm> terms) : terms_(std::move(terms)) {
  canonicalize();
}

void TensorPolynomial::canonicalize() {
  auto less = [](const TensorTerm& a, const TensorTerm& b) {
    if (a.left != b.left) return word_less(a.left, b.left);
    return word_less(a.right, b.right);
  };
  std::sort(terms_.begin(), terms_.end(), less);
  std::vector<TensorTerm> out;
  for (auto& t : terms_) {
    if (!out.empty() && out.back().left == t.left && out.back().right == t.right)
      out.back().coeff += t.coeff;
    else
      out.push_back(std::move(t));
  }
  std::erase_if(out, [](const TensorTerm& t) { return t.coeff == Complex(0.0, 0.0); });
  terms_ = std::move(out);
}

TensorPolynomial& TensorPolynomial::operator+=(const TensorPolynomial& o) {
  terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
  canonicalize();
  return *this;
}

bool operator==(const TensorPolynomial& a, const TensorPolynomial& b) {
  if (a.terms_.size() != b.terms_.size()) return false;
  for (std::size_t i = 0; i < a.terms_.size(); ++i) {
    const auto& x = a.terms_[i];
    const auto& y = b.terms_[i];
    if (x.coeff != y.coeff || x.left != y.left || x.right != y.right) return false;
  }
  return true;
}

TensorPolynomial TensorPolynomial::mul_left(const NCPolynomial& p) const {
  std::vector<TensorTerm> out;
  for (const auto& tp : p.terms())
    for (const auto& t : terms_) out.push_back(TensorTerm{tp.coeff * t.coeff, concat(tp.word, t.left), t.right});
  return TensorPolynomial(std::move(out));
}

TensorPolynomial TensorPolynomial::mul_right(const NCPolynomial& q) const {
  std::vector<TensorTerm> out;
  for (const auto& t : terms_)
    for (const auto& tq : q.terms()) out.push_back(TensorTerm{t.coeff * tq.coeff, t.left, concat(t.right, tq.word)});
  return TensorPolynomial(std::move(out));
}

// ---- text ---------------------------------------------------------------

Letter parse_letter(std::string_view text) {
  Scanner sc(text);
  Word w = scan_word(sc);
  if (!sc.done() || w.size() != 1) throw ConfigError("expected a single letter: \"" + std::string(text) + "\"", "word");
  return w.front();
}

Word parse_word(std::string_view text) {
  Scanner sc(text);
  Word w = scan_word(sc);
  if (!sc.done()) sc.fail("trailing characters");
  return w;
}

NCPolynomial parse_polynomial(std::string_view text, int max_degree) {
  Scanner sc(text);
  std::vector<Term> terms;
  if (sc.done()) sc.fail("empty polynomial");
  while (!sc.done()) {
    double sign = 1.0;
    while (true) {
      sc.skip_ws();
      if (sc.peek() == '+') {
        sc.get();
      } else if (sc.peek() == '-') {
        sc.get();
        sign = -sign;
      } else {
        break;
      }
    }
    sc.skip_ws();
    Complex coeff(1.0, 0.0);
    bool have_coeff = false;
    if (sc.peek() == '(') {
      sc.get();
      const double re = sc.number();
      sc.skip_ws();
      if (sc.get() != ',') sc.fail("expected ',' in complex coefficient");
      const double im = sc.number();
      sc.skip_ws();
      if (sc.get() != ')') sc.fail("expected ')'");
      coeff = Complex(re, im);
      have_coeff = true;
    } else if (sc.number_ahead()) {
      coeff = sc.number();
      have_coeff = true;
    }
    Word w;
    sc.skip_ws();
    if (have_coeff) {
      if (sc.peek() == '*') {
        sc.get();
        w = scan_word(sc);
      }
    } else {
      w = scan_word(sc);
    }
    terms.push_back(Term{sign * coeff, std::move(w)});
  }
  return NCPolynomial(std::move(terms), max_degree);
}

std::string to_string(const Letter& l) {
  std::string s;
  switch (l.kind) {
    case LetterKind::SelfAdjoint: s = "X"; break;
    case LetterKind::Cayley: s = "u"; break;
    case LetterKind::Extern: s = "v"; break;
  }
  s += std::to_string(l.index + 1);
  if (l.kind != LetterKind::Extern && l.slot != 0) s += "@" + std::to_string(l.slot + 1);
  if (l.power == -1) s += "^-1";
  return s;
}

std::string to_string(const Word& w) {
  if (w.empty()) return "1";
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ' ';
    s += to_string(w[i]);
  }
  return s;
}

std::string to_string(const NCPolynomial& p) {
  if (p.is_zero()) return "0";
  std::string s;
  for (std::size_t i = 0; i < p.terms().size(); ++i) {
    const auto& t = p.terms()[i];
    if (i) s += " + ";
    if (t.word.empty()) {
      s += format_coeff(t.coeff);
    } else if (t.coeff == Complex(1.0, 0.0)) {
      s += to_string(t.word);
    } else {
      s += format_coeff(t.coeff) + "*" + to_string(t.word);
    }
  }
  return s;
}

std::string to_string(const TensorPolynomial& p) {
  if (p.is_zero()) return "0";
  std::string s;
  for (std::size_t i = 0; i < p.terms().size(); ++i) {
    const auto& t = p.terms()[i];
    if (i) s += " + ";
    s += format_coeff(t.coeff) + "*[" + to_string(t.left) + " (x) " + to_string(t.right) + "]";
  }
  return s;
}

// ---- evaluation ---------------------------------------------------------

WordEvaluator::WordEvaluator(std::span<const HermitianTuple> slots, const UnitaryTuple& unitaries)
    : slots_(slots), unitaries_(unitaries) {
  if (slots_.empty()) throw ConfigError("evaluation needs at least one slot");
  n_ = slots_.front().n();
  m_ = slots_.front().m();
  for (const auto& s : slots_)
    if (s.n() != n_ || s.m() != m_) throw ConfigError("slot tuples have inconsistent shapes");
  if (unitaries_.count() > 0 && unitaries_.n() != n_)
    throw ConfigError("unitaries have dimension " + std::to_string(unitaries_.n()) + ", expected " +
                      std::to_string(n_));
  const std::size_t ns = slots_.size() * static_cast<std::size_t>(m_);
  cache_.resize(2 * ns);
  cached_.assign(2 * ns, false);
  res_cache_.resize(2 * ns);
  res_cached_.assign(2 * ns, false);
  identity_ = Matrix::Identity(n_, n_);
  extern_inverse_.resize(static_cast<std::size_t>(unitaries_.count()));
}

void WordEvaluator::check(const Letter& l) const {
  if (l.kind == LetterKind::Extern) {
    if (l.index >= unitaries_.count())
      throw ConfigError("extern unitary v" + std::to_string(l.index + 1) + " is out of range (" +
                        std::to_string(unitaries_.count()) + " supplied)");
    return;
  }
  if (l.index >= m_)
    throw ConfigError("letter " + to_string(l) + " is out of range (m = " + std::to_string(m_) + ")");
  if (l.slot >= static_cast<int>(slots_.size()))
    throw ConfigError("letter " + to_string(l) + " reads slot " + std::to_string(l.slot + 1) +
                      " but only " + std::to_string(slots_.size()) + " slots were supplied");
}

const Matrix& WordEvaluator::resolvent(int index, int slot, int power) {
  const std::size_t key = (static_cast<std::size_t>(slot) * m_ + index) * 2 + (power > 0 ? 0 : 1);
  if (!res_cached_[key]) {
    const Matrix& x = slots_[static_cast<std::size_t>(slot)][index];
    const Complex shift = power > 0 ? Complex(0.0, -4.0) : Complex(0.0, 4.0);
    res_cache_[key] = (x + shift * identity_).partialPivLu().inverse();
    res_cached_[key] = true;
  }
  return res_cache_[key];
}

const Matrix& WordEvaluator::letter(const Letter& l) {
  check(l);
  switch (l.kind) {
    case LetterKind::SelfAdjoint:
      return slots_[static_cast<std::size_t>(l.slot)][l.index];
    case LetterKind::Extern: {
      if (l.power == 1) return unitaries_[l.index];
      auto& inv = extern_inverse_[static_cast<std::size_t>(l.index)];
      if (inv.size() == 0) inv = unitaries_[l.index].adjoint();
      return inv;
    }
    case LetterKind::Cayley:
      break;
  }
  const std::size_t key = (static_cast<std::size_t>(l.slot) * m_ + l.index) * 2 + (l.power > 0 ? 0 : 1);
  if (!cached_[key]) {
    // u = 1 + 8i (X - 4i)^{-1},  u^{-1} = 1 - 8i (X + 4i)^{-1}
    const Matrix& r = resolvent(l.index, l.slot, l.power);
    const Complex c = l.power > 0 ? Complex(0.0, 8.0) : Complex(0.0, -8.0);
    cache_[key] = identity_ + c * r;
    cached_[key] = true;
  }
  return cache_[key];
}

Matrix WordEvaluator::eval(const Word& w) {
  if (w.empty()) return identity_;
  Matrix acc = letter(w.front());
  for (std::size_t i = 1; i < w.size(); ++i) acc = acc * letter(w[i]);
  return acc;
}

Matrix WordEvaluator::eval(const NCPolynomial& p) {
  Matrix acc = Matrix::Zero(n_, n_);
  for (const auto& t : p.terms()) acc += t.coeff * eval(t.word);
  return acc;
}

Matrix eval(const NCPolynomial& p, const HermitianTuple& x, const UnitaryTuple& u) {
  return eval(p, std::span<const HermitianTuple>(&x, 1), u);
}

Matrix eval(const NCPolynomial& p, std::span<const HermitianTuple> slots, const UnitaryTuple& u) {
  WordEvaluator ev(slots, u);
  return ev.eval(p);
}

TensorPolynomial free_difference_quotient(const NCPolynomial& p, LetterRef i) {
  std::vector<TensorTerm> out;
  for (const auto& t : p.terms())
    for (std::size_t q = 0; q < t.word.size(); ++q)
      if (matches(t.word[q], i))
        out.push_back(TensorTerm{t.coeff, slice(t.word, 0, q), slice(t.word, q + 1, t.word.size())});
  return TensorPolynomial(std::move(out));
}

NCPolynomial cyclic_gradient(const NCPolynomial& p, LetterRef i) {
  std::vector<Term> out;
  for (const auto& t : p.terms())
    for (std::size_t q = 0; q < t.word.size(); ++q)
      if (matches(t.word[q], i))
        out.push_back(Term{t.coeff, concat(slice(t.word, q + 1, t.word.size()), slice(t.word, 0, q))});
  return NCPolynomial(std::move(out), p.max_degree());
}

Complex bitrace(const TensorPolynomial& tp, const HermitianTuple& x, const UnitaryTuple& u) {
  return bitrace(tp, std::span<const HermitianTuple>(&x, 1), u);
}

Complex bitrace(const TensorPolynomial& tp, std::span<const HermitianTuple> slots, const UnitaryTuple& u) {
  WordEvaluator ev(slots, u);
  std::map<Word, Complex> traces;
  auto tr = [&](const Word& w) {
    auto it = traces.find(w);
    if (it != traces.end()) return it->second;
    const Complex v = tau(ev.eval(w));
    traces.emplace(w, v);
    return v;
  };
  Complex s(0.0, 0.0);
  for (const auto& t : tp.terms()) s += t.coeff * tr(t.left) * tr(t.right);
  return s;
}

}  // namespace mlap

#pragma once

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "mlap/rng.hpp"

namespace mlap {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXd;

/// Normalized trace (1/N) Tr.
inline Complex tau(const Matrix& a) { return a.trace() / static_cast<double>(a.rows()); }

/// (1/N) Re Tr(a b) without forming the product.
double tau_product_re(const Matrix& a, const Matrix& b);

bool is_hermitian(const Matrix& a, double rel_tol = 1e-12);

/// m-tuple of N x N Hermitian matrices.
///
/// Mutable element access is provided for the integrators; every public
/// operation of the library returns tuples that satisfy the Hermitian
/// invariant, and `hermitianize()` restores it after in-place arithmetic.
class HermitianTuple {
 public:
  HermitianTuple() = default;
  HermitianTuple(int n, int m);
  explicit HermitianTuple(std::vector<Matrix> mats);

  static HermitianTuple zeros(int n, int m) { return HermitianTuple(n, m); }
  static HermitianTuple identity(int n, int m);

  int n() const { return n_; }
  int m() const { return static_cast<int>(mats_.size()); }
  bool empty() const { return mats_.empty(); }

  const Matrix& operator[](int k) const { return mats_[static_cast<std::size_t>(k)]; }
  Matrix& operator[](int k) { return mats_[static_cast<std::size_t>(k)]; }
  const std::vector<Matrix>& matrices() const { return mats_; }

  bool is_hermitian(double rel_tol = 1e-12) const;
  void hermitianize();
  void set_zero();

  HermitianTuple& operator+=(const HermitianTuple& o);
  HermitianTuple& operator-=(const HermitianTuple& o);
  HermitianTuple& operator*=(double s);
  /// this += s * o
  HermitianTuple& axpy(double s, const HermitianTuple& o);

  friend HermitianTuple operator+(HermitianTuple a, const HermitianTuple& b) { return a += b; }
  friend HermitianTuple operator-(HermitianTuple a, const HermitianTuple& b) { return a -= b; }
  friend HermitianTuple operator*(double s, HermitianTuple a) { return a *= s; }
  friend HermitianTuple operator*(HermitianTuple a, double s) { return a *= s; }
  friend HermitianTuple operator-(HermitianTuple a) { return a *= -1.0; }

 private:
  int n_ = 0;
  std::vector<Matrix> mats_;
};

/// Real coordinates of a tuple: d = N^2 m values.
struct RealCoords {
  Vector values;
  int dim() const { return static_cast<int>(values.size()); }
};

/// Unitary matrices used as fixed letters (and Cayley transforms).
class UnitaryTuple {
 public:
  UnitaryTuple() = default;
  explicit UnitaryTuple(std::vector<Matrix> mats, double tol = 1e-10);

  int count() const { return static_cast<int>(mats_.size()); }
  int n() const { return mats_.empty() ? 0 : static_cast<int>(mats_.front().rows()); }
  const Matrix& operator[](int k) const { return mats_[static_cast<std::size_t>(k)]; }

 private:
  std::vector<Matrix> mats_;
};

/// Increment B_{t+dt} - B_t of a Hermitian Brownian motion: diagonal entries
/// N(0, dt), off-diagonal real and imaginary parts N(0, dt/2) each, so that
/// E Tr(M^2) = N^2 dt.
HermitianTuple sample_increment(int n, int m, double dt, RngStream& rng);

/// Increment of the normalized motion H = B / sqrt(N); E tau(M^2) = dt.
HermitianTuple sample_normalized_increment(int n, int m, double dt, RngStream& rng);

/// Isometric embedding into R^{N^2 m}: per matrix the diagonal, then
/// sqrt(2) Re and sqrt(2) Im of the strict upper triangle (row-major).
RealCoords real_embedding(const HermitianTuple& x);
HermitianTuple from_real(const RealCoords& r, int n, int m);

/// Embedding scaled by 1/sqrt(N): Euclidean norm equals hs_norm2, so the
/// Euclidean gradient in these coordinates is the gradient for the
/// (1/N) Tr inner product.
RealCoords tau_coords(const HermitianTuple& x);
HermitianTuple from_tau_coords(const RealCoords& r, int n, int m);

/// u(X) = (X + 4i)(X - 4i)^{-1}.
Matrix cayley(const Matrix& x);
/// 4i (u + 1)(u - 1)^{-1}; inverse of `cayley` on unitaries without eigenvalue 1.
Matrix cayley_inverse(const Matrix& u);

/// sum_k (1/N) Tr(x_k^2).
double hs_norm2(const HermitianTuple& x);
/// sum_k (1/N) Re Tr(x_k y_k).
double hs_inner(const HermitianTuple& x, const HermitianTuple& y);

/// Largest absolute eigenvalue.
double operator_norm(const Matrix& a);

}  // namespace mlap

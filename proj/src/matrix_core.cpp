#include "mlap/matrix_core.hpp"

#include <cmath>
#include <string>

#include "mlap/errors.hpp"

namespace mlap {

namespace {

constexpr Complex kFourI(0.0, 4.0);

void check_dims(int n, int m) {
  if (n < 1) throw ConfigError("matrix dimension must be >= 1, got " + std::to_string(n), "n");
  if (m < 1) throw ConfigError("matrix count must be >= 1, got " + std::to_string(m), "m");
}

void require_same_shape(const HermitianTuple& a, const HermitianTuple& b) {
  if (a.n() != b.n() || a.m() != b.m())
    throw ConfigError("tuple shape mismatch (" + std::to_string(a.n()) + "x" +
                      std::to_string(a.m()) + " vs " + std::to_string(b.n()) + "x" +
                      std::to_string(b.m()) + ")");
}

void fill_gaussian_hermitian(Matrix& a, double diag_sd, double off_sd, RngStream& rng) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = Complex(diag_sd * rng.normal(), 0.0);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double re = off_sd * rng.normal();
      const double im = off_sd * rng.normal();
      a(i, j) = Complex(re, im);
      a(j, i) = Complex(re, -im);
    }
  }
}

}  // namespace

double tau_product_re(const Matrix& a, const Matrix& b) {
  // Re Tr(ab) = sum_ij Re(a_ij b_ji)
  return (a.array() * b.transpose().array()).real().sum() / static_cast<double>(a.rows());
}

bool is_hermitian(const Matrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(1.0, a.norm());
  return (a - a.adjoint()).norm() <= rel_tol * scale;
}

HermitianTuple::HermitianTuple(int n, int m) : n_(n) {
  check_dims(n, m);
  mats_.assign(static_cast<std::size_t>(m), Matrix::Zero(n, n));
}

HermitianTuple::HermitianTuple(std::vector<Matrix> mats) : mats_(std::move(mats)) {
  if (mats_.empty()) throw ConfigError("tuple must hold at least one matrix", "m");
  n_ = static_cast<int>(mats_.front().rows());
  check_dims(n_, m());
  for (std::size_t k = 0; k < mats_.size(); ++k) {
    if (mats_[k].rows() != n_ || mats_[k].cols() != n_)
      throw ConfigError("matrix " + std::to_string(k) + " is not " + std::to_string(n_) + "x" +
                        std::to_string(n_));
    if (!mlap::is_hermitian(mats_[k]))
      throw ConfigError("matrix " + std::to_string(k) + " is not Hermitian");
  }
}

HermitianTuple HermitianTuple::identity(int n, int m) {
  HermitianTuple t(n, m);
  for (auto& a : t.mats_) a.setIdentity();
  return t;
}

bool HermitianTuple::is_hermitian(double rel_tol) const {
  for (const auto& a : mats_)
    if (!mlap::is_hermitian(a, rel_tol)) return false;
  return true;
}

void HermitianTuple::hermitianize() {
  for (auto& a : mats_) a = (0.5 * (a + a.adjoint())).eval();
}

void HermitianTuple::set_zero() {
  for (auto& a : mats_) a.setZero();
}

HermitianTuple& HermitianTuple::operator+=(const HermitianTuple& o) {
  require_same_shape(*this, o);
  for (std::size_t k = 0; k < mats_.size(); ++k) mats_[k] += o.mats_[k];
  return *this;
}

HermitianTuple& HermitianTuple::operator-=(const HermitianTuple& o) {
  require_same_shape(*this, o);
  for (std::size_t k = 0; k < mats_.size(); ++k) mats_[k] -= o.mats_[k];
  return *this;
}

HermitianTuple& HermitianTuple::operator*=(double s) {
  for (auto& a : mats_) a *= s;
  return *this;
}

HermitianTuple& HermitianTuple::axpy(double s, const HermitianTuple& o) {
  require_same_shape(*this, o);
  for (std::size_t k = 0; k < mats_.size(); ++k) mats_[k] += s * o.mats_[k];
  return *this;
}

UnitaryTuple::UnitaryTuple(std::vector<Matrix> mats, double tol) : mats_(std::move(mats)) {
  for (std::size_t k = 0; k < mats_.size(); ++k) {
    const Matrix& u = mats_[k];
    if (u.rows() != u.cols() || u.rows() != mats_.front().rows())
      throw ConfigError("unitary " + std::to_string(k) + " has inconsistent shape");
    const Matrix e = u * u.adjoint() - Matrix::Identity(u.rows(), u.cols());
    if (e.norm() > tol * std::sqrt(static_cast<double>(u.rows())))
      throw ConfigError("matrix " + std::to_string(k) + " is not unitary");
  }
}

HermitianTuple sample_increment(int n, int m, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive", "dt");
  HermitianTuple t(n, m);
  const double diag_sd = std::sqrt(dt);
  const double off_sd = std::sqrt(dt / 2.0);
  for (int k = 0; k < m; ++k) fill_gaussian_hermitian(t[k], diag_sd, off_sd, rng);
  return t;
}

HermitianTuple sample_normalized_increment(int n, int m, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw ConfigError("time step must be positive", "dt");
  HermitianTuple t(n, m);
  const double diag_sd = std::sqrt(dt / n);
  const double off_sd = std::sqrt(dt / (2.0 * n));
  for (int k = 0; k < m; ++k) fill_gaussian_hermitian(t[k], diag_sd, off_sd, rng);
  return t;
}

RealCoords real_embedding(const HermitianTuple& x) {
  const int n = x.n();
  RealCoords r;
  r.values.resize(static_cast<Eigen::Index>(n) * n * x.m());
  const double s2 = std::sqrt(2.0);
  Eigen::Index pos = 0;
  for (int k = 0; k < x.m(); ++k) {
    const Matrix& a = x[k];
    for (int i = 0; i < n; ++i) r.values[pos++] = a(i, i).real();
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        r.values[pos++] = s2 * a(i, j).real();
        r.values[pos++] = s2 * a(i, j).imag();
      }
  }
  return r;
}

HermitianTuple from_real(const RealCoords& r, int n, int m) {
  check_dims(n, m);
  const Eigen::Index expected = static_cast<Eigen::Index>(n) * n * m;
  if (r.values.size() != expected)
    throw ConfigError("coordinate vector has length " + std::to_string(r.values.size()) +
                      ", expected " + std::to_string(expected));
  HermitianTuple x(n, m);
  const double is2 = 1.0 / std::sqrt(2.0);
  Eigen::Index pos = 0;
  for (int k = 0; k < m; ++k) {
    Matrix& a = x[k];
    for (int i = 0; i < n; ++i) a(i, i) = r.values[pos++];
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        const double re = is2 * r.values[pos++];
        const double im = is2 * r.values[pos++];
        a(i, j) = Complex(re, im);
        a(j, i) = Complex(re, -im);
      }
  }
  return x;
}

RealCoords tau_coords(const HermitianTuple& x) {
  RealCoords r = real_embedding(x);
  r.values /= std::sqrt(static_cast<double>(x.n()));
  return r;
}

HermitianTuple from_tau_coords(const RealCoords& r, int n, int m) {
  RealCoords s{r.values * std::sqrt(static_cast<double>(n))};
  return from_real(s, n, m);
}

Matrix cayley(const Matrix& x) {
  const auto n = x.rows();
  const Matrix id = Matrix::Identity(n, n);
  // (X + 4i)(X - 4i)^{-1}; the two factors commute.
  return (x - kFourI * id).partialPivLu().solve(x + kFourI * id);
}

Matrix cayley_inverse(const Matrix& u) {
  const auto n = u.rows();
  const Matrix id = Matrix::Identity(n, n);
  return kFourI * (u - id).partialPivLu().solve(u + id);
}

double hs_norm2(const HermitianTuple& x) {
  double s = 0.0;
  for (const auto& a : x.matrices()) s += a.squaredNorm();
  return s / static_cast<double>(std::max(1, x.n()));
}

double hs_inner(const HermitianTuple& x, const HermitianTuple& y) {
  require_same_shape(x, y);
  double s = 0.0;
  for (int k = 0; k < x.m(); ++k) s += (x[k].array() * y[k].conjugate().array()).real().sum();
  return s / static_cast<double>(x.n());
}

double operator_norm(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  return std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
}

}  // namespace mlap

#pragma once

// Fixed-size complex matrices and quaternions used throughout the library.
//
// Everything here is a value type; the only sizes that occur are 2 (SL(2,C)
// holonomies of the CMC family) and 4 (SL(4,C) holonomies of the constrained
// Willmore family).

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cmc {

using cplx = std::complex<double>;
inline constexpr cplx I_unit{0.0, 1.0};
inline constexpr double kPi = 3.14159265358979323846;

/// Library-wide error. `what()` carries the module context.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical tolerances shared by all modules. Defaults are the values the
/// operations are specified against; callers may tighten or loosen them.
struct Tolerances {
  double unit_norm = 1e-12;          // |f| = 1 on immersion grids
  double sl_det = 1e-9;              // |det - 1| of SL(n) holonomies (relative)
  double eigen_residual = 1e-10;     // ||Mv - ev|| / ||M||
  double flatness_threshold = 1e-4;  // parallel_frame refuses above this
  double holonomy_step = 1e-7;       // halving-step disagreement of holonomy
  double dlambda_rel = 1e-6;         // Richardson self-consistency
  double unitary = 1e-6;             // sym_s3 unitarity of the Sym product
  double branch_order_margin = 0.25; // slope rounding margin
  double newton_residual = 1e-9;     // relative |D| at accepted zeros
  double reality = 1e-6;             // q -> conj(q)^-1 pairing
  double identity_holonomy = 1e-5;   // ||H -+ I|| flag
  double s2 = 1e-10;                 // S^2 = -1
  double sphere_contract = 1e-5;     // tangency / H-match of the CGM
};

// ---------------------------------------------------------------------------
// Quaternion

struct Quaternion {
  double w = 0, x = 0, y = 0, z = 0;

  constexpr Quaternion() = default;
  constexpr Quaternion(double w_, double x_, double y_, double z_) : w(w_), x(x_), y(y_), z(z_) {}

  static constexpr Quaternion real(double a) { return {a, 0, 0, 0}; }
  static constexpr Quaternion i() { return {0, 1, 0, 0}; }
  static constexpr Quaternion j() { return {0, 0, 1, 0}; }
  static constexpr Quaternion k() { return {0, 0, 0, 1}; }

  constexpr double norm2() const { return w * w + x * x + y * y + z * z; }
  double norm() const { return std::sqrt(norm2()); }
  constexpr Quaternion conj() const { return {w, -x, -y, -z}; }
  Quaternion inverse() const {
    const double n2 = norm2();
    if (n2 == 0.0) throw Error("quaternion: inverse of zero");
    return {w / n2, -x / n2, -y / n2, -z / n2};
  }
  constexpr Quaternion imag() const { return {0, x, y, z}; }

  constexpr Quaternion& operator+=(const Quaternion& o) { w += o.w; x += o.x; y += o.y; z += o.z; return *this; }
  constexpr Quaternion& operator-=(const Quaternion& o) { w -= o.w; x -= o.x; y -= o.y; z -= o.z; return *this; }
  constexpr Quaternion& operator*=(double s) { w *= s; x *= s; y *= s; z *= s; return *this; }
};

constexpr Quaternion operator+(Quaternion a, const Quaternion& b) { return a += b; }
constexpr Quaternion operator-(Quaternion a, const Quaternion& b) { return a -= b; }
constexpr Quaternion operator-(const Quaternion& a) { return {-a.w, -a.x, -a.y, -a.z}; }
constexpr Quaternion operator*(Quaternion a, double s) { return a *= s; }
constexpr Quaternion operator*(double s, Quaternion a) { return a *= s; }
constexpr Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}
constexpr double dot(const Quaternion& a, const Quaternion& b) {
  return a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
}

// ---------------------------------------------------------------------------
// Square complex matrices, row-major.

template <std::size_t N>
struct Mat {
  std::array<cplx, N * N> a{};

  static constexpr std::size_t dim = N;

  static Mat identity() {
    Mat m;
    for (std::size_t i = 0; i < N; ++i) m(i, i) = 1.0;
    return m;
  }
  static Mat zero() { return Mat{}; }

  cplx& operator()(std::size_t r, std::size_t c) { return a[r * N + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return a[r * N + c]; }

  Mat& operator+=(const Mat& o) { for (std::size_t k = 0; k < N * N; ++k) a[k] += o.a[k]; return *this; }
  Mat& operator-=(const Mat& o) { for (std::size_t k = 0; k < N * N; ++k) a[k] -= o.a[k]; return *this; }
  Mat& operator*=(cplx s) { for (auto& v : a) v *= s; return *this; }
  Mat& operator*=(double s) { for (auto& v : a) v *= s; return *this; }

  cplx trace() const {
    cplx t = 0.0;
    for (std::size_t i = 0; i < N; ++i) t += (*this)(i, i);
    return t;
  }
  Mat adjoint() const {
    Mat m;
    for (std::size_t r = 0; r < N; ++r)
      for (std::size_t c = 0; c < N; ++c) m(r, c) = std::conj((*this)(c, r));
    return m;
  }
  /// Frobenius norm.
  double norm() const {
    double s = 0;
    for (const auto& v : a) s += std::norm(v);
    return std::sqrt(s);
  }
  double max_abs() const {
    double s = 0;
    for (const auto& v : a) s = std::max(s, std::abs(v));
    return s;
  }
  bool finite() const {
    for (const auto& v : a)
      if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
  }
};

template <std::size_t N> Mat<N> operator+(Mat<N> x, const Mat<N>& y) { return x += y; }
template <std::size_t N> Mat<N> operator-(Mat<N> x, const Mat<N>& y) { return x -= y; }
template <std::size_t N> Mat<N> operator-(Mat<N> x) { x *= -1.0; return x; }
template <std::size_t N> Mat<N> operator*(Mat<N> x, cplx s) { return x *= s; }
template <std::size_t N> Mat<N> operator*(cplx s, Mat<N> x) { return x *= s; }
template <std::size_t N> Mat<N> operator*(Mat<N> x, double s) { return x *= s; }
template <std::size_t N> Mat<N> operator*(double s, Mat<N> x) { return x *= s; }

template <std::size_t N>
Mat<N> operator*(const Mat<N>& x, const Mat<N>& y) {
  Mat<N> m;
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t k = 0; k < N; ++k) {
      const cplx xr = x(r, k);
      for (std::size_t c = 0; c < N; ++c) m(r, c) += xr * y(k, c);
    }
  return m;
}

template <std::size_t N>
std::array<cplx, N> operator*(const Mat<N>& m, const std::array<cplx, N>& v) {
  std::array<cplx, N> out{};
  for (std::size_t r = 0; r < N; ++r)
    for (std::size_t c = 0; c < N; ++c) out[r] += m(r, c) * v[c];
  return out;
}

template <std::size_t N>
Mat<N> commutator(const Mat<N>& x, const Mat<N>& y) { return x * y - y * x; }

using Mat2 = Mat<2>;
using Mat4 = Mat<4>;

cplx det(const Mat2& m);
cplx det(const Mat4& m);
Mat2 inverse(const Mat2& m);
Mat4 inverse(const Mat4& m);

/// Standard embedding H -> C^{2x2}: w + xi + yj + zk -> [[w+xi, y+zi], [-y+zi, w-xi]].
Mat2 quat_to_mat2(const Quaternion& q);
/// Inverse of quat_to_mat2 on its image; `defect` receives the distance of m
/// from the image (zero for matrices of the form above).
Quaternion mat2_to_quat(const Mat2& m, double* defect = nullptr);

/// Matrix exponential by scaling and squaring with a Taylor core.
/// Throws cmc::Error for non-finite input or norms beyond the overflow range.
Mat2 mat_exp(const Mat2& m);
Mat4 mat_exp(const Mat4& m);

/// Principal square root of a Hermitian positive-definite 2x2 matrix.
Mat2 sqrt_hermitian_positive(const Mat2& m);

template <std::size_t N>
struct EigenPair {
  cplx value;
  std::array<cplx, N> vector{};
  double residual = 0;   // ||Mv - ev|| / max(1, ||M||)
  bool reliable = true;  // false when the eigenvalue is (numerically) repeated
};

/// Eigen-decomposition. The 2x2 case is closed form; the 4x4 case roots the
/// characteristic polynomial and recovers vectors by inverse iteration.
/// Eigenvalues are always returned; eigenvectors of clustered eigenvalues
/// are flagged unreliable.
std::vector<EigenPair<2>> eigen(const Mat2& m);
std::vector<EigenPair<4>> eigen(const Mat4& m);

/// Roots of eta^2 - t*eta + d = 0, ordered so that the first root is the one
/// with |root| >= 1 when d = 1 (continuous away from t in [-2, 2]).
std::array<cplx, 2> quadratic_eigenvalues(cplx trace, cplx determinant);

/// Monic degree-4 characteristic polynomial det(eta - M) = sum c_k eta^k.
struct CharPoly4 {
  std::array<cplx, 5> c{};  // c[4] == 1
};

CharPoly4 char_poly(const Mat4& m);
/// |c0 - 1| + |c1 - c3|; zero iff the spectrum is closed under eta -> 1/eta.
double palindromic_defect(const CharPoly4& p);
/// Expand prod (eta - r_k) into a monic polynomial.
CharPoly4 poly_from_roots(const std::array<cplx, 4>& roots);
/// All four roots by Aberth iteration with a Newton polish.
std::array<cplx, 4> poly_roots(const CharPoly4& p);

/// Eigenvalues of a Hermitian 4x4 matrix (cyclic Jacobi), ascending.
std::array<double, 4> hermitian_eigenvalues(const Mat4& h);

}  // namespace cmc

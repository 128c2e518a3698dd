#include "cmc/algebra.hpp"

#include <algorithm>
#include <limits>

namespace cmc {

namespace {

template <std::size_t N>
struct LU {
  Mat<N> lu;
  std::array<std::size_t, N> perm{};
  int sign = 1;
  bool singular = false;
};

template <std::size_t N>
LU<N> lu_decompose(const Mat<N>& m) {
  LU<N> out;
  out.lu = m;
  for (std::size_t i = 0; i < N; ++i) out.perm[i] = i;
  auto& a = out.lu;
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    double best = std::abs(a(col, col));
    for (std::size_t r = col + 1; r < N; ++r)
      if (std::abs(a(r, col)) > best) { best = std::abs(a(r, col)); piv = r; }
    if (best == 0.0) { out.singular = true; continue; }
    if (piv != col) {
      for (std::size_t c = 0; c < N; ++c) std::swap(a(col, c), a(piv, c));
      std::swap(out.perm[col], out.perm[piv]);
      out.sign = -out.sign;
    }
    for (std::size_t r = col + 1; r < N; ++r) {
      const cplx f = a(r, col) / a(col, col);
      a(r, col) = f;
      for (std::size_t c = col + 1; c < N; ++c) a(r, c) -= f * a(col, c);
    }
  }
  return out;
}

template <std::size_t N>
std::array<cplx, N> lu_solve(const LU<N>& f, const std::array<cplx, N>& b) {
  std::array<cplx, N> x{};
  for (std::size_t i = 0; i < N; ++i) x[i] = b[f.perm[i]];
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t k = 0; k < i; ++k) x[i] -= f.lu(i, k) * x[k];
  for (std::size_t ii = N; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < N; ++k) x[ii] -= f.lu(ii, k) * x[k];
    x[ii] /= f.lu(ii, ii);
  }
  return x;
}

template <std::size_t N>
Mat<N> exp_impl(const Mat<N>& m) {
  if (!m.finite()) throw Error("mat_exp: non-finite input");
  const double nrm = m.norm();
  // exp of a matrix with norm beyond ~700 overflows double in general.
  if (nrm > 700.0) throw Error("mat_exp: norm " + std::to_string(nrm) + " exceeds overflow range");
  int squarings = 0;
  if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
  const Mat<N> scaled = m * std::ldexp(1.0, -squarings);
  Mat<N> result = Mat<N>::identity();
  Mat<N> term = Mat<N>::identity();
  for (int k = 1; k <= 24; ++k) {
    term = term * scaled;
    term *= 1.0 / k;
    result += term;
    if (term.norm() < 1e-18 * result.norm()) break;
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  if (!result.finite()) throw Error("mat_exp: overflow");
  return result;
}

template <std::size_t N>
double residual_of(const Mat<N>& m, cplx value, const std::array<cplx, N>& v) {
  const auto mv = m * v;
  double r = 0;
  for (std::size_t i = 0; i < N; ++i) r += std::norm(mv[i] - value * v[i]);
  return std::sqrt(r) / std::max(1.0, m.norm());
}

template <std::size_t N>
void normalize(std::array<cplx, N>& v) {
  double n = 0;
  for (const auto& x : v) n += std::norm(x);
  n = std::sqrt(n);
  if (n > 0)
    for (auto& x : v) x /= n;
}

// Inverse iteration for a known eigenvalue, orthogonalized against `previous`
// vectors of the same cluster.
template <std::size_t N>
std::array<cplx, N> inverse_iteration(const Mat<N>& m, cplx value, std::size_t seed,
                                      const std::vector<std::array<cplx, N>>& previous) {
  const double scale = std::max(1.0, m.norm());
  const cplx shift = value + cplx(1e-11, 0.7e-11) * scale;
  Mat<N> shifted = m;
  for (std::size_t i = 0; i < N; ++i) shifted(i, i) -= shift;
  const auto f = lu_decompose(shifted);
  std::array<cplx, N> v{};
  for (std::size_t i = 0; i < N; ++i)
    v[i] = cplx(1.0 + 0.37 * static_cast<double>((i * 7 + seed * 3) % 5), 0.21 * static_cast<double>((i + seed) % 3));
  v[seed % N] += 3.0;
  auto orthogonalize = [&](std::array<cplx, N>& x) {
    for (const auto& p : previous) {
      cplx d = 0;
      for (std::size_t i = 0; i < N; ++i) d += std::conj(p[i]) * x[i];
      for (std::size_t i = 0; i < N; ++i) x[i] -= d * p[i];
    }
    normalize(x);
  };
  orthogonalize(v);
  if (f.singular) return v;
  for (int it = 0; it < 3; ++it) {
    v = lu_solve(f, v);
    for (const auto& x : v)
      if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return v;
    orthogonalize(v);
  }
  return v;
}

template <std::size_t N>
std::vector<EigenPair<N>> vectors_for(const Mat<N>& m, const std::array<cplx, N>& values) {
  const double scale = std::max(1.0, m.norm());
  const double cluster_tol = 1e-6 * scale;
  std::vector<EigenPair<N>> out;
  std::vector<std::vector<std::array<cplx, N>>> clusters;
  std::vector<int> cluster_of(N, -1);
  std::vector<cplx> cluster_value;
  for (std::size_t k = 0; k < N; ++k) {
    for (std::size_t c = 0; c < cluster_value.size(); ++c)
      if (std::abs(values[k] - cluster_value[c]) < cluster_tol) { cluster_of[k] = static_cast<int>(c); break; }
    if (cluster_of[k] < 0) {
      cluster_of[k] = static_cast<int>(cluster_value.size());
      cluster_value.push_back(values[k]);
      clusters.emplace_back();
    }
  }
  for (std::size_t k = 0; k < N; ++k) {
    auto& prev = clusters[cluster_of[k]];
    EigenPair<N> p;
    p.value = values[k];
    p.vector = inverse_iteration(m, values[k], k, prev);
    p.residual = residual_of(m, values[k], p.vector);
    p.reliable = p.residual < 1e-8;
    prev.push_back(p.vector);
    out.push_back(p);
  }
  return out;
}

}  // namespace

cplx det(const Mat2& m) { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

cplx det(const Mat4& m) {
  const auto f = lu_decompose(m);
  if (f.singular) return 0.0;
  cplx d = static_cast<double>(f.sign);
  for (std::size_t i = 0; i < 4; ++i) d *= f.lu(i, i);
  return d;
}

Mat2 inverse(const Mat2& m) {
  const cplx d = det(m);
  if (d == 0.0) throw Error("inverse: singular 2x2 matrix");
  Mat2 r;
  r(0, 0) = m(1, 1) / d;
  r(0, 1) = -m(0, 1) / d;
  r(1, 0) = -m(1, 0) / d;
  r(1, 1) = m(0, 0) / d;
  return r;
}

Mat4 inverse(const Mat4& m) {
  const auto f = lu_decompose(m);
  if (f.singular) throw Error("inverse: singular 4x4 matrix");
  Mat4 r;
  for (std::size_t c = 0; c < 4; ++c) {
    std::array<cplx, 4> e{};
    e[c] = 1.0;
    const auto x = lu_solve(f, e);
    for (std::size_t i = 0; i < 4; ++i) r(i, c) = x[i];
  }
  return r;
}

Mat2 quat_to_mat2(const Quaternion& q) {
  Mat2 m;
  m(0, 0) = cplx(q.w, q.x);
  m(0, 1) = cplx(q.y, q.z);
  m(1, 0) = cplx(-q.y, q.z);
  m(1, 1) = cplx(q.w, -q.x);
  return m;
}

Quaternion mat2_to_quat(const Mat2& m, double* defect) {
  // Average the two redundant copies of each coordinate.
  const cplx a = 0.5 * (m(0, 0) + std::conj(m(1, 1)));
  const cplx b = 0.5 * (m(0, 1) - std::conj(m(1, 0)));
  const Quaternion q{a.real(), a.imag(), b.real(), b.imag()};
  if (defect) *defect = (quat_to_mat2(q) - m).max_abs();
  return q;
}

Mat2 mat_exp(const Mat2& m) { return exp_impl(m); }
Mat4 mat_exp(const Mat4& m) { return exp_impl(m); }

Mat2 sqrt_hermitian_positive(const Mat2& m) {
  const cplx d = det(m);
  if (d.real() <= 0.0) throw Error("sqrt_hermitian_positive: matrix is not positive definite");
  const double sd = std::sqrt(d.real());
  const double denom = m.trace().real() + 2.0 * sd;
  if (denom <= 0.0) throw Error("sqrt_hermitian_positive: matrix is not positive definite");
  return (m + Mat2::identity() * sd) * (1.0 / std::sqrt(denom));
}

std::array<cplx, 2> quadratic_eigenvalues(cplx trace, cplx determinant) {
  const cplx disc = std::sqrt(trace * trace - 4.0 * determinant);
  cplx big = 0.5 * (trace + disc);
  const cplx alt = 0.5 * (trace - disc);
  if (std::abs(alt) > std::abs(big)) big = alt;
  if (big == 0.0) return {0.0, 0.0};
  return {big, determinant / big};
}

std::vector<EigenPair<2>> eigen(const Mat2& m) {
  const auto ev = quadratic_eigenvalues(m.trace(), det(m));
  const double scale = std::max(1.0, m.norm());
  std::vector<EigenPair<2>> out;
  const bool scalar = std::abs(m(0, 1)) + std::abs(m(1, 0)) + std::abs(m(0, 0) - m(1, 1)) < 1e-14 * scale;
  for (std::size_t k = 0; k < 2; ++k) {
    EigenPair<2> p;
    p.value = ev[k];
    if (scalar) {
      p.vector = {k == 0 ? cplx(1) : cplx(0), k == 0 ? cplx(0) : cplx(1)};
    } else {
      std::array<cplx, 2> v1{m(0, 1), ev[k] - m(0, 0)};
      std::array<cplx, 2> v2{ev[k] - m(1, 1), m(1, 0)};
      const double n1 = std::norm(v1[0]) + std::norm(v1[1]);
      const double n2 = std::norm(v2[0]) + std::norm(v2[1]);
      p.vector = n1 >= n2 ? v1 : v2;
      normalize(p.vector);
    }
    p.residual = residual_of(m, p.value, p.vector);
    p.reliable = scalar || std::abs(ev[0] - ev[1]) > 1e-8 * scale;
    out.push_back(p);
  }
  return out;
}

CharPoly4 char_poly(const Mat4& m) {
  // Faddeev-LeVerrier.
  CharPoly4 p;
  p.c[4] = 1.0;
  Mat4 mk = m;
  p.c[3] = -mk.trace();
  for (int k = 2; k <= 4; ++k) {
    mk = m * (mk + Mat4::identity() * p.c[5 - k]);
    p.c[4 - k] = -mk.trace() / static_cast<double>(k);
  }
  return p;
}

double palindromic_defect(const CharPoly4& p) {
  return std::abs(p.c[0] - 1.0) + std::abs(p.c[1] - p.c[3]);
}

CharPoly4 poly_from_roots(const std::array<cplx, 4>& roots) {
  std::array<cplx, 5> c{1.0, 0, 0, 0, 0};  // ascending, grows as we multiply
  std::size_t deg = 0;
  for (const cplx r : roots) {
    std::array<cplx, 5> n{};
    for (std::size_t k = 0; k <= deg; ++k) {
      n[k + 1] += c[k];
      n[k] -= r * c[k];
    }
    c = n;
    ++deg;
  }
  CharPoly4 p;
  p.c = c;
  return p;
}

std::array<cplx, 4> poly_roots(const CharPoly4& p) {
  auto eval = [&](cplx z, cplx& d) {
    cplx v = p.c[4];
    d = 0;
    for (int k = 3; k >= 0; --k) {
      d = d * z + v;
      v = v * z + p.c[k];
    }
    return v;
  };
  double bound = 0;
  for (int k = 0; k < 4; ++k) bound = std::max(bound, std::pow(std::abs(p.c[k]), 1.0 / (4 - k)));
  bound = std::max(bound, 1e-3);
  std::array<cplx, 4> z;
  for (int k = 0; k < 4; ++k) z[k] = std::polar(bound, 2 * kPi * k / 4 + 0.4);
  for (int it = 0; it < 500; ++it) {
    double change = 0;
    for (int k = 0; k < 4; ++k) {
      cplx d;
      const cplx v = eval(z[k], d);
      if (v == 0.0) continue;
      const cplx ratio = v / d;
      cplx sum = 0;
      for (int j = 0; j < 4; ++j)
        if (j != k) sum += 1.0 / (z[k] - z[j]);
      const cplx step = ratio / (1.0 - ratio * sum);
      if (std::isfinite(step.real()) && std::isfinite(step.imag())) {
        z[k] -= step;
        change = std::max(change, std::abs(step) / std::max(1.0, std::abs(z[k])));
      }
    }
    if (change < 1e-16) break;
  }
  for (auto& r : z) {
    for (int it = 0; it < 3; ++it) {
      cplx d;
      const cplx v = eval(r, d);
      if (d == 0.0) break;
      const cplx nr = r - v / d;
      cplx d2;
      if (std::abs(eval(nr, d2)) < std::abs(v)) r = nr; else break;
    }
  }
  // Multiple roots come back split by ~eps^(1/m); the cluster mean is accurate
  // to working precision. Accept the merge only when the Taylor coefficients
  // of p at the mean confirm the multiplicity.
  double scale = 1.0;
  for (const auto& r : z) scale = std::max(scale, std::abs(r));
  std::array<bool, 4> used{};
  for (int k = 0; k < 4; ++k) {
    if (used[k]) continue;
    std::vector<int> members{k};
    for (int j = k + 1; j < 4; ++j)
      if (!used[j] && std::abs(z[j] - z[k]) < 1e-3 * scale) members.push_back(j);
    if (members.size() < 2) continue;
    cplx mu = 0;
    for (int j : members) mu += z[j];
    mu /= double(members.size());
    auto taylor = [&](cplx at) {
      std::array<cplx, 5> b = p.c;
      for (int i = 0; i < 4; ++i)
        for (int j = 3; j >= i; --j) b[j] += at * b[j + 1];
      return b;
    };
    // The (m-1)-th derivative has a simple root at the multiple root.
    const std::size_t m = members.size();
    for (int it = 0; it < 8; ++it) {
      const auto t = taylor(mu);
      const cplx d = double(m) * t[m];
      if (d == 0.0) break;
      const cplx step = t[m - 1] / d;
      mu -= step;
      if (std::abs(step) < 1e-17 * scale) break;
    }
    const auto b = taylor(mu);
    bool ok = true;
    for (std::size_t j = 0; j < members.size(); ++j)
      if (std::abs(b[j]) > 1e-9 * std::pow(scale, 4.0 - double(j))) ok = false;
    if (!ok) continue;
    for (int j : members) {
      z[j] = mu;
      used[j] = true;
    }
  }
  return z;
}

std::vector<EigenPair<4>> eigen(const Mat4& m) {
  return vectors_for(m, poly_roots(char_poly(m)));
}

std::array<double, 4> hermitian_eigenvalues(const Mat4& h) {
  Mat4 a = h;
  const double scale = std::max(1e-300, a.norm());
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t q = p + 1; q < 4; ++q) off += std::norm(a(p, q));
    if (std::sqrt(off) < 1e-15 * scale) break;
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t q = p + 1; q < 4; ++q) {
        const double mag = std::abs(a(p, q));
        if (mag < 1e-300) continue;
        // Rotate the phase of index q so that a(p,q) becomes real and positive.
        const cplx ph = a(p, q) / mag;
        for (std::size_t r = 0; r < 4; ++r) a(r, q) *= std::conj(ph);
        for (std::size_t c = 0; c < 4; ++c) a(q, c) *= ph;
        const double app = a(p, p).real(), aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * mag);
        const double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = t * c;
        for (std::size_t r = 0; r < 4; ++r) {
          const cplx xp = a(r, p), xq = a(r, q);
          a(r, p) = c * xp - s * xq;
          a(r, q) = s * xp + c * xq;
        }
        for (std::size_t col = 0; col < 4; ++col) {
          const cplx xp = a(p, col), xq = a(q, col);
          a(p, col) = c * xp - s * xq;
          a(q, col) = s * xp + c * xq;
        }
      }
  }
  std::array<double, 4> ev{};
  for (std::size_t i = 0; i < 4; ++i) ev[i] = a(i, i).real();
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace cmc

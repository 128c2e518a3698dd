#pragma once

// Period lattice, periodic grid storage and the discrete calculus on T^2 = C/Gamma.
//
// Sites live at lattice coordinates (s, t) = (i/n1, j/n2), i.e. at the point
// z = s*gamma1 + t*gamma2 of the conformal coordinate.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmc/algebra.hpp"

namespace cmc {

class TorusLattice {
 public:
  TorusLattice() = default;
  TorusLattice(cplx gamma1, cplx gamma2, int n1, int n2);

  cplx gamma1() const { return g1_; }
  cplx gamma2() const { return g2_; }
  int n1() const { return n1_; }
  int n2() const { return n2_; }
  std::size_t sites() const { return std::size_t(n1_) * std::size_t(n2_); }

  std::size_t index(int i, int j) const {
    const int a = ((i % n1_) + n1_) % n1_, b = ((j % n2_) + n2_) % n2_;
    return std::size_t(b) * std::size_t(n1_) + std::size_t(a);
  }
  cplx point(double s, double t) const { return s * g1_ + t * g2_; }
  cplx site(int i, int j) const { return point(double(i) / n1_, double(j) / n2_); }
  /// Lattice coordinates (s, t) of a point z.
  std::pair<double, double> coords(cplx z) const;
  double area() const { return std::abs((std::conj(g1_) * g2_).imag()); }

  // d/dx = jx_s d/ds + jx_t d/dt, d/dy = jy_s d/ds + jy_t d/dt
  double jx_s = 1, jx_t = 0, jy_s = 0, jy_t = 1;

  bool operator==(const TorusLattice& o) const {
    return g1_ == o.g1_ && g2_ == o.g2_ && n1_ == o.n1_ && n2_ == o.n2_;
  }

 private:
  cplx g1_{1.0}, g2_{0.0, 1.0};
  int n1_ = 8, n2_ = 8;
};

template <typename T>
class GridField {
 public:
  GridField() = default;
  GridField(const TorusLattice& lat, std::vector<T> values, bool periodic = true)
      : lat_(lat), v_(std::move(values)), periodic_(periodic) {
    if (v_.size() != lat_.sites()) throw Error("GridField: site count does not match lattice");
  }
  GridField(const TorusLattice& lat, const T& fill, bool periodic = true)
      : lat_(lat), v_(lat.sites(), fill), periodic_(periodic) {}

  /// Sample fn(s, t) at every site.
  template <typename Fn>
  static GridField sample(const TorusLattice& lat, Fn&& fn, bool periodic = true) {
    std::vector<T> v(lat.sites());
    for (int j = 0; j < lat.n2(); ++j)
      for (int i = 0; i < lat.n1(); ++i)
        v[lat.index(i, j)] = fn(double(i) / lat.n1(), double(j) / lat.n2());
    return GridField(lat, std::move(v), periodic);
  }

  const TorusLattice& lattice() const { return lat_; }
  bool periodic() const { return periodic_; }
  const T& operator()(int i, int j) const { return v_[lat_.index(i, j)]; }
  const T& at(std::size_t k) const { return v_[k]; }
  const std::vector<T>& values() const { return v_; }

  template <typename Fn>
  auto map(Fn&& fn) const {
    using U = decltype(fn(v_[0]));
    std::vector<U> out;
    out.reserve(v_.size());
    for (const auto& x : v_) out.push_back(fn(x));
    return GridField<U>(lat_, std::move(out), periodic_);
  }

 private:
  TorusLattice lat_;
  std::vector<T> v_;
  bool periodic_ = true;
};

/// Coefficients of dx and dy.
template <typename T>
struct OneForm {
  GridField<T> dx, dy;

  OneForm() = default;
  OneForm(GridField<T> a, GridField<T> b) : dx(std::move(a)), dy(std::move(b)) {
    if (!(dx.lattice() == dy.lattice())) throw Error("OneForm: lattice mismatch");
  }
  const TorusLattice& lattice() const { return dx.lattice(); }
  /// Evaluate on the tangent vector v = vx + i vy at site k.
  T apply(std::size_t k, cplx v) const { return dx.at(k) * v.real() + dy.at(k) * v.imag(); }
};

enum class DerivativeScheme { FiniteDifference4, Spectral };
enum class Interpolation { Bicubic, Trigonometric };

std::string to_string(DerivativeScheme s);
std::string to_string(Interpolation m);
DerivativeScheme parse_derivative_scheme(const std::string& s);
Interpolation parse_interpolation(const std::string& s);

// Derivative stencils along one lattice direction, in units of 1/period.
// Offsets and weights such that df/ds(i) = sum_k w_k f(i + off_k).
struct Stencil {
  std::vector<int> offset;
  std::vector<double> weight;
};
Stencil derivative_stencil(DerivativeScheme scheme, int n);

// Interpolation weights along one direction at fractional index u.
Stencil interpolation_weights(Interpolation method, int n, double u);

template <typename T>
std::pair<GridField<T>, GridField<T>> partial_derivatives(const GridField<T>& f,
                                                          DerivativeScheme scheme = DerivativeScheme::FiniteDifference4) {
  if (!f.periodic()) throw Error("partial_derivatives: field is not periodic");
  const auto& L = f.lattice();
  const Stencil s1 = derivative_stencil(scheme, L.n1());
  const Stencil s2 = derivative_stencil(scheme, L.n2());
  std::vector<T> dx(L.sites()), dy(L.sites());
  for (int j = 0; j < L.n2(); ++j)
    for (int i = 0; i < L.n1(); ++i) {
      T ds = f(i, j) * 0.0, dt = f(i, j) * 0.0;
      for (std::size_t k = 0; k < s1.offset.size(); ++k) ds += f(i + s1.offset[k], j) * s1.weight[k];
      for (std::size_t k = 0; k < s2.offset.size(); ++k) dt += f(i, j + s2.offset[k]) * s2.weight[k];
      const std::size_t idx = L.index(i, j);
      dx[idx] = ds * L.jx_s + dt * L.jx_t;
      dy[idx] = ds * L.jy_s + dt * L.jy_t;
    }
  return {GridField<T>(L, std::move(dx)), GridField<T>(L, std::move(dy))};
}

template <typename T>
OneForm<T> differential(const GridField<T>& f, DerivativeScheme scheme = DerivativeScheme::FiniteDifference4) {
  auto [a, b] = partial_derivatives(f, scheme);
  return OneForm<T>(std::move(a), std::move(b));
}

/// Value at lattice coordinates (s, t), wrapped periodically.
template <typename T>
T interpolate_st(const GridField<T>& f, double s, double t, Interpolation method = Interpolation::Bicubic) {
  const auto& L = f.lattice();
  const Stencil a = interpolation_weights(method, L.n1(), s * L.n1());
  const Stencil b = interpolation_weights(method, L.n2(), t * L.n2());
  T out = f(0, 0) * 0.0;
  for (std::size_t q = 0; q < b.offset.size(); ++q) {
    T row = f(0, 0) * 0.0;
    for (std::size_t p = 0; p < a.offset.size(); ++p) row += f(a.offset[p], b.offset[q]) * a.weight[p];
    out += row * b.weight[q];
  }
  return out;
}

template <typename T>
T interpolate(const GridField<T>& f, cplx z, Interpolation method = Interpolation::Bicubic) {
  const auto [s, t] = f.lattice().coords(z);
  return interpolate_st(f, s, t, method);
}

/// a∘J with J the rotation ∂x -> ∂y, ∂y -> -∂x.
template <typename T>
OneForm<T> compose_J(const OneForm<T>& a) {
  return OneForm<T>(a.dy, a.dx.map([](const T& v) { return v * -1.0; }));
}

/// Hodge star with *dx = dy, i.e. *a = -a∘J.
template <typename T>
OneForm<T> hodge_star(const OneForm<T>& a) {
  return OneForm<T>(a.dy.map([](const T& v) { return v * -1.0; }), a.dx);
}

/// (1,0) and (0,1) parts: a' = (a - i a∘J)/2, a'' = (a + i a∘J)/2.
template <typename T>
std::pair<OneForm<T>, OneForm<T>> type_split(const OneForm<T>& a) {
  const auto& L = a.lattice();
  std::vector<T> px(L.sites()), py(L.sites()), qx(L.sites()), qy(L.sites());
  for (std::size_t k = 0; k < L.sites(); ++k) {
    const T& x = a.dx.at(k);
    const T& y = a.dy.at(k);
    px[k] = (x - y * I_unit) * 0.5;
    py[k] = (y + x * I_unit) * 0.5;
    qx[k] = (x + y * I_unit) * 0.5;
    qy[k] = (y - x * I_unit) * 0.5;
  }
  return {OneForm<T>(GridField<T>(L, std::move(px)), GridField<T>(L, std::move(py))),
          OneForm<T>(GridField<T>(L, std::move(qx)), GridField<T>(L, std::move(qy)))};
}

/// One elementary loop: the positively oriented boundary of cell (i, j),
/// visiting corners (i,j) -> (i+1,j) -> (i+1,j+1) -> (i,j+1) -> (i,j).
struct Plaquette {
  int i, j;
  std::array<std::pair<int, int>, 4> corners() const {
    return {{{i, j}, {i + 1, j}, {i + 1, j + 1}, {i, j + 1}}};
  }
  static constexpr int segments = 4;
};

std::vector<Plaquette> plaquettes(const TorusLattice& lattice);

// Flattening of field values to real components for IO.
template <typename T> struct Components;
template <> struct Components<double> {
  static constexpr int count = 1;
  static constexpr const char* kind = "real";
  static void put(const double& v, double* out) { out[0] = v; }
  static double get(const double* in) { return in[0]; }
};
template <> struct Components<cplx> {
  static constexpr int count = 2;
  static constexpr const char* kind = "complex";
  static void put(const cplx& v, double* out) { out[0] = v.real(); out[1] = v.imag(); }
  static cplx get(const double* in) { return {in[0], in[1]}; }
};
template <> struct Components<Quaternion> {
  static constexpr int count = 4;
  static constexpr const char* kind = "quaternion";
  static void put(const Quaternion& q, double* out) { out[0] = q.w; out[1] = q.x; out[2] = q.y; out[3] = q.z; }
  static Quaternion get(const double* in) { return {in[0], in[1], in[2], in[3]}; }
};
template <std::size_t N> struct Components<Mat<N>> {
  static constexpr int count = int(2 * N * N);
  static constexpr const char* kind = N == 2 ? "mat2" : "mat4";
  static void put(const Mat<N>& m, double* out) {
    for (std::size_t k = 0; k < N * N; ++k) { out[2 * k] = m.a[k].real(); out[2 * k + 1] = m.a[k].imag(); }
  }
  static Mat<N> get(const double* in) {
    Mat<N> m;
    for (std::size_t k = 0; k < N * N; ++k) m.a[k] = cplx(in[2 * k], in[2 * k + 1]);
    return m;
  }
};

// Raw IO of flattened components; the typed wrappers below check the kind.
struct RawGrid {
  TorusLattice lattice;
  std::string kind;
  int components = 0;
  bool periodic = true;
  std::vector<double> data;  // sites * components, site-major
};

void write_grid_csv(std::ostream& os, const RawGrid& g);
RawGrid read_grid_csv(std::istream& is);
void write_grid_binary(std::ostream& os, const RawGrid& g);
RawGrid read_grid_binary(std::istream& is);

template <typename T>
RawGrid to_raw(const GridField<T>& f) {
  RawGrid g{f.lattice(), Components<T>::kind, Components<T>::count, f.periodic(), {}};
  g.data.resize(f.lattice().sites() * std::size_t(g.components));
  for (std::size_t k = 0; k < f.lattice().sites(); ++k) Components<T>::put(f.at(k), &g.data[k * g.components]);
  return g;
}

template <typename T>
GridField<T> from_raw(const RawGrid& g) {
  if (g.kind != Components<T>::kind || g.components != Components<T>::count)
    throw Error("grid: expected kind " + std::string(Components<T>::kind) + ", found " + g.kind);
  std::vector<T> v(g.lattice.sites());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = Components<T>::get(&g.data[k * g.components]);
  return GridField<T>(g.lattice, std::move(v), g.periodic);
}

/// Sum of values times cell area (midpoint rule on the periodic grid).
template <typename T>
T integrate(const GridField<T>& f) {
  T s = f.at(0) * 0.0;
  for (const auto& v : f.values()) s += v;
  return s * (f.lattice().area() / double(f.lattice().sites()));
}

}  // namespace cmc

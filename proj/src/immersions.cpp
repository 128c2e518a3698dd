#include "cmc/immersions.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cmc {

namespace {

double det3(double a0, double a1, double a2, double b0, double b1, double b2, double c0, double c1, double c2) {
  return a0 * (b1 * c2 - b2 * c1) - a1 * (b0 * c2 - b2 * c0) + a2 * (b0 * c1 - b1 * c0);
}

struct Derivs {
  GridField<Quaternion> fx, fy, fxx, fxy, fyy;
};

Derivs derivs(const ImmersionGrid& f, DerivativeScheme scheme) {
  auto [fx, fy] = partial_derivatives(f.f, scheme);
  auto [fxx, fxy] = partial_derivatives(fx, scheme);
  auto [fyx, fyy] = partial_derivatives(fy, scheme);
  (void)fyx;
  return {std::move(fx), std::move(fy), std::move(fxx), std::move(fxy), std::move(fyy)};
}

}  // namespace

Quaternion cross4(const Quaternion& a, const Quaternion& b, const Quaternion& c) {
  const double A[4] = {a.w, a.x, a.y, a.z}, B[4] = {b.w, b.x, b.y, b.z}, C[4] = {c.w, c.x, c.y, c.z};
  double n[4];
  for (int i = 0; i < 4; ++i) {
    int k[3], m = 0;
    for (int j = 0; j < 4; ++j)
      if (j != i) k[m++] = j;
    const double d = det3(A[k[0]], A[k[1]], A[k[2]], B[k[0]], B[k[1]], B[k[2]], C[k[0]], C[k[1]], C[k[2]]);
    n[i] = (i % 2 == 0) ? d : -d;
  }
  return {n[0], n[1], n[2], n[3]};
}

ImmersionGrid make_immersion(GridField<Quaternion> f, double unit_tol) {
  const auto& L = f.lattice();
  double spread = 0;
  for (int j = 0; j < L.n2(); ++j)
    for (int i = 0; i < L.n1(); ++i) {
      const double dev = std::abs(f(i, j).norm() - 1.0);
      if (!(dev <= unit_tol)) {
        std::ostringstream m;
        m << "immersion: site (" << i << "," << j << ") is off S^3 by " << dev;
        throw Error(m.str());
      }
      spread = std::max(spread, (f(i, j) - f(0, 0)).norm());
    }
  if (spread < 1e-12) throw Error("immersion: grid is constant (not an immersion)");
  return ImmersionGrid{std::move(f)};
}

ImmersionGrid homogeneous_torus(double r, int n1, int n2) {
  if (!(r > 0 && r < 1)) throw Error("homogeneous_torus: r must lie in (0, 1)");
  const double s = std::sqrt(1 - r * r);
  const TorusLattice L(cplx(2 * kPi * r, 0), cplx(0, 2 * kPi * s), n1, n2);
  auto f = GridField<Quaternion>::sample(L, [&](double a, double b) {
    const double u = 2 * kPi * a, v = 2 * kPi * b;  // x/r and y/s
    return Quaternion(r * std::cos(u), r * std::sin(u), s * std::cos(v), s * std::sin(v));
  });
  return make_immersion(std::move(f), 1e-14);
}

namespace {

struct HopfCurve {
  double a;
  int w;
  // p = (cos t, sin t, a cos wt), c = p/|p|
  std::array<double, 3> p(double t) const { return {std::cos(t), std::sin(t), a * std::cos(w * t)}; }
  std::array<double, 3> dp(double t) const { return {-std::sin(t), std::cos(t), -a * w * std::sin(w * t)}; }
  std::array<double, 3> c(double t) const {
    auto v = p(t);
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    return {v[0] / n, v[1] / n, v[2] / n};
  }
  std::array<double, 3> dc(double t) const {
    const auto v = p(t), d = dp(t);
    const double n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2], n = std::sqrt(n2);
    const double pd = v[0] * d[0] + v[1] * d[1] + v[2] * d[2];
    return {d[0] / n - v[0] * pd / (n2 * n), d[1] / n - v[1] * pd / (n2 * n), d[2] / n - v[2] * pd / (n2 * n)};
  }
  double speed(double t) const {
    const auto d = dc(t);
    return std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  }
  // dq/dt = 1/2 (c x c') q
  Quaternion rhs(double t, const Quaternion& q) const {
    const auto u = c(t), d = dc(t);
    const Quaternion v(0, 0.5 * (u[1] * d[2] - u[2] * d[1]), 0.5 * (u[2] * d[0] - u[0] * d[2]),
                       0.5 * (u[0] * d[1] - u[1] * d[0]));
    return v * q;
  }
};

}  // namespace

ImmersionGrid hopf_torus(double a, int w, int n1, int n2) {
  if (!std::isfinite(a) || w < 1) throw Error("hopf_torus: need finite amplitude and wave number >= 1");
  const HopfCurve cv{a, w};
  // arclength sigma(theta) from the Fourier series of the speed
  const int M = 4096;
  std::vector<double> sp(M);
  double mean = 0;
  for (int m = 0; m < M; ++m) mean += (sp[m] = cv.speed(2 * kPi * m / M));
  mean /= M;
  std::vector<double> ca, cb;
  for (int k = 1; k < M / 2; ++k) {
    double x = 0, y = 0;
    for (int m = 0; m < M; ++m) {
      const double ang = 2 * kPi * double((std::int64_t(k) * m) % M) / M;
      x += sp[m] * std::cos(ang);
      y += sp[m] * std::sin(ang);
    }
    x *= 2.0 / M;
    y *= 2.0 / M;
    if (std::abs(x) + std::abs(y) < 1e-17 * mean && k > 8) break;
    ca.push_back(x);
    cb.push_back(y);
  }
  auto sigma = [&](double t) {
    double s = mean * t;
    for (std::size_t k = 0; k < ca.size(); ++k) {
      const double kk = double(k + 1);
      s += (ca[k] * std::sin(kk * t) - cb[k] * (std::cos(kk * t) - 1)) / kk;
    }
    return s;
  };
  const double len = 2 * kPi * mean;
  std::vector<double> theta(n1 + 1);
  for (int i = 0; i <= n1; ++i) {
    const double target = len * i / n1;
    double t = target / mean;
    for (int it = 0; it < 50; ++it) {
      const double dt = (sigma(t) - target) / cv.speed(t);
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    theta[i] = t;
  }
  // horizontal lift, rotating i onto c(0)
  const auto c0 = cv.c(0);
  Quaternion q(1 + c0[0], 0, -c0[2], c0[1]);  // 1 + i.c0 + i x c0
  q = q * (1.0 / q.norm());
  std::vector<Quaternion> lift(n1 + 1);
  lift[0] = q;
  const int sub = 256;
  for (int i = 1; i <= n1; ++i) {
    const double h = (theta[i] - theta[i - 1]) / sub;
    double t = theta[i - 1];
    for (int k = 0; k < sub; ++k, t += h) {
      const Quaternion k1 = cv.rhs(t, q), k2 = cv.rhs(t + h / 2, q + k1 * (h / 2)),
                       k3 = cv.rhs(t + h / 2, q + k2 * (h / 2)), k4 = cv.rhs(t + h, q + k3 * h);
      q = q + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6);
      q = q * (1.0 / q.norm());
    }
    lift[i] = q;
  }
  const Quaternion e = lift[0].conj() * lift[n1];
  if (std::abs(e.y) + std::abs(e.z) > 1e-9) throw Error("hopf_torus: lift is not horizontal to tolerance");
  const double Theta = std::atan2(e.x, e.w);
  const TorusLattice L(cplx(len / 2, -Theta), cplx(0, 2 * kPi), n1, n2);
  std::vector<Quaternion> f(L.sites());
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      const double y = -Theta * i / n1 + 2 * kPi * j / n2;
      f[L.index(i, j)] = lift[i] * Quaternion(std::cos(y), std::sin(y), 0, 0);
    }
  return make_immersion(GridField<Quaternion>(L, std::move(f)), 1e-13);
}

double homogeneous_mean_curvature(double r) {
  const double s = std::sqrt(1 - r * r);
  return 0.5 * (s / r - r / s);
}

GridField<Quaternion> unit_normal(const ImmersionGrid& f, DerivativeScheme scheme) {
  auto [fx, fy] = partial_derivatives(f.f, scheme);
  std::vector<Quaternion> n(f.lattice().sites());
  for (std::size_t k = 0; k < n.size(); ++k) {
    const Quaternion c = cross4(f.f.at(k), fx.at(k), fy.at(k));
    const double len = c.norm();
    if (!(len > 1e-14)) throw Error("unit_normal: degenerate tangent plane at site " + std::to_string(k));
    n[k] = c * (1.0 / len);
  }
  return GridField<Quaternion>(f.lattice(), std::move(n));
}

ImmersionGrid perturb(const ImmersionGrid& f, double amplitude, std::pair<int, int> mode, DerivativeScheme scheme) {
  if (amplitude == 0.0) return f;
  const auto N = unit_normal(f, scheme);
  const auto& L = f.lattice();
  std::vector<Quaternion> out(L.sites());
  for (int j = 0; j < L.n2(); ++j)
    for (int i = 0; i < L.n1(); ++i) {
      const double s = double(i) / L.n1(), t = double(j) / L.n2();
      const double bump = amplitude * std::sin(2 * kPi * (mode.first * s + mode.second * t));
      const Quaternion q = f.f(i, j) + N(i, j) * bump;
      out[L.index(i, j)] = q * (1.0 / q.norm());
    }
  auto g = make_immersion(GridField<Quaternion>(L, std::move(out)), 1e-13);
  // reject folds: the tangent plane must stay non-degenerate
  (void)unit_normal(g, scheme);
  return g;
}

GeometryReport geometry(const ImmersionGrid& f, DerivativeScheme scheme) {
  const auto& L = f.lattice();
  const auto d = derivs(f, scheme);
  const std::size_t n = L.sites();
  std::vector<double> E(n), H(n);
  std::vector<Quaternion> N(n);
  GeometryReport rep;
  double sum_speed2 = 0, max_F = 0, max_dl = 0, mean_speed = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Quaternion &p = f.f.at(k), &fx = d.fx.at(k), &fy = d.fy.at(k);
    const double g11 = dot(fx, fx), g12 = dot(fx, fy), g22 = dot(fy, fy);
    const double dg = g11 * g22 - g12 * g12;
    if (!(dg > 1e-14 * std::max(1.0, g11 * g22))) throw Error("geometry: degenerate metric at site " + std::to_string(k));
    Quaternion nu = cross4(p, fx, fy);
    nu = nu * (1.0 / nu.norm());
    const double b11 = dot(d.fxx.at(k), nu), b12 = dot(d.fxy.at(k), nu), b22 = dot(d.fyy.at(k), nu);
    E[k] = (g11 + g22) / 4;
    H[k] = (g11 * b22 - 2 * g12 * b12 + g22 * b11) / (2 * dg);
    N[k] = nu;
    rep.normal_defect = std::max(rep.normal_defect, std::abs(dot(nu, p)) + std::abs(dot(nu, fx)) + std::abs(dot(nu, fy)));
    sum_speed2 += g11 + g22;
    mean_speed += std::sqrt(g11) + std::sqrt(g22);
    max_F = std::max(max_F, std::abs(g12));
    max_dl = std::max(max_dl, std::abs(std::sqrt(g11) - std::sqrt(g22)));
  }
  rep.conformality_defect = max_F / (sum_speed2 / (2.0 * n)) + max_dl / (mean_speed / (2.0 * n));
  rep.H_min = *std::min_element(H.begin(), H.end());
  rep.H_max = *std::max_element(H.begin(), H.end());
  rep.E_min = *std::min_element(E.begin(), E.end());
  rep.E_max = *std::max_element(E.begin(), E.end());
  double s = 0;
  for (double h : H) s += h;
  rep.H_mean = s / double(n);
  rep.E = GridField<double>(L, std::move(E));
  rep.H = GridField<double>(L, std::move(H));
  rep.N = GridField<Quaternion>(L, std::move(N));
  return rep;
}

MaurerCartan maurer_cartan(const ImmersionGrid& f, DerivativeScheme scheme) {
  auto [fx, fy] = partial_derivatives(f.f, scheme);
  const auto& L = f.lattice();
  std::vector<Mat2> ax(L.sites()), ay(L.sites());
  MaurerCartan mc;
  for (std::size_t k = 0; k < L.sites(); ++k) {
    const Quaternion fb = f.f.at(k).conj();
    const Quaternion qx = fb * fx.at(k), qy = fb * fy.at(k);
    mc.real_part = std::max({mc.real_part, std::abs(qx.w), std::abs(qy.w)});
    ax[k] = quat_to_mat2(qx.imag());
    ay[k] = quat_to_mat2(qy.imag());
  }
  mc.alpha = OneForm<Mat2>(GridField<Mat2>(L, std::move(ax)), GridField<Mat2>(L, std::move(ay)));
  return mc;
}

double maurer_cartan_residual(const OneForm<Mat2>& a, DerivativeScheme scheme) {
  auto [axx, axy] = partial_derivatives(a.dx, scheme);
  auto [ayx, ayy] = partial_derivatives(a.dy, scheme);
  (void)axx;
  (void)ayy;
  double r = 0;
  for (std::size_t k = 0; k < a.lattice().sites(); ++k)
    r = std::max(r, (ayx.at(k) - axy.at(k) + commutator(a.dx.at(k), a.dy.at(k))).norm());
  return r;
}

void write_immersion_csv(std::ostream& os, const ImmersionGrid& f) {
  const auto& L = f.lattice();
  os << std::setprecision(17);
  os << "# lattice," << L.gamma1().real() << ',' << L.gamma1().imag() << ',' << L.gamma2().real() << ','
     << L.gamma2().imag() << ',' << L.n1() << ',' << L.n2() << '\n';
  os << "s,t,w,x,y,z\n";
  for (int j = 0; j < L.n2(); ++j)
    for (int i = 0; i < L.n1(); ++i) {
      const Quaternion& q = f.f(i, j);
      os << double(i) / L.n1() << ',' << double(j) / L.n2() << ',' << q.w << ',' << q.x << ',' << q.y << ',' << q.z
         << '\n';
    }
}

ImmersionGrid read_immersion_csv(std::istream& is, double unit_tol) {
  std::string line;
  auto fields = [](const std::string& l) {
    std::vector<double> v;
    std::stringstream ss(l);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error("immersion csv: cannot parse '" + cell + "'");
      }
    }
    return v;
  };
  if (!std::getline(is, line) || line.rfind("# lattice,", 0) != 0) throw Error("immersion csv: missing lattice line");
  const auto lat = fields(line.substr(10));
  if (lat.size() != 6) throw Error("immersion csv: malformed lattice line");
  const TorusLattice L(cplx(lat[0], lat[1]), cplx(lat[2], lat[3]), int(lat[4]), int(lat[5]));
  if (!std::getline(is, line)) throw Error("immersion csv: missing header");
  std::vector<Quaternion> v(L.sites());
  std::vector<char> seen(L.sites(), 0);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto r = fields(line);
    if (r.size() != 6) throw Error("immersion csv: row " + std::to_string(rows + 1) + " needs 6 columns");
    const double si = r[0] * L.n1(), tj = r[1] * L.n2();
    const double ri = std::round(si), rj = std::round(tj);
    if (std::abs(si - ri) > 1e-6 || std::abs(tj - rj) > 1e-6)
      throw Error("immersion csv: row " + std::to_string(rows + 1) + " is not on the uniform grid");
    if (ri < 0 || rj < 0 || ri >= L.n1() || rj >= L.n2()) throw Error("immersion csv: site out of range");
    const std::size_t k = L.index(int(ri), int(rj));
    if (seen[k]) throw Error("immersion csv: duplicate site");
    seen[k] = 1;
    v[k] = Quaternion(r[2], r[3], r[4], r[5]);
    ++rows;
  }
  if (rows != L.sites())
    throw Error("immersion csv: expected " + std::to_string(L.sites()) + " rows, found " + std::to_string(rows));
  return make_immersion(GridField<Quaternion>(L, std::move(v)), unit_tol);
}

ImmersionGrid load_immersion_csv(const std::string& path, double unit_tol) {
  std::ifstream in(path);
  if (!in) throw Error("immersion csv: cannot open " + path);
  try {
    return read_immersion_csv(in, unit_tol);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace cmc

#include "cmc/sym.hpp"

#include <iomanip>
#include <limits>
#include <ostream>

#include "cmc/immersions.hpp"
#include "cmc/parallel.hpp"

namespace cmc {

std::string to_string(SpaceForm s) {
  switch (s) {
    case SpaceForm::S3: return "S3";
    case SpaceForm::R3: return "R3";
    default: return "H3";
  }
}

SpaceForm parse_space_form(const std::string& s) {
  if (s == "S3" || s == "s3") return SpaceForm::S3;
  if (s == "R3" || s == "r3") return SpaceForm::R3;
  if (s == "H3" || s == "h3") return SpaceForm::H3;
  throw Error("unknown space form '" + s + "' (expected S3, R3 or H3)");
}

double predicted_H_s3(cplx l0, cplx l1) { return (I_unit * (l0 + l1) / (l0 - l1)).real(); }

double predicted_H_h3(cplx l0) {
  const double r2 = std::norm(l0);
  return (1 + r2) / (1 - r2);
}

SymConfig SymConfig::make(SpaceForm target, cplx l0, cplx l1) {
  SymConfig c;
  c.target = target;
  c.lambda0 = l0;
  switch (target) {
    case SpaceForm::S3:
      if (l1 == 0.0) throw Error("SymConfig: S3 needs a second Sym point");
      c.lambda1 = l1;
      break;
    case SpaceForm::R3: c.lambda1 = l0; break;
    case SpaceForm::H3:
      if (l0 == 0.0) throw Error("SymConfig: H3 needs lambda0 != 0");
      c.lambda1 = 1.0 / std::conj(l0);
      break;
  }
  c.validate();
  return c;
}

void SymConfig::validate() const {
  auto on_circle = [](cplx l) { return std::abs(std::abs(l) - 1.0) <= 1e-12; };
  switch (target) {
    case SpaceForm::S3:
      if (!on_circle(lambda0) || !on_circle(lambda1)) throw Error("SymConfig: S3 Sym points must lie on the unit circle");
      if (std::abs(lambda0 - lambda1) <= 1e-9) throw Error("SymConfig: S3 Sym points must be distinct");
      break;
    case SpaceForm::R3:
      if (!on_circle(lambda0)) throw Error("SymConfig: R3 Sym point must lie on the unit circle");
      if (std::abs(lambda1 - lambda0) > 1e-12) throw Error("SymConfig: R3 uses lambda1 = lambda0");
      break;
    case SpaceForm::H3:
      if (!(std::abs(lambda0) < 1.0) || lambda0 == 0.0) throw Error("SymConfig: H3 needs 0 < |lambda0| < 1");
      if (std::abs(lambda1 - 1.0 / std::conj(lambda0)) > 1e-12 * std::abs(lambda1))
        throw Error("SymConfig: H3 uses lambda1 = 1/conj(lambda0)");
      break;
  }
}

double SymConfig::predicted_H() const {
  switch (target) {
    case SpaceForm::S3: return predicted_H_s3(lambda0, lambda1);
    case SpaceForm::R3: return 1.0;
    default: return predicted_H_h3(lambda0);
  }
}

// ---------------------------------------------------------------------------

namespace {

SurfaceMesh blank_mesh(SpaceForm target, const FrameField& X) {
  SurfaceMesh m{target, X.lattice, X.base_i, X.base_j, X.nodes1(), X.nodes2(), {}, {}, 0, 0};
  m.v.resize(X.X.size());
  return m;
}

void require_compatible(const FrameField& a, const FrameField& b, const char* who) {
  if (a.X.size() != b.X.size() || a.base_i != b.base_i || a.base_j != b.base_j ||
      a.lattice.gamma1() != b.lattice.gamma1() || a.lattice.gamma2() != b.lattice.gamma2())
    throw Error(std::string(who) + ": frames must share lattice and base point");
}

Vec4 to_vec(const Quaternion& q) { return {q.w, q.x, q.y, q.z}; }
Quaternion to_quat(const Vec4& v) { return {v[0], v[1], v[2], v[3]}; }

}  // namespace

SurfaceMesh sym_s3(const FrameField& X0, const FrameField& X1, const Tolerances& tol) {
  require_compatible(X0, X1, "sym_s3");
  SurfaceMesh m = blank_mesh(SpaceForm::S3, X0);
  m.predicted_H = predicted_H_s3(X0.lambda, X1.lambda);
  const auto defects = parallel_map(m.v.size(), [&](std::size_t k) {
    const Mat2 f = inverse(X0.X[k]) * X1.X[k];
    double d = 0;
    const Quaternion q = mat2_to_quat(f, &d);
    m.v[k] = to_vec(q);
    return std::max(d, std::abs(q.norm() - 1.0));
  });
  for (double d : defects) m.product_defect = std::max(m.product_defect, d);
  if (!(m.product_defect <= tol.unitary))
    throw Error("sym_s3: frame product is not unitary (defect " + std::to_string(m.product_defect) + ")");
  return m;
}

SurfaceMesh sym_r3(const FrameField& X0, const FrameDerivative& dX, const Tolerances& tol) {
  (void)tol;
  if (dX.dX.size() != X0.X.size()) throw Error("sym_r3: derivative does not match the frame");
  SurfaceMesh m = blank_mesh(SpaceForm::R3, X0);
  m.predicted_H = 1.0;
  const cplx rot = I_unit * X0.lambda;
  struct Out {
    double size, discarded;
  };
  const auto outs = parallel_map(m.v.size(), [&](std::size_t k) {
    const Mat2 F = rot * (inverse(X0.X[k]) * dX.dX[k]);
    Mat2 A = (F - F.adjoint()) * 0.5;
    A -= Mat2::identity() * (A.trace() / 2.0);
    const Quaternion q = mat2_to_quat(A);
    m.v[k] = {2 * q.x, 2 * q.y, 2 * q.z, 0.0};
    return Out{F.norm(), (F - A).norm()};
  });
  double size = 0, discarded = 0;
  for (const auto& o : outs) {
    size = std::max(size, o.size);
    discarded = std::max(discarded, o.discarded);
  }
  if (!(size > 1e-12)) throw Error("sym_r3: lambda-derivative of the frame vanishes (degenerate family)");
  m.product_defect = discarded / size;
  return m;
}

SurfaceMesh sym_h3(const FrameField& X0, const FrameField& X1, const Tolerances& tol) {
  (void)tol;
  require_compatible(X0, X1, "sym_h3");
  if (std::abs(X1.lambda - 1.0 / std::conj(X0.lambda)) > 1e-12 * std::abs(X1.lambda))
    throw Error("sym_h3: second frame must sit at 1/conj(lambda0)");
  SurfaceMesh m = blank_mesh(SpaceForm::H3, X0);
  m.predicted_H = predicted_H_h3(X0.lambda);
  const auto defects = parallel_map(m.v.size(), [&](std::size_t k) {
    const Mat2 M = inverse(X0.X[k]) * X1.X[k];
    Mat2 A = sqrt_hermitian_positive(M * M.adjoint());
    A *= 1.0 / std::sqrt(det(A).real());
    const cplx a = A(0, 0), b = A(0, 1), d = A(1, 1);
    m.v[k] = {0.5 * (a + d).real(), b.real(), b.imag(), 0.5 * (a - d).real()};
    return (M - M.adjoint()).norm() / M.norm();
  });
  for (double d : defects) m.product_defect = std::max(m.product_defect, d);
  return m;
}

SurfaceMesh reconstruct(const ConnectionFamily& fam, const SymConfig& cfg, const FrameOptions& opt,
                        const Tolerances& tol) {
  cfg.validate();
  const FrameField X0 = parallel_frame(fam, cfg.lambda0, opt, tol);
  switch (cfg.target) {
    case SpaceForm::S3: return sym_s3(X0, parallel_frame(fam, cfg.lambda1, opt, tol), tol);
    case SpaceForm::R3: return sym_r3(X0, frame_dlambda(fam, cfg.lambda0, 1e-2, opt, tol), tol);
    default: return sym_h3(X0, parallel_frame(fam, cfg.lambda1, opt, tol), tol);
  }
}

// ---------------------------------------------------------------------------
// Verification

namespace {

double inner(SpaceForm t, const Vec4& a, const Vec4& b) {
  const double s = (t == SpaceForm::H3 ? -1.0 : 1.0) * a[0] * b[0];
  return s + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

Vec4 lin(double a, const Vec4& x, double b, const Vec4& y) {
  return {a * x[0] + b * y[0], a * x[1] + b * y[1], a * x[2] + b * y[2], a * x[3] + b * y[3]};
}

Vec4 normal(SpaceForm t, const Vec4& f, const Vec4& fs, const Vec4& ft) {
  Vec4 n;
  switch (t) {
    case SpaceForm::R3:
      n = {fs[1] * ft[2] - fs[2] * ft[1], fs[2] * ft[0] - fs[0] * ft[2], fs[0] * ft[1] - fs[1] * ft[0], 0.0};
      break;
    case SpaceForm::S3: n = to_vec(cross4(to_quat(f), to_quat(fs), to_quat(ft))); break;
    case SpaceForm::H3:
      // Euclidean cofactor vector, lowered with the Minkowski metric
      n = to_vec(cross4(to_quat(f), to_quat(fs), to_quat(ft)));
      n[0] = -n[0];
      break;
  }
  const double nn = inner(t, n, n);
  if (!(nn > 0)) return {0, 0, 0, 0};
  return lin(1 / std::sqrt(nn), n, 0, n);
}

}  // namespace

ReconstructionReport verify_cmc(SurfaceMesh& mesh) {
  const int N1 = mesh.nodes1, N2 = mesh.nodes2;
  if (N1 < 6 || N2 < 6) throw Error("verify_cmc: mesh too small for the finite-difference stencil");
  const double hs = 1.0 / (N1 - 1), ht = 1.0 / (N2 - 1);
  const SpaceForm T = mesh.target;
  const cplx g1 = mesh.lattice.gamma1(), g2 = mesh.lattice.gamma2();
  const double ja = g1.real(), jb = g1.imag(), jc = g2.real(), jd = g2.imag(), jdet = ja * jd - jb * jc;
  mesh.H.assign(mesh.v.size(), std::numeric_limits<double>::quiet_NaN());

  static constexpr double d1[5] = {1.0 / 12, -8.0 / 12, 0, 8.0 / 12, -1.0 / 12};
  static constexpr double d2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};
  struct Row {
    double conf = 0;
    bool degenerate = false;
  };
  const auto rows = parallel_map(std::size_t(N2), [&](std::size_t bb) {
    Row row;
    const int b = int(bb);
    if (b < 2 || b > N2 - 3) return row;
    for (int a = 2; a <= N1 - 3; ++a) {
      Vec4 fs{}, ft{}, fss{}, ftt{}, fst{};
      for (int k = 0; k < 5; ++k) {
        fs = lin(1, fs, d1[k] / hs, mesh(a + k - 2, b));
        ft = lin(1, ft, d1[k] / ht, mesh(a, b + k - 2));
        fss = lin(1, fss, d2[k] / (hs * hs), mesh(a + k - 2, b));
        ftt = lin(1, ftt, d2[k] / (ht * ht), mesh(a, b + k - 2));
        for (int l = 0; l < 5; ++l)
          if (d1[k] != 0 && d1[l] != 0) fst = lin(1, fst, d1[k] * d1[l] / (hs * ht), mesh(a + k - 2, b + l - 2));
      }
      const Vec4& f = mesh(a, b);
      const double E = inner(T, fs, fs), F = inner(T, fs, ft), G = inner(T, ft, ft);
      const double W = E * G - F * F;
      const Vec4 n = normal(T, f, fs, ft);
      if (!(W > 1e-14 * (E * G)) || inner(T, n, n) == 0) {
        row.degenerate = true;
        continue;
      }
      const double e = inner(T, fss, n), ff = inner(T, fst, n), g = inner(T, ftt, n);
      mesh.H[std::size_t(b) * N1 + a] = (e * G - 2 * ff * F + g * E) / (2 * W);
      const Vec4 fx = lin(jd / jdet, fs, -jb / jdet, ft), fy = lin(-jc / jdet, fs, ja / jdet, ft);
      const double xx = inner(T, fx, fx), yy = inner(T, fy, fy), xy = inner(T, fx, fy);
      row.conf = std::max(row.conf, (std::abs(xx - yy) + 2 * std::abs(xy)) / (xx + yy));
    }
    return row;
  });
  ReconstructionReport rep;
  rep.target = T;
  rep.predicted_H = mesh.predicted_H;
  rep.product_defect = mesh.product_defect;
  for (const auto& r : rows) {
    if (r.degenerate) throw Error("verify_cmc: degenerate mesh cells (vanishing area element)");
    rep.conformality_defect = std::max(rep.conformality_defect, r.conf);
  }
  double sum = 0;
  for (double h : mesh.H)
    if (!std::isnan(h)) {
      sum += h;
      ++rep.samples;
    }
  rep.H_mean = sum / rep.samples;
  for (double h : mesh.H)
    if (!std::isnan(h)) rep.H_max_deviation = std::max(rep.H_max_deviation, std::abs(h - rep.H_mean));
  rep.H_abs_error = std::abs(std::abs(rep.H_mean) - std::abs(rep.predicted_H));
  rep.periodicity = periodicity_check(mesh);
  return rep;
}

std::array<double, 2> periodicity_check(const SurfaceMesh& m) {
  auto dist = [](const Vec4& a, const Vec4& b) {
    double s = 0;
    for (int k = 0; k < 4; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
  };
  std::array<double, 2> out{0, 0};
  for (int b = 0; b < m.nodes2; ++b) out[0] = std::max(out[0], dist(m(0, b), m(m.nodes1 - 1, b)));
  for (int a = 0; a < m.nodes1; ++a) out[1] = std::max(out[1], dist(m(a, 0), m(a, m.nodes2 - 1)));
  return out;
}

SurfaceMesh mesh_from_function(SpaceForm target, const TorusLattice& L, const std::function<Vec4(double, double)>& f) {
  SurfaceMesh m{target, L, 0, 0, L.n1() + 1, L.n2() + 1, {}, {}, 0, 0};
  m.v.resize(std::size_t(m.nodes1) * m.nodes2);
  for (int b = 0; b < m.nodes2; ++b)
    for (int a = 0; a < m.nodes1; ++a) m(a, b) = f(double(a) / L.n1(), double(b) / L.n2());
  return m;
}

SurfaceMesh reflect_parameters(const SurfaceMesh& m) {
  SurfaceMesh r = m;
  for (int b = 0; b < m.nodes2; ++b)
    for (int a = 0; a < m.nodes1; ++a) r(a, b) = m(m.nodes1 - 1 - a, b);
  r.H.clear();
  return r;
}

// ---------------------------------------------------------------------------
// Export

void write_obj(std::ostream& os, const SurfaceMesh& m, const ObjOptions& opt) {
  std::array<Vec4, 3> basis{};
  Vec4 p = opt.pole;
  if (m.target == SpaceForm::S3) {
    const double pn = std::sqrt(inner(SpaceForm::S3, p, p));
    if (!(pn > 0)) throw Error("write_obj: projection pole must be non-zero");
    p = lin(1 / pn, p, 0, p);
    // orthonormal basis of the complement of p (Gram-Schmidt on the axes)
    int got = 0;
    std::array<Vec4, 4> found{p};
    int nf = 1;
    for (int axis = 0; axis < 4 && got < 3; ++axis) {
      Vec4 e{0, 0, 0, 0};
      e[std::size_t(axis)] = 1;
      for (int j = 0; j < nf; ++j) e = lin(1, e, -inner(SpaceForm::S3, e, found[std::size_t(j)]), found[std::size_t(j)]);
      const double en = std::sqrt(inner(SpaceForm::S3, e, e));
      if (en < 1e-6) continue;
      e = lin(1 / en, e, 0, e);
      found[std::size_t(nf++)] = e;
      basis[std::size_t(got++)] = e;
    }
  }
  os << std::setprecision(12);
  os << "# " << to_string(m.target) << " surface, " << m.nodes1 << " x " << m.nodes2 << " nodes";
  if (m.target == SpaceForm::S3) os << ", stereographic projection";
  if (m.target == SpaceForm::H3) os << ", Poincare ball";
  os << '\n';
  for (const auto& v : m.v) {
    double x = 0, y = 0, z = 0;
    switch (m.target) {
      case SpaceForm::R3:
        x = v[0], y = v[1], z = v[2];
        break;
      case SpaceForm::S3: {
        const double c = 1 - inner(SpaceForm::S3, v, p);
        if (c < 1e-9) throw Error("write_obj: surface passes through the projection pole");
        x = inner(SpaceForm::S3, v, basis[0]) / c;
        y = inner(SpaceForm::S3, v, basis[1]) / c;
        z = inner(SpaceForm::S3, v, basis[2]) / c;
        break;
      }
      case SpaceForm::H3: {
        const double c = 1 + v[0];
        x = v[1] / c, y = v[2] / c, z = v[3] / c;
        break;
      }
    }
    os << "v " << x << ' ' << y << ' ' << z << '\n';
  }
  for (int b = 0; b + 1 < m.nodes2; ++b)
    for (int a = 0; a + 1 < m.nodes1; ++a) {
      const int i00 = b * m.nodes1 + a + 1;
      os << "f " << i00 << ' ' << i00 + 1 << ' ' << i00 + 1 + m.nodes1 << ' ' << i00 + m.nodes1 << '\n';
    }
}

void write_mesh_csv(std::ostream& os, const SurfaceMesh& m) {
  os << std::setprecision(17);
  os << "a,b,s,t,c0,c1,c2,c3,H\n";
  for (int b = 0; b < m.nodes2; ++b)
    for (int a = 0; a < m.nodes1; ++a) {
      const auto& v = m(a, b);
      const std::size_t k = std::size_t(b) * m.nodes1 + a;
      os << a << ',' << b << ',' << double(a) / (m.nodes1 - 1) << ',' << double(b) / (m.nodes2 - 1) << ',' << v[0]
         << ',' << v[1] << ',' << v[2] << ',' << v[3] << ',';
      if (k < m.H.size() && !std::isnan(m.H[k])) os << m.H[k];
      os << '\n';
    }
}

}  // namespace cmc

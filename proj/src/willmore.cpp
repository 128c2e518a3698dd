#include "cmc/willmore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "cmc/parallel.hpp"

namespace cmc {

// ---------------------------------------------------------------------------
// V = H^2 as C^4

CVec4 QuaternionicBundleV::to_complex(const QVec2& v) {
  const Quaternion &a = v[0], &b = v[1];
  return {cplx(a.w, a.x), cplx(-a.y, a.z), cplx(b.w, b.x), cplx(-b.y, b.z)};
}

QVec2 QuaternionicBundleV::to_quaternion(const CVec4& v) {
  return {Quaternion(v[0].real(), v[0].imag(), -v[1].real(), v[1].imag()),
          Quaternion(v[2].real(), v[2].imag(), -v[3].real(), v[3].imag())};
}

Mat4 QuaternionicBundleV::matrix(const Quaternion& q11, const Quaternion& q12, const Quaternion& q21,
                                 const Quaternion& q22) {
  const std::array<Quaternion, 4> q{q11, q12, q21, q22};
  Mat4 m;
  for (int b = 0; b < 4; ++b) {
    const Mat2 blk = quat_to_mat2(q[b]);
    const int r0 = 2 * (b / 2), c0 = 2 * (b % 2);
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) m(r0 + r, c0 + c) = blk(r, c);
  }
  return m;
}

std::array<Quaternion, 4> QuaternionicBundleV::entries(const Mat4& m, double* defect) {
  std::array<Quaternion, 4> q;
  double worst = 0;
  for (int b = 0; b < 4; ++b) {
    const int r0 = 2 * (b / 2), c0 = 2 * (b % 2);
    Mat2 blk;
    for (int r = 0; r < 2; ++r)
      for (int c = 0; c < 2; ++c) blk(r, c) = m(r0 + r, c0 + c);
    double d = 0;
    q[b] = mat2_to_quat(blk, &d);
    worst = std::max(worst, d);
  }
  if (defect) *defect = worst;
  return q;
}

CVec4 QuaternionicBundleV::mul_i(const CVec4& v) {
  return {I_unit * v[0], I_unit * v[1], I_unit * v[2], I_unit * v[3]};
}

CVec4 QuaternionicBundleV::mul_j(const CVec4& v) {
  return {std::conj(v[1]), -std::conj(v[0]), std::conj(v[3]), -std::conj(v[2])};
}

namespace {

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

double vnorm(const CVec4& v) {
  double s = 0;
  for (const auto& x : v) s += std::norm(x);
  return std::sqrt(s);
}

CVec4 vsub(const CVec4& a, const CVec4& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]};
}

CVec4 vadd(const CVec4& a, const CVec4& b) {
  return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}

cplx inner(const CVec4& a, const CVec4& b) {
  cplx s = 0;
  for (int k = 0; k < 4; ++k) s += std::conj(a[k]) * b[k];
  return s;
}

CVec4 basis(int k) {
  CVec4 e{};
  e[k] = 1.0;
  return e;
}

}  // namespace

double QuaternionicBundleV::structure_defect() {
  double d = 0;
  for (int k = 0; k < 4; ++k)
    for (cplx scale : {cplx(1.0), I_unit}) {
      CVec4 e = basis(k);
      for (auto& x : e) x *= scale;
      d = std::max(d, vnorm(vadd(mul_i(mul_i(e)), e)));
      d = std::max(d, vnorm(vadd(mul_j(mul_j(e)), e)));
      d = std::max(d, vnorm(vadd(mul_i(mul_j(e)), mul_j(mul_i(e)))));
    }
  return d;
}

double QuaternionicBundleV::linearity_defect(const Mat4& m) {
  double d = 0;
  for (int k = 0; k < 4; ++k) {
    const CVec4 e = basis(k);
    d = std::max(d, vnorm(vsub(m * mul_j(e), mul_j(m * e))));
  }
  return d;
}

double line_residual(const CVec4& v, const CVec4& w) {
  const double nv = vnorm(v), nw = vnorm(w);
  if (nv == 0) throw Error("line_residual: zero spanning vector");
  if (nw == 0) return 0;
  CVec4 u1 = v, u2 = QuaternionicBundleV::mul_j(v);
  for (auto& x : u1) x /= nv;
  for (auto& x : u2) x /= nv;
  const cplx a = inner(u1, w), b = inner(u2, w);
  CVec4 r = w;
  for (int k = 0; k < 4; ++k) r[k] -= a * u1[k] + b * u2[k];
  return vnorm(r) / nw;
}

// ---------------------------------------------------------------------------
// Line bundle, indefinite product

LineBundleL line_bundle(const GridField<Quaternion>& f) {
  return {f.map([](const Quaternion& q) { return QVec2{q, Quaternion::real(1)}; })};
}

LineBundleL line_bundle(const ImmersionGrid& f) { return line_bundle(f.f); }

Quaternion indefinite_product(const QVec2& v, const QVec2& w) {
  return v[0].conj() * w[1] + v[1].conj() * w[0];
}

QVec2 sphere_representative(const Quaternion& f) {
  return {f - Quaternion::real(1), f + Quaternion::real(1)};
}

// ---------------------------------------------------------------------------
// Conformal Gauss map

namespace {

double s2_defect(const Mat4& S) { return (S * S + Mat4::identity()).norm(); }

Quaternion unit(const Quaternion& q) {
  const double n = q.norm();
  if (!(n > 0)) throw Error("conformal_gauss_map: degenerate tangent plane");
  return q * (1.0 / n);
}

}  // namespace

SphereCongruence conformal_gauss_map(const ImmersionGrid& f, const GeometryReport& geo, DerivativeScheme scheme,
                                     const Tolerances& tol) {
  const auto& L = f.lattice();
  if (!(geo.H.lattice() == L) || !(geo.N.lattice() == L))
    throw Error("conformal_gauss_map: geometry report belongs to a different lattice");
  const auto [fx, fy] = partial_derivatives(f.f, scheme);
  // independent mean curvature for the H-match check, so that a report with
  // the wrong H does not certify itself
  const GeometryReport own = geometry(f, scheme);

  struct Site {
    Mat4 S;
    double s2, stab, tang, hmatch, lin;
  };
  const auto sites = parallel_map(L.sites(), [&](std::size_t k) {
    const Quaternion p = f.f.at(k);
    const Quaternion e1 = unit(fx.at(k));
    const Quaternion e2 = unit(fy.at(k) - e1 * dot(fy.at(k), e1));
    // left and right normals: *df = N df = -df R
    const Quaternion N = e2 * e1.conj();
    const Quaternion R = -(e1.conj() * e2);
    const Quaternion Hv = geo.N.at(k) * geo.H.at(k) - p;  // mean curvature vector in R^4
    const Quaternion Hq = -(R * Hv.conj());
    // S = G [[N, 0], [-Hq, -R]] G^-1, G = [[1, f], [0, 1]]
    const Quaternion a = N - p * Hq, b = -(a * p) - p * R, c = -Hq, d = Hq * p - R;
    Site s;
    s.S = QuaternionicBundleV::matrix(a, b, c, d);
    s.s2 = s2_defect(s.S);
    const CVec4 psi = QuaternionicBundleV::to_complex({p, Quaternion::real(1)});
    s.stab = line_residual(psi, s.S * psi);
    s.lin = QuaternionicBundleV::linearity_defect(s.S);
    // fixed sphere of S: Phi(x) = x c x + x d - a x - b = 0
    const double scale = 1 + a.norm() + b.norm() + c.norm() + d.norm();
    auto phi = [&](const Quaternion& x) { return x * c * x + x * d - a * x - b; };
    auto dphi = [&](const Quaternion& v) { return v * c * p + p * c * v + v * d - a * v; };
    s.tang = std::max({phi(p).norm(), dphi(e1).norm(), dphi(e2).norm()}) / scale;
    // mean curvature sphere: centre p + Hm/|Hm|^2, radius 1/|Hm|, spanned by e1, e2, Hm
    const Quaternion Hm = own.N.at(k) * own.H.at(k) - p;
    const double h2 = Hm.norm2(), rho = 1 / std::sqrt(h2);
    const Quaternion m = p + Hm * (1 / h2), uh = Hm * rho;
    s.hmatch = 0;
    for (const Quaternion& u : {e1, -e1, e2, uh, (e1 + e2) * std::sqrt(0.5), (e2 - uh) * std::sqrt(0.5)}) {
      const Quaternion x = m + u * rho;
      const double w = 1 + x.norm();
      s.hmatch = std::max(s.hmatch, phi(x).norm() / (scale * w * w));
    }
    return s;
  });

  SphereCongruence out;
  std::vector<Mat4> S(L.sites());
  for (std::size_t k = 0; k < L.sites(); ++k) {
    S[k] = sites[k].S;
    out.s2_defect = std::max(out.s2_defect, sites[k].s2);
    out.stability_defect = std::max(out.stability_defect, sites[k].stab);
    out.tangency_defect = std::max(out.tangency_defect, sites[k].tang);
    out.h_match_defect = std::max(out.h_match_defect, sites[k].hmatch);
    out.linearity_defect = std::max(out.linearity_defect, sites[k].lin);
  }
  out.S = GridField<Mat4>(L, std::move(S));
  auto fail = [](const char* what, double v, double lim) {
    throw Error(std::string("conformal_gauss_map: ") + what + " residual " + sci(v) + " exceeds " + sci(lim));
  };
  if (!(out.s2_defect <= tol.s2)) fail("S^2 = -1", out.s2_defect, tol.s2);
  if (!(out.stability_defect <= 1e-8)) fail("S L in L", out.stability_defect, 1e-8);
  if (!(out.linearity_defect <= 1e-8)) fail("quaternionic linearity", out.linearity_defect, 1e-8);
  if (!(out.tangency_defect <= tol.sphere_contract)) fail("tangency", out.tangency_defect, tol.sphere_contract);
  if (!(out.h_match_defect <= tol.sphere_contract)) fail("mean curvature match", out.h_match_defect, tol.sphere_contract);
  return out;
}

SphereCongruence sphere_congruence(GridField<Mat4> S, const Tolerances& tol) {
  SphereCongruence out;
  for (const auto& m : S.values()) {
    out.s2_defect = std::max(out.s2_defect, s2_defect(m));
    out.linearity_defect = std::max(out.linearity_defect, QuaternionicBundleV::linearity_defect(m));
  }
  if (!(out.s2_defect <= tol.s2)) throw Error("sphere_congruence: S^2 = -1 violated");
  out.S = std::move(S);
  return out;
}

// ---------------------------------------------------------------------------
// Hopf fields

HopfFields hopf_fields(const SphereCongruence& sc, DerivativeScheme scheme) {
  const auto& S = sc.S;
  const auto& L = S.lattice();
  HopfFields h;
  h.dS = differential(S, scheme);
  const OneForm<Mat4> st = hodge_star(h.dS);
  std::vector<Mat4> ax(L.sites()), ay(L.sites()), qx(L.sites()), qy(L.sites());
  for (std::size_t k = 0; k < L.sites(); ++k) {
    const Mat4& s = S.at(k);
    const Mat4 sx = s * h.dS.dx.at(k), sy = s * h.dS.dy.at(k);
    ax[k] = 0.25 * (sx + st.dx.at(k));
    ay[k] = 0.25 * (sy + st.dy.at(k));
    qx[k] = 0.25 * (sx - st.dx.at(k));
    qy[k] = 0.25 * (sy - st.dy.at(k));
    for (const Mat4* m : {&ax[k], &ay[k], &qx[k], &qy[k]})
      h.anticommute_defect = std::max(h.anticommute_defect, (s * *m + *m * s).norm());
    // *A = (-A_y, A_x)
    h.type_A_defect = std::max({h.type_A_defect, (-ay[k] - s * ax[k]).norm(), (ax[k] - s * ay[k]).norm()});
    h.type_Q_defect = std::max({h.type_Q_defect, (-qy[k] + s * qx[k]).norm(), (qx[k] + s * qy[k]).norm()});
    h.reassembly_defect = std::max({h.reassembly_defect, (sx - 2.0 * (ax[k] + qx[k])).norm(),
                                    (sy - 2.0 * (ay[k] + qy[k])).norm()});
  }
  h.A = OneForm<Mat4>(GridField<Mat4>(L, std::move(ax)), GridField<Mat4>(L, std::move(ay)));
  h.Q = OneForm<Mat4>(GridField<Mat4>(L, std::move(qx)), GridField<Mat4>(L, std::move(qy)));
  return h;
}

// ---------------------------------------------------------------------------
// Lagrange multiplier and the Euler-Lagrange residual

LagrangeMultiplier zero_multiplier(const TorusLattice& L) {
  const GridField<Mat4> z(L, Mat4::zero());
  return {OneForm<Mat4>(z, z)};
}

double multiplier_defect(const LagrangeMultiplier& nu, const LineBundleL& L) {
  if (!(nu.nu.lattice() == L.lattice())) throw Error("multiplier_defect: lattice mismatch");
  double d = 0;
  for (std::size_t k = 0; k < L.lattice().sites(); ++k) {
    const CVec4 psi = L.vec(k);
    for (const Mat4* B : {&nu.nu.dx.at(k), &nu.nu.dy.at(k)}) {
      const double nb = B->norm();
      if (nb == 0) continue;
      d = std::max(d, vnorm(*B * psi) / (nb * vnorm(psi)));
      for (int m = 0; m < 4; ++m) {
        const CVec4 img = *B * basis(m);
        d = std::max(d, line_residual(psi, img) * vnorm(img) / nb);
      }
    }
  }
  return d;
}

namespace {

// 1D interpolation stencils reduced mod n
Stencil stencil_mod(Interpolation method, int n, double u) {
  Stencil s = interpolation_weights(method, n, u);
  for (auto& o : s.offset) o = ((o % n) + n) % n;
  return s;
}

const std::array<double, 3> kGaussNode{0.5 - 0.5 * 0.7745966692414834, 0.5, 0.5 + 0.5 * 0.7745966692414834};
const std::array<double, 3> kGaussWeight{5.0 / 18, 8.0 / 18, 5.0 / 18};

}  // namespace

double willmore_residual(const HopfFields& h, const LagrangeMultiplier& nu) {
  const auto& L = h.A.lattice();
  if (!(nu.nu.lattice() == L)) throw Error("willmore_residual: lattice mismatch");
  const int n1 = L.n1(), n2 = L.n2();
  const cplx v1 = L.gamma1() / double(n1), v2 = L.gamma2() / double(n2);
  // eta = 2*A + nu, *A = (-A_y, A_x); values of eta on the two edge vectors
  std::vector<Mat4> e1(L.sites()), e2(L.sites());
  for (std::size_t k = 0; k < L.sites(); ++k) {
    const Mat4 ex = -2.0 * h.A.dy.at(k) + nu.nu.dx.at(k);
    const Mat4 ey = 2.0 * h.A.dx.at(k) + nu.nu.dy.at(k);
    e1[k] = ex * v1.real() + ey * v1.imag();
    e2[k] = ex * v2.real() + ey * v2.imag();
  }
  const GridField<Mat4> E1(L, std::move(e1)), E2(L, std::move(e2));
  auto stencils = [](int n) {
    std::vector<std::array<Stencil, 3>> out(n);
    for (int i = 0; i < n; ++i)
      for (int q = 0; q < 3; ++q) out[i][q] = stencil_mod(Interpolation::Trigonometric, n, i + kGaussNode[q]);
    return out;
  };
  const auto st1 = stencils(n1), st2 = stencils(n2);
  // edge integrals: I1(i,j) from (i,j) to (i+1,j), I2(i,j) from (i,j) to (i,j+1)
  const auto I1 = parallel_map(L.sites(), [&](std::size_t k) {
    const int i = int(k % n1), j = int(k / n1);
    Mat4 acc;
    for (int q = 0; q < 3; ++q) {
      Mat4 v;
      for (std::size_t p = 0; p < st1[i][q].offset.size(); ++p) v += E1(st1[i][q].offset[p], j) * st1[i][q].weight[p];
      acc += v * kGaussWeight[q];
    }
    return acc;
  });
  const auto I2 = parallel_map(L.sites(), [&](std::size_t k) {
    const int i = int(k % n1), j = int(k / n1);
    Mat4 acc;
    for (int q = 0; q < 3; ++q) {
      Mat4 v;
      for (std::size_t p = 0; p < st2[j][q].offset.size(); ++p) v += E2(i, st2[j][q].offset[p]) * st2[j][q].weight[p];
      acc += v * kGaussWeight[q];
    }
    return acc;
  });
  const double cell = L.area() / (double(n1) * n2);
  double worst = 0;
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      const Mat4 c = I1[L.index(i, j)] + I2[L.index(i + 1, j)] - I1[L.index(i, j + 1)] - I2[L.index(i, j)];
      worst = std::max(worst, c.norm() / cell);
    }
  return worst;
}

// ---------------------------------------------------------------------------
// Associated family

namespace {

Mat4 proj_minus(const Mat4& S) { return 0.5 * (Mat4::identity() - I_unit * S); }
Mat4 proj_plus(const Mat4& S) { return 0.5 * (Mat4::identity() + I_unit * S); }

void check_mu(cplx mu) {
  if (mu == cplx(0.0) || !std::isfinite(mu.real()) || !std::isfinite(mu.imag()))
    throw Error("CW family: mu must be finite and nonzero");
}

}  // namespace

CWFamily::CWFamily(GridField<Mat4> S, OneForm<Mat4> A0, OneForm<Mat4> dS, const Tolerances& tol)
    : S_(std::move(S)), A0_(std::move(A0)), dS_(std::move(dS)) {
  if (!(A0_.lattice() == S_.lattice()) || !(dS_.lattice() == S_.lattice()))
    throw Error("CWFamily: lattice mismatch");
  for (const auto& s : S_.values()) {
    const Mat4 pm = proj_minus(s), pp = proj_plus(s);
    projection_defect_ = std::max({projection_defect_, (pm * pm - pm).norm(), (pp * pp - pp).norm(),
                                   (pm + pp - Mat4::identity()).norm()});
  }
  if (!(projection_defect_ <= std::max(1e-10, tol.s2))) throw Error("CWFamily: (1 -+ iS)/2 are not projections");
}

OneForm<Mat4> CWFamily::evaluate(cplx mu) const {
  check_mu(mu);
  const auto& L = lattice();
  const cplx a = mu - 1.0, b = 1.0 / mu - 1.0;
  std::vector<Mat4> wx(L.sites()), wy(L.sites());
  for (std::size_t k = 0; k < L.sites(); ++k) {
    const Mat4& s = S_.at(k);
    const Mat4 pm = proj_minus(s), pp = proj_plus(s);
    wx[k] = a * (pm * A0_.dx.at(k)) + b * (pp * A0_.dx.at(k));
    wy[k] = a * (pm * A0_.dy.at(k)) + b * (pp * A0_.dy.at(k));
    if (gauged_) {
      const Mat4 g = pp + mu * pm, gi = pp + (1.0 / mu) * pm;
      const cplx c = -0.5 * I_unit * a;
      wx[k] = gi * wx[k] * g + gi * (c * dS_.dx.at(k));
      wy[k] = gi * wy[k] * g + gi * (c * dS_.dy.at(k));
    }
  }
  return OneForm<Mat4>(GridField<Mat4>(L, std::move(wx)), GridField<Mat4>(L, std::move(wy)));
}

double CWFamily::flatness_residual(cplx mu) const {
  const OneForm<Mat4> w = evaluate(mu);
  const auto dwy = partial_derivatives(w.dy, DerivativeScheme::Spectral).first;
  const auto dwx = partial_derivatives(w.dx, DerivativeScheme::Spectral).second;
  double worst = 0;
  for (std::size_t k = 0; k < lattice().sites(); ++k) {
    const Mat4 F = dwy.at(k) - dwx.at(k) + commutator(w.dx.at(k), w.dy.at(k));
    worst = std::max(worst, F.norm());
  }
  return worst;
}

Mat4 CWFamily::gauge(std::size_t site, cplx mu) const {
  check_mu(mu);
  return 0.5 * ((mu + 1.0) * Mat4::identity() - I_unit * (mu - 1.0) * S_.at(site));
}

CWFamily CWFamily::gauge_transform() const {
  if (gauged_) throw Error("CWFamily: family is already gauged");
  CWFamily out = *this;
  out.gauged_ = true;
  return out;
}

PathSamples CWFamily::path(int generator, int substeps, Interpolation method) const {
  if (generator != 1 && generator != 2) throw Error("CWFamily::path: generator must be 1 or 2");
  if (substeps < 1) throw Error("CWFamily::path: substeps must be positive");
  const auto& L = lattice();
  const int n = generator == 1 ? L.n1() : L.n2();
  const cplx gam = generator == 1 ? L.gamma1() : L.gamma2();
  PathSamples p;
  p.generator = generator;
  p.steps = std::max(n, 64) * substeps;
  if (p.steps % 2) p.steps *= 2;  // the step-halving audit needs an even count
  auto at = [&](const GridField<Mat4>& f, int m) { return generator == 1 ? f(m, 0) : f(0, m); };
  std::vector<Mat4> s(n), ag(n), dg(n);
  for (int m = 0; m < n; ++m) {
    s[m] = at(S_, m);
    ag[m] = at(A0_.dx, m) * gam.real() + at(A0_.dy, m) * gam.imag();
    dg[m] = at(dS_.dx, m) * gam.real() + at(dS_.dy, m) * gam.imag();
  }
  const std::size_t count = std::size_t(2 * p.steps + 1);
  p.S.resize(count);
  p.U.resize(count);
  p.W.resize(count);
  p.dS.resize(count);
  for (std::size_t m = 0; m < count; ++m) {
    const Stencil st = stencil_mod(method, n, double(m) * n / (2.0 * p.steps));
    Mat4 sv, av, dv;
    for (std::size_t q = 0; q < st.offset.size(); ++q) {
      sv += s[st.offset[q]] * st.weight[q];
      av += ag[st.offset[q]] * st.weight[q];
      dv += dg[st.offset[q]] * st.weight[q];
    }
    p.S[m] = sv;
    p.U[m] = proj_minus(sv) * av;
    p.W[m] = proj_plus(sv) * av;
    p.dS[m] = dv;
  }
  return p;
}

Mat4 CWFamily::coefficient(const PathSamples& p, std::size_t m, cplx mu) const {
  const cplx a = mu - 1.0;
  Mat4 w = a * p.U[m] + (1.0 / mu - 1.0) * p.W[m];
  if (gauged_) {
    const Mat4 pm = proj_minus(p.S[m]), pp = proj_plus(p.S[m]);
    const Mat4 g = pp + mu * pm, gi = pp + (1.0 / mu) * pm;
    w = gi * w * g + gi * ((-0.5 * I_unit * a) * p.dS[m]);
  }
  return w;
}

CWFamily build_cw_family(const SphereCongruence& S, const HopfFields& h, const LagrangeMultiplier& nu,
                         const Tolerances& tol) {
  const auto& L = S.lattice();
  if (!(h.A.lattice() == L) || !(nu.nu.lattice() == L)) throw Error("build_cw_family: lattice mismatch");
  // 2*A0 = 2*A + nu  =>  A0 = A - *nu/2, *nu = (-nu_y, nu_x)
  std::vector<Mat4> ax(L.sites()), ay(L.sites());
  for (std::size_t k = 0; k < L.sites(); ++k) {
    ax[k] = h.A.dx.at(k) + 0.5 * nu.nu.dy.at(k);
    ay[k] = h.A.dy.at(k) - 0.5 * nu.nu.dx.at(k);
  }
  return CWFamily(S.S, OneForm<Mat4>(GridField<Mat4>(L, std::move(ax)), GridField<Mat4>(L, std::move(ay))), h.dS,
                  tol);
}

// ---------------------------------------------------------------------------
// Holonomy

namespace {

Mat4 rk4(const CWFamily& fam, const PathSamples& p, cplx mu, int stride) {
  const int steps = p.steps / stride;
  const double h = 1.0 / steps;
  Mat4 X = Mat4::identity();
  for (int k = 0; k < steps; ++k) {
    const std::size_t m = std::size_t(2 * k * stride);
    const Mat4 c0 = fam.coefficient(p, m, mu), c1 = fam.coefficient(p, m + stride, mu),
               c2 = fam.coefficient(p, m + 2 * stride, mu);
    const Mat4 k1 = -(c0 * X);
    const Mat4 k2 = -(c1 * (X + (h / 2) * k1));
    const Mat4 k3 = -(c1 * (X + (h / 2) * k2));
    const Mat4 k4 = -(c2 * (X + h * k3));
    X += (h / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return X;
}

}  // namespace

CWHolonomy cw_holonomy(const CWFamily& fam, const PathSamples& path, cplx mu, const Tolerances& tol) {
  check_mu(mu);
  CWHolonomy out;
  out.mu = mu;
  out.generator = path.generator;
  out.H = rk4(fam, path, mu, 1);
  const Mat4 half = rk4(fam, path, mu, 2);
  out.step_defect = (out.H - half).norm() / std::max(1.0, out.H.norm());
  // relative to the Hadamard bound (|H|^2/4)^2 on |det|
  const double n2 = out.H.norm() * out.H.norm() / 4;
  out.det_defect = std::abs(det(out.H) - 1.0) / std::max(1.0, n2 * n2);
  if (!out.H.finite()) throw Error("cw_holonomy: non-finite transport");
  if (out.step_defect > tol.holonomy_step)
    throw Error("cw_holonomy: step-halving defect " + sci(out.step_defect) + " exceeds " + sci(tol.holonomy_step));
  if (out.det_defect > 1e-8) throw Error("cw_holonomy: relative det drift " + sci(out.det_defect) + " exceeds 1e-8");
  out.poly = char_poly(out.H);
  out.eigenvalues = poly_roots(out.poly);
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end(), [](cplx a, cplx b) {
    if (std::abs(std::abs(a) - std::abs(b)) > 1e-9) return std::abs(a) < std::abs(b);
    return std::arg(a) < std::arg(b);
  });
  return out;
}

CWHolonomy cw_holonomy(const CWFamily& fam, cplx mu, int generator, const CWHolonomyOptions& opt,
                       const Tolerances& tol) {
  return cw_holonomy(fam, fam.path(generator, opt.substeps, opt.method), mu, tol);
}

std::vector<CWSample> cw_sweep(const CWFamily& fam, const std::vector<cplx>& mus, const CWHolonomyOptions& opt,
                               const Tolerances& tol) {
  const PathSamples p1 = fam.path(1, opt.substeps, opt.method), p2 = fam.path(2, opt.substeps, opt.method);
  return parallel_map(mus.size(), [&](std::size_t k) {
    return CWSample{mus[k], cw_holonomy(fam, p1, mus[k], tol), cw_holonomy(fam, p2, mus[k], tol)};
  });
}

std::vector<cplx> mu_circle(int n, double radius) {
  if (n < 1 || !(radius > 0)) throw Error("mu_circle: need n >= 1 and positive radius");
  std::vector<cplx> out(n);
  for (int k = 0; k < n; ++k) out[k] = std::polar(radius, 2 * kPi * (k + 0.5) / n);
  return out;
}

double trace_reality_defect(const CWFamily& fam, const std::vector<cplx>& mus, int generator,
                            const CWHolonomyOptions& opt, const Tolerances& tol) {
  const PathSamples p = fam.path(generator, opt.substeps, opt.method);
  const auto d = parallel_map(mus.size(), [&](std::size_t k) {
    const cplx t = cw_holonomy(fam, p, mus[k], tol).H.trace();
    const cplx tr = cw_holonomy(fam, p, 1.0 / std::conj(mus[k]), tol).H.trace();
    return std::abs(tr - std::conj(t));
  });
  return d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
}

// ---------------------------------------------------------------------------
// Classification

std::string to_string(CWCase c) {
  switch (c) {
    case CWCase::Case1: return "case1";
    case CWCase::Case2: return "case2";
    default: return "undetermined";
  }
}

namespace {

double min_gap(const std::array<cplx, 4>& ev) {
  double g = INFINITY;
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) g = std::min(g, std::abs(ev[a] - ev[b]));
  return g;
}

}  // namespace

CaseReport case_classify(const std::vector<CWSample>& sweep, const CaseOptions& opt) {
  CaseReport r;
  r.samples = int(sweep.size());
  r.min_gap = sweep.empty() ? 0.0 : INFINITY;
  for (const auto& s : sweep) {
    Mat4 M;
    for (const CWHolonomy* h : {&s.h1, &s.h2}) {
      const Mat4 D = h->H - Mat4::identity();
      M += D.adjoint() * D;
      r.max_palindromic_defect = std::max(r.max_palindromic_defect, palindromic_defect(h->poly));
    }
    const auto ev = hermitian_eigenvalues(M);
    const double sv = std::sqrt(std::max(0.0, ev[1]));
    r.max_kernel_sv = std::max(r.max_kernel_sv, sv);
    if (sv <= opt.kernel_tol) ++r.kernel_samples;
    const double gap = std::max(min_gap(s.h1.eigenvalues), min_gap(s.h2.eigenvalues));
    r.min_gap = std::min(r.min_gap, gap);
    if (gap > opt.gap_tol) ++r.distinct_samples;
  }
  if (r.samples == 0) {
    r.note = "empty sweep";
  } else if (r.kernel_samples == r.samples) {
    r.result = CWCase::Case2;
    r.note = "common eigenvalue-1 plane at every sample";
  } else if (2 * r.distinct_samples > r.samples) {
    r.result = CWCase::Case1;
    r.note = "four distinct eigenvalues at " + std::to_string(r.distinct_samples) + " of " +
             std::to_string(r.samples) + " samples";
  } else {
    r.note = "eigenvalue-1 plane at " + std::to_string(r.kernel_samples) + " and distinct spectrum at " +
             std::to_string(r.distinct_samples) + " of " + std::to_string(r.samples) + " samples";
  }
  return r;
}

void write_cw_spectra_csv(std::ostream& os, const std::vector<CWSample>& sweep) {
  os << "generator,re_mu,im_mu,re_eta0,im_eta0,re_eta1,im_eta1,re_eta2,im_eta2,re_eta3,im_eta3\n";
  const auto prec = os.precision(17);
  for (const auto& s : sweep)
    for (const CWHolonomy* h : {&s.h1, &s.h2}) {
      os << h->generator << ',' << s.mu.real() << ',' << s.mu.imag();
      for (const auto& e : h->eigenvalues) os << ',' << e.real() << ',' << e.imag();
      os << '\n';
    }
  os.precision(prec);
}

}  // namespace cmc

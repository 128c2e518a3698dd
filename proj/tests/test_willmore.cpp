#include <doctest.h>

#include <random>
#include <sstream>

#include "cmc/willmore.hpp"
#include "test_util.hpp"

using namespace cmc;
using QB = QuaternionicBundleV;

namespace {

const double kClifford = std::sqrt(0.5);

struct Pipeline {
  ImmersionGrid f;
  GeometryReport geo;
  SphereCongruence S;
  HopfFields h;
  LagrangeMultiplier nu;
  CWFamily fam;
};

Pipeline run(const ImmersionGrid& f) {
  Pipeline p{f, geometry(f, DerivativeScheme::Spectral), {}, {}, {}, {}};
  p.S = conformal_gauss_map(p.f, p.geo);
  p.h = hopf_fields(p.S);
  p.nu = zero_multiplier(f.lattice());
  p.fam = build_cw_family(p.S, p.h, p.nu);
  return p;
}

const Pipeline& clifford64() {
  static const Pipeline p = run(homogeneous_torus(kClifford, 64));
  return p;
}

CWHolonomy synthetic_holonomy(const Mat4& H, int gen) {
  CWHolonomy h;
  h.generator = gen;
  h.H = H;
  h.poly = char_poly(H);
  h.eigenvalues = poly_roots(h.poly);
  return h;
}

Mat4 diag(cplx a, cplx b, cplx c, cplx d) {
  Mat4 m;
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  m(3, 3) = d;
  return m;
}

}  // namespace

TEST_CASE("quaternionic structure on C^4") {
  CHECK(QB::structure_defect() < 1e-15);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const QVec2 v{testing::random_quaternion(rng), testing::random_quaternion(rng)};
    const Quaternion q = testing::random_quaternion(rng);
    // round trip and right multiplication by i, j
    const QVec2 back = QB::to_quaternion(QB::to_complex(v));
    CHECK((back[0] - v[0]).norm() + (back[1] - v[1]).norm() < 1e-15);
    const QVec2 vi = QB::to_quaternion(QB::mul_i(QB::to_complex(v)));
    const QVec2 vj = QB::to_quaternion(QB::mul_j(QB::to_complex(v)));
    CHECK((vi[0] - v[0] * Quaternion::i()).norm() < 1e-15);
    CHECK((vj[1] - v[1] * Quaternion::j()).norm() < 1e-15);
    // left multiplication by quaternion matrices
    const Mat4 M = QB::matrix(q, Quaternion::real(1), Quaternion::k(), q.conj());
    const QVec2 Mv = QB::to_quaternion(M * QB::to_complex(v));
    CHECK((Mv[0] - (q * v[0] + v[1])).norm() < 1e-13);
    CHECK((Mv[1] - (Quaternion::k() * v[0] + q.conj() * v[1])).norm() < 1e-13);
    CHECK(QB::linearity_defect(M) < 1e-14);
    double d = 1;
    const auto e = QB::entries(M, &d);
    CHECK(d < 1e-15);
    CHECK((e[0] - q).norm() < 1e-15);
  }
  // a generic complex matrix is not quaternionic linear
  CHECK(QB::linearity_defect(testing::random_mat<4>(rng)) > 0.1);
}

TEST_CASE("line bundle and indefinite product") {
  const TorusLattice L(1.0, cplx(0, 1), 8, 8);
  const auto zero = line_bundle(GridField<Quaternion>(L, Quaternion{}));
  CHECK(zero.psi.at(5)[0].norm() == 0);
  CHECK(zero.psi.at(5)[1].w == 1);

  const auto f = homogeneous_torus(kClifford, 16);
  const auto Lb = line_bundle(f);
  double jres = 0, null_def = 0;
  for (std::size_t k = 0; k < f.lattice().sites(); ++k) {
    const CVec4 v = Lb.vec(k);
    jres = std::max(jres, line_residual(v, QB::mul_j(v)));
    const QVec2 r = sphere_representative(f.f.at(k));
    null_def = std::max(null_def, indefinite_product(r, r).norm());
    // the affine representative is null only where Re f = 0
    CHECK(indefinite_product(Lb.psi.at(k), Lb.psi.at(k)).w == doctest::Approx(2 * f.f.at(k).w).epsilon(1e-14));
  }
  CHECK(jres < 1e-15);
  CHECK(null_def < 1e-10);

  const QVec2 e1{Quaternion::real(1), Quaternion{}}, e2{Quaternion{}, Quaternion::real(1)};
  CHECK(indefinite_product(e1, e1).norm() == 0);
  CHECK((indefinite_product(e1, e2) - Quaternion::real(1)).norm() == 0);
}

TEST_CASE("conformal Gauss map contract") {
  const auto& c = clifford64();
  CHECK(c.S.s2_defect < 1e-10);
  CHECK(c.S.stability_defect < 1e-8);
  CHECK(c.S.tangency_defect < 1e-6);
  CHECK(c.S.h_match_defect < 1e-5);
  CHECK(c.S.linearity_defect < 1e-12);

  for (double r : {0.5, 0.6, 0.8}) {
    const auto f = homogeneous_torus(r, 32);
    const auto S = conformal_gauss_map(f, geometry(f, DerivativeScheme::Spectral));
    CHECK(S.h_match_defect < 1e-5);
    CHECK(S.tangency_defect < 1e-6);
  }

  SUBCASE("a wrong mean curvature is rejected") {
    const auto f = homogeneous_torus(0.6, 32);
    auto geo = geometry(f, DerivativeScheme::Spectral);
    geo.H = geo.H.map([](double h) { return h + 0.3; });
    Tolerances tol;
    CHECK_NOTHROW(conformal_gauss_map(f, geometry(f, DerivativeScheme::Spectral), DerivativeScheme::Spectral, tol));
    // the sphere built from the shifted H still passes through f tangentially
    // but is not the mean curvature sphere of f
    const auto S = conformal_gauss_map(f, geo, DerivativeScheme::Spectral, Tolerances{.sphere_contract = 1.0});
    CHECK(S.tangency_defect < 1e-6);
    CHECK(S.h_match_defect > 1e-3);
    CHECK_THROWS_AS(conformal_gauss_map(f, geo), Error);
  }
}

TEST_CASE("Hopf fields") {
  const auto& c = clifford64();
  CHECK(c.h.anticommute_defect < 1e-8);
  CHECK(c.h.type_A_defect < 1e-8);
  CHECK(c.h.type_Q_defect < 1e-8);
  CHECK(c.h.reassembly_defect < 1e-12);
  // homogeneity: pointwise norms are constant
  double amin = 1e300, amax = 0, qmin = 1e300, qmax = 0;
  for (std::size_t k = 0; k < c.f.lattice().sites(); ++k) {
    const double a = std::hypot(c.h.A.dx.at(k).norm(), c.h.A.dy.at(k).norm());
    const double q = std::hypot(c.h.Q.dx.at(k).norm(), c.h.Q.dy.at(k).norm());
    amin = std::min(amin, a), amax = std::max(amax, a), qmin = std::min(qmin, q), qmax = std::max(qmax, q);
  }
  CHECK(amax - amin < 1e-6);
  CHECK(qmax - qmin < 1e-6);
  CHECK(amax > 0.1);

  SUBCASE("constant S") {
    const TorusLattice L(1.0, cplx(0, 1), 16, 16);
    const Mat4 s = QB::matrix(Quaternion::i(), Quaternion{}, Quaternion{}, Quaternion::j());
    const auto h = hopf_fields(sphere_congruence(GridField<Mat4>(L, s)));
    double worst = 0;
    for (std::size_t k = 0; k < L.sites(); ++k)
      worst = std::max({worst, h.A.dx.at(k).norm(), h.A.dy.at(k).norm(), h.Q.dx.at(k).norm(), h.Q.dy.at(k).norm()});
    CHECK(worst < 1e-13);
  }
  SUBCASE("S^2 != -1 is refused") {
    const TorusLattice L(1.0, cplx(0, 1), 8, 8);
    CHECK_THROWS_AS(sphere_congruence(GridField<Mat4>(L, Mat4::identity())), Error);
  }
}

TEST_CASE("Euler-Lagrange residual") {
  const auto& c = clifford64();
  CHECK(willmore_residual(c.h, c.nu) < 1e-5);
  CHECK(multiplier_defect(c.nu, line_bundle(c.f)) == 0);

  const auto pert = run(perturb(homogeneous_torus(kClifford, 32), 0.05, {1, 1}, DerivativeScheme::Spectral));
  CHECK(willmore_residual(pert.h, pert.nu) > 1e-2);

  // conformal control: Hopf torus over a non-elastic curve
  const auto hopf = run(hopf_torus(0.2, 2, 64, 32));
  CHECK(hopf.geo.conformality_defect < 1e-6);
  const double w = willmore_residual(hopf.h, hopf.nu);
  CHECK(w > 1e-2);

  SUBCASE("gauge naturality under a constant unitary change of basis") {
    const double a = 0.7;
    const Quaternion u1 = Quaternion(1, 2, -1, 0.5) * (1 / Quaternion(1, 2, -1, 0.5).norm());
    const Mat4 rot = QB::matrix(Quaternion::real(std::cos(a)), Quaternion::real(-std::sin(a)),
                                Quaternion::real(std::sin(a)), Quaternion::real(std::cos(a)));
    const Mat4 U = rot * QB::matrix(u1, Quaternion{}, Quaternion{}, Quaternion::k());
    CHECK((U * U.adjoint() - Mat4::identity()).norm() < 1e-14);
    const Mat4 Ui = U.adjoint();
    const auto S2 = sphere_congruence(hopf.S.S.map([&](const Mat4& s) { return U * s * Ui; }));
    const auto h2 = hopf_fields(S2);
    CHECK(std::abs(willmore_residual(h2, hopf.nu) - w) < 1e-10 * w);
  }

  SUBCASE("multiplier constraint") {
    const auto& L = c.f.lattice();
    std::vector<Mat4> good(L.sites()), bad(L.sites());
    for (std::size_t k = 0; k < L.sites(); ++k) {
      const Quaternion p = c.f.f.at(k), e = Quaternion(0.3, -1, 0.2, 0.5);
      good[k] = QB::matrix(p * e, -(p * e * p), e, -(e * p));  // psi e (1, -f)
      bad[k] = QB::matrix(e, Quaternion{}, Quaternion{}, e);
    }
    const LagrangeMultiplier ng{OneForm<Mat4>(GridField<Mat4>(L, good), GridField<Mat4>(L, good))};
    const LagrangeMultiplier nb{OneForm<Mat4>(GridField<Mat4>(L, bad), GridField<Mat4>(L, bad))};
    CHECK(multiplier_defect(ng, line_bundle(c.f)) < 1e-8);
    CHECK(multiplier_defect(nb, line_bundle(c.f)) > 0.1);
  }
}

TEST_CASE("associated family and holonomy on the Clifford torus") {
  const auto& c = clifford64();
  CHECK(c.fam.projection_defect() < 1e-10);
  CHECK_THROWS_AS(c.fam.evaluate(0.0), Error);

  const auto w1 = c.fam.evaluate(1.0);
  double z = 0;
  for (std::size_t k = 0; k < c.f.lattice().sites(); ++k) z = std::max({z, w1.dx.at(k).norm(), w1.dy.at(k).norm()});
  CHECK(z == 0);

  CHECK(c.fam.flatness_residual(std::polar(1.0, kPi / 3)) < 1e-5);
  for (cplx mu : mu_circle(8)) CHECK(c.fam.flatness_residual(mu) < 1e-5);
  CHECK(c.fam.flatness_residual(cplx(0.4, -0.9)) < 1e-5);

  const auto id = cw_holonomy(c.fam, 1.0, 1);
  CHECK((id.H - Mat4::identity()).norm() < 1e-8);

  std::mt19937_64 rng(17);
  for (int t = 0; t < 4; ++t) {
    const cplx mu = testing::random_unit_complex(rng);
    for (int gen : {1, 2}) {
      const auto h = cw_holonomy(c.fam, mu, gen);
      CHECK(palindromic_defect(h.poly) < 1e-6);
      CHECK(h.det_defect < 1e-8);
      CHECK(std::abs(h.H.trace().imag()) < 1e-6);
    }
  }
  CHECK(trace_reality_defect(c.fam, {cplx(0.5, 0.3), cplx(1.7, -0.4), cplx(-0.2, 0.9)}, 1) < 1e-6);
  CHECK(trace_reality_defect(c.fam, {cplx(0.6, -0.6)}, 2) < 1e-6);
}

TEST_CASE("non-Willmore controls are not flat") {
  const auto pert = run(perturb(homogeneous_torus(kClifford, 32), 0.05, {1, 1}, DerivativeScheme::Spectral));
  CHECK(pert.fam.flatness_residual(std::polar(1.0, kPi / 3)) > 1e-3);
  const auto hopf = run(hopf_torus(0.2, 2, 64, 32));
  CHECK(hopf.fam.flatness_residual(std::polar(1.0, kPi / 3)) > 1e-3);
  // the r = 0.6 torus is not Willmore, so nu = 0 does not give a flat family
  const auto h06 = run(homogeneous_torus(0.6, 32));
  CHECK(willmore_residual(h06.h, h06.nu) > 1e-2);
  CHECK(h06.fam.flatness_residual(std::polar(1.0, kPi / 3)) > 1e-3);
}

TEST_CASE("gauge transform") {
  const auto c = run(homogeneous_torus(kClifford, 32));
  const auto g = c.fam.gauge_transform();
  CHECK(g.gauged());
  CHECK_THROWS_AS(g.gauge_transform(), Error);
  double comm = 0, unit = 0;
  for (std::size_t k = 0; k < c.f.lattice().sites(); ++k) {
    const Mat4 gk = c.fam.gauge(k, cplx(0.3, 0.8));
    comm = std::max(comm, commutator(gk, c.S.S.at(k)).norm());
    unit = std::max(unit, (c.fam.gauge(k, 1.0) - Mat4::identity()).norm());
  }
  CHECK(comm < 1e-12);
  CHECK(unit == 0);
  CHECK(g.flatness_residual(std::polar(1.0, 2.0)) < 1e-5);

  std::mt19937_64 rng(5);
  for (int t = 0; t < 3; ++t) {
    const cplx mu = testing::random_unit_complex(rng) * (t == 2 ? 1.3 : 1.0);
    for (int gen : {1, 2}) {
      const cplx a = cw_holonomy(c.fam, mu, gen).H.trace(), b = cw_holonomy(g, mu, gen).H.trace();
      CHECK(std::abs(a - b) < 1e-6);
    }
  }
}

TEST_CASE("case classification") {
  SUBCASE("synthetic distinct spectra are Case 1") {
    std::vector<CWSample> sw;
    for (cplx mu : mu_circle(6)) {
      const cplx a = 0.4 * mu, b = 0.9 * std::conj(mu);
      const Mat4 H1 = diag(std::exp(a), std::exp(b), std::exp(-b), std::exp(-a));
      const Mat4 H2 = diag(std::exp(2.0 * a), std::exp(-b), std::exp(b), std::exp(-2.0 * a));
      sw.push_back({mu, synthetic_holonomy(H1, 1), synthetic_holonomy(H2, 2)});
    }
    const auto r = case_classify(sw);
    CHECK(r.result == CWCase::Case1);
    CHECK(r.distinct_samples == 6);
    CHECK(r.max_palindromic_defect < 1e-12);
  }
  SUBCASE("synthetic eigenvalue-1 plane is Case 2") {
    std::vector<CWSample> sw;
    for (cplx mu : mu_circle(6)) {
      const cplx a = 0.5 + 0.2 * mu;
      const Mat4 H = diag(1.0, 1.0, std::exp(a), std::exp(-a));
      sw.push_back({mu, synthetic_holonomy(H, 1), synthetic_holonomy(diag(1.0, 1.0, std::exp(2.0 * a), std::exp(-2.0 * a)), 2)});
    }
    const auto r = case_classify(sw);
    CHECK(r.result == CWCase::Case2);
    CHECK(r.max_kernel_sv < 1e-12);
  }
  SUBCASE("mixed evidence is undetermined") {
    std::vector<CWSample> sw;
    const Mat4 I = Mat4::identity();
    const Mat4 D = diag(2.0, 0.5, 3.0, 1.0 / 3.0);
    sw.push_back({1.0, synthetic_holonomy(I, 1), synthetic_holonomy(I, 2)});
    sw.push_back({-1.0, synthetic_holonomy(D, 1), synthetic_holonomy(D, 2)});
    sw.push_back({I_unit, synthetic_holonomy(I, 1), synthetic_holonomy(I, 2)});
    const auto r = case_classify(sw);
    CHECK(r.result == CWCase::Undetermined);
    CHECK(!r.note.empty());
  }
  SUBCASE("Clifford torus with nu = 0") {
    // flat and palindromic, but without an eigenvalue-1 plane: four distinct
    // unimodular eigenvalues on the unit circle
    const auto c = run(homogeneous_torus(kClifford, 32));
    const auto sw = cw_sweep(c.fam, mu_circle(8));
    const auto r = case_classify(sw);
    CHECK(r.max_palindromic_defect < 1e-6);
    CHECK(r.kernel_samples == 0);
    CHECK(r.result == CWCase::Case1);
    for (const auto& s : sw)
      for (const auto& e : s.h1.eigenvalues) CHECK(std::abs(std::abs(e) - 1) < 1e-6);
  }
}

TEST_CASE("spectra export") {
  const auto c = run(homogeneous_torus(kClifford, 16));
  const auto sw = cw_sweep(c.fam, mu_circle(3));
  std::ostringstream os;
  write_cw_spectra_csv(os, sw);
  const std::string s = os.str();
  CHECK(std::count(s.begin(), s.end(), '\n') == 7);
  CHECK(s.rfind("generator,re_mu,im_mu,re_eta0", 0) == 0);
  std::ostringstream again;
  write_cw_spectra_csv(again, cw_sweep(c.fam, mu_circle(3)));
  CHECK(again.str() == s);
}

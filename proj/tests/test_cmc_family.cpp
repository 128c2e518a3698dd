#include <doctest.h>

#include "cmc/cmc_family.hpp"
#include "test_util.hpp"

using namespace cmc;

namespace {

ConnectionFamily homogeneous_family(double r, int n, DerivativeScheme scheme = DerivativeScheme::Spectral,
                                    Interpolation interp = Interpolation::Trigonometric) {
  const auto f = homogeneous_torus(r, n);
  const auto mc = maurer_cartan(f, scheme);
  return build_family(mc.alpha, family_mean_curvature(homogeneous_mean_curvature(r)), interp, scheme);
}

double unitary_defect(const Mat2& m) { return (m * m.adjoint() - Mat2::identity()).max_abs(); }

}  // namespace

TEST_CASE("family coefficients") {
  const TorusLattice L(1.0, cplx(0, 1), 8, 8);
  std::mt19937_64 rng(3);
  const Mat2 M = cmc::testing::random_mat<2>(rng);
  Mat2 A = M - M.adjoint();
  A -= Mat2::identity() * (A.trace() / 2.0);
  const OneForm<Mat2> alpha(GridField<Mat2>(L, A), GridField<Mat2>(L, A * 2.0));
  const auto fam = build_family(alpha, 0.0);
  const auto one = fam.evaluate(1.0);
  CHECK((one.dx.at(3) - alpha.dx.at(3)).max_abs() < 1e-15);
  CHECK((one.dy.at(3) - alpha.dy.at(3)).max_abs() < 1e-15);
  const auto minus = fam.evaluate(-1.0);
  CHECK(minus.dx.at(0).max_abs() == 0.0);
  CHECK(minus.dy.at(0).max_abs() == 0.0);
  CHECK_THROWS_AS(fam.evaluate(0.0), Error);
  const auto fam1 = build_family(alpha, 1.0);
  CHECK(std::abs(fam1.lambda_star() - I_unit) < 1e-15);
  const auto [c1, c2] = fam1.coefficients(I_unit);
  CHECK(std::abs(c1 - 1.0) < 1e-15);
  CHECK(std::abs(c2 - 1.0) < 1e-15);
  // tracelessness is preserved
  const auto w = fam1.evaluate(cplx(0.3, 2.0));
  CHECK(std::abs(w.dx.at(1).trace()) < 1e-15);
}

TEST_CASE("flatness distinguishes CMC from non-CMC") {
  const auto fam = homogeneous_family(0.6, 64);
  const cplx lam = std::polar(1.0, kPi / 3);
  const auto rep = flatness_report(fam, lam);
  CHECK(rep.value() < 1e-6);

  const auto p = perturb(homogeneous_torus(0.6, 64), 0.05, {1, 1}, DerivativeScheme::Spectral);
  const auto g = geometry(p, DerivativeScheme::Spectral);
  const auto pf = build_family(maurer_cartan(p, DerivativeScheme::Spectral).alpha, family_mean_curvature(g.H_mean));
  CHECK(flatness_residual(pf, lam) > 1e-3);
  Tolerances tol;
  CHECK_THROWS_AS(parallel_frame(pf, lam, {}, tol), Error);

  // the geometric sign is not flat: the family parameter is the flipped one
  const auto f = homogeneous_torus(0.6, 64);
  const auto wrong = build_family(maurer_cartan(f, DerivativeScheme::Spectral).alpha, homogeneous_mean_curvature(0.6));
  CHECK(flatness_residual(wrong, lam) > 1e-2);
}

TEST_CASE("at lambda* the residual is the Maurer-Cartan residual") {
  const auto p = perturb(homogeneous_torus(0.6, 32), 0.05, {1, 1}, DerivativeScheme::Spectral);
  const auto alpha = maurer_cartan(p, DerivativeScheme::Spectral).alpha;
  const auto fam = build_family(alpha, 0.4);
  const auto rep = flatness_report(fam, fam.lambda_star());
  const double mc = maurer_cartan_residual(alpha, DerivativeScheme::Spectral);
  CHECK(std::abs(rep.continuum - mc) < 1e-10);
  CHECK(rep.value() < 1e-6);
}

TEST_CASE("flatness converges at fourth order with FD4; non-CMC stays bounded away") {
  const cplx lam = std::polar(1.0, 1.0);
  // on homogeneous tori the continuum term is exact, the plaquette term carries the truncation error
  auto plaq = [&](int n) {
    return flatness_report(homogeneous_family(0.6, n, DerivativeScheme::FiniteDifference4, Interpolation::Bicubic), lam)
        .plaquette;
  };
  const double ratio = plaq(32) / plaq(64);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
  for (int n : {32, 64}) {
    const auto p = perturb(homogeneous_torus(0.6, n), 0.05, {1, 1}, DerivativeScheme::Spectral);
    const auto pf = build_family(maurer_cartan(p, DerivativeScheme::Spectral).alpha,
                                 family_mean_curvature(geometry(p, DerivativeScheme::Spectral).H_mean));
    CHECK(flatness_report(pf, lam).continuum > 1e-3);
  }
}

TEST_CASE("parallel frames") {
  const TorusLattice L(1.0, cplx(0, 1), 64, 16);
  SUBCASE("zero connection") {
    const auto fam = constant_family(Mat2::zero(), Mat2::zero(), L);
    const auto F = parallel_frame(fam, 0.7);
    for (const auto& x : F.X) CHECK((x - Mat2::identity()).max_abs() == 0.0);
  }
  SUBCASE("constant coefficients match the exponential") {
    std::mt19937_64 rng(8);
    Mat2 C = cmc::testing::random_mat<2>(rng);
    C -= Mat2::identity() * (C.trace() / 2.0);
    const auto fam = constant_family(C, Mat2::zero(), L);
    FrameOptions opt;
    opt.substeps = 32;  // 2048 steps along the generator
    const auto F = parallel_frame(fam, 1.0, opt);
    double e = 0;
    for (int a = 0; a <= 64; ++a) {
      const double x = F.point(a, 0).real();
      e = std::max(e, (F(a, 0) - mat_exp(C * -x)).max_abs());
    }
    CHECK(e < 1e-8);
    CHECK(F.det_defect < 1e-9);
    CHECK(F.path_defect < 1e-9);
  }
}

TEST_CASE("vacuum frames match the closed form") {
  const double c = 1.0;
  const auto L = vacuum_lattice(c, 32);
  const auto fam = vacuum_family(c, L);
  const cplx lam = std::polar(1.0, 0.4);
  const auto F = parallel_frame(fam, lam);
  double e = 0;
  for (int b = 0; b <= 32; b += 4)
    for (int a = 0; a <= 32; a += 4) e = std::max(e, (F(a, b) - vacuum_frame(c, lam, F.point(a, b))).max_abs());
  CHECK(e < 1e-10);
  CHECK(F.path_defect < 1e-10);
  // frame is unitary on the unit circle
  double u = 0;
  for (const auto& x : F.X) u = std::max(u, unitary_defect(x));
  CHECK(u < 1e-10);
}

TEST_CASE("holonomy on fixtures") {
  SUBCASE("minimal Clifford family at lambda = 1 closes") {
    const auto fam = homogeneous_family(1 / std::sqrt(2.0), 64);
    for (int g : {1, 2}) {
      const auto h = holonomy(fam, 1.0, g);
      CHECK((h.matrix - Mat2::identity()).max_abs() < 1e-8);
      CHECK(h.det_defect < 1e-9);
      // the second trivial point of the H = 0 family
      CHECK((holonomy(fam, -1.0, g).matrix - Mat2::identity()).max_abs() < 1e-12);
    }
  }
  SUBCASE("constant coefficients") {
    const TorusLattice L(cplx(1.0, 0.2), cplx(0.1, 0.9), 32, 32);
    std::mt19937_64 rng(4);
    Mat2 Cx = cmc::testing::random_mat<2>(rng), Cy = cmc::testing::random_mat<2>(rng);
    Cx -= Mat2::identity() * (Cx.trace() / 2.0);
    Cy = Cx * cplx(0.5, 0.25);  // commuting, so both generators are exact exponentials
    const auto fam = constant_family(Cx, Cy, L);
    for (int g : {1, 2}) {
      const cplx gam = g == 1 ? L.gamma1() : L.gamma2();
      const Mat2 expect = mat_exp(-(Cx * gam.real() + Cy * gam.imag()));
      CHECK((holonomy(fam, 2.0, g).matrix - expect).max_abs() < 1e-8);
    }
  }
  SUBCASE("CMC fixture on the unit circle is unitary with real trace") {
    const auto fam = homogeneous_family(0.6, 64);
    for (double th : {0.3, 1.1, 2.0, 2.9, 4.0}) {
      const cplx lam = std::polar(1.0, th);
      for (int g : {1, 2}) {
        const auto h = holonomy(fam, lam, g);
        CHECK(std::abs(h.trace.imag()) < 1e-7);
        CHECK(std::abs(h.trace) <= 2 + 1e-7);
        CHECK(unitary_defect(h.matrix) < 1e-7);
        CHECK(h.det_defect < 1e-9);
        CHECK(std::abs(h.eta[0] * h.eta[1] - 1.0) < 1e-9);
      }
      const auto h1 = holonomy(fam, lam, 1), h2 = holonomy(fam, lam, 2);
      CHECK(commutator(h1.matrix, h2.matrix).norm() < 1e-6);
    }
  }
}

TEST_CASE("reality symmetry of the trace") {
  const auto fam = homogeneous_family(0.6, 32);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> rad(0.5, 2.0), ang(0, 2 * kPi);
  for (int k = 0; k < 6; ++k) {
    const cplx lam = std::polar(rad(rng), ang(rng));
    for (int g : {1, 2}) {
      const cplx t = holonomy(fam, lam, g).trace;
      const cplx tr = holonomy(fam, 1.0 / std::conj(lam), g).trace;
      CHECK(std::abs(tr - std::conj(t)) < 1e-6 * std::max(1.0, std::abs(t)));
    }
  }
}

TEST_CASE("vacuum family") {
  const double c = 1.0;
  const auto L = vacuum_lattice(c, 64);
  const auto fam = vacuum_family(c, L);
  const auto coarse = vacuum_family(c, vacuum_lattice(c, 16));
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> rad(0.4, 2.5), ang(0, 2 * kPi);
  for (int k = 0; k < 20; ++k) {
    const cplx lam = std::polar(rad(rng), ang(rng));
    CHECK(flatness_residual(coarse, lam) < 1e-12);
    CHECK(commutator(vacuum_P(c, lam), vacuum_R(c, lam)).max_abs() < 1e-15);
    for (int g : {1, 2}) {
      const cplx gam = g == 1 ? L.gamma1() : L.gamma2();
      const auto h = holonomy(fam, lam, g);
      const Mat2 expect = vacuum_frame(c, lam, gam);
      CHECK((h.matrix - expect).max_abs() / std::max(1.0, expect.max_abs()) < 1e-10);
      CHECK(std::abs(h.trace - vacuum_trace(c, lam, gam)) < 1e-10 * std::max(1.0, std::abs(h.trace)));
      const cplx tr = holonomy(fam, 1.0 / std::conj(lam), g).trace;
      CHECK(std::abs(tr - std::conj(h.trace)) < 1e-9 * std::max(1.0, std::abs(h.trace)));
    }
  }
  // closing lattice: holonomy is -I or I at lambda = +-1
  for (double lam : {1.0, -1.0})
    for (int g : {1, 2}) {
      const Mat2 h = holonomy(fam, lam, g).matrix;
      CHECK(std::min((h - Mat2::identity()).max_abs(), (h + Mat2::identity()).max_abs()) < 1e-10);
    }
  CHECK_THROWS_AS(vacuum_family(0.0, L), Error);
}

TEST_CASE("holonomy_dlambda") {
  const auto L = vacuum_lattice(1.0, 16);
  SUBCASE("lambda-independent family") {
    const auto fam = constant_family(Mat2::zero(), Mat2::zero(), L);
    const auto d = holonomy_dlambda(fam, std::polar(1.0, 0.3), 1);
    CHECK(d.value.max_abs() == 0.0);
  }
  SUBCASE("diagonal vacuum against the closed form") {
    const cplx c(0.8, 0.3);
    const auto fam = diagonal_vacuum_family(c, L);
    const cplx lam = std::polar(1.0, 0.7);
    for (int g : {1, 2}) {
      const cplx gam = g == 1 ? L.gamma1() : L.gamma2();
      const auto d = holonomy_dlambda(fam, lam, g);
      // exponent -(c1 c gam + c2 (-conj c) conj gam) on the first diagonal entry
      const cplx dphi = -(-0.5 / (lam * lam) * c * gam - 0.5 * std::conj(c) * std::conj(gam));
      const Mat2 X = diagonal_vacuum_frame(c, lam, gam);
      Mat2 expect;
      expect(0, 0) = dphi * X(0, 0);
      expect(1, 1) = -dphi * X(1, 1);
      CHECK((d.value - expect).max_abs() < 1e-6);
      CHECK(d.rel_error < 1e-6);
    }
  }
}

TEST_CASE("step audit rejects coarse integration") {
  const auto fam = vacuum_family(1.0, vacuum_lattice(1.0, 8));
  HolonomyOptions opt;
  opt.substeps = 2;
  CHECK_THROWS_AS(holonomy(fam, 0.05, 1, opt), Error);
  opt.strict = false;
  CHECK(holonomy(fam, 0.05, 1, opt).step_defect > 1e-7);
}

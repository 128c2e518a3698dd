#include <doctest.h>

#include <sstream>

#include "cmc/immersions.hpp"
#include "test_util.hpp"

using namespace cmc;

TEST_CASE("cross4 is orthogonal and matches the determinant") {
  std::mt19937_64 rng(1);
  const auto a = cmc::testing::random_quaternion(rng), b = cmc::testing::random_quaternion(rng),
             c = cmc::testing::random_quaternion(rng), v = cmc::testing::random_quaternion(rng);
  const auto n = cross4(a, b, c);
  CHECK(std::abs(dot(n, a)) < 1e-13);
  CHECK(std::abs(dot(n, b)) < 1e-13);
  CHECK(std::abs(dot(n, c)) < 1e-13);
  // <N, v> = det(v, a, b, c): check against the standard basis evaluation
  CHECK(cross4(Quaternion::i(), Quaternion::j(), Quaternion::k()).w == doctest::Approx(1.0));
  (void)v;
}

TEST_CASE("homogeneous torus validation") {
  CHECK_THROWS_AS(homogeneous_torus(0.0, 16), Error);
  CHECK_THROWS_AS(homogeneous_torus(1.0, 16), Error);
  const auto f = homogeneous_torus(0.6, 16);
  for (const auto& q : f.f.values()) CHECK(std::abs(q.norm() - 1) < 1e-14);
}

TEST_CASE("Clifford torus geometry") {
  const auto f = homogeneous_torus(1 / std::sqrt(2.0), 64);
  const auto g = geometry(f);
  CHECK(g.conformality_defect < 1e-10);
  CHECK(std::max(std::abs(g.H_min), std::abs(g.H_max)) < 1e-6);
  CHECK(std::abs(g.E_min - 0.5) < 1e-5);
  CHECK(std::abs(g.E_max - 0.5) < 1e-5);
  const auto gs = geometry(f, DerivativeScheme::Spectral);
  CHECK(std::abs(gs.E_min - 0.5) < 1e-13);
  CHECK(std::abs(gs.E_max - 0.5) < 1e-13);
  CHECK(g.normal_defect < 1e-10);
}

TEST_CASE("homogeneous r = 0.6 has H = 7/24") {
  const auto g = geometry(homogeneous_torus(0.6, 64));
  CHECK(homogeneous_mean_curvature(0.6) == doctest::Approx(7.0 / 24));
  CHECK(std::abs(g.H_max - 7.0 / 24) < 1e-5);
  CHECK(std::abs(g.H_min - 7.0 / 24) < 1e-5);
  CHECK(g.E_max - g.E_min < 1e-12);
}

TEST_CASE("mean curvature across r") {
  for (double r : {0.5, 0.6, 1 / std::sqrt(2.0), 0.8}) {
    const double exact = homogeneous_mean_curvature(r);
    const auto g64 = geometry(homogeneous_torus(r, 64));
    CHECK(std::max(std::abs(g64.H_max - exact), std::abs(g64.H_min - exact)) < 1e-4);
    // E = 1/2 for every r, so its truncation error measures the order
    const auto g32 = geometry(homogeneous_torus(r, 32));
    const double ratio = std::abs(g32.E_min - 0.5) / std::abs(g64.E_min - 0.5);
    CHECK(ratio > 14.0);
    CHECK(ratio < 18.0);
  }
}

TEST_CASE("fourth-order convergence of H on a non-homogeneous torus") {
  auto H_at = [](int n, int i, int j) {
    const auto f = perturb(homogeneous_torus(0.6, n), 0.03, {1, 1}, DerivativeScheme::Spectral);
    return geometry(f).H(i, j);
  };
  // same physical site (s, t) = (1/8, 3/8) at each resolution
  const double h32 = H_at(32, 4, 12), h64 = H_at(64, 8, 24), h128 = H_at(128, 16, 48);
  const double ratio = std::abs(h32 - h64) / std::abs(h64 - h128);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("constant grid is rejected") {
  const TorusLattice L(1.0, cplx(0, 1), 8, 8);
  CHECK_THROWS_AS(make_immersion(GridField<Quaternion>(L, Quaternion::real(1))), Error);
  CHECK_THROWS_AS(make_immersion(GridField<Quaternion>(L, Quaternion::real(1.1))), Error);
}

TEST_CASE("perturbation") {
  const auto f = homogeneous_torus(1 / std::sqrt(2.0), 64);
  const auto same = perturb(f, 0.0, {1, 2});
  for (std::size_t k = 0; k < f.lattice().sites(); ++k) CHECK((same.f.at(k) - f.f.at(k)).norm() == 0.0);
  const auto p = perturb(f, 0.05, {1, 2});
  for (const auto& q : p.f.values()) CHECK(std::abs(q.norm() - 1) < 1e-13);
  const auto g = geometry(p);
  CHECK(std::max(std::abs(g.H_min), std::abs(g.H_max)) > 1e-2);
  CHECK(g.conformality_defect > 1e-3);
}

TEST_CASE("Maurer-Cartan form") {
  const auto f = homogeneous_torus(1 / std::sqrt(2.0), 64);
  const auto mc = maurer_cartan(f);
  double lo = 1e9, hi = 0, ah = 0;
  for (std::size_t k = 0; k < f.lattice().sites(); ++k) {
    const Mat2& a = mc.alpha.dx.at(k);
    lo = std::min(lo, a.norm());
    hi = std::max(hi, a.norm());
    ah = std::max({ah, std::abs(a.trace()), (a + a.adjoint()).max_abs()});
  }
  CHECK(hi - lo < 1e-8);
  CHECK(ah < 1e-10);
  CHECK(maurer_cartan_residual(mc.alpha) < 1e-5);
  const auto p = perturb(f, 0.05, {1, 1});
  CHECK(maurer_cartan_residual(maurer_cartan(p).alpha) < 1e-4);
}

TEST_CASE("immersion csv round trip and validation") {
  const auto f = homogeneous_torus(0.6, 8, 10);
  std::stringstream ss;
  write_immersion_csv(ss, f);
  const auto g = read_immersion_csv(ss);
  CHECK(g.lattice() == f.lattice());
  for (std::size_t k = 0; k < f.lattice().sites(); ++k) CHECK((g.f.at(k) - f.f.at(k)).norm() < 1e-16);
  std::stringstream bad("# lattice,1,0,0,1,8,8\ns,t,w,x,y,z\n0,0,2,0,0,0\n");
  CHECK_THROWS_AS(read_immersion_csv(bad), Error);
}

TEST_CASE("Hopf torus") {
  SUBCASE("a = 0 is the Clifford torus") {
    const auto f = hopf_torus(0.0, 3, 32, 32);
    const auto g = geometry(f, DerivativeScheme::Spectral);
    CHECK(g.conformality_defect < 1e-10);
    CHECK(std::max(std::abs(g.H_min), std::abs(g.H_max)) < 1e-10);
    CHECK(f.lattice().area() == doctest::Approx(2 * kPi * kPi).epsilon(1e-12));
  }
  SUBCASE("wavy curve: conformal, spectrally converging, not CMC") {
    const auto coarse = geometry(hopf_torus(0.2, 2, 32, 16), DerivativeScheme::Spectral);
    const auto fine = geometry(hopf_torus(0.2, 2, 64, 16), DerivativeScheme::Spectral);
    CHECK(fine.conformality_defect < 1e-6);
    CHECK(fine.conformality_defect < 0.1 * coarse.conformality_defect);
    CHECK(fine.H_max - fine.H_min > 0.5);
  }
  CHECK_THROWS_AS(hopf_torus(0.1, 0, 16, 16), Error);
}

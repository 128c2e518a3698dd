#include <doctest.h>

#include "cmc/algebra.hpp"
#include "test_util.hpp"

using namespace cmc;
using cmc::testing::random_mat;
using cmc::testing::random_quaternion;

TEST_CASE("quat_to_mat2 basis cases") {
  CHECK((quat_to_mat2(Quaternion::real(1)) - Mat2::identity()).max_abs() == 0.0);
  const Mat2 j = quat_to_mat2(Quaternion::j());
  CHECK(j(0, 0) == cplx(0));
  CHECK(j(0, 1) == cplx(1));
  CHECK(j(1, 0) == cplx(-1));
  CHECK(j(1, 1) == cplx(0));
}

TEST_CASE("quat_to_mat2 is multiplicative with det = norm^2") {
  std::mt19937_64 rng(7);
  double worst = 0, worst_det = 0, worst_triple = 0;
  for (int k = 0; k < 100; ++k) {
    const auto q = random_quaternion(rng), p = random_quaternion(rng), r = random_quaternion(rng);
    worst = std::max(worst, (quat_to_mat2(q * p) - quat_to_mat2(q) * quat_to_mat2(p)).max_abs());
    worst_det = std::max(worst_det, std::abs(det(quat_to_mat2(q)) - q.norm2()) / q.norm2());
    worst_triple = std::max(
        worst_triple, (quat_to_mat2(q * p * r) - quat_to_mat2(q) * quat_to_mat2(p) * quat_to_mat2(r)).max_abs() /
                          (q.norm() * p.norm() * r.norm()));
  }
  CHECK(worst < 1e-14);
  CHECK(worst_det < 1e-14);
  CHECK(worst_triple < 1e-13);
  double defect = 1;
  const auto q = random_quaternion(rng);
  const auto back = mat2_to_quat(quat_to_mat2(q), &defect);
  CHECK(defect < 1e-15);
  CHECK((back - q).norm() < 1e-15);
}

TEST_CASE("mat_exp closed forms") {
  CHECK((mat_exp(Mat2::zero()) - Mat2::identity()).max_abs() < 1e-16);
  Mat2 d;
  d(0, 0) = cplx(0, kPi);
  d(1, 1) = cplx(0, -kPi);
  CHECK((mat_exp(d) + Mat2::identity()).max_abs() < 1e-14);
  Mat2 n;
  n(0, 1) = 1.0;
  Mat2 expect = Mat2::identity();
  expect(0, 1) = 1.0;
  CHECK((mat_exp(n) - expect).max_abs() < 1e-16);
}

TEST_CASE("mat_exp relative accuracy and inverse property") {
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    // Diagonalizable test: P diag(a,b) P^-1 with known exponential.
    const Mat2 p = random_mat<2>(rng) + Mat2::identity() * 3.0;
    std::normal_distribution<double> n(0.0, 2.0);
    const cplx a(n(rng), n(rng)), b(n(rng), n(rng));
    Mat2 dg, edg;
    dg(0, 0) = a; dg(1, 1) = b;
    edg(0, 0) = std::exp(a); edg(1, 1) = std::exp(b);
    const Mat2 m = p * dg * inverse(p);
    if (m.norm() > 10) continue;
    const Mat2 expect = p * edg * inverse(p);
    CHECK((mat_exp(m) - expect).norm() / expect.norm() < 1e-12);
  }
  for (int k = 0; k < 20; ++k) {
    Mat4 a = random_mat<4>(rng);
    a *= 5.0 / a.norm();
    CHECK((mat_exp(a) * mat_exp(-a) - Mat4::identity()).max_abs() < 1e-11);
  }
}

TEST_CASE("mat_exp rejects overflow") {
  Mat2 big = Mat2::identity() * 1e4;
  CHECK_THROWS_AS(mat_exp(big), Error);
  Mat2 nan;
  nan(0, 0) = cplx(std::nan(""), 0);
  CHECK_THROWS_AS(mat_exp(nan), Error);
}

TEST_CASE("eigen: trivial cases") {
  auto e = eigen(Mat2::identity());
  for (const auto& p : e) CHECK(std::abs(p.value - 1.0) < 1e-15);
  Mat2 d;
  d(0, 0) = 2.0;
  d(1, 1) = 0.5;
  e = eigen(d);
  CHECK(std::abs(e[0].value - 2.0) < 1e-15);
  CHECK(std::abs(e[1].value - 0.5) < 1e-15);
  auto e4 = eigen(Mat4::identity());
  CHECK(e4.size() == 4);
  for (const auto& p : e4) CHECK(std::abs(p.value - 1.0) < 1e-12);
}

TEST_CASE("eigen: random SL(2,C) and 4x4 reconstruction") {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 50; ++k) {
    Mat2 m = random_mat<2>(rng);
    m *= 1.0 / std::sqrt(det(m));
    const auto e = eigen(m);
    CHECK(std::abs(e[0].value * e[1].value - 1.0) < 1e-10);
    CHECK(std::abs(e[0].value + e[1].value - m.trace()) < 1e-9 * std::max(1.0, std::abs(m.trace())));
    for (const auto& p : e) CHECK(p.residual < 1e-10);
  }
  for (int k = 0; k < 50; ++k) {
    const Mat4 m = random_mat<4>(rng);
    const auto e = eigen(m);
    cplx sum = 0, prod = 1;
    for (const auto& p : e) {
      sum += p.value;
      prod *= p.value;
      CHECK(p.residual < 1e-10);
    }
    CHECK(std::abs(sum - m.trace()) < 1e-9 * std::max(1.0, std::abs(m.trace())));
    CHECK(std::abs(prod - det(m)) < 1e-9 * std::max(1.0, std::abs(det(m))));
  }
}

TEST_CASE("eigen: defective matrix flags vectors") {
  Mat2 j;
  j(0, 0) = 1.0; j(0, 1) = 1.0; j(1, 1) = 1.0;
  const auto e = eigen(j);
  CHECK(std::abs(e[0].value - 1.0) < 1e-7);
  CHECK_FALSE(e[0].reliable);
  Mat4 j4 = Mat4::identity();
  j4(0, 1) = 1.0;
  j4(2, 2) = 3.0;
  j4(3, 3) = 0.25;
  const auto e4 = eigen(j4);
  int unreliable = 0;
  for (const auto& p : e4) unreliable += p.reliable ? 0 : 1;
  CHECK(unreliable >= 1);
}

TEST_CASE("palindromic defect") {
  CHECK(palindromic_defect(char_poly(Mat4::identity())) < 1e-15);
  CHECK(palindromic_defect(poly_from_roots({2.0, 0.5, 3.0, 1.0 / 3.0})) < 1e-14);
  CHECK(palindromic_defect(poly_from_roots({2.0, 2.0, 3.0, 1.0 / 3.0})) > 0.5);
  const auto p = poly_from_roots({cplx(1, 1), 2.0, -0.5, cplx(0, 3)});
  auto r = poly_roots(p);
  for (const cplx expect : {cplx(1, 1), cplx(2.0), cplx(-0.5), cplx(0, 3)}) {
    double best = 1e9;
    for (const auto& z : r) best = std::min(best, std::abs(z - expect));
    CHECK(best < 1e-12);
  }
}

TEST_CASE("hermitian eigenvalues") {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 10; ++k) {
    const Mat4 a = random_mat<4>(rng);
    const Mat4 h = a.adjoint() * a;
    const auto ev = hermitian_eigenvalues(h);
    const auto e = eigen(h);
    for (const auto v : ev) {
      double best = 1e9;
      for (const auto& p : e) best = std::min(best, std::abs(p.value - v));
      CHECK(best < 1e-9 * h.norm());
      CHECK(v > -1e-12 * h.norm());
    }
  }
}

TEST_CASE("sqrt of Hermitian positive matrix") {
  std::mt19937_64 rng(9);
  const Mat2 a = random_mat<2>(rng);
  const Mat2 h = a * a.adjoint() + Mat2::identity() * 0.1;
  const Mat2 s = sqrt_hermitian_positive(h);
  CHECK((s * s - h).max_abs() < 1e-13);
  CHECK((s - s.adjoint()).max_abs() < 1e-14);
  CHECK_THROWS_AS(sqrt_hermitian_positive(Mat2::identity() * -1.0), Error);
}

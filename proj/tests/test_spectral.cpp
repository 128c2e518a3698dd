#include <doctest.h>

#include <sstream>

#include "cmc/spectral.hpp"
#include "cmc/immersions.hpp"

using namespace cmc;

namespace {

SamplingPlan small_plan() {
  SamplingPlan p;
  p.circle = 32;
  p.radial = 17;
  p.angular = 32;
  p.rho_samples = 16;
  return p;
}

bool has_point(const BranchSearch& s, cplx q, int order, double tol) {
  for (const auto& b : s.points)
    if (std::abs(b.q - q) < tol && b.order == order && b.order_resolved) return true;
  return false;
}

ConnectionFamily homogeneous_family(double r, int n) {
  const auto f = homogeneous_torus(r, n);
  const auto mc = maurer_cartan(f, DerivativeScheme::Spectral);
  return build_family(mc.alpha, family_mean_curvature(homogeneous_mean_curvature(r)));
}

}  // namespace

TEST_CASE("synthetic trace zeros") {
  const SyntheticTrace src([](cplx l) { return l + 1.0 / l + 2.0; });
  const auto plan = small_plan();
  const auto sw = trace_sweep(src, plan);
  CHECK(sw.failures == 0);
  const auto bs = branch_points(sw, src, plan, Tolerances{});
  REQUIRE(bs.points.size() == 4);
  CHECK(has_point(bs, cplx(0, 1), 1, 1e-8));
  CHECK(has_point(bs, cplx(0, -1), 1, 1e-8));
  CHECK(has_point(bs, cplx(-2 + std::sqrt(3.0), 0), 1, 1e-8));
  CHECK(has_point(bs, cplx(-2 - std::sqrt(3.0), 0), 1, 1e-8));
  CHECK(bs.unresolved_cells == 0);
  // sorted by modulus
  for (std::size_t k = 1; k < bs.points.size(); ++k) CHECK(std::abs(bs.points[k - 1].q) <= std::abs(bs.points[k].q));
}

TEST_CASE("curve report on planted discriminants") {
  const auto plan = small_plan();
  const Tolerances tol;
  auto run = [&](std::vector<SyntheticDiscriminant::Zero> z) {
    const SyntheticDiscriminant src(std::move(z));
    const auto sw = trace_sweep(src, plan);
    return curve_report(branch_points(sw, src, plan, tol), sw, tol).curve;
  };
  SUBCASE("no zeros") {
    const auto c = run({});
    CHECK(c.g == 0);
    CHECK(c.p == 0);
    CHECK(c.simple);
  }
  SUBCASE("one reality-symmetric pair") {
    const cplx q(0.4, 0.3);
    const auto c = run({{q, 1}, {1.0 / std::conj(q), 1}});
    CHECK(c.g == 1);
    CHECK(c.p == 1);
    CHECK(c.simple);
    CHECK(c.reality_defect < 1e-8);
  }
  SUBCASE("double zero raises p only") {
    const cplx q(0.4, 0.3), d(-0.5, 0.2);
    const auto c = run({{q, 1}, {1.0 / std::conj(q), 1}, {d, 2}});
    CHECK(c.g == 1);
    CHECK(c.p == 2);
    CHECK_FALSE(c.simple);
  }
  SUBCASE("odd number of odd zeros is inconsistent") {
    const auto c = run({{cplx(0.5, 0.1), 1}});
    CHECK_FALSE(c.counts_consistent);
  }
}

TEST_CASE("random planted zero sets are recovered") {
  std::mt19937_64 rng(2024);
  const auto plan = small_plan();
  const Tolerances tol;
  for (int trial = 0; trial < 20; ++trial) {
    const int g = trial % 4;
    const int doubles = (trial / 4) % 2;
    const auto zeros = random_reality_symmetric_zeros(rng, g, doubles);
    const SyntheticDiscriminant src(zeros);
    const auto sw = trace_sweep(src, plan);
    const auto bs = branch_points(sw, src, plan, tol);
    CAPTURE(trial);
    CHECK(bs.points.size() == zeros.size());
    for (const auto& z : zeros) CHECK(has_point(bs, z.q, z.order, 1e-6));
    const auto c = curve_report(bs, sw, tol).curve;
    CHECK(c.g == g);
    CHECK(c.p == g + 2 * doubles);
  }
}

TEST_CASE("vacuum trace sweep") {
  const cplx c = 1.0;
  const auto L = vacuum_lattice(1.0, 64);
  const auto fam = vacuum_family(c, L);
  const FamilySource src(fam, 1);
  for (cplx l : {cplx(0.3, 0.4), cplx(2.0, -1.0), cplx(0.8, 0.6), cplx(-0.2, 0.05)}) {
    const auto s = src.sample(l);
    REQUIRE(s.ok);
    const cplx t = vacuum_trace(c, l, L.gamma1());
    CHECK(std::abs(*s.trace - t) / std::max(1.0, std::abs(t)) < 1e-8);
  }
  // real on the unit circle
  for (int k = 0; k < 8; ++k) {
    const auto s = src.sample(std::polar(1.0, 0.3 + 0.7 * k));
    CHECK(std::abs(s.trace->imag()) < 1e-9);
  }
}

TEST_CASE("trace is 2 at the family's trivial point") {
  const auto fam = homogeneous_family(0.6, 16);
  const FamilySource src(fam, 2);
  const auto s = src.sample(fam.lambda_star());
  REQUIRE(s.ok);
  CHECK(std::abs(*s.trace - 2.0) < 1e-9);
}

TEST_CASE("fixtures have spectral genus zero") {
  SamplingPlan plan;
  plan.circle = 32;
  plan.radial = 17;
  plan.angular = 32;
  plan.rho_samples = 16;
  plan.r_min = 0.1;
  plan.r_max = 10;
  const Tolerances tol;
  SUBCASE("vacuum") {
    const auto fam = vacuum_family(1.0, vacuum_lattice(1.0, 16));
    const FamilySource src(fam, 1);
    const auto sw = trace_sweep(src, plan);
    const auto rep = curve_report(branch_points(sw, src, plan, tol), sw, tol);
    CHECK(rep.curve.g == 0);
    CHECK(rep.curve.p == 0);
    CHECK(rep.curve.simple);
    CHECK(rep.involution.rho_defect < 1e-8);
  }
  SUBCASE("homogeneous r = 0.6") {
    const auto fam = homogeneous_family(0.6, 16);
    const FamilySource src(fam, 1);
    const auto sw = trace_sweep(src, plan);
    const auto rep = curve_report(branch_points(sw, src, plan, tol), sw, tol);
    CHECK(rep.curve.g == 0);
    CHECK(rep.curve.p == 0);
    CHECK(rep.curve.simple);
    CHECK(rep.involution.fixed_point_fraction > 0.0);
  }
}

TEST_CASE("reality classification") {
  const Tolerances tol;
  const auto plus = reality_classify({cplx(2, 0), cplx(0.5, 0)}, tol);
  CHECK(plus.type == RealityType::PlusType);
  CHECK(plus.genus == 1);
  const auto minus = reality_classify({cplx(0, 2), cplx(0, -0.5)}, tol);
  CHECK(minus.type == RealityType::MinusType);
  CHECK(minus.genus == 0);
  const cplx a(0.5, 0.2), b(-0.3, 0.6), d(1.5, -0.4);
  const std::vector<cplx> six = {a, -1.0 / std::conj(a), b, -1.0 / std::conj(b), d, -1.0 / std::conj(d)};
  const auto m6 = reality_classify(six, tol);
  CHECK(m6.type == RealityType::MinusType);
  CHECK(m6.genus == 2);
  REQUIRE(m6.lift_consistent.has_value());
  CHECK_FALSE(*m6.lift_consistent);
  const std::vector<cplx> four = {a, -1.0 / std::conj(a), b, -1.0 / std::conj(b)};
  const auto m4 = reality_classify(four, tol);
  CHECK(m4.genus == 1);
  CHECK(*m4.lift_consistent);
  CHECK(std::abs(m4.lift_sign - 1.0) < 1e-9);
  CHECK(std::abs(m6.lift_sign + 1.0) < 1e-9);
  CHECK(reality_classify({cplx(2, 0), cplx(0.3, 0.1)}, tol).type == RealityType::Inconsistent);
  CHECK(reality_classify({}, tol).type == RealityType::PlusType);
}

TEST_CASE("sweep csv") {
  const SyntheticTrace src([](cplx l) { return l + 1.0 / l; });
  const auto sw = trace_sweep(src, small_plan());
  std::ostringstream os;
  write_trace_sweep_csv(os, sw);
  const auto s = os.str();
  CHECK(s.rfind("set,re_lambda", 0) == 0);
  CHECK(std::count(s.begin(), s.end(), '\n') == 1 + 32 + 18 * 32);
}

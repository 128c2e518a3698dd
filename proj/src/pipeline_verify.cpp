#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "cmc/parallel.hpp"
#include "cmc/pipeline.hpp"
#include "pipeline_internal.hpp"

namespace cmc::pipeline {

using namespace detail;

namespace {

std::string sci(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3e", x);
  return b;
}

class Suite {
 public:
  explicit Suite(const RunConfig& cfg) : cfg_(cfg) {}

  void add(std::string id, int crit, std::string desc, double measured, std::string rel, double thr,
           std::string detail = {}, bool informational = false) {
    Check c;
    c.id = std::move(id);
    c.criterion = crit;
    c.description = std::move(desc);
    c.measured = measured;
    c.relation = std::move(rel);
    if (c.relation == "<" && cfg_.threshold_override) thr = std::min(thr, *cfg_.threshold_override);
    c.threshold = thr;
    if (c.relation == "<")
      c.pass = measured < thr;
    else if (c.relation == ">")
      c.pass = measured > thr;
    else
      c.pass = measured == thr;
    c.informational = informational;
    c.detail = std::move(detail);
    checks.push_back(std::move(c));
  }

  // A group that throws is recorded as one failing check.
  template <typename Fn>
  void group(int crit, const std::string& name, Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      add(name + ".error", crit, "group raised an error", 1, "==", 0, e.what());
    }
    seconds[crit] += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  std::vector<Check> checks;
  std::map<int, double> seconds;

 private:
  const RunConfig& cfg_;
};

const double kClifford = std::sqrt(0.5);

struct Homogeneous {
  double r;
  std::string tag;
};

const std::vector<Homogeneous>& homogeneous_set() {
  static const std::vector<Homogeneous> h = {{0.5, "r0.5"}, {0.6, "r0.6"}, {kClifford, "clifford"}, {0.8, "r0.8"}};
  return h;
}

struct Immersed {
  ImmersionGrid f;
  GeometryReport geo;
  std::unique_ptr<ConnectionFamily> fam;
};

Immersed immersed(ImmersionGrid f, const RunConfig& cfg) {
  Immersed m{std::move(f), {}, nullptr};
  m.geo = geometry(m.f, cfg.scheme);
  m.fam = on_heap(immersion_family(m.f, m.geo, cfg));
  return m;
}

ImmersionGrid perturbed_clifford(const RunConfig& cfg, int n) {
  return perturb(homogeneous_torus(kClifford, n), cfg.amplitude, {cfg.mode_m, cfg.mode_k}, cfg.scheme);
}

double planted_distance(const BranchSearch& s, const SyntheticDiscriminant::Zero& z) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : s.points)
    if (b.order == z.order && b.order_resolved) best = std::min(best, std::abs(b.q - z.q));
  return best;
}

Json check_json(const Check& c) {
  Json j;
  j["id"] = c.id;
  j["criterion"] = c.criterion;
  j["description"] = c.description;
  j["measured"] = c.measured;
  j["relation"] = c.relation;
  j["threshold"] = c.threshold;
  j["pass"] = c.pass;
  j["informational"] = c.informational;
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

}  // namespace

CommandResult verify(const RunConfig& cfg) {
  cfg.validate();
  Suite S(cfg);
  const Tolerances& tol = cfg.tol;
  const int n = cfg.n;

  // 1: flatness iff constant mean curvature
  std::vector<Immersed> hom;
  S.group(1, "flatness", [&] {
    for (const auto& h : homogeneous_set()) {
      hom.push_back(immersed(homogeneous_torus(h.r, n), cfg));
      const auto fl = flatness_sweep(*hom.back().fam, 16);
      S.add("flatness." + h.tag, 1, "max flatness residual over 16 unit-circle lambdas", fl.max, "<", 1e-6);
    }
    const auto p = immersed(perturbed_clifford(cfg, n), cfg);
    const auto fl = flatness_sweep(*p.fam, 16);
    S.add("flatness.perturbed", 1, "perturbed Clifford torus is detected as non-flat", fl.max, ">", 1e-3);
  });

  // 2: trivial point
  S.group(2, "trivial_point", [&] {
    for (std::size_t k = 0; k < hom.size(); ++k) {
      double d = 0;
      for (int g : {1, 2}) {
        const auto h = holonomy(*hom[k].fam, hom[k].fam->lambda_star(), g, holonomy_options(cfg), tol);
        d = std::max(d, (h.matrix - Mat2::identity()).max_abs());
      }
      S.add("trivial_point." + homogeneous_set()[k].tag, 2, "max |H(lambda*) - I| over both generators", d, "<", 1e-7);
    }
  });

  // 3: reality and unitarity
  S.group(3, "reality", [&] {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> lr(std::log(cfg.plan.rho_r_min), std::log(cfg.plan.rho_r_max)),
        ang(0, 2 * kPi);
    std::vector<cplx> pts(64);
    for (auto& z : pts) {
      const double a = lr(rng);
      z = std::polar(std::exp(a), ang(rng));
    }
    const auto circle = unit_circle(64);
    for (std::size_t k = 0; k < hom.size(); ++k) {
      const auto& fam = *hom[k].fam;
      const auto rho = parallel_map(pts.size(), [&](std::size_t i) {
        const cplx t = holonomy(fam, pts[i], 1, holonomy_options(cfg), tol).trace;
        const cplx tr = holonomy(fam, 1.0 / std::conj(pts[i]), 1, holonomy_options(cfg), tol).trace;
        return std::abs(tr - std::conj(t)) / std::max(1.0, std::abs(t));
      });
      const auto tc = parallel_map(circle.size(), [&](std::size_t i) {
        return holonomy(fam, circle[i], 1, holonomy_options(cfg), tol).trace;
      });
      double im = 0, ex = 0;
      for (cplx t : tc) {
        im = std::max(im, std::abs(t.imag()));
        ex = std::max(ex, std::abs(t) - 2.0);
      }
      const auto& tag = homogeneous_set()[k].tag;
      S.add("reality.rho." + tag, 3, "max |tr H(1/conj l) - conj tr H(l)| / max(1,|tr|) over 64 annulus points",
            *std::max_element(rho.begin(), rho.end()), "<", 1e-6);
      S.add("reality.circle_imag." + tag, 3, "max |Im tr| on the unit circle", im, "<", 1e-7);
      S.add("reality.circle_bound." + tag, 3, "max (|tr| - 2) on the unit circle", ex, "<", 1e-7);
    }
  });

  // 4: matrix-exponential oracle
  S.group(4, "mat_exp", [&] {
    std::mt19937_64 rng(cfg.seed + 4);
    std::normal_distribution<double> nd(0, 1);
    auto rnd = [&] {
      Mat2 m;
      for (auto& v : m.a) v = cplx(nd(rng), nd(rng));
      return m - Mat2::identity() * (m.trace() / 2.0);
    };
    const Mat2 Cx = rnd(), Cy = rnd();
    const TorusLattice L(cplx(1.0, 0.2), cplx(0.1, 0.9), 32, 32);
    const auto fam = constant_family(Cx, Cy, L);
    double err = 0;
    for (int g : {1, 2}) {
      const cplx gam = g == 1 ? L.gamma1() : L.gamma2();
      const Mat2 expect = mat_exp(-(Cx * gam.real() + Cy * gam.imag()));
      HolonomyOptions o;
      o.substeps = 64;  // 2048 steps per loop
      const auto h = holonomy(fam, 2.0, g, o, tol);
      err = std::max(err, (h.matrix - expect).max_abs() / std::max(1.0, expect.max_abs()));
    }
    S.add("mat_exp.match", 4, "constant-coefficient holonomy vs mat_exp with 2048 steps", err, "<", 1e-8);

    // convergence: 16, 32, 64 steps on a stiffer coefficient
    const TorusLattice C(cplx(1.0, 0.2), cplx(0.1, 0.9), 16, 16);
    const auto stiff = constant_family(Cx * 4.0, Cy * 4.0, C);
    const Mat2 expect = mat_exp(-(Cx * 4.0 * C.gamma1().real() + Cy * 4.0 * C.gamma1().imag()));
    double e[3];
    for (int k = 0; k < 3; ++k) {
      HolonomyOptions o;
      o.substeps = 1 << k;
      o.audit = false;
      e[k] = (holonomy(stiff, 2.0, 1, o, tol).matrix - expect).max_abs();
    }
    const double o1 = std::log2(e[0] / e[1]), o2 = std::log2(e[1] / e[2]);
    const double order = std::min(o1, o2);
    S.add("mat_exp.order", 4, "observed RK4 order over 16/32/64 steps (min of two ratios)", order, ">", 3.5,
          "errors " + sci(e[0]) + " " + sci(e[1]) + " " + sci(e[2]));
    S.add("mat_exp.order_upper", 4, "observed order does not exceed fourth order by much", order, "<", 4.6);
  });

  // 5-7: Sym-Bobenko
  const auto vac = on_heap(vacuum_family(1.0, vacuum_lattice(1.0, n)));
  FrameOptions fo;
  fo.substeps = cfg.substeps;
  S.group(5, "sym_s3", [&] {
    auto m = cmc::reconstruct(*vac, SymConfig::make(SpaceForm::S3, 1.0, -1.0), fo, tol);
    verify_cmc(m);
    S.add("sym_s3.minimal", 5, "max |H| at Sym points 1, -1", max_abs_H(m), "<", 1e-4);
    auto m2 = cmc::reconstruct(*vac, SymConfig::make(SpaceForm::S3, std::polar(1.0, kPi / 4), std::polar(1.0, -kPi / 4)),
                               fo, tol);
    const auto r = verify_cmc(m2);
    S.add("sym_s3.cmc1", 5, "| |H| - 1 | at Sym points exp(+-i pi/4)", r.H_abs_error, "<", 1e-3);
    S.add("sym_s3.cmc1_constant", 5, "max |H - mean| at Sym points exp(+-i pi/4)", r.H_max_deviation, "<", 1e-3);
  });
  S.group(6, "sym_r3", [&] {
    auto m = cmc::reconstruct(*vac, SymConfig::make(SpaceForm::R3, 1.0), fo, tol);
    const auto r = verify_cmc(m);
    S.add("sym_r3.cmc1", 6, "| |H_mean| - 1 | at lambda0 = 1", std::abs(std::abs(r.H_mean) - 1.0), "<", 1e-3);
    S.add("sym_r3.constant", 6, "max |H - mean|", r.H_max_deviation, "<", 1e-3);
  });
  S.group(7, "sym_h3", [&] {
    auto m = cmc::reconstruct(*vac, SymConfig::make(SpaceForm::H3, 0.5), fo, tol);
    const auto r = verify_cmc(m);
    S.add("sym_h3.cmc", 7, "| |H_mean| - 5/3 | at lambda0 = 0.5", std::abs(std::abs(r.H_mean) - 5.0 / 3.0), "<", 1e-3);
    S.add("sym_h3.constant", 7, "max |H - mean|", r.H_max_deviation, "<", 1e-3);
  });

  // 8: spectral genus
  S.group(8, "genus", [&] {
    RunConfig sc = cfg;
    sc.n = cfg.spectral_n;
    struct Named {
      std::string tag;
      std::unique_ptr<ConnectionFamily> fam;
    };
    std::vector<Named> fams;
    fams.push_back({"vacuum", on_heap(vacuum_family(cfg.c, vacuum_lattice(cfg.c, sc.n)))});
    for (const auto& h : homogeneous_set()) {
      auto m = immersed(homogeneous_torus(h.r, sc.n), sc);
      fams.push_back({h.tag, std::move(m.fam)});
    }
    for (const auto& nf : fams) {
      const FamilySource src(*nf.fam, 1, holonomy_options(sc));
      const auto sw = trace_sweep(src, cfg.plan);
      const auto rep = curve_report(branch_points(sw, src, cfg.plan, tol), sw, tol).curve;
      S.add("genus." + nf.tag + ".g", 8, "geometric genus", rep.g, "==", 0);
      S.add("genus." + nf.tag + ".p", 8, "arithmetic genus", rep.p, "==", 0);
      S.add("genus." + nf.tag + ".simple", 8, "simple (p = g)", rep.simple ? 1 : 0, "==", 1);
    }
    std::mt19937_64 rng(cfg.seed);
    double worst = 0;
    int bad_counts = 0, bad_genus = 0;
    for (int trial = 0; trial < 20; ++trial) {
      const int g = trial % 4, doubles = (trial / 4) % 2;
      const auto zeros = random_reality_symmetric_zeros(rng, g, doubles);
      const SyntheticDiscriminant src(zeros);
      const auto sw = trace_sweep(src, cfg.plan);
      const auto bs = branch_points(sw, src, cfg.plan, tol);
      if (bs.points.size() != zeros.size()) ++bad_counts;
      for (const auto& z : zeros) worst = std::max(worst, planted_distance(bs, z));
      const auto c = curve_report(bs, sw, tol).curve;
      if (c.g != g || c.p != g + 2 * doubles) ++bad_genus;
    }
    S.add("genus.planted.location", 8, "max location error of planted zeros with matching order (20 sets)", worst, "<",
          1e-6);
    S.add("genus.planted.count", 8, "sets with a wrong number of recovered zeros", bad_counts, "==", 0);
    S.add("genus.planted.genus", 8, "sets with wrong (g, p)", bad_genus, "==", 0);
  });

  // 9: reality classification
  S.group(9, "reality_type", [&] {
    std::mt19937_64 rng(cfg.seed + 9);
    std::uniform_real_distribution<double> rad(0.3, 0.85), ang(0, 2 * kPi);
    int plus_wrong = 0, minus_wrong = 0, lift_wrong = 0, cases = 0;
    for (int trial = 0; trial < 12; ++trial) {
      const int pairs = 1 + trial % 4;
      std::vector<cplx> plus, minus;
      for (int k = 0; k < pairs; ++k) {
        const cplx q = std::polar(rad(rng), ang(rng));
        plus.push_back(q);
        plus.push_back(1.0 / std::conj(q));
        minus.push_back(q);
        minus.push_back(-1.0 / std::conj(q));
      }
      if (reality_classify(plus, tol).type != RealityType::PlusType) ++plus_wrong;
      const auto m = reality_classify(minus, tol);
      if (m.type != RealityType::MinusType) ++minus_wrong;
      // minus type: g = pairs - 1; the lift is inconsistent exactly for even g > 0
      const int g = pairs - 1;
      if (g > 0 && g % 2 == 0) {
        ++cases;
        if (!m.lift_consistent || *m.lift_consistent) ++lift_wrong;
      } else if (g > 0 && (!m.lift_consistent || !*m.lift_consistent)) {
        ++lift_wrong;
      }
    }
    S.add("reality_type.plus", 9, "plus-type sets misclassified (12 sets)", plus_wrong, "==", 0);
    S.add("reality_type.minus", 9, "minus-type sets misclassified (12 sets)", minus_wrong, "==", 0);
    S.add("reality_type.lift", 9, "wrong lift-consistency verdicts", lift_wrong, "==", 0,
          std::to_string(cases) + " even-genus minus-type sets");
    S.add("reality_type.even_cases", 9, "even-genus minus-type sets constructed", cases, ">", 0);
  });

  // 10 and 11: constrained Willmore family and the conformal Gauss map
  S.group(10, "willmore", [&] {
    const auto& cl = hom.at(2);  // clifford
    const auto Sg = conformal_gauss_map(cl.f, cl.geo, cfg.scheme, tol);
    const auto hf = hopf_fields(Sg, cfg.scheme);
    const auto nu = zero_multiplier(cl.f.lattice());
    S.add("willmore.residual", 10, "Clifford torus Euler-Lagrange residual, nu = 0", willmore_residual(hf, nu), "<",
          1e-5);
    S.add("willmore.type_identities", 10, "max of the Hopf-field type defects *A - SA, *Q + SQ",
          std::max(hf.type_A_defect, hf.type_Q_defect), "<", 1e-8);
    const auto fam = build_cw_family(Sg, hf, nu, tol);
    S.add("willmore.projections", 10, "projection identity defect", fam.projection_defect(), "<", 1e-10);
    const auto mus = mu_circle(cfg.cw_samples);
    const auto fl = parallel_map(mus.size(), [&](std::size_t k) { return fam.flatness_residual(mus[k]); });
    S.add("willmore.flatness", 10, "max CW flatness residual over sampled mu", *std::max_element(fl.begin(), fl.end()),
          "<", 1e-5);
    CWHolonomyOptions o;
    o.method = cfg.interpolation;
    const auto one = cw_holonomy(fam, 1.0, 1, o, tol);
    S.add("willmore.mu1_identity", 10, "||H(mu = 1) - I||", (one.H - Mat4::identity()).norm(), "<", 1e-8);
    const auto sw = cw_sweep(fam, mus, o, tol);
    const auto cr = case_classify(sw);
    S.add("willmore.palindromic", 10, "max palindromic defect of the 4x4 holonomy spectra", cr.max_palindromic_defect,
          "<", 1e-6);
    S.add("willmore.trace_reality", 10, "max |tr H(1/conj mu) - conj tr H(mu)|",
          trace_reality_defect(fam, {cplx(0.5, 0.3), cplx(1.7, -0.4)}, 1, o, tol), "<", 1e-6);
    S.add("willmore.case", 10, "classification of the Clifford torus, nu = 0 (1 = case1, 2 = case2, 0 = undetermined)",
          cr.result == CWCase::Case1 ? 1 : cr.result == CWCase::Case2 ? 2 : 0, "==", 2,
          to_string(cr.result) + ": " + std::to_string(cr.kernel_samples) + "/" + std::to_string(cr.samples) +
              " samples with a 2-dim eigenvalue-1 space, max 2nd singular value " + sci(cr.max_kernel_sv),
          true);
    const auto p = perturbed_clifford(cfg, n);
    const auto pg = geometry(p, cfg.scheme);
    const auto pS = conformal_gauss_map(p, pg, cfg.scheme, tol);
    const auto ph = hopf_fields(pS, cfg.scheme);
    const auto pf = build_cw_family(pS, ph, zero_multiplier(p.lattice()), tol);
    const auto pfl = parallel_map(mus.size(), [&](std::size_t k) { return pf.flatness_residual(mus[k]); });
    S.add("willmore.perturbed", 10, "perturbed fixture: max CW flatness residual",
          *std::max_element(pfl.begin(), pfl.end()), ">", 1e-3);
  });

  S.group(11, "cgm", [&] {
    struct Item {
      std::string tag;
      ImmersionGrid f;
    };
    std::vector<Item> items;
    for (std::size_t k = 0; k < hom.size(); ++k) items.push_back({homogeneous_set()[k].tag, hom[k].f});
    items.push_back({"perturbed", perturbed_clifford(cfg, n)});
    items.push_back({"hopf", hopf_torus(cfg.hopf_a, cfg.hopf_w, n, n)});
    Tolerances loose = tol;
    loose.s2 = loose.sphere_contract = 1.0;  // measure here, judge below
    for (const auto& it : items) {
      try {
        const auto c = conformal_gauss_map(it.f, geometry(it.f, cfg.scheme), cfg.scheme, loose);
        S.add("cgm." + it.tag + ".s2", 11, "max ||S^2 + 1||", c.s2_defect, "<", 1e-10);
        S.add("cgm." + it.tag + ".stability", 11, "S-stability of L", c.stability_defect, "<", 1e-8);
        S.add("cgm." + it.tag + ".tangency", 11, "sphere tangency", c.tangency_defect, "<", 1e-5);
        S.add("cgm." + it.tag + ".h_match", 11, "mean-curvature match", c.h_match_defect, "<", 1e-5);
      } catch (const Error& e) {
        S.add("cgm." + it.tag + ".contract", 11, "contract evaluation", 1, "==", 0, e.what());
      }
    }
  });

  CommandResult res;
  res.checks = S.checks;
  res.seconds = S.seconds;
  Json j = header(cfg, "verify");
  int passed = 0, failed = 0, info = 0;
  Json arr = Json::array();
  std::ostringstream sum;
  for (const auto& c : S.checks) {
    arr.push_back(check_json(c));
    if (c.informational)
      ++info;
    else if (c.pass)
      ++passed;
    else
      ++failed;
    sum << (c.informational ? "[INFO] " : c.pass ? "[PASS] " : "[FAIL] ") << c.id << "  " << sci(c.measured) << " "
        << c.relation << " " << sci(c.threshold);
    if (!c.detail.empty()) sum << "  (" << c.detail << ")";
    sum << "\n";
  }
  j["checks"] = arr;
  j["totals"] = {{"checks", S.checks.size()}, {"passed", passed}, {"failed", failed}, {"informational", info}};
  j["pass"] = failed == 0;
  sum << passed << " passed, " << failed << " failed, " << info << " informational\n";
  res.exit_code = failed == 0 ? 0 : 1;
  res.report = j;
  res.summary = sum.str();
  res.files = {"verify.json", "summary.txt"};
  write_text(cfg, "verify.json", dump(j));
  write_text(cfg, "summary.txt", res.summary);
  return res;
}

}  // namespace cmc::pipeline

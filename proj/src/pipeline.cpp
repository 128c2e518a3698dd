#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmc/parallel.hpp"
#include "cmc/pipeline.hpp"
#include "pipeline_internal.hpp"

namespace cmc::pipeline {

namespace detail {

Json cjson(cplx z) { return Json::array({z.real(), z.imag()}); }

Json header(const RunConfig& cfg, const std::string& command) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["tool"] = "cmc-spectral";
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  Json c = Json::object();
  for (const auto& [k, v] : cfg.values()) c[k] = v;
  j["config"] = c;
  return j;
}

std::vector<cplx> unit_circle(int n) { return mu_circle(n, 1.0); }

ConnectionFamily immersion_family(const ImmersionGrid& f, const GeometryReport& geo, const RunConfig& cfg) {
  const auto mc = maurer_cartan(f, cfg.scheme);
  return build_family(mc.alpha, family_mean_curvature(geo.H_mean), cfg.interpolation, cfg.scheme);
}

std::unique_ptr<ConnectionFamily> on_heap(const ConnectionFamily& f) {
  return std::make_unique<ConnectionFamily>(f.base(), f.a_prime(), f.a_doubleprime(), f.H(), f.interpolation(),
                                            f.scheme());
}

HolonomyOptions holonomy_options(const RunConfig& cfg) {
  HolonomyOptions o;
  o.substeps = cfg.substeps;
  return o;
}

FlatnessSweep flatness_sweep(const ConnectionFamily& fam, int samples) {
  FlatnessSweep s;
  s.lambdas = unit_circle(samples);
  s.residual = parallel_map(s.lambdas.size(), [&](std::size_t k) { return flatness_residual(fam, s.lambdas[k]); });
  for (std::size_t k = 0; k < s.lambdas.size(); ++k)
    if (k == 0 || s.residual[k] > s.max) {
      s.max = s.residual[k];
      s.worst = s.lambdas[k];
    }
  return s;
}

double max_abs_H(const SurfaceMesh& m) {
  double h = 0;
  for (double x : m.H)
    if (std::isfinite(x)) h = std::max(h, std::abs(x));
  return h;
}

}  // namespace detail

using namespace detail;

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

void write_text(const RunConfig& cfg, const std::string& name, const std::string& text) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw UsageError("cannot create output directory '" + cfg.out + "': " + ec.message());
  const fs::path p = fs::path(cfg.out) / name;
  std::ofstream os(p, std::ios::binary);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  os << text;
  if (!os) throw Error("write failed for '" + p.string() + "'");
}

Fixture load_fixture(const RunConfig& cfg) {
  cfg.validate();
  Fixture fx;
  fx.kind = cfg.fixture;
  const double clifford_r = std::sqrt(0.5);
  try {
    if (cfg.fixture == "vacuum") {
      fx.family = on_heap(vacuum_family(cfg.c, vacuum_lattice(cfg.c, cfg.n)));
      return fx;
    }
    if (cfg.fixture == "clifford")
      fx.immersion = homogeneous_torus(clifford_r, cfg.n);
    else if (cfg.fixture == "homogeneous")
      fx.immersion = homogeneous_torus(cfg.r, cfg.n);
    else if (cfg.fixture == "perturbed")
      fx.immersion = perturb(homogeneous_torus(clifford_r, cfg.n), cfg.amplitude, {cfg.mode_m, cfg.mode_k}, cfg.scheme);
    else if (cfg.fixture == "hopf")
      fx.immersion = hopf_torus(cfg.hopf_a, cfg.hopf_w, cfg.n, cfg.n);
    else
      fx.immersion = load_immersion_csv(cfg.file, cfg.tol.unit_norm);
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError("fixture '" + cfg.fixture + "': " + e.what());
  }
  fx.geometry = geometry(*fx.immersion, cfg.scheme);
  fx.family = on_heap(immersion_family(*fx.immersion, *fx.geometry, cfg));
  return fx;
}

namespace {

Json geometry_json(const GeometryReport& g) {
  Json j;
  j["H_mean"] = g.H_mean;
  j["H_min"] = g.H_min;
  j["H_max"] = g.H_max;
  j["H_spread"] = g.H_max - g.H_min;
  j["E_min"] = g.E_min;
  j["E_max"] = g.E_max;
  j["conformality_defect"] = g.conformality_defect;
  j["normal_defect"] = g.normal_defect;
  return j;
}

Json branch_json(const BranchPoint& b) {
  Json j;
  j["q"] = cjson(b.q);
  j["order"] = b.order;
  j["winding"] = b.winding;
  j["order_resolved"] = b.order_resolved;
  j["identity_holonomy"] = b.is_identity_holonomy;
  j["identity_order"] = b.identity_order;
  j["contribution"] = b.contribution;
  j["residual"] = b.residual;
  j["converged"] = b.converged;
  if (!b.note.empty()) j["note"] = b.note;
  return j;
}

struct SpectralRun {
  TraceSweep sweep;
  BranchSearch search;
  CurveReport report;
};

SpectralRun spectral_run(const ConnectionFamily& fam, const RunConfig& cfg) {
  const FamilySource src(fam, cfg.generator, holonomy_options(cfg));
  SpectralRun r;
  r.sweep = trace_sweep(src, cfg.plan);
  r.search = branch_points(r.sweep, src, cfg.plan, cfg.tol);
  r.report = curve_report(r.search, r.sweep, cfg.tol);
  return r;
}

Json curve_json(const SpectralRun& r) {
  const auto& c = r.report.curve;
  Json j;
  j["g"] = c.g;
  j["p"] = c.p;
  j["simple"] = c.simple;
  j["counts_consistent"] = c.counts_consistent;
  j["reality_defect"] = c.reality_defect;
  j["identity_points"] = c.identity_points;
  j["unresolved"] = c.unresolved;
  j["branched_at_zero_and_infinity"] = c.branched_at_zero_and_infinity;
  j["branch_points"] = Json::array();
  for (const auto& b : c.points) j["branch_points"].push_back(branch_json(b));
  j["warnings"] = c.warnings;
  return j;
}

Json involution_json(const InvolutionReport& v) {
  Json j;
  j["sigma_defect"] = v.sigma_defect;
  j["rho_defect"] = v.rho_defect;
  j["fixed_point_fraction"] = v.fixed_point_fraction;
  j["circle_max_imag_trace"] = v.circle_max_imag;
  j["circle_max_trace_excess"] = v.circle_max_excess;
  return j;
}

Json sweep_json(const SpectralRun& r) {
  Json j;
  j["source"] = r.sweep.source;
  j["circle_samples"] = r.sweep.circle.size();
  j["annulus_samples"] = r.sweep.annulus.size();
  j["rho_pairs"] = r.sweep.rho_pairs.size();
  j["failures"] = r.sweep.failures;
  j["max_step_defect"] = r.sweep.max_step_defect;
  j["evaluations"] = r.search.evaluations;
  j["unresolved_cells"] = r.search.unresolved_cells;
  j["warnings"] = r.search.warnings;
  return j;
}

struct TrivialPoint {
  cplx lambda;
  double defect[2] = {0, 0};
};

TrivialPoint trivial_point(const ConnectionFamily& fam, const RunConfig& cfg) {
  TrivialPoint t;
  t.lambda = fam.lambda_star();
  for (int g : {1, 2}) {
    auto o = holonomy_options(cfg);
    o.strict = false;
    const auto h = holonomy(fam, t.lambda, g, o, cfg.tol);
    t.defect[g - 1] = (h.matrix - Mat2::identity()).max_abs();
  }
  return t;
}

struct CWRun {
  SphereCongruence S;
  HopfFields h;
  LagrangeMultiplier nu;
  CWFamily fam;
  double residual = 0;
  std::vector<cplx> mus;
  std::vector<double> flatness;
  double max_flatness = 0;
  bool flat = false;
  std::vector<CWSample> sweep;
  CaseReport cases;
  double palindromic = 0;
  double det = 0, step = 0;
};

CWRun cw_run(const ImmersionGrid& f, const GeometryReport& geo, const RunConfig& cfg) {
  CWRun r;
  r.S = conformal_gauss_map(f, geo, cfg.scheme, cfg.tol);
  r.h = hopf_fields(r.S, cfg.scheme);
  r.nu = zero_multiplier(f.lattice());
  r.residual = willmore_residual(r.h, r.nu);
  r.fam = build_cw_family(r.S, r.h, r.nu, cfg.tol);
  r.mus = mu_circle(cfg.cw_samples);
  r.flatness = parallel_map(r.mus.size(), [&](std::size_t k) { return r.fam.flatness_residual(r.mus[k]); });
  r.max_flatness = *std::max_element(r.flatness.begin(), r.flatness.end());
  r.flat = r.max_flatness < cfg.tol.flatness_threshold;
  if (r.flat) {
    CWHolonomyOptions o;
    o.method = cfg.interpolation;
    r.sweep = cw_sweep(r.fam, r.mus, o, cfg.tol);
    r.cases = case_classify(r.sweep);
    r.palindromic = r.cases.max_palindromic_defect;
    for (const auto& s : r.sweep)
      for (const auto* h : {&s.h1, &s.h2}) {
        r.det = std::max(r.det, h->det_defect);
        r.step = std::max(r.step, h->step_defect);
      }
  }
  return r;
}

Json cw_json(const CWRun& r) {
  Json j;
  j["multiplier"] = "zero";
  Json cgm;
  cgm["s2_defect"] = r.S.s2_defect;
  cgm["stability_defect"] = r.S.stability_defect;
  cgm["tangency_defect"] = r.S.tangency_defect;
  cgm["h_match_defect"] = r.S.h_match_defect;
  cgm["linearity_defect"] = r.S.linearity_defect;
  j["conformal_gauss_map"] = cgm;
  Json hf;
  hf["type_A_defect"] = r.h.type_A_defect;
  hf["type_Q_defect"] = r.h.type_Q_defect;
  hf["anticommute_defect"] = r.h.anticommute_defect;
  hf["reassembly_defect"] = r.h.reassembly_defect;
  j["hopf_fields"] = hf;
  j["willmore_residual"] = r.residual;
  j["projection_defect"] = r.fam.projection_defect();
  Json fl = Json::array();
  for (std::size_t k = 0; k < r.mus.size(); ++k) fl.push_back({{"mu", cjson(r.mus[k])}, {"residual", r.flatness[k]}});
  j["flatness"] = fl;
  j["max_flatness_residual"] = r.max_flatness;
  j["flat"] = r.flat;
  if (r.flat) {
    j["max_palindromic_defect"] = r.palindromic;
    j["max_det_defect"] = r.det;
    j["max_step_defect"] = r.step;
    Json c;
    c["result"] = to_string(r.cases.result);
    c["samples"] = r.cases.samples;
    c["kernel_samples"] = r.cases.kernel_samples;
    c["distinct_samples"] = r.cases.distinct_samples;
    c["max_kernel_singular_value"] = r.cases.max_kernel_sv;
    c["min_eigenvalue_gap"] = r.cases.min_gap;
    if (!r.cases.note.empty()) c["note"] = r.cases.note;
    j["classification"] = c;
  }
  return j;
}

std::string sci(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3e", x);
  return b;
}

}  // namespace

CommandResult analyze(const RunConfig& cfg) {
  Fixture fx = load_fixture(cfg);
  const auto& fam = *fx.family;
  CommandResult res;
  Json j = header(cfg, "analyze");
  std::ostringstream sum;
  sum << "analyze " << fx.kind << " n=" << cfg.n << "\n";

  Json fj;
  fj["kind"] = fx.kind;
  fj["n1"] = fx.lattice().n1();
  fj["n2"] = fx.lattice().n2();
  fj["gamma1"] = cjson(fx.lattice().gamma1());
  fj["gamma2"] = cjson(fx.lattice().gamma2());
  fj["family_H"] = fam.H();
  j["fixture"] = fj;
  if (fx.geometry) {
    j["geometry"] = geometry_json(*fx.geometry);
    sum << "H_mean " << fx.geometry->H_mean << "  spread " << sci(fx.geometry->H_max - fx.geometry->H_min) << "\n";
  }

  const auto fl = flatness_sweep(fam, cfg.flat_samples);
  const bool flat = fl.max < cfg.tol.flatness_threshold;
  Json fs;
  fs["samples"] = Json::array();
  for (std::size_t k = 0; k < fl.lambdas.size(); ++k)
    fs["samples"].push_back({{"lambda", cjson(fl.lambdas[k])}, {"residual", fl.residual[k]}});
  fs["max_residual"] = fl.max;
  fs["threshold"] = cfg.tol.flatness_threshold;
  fs["flat"] = flat;
  j["flatness"] = fs;
  sum << "flatness max " << sci(fl.max) << (flat ? " (flat)" : " (NOT flat)") << "\n";
  if (!flat) {
    Json v;
    v["max_residual"] = fl.max;
    v["worst_lambda"] = cjson(fl.worst);
    v["threshold"] = cfg.tol.flatness_threshold;
    v["message"] = "associated family is not flat: the immersion does not have constant mean curvature";
    j["flatness_violation"] = v;
  }

  const auto tp = trivial_point(fam, cfg);
  j["trivial_point"] = {{"lambda", cjson(tp.lambda)}, {"identity_defect", {tp.defect[0], tp.defect[1]}}};

  if (flat) {
    const auto sr = spectral_run(fam, cfg);
    j["trace_sweep"] = sweep_json(sr);
    j["curve"] = curve_json(sr);
    j["involution"] = involution_json(sr.report.involution);
    std::ostringstream csv;
    write_trace_sweep_csv(csv, sr.sweep);
    write_text(cfg, "trace_sweep.csv", csv.str());
    res.files.push_back("trace_sweep.csv");
    sum << "spectral genus g=" << sr.report.curve.g << " p=" << sr.report.curve.p
        << " simple=" << (sr.report.curve.simple ? "true" : "false") << "\n";
  } else {
    j["curve"] = nullptr;
    sum << "spectral data skipped (family not flat)\n";
  }

  if (fx.immersion) {
    const auto cw = cw_run(*fx.immersion, *fx.geometry, cfg);
    j["willmore"] = cw_json(cw);
    sum << "willmore residual " << sci(cw.residual) << "  CW flatness " << sci(cw.max_flatness) << "\n";
    if (cw.flat) {
      std::ostringstream csv;
      write_cw_spectra_csv(csv, cw.sweep);
      write_text(cfg, "cw_spectra.csv", csv.str());
      res.files.push_back("cw_spectra.csv");
      sum << "CW case " << to_string(cw.cases.result) << "\n";
    }
  } else {
    j["willmore"] = nullptr;
  }

  res.files.insert(res.files.begin(), {"analyze.json", "summary.txt"});
  j["files"] = res.files;
  res.report = j;
  res.summary = sum.str();
  write_text(cfg, "analyze.json", dump(j));
  write_text(cfg, "summary.txt", res.summary);
  return res;
}

CommandResult reconstruct(const RunConfig& cfg) {
  cfg.validate();
  const SymConfig sym = cfg.sym();  // usage errors before any computation
  Fixture fx = load_fixture(cfg);
  FrameOptions fo;
  fo.substeps = cfg.substeps;
  SurfaceMesh mesh = cmc::reconstruct(*fx.family, sym, fo, cfg.tol);
  const auto rep = verify_cmc(mesh);
  const double hmax = max_abs_H(mesh);

  CommandResult res;
  Json j = header(cfg, "reconstruct");
  Json s;
  s["target"] = to_string(sym.target);
  s["lambda0"] = cjson(sym.lambda0);
  s["lambda1"] = cjson(sym.lambda1);
  j["sym"] = s;
  Json r;
  r["predicted_H"] = rep.predicted_H;
  r["H_mean"] = rep.H_mean;
  r["H_max_abs"] = hmax;
  r["H_max_deviation"] = rep.H_max_deviation;
  r["H_abs_error"] = rep.H_abs_error;
  r["conformality_defect"] = rep.conformality_defect;
  r["periodicity"] = {rep.periodicity[0], rep.periodicity[1]};
  r["product_defect"] = rep.product_defect;
  r["samples"] = rep.samples;
  j["report"] = r;
  const bool ok = rep.H_abs_error <= cfg.sym_h_tolerance && rep.H_max_deviation <= cfg.sym_h_tolerance;
  j["h_tolerance"] = cfg.sym_h_tolerance;
  j["pass"] = ok;
  res.exit_code = ok ? 0 : 1;

  std::ostringstream obj, csv;
  write_obj(obj, mesh);
  write_mesh_csv(csv, mesh);
  write_text(cfg, "mesh.obj", obj.str());
  write_text(cfg, "mesh.csv", csv.str());
  res.files = {"reconstruct.json", "summary.txt", "mesh.obj", "mesh.csv"};
  j["files"] = res.files;

  std::ostringstream sum;
  sum << "reconstruct " << fx.kind << " in " << to_string(sym.target) << "\n"
      << "predicted H " << rep.predicted_H << "  measured mean " << rep.H_mean << "\n"
      << "abs error " << sci(rep.H_abs_error) << "  max deviation " << sci(rep.H_max_deviation) << "  max |H| "
      << sci(hmax) << "\n"
      << (ok ? "PASS" : "FAIL") << " (tolerance " << sci(cfg.sym_h_tolerance) << ")\n";
  res.summary = sum.str();
  res.report = j;
  write_text(cfg, "reconstruct.json", dump(j));
  write_text(cfg, "summary.txt", res.summary);
  return res;
}

CommandResult spectral_export(const RunConfig& cfg) {
  Fixture fx = load_fixture(cfg);
  const auto& fam = *fx.family;
  CommandResult res;
  Json j = header(cfg, "spectral-export");
  std::ostringstream sum;

  const auto fl = flatness_sweep(fam, cfg.flat_samples);
  j["max_flatness_residual"] = fl.max;
  if (fl.max >= cfg.tol.flatness_threshold)
    throw Error("spectral-export: family is not flat (residual " + sci(fl.max) + "); spectral data undefined");

  const auto sr = spectral_run(fam, cfg);
  std::ostringstream ts;
  write_trace_sweep_csv(ts, sr.sweep);
  write_text(cfg, "trace_sweep.csv", ts.str());

  // full holonomy on the unit circle, generator from the config
  const auto lams = unit_circle(cfg.plan.circle);
  const auto rows = parallel_map(lams.size(), [&](std::size_t k) {
    const auto h = holonomy(fam, lams[k], cfg.generator, holonomy_options(cfg), cfg.tol);
    return SweepRow{lams[k], h.trace, h.eta[0]};
  });
  std::ostringstream hs;
  write_holonomy_sweep_csv(hs, rows);
  write_text(cfg, "holonomy_sweep.csv", hs.str());

  Json bp = header(cfg, "spectral-export");
  bp["generator"] = cfg.generator;
  bp["curve"] = curve_json(sr);
  bp["involution"] = involution_json(sr.report.involution);
  write_text(cfg, "branch_points.json", dump(bp));
  res.files = {"spectral_export.json", "trace_sweep.csv", "holonomy_sweep.csv", "branch_points.json"};

  if (fx.immersion) {
    const auto cw = cw_run(*fx.immersion, *fx.geometry, cfg);
    j["willmore"] = cw_json(cw);
    if (cw.flat) {
      std::ostringstream cs;
      write_cw_spectra_csv(cs, cw.sweep);
      write_text(cfg, "cw_spectra.csv", cs.str());
      res.files.push_back("cw_spectra.csv");
    }
  }
  j["generator"] = cfg.generator;
  j["trace_sweep"] = sweep_json(sr);
  j["g"] = sr.report.curve.g;
  j["p"] = sr.report.curve.p;
  j["files"] = res.files;
  sum << "spectral-export " << fx.kind << ": g=" << sr.report.curve.g << " p=" << sr.report.curve.p << ", "
      << sr.report.curve.points.size() << " branch points\n";
  res.summary = sum.str();
  res.report = j;
  write_text(cfg, "spectral_export.json", dump(j));
  return res;
}

}  // namespace cmc::pipeline

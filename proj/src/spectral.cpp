#include "cmc/spectral.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "cmc/parallel.hpp"

namespace cmc {

namespace {

// Portable uniform [0, 1) from a 64-bit engine.
double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * (1.0 / 9007199254740992.0); }

bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

double trace_scale(const SpectralSample& s) { return s.trace ? std::max(1.0, std::norm(*s.trace)) : 1.0; }

}  // namespace

void SamplingPlan::validate() const {
  if (!(r_min > 0) || !(r_max > r_min)) throw Error("SamplingPlan: need 0 < r_min < r_max");
  if (circle < 16 || radial < 16 || angular < 16 || rho_samples < 16)
    throw Error("SamplingPlan: sample counts must be at least 16");
  if (!(rho_r_min > 0) || !(rho_r_max > rho_r_min)) throw Error("SamplingPlan: bad reality-check radii");
  if (newton_budget < 1 || refine_depth < 0 || order_angles < 3) throw Error("SamplingPlan: bad search budget");
}

// ---------------------------------------------------------------------------
// Sources

FamilySource::FamilySource(const ConnectionFamily& fam, int generator, HolonomyOptions opt)
    : fam_(fam), gen_(generator), opt_(opt) {
  if (generator != 1 && generator != 2) throw Error("FamilySource: generator must be 1 or 2");
  opt_.strict = false;
}

SpectralSample FamilySource::sample(cplx lambda) const {
  SpectralSample s;
  s.lambda = lambda;
  try {
    const auto h = holonomy(fam_, lambda, gen_, opt_);
    s.trace = h.trace;
    s.matrix = h.matrix;
    s.D = h.trace * h.trace - 4.0;
    s.step_defect = h.step_defect;
    s.ok = finite(s.D);
    if (!s.ok) s.error = "non-finite trace";
  } catch (const Error& e) {
    s.ok = false;
    s.error = e.what();
  }
  return s;
}

SpectralSample SyntheticTrace::sample(cplx lambda) const {
  SpectralSample s;
  s.lambda = lambda;
  const cplx t = t_(lambda);
  s.trace = t;
  s.D = t * t - 4.0;
  s.ok = finite(s.D);
  return s;
}

SyntheticDiscriminant::SyntheticDiscriminant(std::vector<Zero> zeros) : zeros_(std::move(zeros)) {
  for (const auto& z : zeros_) {
    if (z.q == 0.0 || z.order < 1) throw Error("SyntheticDiscriminant: zeros must be non-zero with positive order");
    total_ += z.order;
  }
}

SpectralSample SyntheticDiscriminant::sample(cplx lambda) const {
  SpectralSample s;
  s.lambda = lambda;
  cplx d = std::pow(lambda, -double(total_ / 2));
  for (const auto& z : zeros_)
    for (int k = 0; k < z.order; ++k) d *= (lambda - z.q);
  s.D = d;
  s.ok = finite(d) && lambda != 0.0;
  return s;
}

std::vector<SyntheticDiscriminant::Zero> random_reality_symmetric_zeros(std::mt19937_64& rng, int g, int double_pairs) {
  std::vector<SyntheticDiscriminant::Zero> out;
  auto far_enough = [&](cplx q) {
    for (const auto& z : out)
      if (std::abs(z.q - q) < 0.15) return false;
    return std::abs(q - 1.0 / std::conj(q)) >= 0.15;
  };
  const int pairs = g + double_pairs;
  for (int k = 0; k < pairs; ++k) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10000) throw Error("random_reality_symmetric_zeros: could not place zeros");
      const double r = 0.3 + 0.55 * uniform01(rng);
      const double th = 2 * kPi * uniform01(rng);
      const cplx q = std::polar(r, th);
      if (!far_enough(q) || !far_enough(1.0 / std::conj(q))) continue;
      const int order = k < g ? 1 : 2;
      out.push_back({q, order});
      out.push_back({1.0 / std::conj(q), order});
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweep

cplx annulus_node(const SamplingPlan& plan, int i, int k) {
  const double du = std::log(plan.r_max / plan.r_min) / plan.radial;
  const double u = std::log(plan.r_min) + du * i;
  const double th = 2 * kPi * (k + 0.5) / plan.angular;
  return std::exp(cplx(u, th));
}

TraceSweep trace_sweep(const SpectralSource& src, const SamplingPlan& plan) {
  plan.validate();
  TraceSweep sw;
  sw.source = src.kind();
  sw.circle = parallel_map(std::size_t(plan.circle), [&](std::size_t k) {
    return src.sample(std::polar(1.0, 2 * kPi * (double(k) + 0.5) / plan.circle));
  });
  const int nodes1 = plan.radial + 1;
  sw.annulus = parallel_map(std::size_t(nodes1 * plan.angular), [&](std::size_t idx) {
    const int i = int(idx) / plan.angular, k = int(idx) % plan.angular;
    return src.sample(annulus_node(plan, i, k));
  });
  std::mt19937_64 rng(plan.seed);
  std::vector<cplx> pts(std::size_t(plan.rho_samples));
  const double lr0 = std::log(plan.rho_r_min), lr1 = std::log(plan.rho_r_max);
  for (auto& p : pts) {
    const double lr = lr0 + (lr1 - lr0) * uniform01(rng);
    p = std::polar(std::exp(lr), 2 * kPi * uniform01(rng));
  }
  sw.rho_pairs = parallel_map(pts.size(), [&](std::size_t k) {
    return std::make_pair(src.sample(pts[k]), src.sample(1.0 / std::conj(pts[k])));
  });
  auto tally = [&](const SpectralSample& s) {
    if (!s.ok) ++sw.failures;
    sw.max_step_defect = std::max(sw.max_step_defect, s.step_defect);
  };
  for (const auto& s : sw.circle) tally(s);
  for (const auto& s : sw.annulus) tally(s);
  for (const auto& pr : sw.rho_pairs) {
    tally(pr.first);
    tally(pr.second);
  }
  return sw;
}

// ---------------------------------------------------------------------------
// Zero search

namespace {

struct Evaluator {
  const SpectralSource& src;
  std::atomic<int>* count;
  SpectralSample operator()(cplx l) const {
    ++*count;
    return src.sample(l);
  }
};

// D together with its log-derivative D'/D (central difference).
struct Node {
  cplx l, D, g;
  bool ok = false;
};

Node make_node(const Evaluator& eval, cplx l, std::optional<cplx> known = std::nullopt) {
  Node n{l, 0, 0, false};
  if (known) {
    n.D = *known;
  } else {
    const auto s = eval(l);
    if (!s.ok) return n;
    n.D = s.D;
  }
  if (n.D == 0.0) return n;
  const double h = 1e-6 * std::abs(l);
  const auto p = eval(l + h), m = eval(l - h);
  if (!p.ok || !m.ok) return n;
  n.g = (p.D - m.D) / (2 * h * n.D);
  n.ok = finite(n.g);
  return n;
}

// Accumulated change of arg D along a path. A step is trusted only when the
// log-derivative at both ends bounds its turn, so a zero grazing the path
// forces steps shorter than the distance to it.
constexpr int kEdgeDepth = 20;

struct PhaseWalk {
  const Evaluator& eval;
  std::function<cplx(double)> path;
  bool ok = true;

  double run(double s0, const Node& a, double s1, const Node& b, int depth) {
    if (!ok) return 0;
    if (!a.ok || !b.ok) {
      ok = false;
      return 0;
    }
    const cplx dl = b.l - a.l;
    const double d = std::arg(b.D / a.D);
    const double ta = std::abs(a.g * dl), tb = std::abs(b.g * dl);
    const double predicted = std::imag(0.5 * (a.g + b.g) * dl);
    if (ta < kPi / 4 && tb < kPi / 4 && std::abs(d - predicted) < kPi / 8) return d;
    if (depth == 0) {
      ok = false;
      return d;
    }
    const double sm = 0.5 * (s0 + s1);
    const Node m = make_node(eval, path(sm));
    return run(s0, a, sm, m, depth - 1) + run(sm, m, s1, b, depth - 1);
  }
};

struct Rect {
  double u0, u1, t0, t1;
  cplx at(double a, double b) const { return std::exp(cplx(u0 + a * (u1 - u0), t0 + b * (t1 - t0))); }
  cplx centre() const { return at(0.5, 0.5); }
  bool contains(cplx l, double grow) const {
    const double u = std::log(std::abs(l));
    double t = std::arg(l);
    const double mid = 0.5 * (t0 + t1);
    while (t < mid - kPi) t += 2 * kPi;
    while (t > mid + kPi) t -= 2 * kPi;
    const double gu = grow * (u1 - u0), gt = grow * (t1 - t0);
    return u >= u0 - gu && u <= u1 + gu && t >= t0 - gt && t <= t1 + gt;
  }
};

// Winding number of D around a rectangle in (log r, theta); nullopt when a
// sample fails or a zero sits on the boundary.
std::optional<int> rect_winding(const Evaluator& eval, const Rect& r) {
  const cplx c[4] = {r.at(0, 0), r.at(1, 0), r.at(1, 1), r.at(0, 1)};
  Node s[4];
  for (int k = 0; k < 4; ++k) {
    s[k] = make_node(eval, c[k]);
    if (!s[k].ok) return std::nullopt;
  }
  double total = 0;
  const std::pair<double, double> from[4] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  for (int k = 0; k < 4; ++k) {
    const auto a = from[k], b = from[(k + 1) % 4];
    PhaseWalk w{eval, [&](double x) { return r.at(a.first + x * (b.first - a.first), a.second + x * (b.second - a.second)); }};
    total += w.run(0, s[k], 1, s[(k + 1) % 4], kEdgeDepth);
    if (!w.ok) return std::nullopt;
  }
  const double w = total / (2 * kPi);
  const double rw = std::round(w);
  if (std::abs(w - rw) > 0.1) return std::nullopt;
  return int(rw);
}

struct Candidate {
  cplx q;
  int multiplicity;
  bool converged;
  double residual;
  std::string note;
  bool identity_refined = false;
};

Mat2 eigen_gap(const SpectralSample& s) { return *s.matrix - Mat2::identity() * (*s.trace / 2.0); }

// Near a +-identity holonomy a double zero of D is split by sampling noise;
// solve N(lambda) = 0 (Gauss-Newton) and move the candidate there.
void refine_identity(const Evaluator& eval, Candidate& c, const Tolerances& tol) {
  auto s = eval(c.q);
  if (!s.ok || !s.matrix || !s.trace) return;
  auto rel = [](const SpectralSample& x) { return eigen_gap(x).norm() / std::max(1.0, x.matrix->norm()); };
  if (rel(s) > 1e-2) return;
  const cplx q0 = c.q;
  cplx l = c.q;
  for (int it = 0; it < 30; ++it) {
    const double h = 1e-5 * std::abs(l);
    const auto sp = eval(l + h), sm = eval(l - h);
    if (!sp.ok || !sm.ok) return;
    const Mat2 N = eigen_gap(s), dN = (eigen_gap(sp) - eigen_gap(sm)) * (1.0 / (2 * h));
    cplx num = 0;
    double den = 0;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        num += std::conj(dN(i, j)) * N(i, j);
        den += std::norm(dN(i, j));
      }
    if (den == 0) return;
    const cplx step = num / den;
    l -= step;
    if (std::abs(l - q0) > 1e-2 * std::abs(q0)) return;
    s = eval(l);
    if (!s.ok) return;
    if (std::abs(step) <= 1e-13 * std::abs(l)) break;
  }
  if (rel(s) < tol.identity_holonomy) {
    c.q = l;
    c.identity_refined = true;
  }
}

std::optional<Candidate> newton(const Evaluator& eval, cplx start, int m, const Rect& cell, const SamplingPlan& plan,
                                const Tolerances& tol) {
  cplx l = start;
  const double cap = 0.5 * std::abs(start) * std::max(cell.u1 - cell.u0, cell.t1 - cell.t0);
  bool small_step = false;
  SpectralSample s;
  for (int it = 0; it < plan.newton_budget; ++it) {
    s = eval(l);
    if (!s.ok) return std::nullopt;
    if (s.D == 0.0) break;
    const double h = 1e-6 * std::abs(l);
    const auto sp = eval(l + h), sm = eval(l - h);
    if (!sp.ok || !sm.ok) return std::nullopt;
    const cplx dD = (sp.D - sm.D) / (2 * h);
    if (dD == 0.0 || !finite(dD)) break;
    cplx step = double(m) * s.D / dD;
    if (std::abs(step) > cap) step *= cap / std::abs(step);
    l -= step;
    if (std::abs(step) <= 1e-13 * std::abs(l)) {
      small_step = true;
      s = eval(l);
      break;
    }
  }
  if (!s.ok) return std::nullopt;
  Candidate c{l, m, false, std::abs(s.D) / trace_scale(s), ""};
  // a noisy source cannot do better than its own step-halving defect
  c.converged = c.residual <= std::max(tol.newton_residual, 100 * s.step_defect) || small_step;
  if (!c.converged) c.note = "Newton budget exhausted";
  return c;
}

void search_rect(const Evaluator& eval, const Rect& r, int w, int depth, int streak, const SamplingPlan& plan,
                 const Tolerances& tol, std::vector<Candidate>& out, int& unresolved) {
  if (w <= 0) return;
  const bool can_split = depth < plan.refine_depth;
  if (w == 1 || !can_split || streak >= 2) {
    auto c = newton(eval, r.centre(), w, r, plan, tol);
    if (c && c->converged && r.contains(c->q, 1e-9)) {
      out.push_back(*c);
      return;
    }
    if (w == 1 && can_split) {
      // Newton left the cell: retry from smaller cells
    } else {
      Candidate bad{r.centre(), w, false, c ? c->residual : 0.0, "unresolved cell"};
      if (c && !r.contains(c->q, 1e-9)) bad.note = "Newton left its cell";
      out.push_back(bad);
      ++unresolved;
      return;
    }
  }
  // off-centre splits keep symmetric zeros (lambda = +-1, +-i, |lambda| = 1)
  // off child edges; a zero grazing a child edge gets another try
  static constexpr double kSplits[3][2] = {{0.5618, 0.4582}, {0.4141, 0.5873}, {0.6472, 0.3719}};
  Rect kids[4];
  std::optional<int> kw[4];
  bool additive = false;
  for (const auto& f : kSplits) {
    const double um = r.u0 + f[0] * (r.u1 - r.u0), tm = r.t0 + f[1] * (r.t1 - r.t0);
    kids[0] = {r.u0, um, r.t0, tm};
    kids[1] = {um, r.u1, r.t0, tm};
    kids[2] = {r.u0, um, tm, r.t1};
    kids[3] = {um, r.u1, tm, r.t1};
    int sum = 0;
    bool ok = true;
    for (int k = 0; k < 4 && ok; ++k) {
      kw[k] = rect_winding(eval, kids[k]);
      ok = kw[k].has_value();
      if (ok) sum += *kw[k];
    }
    if (ok && sum == w) {
      additive = true;
      break;
    }
  }
  if (!additive) {
    out.push_back({r.centre(), w, false, 0.0, "winding not additive under refinement"});
    ++unresolved;
    return;
  }
  int holders = 0;
  for (int k = 0; k < 4; ++k) holders += *kw[k] > 0 ? 1 : 0;
  const int next_streak = (holders == 1 && w >= 2) ? streak + 1 : 0;
  for (int k = 0; k < 4; ++k) search_rect(eval, kids[k], *kw[k], depth + 1, next_streak, plan, tol, out, unresolved);
}

double fit_slope(const std::array<double, 3>& x, const std::array<double, 3>& y) {
  const double mx = (x[0] + x[1] + x[2]) / 3, my = (y[0] + y[1] + y[2]) / 3;
  double sxy = 0, sxx = 0;
  for (int k = 0; k < 3; ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxy / sxx;
}

BranchPoint characterize(const Evaluator& eval, const Candidate& c, double d_near, const SamplingPlan& plan,
                         const Tolerances& tol) {
  BranchPoint b;
  b.q = c.q;
  b.converged = c.converged;
  b.residual = c.residual;
  b.note = c.note;
  b.winding = c.multiplicity;
  const double rho0 = std::max(1e-7 * std::abs(c.q), std::min(1e-2 * std::abs(c.q), 0.3 * d_near));
  const std::array<double, 3> rho = {rho0, rho0 / 2, rho0 / 4};
  const std::array<double, 3> lr = {std::log(rho[0]), std::log(rho[1]), std::log(rho[2])};
  const int K = plan.order_angles;
  double slope_D = 0, slope_N = 0;
  bool have_matrix = true, ok = true;
  std::vector<Node> ring;
  for (int j = 0; j < K; ++j) {
    const cplx dir = std::polar(1.0, 2 * kPi * (j + 0.25) / K);
    std::array<double, 3> yD{}, yN{};
    for (int r = 0; r < 3; ++r) {
      const auto s = eval(c.q + rho[r] * dir);
      if (!s.ok || s.D == 0.0) {
        ok = false;
        break;
      }
      if (r == 0) ring.push_back(make_node(eval, s.lambda, s.D));
      yD[r] = std::log(std::abs(s.D));
      if (s.matrix && s.trace) {
        const Mat2 N = *s.matrix - Mat2::identity() * (*s.trace / 2.0);
        yN[r] = std::log(std::max(N.norm(), 1e-300));
      } else {
        have_matrix = false;
      }
    }
    if (!ok) break;
    slope_D += fit_slope(lr, yD) / K;
    if (have_matrix) slope_N += fit_slope(lr, yN) / K;
  }
  if (!ok) {
    b.order_resolved = false;
    b.note = "order fit failed";
    return b;
  }
  b.slope = slope_D;
  b.order = int(std::round(slope_D));
  b.order_resolved = std::abs(slope_D - b.order) <= tol.branch_order_margin && b.order >= 1;
  // winding around the small circle as a cross-check
  double phase = 0;
  bool wok = true;
  for (int j = 0; j < K && wok; ++j) {
    const double a0 = 2 * kPi * (j + 0.25) / K, a1 = 2 * kPi * (j + 1.25) / K;
    PhaseWalk w{eval, [&](double x) { return c.q + rho0 * std::polar(1.0, a0 + x * (a1 - a0)); }};
    phase += w.run(0, ring[std::size_t(j)], 1, ring[std::size_t((j + 1) % K)], kEdgeDepth);
    wok = w.ok;
  }
  if (wok) {
    b.winding = int(std::round(phase / (2 * kPi)));
    if (!c.converged) {
      b.order_resolved = false;
    } else if (b.winding != b.order) {
      b.order_resolved = false;
      b.note = "log-slope order disagrees with winding";
    } else if (b.order != c.multiplicity) {
      b.order_resolved = false;
      b.note = "local order disagrees with the cell windings";
    }
  }
  const auto at = eval(c.q);
  if (have_matrix && at.ok && at.matrix && at.trace) {
    const double rel = eigen_gap(at).norm() / std::max(1.0, at.matrix->norm());
    // N vanishing at q shows up as a positive log-slope of |N|
    const int kN = int(std::round(slope_N));
    b.is_identity_holonomy = rel < tol.identity_holonomy || (kN >= 1 && std::abs(slope_N - kN) <= tol.branch_order_margin);
    if (b.is_identity_holonomy) {
      b.identity_order = std::max(1, kN);
      if (std::abs(slope_N - b.identity_order) > tol.branch_order_margin) {
        b.order_resolved = false;
        b.note = "identity order unresolved";
      }
    }
  }
  b.contribution = b.order - 2 * b.identity_order;
  return b;
}

}  // namespace

BranchSearch branch_points(const TraceSweep& sweep, const SpectralSource& src, const SamplingPlan& plan,
                           const Tolerances& tol) {
  plan.validate();
  const int R = plan.radial, A = plan.angular;
  if (sweep.annulus.size() != std::size_t((R + 1) * A)) throw Error("branch_points: sweep does not match the plan");
  std::atomic<int> count{0};
  const Evaluator eval{src, &count};
  const double du = std::log(plan.r_max / plan.r_min) / R, dt = 2 * kPi / A;
  const double u_min = std::log(plan.r_min);
  auto th = [&](int k) { return dt * (k + 0.5); };

  // radial edges (i,k): node(i,k) -> node(i+1,k); arcs (i,k): node(i,k) -> node(i,k+1)
  struct Edge {
    double phase;
    bool ok;
  };
  const auto nodes = parallel_map(sweep.annulus.size(), [&](std::size_t k) {
    const auto& s = sweep.annulus[k];
    return s.ok ? make_node(eval, s.lambda, s.D) : Node{s.lambda, 0, 0, false};
  });
  auto walk = [&](std::function<cplx(double)> path, std::size_t a, std::size_t b) -> Edge {
    PhaseWalk w{eval, std::move(path)};
    const double p = w.run(0, nodes[a], 1, nodes[b], kEdgeDepth);
    return {p, w.ok};
  };
  auto nid = [&](int i, int k) { return std::size_t(i * A + ((k % A) + A) % A); };
  const auto radial = parallel_map(std::size_t(R * A), [&](std::size_t idx) {
    const int i = int(idx) / A, k = int(idx) % A;
    return walk([&, i, k](double x) { return std::exp(cplx(u_min + du * (i + x), th(k))); }, nid(i, k), nid(i + 1, k));
  });
  const auto arcs = parallel_map(std::size_t((R + 1) * A), [&](std::size_t idx) {
    const int i = int(idx) / A, k = int(idx) % A;
    return walk([&, i, k](double x) { return std::exp(cplx(u_min + du * i, th(k) + x * dt)); }, nid(i, k), nid(i, k + 1));
  });

  BranchSearch out;
  struct Cell {
    Rect r;
    int w;
  };
  std::vector<Cell> active;
  for (int i = 0; i < R; ++i)
    for (int k = 0; k < A; ++k) {
      const Edge& e0 = radial[std::size_t(i * A + k)];
      const Edge& e1 = arcs[std::size_t((i + 1) * A + k)];
      const Edge& e2 = radial[std::size_t(i * A + (k + 1) % A)];
      const Edge& e3 = arcs[std::size_t(i * A + k)];
      const Rect rect{u_min + du * i, u_min + du * (i + 1), th(k), th(k) + dt};
      if (!(e0.ok && e1.ok && e2.ok && e3.ok)) {
        // retry with a fresh, independently sampled boundary
        const auto w = rect_winding(eval, rect);
        if (!w) {
          ++out.unresolved_cells;
          std::ostringstream m;
          m << "cell around " << rect.centre() << ": winding undetermined";
          out.warnings.push_back(m.str());
          continue;
        }
        if (*w) active.push_back({rect, *w});
        continue;
      }
      const double total = e0.phase + e1.phase - e2.phase - e3.phase;
      const double w = total / (2 * kPi);
      const int rw = int(std::round(w));
      if (std::abs(w - rw) > 0.1 || rw < 0) {
        ++out.unresolved_cells;
        out.warnings.push_back("non-integral or negative winding");
        continue;
      }
      if (rw) active.push_back({rect, rw});
    }

  struct Found {
    std::vector<Candidate> c;
    int unresolved = 0;
  };
  const auto found = parallel_map(active.size(), [&](std::size_t k) {
    Found f;
    search_rect(eval, active[k].r, active[k].w, 0, 0, plan, tol, f.c, f.unresolved);
    return f;
  });
  std::vector<Candidate> cands;
  for (const auto& f : found) {
    cands.insert(cands.end(), f.c.begin(), f.c.end());
    out.unresolved_cells += f.unresolved;
  }
  {
    std::vector<Candidate> refined = parallel_map(cands.size(), [&](std::size_t k) {
      Candidate c = cands[k];
      if (c.converged) refine_identity(eval, c, tol);
      return c;
    });
    cands = std::move(refined);
  }
  std::vector<Candidate> uniq;
  for (const auto& c : cands) {
    bool dup = false;
    for (auto& u : uniq) {
      if (u.identity_refined && c.identity_refined && std::abs(u.q - c.q) <= 1e-4 * std::abs(c.q)) {
        // noise-split zeros of one identity point
        u.multiplicity += c.multiplicity;
        u.converged = u.converged && c.converged;
        dup = true;
        break;
      }
      if (std::abs(u.q - c.q) <= 1e-8 * std::abs(c.q)) {
        // reached from two cells; the local order check below decides
        // whether the summed multiplicity is real or a zero went missing
        u.multiplicity += c.multiplicity;
        u.converged = u.converged && c.converged;
        dup = true;
        break;
      }
    }
    if (!dup) uniq.push_back(c);
  }
  out.points = parallel_map(uniq.size(), [&](std::size_t k) {
    double d_near = std::abs(uniq[k].q);
    for (std::size_t j = 0; j < uniq.size(); ++j)
      if (j != k) d_near = std::min(d_near, std::abs(uniq[j].q - uniq[k].q));
    return characterize(eval, uniq[k], d_near, plan, tol);
  });
  std::sort(out.points.begin(), out.points.end(), [](const BranchPoint& a, const BranchPoint& b) {
    const double ra = std::abs(a.q), rb = std::abs(b.q);
    if (ra != rb) return ra < rb;
    return std::arg(a.q) < std::arg(b.q);
  });
  out.evaluations = count.load();
  return out;
}

// ---------------------------------------------------------------------------

CurveReport curve_report(const BranchSearch& search, const TraceSweep& sweep, const Tolerances& tol) {
  (void)tol;
  CurveReport rep;
  auto& c = rep.curve;
  c.points = search.points;
  c.warnings = search.warnings;
  c.unresolved = search.unresolved_cells;
  int n_odd = 0, twice_p = 0;
  std::vector<cplx> odd;
  for (const auto& b : c.points) {
    if (!b.order_resolved || !b.converged) {
      ++c.unresolved;
      continue;
    }
    if (b.is_identity_holonomy) ++c.identity_points;
    if (b.order % 2 == 1 && !b.is_identity_holonomy) {
      ++n_odd;
      odd.push_back(b.q);
    }
    if (b.contribution < 0) {
      c.counts_consistent = false;
      c.warnings.push_back("negative genus contribution at an identity point");
    }
    twice_p += b.contribution;
  }
  if (n_odd % 2 != 0 || twice_p % 2 != 0) c.counts_consistent = false;
  c.g = n_odd / 2;
  c.p = twice_p / 2;
  if (c.p < c.g) c.counts_consistent = false;
  c.branched_at_zero_and_infinity = n_odd % 2 == 0;
  for (const auto& q : odd) {
    double best = 1e300;
    for (const auto& r : odd) best = std::min(best, std::abs(q - 1.0 / std::conj(r)) / std::abs(q));
    c.reality_defect = std::max(c.reality_defect, best);
  }
  c.simple = c.counts_consistent && c.unresolved == 0 && c.p == c.g;

  auto& inv = rep.involution;
  auto sigma = [&](const SpectralSample& s) {
    if (!s.ok || !s.matrix) return;
    const auto e = eigen(*s.matrix);
    inv.sigma_defect =
        std::max(inv.sigma_defect, std::abs(e[0].value * e[1].value - 1.0) / std::max(1.0, std::norm(e[0].value)));
  };
  for (const auto& s : sweep.circle) sigma(s);
  for (const auto& s : sweep.annulus) sigma(s);
  for (const auto& [a, b] : sweep.rho_pairs) {
    if (!a.ok || !b.ok || !a.trace || !b.trace) continue;
    inv.rho_defect = std::max(inv.rho_defect, std::abs(*b.trace - std::conj(*a.trace)) / std::max(1.0, std::abs(*a.trace)));
  }
  int fixed = 0, counted = 0;
  for (const auto& s : sweep.circle) {
    if (!s.ok || !s.trace) continue;
    ++counted;
    const cplx t = *s.trace;
    inv.circle_max_imag = std::max(inv.circle_max_imag, std::abs(t.imag()));
    inv.circle_max_excess = std::max(inv.circle_max_excess, std::abs(t) - 2.0);
    if (std::abs(t.imag()) <= 1e-7 * std::max(1.0, std::abs(t)) && std::abs(t.real()) <= 2 + 1e-7) ++fixed;
  }
  inv.circle_max_excess = std::max(0.0, inv.circle_max_excess);
  inv.fixed_point_fraction = counted ? double(fixed) / counted : 0.0;
  return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(RealityType t) {
  switch (t) {
    case RealityType::PlusType: return "plus_type";
    case RealityType::MinusType: return "minus_type";
    default: return "inconsistent";
  }
}

namespace {
double pairing_defect(const std::vector<cplx>& q, double sign) {
  double worst = 0;
  for (const auto& a : q) {
    const cplx partner = sign / std::conj(a);
    double best = 1e300;
    for (const auto& b : q) best = std::min(best, std::abs(b - partner) / std::max(1.0, std::abs(partner)));
    worst = std::max(worst, best);
  }
  return worst;
}
}  // namespace

RealityClassification reality_classify(const std::vector<cplx>& q, const Tolerances& tol) {
  RealityClassification r;
  for (const auto& z : q)
    if (z == 0.0 || !finite(z)) throw Error("reality_classify: points must be finite and non-zero");
  r.plus_defect = pairing_defect(q, 1.0);
  r.minus_defect = pairing_defect(q, -1.0);
  const int n = int(q.size());
  if (n % 2 != 0) return r;
  if (r.plus_defect <= tol.reality) {
    r.type = RealityType::PlusType;
    r.genus = n / 2;
    return r;
  }
  if (r.minus_defect > tol.reality || n == 0) return r;
  r.type = RealityType::MinusType;
  r.genus = n / 2 - 1;
  // pair q with -1/conj q and evaluate c^2 = P(-1/conj l) conj(l)^n / conj P(l)
  std::vector<char> used(q.size(), 0);
  cplx reps = 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (used[i]) continue;
    used[i] = 1;
    std::size_t best = i;
    double bd = 1e300;
    for (std::size_t j = 0; j < q.size(); ++j) {
      if (used[j]) continue;
      const double d = std::abs(q[j] + 1.0 / std::conj(q[i]));
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    used[best] = 1;
    reps *= std::conj(q[i]) / q[i];
  }
  auto P = [&](cplx l) {
    cplx v = 1.0;
    for (const auto& z : q) v *= (l - z);
    return v;
  };
  const cplx l(0.37, 0.21);
  const cplx c2 = P(-1.0 / std::conj(l)) * std::pow(std::conj(l), double(n)) / std::conj(P(l));
  r.lift_sign = c2 * reps;
  r.lift_consistent = std::abs(r.lift_sign - 1.0) < 1e-6;
  return r;
}

void write_trace_sweep_csv(std::ostream& os, const TraceSweep& sw) {
  os << std::setprecision(17);
  os << "set,re_lambda,im_lambda,re_trace,im_trace,re_eta,im_eta,re_D,im_D,ok\n";
  auto row = [&](const char* set, const SpectralSample& s) {
    cplx t = s.trace.value_or(cplx(std::nan(""), std::nan("")));
    cplx eta = s.trace ? quadratic_eigenvalues(t, 1.0)[0] : cplx(std::nan(""), std::nan(""));
    if (s.matrix) eta = quadratic_eigenvalues(t, det(*s.matrix))[0];
    os << set << ',' << s.lambda.real() << ',' << s.lambda.imag() << ',' << t.real() << ',' << t.imag() << ','
       << eta.real() << ',' << eta.imag() << ',' << s.D.real() << ',' << s.D.imag() << ',' << (s.ok ? 1 : 0) << '\n';
  };
  for (const auto& s : sw.circle) row("circle", s);
  for (const auto& s : sw.annulus) row("annulus", s);
}

}  // namespace cmc

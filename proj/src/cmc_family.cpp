#include "cmc/cmc_family.hpp"

#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "cmc/parallel.hpp"

namespace cmc {

namespace {

bool is_zero(const OneForm<Mat2>& a) {
  for (std::size_t k = 0; k < a.lattice().sites(); ++k)
    if (a.dx.at(k).max_abs() != 0.0 || a.dy.at(k).max_abs() != 0.0) return false;
  return true;
}

GridField<Mat2> curl(const OneForm<Mat2>& a, DerivativeScheme scheme) {
  auto [axx, axy] = partial_derivatives(a.dx, scheme);
  auto [ayx, ayy] = partial_derivatives(a.dy, scheme);
  (void)axx;
  (void)ayy;
  std::vector<Mat2> c(a.lattice().sites());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = ayx.at(k) - axy.at(k);
  return GridField<Mat2>(a.lattice(), std::move(c));
}

Mat2 combine(const SegmentCoefficients& seg, std::size_t k, cplx c1, cplx c2) {
  Mat2 m = seg.ap[k] * c1 + seg.app[k] * c2;
  if (seg.has_base) m += seg.base[k];
  return m;
}

OneForm<Mat2> constant_form(const TorusLattice& L, const Mat2& x, const Mat2& y) {
  return OneForm<Mat2>(GridField<Mat2>(L, x), GridField<Mat2>(L, y));
}

Mat2 E12() {
  Mat2 m;
  m(0, 1) = 1.0;
  return m;
}

}  // namespace

ConnectionFamily::ConnectionFamily(OneForm<Mat2> base, OneForm<Mat2> a_prime, OneForm<Mat2> a_doubleprime, double H,
                                   Interpolation interp, DerivativeScheme scheme)
    : base_(std::move(base)), ap_(std::move(a_prime)), app_(std::move(a_doubleprime)), H_(H), interp_(interp),
      scheme_(scheme) {
  if (!(base_.lattice() == ap_.lattice()) || !(ap_.lattice() == app_.lattice()))
    throw Error("ConnectionFamily: coefficient forms live on different lattices");
  if (!std::isfinite(H)) throw Error("ConnectionFamily: H must be finite");
  has_base_ = !is_zero(base_);
}

std::pair<cplx, cplx> ConnectionFamily::coefficients(cplx lambda) const {
  if (lambda == 0.0 || !std::isfinite(lambda.real()) || !std::isfinite(lambda.imag()))
    throw Error("ConnectionFamily: lambda must be finite and non-zero");
  const cplx iH = I_unit * H_;
  return {0.5 * (1.0 + 1.0 / lambda) * (1.0 + iH), 0.5 * (1.0 + lambda) * (1.0 - iH)};
}

cplx ConnectionFamily::lambda_star() const { return (1.0 + I_unit * H_) / (1.0 - I_unit * H_); }

OneForm<Mat2> ConnectionFamily::evaluate(cplx lambda) const {
  const auto [c1, c2] = coefficients(lambda);
  const auto& L = lattice();
  std::vector<Mat2> x(L.sites()), y(L.sites());
  for (std::size_t k = 0; k < L.sites(); ++k) {
    x[k] = base_.dx.at(k) + ap_.dx.at(k) * c1 + app_.dx.at(k) * c2;
    y[k] = base_.dy.at(k) + ap_.dy.at(k) * c1 + app_.dy.at(k) * c2;
  }
  return OneForm<Mat2>(GridField<Mat2>(L, std::move(x)), GridField<Mat2>(L, std::move(y)));
}

void ConnectionFamily::sample(double s, double t, cplx v, Mat2& b, Mat2& p, Mat2& q) const {
  const auto& L = lattice();
  const Stencil wa = interpolation_weights(interp_, L.n1(), s * L.n1());
  const Stencil wb = interpolation_weights(interp_, L.n2(), t * L.n2());
  Mat2 acc[6];
  const GridField<Mat2>* fields[6] = {&base_.dx, &base_.dy, &ap_.dx, &ap_.dy, &app_.dx, &app_.dy};
  const int first = has_base_ ? 0 : 2;
  for (std::size_t jb = 0; jb < wb.offset.size(); ++jb)
    for (std::size_t ia = 0; ia < wa.offset.size(); ++ia) {
      const double w = wa.weight[ia] * wb.weight[jb];
      const std::size_t k = L.index(wa.offset[ia], wb.offset[jb]);
      for (int f = first; f < 6; ++f) {
        const Mat2& m = fields[f]->at(k);
        for (std::size_t e = 0; e < 4; ++e) acc[f].a[e] += w * m.a[e];
      }
    }
  b = acc[0] * v.real() + acc[1] * v.imag();
  p = acc[2] * v.real() + acc[3] * v.imag();
  q = acc[4] * v.real() + acc[5] * v.imag();
}

Mat2 ConnectionFamily::at(cplx lambda, double s, double t, cplx v) const {
  const auto [c1, c2] = coefficients(lambda);
  Mat2 b, p, q;
  sample(s, t, v, b, p, q);
  return b + p * c1 + q * c2;
}

namespace {
SegmentCoefficients build_segment(const ConnectionFamily& fam, double s0, double t0, double s1, double t1, int steps,
                                  const std::function<void(double, double, cplx, Mat2&, Mat2&, Mat2&)>& sample) {
  SegmentCoefficients seg;
  seg.steps = steps;
  seg.has_base = fam.has_base();
  const std::size_t nodes = std::size_t(2 * steps + 1);
  seg.base.resize(nodes);
  seg.ap.resize(nodes);
  seg.app.resize(nodes);
  const cplx v = fam.lattice().point(s1 - s0, t1 - t0);  // dz/dtau
  for (std::size_t k = 0; k < nodes; ++k) {
    const double tau = double(k) / double(nodes - 1);
    sample(s0 + tau * (s1 - s0), t0 + tau * (t1 - t0), v, seg.base[k], seg.ap[k], seg.app[k]);
  }
  return seg;
}
}  // namespace

std::shared_ptr<const SegmentCoefficients> ConnectionFamily::segment(double s0, double t0, double s1, double t1,
                                                                     int steps) const {
  const auto key = std::make_tuple(s0, t0, s1, t1, steps);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto seg = std::make_shared<const SegmentCoefficients>(build_segment(
      *this, s0, t0, s1, t1, steps,
      [this](double s, double t, cplx v, Mat2& b, Mat2& p, Mat2& q) { sample(s, t, v, b, p, q); }));
  std::lock_guard<std::mutex> lock(mu_);
  return cache_.emplace(key, std::move(seg)).first->second;
}

const ConnectionFamily::Curls& ConnectionFamily::curls() const {
  std::lock_guard<std::mutex> lock(mu_);
  if (!curls_) curls_ = Curls{curl(base_, scheme_), curl(ap_, scheme_), curl(app_, scheme_)};
  return *curls_;
}

ConnectionFamily build_family(const OneForm<Mat2>& alpha, double H, Interpolation interp, DerivativeScheme scheme) {
  auto [ap, app] = type_split(alpha);
  const auto& L = alpha.lattice();
  return ConnectionFamily(constant_form(L, Mat2::zero(), Mat2::zero()), std::move(ap), std::move(app), H, interp,
                          scheme);
}

Mat2 transport(const SegmentCoefficients& seg, cplx c1, cplx c2, int stride) {
  if (seg.steps % stride != 0) throw Error("transport: step count not divisible by stride");
  const int n = seg.steps / stride;
  const double h = 1.0 / n;
  Mat2 Y = Mat2::identity();
  Mat2 C0 = combine(seg, 0, c1, c2);
  for (int k = 0; k < n; ++k) {
    const std::size_t im = std::size_t((2 * k + 1) * stride), ie = std::size_t((2 * k + 2) * stride);
    const Mat2 Cm = combine(seg, im, c1, c2), C1 = combine(seg, ie, c1, c2);
    const Mat2 k1 = -(C0 * Y);
    const Mat2 k2 = -(Cm * (Y + k1 * (h / 2)));
    const Mat2 k3 = -(Cm * (Y + k2 * (h / 2)));
    const Mat2 k4 = -(C1 * (Y + k3 * h));
    Y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6);
    C0 = C1;
  }
  return Y;
}

FlatnessReport flatness_report(const ConnectionFamily& fam, cplx lambda, int edge_substeps) {
  const auto [c1, c2] = fam.coefficients(lambda);
  const auto& L = fam.lattice();
  const int n1 = L.n1(), n2 = L.n2();
  // Edge transports: horizontal (i,j)->(i+1,j) and vertical (i,j)->(i,j+1), computed row by row.
  std::vector<Mat2> hor(L.sites()), ver(L.sites());
  const auto rows = parallel_map(std::size_t(n2), [&](std::size_t j) {
    std::vector<std::pair<Mat2, Mat2>> row(static_cast<std::size_t>(n1));
    for (int i = 0; i < n1; ++i) {
      const double s = double(i) / n1, t = double(j) / n2;
      const auto sh = fam.segment(s, t, s + 1.0 / n1, t, edge_substeps);
      const auto sv = fam.segment(s, t, s, t + 1.0 / n2, edge_substeps);
      row[std::size_t(i)] = {transport(*sh, c1, c2), transport(*sv, c1, c2)};
    }
    return row;
  });
  for (int j = 0; j < n2; ++j)
    for (int i = 0; i < n1; ++i) {
      hor[L.index(i, j)] = rows[std::size_t(j)][std::size_t(i)].first;
      ver[L.index(i, j)] = rows[std::size_t(j)][std::size_t(i)].second;
    }
  FlatnessReport rep;
  const double cell = L.area() / double(L.sites());
  for (const auto& q : plaquettes(L)) {
    const int i = q.i, j = q.j;
    const Mat2 loop = inverse(ver[L.index(i, j)]) * inverse(hor[L.index(i, j + 1)]) * ver[L.index(i + 1, j)] *
                      hor[L.index(i, j)];
    rep.plaquette = std::max(rep.plaquette, (loop - Mat2::identity()).norm() / cell);
  }
  const auto& cu = fam.curls();
  for (std::size_t k = 0; k < L.sites(); ++k) {
    const Mat2 ox = fam.base().dx.at(k) + fam.a_prime().dx.at(k) * c1 + fam.a_doubleprime().dx.at(k) * c2;
    const Mat2 oy = fam.base().dy.at(k) + fam.a_prime().dy.at(k) * c1 + fam.a_doubleprime().dy.at(k) * c2;
    const Mat2 r = cu.base.at(k) + cu.ap.at(k) * c1 + cu.app.at(k) * c2 + commutator(ox, oy);
    rep.continuum = std::max(rep.continuum, r.norm());
  }
  return rep;
}

double flatness_residual(const ConnectionFamily& fam, cplx lambda) { return flatness_report(fam, lambda).value(); }

FrameField parallel_frame(const ConnectionFamily& fam, cplx lambda, const FrameOptions& opt, const Tolerances& tol) {
  const auto [c1, c2] = fam.coefficients(lambda);
  FrameField F;
  F.lattice = fam.lattice();
  F.base_i = opt.base_i;
  F.base_j = opt.base_j;
  F.lambda = lambda;
  if (opt.check_flatness) {
    F.flatness = flatness_residual(fam, lambda);
    if (!(F.flatness <= tol.flatness_threshold)) {
      std::ostringstream m;
      m << "parallel_frame: family is not flat at lambda = " << lambda << " (residual " << F.flatness
        << " > threshold " << tol.flatness_threshold << "); frames would be path-dependent";
      throw Error(m.str());
    }
  }
  const auto& L = F.lattice;
  const int n1 = L.n1(), n2 = L.n2();
  F.X.assign(std::size_t(n1 + 1) * std::size_t(n2 + 1), Mat2::identity());
  auto lat_s = [&](int a) { return double(opt.base_i + a) / n1; };
  auto lat_t = [&](int b) { return double(opt.base_j + b) / n2; };
  for (int a = 0; a < n1; ++a) {
    const auto seg = fam.segment(lat_s(a), lat_t(0), lat_s(a + 1), lat_t(0), opt.substeps);
    F(a + 1, 0) = transport(*seg, c1, c2) * F(a, 0);
  }
  const auto cols = parallel_map(std::size_t(n1 + 1), [&](std::size_t ai) {
    const int a = int(ai);
    std::vector<Mat2> col(static_cast<std::size_t>(n2 + 1));
    col[0] = F(a, 0);
    for (int b = 0; b < n2; ++b) {
      const auto sg = fam.segment(lat_s(a), lat_t(b), lat_s(a), lat_t(b + 1), opt.substeps);
      col[std::size_t(b + 1)] = transport(*sg, c1, c2) * col[std::size_t(b)];
    }
    return col;
  });
  for (int a = 0; a <= n1; ++a)
    for (int b = 0; b <= n2; ++b) F(a, b) = cols[std::size_t(a)][std::size_t(b)];
  for (const auto& x : F.X) F.det_defect = std::max(F.det_defect, std::abs(det(x) - 1.0));
  std::mt19937_64 rng(opt.audit_seed);
  std::uniform_int_distribution<int> ua(0, n1 - 1), ub(0, n2 - 1);
  for (int k = 0; k < opt.audit_diagonals; ++k) {
    const int a = ua(rng), b = ub(rng);
    const auto seg = fam.segment(lat_s(a), lat_t(b), lat_s(a + 1), lat_t(b + 1), opt.substeps);
    const Mat2 via = transport(*seg, c1, c2) * F(a, b);
    const Mat2& direct = F(a + 1, b + 1);
    F.path_defect = std::max(F.path_defect, (via - direct).norm() / std::max(1.0, direct.norm()));
  }
  return F;
}

namespace {
std::shared_ptr<const SegmentCoefficients> generator_segment(const ConnectionFamily& fam, int generator,
                                                            const HolonomyOptions& opt) {
  const auto& L = fam.lattice();
  const double s0 = double(opt.base_i) / L.n1(), t0 = double(opt.base_j) / L.n2();
  if (generator == 1) return fam.segment(s0, t0, s0 + 1.0, t0, L.n1() * opt.substeps);
  if (generator == 2) return fam.segment(s0, t0, s0, t0 + 1.0, L.n2() * opt.substeps);
  throw Error("holonomy: generator must be 1 or 2");
}
}  // namespace

HolonomyRecord holonomy(const ConnectionFamily& fam, cplx lambda, int generator, const HolonomyOptions& opt,
                        const Tolerances& tol) {
  const auto [c1, c2] = fam.coefficients(lambda);
  if (opt.substeps < 1) throw Error("holonomy: substeps must be positive");
  const auto seg = generator_segment(fam, generator, opt);
  HolonomyRecord r;
  r.lambda = lambda;
  r.generator = generator;
  r.matrix = transport(*seg, c1, c2);
  if (!r.matrix.finite()) throw Error("holonomy: transport overflowed");
  r.trace = r.matrix.trace();
  const cplx d = det(r.matrix);
  r.det_defect = std::abs(d - 1.0);
  r.eta = quadratic_eigenvalues(r.trace, d);
  if (opt.audit && seg->steps % 2 == 0) {
    const Mat2 half = transport(*seg, c1, c2, 2);
    r.step_defect = (half - r.matrix).norm() / std::max(1.0, r.matrix.norm());
    if (opt.strict && r.step_defect > tol.holonomy_step) {
      std::ostringstream m;
      m << "holonomy: " << opt.substeps << " substeps per cell is too coarse at lambda = " << lambda
        << " (halving-step disagreement " << r.step_defect << ")";
      throw Error(m.str());
    }
  }
  return r;
}

namespace {
template <typename Eval>
std::pair<Mat2, double> richardson(Eval&& eval, cplx lambda, double h) {
  auto D = [&](double step) { return (eval(lambda + step) - eval(lambda - step)) * (1.0 / (2 * step)); };
  const Mat2 d1 = D(h), d2 = D(h / 2), d4 = D(h / 4);
  const Mat2 r1 = (d2 * 4.0 - d1) * (1.0 / 3), r2 = (d4 * 4.0 - d2) * (1.0 / 3);
  return {r2, (r1 - r2).norm() / std::max(1.0, r2.norm())};
}
}  // namespace

DLambdaResult holonomy_dlambda(const ConnectionFamily& fam, cplx lambda, int generator, double h,
                               const HolonomyOptions& opt, const Tolerances& tol) {
  if (!(h > 0) || 4 * h >= std::abs(lambda)) throw Error("holonomy_dlambda: step must satisfy 0 < 4h < |lambda|");
  HolonomyOptions o = opt;
  o.audit = false;
  auto [v, err] = richardson([&](cplx l) { return holonomy(fam, l, generator, o, tol).matrix; }, lambda, h);
  if (!v.finite() || err > 1e3 * tol.dlambda_rel) {
    std::ostringstream m;
    m << "holonomy_dlambda: Richardson extrapolation did not converge (self-consistency " << err << ")";
    throw Error(m.str());
  }
  return {v, err};
}

FrameDerivative frame_dlambda(const ConnectionFamily& fam, cplx lambda, double h, const FrameOptions& opt,
                              const Tolerances& tol) {
  if (!(h > 0) || 4 * h >= std::abs(lambda)) throw Error("frame_dlambda: step must satisfy 0 < 4h < |lambda|");
  if (opt.check_flatness) {
    const double r = flatness_residual(fam, lambda);
    if (!(r <= tol.flatness_threshold)) throw Error("frame_dlambda: family is not flat");
  }
  FrameOptions o = opt;
  o.check_flatness = false;
  o.audit_diagonals = 0;
  std::map<double, FrameField> frames;
  for (double step : {h, h / 2, h / 4})
    for (double sg : {1.0, -1.0}) frames.emplace(sg * step, parallel_frame(fam, lambda + sg * step, o, tol));
  FrameDerivative out;
  const std::size_t n = frames.begin()->second.X.size();
  out.dX.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto [v, err] = richardson(
        [&](cplx l) {
          // nearest stored offset; (lambda + h) - lambda need not round-trip exactly
          const double off = (l - lambda).real();
          auto it = frames.lower_bound(off);
          if (it == frames.end() || (it != frames.begin() && off - std::prev(it)->first < it->first - off)) --it;
          return it->second.X[k];
        },
        lambda, h);
    out.dX[k] = v;
    out.rel_error = std::max(out.rel_error, err);
  }
  if (out.rel_error > 1e3 * tol.dlambda_rel) throw Error("frame_dlambda: Richardson extrapolation did not converge");
  return out;
}

// ---------------------------------------------------------------------------

TorusLattice vacuum_lattice(double c, int n) {
  if (!(c > 0)) throw Error("vacuum_lattice: c must be positive");
  return TorusLattice(kPi * cplx(1, 1) / c, kPi * cplx(-1, 1) / c, n, n);
}

Mat2 vacuum_P(cplx c, cplx lambda) {
  const Mat2 A = E12() * c;
  return A.adjoint() * 0.5 + A * (0.5 / lambda);
}
Mat2 vacuum_R(cplx c, cplx lambda) {
  const Mat2 A = E12() * c;
  return A * -0.5 - A.adjoint() * (0.5 * lambda);
}
Mat2 vacuum_frame(cplx c, cplx lambda, cplx z) {
  return mat_exp(-(vacuum_P(c, lambda) * z + vacuum_R(c, lambda) * std::conj(z)));
}
cplx vacuum_trace(cplx c, cplx lambda, cplx gamma) {
  const Mat2 M = vacuum_P(c, lambda) * gamma + vacuum_R(c, lambda) * std::conj(gamma);
  return 2.0 * std::cosh(std::sqrt(-det(M)));
}

ConnectionFamily vacuum_family(cplx c, const TorusLattice& L) {
  if (c == 0.0) throw Error("vacuum_family: c must be non-zero");
  const Mat2 A = E12() * c, Ad = A.adjoint();
  // a' = A dz, a'' = -A^dagger dzbar, Omega0 = B dz + B dzbar with B = (A^dagger - A)/2
  return ConnectionFamily(constant_form(L, Ad - A, Mat2::zero()), constant_form(L, A, A * I_unit),
                          constant_form(L, -Ad, Ad * I_unit), 0.0);
}

ConnectionFamily diagonal_vacuum_family(cplx c, const TorusLattice& L) {
  if (c == 0.0) throw Error("diagonal_vacuum_family: c must be non-zero");
  Mat2 D, Db;
  D(0, 0) = c;
  D(1, 1) = -c;
  Db(0, 0) = -std::conj(c);
  Db(1, 1) = std::conj(c);
  return ConnectionFamily(constant_form(L, Mat2::zero(), Mat2::zero()), constant_form(L, D, D * I_unit),
                          constant_form(L, Db, Db * -I_unit), 0.0);
}

Mat2 diagonal_vacuum_frame(cplx c, cplx lambda, cplx z) {
  Mat2 D, Db;
  D(0, 0) = c;
  D(1, 1) = -c;
  Db(0, 0) = -std::conj(c);
  Db(1, 1) = std::conj(c);
  const cplx c1 = 0.5 * (1.0 + 1.0 / lambda), c2 = 0.5 * (1.0 + lambda);
  return mat_exp(-(D * (c1 * z) + Db * (c2 * std::conj(z))));
}

ConnectionFamily constant_family(const Mat2& Cx, const Mat2& Cy, const TorusLattice& L) {
  return ConnectionFamily(constant_form(L, Cx, Cy), constant_form(L, Mat2::zero(), Mat2::zero()),
                          constant_form(L, Mat2::zero(), Mat2::zero()), 0.0);
}

void write_holonomy_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << std::setprecision(17);
  os << "re_lambda,im_lambda,re_trace,im_trace,re_eta,im_eta\n";
  for (const auto& r : rows)
    os << r.lambda.real() << ',' << r.lambda.imag() << ',' << r.trace.real() << ',' << r.trace.imag() << ','
       << r.eta.real() << ',' << r.eta.imag() << '\n';
}

}  // namespace cmc

#pragma once

// The associated family of flat SL(2,C) connections of a CMC immersion,
//   Omega^lambda = Omega0 + 1/2 (1 + 1/lambda)(1 + iH) a' + 1/2 (1 + lambda)(1 - iH) a'',
// its flatness test, parallel frames and holonomy.
//
// Transport convention: a section X is parallel along z(tau) when
// dX/dtau = -Omega(z'(tau)) X; frames multiply on the left.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <tuple>

#include "cmc/immersions.hpp"

namespace cmc {

struct HolonomyOptions {
  int substeps = 16;          // RK4 steps per grid cell along the path
  int base_i = 0, base_j = 0; // base point (grid site)
  bool audit = true;          // repeat with half the steps and record the disagreement
  bool strict = true;         // throw when the audit exceeds tol.holonomy_step
};

struct HolonomyRecord {
  cplx lambda;
  int generator = 1;
  Mat2 matrix;
  cplx trace;
  std::array<cplx, 2> eta;    // eta, 1/eta with |eta| >= 1 first
  double det_defect = 0;      // |det - 1|
  double step_defect = 0;     // ||H_m - H_{m/2}|| / max(1, ||H||)
};

// Lambda-independent coefficients of the family sampled at the RK4 nodes of a
// straight segment (2*steps + 1 nodes, spacing 1/(2*steps) in the path parameter).
struct SegmentCoefficients {
  int steps = 0;
  std::vector<Mat2> base, ap, app;
  bool has_base = false;
};

class ConnectionFamily {
 public:
  ConnectionFamily(OneForm<Mat2> base, OneForm<Mat2> a_prime, OneForm<Mat2> a_doubleprime, double H,
                   Interpolation interp = Interpolation::Trigonometric,
                   DerivativeScheme scheme = DerivativeScheme::Spectral);

  const TorusLattice& lattice() const { return ap_.lattice(); }
  double H() const { return H_; }
  bool has_base() const { return has_base_; }
  Interpolation interpolation() const { return interp_; }
  DerivativeScheme scheme() const { return scheme_; }
  const OneForm<Mat2>& base() const { return base_; }
  const OneForm<Mat2>& a_prime() const { return ap_; }
  const OneForm<Mat2>& a_doubleprime() const { return app_; }

  /// (1/2 (1 + 1/lambda)(1 + iH), 1/2 (1 + lambda)(1 - iH)); throws for lambda = 0.
  std::pair<cplx, cplx> coefficients(cplx lambda) const;
  /// lambda* = (1 + iH)/(1 - iH), where both coefficients equal 1.
  cplx lambda_star() const;
  OneForm<Mat2> evaluate(cplx lambda) const;

  /// Omega^lambda applied to the tangent vector v at lattice coordinates (s, t).
  Mat2 at(cplx lambda, double s, double t, cplx v) const;

  /// Coefficients along the segment (s0,t0) -> (s1,t1), cached per segment key.
  std::shared_ptr<const SegmentCoefficients> segment(double s0, double t0, double s1, double t1, int steps) const;

  /// Curl parts d_x Y_y - d_y Y_x of the three coefficient forms.
  struct Curls {
    GridField<Mat2> base, ap, app;
  };
  const Curls& curls() const;

 private:
  void sample(double s, double t, cplx v, Mat2& b, Mat2& p, Mat2& q) const;

  OneForm<Mat2> base_, ap_, app_;
  double H_;
  bool has_base_;
  Interpolation interp_;
  DerivativeScheme scheme_;
  mutable std::mutex mu_;
  mutable std::map<std::tuple<double, double, double, double, int>, std::shared_ptr<const SegmentCoefficients>> cache_;
  mutable std::optional<Curls> curls_;
};

/// Family built from a Maurer-Cartan form alpha (trivial base connection).
/// H is the family parameter; use family_mean_curvature() to convert the
/// geometric mean curvature of the immersion.
ConnectionFamily build_family(const OneForm<Mat2>& alpha, double H,
                              Interpolation interp = Interpolation::Trigonometric,
                              DerivativeScheme scheme = DerivativeScheme::Spectral);

/// RK4 transport of the identity along a segment for coefficient multipliers c1, c2.
/// `stride` = 2 uses every other node (half the steps).
Mat2 transport(const SegmentCoefficients& seg, cplx c1, cplx c2, int stride = 1);

struct FlatnessReport {
  double plaquette = 0;   // max ||loop - I|| / cell area
  double continuum = 0;   // max ||d Omega + Omega ^ Omega||
  double value() const { return std::max(plaquette, continuum); }
};
FlatnessReport flatness_report(const ConnectionFamily& fam, cplx lambda, int edge_substeps = 4);
double flatness_residual(const ConnectionFamily& fam, cplx lambda);

struct FrameField {
  TorusLattice lattice;
  int base_i = 0, base_j = 0;
  cplx lambda;
  // (n1 + 1) x (n2 + 1) nodes covering one fundamental domain from the base point
  std::vector<Mat2> X;
  double det_defect = 0;
  double path_defect = 0;  // audited on random cell diagonals
  double flatness = 0;

  int nodes1() const { return lattice.n1() + 1; }
  int nodes2() const { return lattice.n2() + 1; }
  const Mat2& operator()(int a, int b) const { return X[std::size_t(b) * nodes1() + a]; }
  Mat2& operator()(int a, int b) { return X[std::size_t(b) * nodes1() + a]; }
  cplx point(int a, int b) const { return lattice.site(base_i + a, base_j + b); }
};

struct FrameOptions {
  int substeps = 16;
  int base_i = 0, base_j = 0;
  int audit_diagonals = 16;
  std::uint64_t audit_seed = 12345;
  bool check_flatness = true;
};

/// Parallel frame with X(base) = I. Refuses (throws) when the family is not
/// flat at lambda within tol.flatness_threshold.
FrameField parallel_frame(const ConnectionFamily& fam, cplx lambda, const FrameOptions& opt = {},
                          const Tolerances& tol = {});

HolonomyRecord holonomy(const ConnectionFamily& fam, cplx lambda, int generator, const HolonomyOptions& opt = {},
                        const Tolerances& tol = {});

struct DLambdaResult {
  Mat2 value;
  double rel_error = 0;  // Richardson estimates at h and h/2 compared
};
/// dH/dlambda by central differences with one Richardson step.
DLambdaResult holonomy_dlambda(const ConnectionFamily& fam, cplx lambda, int generator, double h = 1e-2,
                               const HolonomyOptions& opt = {}, const Tolerances& tol = {});

/// dX/dlambda of the frame field, same scheme, sitewise.
struct FrameDerivative {
  std::vector<Mat2> dX;
  double rel_error = 0;
};
FrameDerivative frame_dlambda(const ConnectionFamily& fam, cplx lambda, double h = 1e-2, const FrameOptions& opt = {},
                              const Tolerances& tol = {});

// ---------------------------------------------------------------------------
// Fixtures

/// Lattice on which the vacuum with real c closes: gamma1 = pi(1+i)/c, gamma2 = pi(-1+i)/c.
TorusLattice vacuum_lattice(double c, int n);

/// Genus-zero unitary family Omega^lambda = P(lambda) dz + R(lambda) dzbar with
/// P = A^dagger/2 + A/(2 lambda), R = -A/2 - lambda A^dagger/2, A = c E12.
/// P and R commute, so it is flat for every lambda.
ConnectionFamily vacuum_family(cplx c, const TorusLattice& lattice);
Mat2 vacuum_P(cplx c, cplx lambda);
Mat2 vacuum_R(cplx c, cplx lambda);
/// Closed-form frame exp(-(P z + R zbar)).
Mat2 vacuum_frame(cplx c, cplx lambda, cplx z);
/// tr of the closed-form holonomy along gamma.
cplx vacuum_trace(cplx c, cplx lambda, cplx gamma);

/// a' = diag(c, -c) dz, a'' = diag(-conj c, conj c) dzbar, zero base.
ConnectionFamily diagonal_vacuum_family(cplx c, const TorusLattice& lattice);
/// Closed-form frame of the diagonal vacuum.
Mat2 diagonal_vacuum_frame(cplx c, cplx lambda, cplx z);

/// lambda-independent connection Omega = Cx dx + Cy dy.
ConnectionFamily constant_family(const Mat2& Cx, const Mat2& Cy, const TorusLattice& lattice);

// ---------------------------------------------------------------------------

struct SweepRow {
  cplx lambda, trace, eta;
};
void write_holonomy_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);

}  // namespace cmc

#pragma once

// Quaternionic description of tori in S^3 and the constrained-Willmore
// associated family of SL(4,C) connections.
//
// V = H^2 is a right quaternionic vector space realized as C^4: (a, b) is
// stored as the first columns of quat_to_mat2(a), quat_to_mat2(b). Right
// multiplication by i is then the scalar i, right multiplication by j is
// v -> J conj(v), and quaternionic 2x2 matrices acting from the left are the
// 4x4 block matrices with quat_to_mat2 blocks.

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmc/algebra.hpp"
#include "cmc/immersions.hpp"
#include "cmc/torus.hpp"

namespace cmc {

using CVec4 = std::array<cplx, 4>;
using QVec2 = std::array<Quaternion, 2>;

struct QuaternionicBundleV {
  static CVec4 to_complex(const QVec2& v);
  static QVec2 to_quaternion(const CVec4& v);
  /// [[q11, q12], [q21, q22]] acting from the left.
  static Mat4 matrix(const Quaternion& q11, const Quaternion& q12, const Quaternion& q21, const Quaternion& q22);
  /// Quaternion entries of a 4x4 matrix; `defect` receives the distance from
  /// the quaternionic-linear matrices.
  static std::array<Quaternion, 4> entries(const Mat4& m, double* defect = nullptr);
  static CVec4 mul_i(const CVec4& v);
  static CVec4 mul_j(const CVec4& v);
  /// max over basis vectors of |i^2 + 1|, |j^2 + 1|, |ij + ji|.
  static double structure_defect();
  /// || M j - j M || on the basis, zero iff M is quaternionic linear.
  static double linearity_defect(const Mat4& m);
};

/// Distance of w from the quaternionic line spanned by v, relative to |w|.
double line_residual(const CVec4& v, const CVec4& w);

struct LineBundleL {
  GridField<QVec2> psi;  // (f, 1)
  const TorusLattice& lattice() const { return psi.lattice(); }
  CVec4 vec(std::size_t k) const { return QuaternionicBundleV::to_complex(psi.at(k)); }
};

LineBundleL line_bundle(const ImmersionGrid& f);
LineBundleL line_bundle(const GridField<Quaternion>& f);

/// (v, w) = conj(v1) w2 + conj(v2) w1.
Quaternion indefinite_product(const QVec2& v, const QVec2& w);
/// (f - 1, f + 1): null for |f| = 1.
QVec2 sphere_representative(const Quaternion& f);

struct SphereCongruence {
  GridField<Mat4> S;
  double s2_defect = 0;         // max ||S^2 + 1||
  double stability_defect = 0;  // max relative distance of S psi from L
  double tangency_defect = 0;   // fixed sphere through f with tangent plane df
  double h_match_defect = 0;    // fixed sphere is the mean curvature sphere
  double linearity_defect = 0;  // quaternionic linearity of S
  const TorusLattice& lattice() const { return S.lattice(); }
};

/// Conformal Gauss map of a conformal immersion into S^3 from its tangent
/// plane, normal and mean curvature. Throws cmc::Error when the contract
/// residuals exceed tol.s2 (S^2), 1e-8 (stability, linearity) or
/// tol.sphere_contract (tangency, H-match).
SphereCongruence conformal_gauss_map(const ImmersionGrid& f, const GeometryReport& geo,
                                     DerivativeScheme scheme = DerivativeScheme::Spectral,
                                     const Tolerances& tol = {});
/// Wraps an externally supplied S; only S^2 = -1 is checked.
SphereCongruence sphere_congruence(GridField<Mat4> S, const Tolerances& tol = {});

struct HopfFields {
  OneForm<Mat4> A, Q, dS;
  double anticommute_defect = 0;  // max ||S A + A S||, ||S Q + Q S||
  double type_A_defect = 0;       // max ||*A - S A||
  double type_Q_defect = 0;       // max ||*Q + S Q||
  double reassembly_defect = 0;   // max ||S dS - 2 (A + Q)||
};

/// A = (S dS + *dS)/4, Q = (S dS - *dS)/4.
HopfFields hopf_fields(const SphereCongruence& S, DerivativeScheme scheme = DerivativeScheme::Spectral);

struct LagrangeMultiplier {
  OneForm<Mat4> nu;
};

LagrangeMultiplier zero_multiplier(const TorusLattice& L);
/// max over sites and directions of |B psi| / |B| and the distance of Im B
/// from L; both vanish iff Im B in L in Ker B.
double multiplier_defect(const LagrangeMultiplier& nu, const LineBundleL& L);

/// max over plaquettes of the Frobenius norm of d(2*A + nu) by cell
/// circulation (three-point Gauss per edge on the trigonometric interpolant)
/// divided by the cell area.
double willmore_residual(const HopfFields& h, const LagrangeMultiplier& nu);

/// Transport samples of one family along a generator loop.
struct PathSamples {
  int generator = 1;
  int steps = 0;                       // RK4 steps; samples at half steps
  std::vector<Mat4> S, U, W, dS;       // U = P- A0(gamma), W = P+ A0(gamma), dS(gamma)
};

class CWFamily {
 public:
  CWFamily() = default;
  /// d + (mu - 1) P- A0 + (1/mu - 1) P+ A0, P-+ = (1 -+ iS)/2.
  CWFamily(GridField<Mat4> S, OneForm<Mat4> A0, OneForm<Mat4> dS, const Tolerances& tol = {});

  const TorusLattice& lattice() const { return S_.lattice(); }
  const GridField<Mat4>& S() const { return S_; }
  const OneForm<Mat4>& A0() const { return A0_; }
  bool gauged() const { return gauged_; }
  double projection_defect() const { return projection_defect_; }

  /// Connection form at mu. Throws for mu = 0.
  OneForm<Mat4> evaluate(cplx mu) const;
  /// max || d omega + omega ^ omega || with spectral derivatives.
  double flatness_residual(cplx mu) const;
  /// g = ((mu + 1) - i (mu - 1) S)/2 at a site.
  Mat4 gauge(std::size_t site, cplx mu) const;
  /// The family g^-1 omega g + g^-1 dg.
  CWFamily gauge_transform() const;

  PathSamples path(int generator, int substeps, Interpolation method = Interpolation::Trigonometric) const;
  /// Connection coefficient omega(gamma) at path sample m.
  Mat4 coefficient(const PathSamples& p, std::size_t m, cplx mu) const;

 private:
  GridField<Mat4> S_;
  OneForm<Mat4> A0_, dS_;
  bool gauged_ = false;
  double projection_defect_ = 0;
};

/// A0 = A - *nu / 2.
CWFamily build_cw_family(const SphereCongruence& S, const HopfFields& h,
                         const LagrangeMultiplier& nu, const Tolerances& tol = {});

struct CWHolonomy {
  cplx mu;
  int generator = 1;
  Mat4 H;
  CharPoly4 poly;
  std::array<cplx, 4> eigenvalues{};  // sorted by (|eta|, arg eta)
  double det_defect = 0;   // |det H - 1| relative to the Hadamard bound
  double step_defect = 0;  // relative step-halving disagreement
};

struct CWHolonomyOptions {
  int substeps = 8;  // RK4 steps per grid cell (at least 64 cells per loop)
  Interpolation method = Interpolation::Trigonometric;
};

/// Transport X' = -omega(gamma) X around the generator from site (0,0).
/// Throws when the step-halving defect exceeds tol.holonomy_step or the
/// determinant drifts by more than 1e-8.
CWHolonomy cw_holonomy(const CWFamily& fam, cplx mu, int generator, const CWHolonomyOptions& opt = {},
                       const Tolerances& tol = {});
CWHolonomy cw_holonomy(const CWFamily& fam, const PathSamples& path, cplx mu, const Tolerances& tol = {});

struct CWSample {
  cplx mu;
  CWHolonomy h1, h2;
};

/// Holonomies of both generators at each mu, in parallel.
std::vector<CWSample> cw_sweep(const CWFamily& fam, const std::vector<cplx>& mus,
                               const CWHolonomyOptions& opt = {}, const Tolerances& tol = {});
/// n points exp(2 pi i (k + 0.5)/n) on the unit circle scaled by radius.
std::vector<cplx> mu_circle(int n, double radius = 1.0);

enum class CWCase { Case1, Case2, Undetermined };
std::string to_string(CWCase c);

struct CaseOptions {
  double kernel_tol = 1e-6;  // singular values of the stacked H_k - 1
  double gap_tol = 1e-4;     // eigenvalue separation for Case 1
};

struct CaseReport {
  CWCase result = CWCase::Undetermined;
  int samples = 0;
  int kernel_samples = 0;    // samples with a common 2-dim eigenvalue-1 space
  int distinct_samples = 0;  // samples with 4 separated eigenvalues
  double max_kernel_sv = 0;  // max over samples of the 2nd smallest singular value
  double min_gap = 0;        // min over samples of the smallest eigenvalue gap
  double max_palindromic_defect = 0;
  std::string note;
};

CaseReport case_classify(const std::vector<CWSample>& sweep, const CaseOptions& opt = {});

/// max |tr H(1/conj mu) - conj tr H(mu)| over sweep entries paired by mu.
double trace_reality_defect(const CWFamily& fam, const std::vector<cplx>& mus, int generator,
                            const CWHolonomyOptions& opt = {}, const Tolerances& tol = {});

/// generator,re_mu,im_mu,re_eta0,im_eta0,...,re_eta3,im_eta3
void write_cw_spectra_csv(std::ostream& os, const std::vector<CWSample>& sweep);

}  // namespace cmc

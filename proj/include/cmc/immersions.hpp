#pragma once

// Immersions T^2 -> S^3 sampled on a lattice grid, their geometry, and the
// Maurer-Cartan form that feeds the associated family.

#include <iosfwd>
#include <string>
#include <utility>

#include "cmc/torus.hpp"

namespace cmc {

struct ImmersionGrid {
  GridField<Quaternion> f;
  const TorusLattice& lattice() const { return f.lattice(); }
};

/// Checks | |f| - 1 | < tol at every site and that f is not constant.
/// Throws cmc::Error with the offending site otherwise.
ImmersionGrid make_immersion(GridField<Quaternion> f, double unit_tol = Tolerances{}.unit_norm);

/// f(x, y) = (r cos(x/r), r sin(x/r), s cos(y/s), s sin(y/s)), s = sqrt(1 - r^2),
/// on the conformal lattice (2 pi r, 2 pi s i).
ImmersionGrid homogeneous_torus(double r, int n1, int n2);
inline ImmersionGrid homogeneous_torus(double r, int n) { return homogeneous_torus(r, n, n); }
/// Hopf torus over the closed curve c(theta) = normalize(cos theta, sin theta,
/// a cos(w theta)) in S^2: f(sigma, phi) = q(sigma) e^{i phi} with q the
/// horizontal lift (q i q^-1 = c) in arclength sigma. Conformal coordinates
/// (sigma/2, phi); the lattice is (L/2 - i Theta, 2 pi i) with L the length
/// of c and Theta the fibre holonomy of the lift. a = 0 is the Clifford torus.
ImmersionGrid hopf_torus(double a, int w, int n1, int n2);

/// The analytic value (s/r - r/s)/2 under the orientation used by geometry().
double homogeneous_mean_curvature(double r);

/// Unit normal inside TS^3 of the current grid with the orientation of geometry().
GridField<Quaternion> unit_normal(const ImmersionGrid& f, DerivativeScheme scheme = DerivativeScheme::FiniteDifference4);

/// f + amplitude * sin(2 pi (m s + k t)) * N, renormalized onto S^3.
ImmersionGrid perturb(const ImmersionGrid& f, double amplitude, std::pair<int, int> mode,
                      DerivativeScheme scheme = DerivativeScheme::FiniteDifference4);

struct GeometryReport {
  GridField<double> E;        // (|f_x|^2 + |f_y|^2) / 4
  GridField<double> H;        // mean curvature in S^3
  GridField<Quaternion> N;    // unit normal, tangent to S^3
  double conformality_defect = 0;
  double normal_defect = 0;   // max |<N, f>| + |<N, f_x>| + |<N, f_y>|
  double H_mean = 0, H_min = 0, H_max = 0;
  double E_min = 0, E_max = 0;
};

/// First and second fundamental forms from grid derivatives.
/// The normal is N = cross(f, f_x, f_y) / |.|, which makes H > 0 on the
/// homogeneous tori with r < 1/sqrt(2).
GeometryReport geometry(const ImmersionGrid& f, DerivativeScheme scheme = DerivativeScheme::FiniteDifference4);

/// Mean curvature parameter entering the associated family for an immersion
/// whose geometric mean curvature is H. The family is flat for this value.
inline double family_mean_curvature(double H_geometry) { return -H_geometry; }

struct MaurerCartan {
  OneForm<Mat2> alpha;     // su(2)-valued coefficients of dx, dy
  double real_part = 0;    // discarded max |Re(conj(f) df)|, a discretization diagnostic
};

/// alpha = F^-1 dF with F = quat_to_mat2(f), projected onto su(2).
MaurerCartan maurer_cartan(const ImmersionGrid& f, DerivativeScheme scheme = DerivativeScheme::FiniteDifference4);

/// max over sites of || d alpha + alpha ^ alpha ||, i.e. of
/// d_x alpha_y - d_y alpha_x + [alpha_x, alpha_y].
double maurer_cartan_residual(const OneForm<Mat2>& alpha, DerivativeScheme scheme = DerivativeScheme::FiniteDifference4);

/// 4-vector orthogonal to a, b, c with <N, v> = det(v, a, b, c).
Quaternion cross4(const Quaternion& a, const Quaternion& b, const Quaternion& c);

/// Immersion CSV: a "# lattice,g1.re,g1.im,g2.re,g2.im,n1,n2" line, a header,
/// then rows "s,t,w,x,y,z" with s, t the lattice coordinates of a grid site.
void write_immersion_csv(std::ostream& os, const ImmersionGrid& f);
ImmersionGrid read_immersion_csv(std::istream& is, double unit_tol = Tolerances{}.unit_norm);
ImmersionGrid load_immersion_csv(const std::string& path, double unit_tol = Tolerances{}.unit_norm);

}  // namespace cmc

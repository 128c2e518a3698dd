#pragma once
// Sym-Bobenko reconstruction in S^3, R^3 and H^3 from frames of a flat
// associated family, plus an independent mean-curvature oracle on the mesh.

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmc/cmc_family.hpp"

namespace cmc {

enum class SpaceForm { S3, R3, H3 };
std::string to_string(SpaceForm s);
SpaceForm parse_space_form(const std::string& s);

struct SymConfig {
  SpaceForm target = SpaceForm::S3;
  cplx lambda0 = 1.0;
  cplx lambda1 = -1.0;  // R3: equals lambda0; H3: conj(lambda0)^-1

  /// Fills lambda1 for R3/H3 and checks the Sym-point constraints.
  static SymConfig make(SpaceForm target, cplx lambda0, cplx lambda1 = 0.0);
  void validate() const;
  double predicted_H() const;
};

/// S3: i(l0 + l1)/(l0 - l1), real on the unit circle.
double predicted_H_s3(cplx l0, cplx l1);
/// H3: (1 + |l0|^2) / (1 - |l0|^2).
double predicted_H_h3(cplx l0);

using Vec4 = std::array<double, 4>;

struct SurfaceMesh {
  SpaceForm target = SpaceForm::S3;
  TorusLattice lattice;
  int base_i = 0, base_j = 0;
  int nodes1 = 0, nodes2 = 0;  // (n1 + 1) x (n2 + 1), both ends of each generator
  // S3: unit quaternion (w,x,y,z); R3: (x,y,z,0); H3: hyperboloid (x0,x1,x2,x3)
  std::vector<Vec4> v;
  std::vector<double> H;  // filled by verify_cmc, NaN on the stencil border
  double predicted_H = 0;
  double product_defect = 0;  // S3: unitarity; R3: discarded trace / Hermitian part; H3: non-Hermitian part of M

  const Vec4& operator()(int a, int b) const { return v[std::size_t(b) * nodes1 + a]; }
  Vec4& operator()(int a, int b) { return v[std::size_t(b) * nodes1 + a]; }
};

SurfaceMesh sym_s3(const FrameField& X0, const FrameField& X1, const Tolerances& tol = {});
SurfaceMesh sym_r3(const FrameField& X0, const FrameDerivative& dX0, const Tolerances& tol = {});
SurfaceMesh sym_h3(const FrameField& X0, const FrameField& X1, const Tolerances& tol = {});

/// Builds the frames the target needs and reconstructs.
SurfaceMesh reconstruct(const ConnectionFamily& fam, const SymConfig& cfg, const FrameOptions& opt = {},
                        const Tolerances& tol = {});

struct ReconstructionReport {
  SpaceForm target = SpaceForm::S3;
  double predicted_H = 0;
  double H_mean = 0;
  double H_max_deviation = 0;   // max |H - H_mean|
  double H_abs_error = 0;       // | |H_mean| - |predicted| |
  double conformality_defect = 0;
  std::array<double, 2> periodicity{0, 0};
  double product_defect = 0;
  int samples = 0;
};

/// Mean curvature from fourth-order finite-difference fundamental forms in the
/// target geometry (interior nodes only); fills mesh.H.
ReconstructionReport verify_cmc(SurfaceMesh& mesh);

/// Max distance between the mesh values at z and z + gamma_k.
std::array<double, 2> periodicity_check(const SurfaceMesh& mesh);

/// Mesh built directly from a parametrisation over the lattice (test fixtures).
SurfaceMesh mesh_from_function(SpaceForm target, const TorusLattice& L, const std::function<Vec4(double, double)>& f);

/// Same mesh with the parameter domain reflected (s -> 1 - s): orientation flip.
SurfaceMesh reflect_parameters(const SurfaceMesh& m);

struct ObjOptions {
  Vec4 pole{0.18257418583505536, 0.36514837167011072, 0.54772255750516607, 0.73029674334022143};  // S3 projection pole
};
void write_obj(std::ostream& os, const SurfaceMesh& mesh, const ObjOptions& opt = {});
void write_mesh_csv(std::ostream& os, const SurfaceMesh& mesh);

}  // namespace cmc

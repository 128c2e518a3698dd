#pragma once

// Spectral data from holonomy: the trace function t(lambda), zeros of the
// discriminant D = t^2 - 4, genus bookkeeping and the reality involutions.

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cmc/cmc_family.hpp"

namespace cmc {

struct SamplingPlan {
  int circle = 64;            // unit-circle samples
  double r_min = 0.05, r_max = 20.0;
  int radial = 25;            // log-spaced radial cells (odd keeps |lambda| = 1 off the cell edges)
  int angular = 48;           // angular cells
  int rho_samples = 64;       // random annulus points for the reality check
  double rho_r_min = 0.2, rho_r_max = 5.0;
  std::uint64_t seed = 1;
  int newton_budget = 40;
  int refine_depth = 6;
  int order_angles = 6;

  void validate() const;
};

/// One evaluation of the spectral data at lambda.
struct SpectralSample {
  cplx lambda;
  cplx D;                          // t^2 - 4
  std::optional<cplx> trace;
  std::optional<Mat2> matrix;
  bool ok = true;
  std::string error;
  double step_defect = 0;
};

class SpectralSource {
 public:
  virtual ~SpectralSource() = default;
  virtual SpectralSample sample(cplx lambda) const = 0;
  virtual std::string kind() const = 0;
};

/// Holonomy of a family along one generator.
class FamilySource : public SpectralSource {
 public:
  FamilySource(const ConnectionFamily& fam, int generator, HolonomyOptions opt = {});
  SpectralSample sample(cplx lambda) const override;
  std::string kind() const override { return "holonomy"; }

 private:
  const ConnectionFamily& fam_;
  int gen_;
  HolonomyOptions opt_;
};

/// A trace function given in closed form.
class SyntheticTrace : public SpectralSource {
 public:
  explicit SyntheticTrace(std::function<cplx(cplx)> t) : t_(std::move(t)) {}
  SpectralSample sample(cplx lambda) const override;
  std::string kind() const override { return "synthetic-trace"; }

 private:
  std::function<cplx(cplx)> t_;
};

/// D(lambda) = lambda^(-M/2) prod (lambda - q)^m with M the total order.
class SyntheticDiscriminant : public SpectralSource {
 public:
  struct Zero {
    cplx q;
    int order;
  };
  explicit SyntheticDiscriminant(std::vector<Zero> zeros);
  SpectralSample sample(cplx lambda) const override;
  std::string kind() const override { return "synthetic-discriminant"; }
  const std::vector<Zero>& zeros() const { return zeros_; }

 private:
  std::vector<Zero> zeros_;
  int total_ = 0;
};

/// Reality-symmetric planted set: g pairs (q, 1/conj q) with |q| in
/// [0.3, 0.85] and, optionally, extra double pairs.
std::vector<SyntheticDiscriminant::Zero> random_reality_symmetric_zeros(std::mt19937_64& rng, int g, int double_pairs);

struct TraceSweep {
  std::string source;
  std::vector<SpectralSample> circle;
  std::vector<SpectralSample> annulus;   // (radial + 1) x angular grid nodes, radius-major
  std::vector<std::pair<SpectralSample, SpectralSample>> rho_pairs;  // (lambda, 1/conj lambda)
  int failures = 0;
  double max_step_defect = 0;
};

cplx annulus_node(const SamplingPlan& plan, int i, int k);
TraceSweep trace_sweep(const SpectralSource& src, const SamplingPlan& plan);

struct BranchPoint {
  cplx q;
  int order = 0;               // zero order of D (from the log-slope fit)
  int winding = 0;             // winding number of D around q
  double slope = 0;            // averaged log|D| slope
  bool order_resolved = true;
  bool is_identity_holonomy = false;
  int identity_order = 0;      // zero order of H - (t/2) I at q
  int contribution = 0;        // order - 2 * identity_order, the share of 2p
  double residual = 0;         // |D(q)| / max(1, |t|^2)
  bool converged = true;
  std::string note;
};

struct BranchSearch {
  std::vector<BranchPoint> points;     // sorted by (|q|, arg q)
  int unresolved_cells = 0;
  int evaluations = 0;
  std::vector<std::string> warnings;
};

BranchSearch branch_points(const TraceSweep& sweep, const SpectralSource& src, const SamplingPlan& plan,
                           const Tolerances& tol = {});

struct SpectralCurveData {
  std::vector<BranchPoint> points;
  int g = 0;
  int p = 0;
  bool counts_consistent = true;   // integral g and p with p >= g
  double reality_defect = 0;       // max_i min_j |q_i - 1/conj q_j| / |q_i| over odd-order non-identity zeros
  bool simple = true;
  int identity_points = 0;
  int unresolved = 0;
  bool branched_at_zero_and_infinity = true;  // odd degree of lambda * prod(lambda - q_i)
  std::vector<std::string> warnings;
};

struct InvolutionReport {
  double sigma_defect = 0;        // max |eta eta' - 1| / max(1, |eta|^2)
  double rho_defect = 0;          // max |t(1/conj l) - conj t(l)| / max(1, |t|)
  double fixed_point_fraction = 0;// share of unit-circle samples with real |t| <= 2
  double circle_max_imag = 0;     // max |Im t| on the circle
  double circle_max_excess = 0;   // max (|t| - 2, 0) on the circle
};

struct CurveReport {
  SpectralCurveData curve;
  InvolutionReport involution;
};

CurveReport curve_report(const BranchSearch& search, const TraceSweep& sweep, const Tolerances& tol = {});

enum class RealityType { PlusType, MinusType, Inconsistent };
std::string to_string(RealityType t);

struct RealityClassification {
  RealityType type = RealityType::Inconsistent;
  double plus_defect = 0, minus_defect = 0;
  int genus = 0;
  std::optional<bool> lift_consistent;   // minus type only
  cplx lift_sign;                        // (-1)^(g+1) recovered numerically
};

RealityClassification reality_classify(const std::vector<cplx>& q, const Tolerances& tol = {});

void write_trace_sweep_csv(std::ostream& os, const TraceSweep& sweep);

}  // namespace cmc

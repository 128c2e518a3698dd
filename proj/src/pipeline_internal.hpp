#pragma once

// Shared helpers of the pipeline translation units.

#include <string>
#include <vector>

#include "cmc/pipeline.hpp"

namespace cmc::pipeline::detail {

Json cjson(cplx z);
Json header(const RunConfig& cfg, const std::string& command);
std::vector<cplx> unit_circle(int n);

ConnectionFamily immersion_family(const ImmersionGrid& f, const GeometryReport& geo, const RunConfig& cfg);
/// ConnectionFamily holds a mutex, so it is rebuilt from its coefficients.
std::unique_ptr<ConnectionFamily> on_heap(const ConnectionFamily& f);
HolonomyOptions holonomy_options(const RunConfig& cfg);

struct FlatnessSweep {
  std::vector<cplx> lambdas;
  std::vector<double> residual;
  double max = 0;
  cplx worst;
};
FlatnessSweep flatness_sweep(const ConnectionFamily& fam, int samples);

/// max |H| over the interior nodes where the oracle is defined.
double max_abs_H(const SurfaceMesh& m);

}  // namespace cmc::pipeline::detail

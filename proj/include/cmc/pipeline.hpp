#pragma once

// End-to-end runs behind the command-line tool: configuration, fixture
// loading and the analyze / reconstruct / verify / spectral-export reports.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmc/cmc_family.hpp"
#include "cmc/immersions.hpp"
#include "cmc/spectral.hpp"
#include "cmc/sym.hpp"
#include "cmc/willmore.hpp"

namespace cmc::pipeline {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1.0";
inline constexpr const char* kToolVersion = "0.1.0";

/// Bad configuration or arguments; maps to exit status 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Every setting is a string-valued key; typed fields are kept in sync by
/// set(). The full key map is echoed into every report.
struct RunConfig {
  std::string fixture = "clifford";  // clifford | homogeneous | vacuum | perturbed | hopf | file
  double r = 0.6;                    // homogeneous radius
  double c = 1.0;                    // vacuum parameter
  double amplitude = 0.05;           // perturbed: normal bump of the Clifford torus
  int mode_m = 1, mode_k = 1;
  double hopf_a = 0.2;
  int hopf_w = 2;
  std::string file;
  int n = 64;
  std::string out = "out";
  std::uint64_t seed = 1;

  SamplingPlan plan;
  Tolerances tol;
  DerivativeScheme scheme = DerivativeScheme::Spectral;
  Interpolation interpolation = Interpolation::Trigonometric;
  int substeps = 16;      // RK4 steps per grid cell for holonomies and frames
  int generator = 1;      // generator used for spectral data
  int flat_samples = 16;  // unit-circle lambdas of the flatness sweep
  int cw_samples = 8;     // unit-circle mus of the constrained-Willmore sweep
  int spectral_n = 64;    // resolution of the genus checks in verify

  SpaceForm sym_target = SpaceForm::S3;
  cplx sym_lambda0 = 1.0;
  std::optional<cplx> sym_lambda1 = cplx(-1.0);
  double sym_h_tolerance = 1e-3;

  std::optional<double> threshold_override;  // verify: cap every upper-bound threshold

  RunConfig();
  void set(const std::string& key, const std::string& value);
  /// Reads "key = value" lines; '#' starts a comment.
  void load(std::istream& is, const std::string& origin = "config");
  void load_file(const std::string& path);
  void validate() const;
  SymConfig sym() const;
  const std::map<std::string, std::string>& values() const { return values_; }
  static std::vector<std::string> keys();

 private:
  std::map<std::string, std::string> values_;
};

/// Accepts "x", "x,y" (real, imaginary) and "polar:r,theta".
cplx parse_complex(const std::string& s);
std::string format_complex(cplx z);

struct Fixture {
  std::string kind;
  std::optional<ImmersionGrid> immersion;
  std::optional<GeometryReport> geometry;
  std::unique_ptr<ConnectionFamily> family;
  const TorusLattice& lattice() const { return family->lattice(); }
};

/// Throws UsageError for unknown kinds or unreadable files.
Fixture load_fixture(const RunConfig& cfg);

struct Check {
  std::string id;
  int criterion = 0;  // acceptance criterion covered, 0 for none
  std::string description;
  double measured = 0;
  std::string relation = "<";  // "<", ">", "==" against threshold
  double threshold = 0;
  bool pass = false;
  bool informational = false;  // reported, never fails the run
  std::string detail;
};

struct CommandResult {
  int exit_code = 0;
  Json report;
  std::string summary;
  std::vector<std::string> files;     // written artifacts, relative to cfg.out
  std::vector<Check> checks;          // verify only
  std::map<int, double> seconds;      // verify: wall time per criterion group (not in the report)
};

CommandResult analyze(const RunConfig& cfg);
CommandResult reconstruct(const RunConfig& cfg);
CommandResult verify(const RunConfig& cfg);
CommandResult spectral_export(const RunConfig& cfg);

/// Deterministic serialization used for every JSON artifact.
std::string dump(const Json& j);
/// Writes report.json-style artifacts and the summary into cfg.out.
void write_text(const RunConfig& cfg, const std::string& name, const std::string& text);

}  // namespace cmc::pipeline

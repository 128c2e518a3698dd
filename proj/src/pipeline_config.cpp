#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <sstream>

#include "cmc/pipeline.hpp"

namespace cmc::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (...) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || !std::isfinite(x)) throw UsageError("config: " + key + " expects a number, got '" + v + "'");
  return x;
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long x = 0;
  try {
    x = std::stol(v, &pos);
  } catch (...) {
    pos = 0;
  }
  if (pos != v.size() || v.empty()) throw UsageError("config: " + key + " expects an integer, got '" + v + "'");
  return int(x);
}

// Shortest %g form that reads back to the same double.
std::string fmt(double x) {
  char buf[40];
  for (int p = 1; p <= 17; ++p) {
    std::snprintf(buf, sizeof buf, "%.*g", p, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

struct Entry {
  std::string key;
  Setter set;
  std::function<std::string(const RunConfig&)> get;
};

#define CMC_DOUBLE(name, field)                                                                       \
  Entry {                                                                                             \
    name, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); }, \
        [](const RunConfig& c) { return fmt(c.field); }                                               \
  }
#define CMC_INT(name, field)                                                                       \
  Entry {                                                                                          \
    name, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_int(k, v); }, \
        [](const RunConfig& c) { return std::to_string(c.field); }                                  \
  }

const std::vector<Entry>& table() {
  static const std::vector<Entry> t = {
      {"fixture", [](RunConfig& c, const std::string&, const std::string& v) { c.fixture = v; },
       [](const RunConfig& c) { return c.fixture; }},
      CMC_DOUBLE("r", r),
      CMC_DOUBLE("c", c),
      CMC_DOUBLE("amplitude", amplitude),
      CMC_INT("mode_m", mode_m),
      CMC_INT("mode_k", mode_k),
      CMC_DOUBLE("hopf_a", hopf_a),
      CMC_INT("hopf_w", hopf_w),
      {"file", [](RunConfig& c, const std::string&, const std::string& v) { c.file = v; },
       [](const RunConfig& c) { return c.file; }},
      CMC_INT("n", n),
      {"out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
       [](const RunConfig& c) { return c.out; }},
      {"seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
           throw UsageError("config: " + k + " expects a non-negative integer");
         c.seed = std::stoull(v);
         c.plan.seed = c.seed;
       },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      CMC_INT("plan.circle", plan.circle),
      CMC_DOUBLE("plan.r_min", plan.r_min),
      CMC_DOUBLE("plan.r_max", plan.r_max),
      CMC_INT("plan.radial", plan.radial),
      CMC_INT("plan.angular", plan.angular),
      CMC_INT("plan.rho_samples", plan.rho_samples),
      CMC_DOUBLE("plan.rho_r_min", plan.rho_r_min),
      CMC_DOUBLE("plan.rho_r_max", plan.rho_r_max),
      CMC_INT("plan.newton_budget", plan.newton_budget),
      CMC_INT("plan.refine_depth", plan.refine_depth),
      CMC_INT("plan.order_angles", plan.order_angles),
      CMC_DOUBLE("tol.unit_norm", tol.unit_norm),
      CMC_DOUBLE("tol.sl_det", tol.sl_det),
      CMC_DOUBLE("tol.eigen_residual", tol.eigen_residual),
      CMC_DOUBLE("tol.flatness_threshold", tol.flatness_threshold),
      CMC_DOUBLE("tol.holonomy_step", tol.holonomy_step),
      CMC_DOUBLE("tol.dlambda_rel", tol.dlambda_rel),
      CMC_DOUBLE("tol.unitary", tol.unitary),
      CMC_DOUBLE("tol.branch_order_margin", tol.branch_order_margin),
      CMC_DOUBLE("tol.newton_residual", tol.newton_residual),
      CMC_DOUBLE("tol.reality", tol.reality),
      CMC_DOUBLE("tol.identity_holonomy", tol.identity_holonomy),
      CMC_DOUBLE("tol.s2", tol.s2),
      CMC_DOUBLE("tol.sphere_contract", tol.sphere_contract),
      {"scheme",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.scheme = parse_derivative_scheme(v);
         } catch (const Error&) {
           throw UsageError("config: " + k + " must be fd4 or spectral");
         }
       },
       [](const RunConfig& c) { return to_string(c.scheme); }},
      {"interpolation",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.interpolation = parse_interpolation(v);
         } catch (const Error&) {
           throw UsageError("config: " + k + " must be bicubic or trigonometric");
         }
       },
       [](const RunConfig& c) { return to_string(c.interpolation); }},
      CMC_INT("substeps", substeps),
      CMC_INT("generator", generator),
      CMC_INT("flat_samples", flat_samples),
      CMC_INT("cw_samples", cw_samples),
      CMC_INT("spectral_n", spectral_n),
      {"sym.target",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         try {
           c.sym_target = parse_space_form(v);
         } catch (const Error&) {
           throw UsageError("config: " + k + " must be s3, r3 or h3");
         }
       },
       [](const RunConfig& c) { return to_string(c.sym_target); }},
      {"sym.lambda0", [](RunConfig& c, const std::string&, const std::string& v) { c.sym_lambda0 = parse_complex(v); },
       [](const RunConfig& c) { return format_complex(c.sym_lambda0); }},
      {"sym.lambda1",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.sym_lambda1 = v.empty() || v == "auto" ? std::nullopt : std::optional<cplx>(parse_complex(v));
       },
       [](const RunConfig& c) { return c.sym_lambda1 ? format_complex(*c.sym_lambda1) : std::string("auto"); }},
      CMC_DOUBLE("sym.h_tolerance", sym_h_tolerance),
      {"threshold_override",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.threshold_override = v.empty() || v == "none" ? std::nullopt : std::optional<double>(to_double(k, v));
       },
       [](const RunConfig& c) { return c.threshold_override ? fmt(*c.threshold_override) : std::string("none"); }},
  };
  return t;
}

#undef CMC_DOUBLE
#undef CMC_INT

}  // namespace

cplx parse_complex(const std::string& raw) {
  const std::string s = trim(raw);
  auto bad = [&] { return UsageError("cannot parse complex number '" + raw + "' (use x, x,y or polar:r,theta)"); };
  std::string body = s;
  const bool polar = s.rfind("polar:", 0) == 0;
  if (polar) body = s.substr(6);
  const auto comma = body.find(',');
  try {
    if (comma == std::string::npos) {
      if (polar) throw bad();
      return {to_double("complex", trim(body)), 0.0};
    }
    const double a = to_double("complex", trim(body.substr(0, comma)));
    const double b = to_double("complex", trim(body.substr(comma + 1)));
    return polar ? std::polar(a, b) : cplx(a, b);
  } catch (const UsageError&) {
    throw bad();
  }
}

std::string format_complex(cplx z) { return fmt(z.real()) + "," + fmt(z.imag()); }

RunConfig::RunConfig() {
  for (const auto& e : table()) values_[e.key] = e.get(*this);
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> k;
  for (const auto& e : table()) k.push_back(e.key);
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string k = trim(key), v = trim(value);
  for (const auto& e : table())
    if (e.key == k) {
      e.set(*this, k, v);
      values_[k] = e.get(*this);
      return;
    }
  throw UsageError("config: unknown key '" + k + "'");
}

void RunConfig::load(std::istream& is, const std::string& origin) {
  std::string line;
  int no = 0;
  while (std::getline(is, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(origin + ":" + std::to_string(no) + ": expected key = value");
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(origin + ":" + std::to_string(no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file '" + path + "'");
  load(is, path);
}

void RunConfig::validate() const {
  static const std::vector<std::string> fixtures = {"clifford", "homogeneous", "vacuum", "perturbed", "hopf", "file"};
  if (std::find(fixtures.begin(), fixtures.end(), fixture) == fixtures.end())
    throw UsageError("config: unknown fixture '" + fixture + "'");
  if (fixture == "file" && file.empty()) throw UsageError("config: fixture = file needs file = <path>");
  if (n < 16) throw UsageError("config: n must be at least 16");
  if (spectral_n < 16) throw UsageError("config: spectral_n must be at least 16");
  if (!(r > 0 && r < 1)) throw UsageError("config: r must lie in (0, 1)");
  if (!(c > 0)) throw UsageError("config: c must be positive");
  if (hopf_w < 1) throw UsageError("config: hopf_w must be at least 1");
  if (substeps < 1) throw UsageError("config: substeps must be positive");
  if (generator != 1 && generator != 2) throw UsageError("config: generator must be 1 or 2");
  if (flat_samples < 1 || cw_samples < 1) throw UsageError("config: sample counts must be positive");
  if (!(sym_h_tolerance > 0)) throw UsageError("config: sym.h_tolerance must be positive");
  if (threshold_override && !(*threshold_override > 0)) throw UsageError("config: threshold_override must be positive");
  const double t[] = {tol.unit_norm,  tol.sl_det,         tol.eigen_residual,   tol.flatness_threshold, tol.holonomy_step,
                      tol.dlambda_rel, tol.unitary,       tol.branch_order_margin, tol.newton_residual, tol.reality,
                      tol.identity_holonomy, tol.s2, tol.sphere_contract};
  for (double x : t)
    if (!(x > 0)) throw UsageError("config: all tolerances must be positive");
  try {
    plan.validate();
  } catch (const Error& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
}

SymConfig RunConfig::sym() const {
  try {
    SymConfig s = SymConfig::make(sym_target, sym_lambda0, sym_lambda1.value_or(cplx(0.0)));
    s.validate();
    return s;
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string("sym: ") + e.what());
  }
}

}  // namespace cmc::pipeline

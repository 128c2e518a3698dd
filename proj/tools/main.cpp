// cmc-spectral: analyze, reconstruct, verify and spectral-export.
//
// Exit status: 0 all checks pass, 1 verification failure or runtime error,
// 2 usage or configuration error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cmc/pipeline.hpp"

namespace pl = cmc::pipeline;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::string> fixture, out, file;
  std::optional<int> n;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_file, "key = value config file");
  sub->add_option("-s,--set", c.sets, "override a config key (key=value), repeatable");
  sub->add_option("--fixture", c.fixture, "clifford | homogeneous | vacuum | perturbed | hopf | file");
  sub->add_option("--file", c.file, "immersion CSV for fixture = file");
  sub->add_option("-n,--n", c.n, "grid resolution per direction");
  sub->add_option("-o,--out", c.out, "output directory");
  sub->add_option("--seed", c.seed, "random seed");
  sub->add_flag("-q,--quiet", c.quiet, "do not print the summary");
}

pl::RunConfig build_config(const Common& c) {
  pl::RunConfig cfg;
  if (!c.config_file.empty()) cfg.load_file(c.config_file);
  if (c.fixture) cfg.set("fixture", *c.fixture);
  if (c.file) cfg.set("file", *c.file);
  if (c.n) cfg.set("n", std::to_string(*c.n));
  if (c.out) cfg.set("out", *c.out);
  if (c.seed) cfg.set("seed", std::to_string(*c.seed));
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw pl::UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral data and reconstruction of constant mean curvature tori"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pl::kToolVersion));

  Common common;
  struct Cmd {
    const char* name;
    const char* help;
    pl::CommandResult (*run)(const pl::RunConfig&);
  };
  const Cmd cmds[] = {
      {"analyze", "geometry, flatness, spectral curve and constrained-Willmore report", pl::analyze},
      {"reconstruct", "Sym-Bobenko reconstruction with an independent mean-curvature check", pl::reconstruct},
      {"verify", "run the invariant suite; exit 1 on any failure", pl::verify},
      {"spectral-export", "export trace sweeps, holonomies, branch points and CW spectra", pl::spectral_export},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : cmds) {
    auto* s = app.add_subcommand(c.name, c.help);
    add_common(s, common);
    subs.push_back(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (std::size_t k = 0; k < subs.size(); ++k) {
      if (!subs[k]->parsed()) continue;
      const auto cfg = build_config(common);
      const auto res = cmds[k].run(cfg);
      if (!common.quiet) std::cout << res.summary;
      return res.exit_code;
    }
  } catch (const pl::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

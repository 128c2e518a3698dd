#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmc/pipeline.hpp"

using namespace cmc;
using namespace cmc::pipeline;

namespace {

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("cmc_pipeline_" + name);
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("complex parsing") {
  CHECK(parse_complex("2") == cplx(2, 0));
  CHECK(parse_complex(" -1.5 , 0.25 ") == cplx(-1.5, 0.25));
  const cplx p = parse_complex("polar:1,1.5707963267948966");
  CHECK(std::abs(p - cplx(0, 1)) < 1e-15);
  CHECK_THROWS_AS(parse_complex(""), UsageError);
  CHECK_THROWS_AS(parse_complex("1,i"), UsageError);
  CHECK_THROWS_AS(parse_complex("polar:2"), UsageError);
  CHECK(parse_complex(format_complex(cplx(0.1, -1.0 / 3))) == cplx(0.1, -1.0 / 3));
}

TEST_CASE("config keys") {
  RunConfig c;
  CHECK(c.values().size() == RunConfig::keys().size());
  CHECK(c.values().at("n") == "64");
  CHECK(c.values().at("tol.s2") == "1e-10");
  c.set("n", "32");
  CHECK(c.n == 32);
  c.set(" tol.reality ", " 2e-6 ");
  CHECK(c.tol.reality == 2e-6);
  c.set("seed", "9");
  CHECK(c.plan.seed == 9);
  c.set("sym.lambda1", "auto");
  CHECK_FALSE(c.sym_lambda1.has_value());
  CHECK_THROWS_AS(c.set("nope", "1"), UsageError);
  CHECK_THROWS_AS(c.set("n", "3.5"), UsageError);
  CHECK_THROWS_AS(c.set("r", "abc"), UsageError);
  CHECK_THROWS_AS(c.set("seed", "-1"), UsageError);
  CHECK_THROWS_AS(c.set("scheme", "euler"), UsageError);
}

TEST_CASE("every echoed value reads back unchanged") {
  RunConfig c;
  c.set("r", "0.123456789");
  c.set("sym.lambda0", "polar:1,0.7");
  c.set("threshold_override", "3e-9");
  const auto before = c.values();
  RunConfig d;
  for (const auto& [k, v] : before) d.set(k, v);
  CHECK(d.values() == before);
}

TEST_CASE("config files") {
  std::istringstream is("# comment\nfixture = vacuum   # trailing\n\n n=20\nsym.target = h3\n");
  RunConfig c;
  c.load(is);
  CHECK(c.fixture == "vacuum");
  CHECK(c.n == 20);
  CHECK(c.sym_target == SpaceForm::H3);
  std::istringstream bad("n 20\n");
  CHECK_THROWS_WITH_AS(c.load(bad, "x.cfg"), doctest::Contains("x.cfg:1"), UsageError);
  CHECK_THROWS_AS(c.load_file("/nonexistent/cfg"), UsageError);
}

TEST_CASE("validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  auto rejects = [](const std::string& k, const std::string& v) {
    RunConfig d;
    d.set(k, v);
    CHECK_THROWS_AS(d.validate(), UsageError);
  };
  rejects("n", "8");
  rejects("tol.s2", "0");
  rejects("tol.flatness_threshold", "-1");
  rejects("fixture", "sphere");
  rejects("fixture", "file");  // no path
  rejects("generator", "3");
  rejects("r", "1.2");
  rejects("plan.r_min", "-1");
  rejects("threshold_override", "0");
}

TEST_CASE("Sym options are checked before any computation") {
  RunConfig c;
  c.set("fixture", "vacuum");
  c.set("sym.lambda0", "0.5");
  c.set("out", temp_dir("sym"));
  CHECK_THROWS_AS(c.sym(), UsageError);
  CHECK_THROWS_AS(reconstruct(c), UsageError);
  CHECK_FALSE(std::filesystem::exists(c.out));
  c.set("sym.target", "h3");
  c.set("sym.lambda1", "auto");
  CHECK(c.sym().predicted_H() == doctest::Approx(5.0 / 3.0));
}

TEST_CASE("fixtures") {
  RunConfig c;
  c.set("n", "16");
  c.set("fixture", "vacuum");
  const auto v = load_fixture(c);
  CHECK_FALSE(v.immersion.has_value());
  CHECK(v.lattice().n1() == 16);
  c.set("fixture", "hopf");
  const auto h = load_fixture(c);
  REQUIRE(h.geometry.has_value());
  CHECK(h.geometry->H_max - h.geometry->H_min > 1e-2);
  c.set("fixture", "file");
  c.set("file", "/nonexistent.csv");
  CHECK_THROWS_AS(load_fixture(c), UsageError);
}

TEST_CASE("analyze report on the vacuum") {
  RunConfig c;
  c.set("fixture", "vacuum");
  c.set("n", "16");
  c.set("plan.radial", "17");
  c.set("plan.angular", "16");
  c.set("plan.circle", "16");
  c.set("out", temp_dir("analyze"));
  const auto r = analyze(c);
  CHECK(r.exit_code == 0);
  CHECK(r.report["schema_version"] == kSchemaVersion);
  CHECK(r.report["config"]["fixture"] == "vacuum");
  CHECK(r.report["flatness"]["flat"] == true);
  CHECK(r.report["curve"]["g"] == 0);
  CHECK(r.report["willmore"].is_null());
  CHECK_FALSE(r.report.contains("flatness_violation"));
  for (const auto& f : r.files) CHECK(std::filesystem::exists(std::filesystem::path(c.out) / f));
  std::ifstream is(std::filesystem::path(c.out) / "analyze.json");
  std::stringstream ss;
  ss << is.rdbuf();
  CHECK(ss.str() == dump(r.report));
  CHECK(dump(analyze(c).report) == ss.str());
}

TEST_CASE("analyze flags the perturbed torus") {
  RunConfig c;
  c.set("fixture", "perturbed");
  c.set("n", "16");
  c.set("cw_samples", "2");
  c.set("out", temp_dir("perturbed"));
  const auto r = analyze(c);
  REQUIRE(r.report.contains("flatness_violation"));
  CHECK(r.report["flatness_violation"]["max_residual"].get<double>() > 1e-3);
  CHECK(r.report["curve"].is_null());
  CHECK(r.report["willmore"]["flat"] == false);
}

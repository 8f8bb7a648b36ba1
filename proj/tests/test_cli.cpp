#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hbr/acceptance.hpp"
#include "hbr/config.hpp"
#include "hbr/report.hpp"
#include "hbr/runs.hpp"

using namespace hbr;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("hbr_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

template <class E>
std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const E& e) {
    return e.what();
  }
  return "<no error>";
}

const char* kSmall = R"({
  // tiny instance for fast runs
  "domain": { "kind": "half_space", "window": { "lo": [-2.5, 0.0], "hi": [2.5, 2.5] } },
  "nonlinearity": { "kind": "log_model" },
  "solver": { "h": 0.0625 },
  "scenario": { "R": [1.0, 0.5], "seeds": [11, 23] }
})";

}  // namespace

TEST_CASE("config defaults and JSONC comments") {
  auto cfg = parse_config("{ /* block */ \"version\": 1 // line\n }");
  CHECK(cfg.domain.spec.kind == DomainKind::half_space);
  CHECK(cfg.nl.kind == PhiKind::log_model);
  CHECK(cfg.op.kind == OperatorKind::pucci_minus_drift);
  CHECK(cfg.solver.h == 1.0 / 64);
  CHECK(cfg.scenario.R == std::vector<double>{1.0, 0.5, 0.25});
  CHECK(cfg.scenario.seeds.size() == 3);
  CHECK(cfg.hash.size() == 16);
}

TEST_CASE("config hash ignores formatting and comments but not values") {
  auto a = parse_config("{\"solver\": {\"h\": 0.0625}, \"version\": 1}");
  auto b = parse_config("// c\n{ \"version\" : 1,\n  \"solver\" : { \"h\" : 0.0625 } }");
  auto c = parse_config("{\"solver\": {\"h\": 0.125}, \"version\": 1}");
  CHECK(a.hash == b.hash);
  CHECK(a.hash != c.hash);
  CHECK(hex64(fnv1a("")) == "cbf29ce484222325");
  CHECK(hex64(fnv1a("a")) == "af63dc4c8601ec8c");
}

TEST_CASE("config rejects bad values before any compute") {
  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"version\": 2}"), ConfigError);
  CHECK(error_of<ConfigError>([] { parse_config("{\"solvr\": {}}"); }).find("unknown key 'config.solvr'") !=
        std::string::npos);
  CHECK(error_of<ConfigError>([] { parse_config("{\"solver\": {\"h\": 0}}"); }).find("solver.h") != std::string::npos);
  CHECK(error_of<ConfigError>([] { parse_config("{\"solver\": {\"h\": \"x\"}}"); }).find("wrong type") !=
        std::string::npos);
  CHECK_THROWS_AS(parse_config("{\"solver\": {\"h\": 0.25, \"nx\": 7}}"), ConfigError);
  CHECK_NOTHROW(parse_config("{\"domain\": {\"window\": {\"lo\": [0, 0], \"hi\": [1, 1]}}, \"solver\": {\"h\": 0.25, \"nx\": 5}}"));
  CHECK_THROWS_AS(parse_config("{\"scenario\": {\"R\": [2.0]}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"scenario\": {\"sharpness\": {\"H\": [100]}}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"scenario\": {\"sharpness\": {\"eps\": 0.3}}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"operator\": {\"lambda\": 2, \"Lambda\": 1}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"nonlinearity\": {\"kind\": \"tabulated\"}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"nonlinearity\": {\"kind\": \"cubic\"}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"output\": {\"formats\": [\"xml\"]}}"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"scenario\": {\"family\": {\"domains\": [\"annulus_sector\"]}}}"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.jsonc"), ConfigError);
}

TEST_CASE("referenced paths must exist and resolve against the config directory") {
  auto dir = scratch("paths");
  CHECK(error_of<ConfigError>([&] {
          parse_config("{\"domain\": {\"kind\": \"lipschitz_graph\", \"table\": \"missing.csv\"}}", dir.string());
        }).find("does not exist") != std::string::npos);
  {
    std::ofstream t(dir / "g.csv");
    t << "x,y\n-4,0\n0,0.2\n4,0\n";
  }
  {
    std::ofstream c(dir / "c.jsonc");
    c << "{\"domain\": {\"kind\": \"lipschitz_graph\", \"table\": \"g.csv\"}}";
  }
  auto cfg = load_config((dir / "c.jsonc").string());
  CHECK(cfg.domain.effective_l == Approx(0.05));
  CHECK_NOTHROW(validate_for(cfg, "geometry"));
}

TEST_CASE("flatness validation names the l < 1/8 hypothesis") {
  auto steep = parse_config("{\"domain\": {\"kind\": \"lipschitz_graph\", \"l\": 0.2}}");
  for (const char* sub : {"geometry", "holder"}) {
    auto msg = error_of<PreconditionError>([&] { validate_for(steep, sub); });
    CHECK(msg.find("l < 1/8") != std::string::npos);
    CHECK(msg.find("0.2") != std::string::npos);
  }
  CHECK_NOTHROW(validate_for(steep, "carleson"));
  auto edge = parse_config("{\"domain\": {\"kind\": \"lipschitz_graph\", \"l\": 0.125}}");
  CHECK_THROWS_AS(validate_for(edge, "geometry"), PreconditionError);
  auto ok = parse_config("{\"domain\": {\"kind\": \"lipschitz_graph\", \"l\": 0.1}}");
  CHECK_NOTHROW(validate_for(ok, "geometry"));
  CHECK_THROWS_AS(validate_for(ok, "bharnack"), PreconditionError);
}

TEST_CASE("envelope and writer") {
  auto cfg = parse_config(kSmall);
  auto env = envelope(cfg, "structure", {{"x", 1}});
  CHECK(env["schema_version"] == kEnvelopeSchemaVersion);
  CHECK(env["module_version"] == kModuleVersion);
  CHECK(env["config_hash"] == cfg.hash);
  CHECK(env["subcommand"] == "structure");
  CHECK(env["result"]["x"] == 1);

  auto dir = scratch("writer");
  ReportWriter w(dir.string(), OutputFormat::both);
  w.write(cfg, "structure", {{"x", 1}}, "a,b\n1,2\n");
  CHECK(fs::exists(dir / "structure.json"));
  auto csv = slurp(dir / "structure.csv");
  CHECK(csv.rfind("# schema_version=1 module_version=0.1.0 config_hash=" + cfg.hash + "\n", 0) == 0);
  CHECK(csv.find("a,b\n1,2\n") != std::string::npos);

  ReportWriter j((dir / "j").string(), OutputFormat::json);
  j.write(cfg, "s", {}, "a\n");
  CHECK(fs::exists(dir / "j" / "s.json"));
  CHECK_FALSE(fs::exists(dir / "j" / "s.csv"));
  CHECK_THROWS_AS(output_format_from_string("yaml"), ConfigError);
  CHECK(output_format_from_config(parse_config("{\"output\": {\"formats\": [\"csv\"]}}")) == OutputFormat::csv);
}

TEST_CASE("structure and sharpness drivers") {
  auto cfg = parse_config(kSmall);
  auto s = run_structure(cfg);
  CHECK(s.result["passed"] == true);
  CHECK(s.result["osgood"]["at_zero"]["verdict"] == "diverges");
  CHECK(s.csv.find("passed,1") != std::string::npos);

  auto sh = run_sharpness(parse_config("{\"scenario\": {\"sharpness\": {\"H\": [1e4], \"eps\": 0.03, \"lemma61_eps\": [0.1]}}}"));
  REQUIRE(sh.result["examples"].size() == 1);
  CHECK(sh.result["examples"][0]["gamma"].get<double>() == std::exp(1.0 / 16.0 - 0.06));
  CHECK(sh.result["lemma61"].size() == 1);
  CHECK(sh.csv.find("10000,0.03,") != std::string::npos);
}

TEST_CASE("geometry driver on a graph reports the Lipschitz bound") {
  auto cfg = parse_config("{\"domain\": {\"kind\": \"lipschitz_graph\", \"l\": 0.1}}");
  auto g = run_geometry(cfg);
  CHECK(g.result["lipschitz_bound"].get<double>() == Approx(0.1 / std::sqrt(1.01)).epsilon(1e-12));
  CHECK(g.result["all_within_bound"] == true);
  CHECK(g.result["scales"].size() == 3);
  CHECK(g.result["chain"]["predicates_hold"] == true);
}

TEST_CASE("solver-backed drivers are identical across thread counts") {
  auto cfg = parse_config(kSmall);
  auto a = run_carleson(cfg, 1), b = run_carleson(cfg, 3);
  CHECK(a.result.dump() == b.result.dump());
  CHECK(a.csv == b.csv);
  for (auto& r : a.result["results"]) CHECK(r["C_fit"].get<double>() == 2.0);

  auto h1 = run_harnack(cfg, 1), h2 = run_harnack(cfg, 2);
  CHECK(h1.result.dump() == h2.result.dump());
  CHECK(h1.result["certificates"].size() == 4);

  auto bl = run_blowup(cfg, 2);
  for (auto& r : bl.result["runs"]) {
    CHECK(r["profile"]["monotone"] == true);
    CHECK(r["profile"]["alternative"] == "S0");
  }

  auto d1 = scratch("det1"), d2 = scratch("det2");
  ReportWriter(d1.string(), OutputFormat::both).write(cfg, "carleson", a.result, a.csv);
  ReportWriter(d2.string(), OutputFormat::both).write(cfg, "carleson", b.result, b.csv);
  CHECK(slurp(d1 / "carleson.json") == slurp(d2 / "carleson.json"));
  CHECK(slurp(d1 / "carleson.csv") == slurp(d2 / "carleson.csv"));
}

TEST_CASE("solve driver dumps a grid that reads back") {
  auto cfg = parse_config(kSmall);
  auto s = run_solve(cfg);
  CHECK(s.out.result["diagnostics"]["final_residual"].get<double>() <= s.out.result["diagnostics"]["tol_used"].get<double>());
  auto dir = scratch("solve");
  s.field.write((dir / "solve.grid").string());
  auto back = GridField::read((dir / "solve.grid").string());
  REQUIRE(back.size() == s.field.size());
  for (std::size_t k = 0; k < back.size(); ++k) CHECK(back.values[k] == s.field.values[k]);
}

TEST_CASE("boundary Harnack driver matches v(A) to u(A) by shooting") {
  auto cfg = parse_config(R"({
    "domain": { "kind": "half_space", "window": { "lo": [-3, 0], "hi": [3, 3] } },
    "nonlinearity": { "kind": "linear" },
    "solver": { "h": 0.0625 },
    "scenario": { "R": [0.5], "seeds": [11, 23] }
  })");
  auto mp = matched_pair(cfg, 0.5, 11, 23);
  Vec2 A = corkscrew(DomainSpec::half_space(), {0, 0}, 1.0).point;
  CHECK(mp.v.field.sample(A) == Approx(mp.u.field.sample(A)).epsilon(1e-10));
  CHECK(mp.shots > 1);
  auto out = run_bharnack(cfg, 1);
  CHECK(out.result["runs"][0]["report"]["A_mismatch"].get<double>() < 1e-10);
}

TEST_CASE("acceptance runner reports each selected criterion") {
  auto cfg = parse_config(kSmall);
  AcceptanceOptions opt;
  opt.only = {1, 2, 3};
  int seen = 0;
  opt.on_result = [&](const CriterionResult&) { ++seen; };
  auto rep = run_acceptance(cfg, opt);
  CHECK(seen == 3);
  REQUIRE(rep.criteria.size() == 3);
  for (auto& c : rep.criteria) {
    CHECK(c.checks_pass);
    CHECK(c.line().rfind("PASS criterion", 0) == 0);
  }
  CHECK(rep.to_json()["all_checks_pass"] == true);
  CHECK(rep.csv().find("1,flatness formula,1,") != std::string::npos);

  CriterionResult slow{9, "x", true, "", {}, 2.0, 1.0};
  CHECK_FALSE(slow.pass());
  CHECK(slow.line().find("runtime limit exceeded") != std::string::npos);
}

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <string>

#include "hbr/acceptance.hpp"
#include "hbr/config.hpp"
#include "hbr/report.hpp"
#include "hbr/runs.hpp"

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string format;
  int threads = 1;
  std::vector<int> only;
};

int fail(const std::string& sub, const std::string& kind, const std::string& msg, int code) {
  nlohmann::json e = {{"error", {{"subcommand", sub}, {"kind", kind}, {"message", msg}, {"exit_code", code}}}};
  std::cerr << e.dump() << std::endl;
  return code;
}

int run(const std::string& sub, const Flags& f) {
  using namespace hbr;
  auto cfg = load_config(f.config);
  validate_for(cfg, sub);
  auto fmt = f.format.empty() ? output_format_from_config(cfg) : output_format_from_string(f.format);
  ReportWriter w(f.out.empty() ? cfg.output.directory : f.out, fmt);

  if (sub == "suite") {
    AcceptanceOptions opt;
    opt.threads = f.threads;
    opt.only = f.only;
    opt.on_result = [](const CriterionResult& r) { std::cout << r.line() << std::endl; };
    auto rep = run_acceptance(cfg, opt);
    w.write(cfg, "suite", rep.to_json(), rep.csv());
    return rep.all_pass() ? 0 : 1;
  }
  if (sub == "solve") {
    auto s = run_solve(cfg);
    w.write(cfg, sub, s.out.result, s.out.csv);
    s.field.write(w.path("solve.grid"));
    if (w.wants_csv()) s.field.write_csv(w.path("solve_field.csv"));
    return 0;
  }
  RunOutput out;
  if (sub == "structure") out = run_structure(cfg);
  else if (sub == "geometry") out = run_geometry(cfg);
  else if (sub == "harnack") out = run_harnack(cfg, f.threads);
  else if (sub == "carleson") out = run_carleson(cfg, f.threads);
  else if (sub == "holder") out = run_holder(cfg, f.threads);
  else if (sub == "blowup") out = run_blowup(cfg, f.threads);
  else if (sub == "bharnack") out = run_bharnack(cfg, f.threads);
  else if (sub == "sharpness") out = run_sharpness(cfg);
  else throw ConfigError("unknown subcommand '" + sub + "'");
  w.write(cfg, sub, out.result, out.csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"boundary Harnack experiment runner"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> subs = {
      {"structure", "nonlinearity structure and Osgood checks"},
      {"geometry", "flatness, corkscrew and chain audit"},
      {"solve", "single Dirichlet solve with a field dump"},
      {"harnack", "interior Harnack certificates across R"},
      {"carleson", "Carleson report across R"},
      {"holder", "boundary Holder and oscillation-decay fits"},
      {"blowup", "blow-up profile near a boundary point"},
      {"bharnack", "boundary Harnack report on the half-space"},
      {"sharpness", "explicit sharpness example and threshold check"},
      {"suite", "full acceptance run"}};
  for (auto& [name, help] : subs) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("--config", flags.config, "experiment config (JSONC)")->required();
    s->add_option("--out", flags.out, "output directory (default: output.directory)");
    s->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
    s->add_option("--format", flags.format, "json, csv or both (default: output.formats)")
        ->check(CLI::IsMember({"json", "csv", "both"}));
    if (name == "suite") s->add_option("--only", flags.only, "criterion ids to run");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("", "usage", e.what(), 2);
  }
  std::string sub = app.get_subcommands().front()->get_name();
  try {
    return run(sub, flags);
  } catch (const hbr::PreconditionError& e) {
    return fail(sub, "precondition", e.what(), 2);
  } catch (const hbr::ConfigError& e) {
    return fail(sub, "config", e.what(), 2);
  } catch (const hbr::ArgumentError& e) {
    return fail(sub, "argument", e.what(), 2);
  } catch (const hbr::DomainError& e) {
    return fail(sub, "domain", e.what(), 2);
  } catch (const hbr::NumericalFailure& e) {
    return fail(sub, "numerical", e.what(), 3);
  } catch (const std::exception& e) {
    return fail(sub, "internal", e.what(), 3);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "harmonic_rank/errors.hpp"
#include "harmonic_rank/parallel.hpp"
#include "harmonic_rank/runner.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace hrank;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hrank_runner_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig config(const std::string& command, const std::string& model = "h2") {
  RunConfig c;
  c.command = command;
  c.model = model;
  return c;
}

const Json& value(const Json& rec, const std::string& field) { return rec.at(field).at("value"); }

void check_record_shape(const Json& rec) {
  for (const auto& f : Summary::fields()) {
    CAPTURE(f);
    REQUIRE(rec.contains(f));
    const Json& e = rec[f];
    const bool populated = e.contains("value") && e.contains("source");
    const bool skipped = e.contains("skipped") && e["skipped"].is_string() && !e["skipped"].get<std::string>().empty();
    CHECK(populated != skipped);
  }
  for (const auto& [k, e] : rec.items()) {
    if (k == "command") continue;
    CAPTURE(k);
    CHECK((e.contains("source") || e.contains("skipped")));
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("config loading and validation") {
  const fs::path dir = scratch("config");
  std::ofstream(dir / "spec.txt") << "  h3\n";
  std::ofstream(dir / "run.json") << R"({"command": "density", "model_file": ")" << (dir / "spec.txt").string()
                                  << R"(", "seed": 18446744073709551615, "tol": 1e-7,
      "density": {"tmax": 12, "step": 0.1, "seeds": 3},
      "hyperbolicity": {"scales": [2, 4], "quadruples": 500},
      "equivalence": {"gallery": "default"}})";
  const RunConfig c = load_config((dir / "run.json").string());
  CHECK(c.command == "density");
  CHECK(c.model == "h3");
  CHECK(c.seed == 18446744073709551615ull);
  CHECK(*c.tol == 1e-7);
  CHECK(c.tmax == 12.0);
  CHECK(c.seeds == 3);
  CHECK(c.scales == std::vector<double>{2, 4});
  CHECK(c.gallery == default_gallery());
  CHECK_NOTHROW(validate(c));

  auto bad = [](const std::string& text) {
    try {
      apply_config(Json::parse(text));
    } catch (const Error& e) {
      return e.code() == ErrorCode::ConfigError;
    }
    return false;
  };
  CHECK(bad(R"({"modle": "h2"})"));
  CHECK(bad(R"({"density": {"tmax": "long"}})"));
  CHECK(bad(R"({"equivalence": {"gallery": "huge"}})"));
  CHECK(bad(R"({"model": "h2", "model_file": "x"})"));

  auto invalid = [](RunConfig c) {
    try {
      validate(c);
    } catch (const Error& e) {
      return e.code() == ErrorCode::ConfigError;
    }
    return false;
  };
  RunConfig base = config("density");
  CHECK_FALSE(invalid(base));
  RunConfig c1 = base;
  c1.tol = 0.0;
  CHECK(invalid(c1));
  RunConfig c2 = base;
  c2.tmax = 100.0;
  CHECK(invalid(c2));
  RunConfig c3 = base;
  c3.scales = {4, 4};
  CHECK(invalid(c3));
  RunConfig c4 = base;
  c4.command = "plot";
  CHECK(invalid(c4));
  RunConfig c5 = base;
  c5.identity_range = 6.0;
  CHECK(invalid(c5));
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(Error(ErrorCode::ConfigError, "x")) == kExitConfig);
  CHECK(exit_code_for(Error(ErrorCode::InvalidSpec, "x")) == kExitConfig);
  CHECK(exit_code_for(Error(ErrorCode::NoConvergence, "x")) == kExitNumerics);
  CHECK(exit_code_for(Error(ErrorCode::IntegrationDiverged, "x")) == kExitNumerics);
  try {
    run_command(config("rank", "h2:banana"));
    FAIL("expected InvalidSpec");
  } catch (const Error& e) {
    CHECK(exit_code_for(e) == kExitConfig);
  }
}

TEST_CASE("worker count honours the environment") {
  setenv("HARMONIC_RANK_THREADS", "3", 1);
  CHECK(worker_count() == 3);
  setenv("HARMONIC_RANK_THREADS", "zero", 1);
  CHECK(worker_count() >= 1);
  unsetenv("HARMONIC_RANK_THREADS");
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::count(hits.begin(), hits.end(), 1) == 100);
  CHECK_THROWS_AS(parallel_for(10, 3, [](std::size_t i) {
                    if (i == 7) throw Error(ErrorCode::NoConvergence, "boom");
                  }),
                  Error);
}

TEST_CASE("density command") {
  const fs::path dir = scratch("density");
  RunConfig c = config("density");
  c.tmax = 20.0;
  c.out_dir = dir.string();
  const CommandResult r = run_command(c);
  CHECK(r.exit_code == 0);
  check_record_shape(r.summary);
  CHECK(value(r.summary, "h").get<double>() == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(value(r.summary, "growth_class") == "PurelyExponential");
  CHECK(value(r.summary, "closed_form_deviation").get<double>() < 1e-10);

  std::string curve;
  for (const auto& f : r.files)
    if (f.find("_density.tsv") != std::string::npos) curve = f;
  REQUIRE(!curve.empty());
  const auto lines = read_lines(curve);
  CHECK(lines[0].rfind("# model: space_form", 0) == 0);
  CHECK(lines[1].rfind("# version: ", 0) == 0);
  bool found = false;
  for (const auto& l : lines) {
    if (l.empty() || l[0] == '#') continue;
    std::istringstream is(l);
    double t, log_f, f;
    is >> t >> log_f >> f;
    if (std::abs(t - 2.0) < 1e-12) {
      found = true;
      CHECK(f == doctest::Approx(std::sinh(2.0)).epsilon(1e-9));
    }
  }
  CHECK(found);

  const CommandResult flat = run_command(config("density", "flat3"));
  CHECK(value(flat.summary, "growth_class") == "Polynomial");
  CHECK(value(flat.summary, "growth_constants")["degree"] == 2);
  CHECK(flat.summary["harmonicity"].contains("skipped"));

  RunConfig dr = config("density", "dr:2,1");
  dr.seeds = 10;
  const CommandResult d = run_command(dr);
  CHECK(value(d.summary, "harmonicity")["pass"] == true);
  CHECK(value(d.summary, "harmonicity")["deviation"].get<double>() < 1e-4);
}

TEST_CASE("rank, anosov and identities commands") {
  const CommandResult r = run_command(config("rank", "h2xr"));
  check_record_shape(r.summary);
  CHECK(value(r.summary, "rank") == 2);

  const CommandResult a = run_command(config("anosov", "h2xr"));
  CHECK(a.exit_code == 0);
  check_record_shape(a.summary);
  CHECK(value(a.summary, "anosov")["verdict"] == "Degenerate");
  CHECK(value(a.summary, "exponent_fits")["central"]["c"].get<double>() < 2.0);

  const CommandResult f = run_command(config("anosov", "flat2"));
  CHECK(value(f.summary, "exponent_fits")["stable"].contains("skipped"));

  RunConfig ic = config("identities", "synthetic:sin");
  ic.tol = 1e-8;
  const CommandResult i = run_command(ic);
  check_record_shape(i.summary);
  CHECK(value(i.summary, "identities")["passed"] == 6);
  CHECK(value(i.summary, "identities")["total"] == 6);
}

TEST_CASE("hyperbolicity command") {
  RunConfig c = config("hyperbolicity", "h3");
  c.quadruples = 2000;
  c.mc = 20000;
  const CommandResult r = run_command(c);
  check_record_shape(r.summary);
  CHECK(value(r.summary, "delta_verdict")["verdict"] == "Hyperbolic");
  CHECK(value(r.summary, "volume_comparison")["holds"] == true);
  CHECK(value(r.summary, "divergence")["alpha"].get<double>() == doctest::Approx(1.0).epsilon(1e-3));

  const CommandResult tb = run_command(config("hyperbolicity", "twoblock21"));
  CHECK(tb.exit_code == 0);
  CHECK(tb.summary["delta_verdict"]["skipped"] == "model has no distance oracle");

  RunConfig p = config("hyperbolicity", "h2xr");
  p.quadruples = 2000;
  const CommandResult pr = run_command(p);
  CHECK(value(pr.summary, "delta_verdict")["verdict"] == "NotHyperbolic");
  CHECK(pr.summary["volume_comparison"].contains("skipped"));
}

TEST_CASE("equivalence matrix") {
  const fs::path dir = scratch("equivalence");
  RunConfig c = config("equivalence");
  c.gallery = default_gallery();
  c.out_dir = dir.string();
  const CommandResult r = run_command(c);
  CHECK(r.exit_code == kExitOk);
  CHECK(value(r.summary, "agree") == true);
  const Json& m = value(r.summary, "matrix");
  REQUIRE(m.size() == default_gallery().size());
  for (const auto& row : m) {
    CAPTURE(row.dump());
    CHECK(row["agree"] == true);
  }
  const Json& prod = m[7];
  CHECK(prod["rank"] == 2);
  CHECK(prod["growth_class"] == "ExponentialHigherRank");
  CHECK(prod["degree"] == 1);
  CHECK(m[4]["hyperbolicity"] == "Skipped");
  for (const auto& rec : r.summary["records"]) check_record_shape(rec);
  CHECK(fs::exists(dir / "equivalence_matrix.tsv"));

  // A threshold no model can meet turns every Anosov leg Degenerate.
  RunConfig strict = c;
  strict.out_dir.clear();
  strict.gallery = {"h2"};
  strict.rho_tol = 100.0;
  CHECK(run_command(strict).exit_code == kExitMismatch);
}

TEST_CASE("determinism") {
  RunConfig c = config("equivalence");
  c.gallery = {"h2", "twoblock21", "h2xr"};
  c.seed = 99;
  c.threads = 1;
  const Json a = strip_wall_clock(run_command(c).summary);
  const Json b = strip_wall_clock(run_command(c).summary);
  c.threads = 3;
  const Json d = strip_wall_clock(run_command(c).summary);
  CHECK(a.dump() == b.dump());
  CHECK(a.dump() == d.dump());
  CHECK(a.dump().find("wall_clock") == std::string::npos);
}

TEST_CASE("report aggregates summary records") {
  const fs::path dir = scratch("report");
  RunConfig c = config("rank", "h3");
  c.out_dir = dir.string();
  run_command(c);
  c.command = "density";
  run_command(c);
  RunConfig rep = config("report");
  rep.out_dir = dir.string();
  const CommandResult r = run_command(rep);
  CHECK(r.summary["entries"].size() == 2);
  const auto lines = read_lines((dir / "report.tsv").string());
  CHECK(std::count_if(lines.begin(), lines.end(), [](const std::string& l) { return !l.empty() && l[0] != '#'; }) == 2);

  RunConfig empty = config("report");
  empty.out_dir = scratch("report_empty").string();
  CHECK_THROWS_AS(run_command(empty), Error);
}

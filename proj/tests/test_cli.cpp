#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "entroq/cli.hpp"
#include "entroq/common.hpp"

using namespace entroq;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("entroq_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::path p = scratch(name + ".cfg");
  std::ofstream(p) << text;
  return p;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(ENTROQ_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string gibbs_text(const fs::path& out) {
  return "experiment = gibbs\nseed = 1\noutput_dir = " + out.string() +
         "\nspace.hbar = 2\nspace.energy = 0, 1, 4  # three nodes\n";
}

std::string covariance_text(const fs::path& out, const std::string& extra = "") {
  return "experiment = fluct-covariance\nseed = 11\noutput_dir = " + out.string() +
         "\nnumerics.dt = 1e-3\nnumerics.samples = 20000\nnumerics.rel_tol = 0.1\nnumerics.write_samples = 1\n" + extra;
}

bool has_error(const std::vector<std::string>& errors, const std::string& needle) {
  for (const auto& e : errors)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("config syntax") {
  auto cfg = parse_config("# comment\nexperiment = gibbs\n\nseed=4\noutput_dir = x  # trailing\n");
  CHECK(cfg.experiment == "gibbs");
  CHECK(cfg.seed == 4);
  CHECK(cfg.output_dir == "x");
  CHECK_THROWS_AS(parse_config("experiment gibbs\n"), ValidationError);
  CHECK_THROWS_WITH_AS(parse_config("seed = 1\nseed = 2\n"), doctest::Contains("duplicate"), ValidationError);
  CHECK_THROWS_AS(parse_config("= 3\n"), ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/entroq.cfg"), ValidationError);
}

TEST_CASE("validation errors name the offending field") {
  CHECK(validate_config(parse_config(gibbs_text("out"))).empty());

  auto e = validate_config(parse_config(covariance_text("out")));
  CHECK(e.empty());
  auto bad_dt = parse_config("experiment = fluct-covariance\nseed = 1\noutput_dir = o\nnumerics.dt = -1e-3\nnumerics.samples = 10\n");
  CHECK(has_error(validate_config(bad_dt), "numerics.dt"));
  auto zero_dt = parse_config("experiment = fluct-covariance\nseed = 1\noutput_dir = o\nnumerics.dt = 0\nnumerics.samples = 10\n");
  CHECK(has_error(validate_config(zero_dt), "numerics.dt"));

  auto typo = validate_config(parse_config("experiment = gibs\nseed = 1\noutput_dir = o\n"));
  CHECK(has_error(typo, "did you mean 'gibbs'"));
  CHECK(nearest_experiment("suppresion") == "suppression");

  CHECK(has_error(validate_config(parse_config("experiment = gibbs\nseed = 1\noutput_dir = o\nspace.colour = 3\n")),
                  "space.colour: unknown key"));
  CHECK(has_error(validate_config(parse_config("experiment = gibbs\noutput_dir = o\n")), "seed: missing"));
  CHECK(has_error(validate_config(parse_config("experiment = gibbs\nseed = -3\noutput_dir = o\n")), "seed"));
  CHECK(has_error(validate_config(parse_config("seed = 1\noutput_dir = o\n")), "experiment: missing"));
  CHECK(has_error(validate_config(parse_config("experiment = wdw-solve\nseed = 1\noutput_dir = o\nspace.boundary = dirichlet\n")),
                  "space.boundary"));
  CHECK(has_error(validate_config(parse_config("experiment = wdw-solve\nseed = 1\noutput_dir = o\nspace.curvature = 1\n")),
                  "exact"));
  CHECK(has_error(validate_config(parse_config("experiment = wdw-ordering\nseed = 1\noutput_dir = o\nspace.a_min = 4\n")),
                  "space.a_max"));
  CHECK(has_error(validate_config(parse_config("experiment = entropy-limit\nseed = 1\noutput_dir = o\nsweeps.dt = 1e-3, x\n"
                                               "numerics.samples = 10\n")),
                  "sweeps.dt"));
  CHECK(has_error(validate_config(parse_config("experiment = gibbs\nseed = 1\noutput_dir = o\nnumerics.max_iter = 2.5\n")),
                  "not an integer"));
}

TEST_CASE("experiment listing") {
  auto v = experiments();
  std::set<std::string> names;
  for (const auto& e : v) names.insert(e.name);
  CHECK(names == std::set<std::string>{"emergent", "entropy-limit", "fluct-covariance", "gibbs", "madelung-equivalence",
                                       "suppression", "wdw-ordering", "wdw-solve"});
  for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i - 1].name < v[i].name);
  for (const auto& e : v) {
    CHECK_FALSE(e.description.empty());
    CHECK(std::find(e.required.begin(), e.required.end(), "seed") != e.required.end());
  }
  CHECK(list_experiments() == list_experiments());
  CHECK(list_experiments().find("madelung-equivalence") != std::string::npos);
}

TEST_CASE("gibbs run writes a manifest") {
  fs::path out = scratch("gibbs");
  auto r = run_experiment(parse_config(gibbs_text(out)));
  CHECK(r.pass);
  const auto& m = r.manifest;
  CHECK(m["experiment"] == "gibbs");
  CHECK(m["seed"] == 1);
  CHECK(m["config"]["space.hbar"] == "2");
  CHECK(m["config"]["numerics.sup_tol"] == "1e-8");
  CHECK(m["versions"].contains("eigen"));
  CHECK(m["wall_clock_seconds"].get<double>() >= 0.0);
  REQUIRE(m["checks"].size() >= 1);
  CHECK(m["checks"][0]["name"] == "gibbs_sup_norm");
  CHECK(m["checks"][0]["measured"].get<double>() <= 1e-8);
  for (const auto& a : m["artifacts"]) CHECK(fs::exists(out / a.get<std::string>()));
  auto disk = nlohmann::ordered_json::parse(slurp(out / "manifest.json"));
  CHECK(disk == m);

  // density recomputable from the artifact
  std::istringstream csv(slurp(out / "gibbs_density.csv"));
  std::string header, line;
  std::getline(csv, header);
  CHECK(header.find(',') != std::string::npos);
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("identical config and seed give identical artifacts") {
  fs::path a = scratch("cov_a"), b = scratch("cov_b"), c = scratch("cov_c");
  run_experiment(parse_config(covariance_text(a)));
  run_experiment(parse_config(covariance_text(b)));
  auto text_c = covariance_text(c);
  text_c.replace(text_c.find("seed = 11"), 9, "seed = 12");
  run_experiment(parse_config(text_c));
  CHECK(slurp(a / "samples.csv") == slurp(b / "samples.csv"));
  CHECK(slurp(a / "covariance.csv") == slurp(b / "covariance.csv"));
  CHECK(slurp(a / "samples.csv") != slurp(c / "samples.csv"));
}

TEST_CASE("exit codes") {
  fs::path ok = scratch("exit_ok");
  CHECK(run_cli("run " + write_config("ok", gibbs_text(ok)).string()) == 0);
  CHECK(fs::exists(ok / "manifest.json"));

  fs::path fail = scratch("exit_fail");
  CHECK(run_cli("run " + write_config("fail", covariance_text(fail, "numerics.z_tol = 1e-12\n")).string()) == 1);
  CHECK(fs::exists(fail / "manifest.json"));

  fs::path missing = scratch("exit_missing");
  CHECK(run_cli("run " + write_config("missing", "experiment = gibbs\noutput_dir = " + missing.string() + "\n").string()) == 2);
  CHECK_FALSE(fs::exists(missing));

  fs::path trunc = scratch("exit_numerical");
  const std::string closed = "experiment = emergent\nseed = 0\noutput_dir = " + trunc.string() +
                             "\nspace.curvature = 1\nspace.a_min = 0.2\nspace.a_max = 5\nspace.a_points = 91\n"
                             "space.a0 = 0.5\nspace.p_phi = 0.5\nspace.phi_points = 41\nnumerics.dt = 1e-2\nnumerics.steps = 2000\n";
  CHECK(run_cli("run " + write_config("numerical", closed).string()) == 3);

  CHECK(run_cli("validate " + write_config("valid", gibbs_text(ok)).string()) == 0);
  CHECK(run_cli("validate " + write_config("invalid", "experiment = gibs\nseed = 1\noutput_dir = o\n").string()) == 2);
  CHECK(run_cli("list") == 0);
  CHECK(run_cli("frobnicate") == 2);
  CHECK(run_cli("run /nonexistent/entroq.cfg") == 2);
}

TEST_CASE("shipped configs validate") {
  fs::path dir = fs::path(ENTROQ_ORACLE_DIR).parent_path().parent_path() / "configs";
  int n = 0;
  for (const auto& f : fs::directory_iterator(dir)) {
    if (f.path().extension() != ".cfg") continue;
    ++n;
    auto errors = validate_config(load_config(f.path().string()));
    CHECK_MESSAGE(errors.empty(), f.path().string());
  }
  CHECK(n == 8);
}

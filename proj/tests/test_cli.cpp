#define DOCTEST_CONFIG_IMPLEMENT
#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

std::string cli, defaults;
fs::path work;

struct Result {
  int code;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Result run(const std::string& args, const std::string& env = "") {
  const fs::path out = work / "stdout.txt", err = work / "stderr.txt";
  const std::string cmd = env + " \"" + cli + "\" -o \"" + (work / "runs").string() + "\" " + args +
                          " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path run_dir(const Result& r) {
  auto line = r.out;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
  return line.substr(line.rfind('\n') + 1);
}

}  // namespace

TEST_CASE("config dump round trip") {
  const auto a = run("config dump");
  REQUIRE(a.code == 0);
  std::ofstream(work / "a.ini") << a.out;
  const auto b = run("-c \"" + (work / "a.ini").string() + "\" config dump");
  CHECK(b.code == 0);
  CHECK(a.out == b.out);
  const auto c = run("-c \"" + defaults + "\" config dump");
  CHECK(c.out == a.out);
  const auto d = run("-s network.L_C_um=90.50 -s solver.n_k=11 config dump");
  std::ofstream(work / "d.ini") << d.out;
  CHECK(d.out.find("L_C_um=90.5\n") != std::string::npos);
  CHECK(run("-c \"" + (work / "d.ini").string() + "\" config dump").out == d.out);
}

TEST_CASE("configuration errors exit with 2") {
  const auto nu = run("-s material.poisson_ratio=0.5 layout");
  CHECK(nu.code == 2);
  CHECK(nu.err.find("Lame") != std::string::npos);
  CHECK(run("-s material.nonsense=1 layout").code == 2);
  CHECK(run("-s network.rows=two layout").code == 2);
  CHECK(run("-s network.L_B_um=80 layout").code == 2);
  CHECK(run("-s waveguide.C.hole_axis=diagonal layout").code == 2);
  CHECK(run("bands -w Q").code == 2);
}

TEST_CASE("run directory and manifest") {
  const auto r = run("layout", "PHONONET_THREADS=1");
  REQUIRE(r.code == 0);
  const fs::path dir = run_dir(r);
  REQUIRE(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "run.log"));
  CHECK(fs::exists(dir / "layout.svg"));
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  CHECK(m["schema_version"] == 1);
  CHECK(m["command"] == "layout");
  CHECK(m["exit_code"] == 0);
  CHECK(m["threads"] == 1);
  CHECK(m["config_sha256"].get<std::string>().size() == 64);
  bool has_config = false;
  for (const auto& f : m["files"])
    if (f["name"] == "config.ini") has_config = f["sha256"] == m["config_sha256"];
  CHECK(has_config);
  CHECK(nlohmann::json::parse(slurp(dir / "layout.json"))["edges"].size() == 8);

  const auto t = run("--threads 2 layout", "PHONONET_THREADS=1");
  CHECK(nlohmann::json::parse(slurp(run_dir(t) / "manifest.json"))["threads"] == 2);

  // Redraw the layout, then feed it to the wrong plot kind.
  const std::string layout = (dir / "layout.json").string();
  const auto ok = run("plot --kind layout --input \"" + layout + "\"");
  CHECK(ok.code == 0);
  CHECK(slurp(run_dir(ok) / "layout.svg") == slurp(dir / "layout.svg"));
  const auto bad = run("plot --kind band-diagram --input \"" + layout + "\"");
  CHECK(bad.code == 2);
  CHECK(run("plot --kind mode-field --input \"" + layout + "\"").code == 2);
  CHECK(run("plot --kind gap-sweep --input \"" + layout + "\"").code == 2);
}

TEST_CASE("tuning into a gap exits with 3") {
  const auto r = run("-s solver.target_h_um=0.95 tune -w C --target-ghz 1.1 --lo-um 84 --hi-um 100");
  CHECK(r.code == 3);
  CHECK(r.err.find("nearest approach") != std::string::npos);
}

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: test_cli <phononet executable> <defaults.ini> [doctest args]\n");
    return 2;
  }
  cli = argv[1];
  defaults = argv[2];
  work = fs::temp_directory_path() / ("phononet_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(work);
  doctest::Context ctx;
  ctx.applyCommandLine(argc - 2, argv + 2);
  const int rc = ctx.run();
  fs::remove_all(work);
  return rc;
}

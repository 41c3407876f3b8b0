#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

std::string g_cli;  // path to the refsplat binary, from argv[1]

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("refsplat_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run(const std::string& args) {
  std::string cmd = g_cli + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)), {});
}

}  // namespace

TEST_CASE("argument errors exit with code 2") {
  CHECK(run("") == 2);                         // subcommand required
  CHECK(run("trian") == 2);                    // unknown subcommand
  CHECK(run("train --no-such-flag") == 2);     // unknown flag
  fs::path d = temp_dir("mode");
  CHECK(run("synth --out " + (d / "o").string() + " --mode sideways") == 2);
  CHECK(run("synth --out " + (d / "o2").string() + " --resolution banana") == 2);
}

TEST_CASE("missing inputs exit with code 3") {
  fs::path d = temp_dir("missing");
  CHECK(run("train --data " + (d / "nowhere").string() + " --out " + (d / "o").string() +
            " --iters 1") == 3);
  CHECK(run("eval --data " + (d / "nowhere").string() + " --out " + (d / "o").string() +
            " --checkpoint " + (d / "nope.ply").string()) == 3);
}

TEST_CASE("an unreadable config file is a config error") {
  fs::path d = temp_dir("badcfg");
  CHECK(run("train --config " + (d / "absent.json").string() + " --data x --out " +
            (d / "o").string()) == 2);
}

TEST_CASE("synth is deterministic per seed and records its config") {
  fs::path a = temp_dir("synth_a"), b = temp_dir("synth_b"), c = temp_dir("synth_c");
  REQUIRE(run("synth --seed 3 --out " + a.string()) == 0);
  REQUIRE(run("synth --seed 3 --out " + b.string()) == 0);
  REQUIRE(run("synth --seed 4 --out " + c.string()) == 0);
  CHECK(slurp(a / "images" / "view_0.png") == slurp(b / "images" / "view_0.png"));
  CHECK(slurp(a / "sparse" / "0" / "points3D.txt") == slurp(b / "sparse" / "0" / "points3D.txt"));
  CHECK(slurp(a / "images" / "view_0.png") != slurp(c / "images" / "view_0.png"));
  CHECK(fs::exists(a / "run_config.json"));
  CHECK(slurp(a / "run_config.json").find("\"seed\": 3") != std::string::npos);
}

TEST_CASE("flags override the config file which overrides the defaults") {
  fs::path d = temp_dir("prec");
  fs::path cfgp = d / "cfg.json";
  {
    std::ofstream o(cfgp);
    o << R"({"seed": 11, "target_width": 96, "target_height": 96})";
  }
  fs::path out = d / "out";
  REQUIRE(run("synth --config " + cfgp.string() + " --seed 12 --out " + out.string()) == 0);
  std::string written = slurp(out / "run_config.json");
  CHECK(written.find("\"seed\": 12") != std::string::npos);        // flag beats file
  CHECK(written.find("\"target_width\": 96") != std::string::npos);  // file beats default
}

TEST_CASE("a short training run produces a loadable checkpoint and metrics") {
  fs::path d = temp_dir("train");
  fs::path data = d / "data", out = d / "out", ev = d / "eval";
  REQUIRE(run("synth --seed 1 --out " + data.string()) == 0);
  REQUIRE(run("train --data " + data.string() + " --out " + out.string() +
              " --iters 40 --resolution 48x48 --seed 1") == 0);
  CHECK(fs::exists(out / "final.ply"));
  CHECK(fs::exists(out / "loss_log.tsv"));
  REQUIRE(run("eval --data " + data.string() + " --out " + ev.string() + " --checkpoint " +
              (out / "final.ply").string() + " --resolution 48x48 --seed 1") == 0);
  CHECK(fs::exists(ev / "metrics.tsv"));
  CHECK(fs::exists(ev / "metrics.json"));
  CHECK(slurp(ev / "metrics.tsv").find("mean\t") != std::string::npos);
  fs::path dec = d / "decomp";
  REQUIRE(run("decompose --data " + data.string() + " --out " + dec.string() +
              " --checkpoint " + (out / "final.ply").string() + " --resolution 48x48") == 0);
  int pngs = 0;
  for (const auto& e : fs::directory_iterator(dec))
    if (e.path().extension() == ".png") ++pngs;
  CHECK(pngs >= 5);
}

int main(int argc, char** argv) {
  doctest::Context ctx;
  if (argc > 1 && argv[1][0] != '-') {
    g_cli = argv[1];
    // hand doctest everything after the binary path
    ctx.applyCommandLine(argc - 1, argv + 1);
  } else {
    ctx.applyCommandLine(argc, argv);
  }
  if (g_cli.empty()) {
    std::fprintf(stderr, "usage: test_cli <path-to-refsplat-binary> [doctest args]\n");
    return 1;
  }
  return ctx.run();
}

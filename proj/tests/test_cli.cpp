#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FLOWBENCH_BIN) + " " + args + " >cli_out.log 2>cli_err.log";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream(path) << content;
}

const char* kTinyConfig = R"({
  "targets": [{"name": "g", "kind": "gaussian", "mean": [0, 0], "cov": [[1, 0], [0, 1]]}],
  "samplers": [{"id": "euler-fm"}, {"id": "flops"}],
  "steps": [4],
  "chains": 32,
  "seeds": [1],
  "metrics": {"projections": 8},
  "workers": 1
})";

}  // namespace

TEST_CASE("cli: validate accepts a good config and rejects a bad one with exit 2") {
    fs::create_directories("cli_test");
    write_file("cli_test/good.json", kTinyConfig);
    CHECK(run_cli("validate --config cli_test/good.json") == 0);

    write_file("cli_test/bad.json", R"({"chains": "many"})");
    CHECK(run_cli("validate --config cli_test/bad.json") == 2);

    write_file("cli_test/typo.json", R"({"chians": 10})");
    CHECK(run_cli("validate --config cli_test/typo.json") == 2);

    CHECK(run_cli("validate --config cli_test/nonexistent.json") == 2);
}

TEST_CASE("cli: run executes a tiny sweep, plot renders from its manifest") {
    fs::create_directories("cli_test");
    write_file("cli_test/good.json", kTinyConfig);
    fs::remove_all("cli_test/out");

    CHECK(run_cli("run --config cli_test/good.json --out cli_test/out --workers 1") == 0);
    CHECK(fs::exists("cli_test/out/results.csv"));
    CHECK(fs::exists("cli_test/out/manifest.json"));

    CHECK(run_cli("plot --manifest cli_test/out/manifest.json") == 0);
    CHECK(fs::exists("cli_test/out/g__scatter.svg"));
    CHECK(fs::exists("cli_test/out/g__metric.svg"));
}

TEST_CASE("cli: order-study runs and environment overrides pick the output directory") {
    fs::create_directories("cli_test");
    write_file("cli_test/order.json", R"({
      "targets": [{"name": "g", "kind": "gaussian", "mean": [0, 0], "cov": [[1, 0], [0, 1]]}],
      "samplers": [{"id": "euler-fm"}],
      "oracle": {"fine_steps": 10000, "ladder": [10, 20, 40], "chains": 2},
      "workers": 1
    })");
    fs::remove_all("cli_test/env_out");

    setenv("FLOWBENCH_OUT", "cli_test/env_out", 1);
    const int rc = run_cli("order-study --config cli_test/order.json");
    unsetenv("FLOWBENCH_OUT");
    CHECK(rc == 0);
    CHECK(fs::exists("cli_test/env_out/order.csv"));
}

TEST_CASE("cli: unknown subcommand exits with a usage error") {
    CHECK(run_cli("frobnicate") == 2);
}

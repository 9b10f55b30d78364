#include <doctest.h>

#include <filesystem>
#include <stdexcept>
#include <fstream>
#include <sstream>
#include <vector>

#include "flowpath/bench.hpp"

using namespace flowpath::bench;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json minimal_config_json() {
    return json::parse(R"({
      "targets": [{"name": "g", "kind": "gaussian", "mean": [0, 0], "cov": [[1, 0], [0, 1]]}]
    })");
}

json tiny_sweep_json(const std::string& out) {
    json j = minimal_config_json();
    j["samplers"] = json::array({json{{"id", "euler-fm"}}, json{{"id", "aflops"}}});
    j["steps"] = {5};
    j["chains"] = 64;
    j["seeds"] = {1};
    j["metrics"] = {{"projections", 16}};
    j["output_dir"] = out;
    j["workers"] = 1;
    return j;
}

std::vector<std::string> csv_lines(const std::string& csv) {
    std::vector<std::string> lines;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    return lines;
}

std::string drop_last_column(const std::string& line) {
    return line.substr(0, line.rfind(','));
}

/// Minimal XML well-formedness scan: tag stack matching plus quote balance.
bool well_formed_xml(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        const std::size_t end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag.rfind("!--", 0) == 0) continue;  // declaration / comment
        if (tag.back() == '/') continue;                          // self-closing
        if (tag[0] == '/') {
            if (stack.empty()) return false;
            if (stack.back() != tag.substr(1)) return false;
            stack.pop_back();
            continue;
        }
        const std::size_t sp = tag.find_first_of(" \t\n");
        stack.push_back(sp == std::string::npos ? tag : tag.substr(0, sp));
    }
    return stack.empty();
}

}  // namespace

TEST_CASE("minimal config is fully defaulted") {
    const ExperimentConfig cfg = config_from_json(minimal_config_json());
    CHECK(cfg.targets.size() == 1);
    CHECK(cfg.samplers.size() == 6);
    CHECK(cfg.steps == std::vector<int>{5, 6, 7, 8, 9, 10});
    CHECK(cfg.chains == 10000);
    CHECK(cfg.seeds.size() == 5);
    CHECK(cfg.schedule.kind == "vp-linear");
    CHECK(cfg.metrics.projections == 128);
    CHECK(!cfg.hash().empty());
}

TEST_CASE("default config ships the five-target benchmark suite") {
    const ExperimentConfig cfg = default_config();
    REQUIRE(cfg.targets.size() == 5);
    CHECK(cfg.targets[0].name == "dirac");
    CHECK(cfg.targets[3].name == "mix3");
    CHECK(cfg.targets[4].dist.components().size() == 8);
}

TEST_CASE("config validation names the offending key") {
    json j = minimal_config_json();
    j["chians"] = 5;  // typo
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("chians"),
                         std::invalid_argument);

    json w = json::parse(R"({"targets":[{"name":"bad","kind":"mixture","components":[
        {"weight":0.5,"mean":[0,0],"cov":[[1,0],[0,1]]},
        {"weight":0.6,"mean":[1,1],"cov":[[1,0],[0,1]]}]}]})");
    CHECK_THROWS_WITH_AS(config_from_json(w), doctest::Contains("weights sum to"),
                         std::invalid_argument);

    json c = minimal_config_json();
    c["samplers"] = json::array({json{{"id", "aflops"}, {"lambda_clamp", {1.0, -1.0}}}});
    CHECK_THROWS_WITH_AS(config_from_json(c), doctest::Contains("empty"),
                         std::invalid_argument);

    json s = minimal_config_json();
    s["seeds"] = {3, 3};
    CHECK_THROWS_AS(config_from_json(s), std::invalid_argument);

    json n = minimal_config_json();
    n["targets"][0]["cov"] = {{1.0, 2.0}, {2.0, 1.0}};
    CHECK_THROWS_WITH_AS(config_from_json(n), doctest::Contains("positive-definite"),
                         std::invalid_argument);
}

TEST_CASE("config hash is stable across key reordering") {
    const auto a = config_from_json(json::parse(
        R"({"chains": 100, "targets": [{"name":"g","kind":"gaussian","mean":[0,0],"cov":[[1,0],[0,1]]}]})"));
    const auto b = config_from_json(json::parse(
        R"({"targets": [{"kind":"gaussian","cov":[[1,0],[0,1]],"mean":[0,0],"name":"g"}], "chains": 100})"));
    CHECK(a.hash() == b.hash());

    const auto c = config_from_json(json::parse(
        R"({"chains": 101, "targets": [{"name":"g","kind":"gaussian","mean":[0,0],"cov":[[1,0],[0,1]]}]})"));
    CHECK(a.hash() != c.hash());
}

TEST_CASE("tiny sweep: row counting, determinism, fair seeds, nfe bookkeeping") {
    const std::string out1 = "bench_test_out/sweep1";
    const std::string out2 = "bench_test_out/sweep2";
    fs::remove_all("bench_test_out");

    const ExperimentConfig cfg1 = config_from_json(tiny_sweep_json(out1));
    const RunManifest m1 = run_sweep(cfg1);
    CHECK(m1.failures == 0);
    REQUIRE(m1.cells.size() == 2);  // 1 target x 2 samplers x 1 N x 1 seed

    const auto lines1 = csv_lines(sweep_csv(m1));
    REQUIRE(lines1.size() == 3);  // header + 2 rows
    CHECK(lines1[0] ==
          "target,sampler,N,nfe,seed,sliced_w2,energy,mean_err,cov_err,oracle_rmse,wall_ms");

    // identical seeds across samplers share identical initial batches
    CHECK(m1.cells[0].x0_hash == m1.cells[1].x0_hash);
    CHECK(m1.cells[0].nfe == 5);
    CHECK(m1.cells[1].nfe == 5);

    // byte-identical numeric fields on a rerun (timing column excluded)
    const ExperimentConfig cfg2 = config_from_json(tiny_sweep_json(out2));
    const RunManifest m2 = run_sweep(cfg2);
    const auto lines2 = csv_lines(sweep_csv(m2));
    REQUIRE(lines1.size() == lines2.size());
    for (std::size_t i = 0; i < lines1.size(); ++i)
        CHECK(drop_last_column(lines1[i]) == drop_last_column(lines2[i]));

    CHECK(fs::exists(fs::path(out1) / "results.csv"));
    CHECK(fs::exists(fs::path(out1) / "manifest.json"));
}

TEST_CASE("sweep records heun nfe as 2N and cell failures keep the sweep alive") {
    json j = tiny_sweep_json("bench_test_out/heun");
    j["samplers"] = json::array({json{{"id", "heun-fm"}}});
    const RunManifest m = run_sweep(config_from_json(j));
    REQUIRE(m.cells.size() == 1);
    CHECK(m.cells[0].status == "ok");
    CHECK(m.cells[0].nfe == 10);
}

TEST_CASE("order study: slope recovery and unsupported-sampler failure is contained") {
    json j = minimal_config_json();
    j["samplers"] = json::array({json{{"id", "euler-fm"}}, json{{"id", "ddim"}}});
    j["oracle"] = {{"fine_steps", 10000}, {"ladder", {10, 20, 40}}, {"chains", 2}};
    j["output_dir"] = "bench_test_out/order";
    j["workers"] = 1;
    const RunManifest m = run_order_study(config_from_json(j));
    REQUIRE(m.orders.size() == 2);
    CHECK(m.orders[0].status == "ok");
    CHECK(m.orders[0].slope >= 0.6);
    CHECK(m.orders[0].slope <= 1.4);
    CHECK(m.orders[1].status != "ok");  // ddim is recorded as a failed cell
    CHECK(m.failures == 1);

    const auto lines = csv_lines(order_csv(m));
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "target,sampler,slope");
}

TEST_CASE("manifest json round-trips and plots are well-formed xml") {
    const std::string out = "bench_test_out/plots";
    const ExperimentConfig cfg = config_from_json(tiny_sweep_json(out));
    RunManifest m = run_sweep(cfg);

    const json j = m.to_json();
    const RunManifest back = RunManifest::from_json(j);
    CHECK(back.cells.size() == m.cells.size());
    CHECK(back.config_hash == m.config_hash);
    CHECK(back.points.size() == m.points.size());

    const auto files = emit_plots(m, out);
    REQUIRE(files.size() == 2);  // one target -> scatter + metric chart
    for (const auto& f : files) {
        std::ifstream in(f);
        REQUIRE(in.good());
        std::stringstream ss;
        ss << in.rdbuf();
        CHECK(well_formed_xml(ss.str()));
    }
}

TEST_CASE("plotting a manifest with missing point files warns instead of failing") {
    const std::string out = "bench_test_out/gaps";
    const ExperimentConfig cfg = config_from_json(tiny_sweep_json(out));
    RunManifest m = run_sweep(cfg);
    fs::remove_all(fs::path(out) / "points");
    const auto files = emit_plots(m, out);
    CHECK(files.size() == 2);
    CHECK(!m.warnings.empty());
}

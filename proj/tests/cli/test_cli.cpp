#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "ccvl/digest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string cli_path() {
    const char* p = std::getenv("CCVL_CLI");
    REQUIRE_MESSAGE(p != nullptr, "CCVL_CLI must point at the ccvl binary");
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("ccvl_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

std::string small_config() {
    return R"json({
      "env_train": {
        "type": "gridworld",
        "rows": ["....", "S..G"],
        "slip_prob": 0.3,
        "goal_reward": 1.0,
        "discount": 0.95
      },
      "env_eval": {"slip_prob": 0.15},
      "dataset": {"num_samples": 300, "epsilon_opt": 0.5, "seed": 0, "horizon": 50},
      "solver": {"method": "ccvl-reg", "alpha": 0.2, "tol": 1e-8},
      "policy": {"mode": "belief-sample", "seed": 0},
      "eval": {"episodes": 20, "horizon": 50, "seeds": [0]},
      "coverage": {"num_resamples": 100, "deltas": [0.1, 0.5]},
      "sweep": {"alphas": [0.1, 0.5], "seeds": [0], "methods": ["cql", "ccvl-reg"]}
    })json";
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return json::parse(buf.str());
}

int count_lines(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    return lines;
}

}  // namespace

TEST_CASE("collect: writes the dataset and manifest, idempotent across reruns") {
    auto dir = fresh_dir("collect");
    write_file(dir / "config.json", small_config());
    auto out1 = dir / "run1";
    auto out2 = dir / "run2";
    REQUIRE(run("collect --config " + (dir / "config.json").string() + " --out " +
                out1.string()) == 0);
    REQUIRE(run("collect --config " + (dir / "config.json").string() + " --out " +
                out2.string()) == 0);

    CHECK(count_lines(out1 / "dataset.jsonl") == 300);
    CHECK(ccvl::digest_file((out1 / "dataset.jsonl").string()) ==
          ccvl::digest_file((out2 / "dataset.jsonl").string()));

    auto manifest = read_json(out1 / "manifest.json");
    CHECK(manifest.contains("config_hash"));
    CHECK(manifest.at("output_digests").contains("dataset.jsonl"));
    CHECK(manifest.at("output_digests") == read_json(out2 / "manifest.json").at("output_digests"));
}

TEST_CASE("collect: invalid config exits 2 and names the field") {
    auto dir = fresh_dir("badcfg");
    json cfg = json::parse(small_config());
    cfg["dataset"]["num_samples"] = 0;
    write_file(dir / "config.json", cfg.dump());
    const std::string cmd = cli_path() + " collect --config " + (dir / "config.json").string() +
                            " --out " + (dir / "out").string() + " 2> " +
                            (dir / "stderr.txt").string();
    const int rc = WEXITSTATUS(std::system(cmd.c_str()));
    CHECK(rc == 2);
    std::ifstream err(dir / "stderr.txt");
    std::ostringstream buf;
    buf << err.rdbuf();
    CHECK(buf.str().find("num_samples") != std::string::npos);
}

TEST_CASE("train/eval pipeline: ccvl table, delta trace, and determinism") {
    auto dir = fresh_dir("pipeline");
    write_file(dir / "config.json", small_config());
    const std::string cfg = (dir / "config.json").string();

    REQUIRE(run("collect --config " + cfg + " --out " + (dir / "data").string()) == 0);
    REQUIRE(run("train --config " + cfg + " --dataset " + (dir / "data/dataset.jsonl").string() +
                " --out " + (dir / "model").string()) == 0);

    auto report = read_json(dir / "model/solve_report.json");
    CHECK(report.at("final_residual").get<double>() <= 1e-8);
    CHECK(report.contains("fixed_delta_index"));
    auto table = read_json(dir / "model/table.json");
    CHECK(table.at("num_states").get<int>() == 8);
    CHECK(table.at("deltas").size() == 8);

    REQUIRE(run("eval --config " + cfg + " --tables " + (dir / "model/table.json").string() +
                " --out " + (dir / "eval1").string()) == 0);
    REQUIRE(run("eval --config " + cfg + " --tables " + (dir / "model/table.json").string() +
                " --out " + (dir / "eval2").string()) == 0);

    auto summary = read_json(dir / "eval1/summary.json");
    CHECK(summary.at("normalized_return").is_number());
    bool found_trace = false;
    for (const auto& entry : fs::directory_iterator(dir / "eval1")) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("delta_trace_", 0) == 0) {
            found_trace = true;
            std::ifstream in(entry.path());
            std::string header;
            std::getline(in, header);
            CHECK(header == "episode,step,delta_index,delta,action,reward");
        }
    }
    CHECK(found_trace);

    // Byte-identical outputs across reruns (manifest timestamps aside).
    for (const auto& entry : fs::directory_iterator(dir / "eval1")) {
        const std::string name = entry.path().filename().string();
        if (name == "manifest.json") continue;
        CHECK(ccvl::digest_file((dir / "eval1" / name).string()) ==
              ccvl::digest_file((dir / "eval2" / name).string()));
    }
}

TEST_CASE("train: aevl archive holds ensemble_size member tables") {
    auto dir = fresh_dir("aevl");
    json cfg = json::parse(small_config());
    cfg["solver"]["method"] = "aevl";
    cfg["solver"]["ensemble_size"] = 5;
    write_file(dir / "config.json", cfg.dump());
    const std::string cfg_path = (dir / "config.json").string();

    REQUIRE(run("collect --config " + cfg_path + " --out " + (dir / "data").string()) == 0);
    REQUIRE(run("train --config " + cfg_path + " --dataset " +
                (dir / "data/dataset.jsonl").string() + " --out " + (dir / "model").string()) ==
            0);
    auto archive = read_json(dir / "model/tables.json");
    CHECK(archive.at("members").size() == 5);

    // The ensemble archive evaluates through the same eval command.
    REQUIRE(run("eval --config " + cfg_path + " --tables " +
                (dir / "model/tables.json").string() + " --out " + (dir / "eval").string()) == 0);
    CHECK(read_json(dir / "eval/summary.json").at("method").get<std::string>() == "aevl");
}

TEST_CASE("eval: fixed-delta mode consumes the trained selection index") {
    auto dir = fresh_dir("fixed");
    write_file(dir / "config.json", small_config());
    const std::string cfg_path = (dir / "config.json").string();
    REQUIRE(run("collect --config " + cfg_path + " --out " + (dir / "data").string()) == 0);
    REQUIRE(run("train --config " + cfg_path + " --dataset " +
                (dir / "data/dataset.jsonl").string() + " --out " + (dir / "model").string()) ==
            0);
    const int index = read_json(dir / "model/solve_report.json")
                          .at("fixed_delta_index")
                          .get<int>();

    json cfg = json::parse(small_config());
    cfg["policy"]["mode"] = "fixed-delta";
    cfg["policy"]["fixed_delta_index"] = index;
    write_file(dir / "fixed.json", cfg.dump());
    REQUIRE(run("eval --config " + (dir / "fixed.json").string() + " --tables " +
                (dir / "model/table.json").string() + " --out " + (dir / "eval").string()) == 0);
    auto summary = read_json(dir / "eval/summary.json");
    CHECK(summary.at("normalized_return").is_number());
}

TEST_CASE("eval: shape mismatch exits 4") {
    auto dir = fresh_dir("shape");
    write_file(dir / "config.json", small_config());
    const std::string cfg_path = (dir / "config.json").string();
    REQUIRE(run("collect --config " + cfg_path + " --out " + (dir / "data").string()) == 0);
    REQUIRE(run("train --config " + cfg_path + " --dataset " +
                (dir / "data/dataset.jsonl").string() + " --out " + (dir / "model").string()) ==
            0);

    json other = json::parse(small_config());
    other["env_train"]["rows"] = {"......", "S....G"};
    other["env_eval"] = json::object();
    write_file(dir / "other.json", other.dump());
    CHECK(run("eval --config " + (dir / "other.json").string() + " --tables " +
              (dir / "model/table.json").string() + " --out " + (dir / "eval").string()) == 4);
}

TEST_CASE("coverage: row per delta with bounded values") {
    auto dir = fresh_dir("coverage");
    json cfg = json::parse(small_config());
    cfg["env_train"] = {{"type", "random"}, {"num_states", 4}, {"num_actions", 2},
                        {"seed", 3},        {"discount", 0.9}};
    cfg.erase("env_eval");
    cfg["solver"]["method"] = "ccvl-bonus";
    cfg["solver"]["alpha"] = 1.0;
    cfg["dataset"]["num_samples"] = 150;
    write_file(dir / "config.json", cfg.dump());

    REQUIRE(run("coverage --config " + (dir / "config.json").string() + " --out " +
                (dir / "out").string() + " --jobs 2") == 0);
    std::ifstream in(dir / "out/coverage.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "delta,coverage,resamples,failures");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++rows;
        std::istringstream ss(line);
        std::string delta, coverage;
        std::getline(ss, delta, ',');
        std::getline(ss, coverage, ',');
        const double c = std::stod(coverage);
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }
    CHECK(rows == 2);
}

TEST_CASE("sweep: one row per method-alpha-seed and deterministic reruns") {
    auto dir = fresh_dir("sweep");
    json cfg = json::parse(small_config());
    cfg["eval"]["episodes"] = 10;
    write_file(dir / "config.json", cfg.dump());
    const std::string cfg_path = (dir / "config.json").string();

    REQUIRE(run("sweep --config " + cfg_path + " --out " + (dir / "s1").string()) == 0);
    REQUIRE(run("sweep --config " + cfg_path + " --out " + (dir / "s2").string() +
                " --jobs 3") == 0);
    CHECK(count_lines(dir / "s1/sweep.csv") == 1 + 2 * 2 * 1);
    CHECK(ccvl::digest_file((dir / "s1/sweep.csv").string()) ==
          ccvl::digest_file((dir / "s2/sweep.csv").string()));
}

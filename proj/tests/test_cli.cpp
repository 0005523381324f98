#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoj/cli.hpp"
#include "autoj/parsing.hpp"
#include "autoj/pipeline.hpp"
#include "autoj/protocol.hpp"
#include "autoj/registry.hpp"

using namespace autoj;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliOutcome {
    int code = 0;
    std::string out;
    std::string err;
};

CliOutcome run(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    CliOutcome r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

fs::path fresh_dir(const std::string& tag) {
    static std::atomic<int> counter{0};
    fs::path dir = fs::temp_directory_path() /
                   ("autoj_cli_" + tag + "_" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_rows(const fs::path& path, const std::vector<json>& rows) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    for (const json& row : rows) out << row.dump() << '\n';
}

std::vector<json> parse_rows(const fs::path& path) {
    std::vector<json> rows;
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) rows.push_back(json::parse(line));
    }
    return rows;
}

const Registry& registry() {
    static Registry r = Registry::load(AUTOJ_DATA_DIR "/registry.json");
    return r;
}

constexpr Verdict kCycle[3] = {Verdict::response_1, Verdict::response_2, Verdict::tie};

// Labeled pairwise items spread over the first `n_scenarios` registry
// scenarios, labels cycling through both winners and the tie.
std::vector<json> pairwise_rows(std::size_t n_scenarios, std::size_t per_scenario) {
    std::vector<json> rows;
    const auto& scenarios = registry().scenarios();
    REQUIRE(scenarios.size() >= n_scenarios);
    for (std::size_t s = 0; s < n_scenarios; ++s) {
        for (std::size_t i = 0; i < per_scenario; ++i) {
            PairwiseItem item;
            item.scenario_id = scenarios[s].id;
            item.query = "Question " + std::to_string(i) + " about " + item.scenario_id;
            item.response_a = "First answer " + std::to_string(s * 100 + i);
            item.response_b = "Second answer " + std::to_string(s * 100 + i);
            item.human_label = kCycle[(s * per_scenario + i) % 3];
            rows.push_back(to_json(item));
        }
    }
    return rows;
}

std::vector<json> single_rows(std::size_t n, const std::vector<int>& ratings) {
    std::vector<json> rows;
    const auto& scenarios = registry().scenarios();
    for (std::size_t i = 0; i < n; ++i) {
        SingleItem item;
        item.scenario_id = scenarios[i % scenarios.size()].id;
        item.query = "Single query " + std::to_string(i);
        item.response = "Single response " + std::to_string(i);
        if (!ratings.empty()) {
            item.metadata["oracle_rating"] = std::to_string(ratings[i % ratings.size()]);
        }
        rows.push_back(to_json(item));
    }
    return rows;
}

}  // namespace

TEST_CASE("bad invocations exit 2 with usage", "[cli]") {
    CliOutcome unknown = run({"frobnicate"});
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("frobnicate") != std::string::npos);
    CHECK(unknown.err.find("judge-pairwise") != std::string::npos);

    CliOutcome empty = run({});
    CHECK(empty.code == 2);
    CHECK(!empty.err.empty());

    CliOutcome missing_flag = run({"judge-pairwise"});
    CHECK(missing_flag.code == 2);

    CliOutcome help = run({"--help"});
    CHECK(help.code == 0);
    CHECK(help.out.find("best-of-n") != std::string::npos);
    CHECK(help.out.find("build-testbed") != std::string::npos);
}

TEST_CASE("judge-pairwise with the oracle reports perfect agreement", "[cli]") {
    fs::path dir = fresh_dir("jp_oracle");
    fs::path input = dir / "evalp.jsonl";
    write_rows(input, pairwise_rows(3, 4));

    CliOutcome r = run({"judge-pairwise", "--input", input.string(), "--judge", "mock:oracle",
                        "--report", "md", "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("100.0") != std::string::npos);

    std::string report = read_file(dir / "report.md");
    CHECK(report.find("## agreement") != std::string::npos);
    CHECK(report.find("## consistency") != std::string::npos);
    CHECK(report.find("Overall") != std::string::npos);
    CHECK(report.find("100.0") != std::string::npos);

    std::vector<json> runs = parse_rows(dir / "runs.jsonl");
    REQUIRE(runs.size() == 12);
    for (const json& row : runs) {
        CHECK(row.at("consistent").get<bool>());
        CHECK(row.at("agree").get<bool>());
        CHECK(row.at("final_verdict") == row.at("human_label"));
        CHECK(row.at("fwd").at("verdict").is_string());
        CHECK(row.at("bwd").at("verdict").is_string());
    }

    json manifest = json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest.at("command") == "judge-pairwise");
    CHECK(manifest.at("counts").at("items") == 12);
    CHECK(manifest.at("counts").at("consistent") == 12);
    CHECK(manifest.at("backends").at("judge").at("spec") == "mock:oracle");
    CHECK(manifest.at("digest_algorithm") == "sha-256");
    std::string dump = manifest.dump();
    CHECK(dump.find("time") == std::string::npos);
    CHECK(dump.find("date") == std::string::npos);
    CHECK(dump.find("max_in_flight") == std::string::npos);
}

TEST_CASE("judge-pairwise with the adversarial mock reports zero", "[cli]") {
    fs::path dir = fresh_dir("jp_adv");
    fs::path input = dir / "evalp.jsonl";
    write_rows(input, pairwise_rows(2, 3));

    CliOutcome r = run({"judge-pairwise", "--input", input.string(), "--judge",
                        "mock:adversarial", "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);

    std::vector<json> runs = parse_rows(dir / "runs.jsonl");
    REQUIRE(runs.size() == 6);
    for (const json& row : runs) {
        CHECK(!row.at("consistent").get<bool>());
        CHECK(!row.at("agree").get<bool>());
        CHECK(row.at("final_verdict").is_null());
    }
    json manifest = json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest.at("counts").at("consistent") == 0);
    CHECK(r.out.find("0.0") != std::string::npos);
}

TEST_CASE("judge-pairwise is byte-identical across fan-out and reruns", "[cli]") {
    fs::path base = fresh_dir("jp_det");
    fs::path input = base / "evalp.jsonl";
    write_rows(input, pairwise_rows(4, 6));

    auto run_into = [&](const std::string& tag, const std::string& fan_out) {
        fs::path dir = base / tag;
        fs::create_directories(dir);
        CliOutcome r = run({"judge-pairwise", "--input", input.string(), "--judge",
                            "mock:noisy:0.4:9", "--report", "csv", "--out", dir.string(),
                            "--max-in-flight", fan_out});
        INFO(r.err);
        REQUIRE(r.code == 0);
        return dir;
    };

    fs::path serial = run_into("serial", "1");
    fs::path wide = run_into("wide", "8");
    fs::path again = run_into("again", "8");

    for (const char* name : {"report.csv", "runs.jsonl", "manifest.json"}) {
        CHECK(read_file(serial / name) == read_file(wide / name));
        CHECK(read_file(wide / name) == read_file(again / name));
    }
}

TEST_CASE("judge-pairwise rejects broken inputs and configs", "[cli]") {
    fs::path dir = fresh_dir("jp_errors");
    fs::path good = dir / "good.jsonl";
    write_rows(good, pairwise_rows(1, 3));

    CliOutcome missing = run({"judge-pairwise", "--input", (dir / "absent.jsonl").string(),
                              "--judge", "mock:oracle", "--out", dir.string()});
    CHECK(missing.code == 5);
    CHECK(!missing.err.empty());

    std::vector<json> unlabeled = pairwise_rows(1, 2);
    unlabeled[1].erase("human_label");
    fs::path unlabeled_path = dir / "unlabeled.jsonl";
    write_rows(unlabeled_path, unlabeled);
    CHECK(run({"judge-pairwise", "--input", unlabeled_path.string(), "--judge", "mock:oracle",
               "--out", dir.string()})
              .code == 5);

    std::vector<json> unknown_scenario = pairwise_rows(1, 1);
    unknown_scenario[0]["scenario_id"] = "no_such_scenario";
    fs::path unknown_path = dir / "unknown.jsonl";
    write_rows(unknown_path, unknown_scenario);
    CHECK(run({"judge-pairwise", "--input", unknown_path.string(), "--judge", "mock:oracle",
               "--out", dir.string()})
              .code == 5);

    CHECK(run({"judge-pairwise", "--input", good.string(), "--judge", "mock:bogus", "--out",
               dir.string()})
              .code == 3);
    CHECK(run({"judge-pairwise", "--input", good.string(), "--judge", "mock:noisy:1.5:3",
               "--out", dir.string()})
              .code == 3);
    CHECK(run({"judge-pairwise", "--input", good.string(), "--judge",
               "mock:fixed:/no/such/file.txt", "--out", dir.string()})
              .code == 3);
    CHECK(run({"judge-pairwise", "--input", good.string(), "--judge", "mock:oracle", "--report",
               "xml", "--out", dir.string()})
              .code == 3);
}

TEST_CASE("judge-single rates with the oracle and reports the mean", "[cli]") {
    fs::path dir = fresh_dir("js_oracle");
    fs::path input = dir / "evalc.jsonl";
    std::vector<int> ratings = {2, 4, 6, 8, 10, 5};
    write_rows(input, single_rows(6, ratings));

    CliOutcome r = run({"judge-single", "--input", input.string(), "--judge", "mock:oracle",
                        "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(r.out.find("5.83") != std::string::npos);

    std::vector<json> singles = parse_rows(dir / "singles.jsonl");
    REQUIRE(singles.size() == 6);
    for (std::size_t i = 0; i < singles.size(); ++i) {
        CHECK(singles[i].at("rating").at("num").get<std::int64_t>() == ratings[i]);
        CHECK(singles[i].at("rating").at("den").get<std::int64_t>() == 1);
        CHECK(!singles[i].contains("error"));
        CHECK(!singles[i].at("critique").get<std::string>().empty());
    }

    json manifest = json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest.at("counts").at("items") == 6);
    CHECK(manifest.at("counts").at("rated") == 6);
}

TEST_CASE("judge-single maps a total failure onto the stage exit code", "[cli]") {
    fs::path dir = fresh_dir("js_fail");
    fs::path input = dir / "evalc.jsonl";
    write_rows(input, single_rows(3, {}));

    CliOutcome r = run({"judge-single", "--input", input.string(), "--judge", "mock:oracle",
                        "--out", dir.string()});
    CHECK(r.code == 5);
    std::vector<json> singles = parse_rows(dir / "singles.jsonl");
    REQUIRE(singles.size() == 3);
    for (const json& row : singles) {
        CHECK(row.at("rating").is_null());
        CHECK(row.contains("error"));
    }
}

TEST_CASE("best-of-n from one pass equals independent per-N runs", "[cli]") {
    fs::path base = fresh_dir("bon");
    fs::path input = base / "evalr.jsonl";
    const auto& scenarios = registry().scenarios();

    std::vector<json> rows;
    for (std::size_t q = 0; q < 5; ++q) {
        EvalRQuery query;
        query.query = "Draft request " + std::to_string(q);
        query.scenario_id = scenarios[q].id;
        json ratings = json::array();
        for (std::size_t i = 0; i < 32; ++i) {
            query.responses.push_back("Candidate " + std::to_string(q) + "/" + std::to_string(i));
            ratings.push_back(1 + static_cast<int>((3 * q + 7 * i) % 10));
        }
        json row = to_json(query);
        row["oracle_ratings"] = ratings;
        rows.push_back(row);
    }
    write_rows(input, rows);

    fs::path combined_dir = base / "combined";
    fs::create_directories(combined_dir);
    CliOutcome combined = run({"best-of-n", "--input", input.string(), "--judge", "mock:oracle",
                               "--n", "1,8,16,32", "--out", combined_dir.string()});
    INFO(combined.err);
    REQUIRE(combined.code == 0);
    std::vector<json> all = parse_rows(combined_dir / "selections.jsonl");
    REQUIRE(all.size() == 20);

    for (const std::string& n : {std::string("1"), std::string("8"), std::string("16"),
                                 std::string("32")}) {
        fs::path dir = base / ("solo_" + n);
        fs::create_directories(dir);
        CliOutcome solo = run({"best-of-n", "--input", input.string(), "--judge", "mock:oracle",
                               "--n", n, "--out", dir.string()});
        INFO(solo.err);
        REQUIRE(solo.code == 0);
        std::vector<json> rows_solo = parse_rows(dir / "selections.jsonl");
        std::vector<json> rows_combined;
        for (const json& row : all) {
            if (row.at("n").get<std::size_t>() == std::stoul(n)) rows_combined.push_back(row);
        }
        CHECK(rows_solo == rows_combined);
    }

    // The chosen rating never drops as the candidate prefix grows.
    for (std::size_t q = 0; q < 5; ++q) {
        double last = 0.0;
        for (const json& row : all) {
            if (row.at("query_index").get<std::size_t>() != q) continue;
            double value = static_cast<double>(row.at("rating").at("num").get<std::int64_t>()) /
                           static_cast<double>(row.at("rating").at("den").get<std::int64_t>());
            CHECK(value >= last);
            last = value;
        }
        CHECK(last == 10.0);
    }

    std::string report = read_file(combined_dir / "report.md");
    CHECK(report.find("## best-of-n") != std::string::npos);
    CHECK(report.find("| 32 |") != std::string::npos);

    CliOutcome too_big = run({"best-of-n", "--input", input.string(), "--judge", "mock:oracle",
                              "--n", "64", "--out", (base / "big").string()});
    CHECK(too_big.code == 3);
}

TEST_CASE("duel tallies outcomes by scenario group", "[cli]") {
    fs::path dir = fresh_dir("duel");
    fs::path input = dir / "duel_items.jsonl";
    const auto& scenarios = registry().scenarios();

    std::vector<json> rows;
    for (std::size_t i = 0; i < 9; ++i) {
        json row;
        row["query"] = "Query " + std::to_string(i);
        row["response"] = "Response " + std::to_string(i);
        row["critique_ours"] = "Ours " + std::to_string(i);
        row["critique_baseline"] = "Baseline " + std::to_string(i);
        row["scenario_id"] = scenarios[i % 2].id;
        row["metadata"] = {{"oracle_choice", "C"}};
        rows.push_back(row);
    }
    write_rows(input, rows);

    CliOutcome r = run({"duel", "--input", input.string(), "--judge", "mock:oracle", "--seed",
                        "5", "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);

    std::vector<json> duels = parse_rows(dir / "duels.jsonl");
    REQUIRE(duels.size() == 9);
    for (const json& row : duels) CHECK(row.at("outcome") == "Tie");

    json manifest = json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest.at("counts").at("duels") == 9);
    CHECK(manifest.at("counts").at("tie") == 9);
    CHECK(manifest.at("params").at("seed") == 5);
    CHECK(r.out.find("## critique-duels") != std::string::npos);

    fs::path again = fresh_dir("duel_again");
    CliOutcome r2 = run({"duel", "--input", input.string(), "--judge", "mock:oracle", "--seed",
                         "5", "--out", again.string()});
    REQUIRE(r2.code == 0);
    CHECK(read_file(dir / "duels.jsonl") == read_file(again / "duels.jsonl"));
    CHECK(read_file(dir / "manifest.json") == read_file(again / "manifest.json"));
}

TEST_CASE("build-data runs collection, filtering, and augmentation", "[cli]") {
    fs::path dir = fresh_dir("bd");
    fs::path pool_path = dir / "pool.jsonl";
    fs::path singles_path = dir / "singles.jsonl";
    const auto& scenarios = registry().scenarios();

    std::vector<json> pool;
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < 14; ++i) {
            PreferenceRecord r;
            r.source = "unit";
            r.scenario_id = scenarios[s].id;
            r.query = "Pool query " + std::to_string(s) + "/" + std::to_string(i);
            r.response_1 = "Left " + std::to_string(s * 100 + i);
            r.response_2 = "Right " + std::to_string(s * 100 + i);
            r.human_label = kCycle[i % 3];
            r.language_tag = "en";
            pool.push_back(to_json(r));
        }
    }
    {
        PreferenceRecord fr;
        fr.source = "unit";
        fr.scenario_id = scenarios[0].id;
        fr.query = "Question en francais";
        fr.response_1 = "Gauche";
        fr.response_2 = "Droite";
        fr.human_label = Verdict::response_1;
        fr.language_tag = "fr";
        pool.push_back(to_json(fr));

        json untagged = to_json(fr);
        untagged.erase("language_tag");
        pool.push_back(untagged);
    }
    write_rows(pool_path, pool);
    write_rows(singles_path, single_rows(4, {3, 6, 9, 2}));

    CliOutcome r = run({"build-data", "--pool", pool_path.string(), "--singles",
                        singles_path.string(), "--teacher", "mock:oracle", "--cap", "4",
                        "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);

    json manifest = json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest.at("counts").at("pool") == 44);
    CHECK(manifest.at("counts").at("dropped_language") == 1);
    CHECK(manifest.at("counts").at("dropped_untagged") == 1);
    CHECK(manifest.at("counts").at("kept") == 12);
    CHECK(manifest.at("counts").at("singles") == 4);
    CHECK(manifest.at("counts").at("train_pairwise") == 24);
    CHECK(manifest.at("counts").at("train_single") == 8);
    CHECK(manifest.at("counts").at("train_total") == 32);

    std::vector<json> kept_rows = parse_rows(dir / "collected_pairwise.jsonl");
    std::size_t kept = 0;
    for (const json& row : kept_rows) kept += row.at("status") == "kept" ? 1 : 0;
    CHECK(kept == 12);

    std::vector<json> train_pairwise = parse_rows(dir / "train_pairwise.jsonl");
    REQUIRE(train_pairwise.size() == 24);
    for (const json& row : train_pairwise) CHECK(row.at("protocol") == "pairwise");
    CHECK(parse_rows(dir / "train_single.jsonl").size() == 8);
    CHECK(parse_rows(dir / "train_all.jsonl").size() == 32);

    // A second run with the same flags lands on identical bytes.
    fs::path again = fresh_dir("bd_again");
    CliOutcome r2 = run({"build-data", "--pool", pool_path.string(), "--singles",
                         singles_path.string(), "--teacher", "mock:oracle", "--cap", "4",
                         "--out", again.string()});
    REQUIRE(r2.code == 0);
    for (const char* name : {"collected_pairwise.jsonl", "collected_singles.jsonl",
                             "train_pairwise.jsonl", "train_single.jsonl", "train_all.jsonl",
                             "manifest.json"}) {
        CHECK(read_file(dir / name) == read_file(again / name));
    }
}

TEST_CASE("build-testbed produces the advertised cardinalities", "[cli]") {
    fs::path dir = fresh_dir("bt");
    fs::path pool_path = dir / "pool.jsonl";
    const auto& scenarios = registry().scenarios();

    std::vector<json> pool;
    for (const Scenario& s : scenarios) {
        for (std::size_t i = 0; i < 6; ++i) {
            PreferenceRecord r;
            r.source = "unit";
            r.scenario_id = s.id;
            r.query = "Testbed query " + s.id + "/" + std::to_string(i);
            r.response_1 = "Preferred " + s.id + std::to_string(i);
            r.response_2 = "Other " + s.id + std::to_string(i);
            r.human_label = kCycle[i % 3];
            r.language_tag = "en";
            pool.push_back(to_json(r));
        }
    }
    write_rows(pool_path, pool);

    // Exclude two records of the first scenario; exactly the other four remain.
    std::vector<PreferenceRecord> first_two;
    for (std::size_t i = 0; i < 2; ++i) first_two.push_back(record_from_json(pool[i]));
    fs::path keys_path = dir / "keys.txt";
    {
        std::ofstream keys(keys_path);
        for (const PreferenceRecord& r : first_two) keys << preference_digest(r) << '\n';
    }

    std::vector<std::string> args = {"build-testbed", "--pool", pool_path.string(),
                                     "--training-keys", keys_path.string(), "--seed", "11",
                                     "--base-model", "mock:oracle", "--k-pairwise", "4",
                                     "--k-rating", "2", "--k-queries", "1", "--n-samples", "3",
                                     "--out", dir.string()};
    CliOutcome r = run(args);
    INFO(r.err);
    REQUIRE(r.code == 0);

    std::vector<json> eval_p = parse_rows(dir / "eval_p.jsonl");
    std::vector<json> eval_c = parse_rows(dir / "eval_c.jsonl");
    std::vector<json> eval_r = parse_rows(dir / "eval_r.jsonl");
    CHECK(eval_p.size() == 232);
    CHECK(eval_c.size() == 116);
    CHECK(eval_r.size() == 58);
    std::size_t responses = 0;
    for (const json& row : eval_r) responses += row.at("responses").size();
    CHECK(responses == 174);

    for (const json& row : eval_p) {
        CHECK(row.at("query") != first_two[0].query);
        CHECK(row.at("query") != first_two[1].query);
    }

    json manifest = json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest.at("counts").at("eval_p") == 232);
    CHECK(manifest.at("counts").at("eval_c") == 116);
    CHECK(manifest.at("counts").at("eval_r_queries") == 58);
    CHECK(manifest.at("counts").at("eval_r_responses") == 174);
    CHECK(manifest.at("params").at("seed") == 11);
    CHECK(manifest.at("params").at("k_pairwise") == 4);

    fs::path again = fresh_dir("bt_again");
    args[args.size() - 1] = again.string();
    CliOutcome r2 = run(args);
    REQUIRE(r2.code == 0);
    for (const char* name : {"eval_p.jsonl", "eval_c.jsonl", "eval_r.jsonl", "manifest.json"}) {
        CHECK(read_file(dir / name) == read_file(again / name));
    }

    CliOutcome starved = run({"build-testbed", "--pool", pool_path.string(), "--k-pairwise",
                              "10", "--out", (dir / "starved").string()});
    CHECK(starved.code == 5);
}

TEST_CASE("report re-renders stored stage outputs", "[cli]") {
    fs::path dir = fresh_dir("report");
    fs::path input = dir / "evalp.jsonl";
    write_rows(input, pairwise_rows(2, 3));
    CliOutcome judged = run({"judge-pairwise", "--input", input.string(), "--judge",
                             "mock:oracle", "--out", dir.string()});
    REQUIRE(judged.code == 0);

    fs::path rerender = dir / "rerender";
    fs::create_directories(rerender);
    CliOutcome from_runs = run({"report", "--runs", (dir / "runs.jsonl").string(), "--report",
                                "csv", "--out", rerender.string()});
    INFO(from_runs.err);
    REQUIRE(from_runs.code == 0);
    std::string csv = read_file(rerender / "report.csv");
    CHECK(csv.find("agreement") != std::string::npos);
    CHECK(csv.find("100.0") != std::string::npos);

    fs::path systems_dir = dir / "systems";
    fs::create_directories(systems_dir);
    CliOutcome systems = run({"report", "--systems",
                              AUTOJ_DATA_DIR "/fixtures/system_ratings.json", "--out",
                              systems_dir.string()});
    INFO(systems.err);
    REQUIRE(systems.code == 0);
    std::string ranking = read_file(systems_dir / "report.md");
    CHECK(ranking.find("XwinLM 70b V0.1") != std::string::npos);
    CHECK(ranking.find("Spearman") != std::string::npos);
    CHECK(ranking.find("0.98") != std::string::npos);

    fs::path duels_dir = dir / "duels";
    fs::create_directories(duels_dir);
    CliOutcome duels = run({"report", "--duels",
                            AUTOJ_DATA_DIR "/fixtures/critique_duel_human_outcomes.jsonl",
                            "--out", duels_dir.string()});
    INFO(duels.err);
    REQUIRE(duels.code == 0);
    std::string duel_table = read_file(duels_dir / "report.md");
    CHECK(duel_table.find("| Overall | 107 | 41 | 84 |") != std::string::npos);

    CHECK(run({"report", "--out", dir.string()}).code == 2);
}

TEST_CASE("classify assigns scenarios and counts fallbacks", "[cli]") {
    fs::path dir = fresh_dir("classify");
    fs::path input = dir / "queries.jsonl";
    const auto& scenarios = registry().scenarios();

    std::vector<json> rows;
    for (std::size_t i = 0; i < 4; ++i) {
        json row;
        row["query"] = "Classify me " + std::to_string(i);
        row["metadata"] = {{"oracle_scenario", scenarios[i].id}};
        rows.push_back(row);
    }
    rows.push_back(json{{"query", "Mystery text"},
                        {"metadata", {{"oracle_scenario", "definitely_not_a_scenario"}}}});
    write_rows(input, rows);

    CliOutcome r = run({"classify", "--input", input.string(), "--judge", "mock:oracle",
                        "--out", dir.string()});
    INFO(r.err);
    REQUIRE(r.code == 0);

    std::vector<json> classified = parse_rows(dir / "classified.jsonl");
    REQUIRE(classified.size() == 5);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(classified[i].at("scenario_id") == scenarios[i].id);
        CHECK(classified[i].at("matched").get<bool>());
    }
    CHECK(classified[4].at("scenario_id") == "others");
    CHECK(!classified[4].at("matched").get<bool>());

    json manifest = json::parse(read_file(dir / "manifest.json"));
    CHECK(manifest.at("counts").at("queries") == 5);
    CHECK(manifest.at("counts").at("matched") == 4);
}

TEST_CASE("http backends map auth and network failures onto exit codes", "[cli]") {
    fs::path dir = fresh_dir("http");
    fs::path input = dir / "evalc.jsonl";
    write_rows(input, single_rows(2, {5, 5}));

    unsetenv("AUTOJ_API_KEY");
    CliOutcome no_key = run({"judge-single", "--input", input.string(), "--judge",
                             "http:test-model@http://127.0.0.1:1/v1/chat", "--max-attempts",
                             "1", "--no-cache", "--out", dir.string()});
    CHECK(no_key.code == 3);

    setenv("AUTOJ_API_KEY", "dummy-key", 1);
    CliOutcome refused = run({"judge-single", "--input", input.string(), "--judge",
                              "http:test-model@http://127.0.0.1:1/v1/chat", "--max-attempts",
                              "1", "--no-cache", "--out", dir.string()});
    CHECK(refused.code == 4);
    unsetenv("AUTOJ_API_KEY");
}

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "autoj/classifier.hpp"
#include "autoj/errors.hpp"
#include "autoj/gateway.hpp"
#include "autoj/http_transport.hpp"
#include "autoj/metrics.hpp"
#include "autoj/parsing.hpp"
#include "autoj/pipeline.hpp"
#include "autoj/protocol.hpp"
#include "autoj/registry.hpp"
#include "autoj/reports.hpp"
#include "autoj/templates.hpp"

namespace autoj {

namespace detail {

// Exit vocabulary shared by every subcommand: 0 success, 2 usage, 3 config,
// 4 backend exhaustion, 5 data error.
inline int exit_code_for(errc code) {
    switch (code) {
        case errc::usage_error:
            return 2;
        case errc::config_error:
        case errc::auth_error:
        case errc::invalid_budget:
        case errc::unknown_template:
        case errc::missing_placeholder:
        case errc::unknown_placeholder:
            return 3;
        case errc::network_error:
        case errc::rate_limited_exhausted:
        case errc::malformed_backend_response:
            return 4;
        default:
            return 5;
    }
}

inline std::string_view backend_kind_name(BackendKind kind) {
    return kind == BackendKind::mock ? "mock" : "http-chat";
}

inline std::vector<std::string> split_on(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = text.find(sep, start);
        parts.push_back(text.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

inline double parse_double(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        double value = std::stod(text, &used);
        if (used != text.size()) raise(errc::config_error, what + " is not a number: " + text);
        return value;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        raise(errc::config_error, what + " is not a number: " + text);
    }
}

inline std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        std::uint64_t value = std::stoull(text, &used);
        if (used != text.size()) raise(errc::config_error, what + " is not an integer: " + text);
        return value;
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        raise(errc::config_error, what + " is not an integer: " + text);
    }
}

inline std::string read_text_file(const std::filesystem::path& path, errc on_failure) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(on_failure, "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Runs fn(0..n-1) on up to max_in_flight workers. Slot-indexed writes keep
// the output order independent of scheduling; the first exception wins.
template <typename Fn>
inline void parallel_for(std::size_t n, std::size_t max_in_flight, Fn&& fn) {
    if (n == 0) return;
    std::size_t workers = std::min(std::max<std::size_t>(max_in_flight, 1), n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex mutex;
    std::exception_ptr first_error;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline DuelOutcome duel_outcome_from_name(const std::string& name) {
    for (DuelOutcome o : {DuelOutcome::win, DuelOutcome::tie, DuelOutcome::lose}) {
        if (name == duel_outcome_name(o)) return o;
    }
    raise(errc::data_error, "unknown duel outcome '" + name + "'");
}

inline std::map<std::string, std::string> metadata_from_json(const nlohmann::json& row) {
    std::map<std::string, std::string> out;
    if (!row.contains("metadata")) return out;
    const nlohmann::json& meta = row.at("metadata");
    if (!meta.is_object()) raise(errc::data_error, "metadata must be an object of strings");
    for (const auto& [key, value] : meta.items()) {
        if (!value.is_string()) raise(errc::data_error, "metadata values must be strings");
        out[key] = value.get<std::string>();
    }
    return out;
}

}  // namespace detail

/// Turns a backend spec string into a gateway spec. Mocks select a behavior
/// (`mock:oracle`, `mock:fixed-ratings`, `mock:adversarial`,
/// `mock:noisy:<p>:<seed>`, `mock:fixed:<path>`); `http:<model>@<url>` names
/// a live endpoint whose key is read from the auth_env environment variable.
inline BackendSpec parse_backend_spec(const std::string& spec, const std::string& auth_env,
                                      int max_attempts) {
    BackendSpec out;
    out.max_attempts = max_attempts;
    if (spec.rfind("mock:", 0) == 0) {
        out.kind = BackendKind::mock;
        out.model_id = spec;
        std::string rest = spec.substr(5);
        if (rest == "oracle" || rest == "fixed-ratings") {
            out.behavior = MockBehavior::oracle();
        } else if (rest == "adversarial") {
            out.behavior = MockBehavior::adversarial_first_position();
        } else if (rest.rfind("noisy:", 0) == 0) {
            std::vector<std::string> parts = detail::split_on(rest.substr(6), ':');
            if (parts.size() != 2) {
                raise(errc::config_error, "noisy mock takes mock:noisy:<p>:<seed>");
            }
            double p = detail::parse_double(parts[0], "noise probability");
            if (p < 0.0 || p > 1.0) {
                raise(errc::config_error, "noise probability must sit in [0, 1]");
            }
            out.behavior = MockBehavior::noisy(p, detail::parse_u64(parts[1], "noise seed"));
        } else if (rest.rfind("fixed:", 0) == 0) {
            out.behavior = MockBehavior::fixed(
                detail::read_text_file(rest.substr(6), errc::config_error));
        } else {
            raise(errc::config_error, "unknown mock backend '" + spec + "'");
        }
        return out;
    }
    if (spec.rfind("http:", 0) == 0) {
        std::string rest = spec.substr(5);
        std::size_t at = rest.find('@');
        if (at == std::string::npos || at == 0 || at + 1 >= rest.size()) {
            raise(errc::config_error, "http backend takes http:<model>@<url>");
        }
        out.kind = BackendKind::http_chat;
        out.model_id = rest.substr(0, at);
        out.endpoint = rest.substr(at + 1);
        out.auth_ref = auth_env;
        return out;
    }
    raise(errc::config_error,
          "unknown backend spec '" + spec + "'; expected mock:... or http:<model>@<url>");
}

namespace detail {

// Options shared by every subcommand; each command binds the subset it uses.
struct CliConfig {
    std::string registry_path = AUTOJ_DATA_DIR "/registry.json";
    std::string template_dir = AUTOJ_DATA_DIR "/templates";
    std::string out_dir = ".";
    std::string cache_dir;
    bool no_cache = false;
    std::string report_format = "md";
    std::string auth_env = "AUTOJ_API_KEY";
    int max_attempts = 4;
    std::size_t max_in_flight = 8;

    std::string input;
    std::string judge_spec;
    std::string teacher_spec;
    std::string base_model_spec = "mock:oracle";
    std::string n_list = "1,8,16,32";
    std::uint64_t seed = 7;
    std::int64_t cap = 100;
    std::string language = "en";
    std::string pool_path;
    std::string singles_path;
    std::string training_keys_path;
    std::size_t k_pairwise = 24;
    std::size_t k_rating = 4;
    std::size_t k_queries = 2;
    std::size_t n_samples = 32;
    double temperature = 1.0;

    std::string runs_path;
    std::string systems_path;
    std::string duels_path;
    std::string selections_path;
};

struct CliContext {
    std::filesystem::path out_dir;
    Registry registry;
    TemplateStore store;
    Gateway gateway;
    ReportFormat format = ReportFormat::markdown;
};

inline CliContext make_context(const CliConfig& cfg) {
    if (cfg.max_in_flight == 0) raise(errc::config_error, "max-in-flight must be >= 1");
    std::filesystem::path out_dir(cfg.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) raise(errc::config_error, "cannot create output directory " + out_dir.string());

    GatewayOptions options;
    if (cfg.no_cache) {
        options.cache_enabled = false;
    } else {
        options.cache_dir =
            cfg.cache_dir.empty() ? out_dir / "cache" : std::filesystem::path(cfg.cache_dir);
    }
    options.transport = default_http_transport();

    return CliContext{out_dir, Registry::load(cfg.registry_path),
                      TemplateStore::load(cfg.template_dir), Gateway(std::move(options)),
                      report_format_from_name(cfg.report_format)};
}

inline nlohmann::json backend_manifest(const BackendSpec& spec, const std::string& raw) {
    return nlohmann::json{{"kind", std::string(backend_kind_name(spec.kind))},
                          {"model_id", spec.model_id},
                          {"spec", raw}};
}

// The manifest records everything a replay needs (inputs, backends, seeds,
// caps, counts) and nothing environment-bound: no clocks, no fan-out, no
// output paths, so reruns land on identical bytes.
inline void write_manifest(const CliContext& ctx, nlohmann::json manifest) {
    manifest["digest_algorithm"] = "sha-256";
    std::ofstream out(ctx.out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) raise(errc::data_error, "cannot write manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) raise(errc::data_error, "failed writing manifest.json");
}

inline std::string report_extension(ReportFormat format) {
    switch (format) {
        case ReportFormat::markdown:
            return "md";
        case ReportFormat::csv:
            return "csv";
        case ReportFormat::json_lines:
            return "jsonl";
    }
    return "md";
}

inline void write_report(const CliContext& ctx, const std::vector<ReportRow>& rows,
                         std::ostream& echo) {
    std::string rendered = emit_report(rows, ctx.format);
    std::filesystem::path path = ctx.out_dir / ("report." + report_extension(ctx.format));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(errc::data_error, "cannot write " + path.string());
    out << rendered;
    if (!out) raise(errc::data_error, "failed writing " + path.string());
    echo << rendered;
}

inline nlohmann::json rating_json(const Rating& rating) {
    return nlohmann::json{{"num", rating.numerator()}, {"den", rating.denominator()}};
}

inline int cmd_judge_pairwise(const CliConfig& cfg, std::ostream& out) {
    CliContext ctx = make_context(cfg);
    BackendSpec judge = parse_backend_spec(cfg.judge_spec, cfg.auth_env, cfg.max_attempts);
    validate_backend(judge);

    std::vector<PairwiseItem> items;
    for (const nlohmann::json& row : read_jsonl(cfg.input)) {
        items.push_back(pairwise_item_from_json(row));
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!items[i].human_label) {
            raise(errc::data_error, "item " + std::to_string(i) + " lacks a human label");
        }
        ctx.registry.group_of(items[i].scenario_id);
    }

    std::vector<SwappedRun> runs(items.size());
    parallel_for(items.size(), cfg.max_in_flight, [&](std::size_t i) {
        runs[i] = judge_pairwise_swapped(ctx.gateway, judge, ctx.store, items[i]);
    });

    std::vector<LabeledRun> labeled;
    labeled.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        labeled.push_back({runs[i], *items[i].human_label, items[i].scenario_id});
    }
    AgreementSummary summary = agreement_rate(labeled, ctx.registry);

    auto direction_json = [](const DirectionResult& d) {
        nlohmann::json j;
        j["verdict"] = d.verdict ? nlohmann::json(std::string(verdict_label(*d.verdict)))
                                 : nlohmann::json(nullptr);
        if (!d.failure.empty()) j["failure"] = d.failure;
        return j;
    };
    std::vector<nlohmann::json> rows;
    std::int64_t consistent = 0;
    std::int64_t agree = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const SwappedRun& run = runs[i];
        bool item_agree = run.consistent && run.final_verdict &&
                          *run.final_verdict == *items[i].human_label;
        consistent += run.consistent ? 1 : 0;
        agree += item_agree ? 1 : 0;
        nlohmann::json row;
        row["scenario_id"] = items[i].scenario_id;
        row["human_label"] = std::string(verdict_label(*items[i].human_label));
        row["consistent"] = run.consistent;
        row["agree"] = item_agree;
        row["final_verdict"] = run.final_verdict
                                   ? nlohmann::json(std::string(verdict_label(*run.final_verdict)))
                                   : nlohmann::json(nullptr);
        row["fwd"] = direction_json(run.fwd);
        row["bwd"] = direction_json(run.bwd);
        rows.push_back(std::move(row));
    }
    write_jsonl(ctx.out_dir / "runs.jsonl", rows);

    std::vector<ReportRow> report = agreement_section(summary);
    for (ReportRow& row : consistency_section(summary)) report.push_back(std::move(row));
    write_report(ctx, report, out);

    write_manifest(ctx, nlohmann::json{
                            {"command", "judge-pairwise"},
                            {"format", std::string(report_format_name(ctx.format))},
                            {"inputs", {{"input", cfg.input}}},
                            {"backends", {{"judge", backend_manifest(judge, cfg.judge_spec)}}},
                            {"counts",
                             {{"items", items.size()}, {"consistent", consistent},
                              {"agree", agree}}},
                        });
    return 0;
}

inline int cmd_judge_single(const CliConfig& cfg, std::ostream& out) {
    CliContext ctx = make_context(cfg);
    BackendSpec judge = parse_backend_spec(cfg.judge_spec, cfg.auth_env, cfg.max_attempts);
    validate_backend(judge);

    std::vector<SingleItem> items;
    for (const nlohmann::json& row : read_jsonl(cfg.input)) {
        items.push_back(single_item_from_json(row));
    }
    if (items.empty()) raise(errc::data_error, "no items in " + cfg.input);

    std::vector<Fallible<SingleResult>> results =
        judge_single_batch(ctx.gateway, judge, ctx.store, items, cfg.max_in_flight);

    std::vector<nlohmann::json> rows;
    double rating_sum = 0.0;
    std::size_t rated = 0;
    std::optional<errc> first_failure;
    for (std::size_t i = 0; i < results.size(); ++i) {
        nlohmann::json row;
        row["index"] = i;
        row["scenario_id"] = items[i].scenario_id;
        if (results[i].ok()) {
            const SingleResult& r = results[i].value();
            row["rating"] = rating_json(r.rating);
            row["critique"] = r.critique;
            rating_sum += r.rating.value();
            ++rated;
        } else {
            row["rating"] = nullptr;
            row["critique"] = "";
            row["error"] = results[i].message();
            row["error_code"] = std::string(errc_name(results[i].code()));
            if (!first_failure) first_failure = results[i].code();
        }
        rows.push_back(std::move(row));
    }
    write_jsonl(ctx.out_dir / "singles.jsonl", rows);

    ReportRow summary;
    summary.section = "single-ratings";
    summary.keys = {{"Items", std::to_string(items.size())},
                    {"Rated", std::to_string(rated)},
                    {"Mean rating",
                     rated == 0 ? "-" : format_fixed(rating_sum / static_cast<double>(rated), 2)}};
    write_report(ctx, {summary}, out);

    write_manifest(ctx, nlohmann::json{
                            {"command", "judge-single"},
                            {"format", std::string(report_format_name(ctx.format))},
                            {"inputs", {{"input", cfg.input}}},
                            {"backends", {{"judge", backend_manifest(judge, cfg.judge_spec)}}},
                            {"counts", {{"items", items.size()}, {"rated", rated}}},
                        });
    if (rated == 0 && first_failure) return exit_code_for(*first_failure);
    return 0;
}

inline int cmd_best_of_n(const CliConfig& cfg, std::ostream& out) {
    CliContext ctx = make_context(cfg);
    BackendSpec judge = parse_backend_spec(cfg.judge_spec, cfg.auth_env, cfg.max_attempts);
    validate_backend(judge);

    std::vector<std::size_t> n_values;
    for (const std::string& part : split_on(cfg.n_list, ',')) {
        std::size_t n = static_cast<std::size_t>(parse_u64(part, "candidate count"));
        if (n == 0) raise(errc::config_error, "candidate counts must be >= 1");
        if (std::find(n_values.begin(), n_values.end(), n) == n_values.end()) {
            n_values.push_back(n);
        }
    }
    if (n_values.empty()) raise(errc::config_error, "no candidate counts given");

    std::vector<EvalRQuery> queries;
    std::vector<std::vector<std::string>> oracle_ratings;
    for (const nlohmann::json& row : read_jsonl(cfg.input)) {
        queries.push_back(eval_r_from_json(row));
        std::vector<std::string> ratings;
        if (row.contains("oracle_ratings")) {
            for (const nlohmann::json& r : row.at("oracle_ratings")) {
                ratings.push_back(std::to_string(r.get<std::int64_t>()));
            }
            if (ratings.size() != queries.back().responses.size()) {
                raise(errc::data_error, "oracle_ratings must match the response count");
            }
        }
        oracle_ratings.push_back(std::move(ratings));
    }
    if (queries.empty()) raise(errc::data_error, "no queries in " + cfg.input);
    for (const EvalRQuery& q : queries) {
        for (std::size_t n : n_values) {
            if (n > q.responses.size()) {
                raise(errc::config_error, "n exceeds the candidate count");
            }
        }
    }

    // One judging pass over every candidate; each N selects over a prefix of
    // the same judgments, so a combined run equals the per-N runs.
    std::vector<SingleItem> flat;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        for (std::size_t i = 0; i < queries[q].responses.size(); ++i) {
            SingleItem item;
            item.query = queries[q].query;
            item.response = queries[q].responses[i];
            item.scenario_id = queries[q].scenario_id;
            item.sample_index = i;
            if (!oracle_ratings[q].empty()) {
                item.metadata["oracle_rating"] = oracle_ratings[q][i];
            }
            flat.push_back(std::move(item));
        }
    }
    std::vector<Fallible<SingleResult>> judged =
        judge_single_batch(ctx.gateway, judge, ctx.store, flat, cfg.max_in_flight);

    std::vector<nlohmann::json> rows;
    std::map<std::size_t, std::pair<double, std::size_t>> mean_by_n;
    std::size_t ok_queries = 0;
    std::optional<errc> first_failure;
    std::size_t cursor = 0;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        std::vector<SingleResult> candidates;
        std::optional<errc> failed;
        for (std::size_t i = 0; i < queries[q].responses.size(); ++i, ++cursor) {
            if (judged[cursor].ok()) {
                candidates.push_back(judged[cursor].value());
            } else if (!failed) {
                failed = judged[cursor].code();
            }
        }
        if (failed) {
            if (!first_failure) first_failure = *failed;
            nlohmann::json row;
            row["query_index"] = q;
            row["scenario_id"] = queries[q].scenario_id;
            row["error"] = std::string(errc_name(*failed));
            rows.push_back(std::move(row));
            continue;
        }
        ++ok_queries;
        for (std::size_t n : n_values) {
            BestOfNResult best = select_best_of_n(candidates, n);
            nlohmann::json row;
            row["query_index"] = q;
            row["scenario_id"] = queries[q].scenario_id;
            row["n"] = n;
            row["chosen_index"] = best.chosen_index;
            row["rating"] = rating_json(best.chosen_rating);
            rows.push_back(std::move(row));
            auto& [sum, count] = mean_by_n[n];
            sum += best.chosen_rating.value();
            count += 1;
        }
    }
    write_jsonl(ctx.out_dir / "selections.jsonl", rows);

    std::vector<std::pair<std::size_t, double>> means;
    for (std::size_t n : n_values) {
        auto it = mean_by_n.find(n);
        if (it != mean_by_n.end()) {
            means.push_back({n, it->second.first / static_cast<double>(it->second.second)});
        }
    }
    write_report(ctx, best_of_n_section(means), out);

    nlohmann::json n_json = nlohmann::json::array();
    for (std::size_t n : n_values) n_json.push_back(n);
    write_manifest(ctx, nlohmann::json{
                            {"command", "best-of-n"},
                            {"format", std::string(report_format_name(ctx.format))},
                            {"inputs", {{"input", cfg.input}}},
                            {"backends", {{"judge", backend_manifest(judge, cfg.judge_spec)}}},
                            {"params", {{"n", n_json}}},
                            {"counts",
                             {{"queries", queries.size()}, {"responses", flat.size()},
                              {"selected_queries", ok_queries}}},
                        });
    if (ok_queries == 0 && first_failure) return exit_code_for(*first_failure);
    return 0;
}

inline int cmd_duel(const CliConfig& cfg, std::ostream& out) {
    CliContext ctx = make_context(cfg);
    BackendSpec judge = parse_backend_spec(cfg.judge_spec, cfg.auth_env, cfg.max_attempts);
    validate_backend(judge);

    struct DuelItem {
        std::string query;
        std::string response;
        std::string ours;
        std::string baseline;
        std::string scenario_id;
        std::map<std::string, std::string> metadata;
    };
    std::vector<DuelItem> items;
    for (const nlohmann::json& row : read_jsonl(cfg.input)) {
        try {
            DuelItem item;
            item.query = row.at("query").get<std::string>();
            item.response = row.at("response").get<std::string>();
            item.ours = row.at("critique_ours").get<std::string>();
            item.baseline = row.at("critique_baseline").get<std::string>();
            item.scenario_id = row.at("scenario_id").get<std::string>();
            item.metadata = metadata_from_json(row);
            items.push_back(std::move(item));
        } catch (const nlohmann::json::exception& e) {
            raise(errc::data_error,
                  "duel item " + std::to_string(items.size()) + ": " + e.what());
        }
    }
    for (const DuelItem& item : items) ctx.registry.group_of(item.scenario_id);

    // One coin stream in item order: duels run sequentially so a seed pins
    // the whole presentation sequence.
    std::mt19937_64 rng(cfg.seed);
    std::vector<nlohmann::json> rows;
    std::vector<GroupedDuel> grouped;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const DuelItem& item = items[i];
        DuelResult result = run_feedback_duel(ctx.gateway, judge, ctx.store, item.query,
                                              item.response, item.ours, item.baseline, rng,
                                              item.metadata);
        ScenarioGroup group = ctx.registry.group_of(item.scenario_id);
        grouped.push_back({group, result.outcome_ours});
        nlohmann::json row;
        row["index"] = i;
        row["scenario_id"] = item.scenario_id;
        row["group"] = std::string(group_name(group));
        row["outcome"] = std::string(duel_outcome_name(result.outcome_ours));
        row["flipped"] = result.presented_order_flipped;
        rows.push_back(std::move(row));
    }
    write_jsonl(ctx.out_dir / "duels.jsonl", rows);

    DuelTally tally = tally_duels(grouped);
    write_report(ctx, duel_section(tally), out);

    write_manifest(ctx, nlohmann::json{
                            {"command", "duel"},
                            {"format", std::string(report_format_name(ctx.format))},
                            {"inputs", {{"input", cfg.input}}},
                            {"backends", {{"judge", backend_manifest(judge, cfg.judge_spec)}}},
                            {"params", {{"seed", cfg.seed}}},
                            {"counts",
                             {{"duels", items.size()}, {"win", tally.overall.win},
                              {"tie", tally.overall.tie}, {"lose", tally.overall.lose}}},
                        });
    return 0;
}

inline int cmd_classify(const CliConfig& cfg, std::ostream&) {
    CliContext ctx = make_context(cfg);
    BackendSpec judge = parse_backend_spec(cfg.judge_spec, cfg.auth_env, cfg.max_attempts);
    validate_backend(judge);

    std::vector<nlohmann::json> rows;
    std::size_t matched = 0;
    for (const nlohmann::json& row : read_jsonl(cfg.input)) {
        std::string query;
        try {
            query = row.at("query").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            raise(errc::data_error, "classify item " + std::to_string(rows.size()) + ": " +
                                        e.what());
        }
        ClassifyResult result = classify_scenario(ctx.gateway, judge, ctx.registry, ctx.store,
                                                  query, {}, metadata_from_json(row));
        matched += result.matched ? 1 : 0;
        rows.push_back(nlohmann::json{{"query", query},
                                      {"scenario_id", result.scenario_id},
                                      {"matched", result.matched}});
    }
    write_jsonl(ctx.out_dir / "classified.jsonl", rows);

    write_manifest(ctx, nlohmann::json{
                            {"command", "classify"},
                            {"inputs", {{"input", cfg.input}}},
                            {"backends", {{"judge", backend_manifest(judge, cfg.judge_spec)}}},
                            {"counts", {{"queries", rows.size()}, {"matched", matched}}},
                        });
    return 0;
}

inline int cmd_build_data(const CliConfig& cfg, std::ostream&) {
    CliContext ctx = make_context(cfg);
    BackendSpec teacher = parse_backend_spec(cfg.teacher_spec, cfg.auth_env, cfg.max_attempts);
    validate_backend(teacher);

    std::vector<PreferenceRecord> pool;
    for (const nlohmann::json& row : read_jsonl(cfg.pool_path)) {
        pool.push_back(record_from_json(row));
    }
    PreprocessResult pre = preprocess_sources(pool, cfg.language);

    CollectOptions options;
    options.cap = cfg.cap;
    options.max_in_flight = cfg.max_in_flight;
    std::vector<CollectedPairwise> collected =
        collect_pairwise(ctx.gateway, teacher, ctx.store, ctx.registry, pre.records, options);

    std::vector<CollectedPairwise> kept;
    std::int64_t mismatched = 0;
    std::int64_t unformattable = 0;
    std::vector<nlohmann::json> collected_rows;
    for (const CollectedPairwise& cp : collected) {
        collected_rows.push_back(to_json(cp));
        switch (cp.status) {
            case CollectStatus::kept:
                kept.push_back(cp);
                break;
            case CollectStatus::discarded_mismatch:
                ++mismatched;
                break;
            case CollectStatus::discarded_unformattable:
                ++unformattable;
                break;
        }
    }
    write_jsonl(ctx.out_dir / "collected_pairwise.jsonl", collected_rows);

    std::vector<CollectedSingle> singles;
    std::size_t singles_failed = 0;
    if (!cfg.singles_path.empty()) {
        std::vector<SingleItem> items;
        for (const nlohmann::json& row : read_jsonl(cfg.singles_path)) {
            items.push_back(single_item_from_json(row));
        }
        for (const Fallible<CollectedSingle>& r :
             collect_single(ctx.gateway, teacher, ctx.store, ctx.registry, items,
                            cfg.max_in_flight)) {
            if (r.ok()) {
                singles.push_back(r.value());
            } else {
                ++singles_failed;
            }
        }
    }
    std::vector<nlohmann::json> single_rows;
    for (const CollectedSingle& cs : singles) single_rows.push_back(to_json(cs));
    write_jsonl(ctx.out_dir / "collected_singles.jsonl", single_rows);

    std::vector<TrainingExample> examples = emit_training_examples(ctx.store, kept, singles);
    std::vector<TrainingExample> pairwise_examples;
    std::vector<TrainingExample> single_examples;
    for (TrainingExample& ex : examples) {
        (ex.protocol == ExampleProtocol::pairwise ? pairwise_examples : single_examples)
            .push_back(std::move(ex));
    }
    std::vector<TrainingExample> augmented = augment_swap(pairwise_examples);
    std::vector<TrainingExample> balanced = balance_duplicate_singles(single_examples);

    auto write_examples = [&](const char* name, const std::vector<TrainingExample>& list) {
        std::vector<nlohmann::json> rows;
        for (const TrainingExample& ex : list) rows.push_back(to_json(ex));
        write_jsonl(ctx.out_dir / name, rows);
    };
    write_examples("train_pairwise.jsonl", augmented);
    write_examples("train_single.jsonl", balanced);
    std::vector<TrainingExample> all = augmented;
    all.insert(all.end(), balanced.begin(), balanced.end());
    write_examples("train_all.jsonl", all);

    write_manifest(
        ctx, nlohmann::json{
                 {"command", "build-data"},
                 {"inputs",
                  {{"pool", cfg.pool_path},
                   {"singles", cfg.singles_path.empty() ? nlohmann::json(nullptr)
                                                        : nlohmann::json(cfg.singles_path)}}},
                 {"backends", {{"teacher", backend_manifest(teacher, cfg.teacher_spec)}}},
                 {"params", {{"cap", cfg.cap}, {"language", cfg.language}}},
                 {"counts",
                  {{"pool", pool.size()},
                   {"dropped_language", pre.dropped_language},
                   {"dropped_untagged", pre.dropped_untagged},
                   {"processed", collected.size()},
                   {"kept", kept.size()},
                   {"discarded_mismatch", mismatched},
                   {"discarded_unformattable", unformattable},
                   {"singles", singles.size()},
                   {"singles_failed", singles_failed},
                   {"train_pairwise", augmented.size()},
                   {"train_single", balanced.size()},
                   {"train_total", all.size()}}},
             });
    return 0;
}

inline int cmd_build_testbed(const CliConfig& cfg, std::ostream&) {
    CliContext ctx = make_context(cfg);
    BackendSpec base_model =
        parse_backend_spec(cfg.base_model_spec, cfg.auth_env, cfg.max_attempts);
    validate_backend(base_model);

    std::vector<PreferenceRecord> pool;
    for (const nlohmann::json& row : read_jsonl(cfg.pool_path)) {
        pool.push_back(record_from_json(row));
    }

    std::set<std::string> training_keys;
    if (!cfg.training_keys_path.empty()) {
        std::ifstream in(cfg.training_keys_path);
        if (!in) raise(errc::data_error, "cannot read " + cfg.training_keys_path);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty()) training_keys.insert(line);
        }
    }

    std::mt19937_64 rng(cfg.seed);
    std::vector<PairwiseItem> eval_p =
        build_eval_p(pool, training_keys, ctx.registry, rng, cfg.k_pairwise);
    std::vector<SingleItem> eval_c = build_eval_c(eval_p, rng, cfg.k_rating);
    EvalROptions options;
    options.k_queries = cfg.k_queries;
    options.n_samples = cfg.n_samples;
    options.temperature = cfg.temperature;
    options.max_in_flight = cfg.max_in_flight;
    std::vector<EvalRQuery> eval_r = build_eval_r(ctx.gateway, base_model, eval_c, rng, options);

    auto write_stage = [&](const char* name, const auto& list) {
        std::vector<nlohmann::json> rows;
        for (const auto& item : list) rows.push_back(to_json(item));
        write_jsonl(ctx.out_dir / name, rows);
    };
    write_stage("eval_p.jsonl", eval_p);
    write_stage("eval_c.jsonl", eval_c);
    write_stage("eval_r.jsonl", eval_r);

    std::size_t responses = 0;
    for (const EvalRQuery& q : eval_r) responses += q.responses.size();

    write_manifest(
        ctx,
        nlohmann::json{
            {"command", "build-testbed"},
            {"inputs",
             {{"pool", cfg.pool_path},
              {"training_keys", cfg.training_keys_path.empty()
                                    ? nlohmann::json(nullptr)
                                    : nlohmann::json(cfg.training_keys_path)}}},
            {"backends", {{"base_model", backend_manifest(base_model, cfg.base_model_spec)}}},
            {"params",
             {{"seed", cfg.seed}, {"k_pairwise", cfg.k_pairwise}, {"k_rating", cfg.k_rating},
              {"k_queries", cfg.k_queries}, {"n_samples", cfg.n_samples},
              {"temperature", cfg.temperature}}},
            {"counts",
             {{"pool", pool.size()}, {"eval_p", eval_p.size()}, {"eval_c", eval_c.size()},
              {"eval_r_queries", eval_r.size()}, {"eval_r_responses", responses}}},
        });
    return 0;
}

inline int cmd_report(const CliConfig& cfg, std::ostream& out) {
    if (cfg.runs_path.empty() && cfg.systems_path.empty() && cfg.duels_path.empty() &&
        cfg.selections_path.empty()) {
        raise(errc::usage_error,
              "report needs at least one of --runs, --systems, --duels, --selections");
    }
    CliContext ctx = make_context(cfg);

    std::vector<ReportRow> report;
    nlohmann::json counts = nlohmann::json::object();
    nlohmann::json inputs = nlohmann::json::object();

    if (!cfg.runs_path.empty()) {
        std::vector<LabeledRun> labeled;
        for (const nlohmann::json& row : read_jsonl(cfg.runs_path)) {
            LabeledRun run;
            run.scenario_id = row.at("scenario_id").get<std::string>();
            run.human_label = verdict_from_label(row.at("human_label").get<std::string>());
            run.run.consistent = row.at("consistent").get<bool>();
            if (!row.at("final_verdict").is_null()) {
                run.run.final_verdict =
                    verdict_from_label(row.at("final_verdict").get<std::string>());
            }
            labeled.push_back(std::move(run));
        }
        AgreementSummary summary = agreement_rate(labeled, ctx.registry);
        for (ReportRow& row : agreement_section(summary)) report.push_back(std::move(row));
        for (ReportRow& row : consistency_section(summary)) report.push_back(std::move(row));
        counts["runs"] = labeled.size();
        inputs["runs"] = cfg.runs_path;
    }

    if (!cfg.systems_path.empty()) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(read_text_file(cfg.systems_path, errc::data_error));
        } catch (const nlohmann::json::exception& e) {
            raise(errc::data_error, cfg.systems_path + ": " + e.what());
        }
        std::map<std::string, double> ratings;
        std::map<std::string, double> references;
        for (const nlohmann::json& row : doc.at("systems")) {
            std::string system = row.at("system").get<std::string>();
            ratings[system] = row.at("mean_rating").get<double>();
            references[system] = row.at("reference_value").get<double>();
        }
        SystemRankTable table = system_rank_table(ratings, references);
        for (ReportRow& row : system_ranking_section(table)) report.push_back(std::move(row));
        counts["systems"] = ratings.size();
        inputs["systems"] = cfg.systems_path;
    }

    if (!cfg.duels_path.empty()) {
        std::vector<GroupedDuel> grouped;
        for (const nlohmann::json& row : read_jsonl(cfg.duels_path)) {
            grouped.push_back({group_from_name(row.at("group").get<std::string>()),
                               duel_outcome_from_name(row.at("outcome").get<std::string>())});
        }
        DuelTally tally = tally_duels(grouped);
        for (ReportRow& row : duel_section(tally)) report.push_back(std::move(row));
        counts["duels"] = grouped.size();
        inputs["duels"] = cfg.duels_path;
    }

    if (!cfg.selections_path.empty()) {
        std::map<std::size_t, std::pair<double, std::size_t>> mean_by_n;
        std::size_t selections = 0;
        for (const nlohmann::json& row : read_jsonl(cfg.selections_path)) {
            if (!row.contains("n")) continue;
            Rating rating = Rating::from_parts(row.at("rating").at("num").get<std::int64_t>(),
                                               row.at("rating").at("den").get<std::int64_t>());
            auto& [sum, count] = mean_by_n[row.at("n").get<std::size_t>()];
            sum += rating.value();
            count += 1;
            ++selections;
        }
        std::vector<std::pair<std::size_t, double>> means;
        for (const auto& [n, acc] : mean_by_n) {
            means.push_back({n, acc.first / static_cast<double>(acc.second)});
        }
        for (ReportRow& row : best_of_n_section(means)) report.push_back(std::move(row));
        counts["selections"] = selections;
        inputs["selections"] = cfg.selections_path;
    }

    write_report(ctx, report, out);
    write_manifest(ctx, nlohmann::json{
                            {"command", "report"},
                            {"format", std::string(report_format_name(ctx.format))},
                            {"inputs", inputs},
                            {"counts", counts},
                        });
    return 0;
}

}  // namespace detail

/// Entry point behind the `autoj` binary, separated from main() so tests can
/// invoke it in-process. Takes the arguments after the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    detail::CliConfig cfg;
    CLI::App app{"Judge evaluation toolkit", "autoj"};
    app.require_subcommand(1);

    auto add_common = [&](CLI::App* sub, bool with_report) {
        sub->add_option("--registry", cfg.registry_path, "Scenario registry JSON");
        sub->add_option("--templates", cfg.template_dir, "Prompt template directory");
        sub->add_option("--out", cfg.out_dir, "Output directory");
        sub->add_option("--cache-dir", cfg.cache_dir, "Response cache directory");
        sub->add_flag("--no-cache", cfg.no_cache, "Disable the response cache");
        sub->add_option("--auth-env", cfg.auth_env, "Env var holding the API key");
        sub->add_option("--max-attempts", cfg.max_attempts, "Attempts per request");
        if (with_report) {
            sub->add_option("--report", cfg.report_format, "Report format: md, csv, jsonl");
        }
    };

    CLI::App* classify = app.add_subcommand("classify", "Assign registry scenarios to queries");
    classify->add_option("--input", cfg.input, "Queries, one JSON object per line")->required();
    classify->add_option("--judge", cfg.judge_spec, "Classifier backend spec")->required();
    add_common(classify, false);

    CLI::App* pairwise =
        app.add_subcommand("judge-pairwise", "Judge labeled pairs in both orders");
    pairwise->add_option("--input", cfg.input, "Pairwise items, one per line")->required();
    pairwise->add_option("--judge", cfg.judge_spec, "Judge backend spec")->required();
    pairwise->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent requests");
    add_common(pairwise, true);

    CLI::App* single =
        app.add_subcommand("judge-single", "Critique and rate single responses");
    single->add_option("--input", cfg.input, "Single items, one per line")->required();
    single->add_option("--judge", cfg.judge_spec, "Judge backend spec")->required();
    single->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent requests");
    add_common(single, true);

    CLI::App* best = app.add_subcommand("best-of-n", "Select the best candidate per query");
    best->add_option("--input", cfg.input, "Queries with sampled responses")->required();
    best->add_option("--judge", cfg.judge_spec, "Judge backend spec")->required();
    best->add_option("--n", cfg.n_list, "Comma-separated candidate counts");
    best->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent requests");
    add_common(best, true);

    CLI::App* duel = app.add_subcommand("duel", "Pit critiques against a baseline");
    duel->add_option("--input", cfg.input, "Duel items, one per line")->required();
    duel->add_option("--judge", cfg.judge_spec, "Judge backend spec")->required();
    duel->add_option("--seed", cfg.seed, "Presentation-order seed");
    add_common(duel, true);

    CLI::App* build_data =
        app.add_subcommand("build-data", "Collect, filter, and augment training data");
    build_data->add_option("--pool", cfg.pool_path, "Classified preference records")->required();
    build_data->add_option("--singles", cfg.singles_path, "Single-response items");
    build_data->add_option("--teacher", cfg.teacher_spec, "Teacher backend spec")->required();
    build_data->add_option("--cap", cfg.cap, "Kept samples per scenario");
    build_data->add_option("--language", cfg.language, "Language tag to keep");
    build_data->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent requests");
    add_common(build_data, false);

    CLI::App* build_testbed =
        app.add_subcommand("build-testbed", "Sample the evaluation pools from a record pool");
    build_testbed->add_option("--pool", cfg.pool_path, "Classified preference records")
        ->required();
    build_testbed->add_option("--training-keys", cfg.training_keys_path,
                              "Digests to exclude, one per line");
    build_testbed->add_option("--base-model", cfg.base_model_spec, "Base model backend spec");
    build_testbed->add_option("--seed", cfg.seed, "Sampling seed");
    build_testbed->add_option("--k-pairwise", cfg.k_pairwise, "Pairwise items per scenario");
    build_testbed->add_option("--k-rating", cfg.k_rating, "Rating items per scenario");
    build_testbed->add_option("--k-queries", cfg.k_queries, "Sampled queries per scenario");
    build_testbed->add_option("--n-samples", cfg.n_samples, "Responses per query");
    build_testbed->add_option("--temperature", cfg.temperature, "Base model temperature");
    build_testbed->add_option("--max-in-flight", cfg.max_in_flight, "Concurrent requests");
    add_common(build_testbed, false);

    CLI::App* report = app.add_subcommand("report", "Re-render reports from stage outputs");
    report->add_option("--runs", cfg.runs_path, "runs.jsonl from judge-pairwise");
    report->add_option("--systems", cfg.systems_path, "System ratings JSON");
    report->add_option("--duels", cfg.duels_path, "Duel outcomes, one per line");
    report->add_option("--selections", cfg.selections_path, "selections.jsonl from best-of-n");
    add_common(report, true);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        if (!args.empty() && args.front().rfind('-', 0) != 0 &&
            app.get_subcommand_no_throw(args.front()) == nullptr) {
            err << "unknown subcommand '" << args.front() << "'\n";
        }
        err << '\n' << app.help();
        return 2;
    }

    try {
        if (classify->parsed()) return detail::cmd_classify(cfg, out);
        if (pairwise->parsed()) return detail::cmd_judge_pairwise(cfg, out);
        if (single->parsed()) return detail::cmd_judge_single(cfg, out);
        if (best->parsed()) return detail::cmd_best_of_n(cfg, out);
        if (duel->parsed()) return detail::cmd_duel(cfg, out);
        if (build_data->parsed()) return detail::cmd_build_data(cfg, out);
        if (build_testbed->parsed()) return detail::cmd_build_testbed(cfg, out);
        if (report->parsed()) return detail::cmd_report(cfg, out);
    } catch (const Error& e) {
        err << "error: " << e.what() << " [" << errc_name(e.code()) << "]\n";
        return detail::exit_code_for(e.code());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 5;
    }
    err << "no subcommand dispatched\n" << app.help();
    return 2;
}

}  // namespace autoj

#pragma once

// Data machinery around the judge: source preprocessing, criteria-conditioned
// judgment collection with filtering and per-scenario caps, divide-and-conquer
// critique collection, swap augmentation, balancing, test-pool construction,
// and training-example emission. Every stage is deterministic for a fixed
// seed and independent of the request fan-out.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoj/detail/digest.hpp"
#include "autoj/detail/rng.hpp"
#include "autoj/errors.hpp"
#include "autoj/gateway.hpp"
#include "autoj/parsing.hpp"
#include "autoj/protocol.hpp"
#include "autoj/registry.hpp"
#include "autoj/templates.hpp"

namespace autoj {

/// Adapters join the turns of a multi-turn conversation with this delimiter;
/// preprocessing keeps the text before the first one.
inline constexpr const char* kTurnDelimiter = "\n<next-turn>\n";

struct PreferenceRecord {
    std::string source;
    std::string query;
    std::string response_1;
    std::string response_2;
    Verdict human_label = Verdict::tie;
    std::optional<std::string> language_tag;
    int turns = 1;
    std::optional<std::string> scenario_id;
};

/// Key for training-overlap exclusion: the compared texts only, so the same
/// pair is recognized regardless of label or source bookkeeping.
inline std::string preference_digest(const PreferenceRecord& r) {
    std::vector<std::string_view> fields = {"preference", r.query, r.response_1, r.response_2};
    return detail::field_digest(fields);
}

struct PreprocessResult {
    std::vector<PreferenceRecord> records;
    std::int64_t dropped_language = 0;
    std::int64_t dropped_untagged = 0;
};

/// Keeps records tagged with the configured language, truncates multi-turn
/// conversations to their first turn, and counts what it drops.
inline PreprocessResult preprocess_sources(const std::vector<PreferenceRecord>& records,
                                           const std::string& language) {
    PreprocessResult out;
    for (PreferenceRecord r : records) {
        if (!r.language_tag) {
            out.dropped_untagged += 1;
            continue;
        }
        if (*r.language_tag != language) {
            out.dropped_language += 1;
            continue;
        }
        if (r.turns > 1) {
            std::size_t cut = r.query.find(kTurnDelimiter);
            if (cut != std::string::npos) r.query.resize(cut);
            r.turns = 1;
        }
        out.records.push_back(std::move(r));
    }
    return out;
}

enum class CollectStatus { kept, discarded_mismatch, discarded_unformattable };

inline std::string_view collect_status_name(CollectStatus s) {
    switch (s) {
        case CollectStatus::kept: return "kept";
        case CollectStatus::discarded_mismatch: return "discarded_mismatch";
        case CollectStatus::discarded_unformattable: return "discarded_unformattable";
    }
    return "kept";
}

inline CollectStatus collect_status_from_name(std::string_view name) {
    if (name == "kept") return CollectStatus::kept;
    if (name == "discarded_mismatch") return CollectStatus::discarded_mismatch;
    if (name == "discarded_unformattable") return CollectStatus::discarded_unformattable;
    raise(errc::data_error, "not a collection status: '" + std::string(name) + "'");
}

struct CollectedPairwise {
    PreferenceRecord record;
    ParsedPairwiseJudgment judgment;  // meaningful unless discarded_unformattable
    CollectStatus status = CollectStatus::discarded_unformattable;
};

struct CollectOptions {
    std::int64_t cap = 100;  // kept samples per scenario
    std::size_t max_in_flight = 8;
    // Records are dispatched in fixed-size slices so the set of teacher calls
    // never depends on max_in_flight; the cap is re-checked between slices.
    std::size_t chunk = 32;
};

/// Asks the teacher to judge each record under the scenario's criteria,
/// reformats the output, and keeps it only when the verdict matches the human
/// label. Collection for a scenario stops once `cap` kept samples exist.
/// Backend failures surface as unformattable discards: either way there is no
/// usable judgment for that record.
inline std::vector<CollectedPairwise> collect_pairwise(const Gateway& gateway,
                                                       const BackendSpec& teacher,
                                                       const TemplateStore& store,
                                                       const Registry& registry,
                                                       const std::vector<PreferenceRecord>& records,
                                                       const CollectOptions& options = {}) {
    if (options.cap < 1) raise(errc::config_error, "collection cap must be >= 1");
    if (options.chunk < 1) raise(errc::config_error, "collection chunk must be >= 1");
    validate_backend(teacher);

    std::map<std::string, std::int64_t> kept;
    std::vector<CollectedPairwise> out;
    std::size_t i = 0;
    while (i < records.size()) {
        std::vector<std::size_t> picked;
        while (i < records.size() && picked.size() < options.chunk) {
            const PreferenceRecord& r = records[i];
            if (!r.scenario_id) {
                raise(errc::data_error, "record without a scenario reached collection; classify first");
            }
            if (kept[*r.scenario_id] < options.cap) picked.push_back(i);
            ++i;
        }
        if (picked.empty()) continue;

        std::vector<GenerationRequest> reqs;
        reqs.reserve(picked.size());
        for (std::size_t idx : picked) {
            const PreferenceRecord& r = records[idx];
            GenerationRequest req;
            req.messages = store.render_with_criteria(TemplateId::teacher_pairwise,
                                                      {{"query", r.query},
                                                       {"response_1", r.response_1},
                                                       {"response_2", r.response_2}},
                                                      registry.criteria_for(*r.scenario_id),
                                                      registry);
            req.metadata["protocol"] = "pairwise";
            req.metadata["oracle_label"] = std::string(verdict_label(r.human_label));
            reqs.push_back(std::move(req));
        }
        std::vector<Fallible<GenerationResult>> results =
            gateway.complete_batch(teacher, reqs, options.max_in_flight);

        for (std::size_t j = 0; j < picked.size(); ++j) {
            const PreferenceRecord& r = records[picked[j]];
            CollectedPairwise cp;
            cp.record = r;
            if (!results[j].ok()) {
                cp.status = CollectStatus::discarded_unformattable;
                out.push_back(std::move(cp));
                continue;
            }
            try {
                cp.judgment = reformat_pairwise(results[j].value().text);
            } catch (const Error&) {
                cp.status = CollectStatus::discarded_unformattable;
                out.push_back(std::move(cp));
                continue;
            }
            if (cp.judgment.verdict != r.human_label) {
                cp.status = CollectStatus::discarded_mismatch;
                out.push_back(std::move(cp));
                continue;
            }
            std::int64_t& count = kept[*r.scenario_id];
            if (count >= options.cap) continue;  // slice overshoot, drop
            count += 1;
            cp.status = CollectStatus::kept;
            out.push_back(std::move(cp));
        }
    }
    return out;
}

struct CollectedSingle {
    std::string query;
    std::string response;
    std::string scenario_id;
    std::string critique_with_criteria;
    std::string critique_plain;
    std::string combined;
    Rating rating;
};

/// Divide and conquer: critique under the scenario criteria, critique without
/// them, then a combine call that merges both and grades. The combine call is
/// unconditional for every item whose critiques succeeded; failures stay with
/// their item.
inline std::vector<Fallible<CollectedSingle>> collect_single(const Gateway& gateway,
                                                             const BackendSpec& teacher,
                                                             const TemplateStore& store,
                                                             const Registry& registry,
                                                             const std::vector<SingleItem>& items,
                                                             std::size_t max_in_flight = 8) {
    validate_backend(teacher);
    std::vector<Fallible<CollectedSingle>> out(
        items.size(), Fallible<CollectedSingle>::failure(errc::data_error, "not run"));
    if (items.empty()) return out;

    auto critique_request = [&](const SingleItem& item, bool with_criteria) {
        GenerationRequest req;
        Bindings bindings{{"query", item.query}, {"response", item.response}};
        if (with_criteria) {
            req.messages = store.render_with_criteria(TemplateId::teacher_critique_plain, bindings,
                                                      registry.criteria_for(item.scenario_id),
                                                      registry);
        } else {
            req.messages = store.render(TemplateId::teacher_critique_plain, bindings);
        }
        req.metadata = item.metadata;
        req.metadata["protocol"] = "critique";
        req.sample_index = item.sample_index;
        return req;
    };

    auto run_wave = [&](const std::vector<GenerationRequest>& reqs) {
        return gateway.complete_batch(teacher, reqs, max_in_flight);
    };

    std::vector<GenerationRequest> wave;
    for (std::size_t i = 0; i < items.size(); ++i) {
        wave.push_back(critique_request(items[i], true));
    }
    std::vector<Fallible<GenerationResult>> with_criteria = run_wave(wave);

    wave.clear();
    for (std::size_t i = 0; i < items.size(); ++i) {
        wave.push_back(critique_request(items[i], false));
    }
    std::vector<Fallible<GenerationResult>> plain = run_wave(wave);

    std::vector<std::size_t> combine_indices;
    wave.clear();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (!with_criteria[i].ok()) {
            out[i] = Fallible<CollectedSingle>::failure(with_criteria[i].code(),
                                                        with_criteria[i].message());
            continue;
        }
        if (!plain[i].ok()) {
            out[i] = Fallible<CollectedSingle>::failure(plain[i].code(), plain[i].message());
            continue;
        }
        GenerationRequest req;
        req.messages = store.render(TemplateId::combine_critiques,
                                    {{"query", items[i].query},
                                     {"response", items[i].response},
                                     {"critique_1", with_criteria[i].value().text},
                                     {"critique_2", plain[i].value().text}});
        req.metadata = items[i].metadata;
        req.metadata["protocol"] = "combine";
        req.sample_index = items[i].sample_index;
        combine_indices.push_back(i);
        wave.push_back(std::move(req));
    }
    if (combine_indices.empty()) return out;
    std::vector<Fallible<GenerationResult>> combined = run_wave(wave);

    for (std::size_t j = 0; j < combine_indices.size(); ++j) {
        std::size_t i = combine_indices[j];
        if (!combined[j].ok()) {
            out[i] = Fallible<CollectedSingle>::failure(combined[j].code(), combined[j].message());
            continue;
        }
        CollectedSingle cs;
        cs.query = items[i].query;
        cs.response = items[i].response;
        cs.scenario_id = items[i].scenario_id;
        cs.critique_with_criteria = with_criteria[i].value().text;
        cs.critique_plain = plain[i].value().text;
        cs.combined = combined[j].value().text;
        try {
            cs.rating = parse_rating(cs.combined);
        } catch (const Error& e) {
            out[i] = Fallible<CollectedSingle>::failure(e.code(), e.what());
            continue;
        }
        out[i] = Fallible<CollectedSingle>::success(std::move(cs));
    }
    return out;
}

enum class ExampleProtocol { pairwise, single };

inline std::string_view example_protocol_name(ExampleProtocol p) {
    return p == ExampleProtocol::pairwise ? "pairwise" : "single";
}

inline ExampleProtocol example_protocol_from_name(std::string_view name) {
    if (name == "pairwise") return ExampleProtocol::pairwise;
    if (name == "single") return ExampleProtocol::single;
    raise(errc::data_error, "not an example protocol: '" + std::string(name) + "'");
}

struct TrainingExample {
    ExampleProtocol protocol = ExampleProtocol::pairwise;
    std::string input;   // judge input format, criteria-free
    std::string output;  // judgment text
};

namespace detail {

/// Exchanges every literal "Response 1"/"Response 2" mention in one pass, so
/// the replacement never rewrites its own output.
inline std::string swap_response_mentions(std::string_view text) {
    static constexpr std::string_view kFirst = "Response 1";
    static constexpr std::string_view kSecond = "Response 2";
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (text.compare(i, kFirst.size(), kFirst) == 0) {
            out += kSecond;
            i += kFirst.size();
        } else if (text.compare(i, kSecond.size(), kSecond) == 0) {
            out += kFirst;
            i += kSecond.size();
        } else {
            out += text[i];
            ++i;
        }
    }
    return out;
}

/// Swaps the two response section bodies of a rendered pairwise judge input.
inline std::string swap_input_sections(const std::string& input) {
    static const std::string kFirstHeader = "[Response 1]: ";
    static const std::string kSeparator = "\n***\n[Response 2]: ";
    static const std::string kTail = "\n***\n[END DATA]";
    std::size_t p1 = input.find(kFirstHeader);
    std::size_t sep = p1 == std::string::npos ? std::string::npos : input.find(kSeparator, p1);
    std::size_t end = input.rfind(kTail);
    if (p1 == std::string::npos || sep == std::string::npos || end == std::string::npos ||
        sep + kSeparator.size() > end) {
        raise(errc::not_pairwise, "input lacks the two response sections of the pairwise format");
    }
    std::size_t b1 = p1 + kFirstHeader.size();
    std::size_t b2 = sep + kSeparator.size();
    std::string body1 = input.substr(b1, sep - b1);
    std::string body2 = input.substr(b2, end - b2);
    return input.substr(0, b1) + body2 + kSeparator + body1 + input.substr(end);
}

}  // namespace detail

/// Doubles pairwise training data: each example gains a copy with the two
/// response slots exchanged in the input and every "Response 1"/"Response 2"
/// mention exchanged in the output. Applying it to the swapped copies gives
/// the originals back.
inline std::vector<TrainingExample> augment_swap(const std::vector<TrainingExample>& examples) {
    for (const TrainingExample& ex : examples) {
        if (ex.protocol != ExampleProtocol::pairwise) {
            raise(errc::not_pairwise, "swap augmentation only applies to pairwise examples");
        }
    }
    std::vector<TrainingExample> out = examples;
    out.reserve(examples.size() * 2);
    for (const TrainingExample& ex : examples) {
        TrainingExample swapped;
        swapped.protocol = ExampleProtocol::pairwise;
        swapped.input = detail::swap_input_sections(ex.input);
        swapped.output = detail::swap_response_mentions(ex.output);
        out.push_back(std::move(swapped));
    }
    return out;
}

/// Matches the doubled pairwise volume by repeating every single-response
/// example once.
inline std::vector<TrainingExample> balance_duplicate_singles(
    const std::vector<TrainingExample>& examples) {
    for (const TrainingExample& ex : examples) {
        if (ex.protocol != ExampleProtocol::single) {
            raise(errc::not_single, "balancing only applies to single-response examples");
        }
    }
    std::vector<TrainingExample> out = examples;
    out.insert(out.end(), examples.begin(), examples.end());
    return out;
}

/// Turns kept collections into training pairs. Inputs use the judge formats,
/// which carry no criteria text; the criteria influence only the outputs the
/// teacher wrote under them.
inline std::vector<TrainingExample> emit_training_examples(
    const TemplateStore& store, const std::vector<CollectedPairwise>& pairwise,
    const std::vector<CollectedSingle>& singles) {
    std::vector<TrainingExample> out;
    out.reserve(pairwise.size() + singles.size());
    for (const CollectedPairwise& cp : pairwise) {
        if (cp.status != CollectStatus::kept) {
            raise(errc::unkept_record, "only kept records become training examples");
        }
        TrainingExample ex;
        ex.protocol = ExampleProtocol::pairwise;
        ex.input = store
                       .render(TemplateId::judge_pairwise_input,
                               {{"query", cp.record.query},
                                {"response_1", cp.record.response_1},
                                {"response_2", cp.record.response_2}})
                       .front()
                       .content;
        ex.output = cp.judgment.raw.empty()
                        ? render_unified_judgment(cp.judgment.factors, cp.judgment.verdict,
                                                  cp.judgment.remarks)
                        : cp.judgment.raw;
        out.push_back(std::move(ex));
    }
    for (const CollectedSingle& cs : singles) {
        TrainingExample ex;
        ex.protocol = ExampleProtocol::single;
        ex.input = store
                       .render(TemplateId::judge_single_input,
                               {{"query", cs.query}, {"response", cs.response}})
                       .front()
                       .content;
        ex.output = cs.combined;
        out.push_back(std::move(ex));
    }
    return out;
}

/// Pairwise test pool: k records per scenario, sampled uniformly from the
/// eligible pool after excluding anything whose digest appears in the
/// training keys. Scenarios are visited in registry order.
inline std::vector<PairwiseItem> build_eval_p(const std::vector<PreferenceRecord>& pool,
                                              const std::set<std::string>& training_keys,
                                              const Registry& registry, std::mt19937_64& rng,
                                              std::size_t k = 24) {
    if (k < 1) raise(errc::config_error, "need k >= 1 records per scenario");
    std::map<std::string, std::vector<std::size_t>> eligible;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const PreferenceRecord& r = pool[i];
        if (!r.scenario_id) continue;
        if (training_keys.count(preference_digest(r))) continue;
        eligible[*r.scenario_id].push_back(i);
    }
    std::vector<PairwiseItem> out;
    out.reserve(registry.scenarios().size() * k);
    for (const Scenario& s : registry.scenarios()) {
        const std::vector<std::size_t>& candidates = eligible[s.id];
        if (candidates.size() < k) {
            raise(errc::insufficient_pool, "scenario '" + s.id + "' has " +
                                               std::to_string(candidates.size()) +
                                               " eligible records, need " + std::to_string(k));
        }
        for (std::size_t pick : detail::sample_indices(rng, candidates.size(), k)) {
            const PreferenceRecord& r = pool[candidates[pick]];
            PairwiseItem item;
            item.query = r.query;
            item.response_a = r.response_1;
            item.response_b = r.response_2;
            item.scenario_id = *r.scenario_id;
            item.human_label = r.human_label;
            out.push_back(std::move(item));
        }
    }
    return out;
}

/// Rating test pool: k queries per scenario from the pairwise pool, each
/// paired with the response its human label disfavors; a tie picks either
/// side uniformly.
inline std::vector<SingleItem> build_eval_c(const std::vector<PairwiseItem>& eval_p,
                                            std::mt19937_64& rng, std::size_t k = 4) {
    if (k < 1) raise(errc::config_error, "need k >= 1 queries per scenario");
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < eval_p.size(); ++i) {
        const std::string& scenario = eval_p[i].scenario_id;
        auto [it, inserted] = position.try_emplace(scenario, groups.size());
        if (inserted) groups.push_back({scenario, {}});
        groups[it->second].second.push_back(i);
    }
    std::vector<SingleItem> out;
    for (const auto& [scenario, indices] : groups) {
        if (indices.size() < k) {
            raise(errc::insufficient_pool, "scenario '" + scenario + "' has " +
                                               std::to_string(indices.size()) +
                                               " pairwise items, need " + std::to_string(k));
        }
        for (std::size_t pick : detail::sample_indices(rng, indices.size(), k)) {
            const PairwiseItem& src = eval_p[indices[pick]];
            if (!src.human_label) {
                raise(errc::data_error, "pairwise pool item lacks a human label");
            }
            SingleItem si;
            si.query = src.query;
            si.scenario_id = src.scenario_id;
            switch (*src.human_label) {
                case Verdict::response_1: si.response = src.response_b; break;
                case Verdict::response_2: si.response = src.response_a; break;
                case Verdict::tie:
                    si.response = detail::bernoulli_half(rng) ? src.response_a : src.response_b;
                    break;
            }
            out.push_back(std::move(si));
        }
    }
    return out;
}

struct EvalROptions {
    std::size_t k_queries = 2;
    std::size_t n_samples = 32;
    double temperature = 1.0;
    std::size_t max_in_flight = 8;
};

struct EvalRQuery {
    std::string query;
    std::string scenario_id;
    std::vector<std::string> responses;
};

/// Best-of-N test pool: a few queries per scenario, each answered n_samples
/// times by the base model at the sampling temperature. Sample indices keep
/// the draws distinct and the whole corpus reproducible.
inline std::vector<EvalRQuery> build_eval_r(const Gateway& gateway, const BackendSpec& base_model,
                                            const std::vector<SingleItem>& eval_c,
                                            std::mt19937_64& rng,
                                            const EvalROptions& options = {}) {
    if (options.k_queries < 1) raise(errc::config_error, "need k_queries >= 1");
    if (options.n_samples < 1) raise(errc::config_error, "need n_samples >= 1");
    validate_backend(base_model);

    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < eval_c.size(); ++i) {
        const std::string& scenario = eval_c[i].scenario_id;
        auto [it, inserted] = position.try_emplace(scenario, groups.size());
        if (inserted) groups.push_back({scenario, {}});
        groups[it->second].second.push_back(i);
    }
    std::vector<EvalRQuery> out;
    for (const auto& [scenario, indices] : groups) {
        if (indices.size() < options.k_queries) {
            raise(errc::insufficient_pool, "scenario '" + scenario + "' has " +
                                               std::to_string(indices.size()) +
                                               " queries, need " +
                                               std::to_string(options.k_queries));
        }
        for (std::size_t pick : detail::sample_indices(rng, indices.size(), options.k_queries)) {
            EvalRQuery q;
            q.query = eval_c[indices[pick]].query;
            q.scenario_id = scenario;
            out.push_back(std::move(q));
        }
    }

    std::vector<GenerationRequest> reqs;
    reqs.reserve(out.size() * options.n_samples);
    for (const EvalRQuery& q : out) {
        for (std::size_t s = 0; s < options.n_samples; ++s) {
            GenerationRequest req;
            req.messages = {{Role::user, q.query}};
            Sampling sampling;
            sampling.temperature = options.temperature;
            req.sampling = sampling;
            req.sample_index = s;
            req.metadata["protocol"] = "generate";
            reqs.push_back(std::move(req));
        }
    }
    std::vector<Fallible<GenerationResult>> results =
        gateway.complete_batch(base_model, reqs, options.max_in_flight);
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!results[i].ok()) {
            raise(results[i].code(), "base model failed on sample " + std::to_string(i) + ": " +
                                         results[i].message());
        }
        out[i / options.n_samples].responses.push_back(results[i].value().text);
    }
    return out;
}

// Stage-file serialization: one json object per line, keys sorted, no
// timestamps, so identical runs write identical bytes.

inline nlohmann::json to_json(const PreferenceRecord& r) {
    nlohmann::json j;
    j["source"] = r.source;
    j["query"] = r.query;
    j["response_1"] = r.response_1;
    j["response_2"] = r.response_2;
    j["human_label"] = std::string(verdict_label(r.human_label));
    j["language_tag"] = r.language_tag ? nlohmann::json(*r.language_tag) : nlohmann::json();
    j["turns"] = r.turns;
    j["scenario_id"] = r.scenario_id ? nlohmann::json(*r.scenario_id) : nlohmann::json();
    return j;
}

inline PreferenceRecord record_from_json(const nlohmann::json& j) {
    PreferenceRecord r;
    r.source = j.at("source").get<std::string>();
    r.query = j.at("query").get<std::string>();
    r.response_1 = j.at("response_1").get<std::string>();
    r.response_2 = j.at("response_2").get<std::string>();
    r.human_label = verdict_from_label(j.at("human_label").get<std::string>());
    if (j.contains("language_tag") && !j.at("language_tag").is_null()) {
        r.language_tag = j.at("language_tag").get<std::string>();
    }
    r.turns = j.value("turns", 1);
    if (j.contains("scenario_id") && !j.at("scenario_id").is_null()) {
        r.scenario_id = j.at("scenario_id").get<std::string>();
    }
    return r;
}

inline nlohmann::json to_json(const TrainingExample& ex) {
    nlohmann::json j;
    j["protocol"] = std::string(example_protocol_name(ex.protocol));
    j["input"] = ex.input;
    j["output"] = ex.output;
    return j;
}

inline TrainingExample example_from_json(const nlohmann::json& j) {
    TrainingExample ex;
    ex.protocol = example_protocol_from_name(j.at("protocol").get<std::string>());
    ex.input = j.at("input").get<std::string>();
    ex.output = j.at("output").get<std::string>();
    return ex;
}

inline nlohmann::json to_json(const PairwiseItem& item) {
    nlohmann::json j;
    j["query"] = item.query;
    j["response_a"] = item.response_a;
    j["response_b"] = item.response_b;
    j["scenario_id"] = item.scenario_id;
    j["human_label"] = item.human_label
                           ? nlohmann::json(std::string(verdict_label(*item.human_label)))
                           : nlohmann::json();
    return j;
}

inline PairwiseItem pairwise_item_from_json(const nlohmann::json& j) {
    PairwiseItem item;
    item.query = j.at("query").get<std::string>();
    item.response_a = j.at("response_a").get<std::string>();
    item.response_b = j.at("response_b").get<std::string>();
    item.scenario_id = j.at("scenario_id").get<std::string>();
    if (!j.at("human_label").is_null()) {
        item.human_label = verdict_from_label(j.at("human_label").get<std::string>());
    }
    return item;
}

inline nlohmann::json to_json(const SingleItem& item) {
    nlohmann::json j;
    j["query"] = item.query;
    j["response"] = item.response;
    j["scenario_id"] = item.scenario_id;
    j["metadata"] = nlohmann::json::object();
    for (const auto& [key, value] : item.metadata) j["metadata"][key] = value;
    j["sample_index"] = item.sample_index ? nlohmann::json(*item.sample_index) : nlohmann::json();
    return j;
}

inline SingleItem single_item_from_json(const nlohmann::json& j) {
    SingleItem item;
    item.query = j.at("query").get<std::string>();
    item.response = j.at("response").get<std::string>();
    item.scenario_id = j.at("scenario_id").get<std::string>();
    for (const auto& [key, value] : j.at("metadata").items()) {
        item.metadata[key] = value.get<std::string>();
    }
    if (!j.at("sample_index").is_null()) {
        item.sample_index = j.at("sample_index").get<std::uint64_t>();
    }
    return item;
}

inline nlohmann::json to_json(const EvalRQuery& q) {
    nlohmann::json j;
    j["query"] = q.query;
    j["scenario_id"] = q.scenario_id;
    j["responses"] = q.responses;
    return j;
}

inline EvalRQuery eval_r_from_json(const nlohmann::json& j) {
    EvalRQuery q;
    q.query = j.at("query").get<std::string>();
    q.scenario_id = j.at("scenario_id").get<std::string>();
    q.responses = j.at("responses").get<std::vector<std::string>>();
    return q;
}

inline nlohmann::json to_json(const CollectedPairwise& cp) {
    nlohmann::json judgment;
    judgment["factors"] = nlohmann::json::array();
    for (const Factor& f : cp.judgment.factors) {
        judgment["factors"].push_back({{"name", f.name}, {"explanation", f.explanation}});
    }
    judgment["verdict"] = std::string(verdict_label(cp.judgment.verdict));
    judgment["remarks"] = cp.judgment.remarks;
    judgment["raw"] = cp.judgment.raw;
    nlohmann::json j;
    j["record"] = to_json(cp.record);
    j["judgment"] = judgment;
    j["status"] = std::string(collect_status_name(cp.status));
    return j;
}

inline CollectedPairwise collected_pairwise_from_json(const nlohmann::json& j) {
    CollectedPairwise cp;
    cp.record = record_from_json(j.at("record"));
    const nlohmann::json& judgment = j.at("judgment");
    for (const nlohmann::json& f : judgment.at("factors")) {
        cp.judgment.factors.push_back(
            {f.at("name").get<std::string>(), f.at("explanation").get<std::string>()});
    }
    cp.judgment.verdict = verdict_from_label(judgment.at("verdict").get<std::string>());
    cp.judgment.remarks = judgment.at("remarks").get<std::string>();
    cp.judgment.raw = judgment.at("raw").get<std::string>();
    cp.status = collect_status_from_name(j.at("status").get<std::string>());
    return cp;
}

inline nlohmann::json to_json(const CollectedSingle& cs) {
    nlohmann::json j;
    j["query"] = cs.query;
    j["response"] = cs.response;
    j["scenario_id"] = cs.scenario_id;
    j["critique_with_criteria"] = cs.critique_with_criteria;
    j["critique_plain"] = cs.critique_plain;
    j["combined"] = cs.combined;
    j["rating"] = nlohmann::json{{"num", cs.rating.numerator()}, {"den", cs.rating.denominator()}};
    return j;
}

inline CollectedSingle collected_single_from_json(const nlohmann::json& j) {
    CollectedSingle cs;
    cs.query = j.at("query").get<std::string>();
    cs.response = j.at("response").get<std::string>();
    cs.scenario_id = j.at("scenario_id").get<std::string>();
    cs.critique_with_criteria = j.at("critique_with_criteria").get<std::string>();
    cs.critique_plain = j.at("critique_plain").get<std::string>();
    cs.combined = j.at("combined").get<std::string>();
    cs.rating = Rating::from_parts(j.at("rating").at("num").get<std::int64_t>(),
                                   j.at("rating").at("den").get<std::int64_t>());
    return cs;
}

inline void write_jsonl(const std::filesystem::path& path,
                        const std::vector<nlohmann::json>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out.good()) raise(errc::data_error, "cannot write " + path.string());
    for (const nlohmann::json& row : rows) {
        out << row.dump() << '\n';
    }
    if (!out.good()) raise(errc::data_error, "short write to " + path.string());
}

inline std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in.good()) raise(errc::data_error, "cannot read " + path.string());
    std::vector<nlohmann::json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            rows.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            raise(errc::data_error,
                  path.string() + ":" + std::to_string(lineno) + " is not valid json: " + e.what());
        }
    }
    return rows;
}

}  // namespace autoj

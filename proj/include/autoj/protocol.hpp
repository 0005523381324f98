#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "autoj/detail/rng.hpp"
#include "autoj/gateway.hpp"
#include "autoj/parsing.hpp"
#include "autoj/templates.hpp"

namespace autoj {

struct PairwiseItem {
    std::string query;
    std::string response_a;
    std::string response_b;
    std::string scenario_id;
    std::optional<Verdict> human_label;  // relative to (a, b) order
};

inline Verdict map_swapped(Verdict v) {
    if (v == Verdict::response_1) return Verdict::response_2;
    if (v == Verdict::response_2) return Verdict::response_1;
    return Verdict::tie;
}

/// One direction of a swapped comparison. A missing verdict means the call
/// or the parse failed; `failure` says which.
struct DirectionResult {
    std::optional<Verdict> verdict;
    std::string raw;
    std::string failure;
};

struct SwappedRun {
    DirectionResult fwd;  // presented as (a, b)
    DirectionResult bwd;  // presented as (b, a)
    bool consistent = false;
    std::optional<Verdict> final_verdict;  // empty means Inconsistent
};

/// Pure consistency core: the forward verdict stands iff both directions
/// parsed and the backward verdict maps onto the forward one.
inline std::pair<bool, std::optional<Verdict>> resolve_swapped(std::optional<Verdict> fwd,
                                                               std::optional<Verdict> bwd) {
    bool consistent = fwd.has_value() && bwd.has_value() && *fwd == map_swapped(*bwd);
    return {consistent, consistent ? fwd : std::nullopt};
}

namespace detail {

inline GenerationRequest pairwise_request(const TemplateStore& store, const PairwiseItem& item,
                                          bool swapped) {
    const std::string& first = swapped ? item.response_b : item.response_a;
    const std::string& second = swapped ? item.response_a : item.response_b;
    GenerationRequest req;
    req.messages = store.render(TemplateId::judge_pairwise_input,
                                {{"query", item.query}, {"response_1", first}, {"response_2", second}});
    req.metadata["protocol"] = "pairwise";
    if (item.human_label) {
        Verdict presented = swapped ? map_swapped(*item.human_label) : *item.human_label;
        req.metadata["oracle_label"] = std::string(verdict_label(presented));
    }
    return req;
}

inline DirectionResult judge_one_direction(const Gateway& gateway, const BackendSpec& judge,
                                           const GenerationRequest& req) {
    DirectionResult out;
    try {
        GenerationResult result = gateway.complete(judge, req);
        out.raw = result.text;
        out.verdict = parse_pairwise_decision(result.text);
    } catch (const Error& e) {
        out.failure = e.what();
    }
    return out;
}

}  // namespace detail

/// Judges the pair twice, once per presentation order, and keeps the verdict
/// only when the two runs agree under the swap map. Backend or parse trouble
/// in a direction is recorded there and makes the run inconsistent instead
/// of aborting it.
inline SwappedRun judge_pairwise_swapped(const Gateway& gateway, const BackendSpec& judge,
                                         const TemplateStore& store, const PairwiseItem& item) {
    validate_backend(judge);
    SwappedRun run;
    run.fwd = detail::judge_one_direction(gateway, judge,
                                          detail::pairwise_request(store, item, /*swapped=*/false));
    run.bwd = detail::judge_one_direction(gateway, judge,
                                          detail::pairwise_request(store, item, /*swapped=*/true));
    std::tie(run.consistent, run.final_verdict) =
        resolve_swapped(run.fwd.verdict, run.bwd.verdict);
    return run;
}

struct SingleItem {
    std::string query;
    std::string response;
    std::string scenario_id;
    // Carried into the judge request; mock judges read hidden oracle keys
    // (oracle_rating) from it. Real backends never see metadata semantics.
    std::map<std::string, std::string> metadata;
    std::optional<std::uint64_t> sample_index;
};

struct SingleResult {
    std::string critique;
    Rating rating;
    std::optional<double> seq_logprob;
};

namespace detail {

inline GenerationRequest single_request(const TemplateStore& store, const SingleItem& item) {
    GenerationRequest req;
    req.messages = store.render(TemplateId::judge_single_input,
                                {{"query", item.query}, {"response", item.response}});
    req.want_score = true;
    req.metadata = item.metadata;
    req.metadata["protocol"] = "single";
    req.sample_index = item.sample_index;
    return req;
}

}  // namespace detail

/// One critique-plus-rating call. The critique is the full judgment text and
/// the rating is parsed from its marker; no marker is an item-level error.
inline SingleResult judge_single(const Gateway& gateway, const BackendSpec& judge,
                                 const TemplateStore& store, const SingleItem& item) {
    GenerationResult result = gateway.complete(judge, detail::single_request(store, item));
    SingleResult out;
    out.critique = result.text;
    out.rating = parse_rating(result.text);
    out.seq_logprob = result.seq_logprob;
    return out;
}

/// Batched judge_single with per-item error isolation.
inline std::vector<Fallible<SingleResult>> judge_single_batch(const Gateway& gateway,
                                                              const BackendSpec& judge,
                                                              const TemplateStore& store,
                                                              const std::vector<SingleItem>& items,
                                                              std::size_t max_in_flight) {
    std::vector<GenerationRequest> reqs;
    reqs.reserve(items.size());
    for (const SingleItem& item : items) reqs.push_back(detail::single_request(store, item));
    std::vector<Fallible<GenerationResult>> raw = gateway.complete_batch(judge, reqs, max_in_flight);

    std::vector<Fallible<SingleResult>> out;
    out.reserve(raw.size());
    for (const Fallible<GenerationResult>& r : raw) {
        if (!r.ok()) {
            out.push_back(Fallible<SingleResult>::failure(r.code(), r.message()));
            continue;
        }
        try {
            SingleResult s;
            s.critique = r.value().text;
            s.rating = parse_rating(s.critique);
            s.seq_logprob = r.value().seq_logprob;
            out.push_back(Fallible<SingleResult>::success(std::move(s)));
        } catch (const Error& e) {
            out.push_back(Fallible<SingleResult>::failure(e.code(), e.what()));
        }
    }
    return out;
}

enum class Tiebreak { none, logprob, index };

inline std::string_view tiebreak_name(Tiebreak t) {
    switch (t) {
        case Tiebreak::none: return "none";
        case Tiebreak::logprob: return "logprob";
        case Tiebreak::index: return "index";
    }
    return "";
}

struct BestOfNResult {
    std::size_t chosen_index = 0;
    Rating chosen_rating;
    Tiebreak tiebreak_used = Tiebreak::none;
};

/// Picks the best of the first n candidates: highest rating, then larger
/// sequence log-probability, then smallest index. The score rule only
/// applies when every rating-tied candidate has a score and one score is
/// strictly largest; otherwise the index rule fires.
inline BestOfNResult select_best_of_n(const std::vector<SingleResult>& results, std::size_t n) {
    if (results.empty() || n == 0) raise(errc::empty_candidates, "no candidates to select from");
    if (n > results.size()) {
        raise(errc::config_error, "n exceeds the candidate count");
    }

    std::vector<std::size_t> tied{0};
    for (std::size_t i = 1; i < n; ++i) {
        if (results[i].rating > results[tied.front()].rating) {
            tied = {i};
        } else if (results[i].rating == results[tied.front()].rating) {
            tied.push_back(i);
        }
    }

    BestOfNResult out;
    out.chosen_rating = results[tied.front()].rating;
    if (tied.size() == 1) {
        out.chosen_index = tied.front();
        out.tiebreak_used = Tiebreak::none;
        return out;
    }

    bool all_scored = true;
    for (std::size_t i : tied) all_scored = all_scored && results[i].seq_logprob.has_value();
    if (all_scored) {
        std::size_t best = tied.front();
        bool unique = true;
        for (std::size_t k = 1; k < tied.size(); ++k) {
            std::size_t i = tied[k];
            if (*results[i].seq_logprob > *results[best].seq_logprob) {
                best = i;
                unique = true;
            } else if (*results[i].seq_logprob == *results[best].seq_logprob) {
                unique = false;
            }
        }
        if (unique) {
            out.chosen_index = best;
            out.tiebreak_used = Tiebreak::logprob;
            return out;
        }
    }
    out.chosen_index = tied.front();
    out.tiebreak_used = Tiebreak::index;
    return out;
}

enum class DuelOutcome { win, tie, lose };

inline std::string_view duel_outcome_name(DuelOutcome o) {
    switch (o) {
        case DuelOutcome::win: return "Win";
        case DuelOutcome::tie: return "Tie";
        case DuelOutcome::lose: return "Lose";
    }
    return "";
}

struct DuelResult {
    bool presented_order_flipped = false;
    DuelChoice choice_presented = DuelChoice::neither;
    DuelOutcome outcome_ours = DuelOutcome::tie;
    std::string raw;
};

/// Pits our critique against a baseline critique of the same response. The
/// presentation order is shuffled by a fair coin from the caller's stream,
/// and the judged choice is mapped back to our side. Metadata flows into the
/// request; a caller-supplied "oracle_ours" of win/tie/lose is translated to
/// the presented-order "oracle_choice" the mock judge expects.
inline DuelResult run_feedback_duel(const Gateway& gateway, const BackendSpec& judge,
                                    const TemplateStore& store, const std::string& query,
                                    const std::string& response, const std::string& ours,
                                    const std::string& baseline, std::mt19937_64& rng,
                                    std::map<std::string, std::string> metadata = {}) {
    DuelResult out;
    out.presented_order_flipped = detail::bernoulli_half(rng);
    const std::string& first = out.presented_order_flipped ? baseline : ours;
    const std::string& second = out.presented_order_flipped ? ours : baseline;

    GenerationRequest req;
    req.messages = store.render(TemplateId::feedback_duel, {{"query", query},
                                                            {"response", response},
                                                            {"feedback_1", first},
                                                            {"feedback_2", second}});
    req.metadata = std::move(metadata);
    req.metadata["protocol"] = "duel";
    auto ours_hint = req.metadata.find("oracle_ours");
    if (ours_hint != req.metadata.end() && !req.metadata.count("oracle_choice")) {
        std::string choice = "C";
        if (ours_hint->second == "win") choice = out.presented_order_flipped ? "B" : "A";
        if (ours_hint->second == "lose") choice = out.presented_order_flipped ? "A" : "B";
        req.metadata["oracle_choice"] = choice;
    }

    GenerationResult result = gateway.complete(judge, req);
    out.raw = result.text;
    out.choice_presented = parse_duel_choice(result.text);

    if (out.choice_presented == DuelChoice::neither) {
        out.outcome_ours = DuelOutcome::tie;
    } else if (out.choice_presented == DuelChoice::first) {
        out.outcome_ours = out.presented_order_flipped ? DuelOutcome::lose : DuelOutcome::win;
    } else {
        out.outcome_ours = out.presented_order_flipped ? DuelOutcome::win : DuelOutcome::lose;
    }
    return out;
}

}  // namespace autoj

#pragma once

// Quantitative measures over judge runs: per-group agreement and consistency
// rates, duel tallies, Pearson/Spearman correlation, and system-level rank
// tables with rank deltas.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "autoj/errors.hpp"
#include "autoj/protocol.hpp"
#include "autoj/registry.hpp"

namespace autoj {

/// A swapped pairwise run together with the human preference it is scored
/// against and the scenario it came from (for group attribution).
struct LabeledRun {
    SwappedRun run;
    Verdict human_label = Verdict::tie;
    std::string scenario_id;
};

struct RateCell {
    std::int64_t agree = 0;
    std::int64_t total = 0;

    double rate() const {
        return total == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(total);
    }
};

struct AgreementSummary {
    std::map<ScenarioGroup, RateCell> per_group;
    RateCell overall;
    double consistency_rate = 0.0;
};

/// A run agrees iff it is swap-consistent and its final verdict matches the
/// human label; inconsistent runs count against both rates.
inline AgreementSummary agreement_rate(const std::vector<LabeledRun>& runs,
                                       const Registry& registry) {
    if (runs.empty()) raise(errc::empty_input, "no labeled runs to score");
    AgreementSummary summary;
    std::int64_t consistent = 0;
    for (const LabeledRun& lr : runs) {
        ScenarioGroup group = registry.group_of(lr.scenario_id);
        bool agree = lr.run.consistent && lr.run.final_verdict.has_value() &&
                     *lr.run.final_verdict == lr.human_label;
        RateCell& cell = summary.per_group[group];
        cell.total += 1;
        summary.overall.total += 1;
        if (agree) {
            cell.agree += 1;
            summary.overall.agree += 1;
        }
        if (lr.run.consistent) consistent += 1;
    }
    summary.consistency_rate =
        static_cast<double>(consistent) / static_cast<double>(summary.overall.total);
    return summary;
}

namespace detail {

inline void check_correlation_input(const std::vector<double>& x,
                                    const std::vector<double>& y) {
    if (x.size() != y.size()) {
        raise(errc::length_mismatch, "correlation inputs have different lengths");
    }
    if (x.size() < 2) raise(errc::degenerate_input, "need at least two points");
    auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double a) { return a == v.front(); });
    };
    if (constant(x) || constant(y)) {
        raise(errc::degenerate_input, "constant vector has no defined correlation");
    }
}

/// Average ranks, 1-based: tied values all receive the mean of the rank
/// positions they occupy.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
        double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mean_rank;
        i = j;
    }
    return ranks;
}

}  // namespace detail

/// Sample Pearson correlation, mean-centered two-pass form.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    detail::check_correlation_input(x, y);
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<long double>(x.size());
    my /= static_cast<long double>(y.size());
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double dx = x[i] - mx;
        long double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    long double r = sxy / std::sqrt(sxx * syy);
    return static_cast<double>(std::clamp<long double>(r, -1.0L, 1.0L));
}

/// Spearman correlation: Pearson over average-rank vectors.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    detail::check_correlation_input(x, y);
    return pearson(detail::average_ranks(x), detail::average_ranks(y));
}

/// A duel outcome attributed to the query's scenario group.
struct GroupedDuel {
    ScenarioGroup group = ScenarioGroup::nlp_tasks;
    DuelOutcome outcome = DuelOutcome::tie;
};

struct DuelCounts {
    std::int64_t win = 0;
    std::int64_t tie = 0;
    std::int64_t lose = 0;
};

struct DuelTally {
    std::map<ScenarioGroup, DuelCounts> per_group;
    DuelCounts overall;
};

inline DuelTally tally_duels(const std::vector<GroupedDuel>& duels) {
    DuelTally tally;
    for (const GroupedDuel& d : duels) {
        DuelCounts& cell = tally.per_group[d.group];
        switch (d.outcome) {
            case DuelOutcome::win:
                cell.win += 1;
                tally.overall.win += 1;
                break;
            case DuelOutcome::tie:
                cell.tie += 1;
                tally.overall.tie += 1;
                break;
            case DuelOutcome::lose:
                cell.lose += 1;
                tally.overall.lose += 1;
                break;
        }
    }
    return tally;
}

struct SystemRankRow {
    std::string system_id;
    double mean_rating = 0.0;
    double reference_value = 0.0;
    int rank_by_rating = 0;
    int rank_by_reference = 0;
    int delta = 0;  // rank_by_rating - rank_by_reference
};

struct SystemRankTable {
    std::vector<SystemRankRow> rows;
    double spearman = 0.0;
    double pearson = 0.0;
};

/// Ranks systems on both axes (rank 1 = highest value, ties share the
/// smallest applicable rank) and correlates the two value vectors. Rows come
/// back sorted by rating rank, then system id.
inline SystemRankTable system_rank_table(const std::map<std::string, double>& mean_ratings,
                                         const std::map<std::string, double>& reference) {
    if (mean_ratings.size() != reference.size()) {
        raise(errc::key_mismatch, "rating and reference tables cover different systems");
    }
    for (const auto& [id, value] : mean_ratings) {
        (void)value;
        if (!reference.count(id)) {
            raise(errc::key_mismatch, "no reference value for system '" + id + "'");
        }
    }
    if (mean_ratings.size() < 2) {
        raise(errc::degenerate_input, "need at least two systems to rank");
    }

    std::vector<double> ratings, refs;
    SystemRankTable table;
    for (const auto& [id, value] : mean_ratings) {
        SystemRankRow row;
        row.system_id = id;
        row.mean_rating = value;
        row.reference_value = reference.at(id);
        ratings.push_back(row.mean_rating);
        refs.push_back(row.reference_value);
        table.rows.push_back(std::move(row));
    }
    for (SystemRankRow& row : table.rows) {
        auto rank_of = [](const std::vector<double>& values, double v) {
            return 1 + static_cast<int>(std::count_if(values.begin(), values.end(),
                                                      [&](double o) { return o > v; }));
        };
        row.rank_by_rating = rank_of(ratings, row.mean_rating);
        row.rank_by_reference = rank_of(refs, row.reference_value);
        row.delta = row.rank_by_rating - row.rank_by_reference;
    }
    std::sort(table.rows.begin(), table.rows.end(),
              [](const SystemRankRow& a, const SystemRankRow& b) {
                  return a.rank_by_rating != b.rank_by_rating
                             ? a.rank_by_rating < b.rank_by_rating
                             : a.system_id < b.system_id;
              });
    table.spearman = spearman(ratings, refs);
    table.pearson = pearson(ratings, refs);
    return table;
}

}  // namespace autoj

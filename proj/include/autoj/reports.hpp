#pragma once

// Report assembly: typed rows grouped into sections, rendered to markdown,
// csv, or json lines with fixed numeric formatting (rates as percentages with
// one decimal, correlations with two).

#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoj/errors.hpp"
#include "autoj/metrics.hpp"
#include "autoj/registry.hpp"

namespace autoj {

enum class ReportFormat { markdown, csv, json_lines };

inline ReportFormat report_format_from_name(std::string_view name) {
    if (name == "markdown" || name == "md") return ReportFormat::markdown;
    if (name == "csv") return ReportFormat::csv;
    if (name == "json-lines" || name == "jsonl") return ReportFormat::json_lines;
    raise(errc::config_error, "not a report format: '" + std::string(name) + "'");
}

inline std::string_view report_format_name(ReportFormat format) {
    switch (format) {
        case ReportFormat::markdown: return "markdown";
        case ReportFormat::csv: return "csv";
        case ReportFormat::json_lines: return "json-lines";
    }
    return "markdown";
}

/// One table row; keys are ordered (column, rendered value) pairs. Every row
/// of a section must use the same column sequence.
struct ReportRow {
    std::string section;
    std::vector<std::pair<std::string, std::string>> keys;
};

inline std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
    std::string out = buf;
    // A tiny negative never prints as "-0.0…".
    if (out.find_first_not_of("-0.") == std::string::npos && out.front() == '-') {
        out.erase(0, 1);
    }
    return out;
}

/// Rates are reported as percentages: ×100, one decimal.
inline std::string format_rate(double rate) { return format_fixed(rate * 100.0, 1); }

inline std::string format_correlation(double r) { return format_fixed(r, 2); }

inline std::string format_signed(int value) {
    return value > 0 ? "+" + std::to_string(value) : std::to_string(value);
}

/// Per-group agreement in the fixed column order: the eight groups, then
/// Overall. Groups with no data render as "-".
inline std::vector<ReportRow> agreement_section(const AgreementSummary& summary) {
    ReportRow row;
    row.section = "agreement";
    for (ScenarioGroup g : kAllGroups) {
        auto it = summary.per_group.find(g);
        row.keys.push_back({std::string(group_abbrev(g)),
                            it == summary.per_group.end() ? "-" : format_rate(it->second.rate())});
    }
    row.keys.push_back({"Overall", format_rate(summary.overall.rate())});
    return {row};
}

inline std::vector<ReportRow> consistency_section(const AgreementSummary& summary) {
    ReportRow row;
    row.section = "consistency";
    row.keys.push_back({"Overall", format_rate(summary.consistency_rate)});
    return {row};
}

/// One row per system in rating-rank order, then a correlation row.
inline std::vector<ReportRow> system_ranking_section(const SystemRankTable& table) {
    std::vector<ReportRow> rows;
    for (const SystemRankRow& r : table.rows) {
        ReportRow row;
        row.section = "system-ranking";
        row.keys = {{"System", r.system_id},
                    {"Rating", format_fixed(r.mean_rating, 3)},
                    {"Reference", format_fixed(r.reference_value, 2)},
                    {"Rank by rating", std::to_string(r.rank_by_rating)},
                    {"Rank by reference", std::to_string(r.rank_by_reference)},
                    {"Delta", format_signed(r.delta)}};
        rows.push_back(std::move(row));
    }
    ReportRow corr;
    corr.section = "ranking-correlation";
    corr.keys = {{"Spearman", format_correlation(table.spearman)},
                 {"Pearson", format_correlation(table.pearson)}};
    rows.push_back(std::move(corr));
    return rows;
}

/// Win/tie/lose per group (groups with duels only, canonical order), then an
/// Overall row.
inline std::vector<ReportRow> duel_section(const DuelTally& tally) {
    std::vector<ReportRow> rows;
    auto make_row = [](std::string_view name, const DuelCounts& counts) {
        ReportRow row;
        row.section = "critique-duels";
        row.keys = {{"Group", std::string(name)},
                    {"Win", std::to_string(counts.win)},
                    {"Tie", std::to_string(counts.tie)},
                    {"Lose", std::to_string(counts.lose)}};
        return row;
    };
    for (ScenarioGroup g : kAllGroups) {
        auto it = tally.per_group.find(g);
        if (it == tally.per_group.end()) continue;
        rows.push_back(make_row(group_name(g), it->second));
    }
    rows.push_back(make_row("Overall", tally.overall));
    return rows;
}

/// Mean rating of the selected response per candidate-set size.
inline std::vector<ReportRow> best_of_n_section(
    const std::vector<std::pair<std::size_t, double>>& mean_rating_by_n) {
    std::vector<ReportRow> rows;
    for (const auto& [n, rating] : mean_rating_by_n) {
        ReportRow row;
        row.section = "best-of-n";
        row.keys = {{"N", std::to_string(n)}, {"Rating", format_fixed(rating, 2)}};
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace detail {

inline std::string escape_markdown_cell(std::string_view cell) {
    std::string out;
    out.reserve(cell.size());
    for (char c : cell) {
        if (c == '|') out += "\\|";
        else if (c == '\n') out += ' ';
        else out += c;
    }
    return out;
}

inline std::string escape_csv_cell(std::string_view cell) {
    if (cell.find_first_of(",\"\n") == std::string_view::npos) return std::string(cell);
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

struct ReportSection {
    std::string name;
    std::vector<std::string> columns;
    std::vector<const ReportRow*> rows;
};

inline std::vector<ReportSection> group_sections(const std::vector<ReportRow>& rows) {
    std::vector<ReportSection> sections;
    for (const ReportRow& row : rows) {
        if (row.keys.empty()) {
            raise(errc::malformed_row, "report row in section '" + row.section + "' has no columns");
        }
        ReportSection* section = nullptr;
        for (ReportSection& s : sections) {
            if (s.name == row.section) {
                section = &s;
                break;
            }
        }
        if (section == nullptr) {
            sections.push_back({row.section, {}, {}});
            section = &sections.back();
            for (const auto& [column, value] : row.keys) section->columns.push_back(column);
        } else {
            if (section->columns.size() != row.keys.size()) {
                raise(errc::malformed_row,
                      "section '" + row.section + "' rows disagree on their columns");
            }
            for (std::size_t i = 0; i < row.keys.size(); ++i) {
                if (section->columns[i] != row.keys[i].first) {
                    raise(errc::malformed_row,
                          "section '" + row.section + "' rows disagree on their columns");
                }
            }
        }
        section->rows.push_back(&row);
    }
    return sections;
}

}  // namespace detail

inline std::string emit_report(const std::vector<ReportRow>& rows, ReportFormat format) {
    std::vector<detail::ReportSection> sections = detail::group_sections(rows);
    std::string out;

    if (format == ReportFormat::json_lines) {
        for (const detail::ReportSection& section : sections) {
            for (const ReportRow* row : section.rows) {
                nlohmann::json j;
                j["section"] = row->section;
                j["columns"] = nlohmann::json::array();
                j["values"] = nlohmann::json::array();
                for (const auto& [column, value] : row->keys) {
                    j["columns"].push_back(column);
                    j["values"].push_back(value);
                }
                out += j.dump();
                out += '\n';
            }
        }
        return out;
    }

    bool first_section = true;
    for (const detail::ReportSection& section : sections) {
        if (!first_section) out += '\n';
        first_section = false;
        if (format == ReportFormat::markdown) {
            out += "## " + section.name + "\n\n|";
            for (const std::string& column : section.columns) {
                out += ' ' + detail::escape_markdown_cell(column) + " |";
            }
            out += "\n|";
            for (std::size_t i = 0; i < section.columns.size(); ++i) out += " --- |";
            out += '\n';
            for (const ReportRow* row : section.rows) {
                out += '|';
                for (const auto& [column, value] : row->keys) {
                    out += ' ' + detail::escape_markdown_cell(value) + " |";
                }
                out += '\n';
            }
        } else {
            out += "section";
            for (const std::string& column : section.columns) {
                out += ',' + detail::escape_csv_cell(column);
            }
            out += '\n';
            for (const ReportRow* row : section.rows) {
                out += detail::escape_csv_cell(row->section);
                for (const auto& [column, value] : row->keys) {
                    out += ',' + detail::escape_csv_cell(value);
                }
                out += '\n';
            }
        }
    }
    return out;
}

}  // namespace autoj

#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoj/detail/strings.hpp"
#include "autoj/errors.hpp"

namespace autoj {

enum class ScenarioGroup {
    summarization,
    exam_questions,
    code,
    rewriting,
    creative_writing,
    functional_writing,
    general_communication,
    nlp_tasks,
};

inline constexpr std::size_t kGroupCount = 8;

inline constexpr ScenarioGroup kAllGroups[kGroupCount] = {
    ScenarioGroup::summarization,       ScenarioGroup::exam_questions,
    ScenarioGroup::code,                ScenarioGroup::rewriting,
    ScenarioGroup::creative_writing,    ScenarioGroup::functional_writing,
    ScenarioGroup::general_communication, ScenarioGroup::nlp_tasks,
};

inline std::string_view group_name(ScenarioGroup g) {
    switch (g) {
        case ScenarioGroup::summarization: return "Summarization";
        case ScenarioGroup::exam_questions: return "Exam Questions";
        case ScenarioGroup::code: return "Code";
        case ScenarioGroup::rewriting: return "Rewriting";
        case ScenarioGroup::creative_writing: return "Creative Writing";
        case ScenarioGroup::functional_writing: return "Functional Writing";
        case ScenarioGroup::general_communication: return "General Communication";
        case ScenarioGroup::nlp_tasks: return "NLP Tasks";
    }
    return "";
}

/// Column headings used by the per-group report tables.
inline std::string_view group_abbrev(ScenarioGroup g) {
    switch (g) {
        case ScenarioGroup::summarization: return "Summ";
        case ScenarioGroup::exam_questions: return "Exam";
        case ScenarioGroup::code: return "Code";
        case ScenarioGroup::rewriting: return "Rewriting";
        case ScenarioGroup::creative_writing: return "Crea W";
        case ScenarioGroup::functional_writing: return "Func W";
        case ScenarioGroup::general_communication: return "Comm";
        case ScenarioGroup::nlp_tasks: return "NLP";
    }
    return "";
}

inline ScenarioGroup group_from_name(std::string_view name) {
    for (ScenarioGroup g : kAllGroups) {
        if (group_name(g) == name) return g;
    }
    raise(errc::unknown_group, "not a scenario group: '" + std::string(name) + "'");
}

enum class CriterionAspect { content, format, basic };

inline std::string_view aspect_name(CriterionAspect a) {
    switch (a) {
        case CriterionAspect::content: return "content";
        case CriterionAspect::format: return "format";
        case CriterionAspect::basic: return "basic";
    }
    return "";
}

inline CriterionAspect aspect_from_name(std::string_view name) {
    if (name == "content") return CriterionAspect::content;
    if (name == "format") return CriterionAspect::format;
    if (name == "basic") return CriterionAspect::basic;
    raise(errc::malformed_entry, "not a criterion aspect: '" + std::string(name) + "'");
}

struct Criterion {
    std::string name;
    std::string description;
    CriterionAspect aspect = CriterionAspect::content;
};

struct Scenario {
    std::string id;
    std::string description;
    ScenarioGroup group = ScenarioGroup::nlp_tasks;
};

struct CriteriaSet {
    std::string scenario_id;
    std::vector<Criterion> criteria;
};

/// The catch-all scenario id; classification falls back to it and the
/// registry refuses to load without it.
inline constexpr std::string_view kOthersScenario = "others";

class Registry {
public:
    static Registry from_json(const nlohmann::json& doc) {
        Registry reg;
        if (!doc.is_object() || !doc.contains("scenarios") || !doc.contains("criteria")) {
            raise(errc::malformed_entry, "registry document needs 'scenarios' and 'criteria'");
        }
        const auto& scenarios = doc.at("scenarios");
        if (!scenarios.is_array() || scenarios.empty()) {
            raise(errc::malformed_entry, "'scenarios' must be a non-empty list");
        }
        for (const auto& entry : scenarios) {
            if (!entry.is_object() || !entry.contains("id") || !entry.contains("description") ||
                !entry.contains("group") || !entry.at("id").is_string() ||
                !entry.at("description").is_string() || !entry.at("group").is_string()) {
                raise(errc::malformed_entry, "scenario entries need string id/description/group");
            }
            Scenario s;
            s.id = entry.at("id").get<std::string>();
            s.description = entry.at("description").get<std::string>();
            s.group = group_from_name(entry.at("group").get<std::string>());
            if (s.id.empty()) raise(errc::malformed_entry, "scenario id must be non-empty");
            if (reg.index_.count(s.id)) {
                raise(errc::duplicate_scenario_id, "scenario '" + s.id + "' appears twice");
            }
            reg.index_[s.id] = reg.scenarios_.size();
            reg.scenarios_.push_back(std::move(s));
        }
        if (!reg.index_.count(std::string(kOthersScenario))) {
            raise(errc::missing_others_scenario, "registry has no 'others' scenario");
        }

        const auto& criteria = doc.at("criteria");
        if (!criteria.is_object()) {
            raise(errc::malformed_entry, "'criteria' must map scenario ids to criterion lists");
        }
        for (const auto& [scenario_id, list] : criteria.items()) {
            if (!reg.index_.count(scenario_id)) {
                raise(errc::malformed_entry,
                      "criteria given for unknown scenario '" + scenario_id + "'");
            }
            if (!list.is_array() || list.empty()) {
                raise(errc::malformed_entry,
                      "criteria for '" + scenario_id + "' must be a non-empty list");
            }
            CriteriaSet set;
            set.scenario_id = scenario_id;
            std::set<std::string> seen_names;
            for (const auto& item : list) {
                if (!item.is_object() || !item.contains("name") || !item.contains("description") ||
                    !item.contains("aspect") || !item.at("name").is_string() ||
                    !item.at("description").is_string() || !item.at("aspect").is_string()) {
                    raise(errc::malformed_entry,
                          "criterion entries for '" + scenario_id +
                              "' need string name/description/aspect");
                }
                Criterion c;
                c.name = item.at("name").get<std::string>();
                c.description = item.at("description").get<std::string>();
                c.aspect = aspect_from_name(item.at("aspect").get<std::string>());
                if (c.name.empty() || c.description.empty()) {
                    raise(errc::malformed_entry,
                          "criterion name/description must be non-empty in '" + scenario_id + "'");
                }
                if (!seen_names.insert(c.name).second) {
                    raise(errc::malformed_entry, "criterion '" + c.name +
                                                     "' appears twice in '" + scenario_id + "'");
                }
                set.criteria.push_back(std::move(c));
            }
            reg.criteria_[scenario_id] = std::move(set);
        }
        for (const auto& s : reg.scenarios_) {
            if (!reg.criteria_.count(s.id)) {
                raise(errc::malformed_entry, "scenario '" + s.id + "' has no criteria");
            }
        }
        return reg;
    }

    static Registry load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) raise(errc::malformed_entry, "cannot open registry file: " + path.string());
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            raise(errc::malformed_entry, "registry is not valid JSON: " + std::string(e.what()));
        }
        return from_json(doc);
    }

    const std::vector<Scenario>& scenarios() const { return scenarios_; }

    bool contains(std::string_view id) const { return index_.count(std::string(id)) != 0; }

    const Scenario& scenario(std::string_view id) const {
        auto it = index_.find(std::string(id));
        if (it == index_.end()) {
            raise(errc::unknown_scenario, "no scenario '" + std::string(id) + "'");
        }
        return scenarios_[it->second];
    }

    ScenarioGroup group_of(std::string_view scenario_id) const {
        return scenario(scenario_id).group;
    }

    const CriteriaSet& criteria_for(std::string_view scenario_id) const {
        auto it = criteria_.find(std::string(scenario_id));
        if (it == criteria_.end()) {
            raise(errc::unknown_scenario,
                  "no criteria for scenario '" + std::string(scenario_id) + "'");
        }
        return it->second;
    }

    std::size_t scenario_count() const { return scenarios_.size(); }

    std::size_t group_count() const {
        std::set<ScenarioGroup> groups;
        for (const auto& s : scenarios_) groups.insert(s.group);
        return groups.size();
    }

    /// Distinct (name, description, aspect) triples across all scenarios;
    /// shared criteria (the basic block) count once.
    std::size_t distinct_criteria_count() const {
        std::set<std::tuple<std::string, std::string, CriterionAspect>> seen;
        for (const auto& [id, set] : criteria_) {
            for (const auto& c : set.criteria) {
                seen.insert({c.name, c.description, c.aspect});
            }
        }
        return seen.size();
    }

private:
    std::vector<Scenario> scenarios_;
    std::map<std::string, std::size_t> index_;
    std::map<std::string, CriteriaSet> criteria_;
};

/// Renders a criteria set as the three headed sections used by the criteria
/// system message: content, format, then basic, numbering restarting in each
/// section and empty sections omitted.
inline std::string render_criteria_block(const CriteriaSet& set) {
    if (set.criteria.empty()) {
        raise(errc::empty_criteria_set, "scenario '" + set.scenario_id + "' has no criteria");
    }
    static constexpr std::string_view headers[3] = {
        "The following are the specific criteria for this type of query, focusing on the content aspect:",
        "The following are the specific criteria for this type of query, focusing on the format aspect:",
        "The following are the basic and general criteria:",
    };
    std::string out;
    for (CriterionAspect aspect :
         {CriterionAspect::content, CriterionAspect::format, CriterionAspect::basic}) {
        std::size_t number = 0;
        for (const auto& c : set.criteria) {
            if (c.aspect != aspect) continue;
            if (number == 0) {
                if (!out.empty()) out.push_back('\n');
                out.append(headers[static_cast<int>(aspect)]);
            }
            ++number;
            out.push_back('\n');
            out.append("    ");
            out.append(std::to_string(number));
            out.append(". ");
            out.append(c.name);
            out.append(": ");
            out.append(c.description);
        }
    }
    return out;
}

/// Keeps the first `head` and last `tail` units of an over-long sequence and
/// replaces the middle with a single "..." unit. Inputs within `limit` pass
/// through untouched.
inline std::vector<std::string> truncate_middle(const std::vector<std::string>& units,
                                                std::size_t limit, std::size_t head,
                                                std::size_t tail) {
    if (limit == 0 || head + tail + 1 > limit) {
        raise(errc::invalid_budget, "head + tail + 1 must fit in limit (head=" +
                                        std::to_string(head) + ", tail=" + std::to_string(tail) +
                                        ", limit=" + std::to_string(limit) + ")");
    }
    if (units.size() <= limit) return units;
    std::vector<std::string> out;
    out.reserve(head + tail + 1);
    out.insert(out.end(), units.begin(), units.begin() + static_cast<std::ptrdiff_t>(head));
    out.emplace_back("...");
    out.insert(out.end(), units.end() - static_cast<std::ptrdiff_t>(tail), units.end());
    return out;
}

/// Truncation defaults for classifier queries: whitespace token budget with
/// one unit reserved for the ellipsis marker.
struct TruncationBudget {
    std::size_t limit = 1998;
    std::size_t head = 999;
    std::size_t tail = 998;
};

/// Applies the middle-truncation budget to free text over whitespace units.
/// Text within budget is returned verbatim (original whitespace preserved);
/// over-long text is rejoined with single spaces.
inline std::string truncate_query_text(std::string_view text, const TruncationBudget& budget) {
    std::vector<std::string> units = detail::split_whitespace(text);
    if (units.size() <= budget.limit) return std::string(text);
    std::vector<std::string> kept = truncate_middle(units, budget.limit, budget.head, budget.tail);
    return detail::join(kept, " ");
}

}  // namespace autoj

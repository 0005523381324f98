#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "autoj/detail/strings.hpp"
#include "autoj/errors.hpp"
#include "autoj/registry.hpp"

namespace autoj {

enum class Role { system, user };

inline std::string_view role_name(Role r) { return r == Role::system ? "system" : "user"; }

struct ChatMessage {
    Role role = Role::user;
    std::string content;
};

enum class TemplateId {
    criteria_system,
    teacher_pairwise,
    teacher_critique_plain,
    combine_critiques,
    baseline_pairwise,
    baseline_rating,
    feedback_duel,
    judge_pairwise_input,
    judge_single_input,
    scenario_classifier,
};

inline constexpr TemplateId kAllTemplates[] = {
    TemplateId::criteria_system,    TemplateId::teacher_pairwise,
    TemplateId::teacher_critique_plain, TemplateId::combine_critiques,
    TemplateId::baseline_pairwise,  TemplateId::baseline_rating,
    TemplateId::feedback_duel,      TemplateId::judge_pairwise_input,
    TemplateId::judge_single_input, TemplateId::scenario_classifier,
};

inline std::string_view template_name(TemplateId id) {
    switch (id) {
        case TemplateId::criteria_system: return "criteria_system";
        case TemplateId::teacher_pairwise: return "teacher_pairwise";
        case TemplateId::teacher_critique_plain: return "teacher_critique_plain";
        case TemplateId::combine_critiques: return "combine_critiques";
        case TemplateId::baseline_pairwise: return "baseline_pairwise";
        case TemplateId::baseline_rating: return "baseline_rating";
        case TemplateId::feedback_duel: return "feedback_duel";
        case TemplateId::judge_pairwise_input: return "judge_pairwise_input";
        case TemplateId::judge_single_input: return "judge_single_input";
        case TemplateId::scenario_classifier: return "scenario_classifier";
    }
    return "";
}

using Bindings = std::map<std::string, std::string>;

/// Prompt texts live in data files, one per template id, so they can be
/// diffed and golden-tested without recompiling. A file is a sequence of
/// role sections introduced by lines that are exactly "@system" or "@user";
/// a file without markers is a single user section. One trailing newline is
/// stripped at load.
class TemplateStore {
public:
    static TemplateStore load(const std::filesystem::path& dir) {
        TemplateStore store;
        for (TemplateId id : kAllTemplates) {
            std::filesystem::path file = dir / (std::string(template_name(id)) + ".txt");
            std::ifstream in(file, std::ios::binary);
            if (!in) raise(errc::config_error, "cannot open template file: " + file.string());
            std::ostringstream buf;
            buf << in.rdbuf();
            std::string text = buf.str();
            if (!text.empty() && text.back() == '\n') text.pop_back();
            store.entries_[id] = parse_sections(text, file.string());
        }
        return store;
    }

    bool has(TemplateId id) const { return entries_.count(id) != 0; }

    /// Placeholder names referenced by the template, across all sections.
    std::set<std::string> placeholders(TemplateId id) const {
        const auto& parts = entry(id);
        std::set<std::string> names;
        for (const auto& [role, text] : parts) {
            scan_placeholders(text, [&](std::string_view name) { names.insert(std::string(name)); });
        }
        return names;
    }

    /// Substitutes bindings into every section. Every referenced placeholder
    /// must be bound and every binding must be referenced; bound values are
    /// inserted verbatim and never rescanned.
    std::vector<ChatMessage> render(TemplateId id, const Bindings& bindings) const {
        const auto& parts = entry(id);
        std::set<std::string> referenced = placeholders(id);
        for (const auto& [key, value] : bindings) {
            if (!referenced.count(key)) {
                raise(errc::unknown_placeholder, "binding '" + key + "' is not referenced by " +
                                                     std::string(template_name(id)));
            }
        }
        std::vector<ChatMessage> out;
        for (const auto& [role, text] : parts) {
            out.push_back({role, substitute(text, bindings, id)});
        }
        return out;
    }

    /// Teacher-prompt variant: prepends the criteria system message built
    /// from the scenario description and rendered criteria block.
    std::vector<ChatMessage> render_with_criteria(TemplateId id, const Bindings& bindings,
                                                  const CriteriaSet& set,
                                                  const Registry& registry) const {
        if (id != TemplateId::teacher_pairwise && id != TemplateId::teacher_critique_plain &&
            id != TemplateId::combine_critiques) {
            raise(errc::config_error, "criteria system message only applies to teacher templates, got " +
                                          std::string(template_name(id)));
        }
        if (!registry.contains(set.scenario_id)) {
            raise(errc::scenario_mismatch,
                  "criteria set names unknown scenario '" + set.scenario_id + "'");
        }
        Bindings system_bindings{
            {"scenario_description", registry.scenario(set.scenario_id).description},
            {"criteria_block", render_criteria_block(set)},
        };
        std::vector<ChatMessage> out = render(TemplateId::criteria_system, system_bindings);
        std::vector<ChatMessage> user = render(id, bindings);
        out.insert(out.end(), user.begin(), user.end());
        return out;
    }

private:
    using Sections = std::vector<std::pair<Role, std::string>>;

    const Sections& entry(TemplateId id) const {
        auto it = entries_.find(id);
        if (it == entries_.end()) {
            raise(errc::unknown_template, "template not loaded: " + std::string(template_name(id)));
        }
        return it->second;
    }

    static Sections parse_sections(std::string_view text, const std::string& origin) {
        Sections sections;
        std::vector<std::string_view> lines = detail::split_lines(text);
        std::size_t i = 0;
        auto is_marker = [](std::string_view line) { return line == "@system" || line == "@user"; };
        if (lines.empty() || !is_marker(lines[0])) {
            if (detail::trim(text).empty()) {
                raise(errc::config_error, "template file is empty: " + origin);
            }
            sections.push_back({Role::user, std::string(text)});
            return sections;
        }
        while (i < lines.size()) {
            Role role = lines[i] == "@system" ? Role::system : Role::user;
            ++i;
            std::string body;
            bool first = true;
            while (i < lines.size() && !is_marker(lines[i])) {
                if (!first) body.push_back('\n');
                body.append(lines[i]);
                first = false;
                ++i;
            }
            if (detail::trim(body).empty()) {
                raise(errc::config_error, "empty template section in " + origin);
            }
            sections.push_back({role, std::move(body)});
        }
        return sections;
    }

    template <typename Fn>
    static void scan_placeholders(std::string_view text, Fn&& fn) {
        std::size_t i = 0;
        while (i < text.size()) {
            if (text[i] != '{') {
                ++i;
                continue;
            }
            std::size_t close = text.find('}', i + 1);
            if (close == std::string_view::npos) break;
            std::string_view name = text.substr(i + 1, close - i - 1);
            if (is_placeholder_name(name)) {
                fn(name);
                i = close + 1;
            } else {
                ++i;
            }
        }
    }

    static bool is_placeholder_name(std::string_view name) {
        if (name.empty()) return false;
        for (char c : name) {
            if (!(c == '_' || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))) return false;
        }
        return true;
    }

    std::string substitute(std::string_view text, const Bindings& bindings, TemplateId id) const {
        std::string out;
        out.reserve(text.size());
        std::size_t i = 0;
        while (i < text.size()) {
            if (text[i] != '{') {
                out.push_back(text[i]);
                ++i;
                continue;
            }
            std::size_t close = text.find('}', i + 1);
            std::string_view name =
                close == std::string_view::npos ? std::string_view{} : text.substr(i + 1, close - i - 1);
            if (!is_placeholder_name(name)) {
                out.push_back(text[i]);
                ++i;
                continue;
            }
            auto it = bindings.find(std::string(name));
            if (it == bindings.end()) {
                raise(errc::missing_placeholder, "no binding for '" + std::string(name) + "' in " +
                                                     std::string(template_name(id)));
            }
            out.append(it->second);
            i = close + 1;
        }
        return out;
    }

    std::map<TemplateId, Sections> entries_;
};

/// Classifier prompt over a (possibly truncated) query. The prompt is the
/// classifier template verbatim with the query substituted; over-budget
/// queries are middle-truncated on whitespace units first.
inline std::string build_classifier_prompt(const TemplateStore& store, std::string_view query,
                                           const TruncationBudget& budget = {}) {
    if (detail::trim(query).empty()) {
        raise(errc::empty_query, "classifier query is empty");
    }
    Bindings bindings{{"query", truncate_query_text(query, budget)}};
    std::vector<ChatMessage> messages = store.render(TemplateId::scenario_classifier, bindings);
    return messages.front().content;
}

}  // namespace autoj

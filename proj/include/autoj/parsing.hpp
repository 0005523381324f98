#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "autoj/detail/strings.hpp"
#include "autoj/errors.hpp"

namespace autoj {

enum class Verdict { response_1, response_2, tie };

inline std::string_view verdict_label(Verdict v) {
    switch (v) {
        case Verdict::response_1: return "Response 1";
        case Verdict::response_2: return "Response 2";
        case Verdict::tie: return "Tie";
    }
    return "";
}

inline Verdict verdict_from_label(std::string_view label) {
    if (label == "Response 1") return Verdict::response_1;
    if (label == "Response 2") return Verdict::response_2;
    if (label == "Tie") return Verdict::tie;
    raise(errc::data_error, "not a verdict label: '" + std::string(label) + "'");
}

enum class ABVerdict { a, b, c };
enum class DuelChoice { first, second, neither };

namespace detail {

/// Decimal parse without range policy; nullopt for anything that is not a
/// plain (optionally signed) decimal number that fits in 64 bits.
inline std::optional<std::pair<std::int64_t, std::int64_t>> parse_decimal(std::string_view text) {
    text = trim(text);
    if (text.empty()) return std::nullopt;
    bool negative = false;
    std::size_t i = 0;
    if (text[0] == '+' || text[0] == '-') {
        negative = text[0] == '-';
        i = 1;
    }
    std::int64_t num = 0;
    std::int64_t den = 1;
    bool any_digit = false;
    bool seen_dot = false;
    for (; i < text.size(); ++i) {
        char c = text[i];
        if (c == '.') {
            if (seen_dot) return std::nullopt;
            seen_dot = true;
            continue;
        }
        if (c < '0' || c > '9') return std::nullopt;
        if (num > (std::numeric_limits<std::int64_t>::max() - 9) / 10) return std::nullopt;
        num = num * 10 + (c - '0');
        if (seen_dot) {
            if (den > std::numeric_limits<std::int64_t>::max() / 10) return std::nullopt;
            den *= 10;
        }
        any_digit = true;
    }
    if (!any_digit) return std::nullopt;
    if (negative) num = -num;
    return std::make_pair(num, den);
}

}  // namespace detail

/// Exact rational rating in [1, 10]. Judges emit decimal scores (including
/// halves like 5.5), and exact arithmetic keeps best-of-N tie detection and
/// averaging deterministic.
class Rating {
public:
    Rating() = default;

    static Rating from_parts(std::int64_t num, std::int64_t den) {
        if (den == 0) raise(errc::rating_out_of_range, "zero denominator");
        if (den < 0) {
            num = -num;
            den = -den;
        }
        std::int64_t g = std::gcd(num < 0 ? -num : num, den);
        if (g > 1) {
            num /= g;
            den /= g;
        }
        Rating r;
        r.num_ = num;
        r.den_ = den;
        if (r.num_ < 1 * r.den_ || r.num_ > 10 * r.den_) {
            raise(errc::rating_out_of_range, "rating " + r.to_string() + " outside [1, 10]");
        }
        return r;
    }

    static Rating from_int(std::int64_t value) { return from_parts(value, 1); }

    std::int64_t numerator() const { return num_; }
    std::int64_t denominator() const { return den_; }
    double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    bool operator==(const Rating& o) const { return num_ == o.num_ && den_ == o.den_; }
    bool operator!=(const Rating& o) const { return !(*this == o); }
    bool operator<(const Rating& o) const { return num_ * o.den_ < o.num_ * den_; }
    bool operator<=(const Rating& o) const { return num_ * o.den_ <= o.num_ * den_; }
    bool operator>(const Rating& o) const { return o < *this; }
    bool operator>=(const Rating& o) const { return o <= *this; }

    std::string to_string() const {
        if (den_ == 1) return std::to_string(num_);
        std::string s = std::to_string(value());
        while (!s.empty() && s.back() == '0') s.pop_back();
        if (!s.empty() && s.back() == '.') s.pop_back();
        return s;
    }

private:
    std::int64_t num_ = 1;
    std::int64_t den_ = 1;
};

namespace detail {

inline bool is_word_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

struct LabelMatch {
    Verdict verdict;
    std::size_t begin = 0;
    std::size_t end = 0;
};

/// Leftmost verdict label in [from, to), matched case-insensitively on word
/// boundaries; "tied" counts as a tie.
inline std::optional<LabelMatch> first_label_in(std::string_view text, std::size_t from,
                                                std::size_t to) {
    struct Candidate {
        std::string_view token;
        Verdict verdict;
    };
    static constexpr Candidate candidates[] = {
        {"response 1", Verdict::response_1},
        {"response 2", Verdict::response_2},
        {"tied", Verdict::tie},
        {"tie", Verdict::tie},
    };
    std::optional<LabelMatch> best;
    for (const auto& cand : candidates) {
        std::size_t pos = from;
        while (pos < to) {
            pos = ifind(text, cand.token, pos);
            if (pos == std::string_view::npos || pos >= to) break;
            std::size_t end = pos + cand.token.size();
            bool left_ok = pos == 0 || !is_word_char(text[pos - 1]);
            bool right_ok = end >= text.size() || !is_word_char(text[end]);
            if (left_ok && right_ok && end <= to) {
                if (!best || pos < best->begin) best = LabelMatch{cand.verdict, pos, end};
                break;
            }
            ++pos;
        }
    }
    return best;
}

}  // namespace detail

inline constexpr std::string_view kDecisionMarker = "the final decision is";

namespace detail {

/// End (one past) of the sentence the last decision marker starts, and the
/// window in which its label must appear.
inline std::pair<std::size_t, std::size_t> decision_window(std::string_view text) {
    std::size_t marker = ifind_last(text, kDecisionMarker);
    if (marker == std::string_view::npos) {
        raise(errc::no_decision_marker, "no 'the final decision is' in judgment");
    }
    std::size_t from = marker + kDecisionMarker.size();
    std::size_t sentence_end = text.size();
    for (std::size_t i = from; i < text.size(); ++i) {
        char c = text[i];
        if (c == '.' || c == '!' || c == '?' || c == '\n') {
            sentence_end = i + 1;
            break;
        }
    }
    return {from, sentence_end};
}

}  // namespace detail

/// Reads the verdict from a pairwise judgment: the last occurrence of the
/// decision marker wins, and the verdict is the first label inside that
/// sentence. A marker whose sentence names no label is ambiguous.
inline Verdict parse_pairwise_decision(std::string_view text) {
    auto [from, sentence_end] = detail::decision_window(text);
    std::optional<detail::LabelMatch> m = detail::first_label_in(text, from, sentence_end);
    if (!m) {
        raise(errc::ambiguous_decision, "decision sentence names no response label");
    }
    return m->verdict;
}

/// Reads the rating from a critique: the last "[[x]]" whose content is a
/// decimal number. Out-of-range values are an error, never clamped.
inline Rating parse_rating(std::string_view text) {
    std::optional<std::pair<std::int64_t, std::int64_t>> last_numeric;
    std::size_t pos = 0;
    while (true) {
        std::size_t open = text.find("[[", pos);
        if (open == std::string_view::npos) break;
        std::size_t close = text.find("]]", open + 2);
        if (close == std::string_view::npos) break;
        if (auto parsed = detail::parse_decimal(text.substr(open + 2, close - open - 2))) {
            last_numeric = parsed;
        }
        pos = close + 2;
    }
    if (!last_numeric) {
        raise(errc::no_rating_marker, "no numeric [[...]] marker in critique");
    }
    return Rating::from_parts(last_numeric->first, last_numeric->second);
}

/// Reads the [[A]]/[[B]]/[[C]] verdict used by comparison baselines; the
/// last marker wins.
inline ABVerdict parse_ab_verdict(std::string_view text) {
    std::optional<ABVerdict> last;
    for (std::size_t i = 0; i + 5 <= text.size(); ++i) {
        if (text.substr(i, 2) != "[[" || text.substr(i + 3, 2) != "]]") continue;
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(text[i + 2])));
        if (c == 'A') last = ABVerdict::a;
        if (c == 'B') last = ABVerdict::b;
        if (c == 'C') last = ABVerdict::c;
    }
    if (!last) raise(errc::no_verdict_marker, "no [[A]]/[[B]]/[[C]] marker");
    return *last;
}

/// Reads a duel choice: the first line that starts (after indentation) with
/// a standalone A, B or C, optionally followed by ':' or '.'. The choice
/// letter comes first in well-formed outputs; the reason follows.
inline DuelChoice parse_duel_choice(std::string_view text) {
    for (std::string_view line : detail::split_lines(text)) {
        std::string_view t = detail::trim(line);
        if (t.empty()) continue;
        char c = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
        if (c != 'A' && c != 'B' && c != 'C') continue;
        if (t.size() > 1 && t[1] != ':' && t[1] != '.') continue;
        if (c == 'A') return DuelChoice::first;
        if (c == 'B') return DuelChoice::second;
        return DuelChoice::neither;
    }
    raise(errc::no_choice_found, "no standalone A/B/C choice line");
}

struct Factor {
    std::string name;
    std::string explanation;
};

struct ParsedPairwiseJudgment {
    std::vector<Factor> factors;
    Verdict verdict = Verdict::tie;
    std::string remarks;
    std::string raw;  // the judgment re-emitted in the unified format
};

/// Renders factors plus a decision into the unified two-part judgment
/// format. The mock judge and the reformatting step share this emitter so
/// everything downstream sees one shape.
inline std::string render_unified_judgment(const std::vector<Factor>& factors, Verdict verdict,
                                           std::string_view remarks) {
    std::string out = "1. The key factors to distinguish these two responses:\n";
    for (const auto& f : factors) {
        out.append("    - ");
        out.append(f.name);
        out.append(": ");
        out.append(f.explanation);
        out.push_back('\n');
    }
    out.append("2. The final decision:\n    So, the final decision is ");
    out.append(verdict_label(verdict));
    out.push_back('.');
    if (!remarks.empty()) {
        out.push_back(' ');
        out.append(remarks);
    }
    return out;
}

namespace detail {

inline bool looks_like_heading(std::string_view trimmed) {
    if (trimmed.empty()) return false;
    std::size_t i = 0;
    while (i < trimmed.size() && trimmed[i] >= '0' && trimmed[i] <= '9') ++i;
    return i > 0 && i < trimmed.size() && trimmed[i] == '.';
}

inline std::string collapse_whitespace(std::string_view text) {
    std::string out;
    bool in_space = false;
    for (char c : text) {
        if (is_space(c)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        out.push_back(c);
    }
    return out;
}

}  // namespace detail

/// Normalizes a raw pairwise judgment into the unified format: bullet
/// factors are collected from before the (last) decision statement, the
/// verdict and trailing remarks are re-attached, and the whole judgment is
/// re-emitted. Unified text is a fixed point.
inline ParsedPairwiseJudgment reformat_pairwise(std::string_view raw) {
    std::size_t from = 0, sentence_end = 0;
    std::optional<detail::LabelMatch> label;
    try {
        std::tie(from, sentence_end) = detail::decision_window(raw);
        label = detail::first_label_in(raw, from, sentence_end);
    } catch (const Error&) {
        raise(errc::unreformattable, "judgment has no usable decision statement");
    }
    if (!label) {
        raise(errc::unreformattable, "judgment has no usable decision statement");
    }
    std::size_t marker = detail::ifind_last(raw, kDecisionMarker);
    // Factors come from the lines before the decision line, so a "So, the
    // final decision is ..." lead-in is not mistaken for a continuation.
    std::size_t decision_line = raw.rfind('\n', marker);
    decision_line = decision_line == std::string_view::npos ? 0 : decision_line + 1;

    std::vector<Factor> factors;
    for (std::string_view line : detail::split_lines(raw.substr(0, decision_line))) {
        std::string_view t = detail::trim(line);
        if (t.size() >= 2 && t[0] == '-' && t[1] == ' ') {
            std::string_view body = t.substr(2);
            std::size_t colon = body.find(':');
            if (colon == std::string_view::npos || colon == 0) continue;
            factors.push_back({std::string(detail::trim(body.substr(0, colon))),
                               std::string(detail::trim(body.substr(colon + 1)))});
            continue;
        }
        if (!factors.empty() && !t.empty() && !detail::looks_like_heading(t)) {
            // Explanation wrapped onto a continuation line.
            Factor& prev = factors.back();
            if (!prev.explanation.empty()) prev.explanation.push_back(' ');
            prev.explanation.append(t);
        }
    }
    if (factors.empty()) {
        raise(errc::unreformattable, "judgment has no '- factor: explanation' bullets");
    }

    std::string_view tail = raw.substr(label->end);
    std::size_t skip = 0;
    while (skip < tail.size() && (tail[skip] == '.' || detail::is_space(tail[skip]))) ++skip;

    ParsedPairwiseJudgment out;
    out.factors = std::move(factors);
    out.verdict = label->verdict;
    out.remarks = detail::collapse_whitespace(tail.substr(skip));
    out.raw = render_unified_judgment(out.factors, out.verdict, out.remarks);
    return out;
}

}  // namespace autoj

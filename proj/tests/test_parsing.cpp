#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "autoj/parsing.hpp"

using namespace autoj;

namespace {

std::string read_fixture(const std::string& name) {
    std::ifstream in(std::string(AUTOJ_DATA_DIR "/fixtures/") + name, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

template <typename Fn>
errc code_of(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return errc::data_error;
}

}  // namespace

TEST_CASE("email comparison fixture resolves to the second response", "[parsing]") {
    std::string text = read_fixture("pairwise_email_judgment.txt");
    CHECK(parse_pairwise_decision(text) == Verdict::response_2);
}

TEST_CASE("salmon critique fixture rates five", "[parsing]") {
    std::string text = read_fixture("single_salmon_critique.txt");
    CHECK(parse_rating(text) == Rating::from_int(5));
}

TEST_CASE("assistant comparison fixture picks A", "[parsing]") {
    std::string text = read_fixture("ab_email_judgment.txt");
    CHECK(parse_ab_verdict(text) == ABVerdict::a);
}

TEST_CASE("decision parsing uses the last marker and the first label after it", "[parsing]") {
    CHECK(parse_pairwise_decision("So, the final decision is Response 1. On reflection, "
                                  "the final decision is Response 2.") == Verdict::response_2);
    CHECK(parse_pairwise_decision("THE FINAL DECISION IS RESPONSE 2!") == Verdict::response_2);
    CHECK(parse_pairwise_decision("the final decision is a tie") == Verdict::tie);
    CHECK(parse_pairwise_decision("the final decision is that they are tied.") == Verdict::tie);
    CHECK(parse_pairwise_decision("the final decision is Response 1, not Response 2.") ==
          Verdict::response_1);
}

TEST_CASE("decision parsing stops at the sentence boundary", "[parsing]") {
    // The label after the marker sentence must not be picked up.
    CHECK(code_of([] {
              parse_pairwise_decision("the final decision is below.\nResponse 1 wins.");
          }) == errc::ambiguous_decision);
    CHECK(code_of([] { parse_pairwise_decision("the final decision is hard to make."); }) ==
          errc::ambiguous_decision);
}

TEST_CASE("decision labels match on word boundaries", "[parsing]") {
    CHECK(code_of([] { parse_pairwise_decision("the final decision is Response 10."); }) ==
          errc::ambiguous_decision);
    CHECK(code_of([] { parse_pairwise_decision("the final decision is untied."); }) ==
          errc::ambiguous_decision);
}

TEST_CASE("missing decision marker is its own error", "[parsing]") {
    CHECK(code_of([] { parse_pairwise_decision("Response 1 is better."); }) ==
          errc::no_decision_marker);
}

TEST_CASE("rating parsing takes the last numeric marker", "[parsing]") {
    CHECK(parse_rating("Rating: [[3]] ... wait, Rating: [[7]]") == Rating::from_int(7));
    CHECK(parse_rating("Rating: [[5.5]]") == Rating::from_parts(11, 2));
    CHECK(parse_rating("[[B]] then Rating: [[4]]") == Rating::from_int(4));
    CHECK(parse_rating("Rating: [[4]] then [[B]]") == Rating::from_int(4));
    CHECK(parse_rating("[[ 10 ]]") == Rating::from_int(10));
}

TEST_CASE("rating errors are specific", "[parsing]") {
    CHECK(code_of([] { parse_rating("no marker at all"); }) == errc::no_rating_marker);
    CHECK(code_of([] { parse_rating("Rating: [[great]]"); }) == errc::no_rating_marker);
    CHECK(code_of([] { parse_rating("Rating: [[11]]"); }) == errc::rating_out_of_range);
    CHECK(code_of([] { parse_rating("Rating: [[0.5]]"); }) == errc::rating_out_of_range);
    CHECK(code_of([] { parse_rating("Rating: [[-3]]"); }) == errc::rating_out_of_range);
}

TEST_CASE("ratings are exact rationals", "[parsing]") {
    CHECK(Rating::from_parts(11, 2) > Rating::from_int(5));
    CHECK(Rating::from_parts(11, 2) < Rating::from_int(6));
    CHECK(Rating::from_parts(10, 2) == Rating::from_int(5));
    CHECK(Rating::from_parts(11, 2).to_string() == "5.5");
    CHECK(Rating::from_int(10).to_string() == "10");
    CHECK(code_of([] { Rating::from_parts(1, 0); }) == errc::rating_out_of_range);
}

TEST_CASE("comparison verdict takes the last bracketed letter", "[parsing]") {
    CHECK(parse_ab_verdict("[[A]] ... final answer: [[B]]") == ABVerdict::b);
    CHECK(parse_ab_verdict("verdict [[c]]") == ABVerdict::c);
    CHECK(code_of([] { parse_ab_verdict("[[5]] but no letter"); }) == errc::no_verdict_marker);
}

TEST_CASE("duel choice reads the first standalone letter line", "[parsing]") {
    CHECK(parse_duel_choice("A: Feedback 1 is significantly better.\nBecause ...") ==
          DuelChoice::first);
    CHECK(parse_duel_choice("B.") == DuelChoice::second);
    CHECK(parse_duel_choice("  c") == DuelChoice::neither);
    CHECK(parse_duel_choice("I think\nB: the second one.") == DuelChoice::second);
    CHECK(code_of([] { parse_duel_choice("A feedback is nice"); }) == errc::no_choice_found);
    CHECK(code_of([] { parse_duel_choice("Both are fine."); }) == errc::no_choice_found);
}

TEST_CASE("reformat normalizes the email judgment to a fixed point", "[parsing]") {
    std::string text = read_fixture("pairwise_email_judgment.txt");
    ParsedPairwiseJudgment parsed = reformat_pairwise(text);
    REQUIRE(parsed.factors.size() == 5);
    CHECK(parsed.factors[0].name == "purpose");
    CHECK(parsed.factors[4].name == "information richness");
    CHECK(parsed.verdict == Verdict::response_2);
    CHECK(parsed.raw == text);
    CHECK(reformat_pairwise(parsed.raw).raw == parsed.raw);
}

TEST_CASE("reformat keeps all six factors of the code judgment", "[parsing]") {
    std::string text = read_fixture("unified_code_judgment.txt");
    ParsedPairwiseJudgment parsed = reformat_pairwise(text);
    REQUIRE(parsed.factors.size() == 6);
    CHECK(parsed.factors[1].name == "accuracy of the solution");
    CHECK(parsed.factors[5].name == "code correctness");
    CHECK(parsed.verdict == Verdict::response_2);
    CHECK(parsed.raw == text);
}

TEST_CASE("reformat handles loosely formatted judgments", "[parsing]") {
    std::string raw =
        "Sure, here is my comparison of the two responses.\n"
        "\n"
        "- accuracy: Response 1 states the correct year\n"
        "  while Response 2 is off by a decade.\n"
        "- style: both are readable.\n"
        "\n"
        "Considering everything above, the final decision is Response 1. Good effort overall.";
    ParsedPairwiseJudgment parsed = reformat_pairwise(raw);
    REQUIRE(parsed.factors.size() == 2);
    CHECK(parsed.factors[0].name == "accuracy");
    CHECK(parsed.factors[0].explanation ==
          "Response 1 states the correct year while Response 2 is off by a decade.");
    CHECK(parsed.verdict == Verdict::response_1);
    CHECK(parsed.remarks == "Good effort overall.");
    CHECK(reformat_pairwise(parsed.raw).raw == parsed.raw);
}

TEST_CASE("reformat refuses judgments without factors or decision", "[parsing]") {
    CHECK(code_of([] { reformat_pairwise("the final decision is Response 1."); }) ==
          errc::unreformattable);
    CHECK(code_of([] { reformat_pairwise("- a: b\n- c: d\nno decision here"); }) ==
          errc::unreformattable);
    CHECK(code_of([] { reformat_pairwise("- a: b\nthe final decision is unclear."); }) ==
          errc::unreformattable);
}

TEST_CASE("unified render round-trips through reformat", "[parsing]") {
    const std::vector<std::string> words = {"clear",      "concise", "helpful", "accurate",
                                            "thorough",   "polite",  "direct",  "structured",
                                            "grounded",   "fluent"};
    std::mt19937_64 rng(7);
    for (int round = 0; round < 300; ++round) {
        std::vector<Factor> factors;
        std::size_t n = 1 + rng() % 6;
        for (std::size_t i = 0; i < n; ++i) {
            std::string name = words[rng() % words.size()] + " " + std::to_string(i);
            std::string expl = "Response " + std::to_string(1 + rng() % 2) + " is more " +
                               words[rng() % words.size()] + ".";
            factors.push_back({name, expl});
        }
        Verdict verdict = static_cast<Verdict>(rng() % 3);
        std::string remarks = rng() % 3 == 0 ? "" : "Both are " + words[rng() % words.size()] + ".";
        std::string raw = render_unified_judgment(factors, verdict, remarks);

        CHECK(parse_pairwise_decision(raw) == verdict);
        ParsedPairwiseJudgment parsed = reformat_pairwise(raw);
        REQUIRE(parsed.factors.size() == factors.size());
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(parsed.factors[i].name == factors[i].name);
            CHECK(parsed.factors[i].explanation == factors[i].explanation);
        }
        CHECK(parsed.verdict == verdict);
        CHECK(parsed.remarks == remarks);
        CHECK(parsed.raw == raw);
    }
}

TEST_CASE("parsers never crash on arbitrary text", "[parsing]") {
    std::mt19937_64 rng(99);
    const std::string alphabet =
        "ab RT12.:[]()!?\n-ResponseTiedecisionfinal[[]]the is  \t";
    for (int round = 0; round < 20000; ++round) {
        std::size_t len = rng() % 160;
        std::string text;
        text.reserve(len);
        for (std::size_t i = 0; i < len; ++i) text.push_back(alphabet[rng() % alphabet.size()]);
        auto swallow = [](auto&& fn) {
            try {
                fn();
            } catch (const Error&) {
            }
        };
        swallow([&] { parse_pairwise_decision(text); });
        swallow([&] { parse_rating(text); });
        swallow([&] { parse_ab_verdict(text); });
        swallow([&] { parse_duel_choice(text); });
        swallow([&] { reformat_pairwise(text); });
    }
}

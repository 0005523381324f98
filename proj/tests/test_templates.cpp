#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>

#include "autoj/registry.hpp"
#include "autoj/templates.hpp"

using namespace autoj;

namespace {

TemplateStore& store() {
    static TemplateStore s = TemplateStore::load(AUTOJ_DATA_DIR "/templates");
    return s;
}

Registry& registry() {
    static Registry r = Registry::load(AUTOJ_DATA_DIR "/registry.json");
    return r;
}

}  // namespace

TEST_CASE("all templates load with the expected placeholder sets", "[templates]") {
    auto expect = [&](TemplateId id, std::set<std::string> names) {
        CHECK(store().placeholders(id) == names);
    };
    expect(TemplateId::criteria_system, {"scenario_description", "criteria_block"});
    expect(TemplateId::teacher_pairwise, {"query", "response_1", "response_2"});
    expect(TemplateId::teacher_critique_plain, {"query", "response"});
    expect(TemplateId::combine_critiques, {"query", "response", "critique_1", "critique_2"});
    expect(TemplateId::baseline_pairwise, {"question", "answer_a", "answer_b"});
    expect(TemplateId::baseline_rating, {"question", "answer"});
    expect(TemplateId::feedback_duel, {"query", "response", "feedback_1", "feedback_2"});
    expect(TemplateId::judge_pairwise_input, {"query", "response_1", "response_2"});
    expect(TemplateId::judge_single_input, {"query", "response"});
    expect(TemplateId::scenario_classifier, {"query"});
}

TEST_CASE("classifier prompt golden render", "[templates]") {
    std::string prompt = build_classifier_prompt(store(), "What is the capital of France?");
    CHECK(prompt ==
          "Identify the scenario for the user's query, output 'default' if you are uncertain.\n"
          "\n"
          "Query:\n"
          "\n"
          "What is the capital of France?\n"
          "\n"
          "Scenario:");
}

TEST_CASE("classifier prompt rejects a blank query", "[templates]") {
    try {
        build_classifier_prompt(store(), "  \n\t ");
        FAIL("expected empty_query");
    } catch (const Error& e) {
        CHECK(e.code() == errc::empty_query);
    }
}

TEST_CASE("render demands exactly the referenced bindings", "[templates]") {
    try {
        store().render(TemplateId::judge_single_input, {{"query", "Q"}});
        FAIL("expected missing_placeholder");
    } catch (const Error& e) {
        CHECK(e.code() == errc::missing_placeholder);
    }
    try {
        store().render(TemplateId::judge_single_input,
                       {{"query", "Q"}, {"response", "R"}, {"tone", "warm"}});
        FAIL("expected unknown_placeholder");
    } catch (const Error& e) {
        CHECK(e.code() == errc::unknown_placeholder);
    }
}

TEST_CASE("bound values are inserted verbatim and never rescanned", "[templates]") {
    auto messages = store().render(TemplateId::judge_single_input,
                                   {{"query", "literal {response} stays"}, {"response", "R"}});
    REQUIRE(messages.size() == 1);
    CHECK(messages[0].content.find("literal {response} stays") != std::string::npos);
}

TEST_CASE("reference comparison prompt carries a system and a user message", "[templates]") {
    auto messages = store().render(
        TemplateId::baseline_pairwise,
        {{"question", "Q"}, {"answer_a", "first"}, {"answer_b", "second"}});
    REQUIRE(messages.size() == 2);
    CHECK(messages[0].role == Role::system);
    CHECK(messages[1].role == Role::user);
    CHECK(messages[1].content.find("[User Question]\nQ") != std::string::npos);
    CHECK(messages[1].content.find("first") != std::string::npos);
    CHECK(messages[1].content.find("second") != std::string::npos);
}

TEST_CASE("criteria system message is prepended for teacher prompts", "[templates]") {
    CriteriaSet set;
    set.scenario_id = "planning";
    set.criteria = {{"clarity", "Be clear.", CriterionAspect::content},
                    {"accuracy", "Be right.", CriterionAspect::basic}};
    auto messages = store().render_with_criteria(
        TemplateId::teacher_critique_plain, {{"query", "Q"}, {"response", "R"}}, set, registry());
    REQUIRE(messages.size() == 2);
    CHECK(messages[0].role == Role::system);
    std::string expected_system =
        "You are given the criteria to craft good responses for this type of query from users:\n"
        "    - " + registry().scenario("planning").description + "\n"
        "The criteria are as follows:\n"
        "[Criteria start]\n"
        "The following are the specific criteria for this type of query, focusing on the content aspect:\n"
        "    1. clarity: Be clear.\n"
        "The following are the basic and general criteria:\n"
        "    1. accuracy: Be right.\n"
        "[Criteria end]";
    CHECK(messages[0].content == expected_system);
    CHECK(messages[1].role == Role::user);
    CHECK(messages[1].content.find("Q") != std::string::npos);
}

TEST_CASE("criteria system message refuses non-teacher templates", "[templates]") {
    CriteriaSet set;
    set.scenario_id = "planning";
    set.criteria = {{"clarity", "Be clear.", CriterionAspect::content}};
    try {
        store().render_with_criteria(TemplateId::judge_pairwise_input,
                                     {{"query", "Q"}, {"response_1", "a"}, {"response_2", "b"}},
                                     set, registry());
        FAIL("expected config_error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::config_error);
    }
}

TEST_CASE("criteria system message checks the scenario against the registry", "[templates]") {
    CriteriaSet set;
    set.scenario_id = "not_a_scenario";
    set.criteria = {{"clarity", "Be clear.", CriterionAspect::content}};
    try {
        store().render_with_criteria(TemplateId::teacher_critique_plain,
                                     {{"query", "Q"}, {"response", "R"}}, set, registry());
        FAIL("expected scenario_mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == errc::scenario_mismatch);
    }
}

TEST_CASE("every placeholder slot is filled on render", "[templates]") {
    for (TemplateId id : kAllTemplates) {
        Bindings bindings;
        for (const std::string& name : store().placeholders(id)) {
            bindings[name] = "<<" + name + ">>";
        }
        auto messages = store().render(id, bindings);
        REQUIRE_FALSE(messages.empty());
        std::string all;
        for (const auto& m : messages) all += m.content;
        for (const std::string& name : store().placeholders(id)) {
            INFO("template " << template_name(id) << " placeholder " << name);
            CHECK(all.find("<<" + name + ">>") != std::string::npos);
            CHECK(all.find("{" + name + "}") == std::string::npos);
        }
    }
}

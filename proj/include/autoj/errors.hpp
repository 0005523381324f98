#pragma once

#include <stdexcept>
#include <string>

namespace autoj {

/// Failure categories surfaced by the harness. Every throwing operation
/// documents which of these it can raise; callers that need item-level
/// isolation catch autoj::Error and inspect code().
enum class errc {
    // registry
    duplicate_scenario_id,
    unknown_group,
    missing_others_scenario,
    malformed_entry,
    empty_criteria_set,
    invalid_budget,
    empty_query,
    unknown_scenario,
    // templates
    missing_placeholder,
    unknown_placeholder,
    unknown_template,
    scenario_mismatch,
    // parsing
    no_decision_marker,
    ambiguous_decision,
    no_rating_marker,
    rating_out_of_range,
    no_verdict_marker,
    no_choice_found,
    unreformattable,
    // gateway
    network_error,
    rate_limited_exhausted,
    malformed_backend_response,
    auth_error,
    missing_oracle_label,
    batch_empty,
    // protocols
    empty_candidates,
    // metrics
    empty_input,
    length_mismatch,
    degenerate_input,
    key_mismatch,
    // data pipeline
    not_pairwise,
    not_single,
    unkept_record,
    insufficient_pool,
    // reports
    malformed_row,
    // cli / config / io
    usage_error,
    config_error,
    data_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::duplicate_scenario_id: return "duplicate_scenario_id";
        case errc::unknown_group: return "unknown_group";
        case errc::missing_others_scenario: return "missing_others_scenario";
        case errc::malformed_entry: return "malformed_entry";
        case errc::empty_criteria_set: return "empty_criteria_set";
        case errc::invalid_budget: return "invalid_budget";
        case errc::empty_query: return "empty_query";
        case errc::unknown_scenario: return "unknown_scenario";
        case errc::missing_placeholder: return "missing_placeholder";
        case errc::unknown_placeholder: return "unknown_placeholder";
        case errc::unknown_template: return "unknown_template";
        case errc::scenario_mismatch: return "scenario_mismatch";
        case errc::no_decision_marker: return "no_decision_marker";
        case errc::ambiguous_decision: return "ambiguous_decision";
        case errc::no_rating_marker: return "no_rating_marker";
        case errc::rating_out_of_range: return "rating_out_of_range";
        case errc::no_verdict_marker: return "no_verdict_marker";
        case errc::no_choice_found: return "no_choice_found";
        case errc::unreformattable: return "unreformattable";
        case errc::network_error: return "network_error";
        case errc::rate_limited_exhausted: return "rate_limited_exhausted";
        case errc::malformed_backend_response: return "malformed_backend_response";
        case errc::auth_error: return "auth_error";
        case errc::missing_oracle_label: return "missing_oracle_label";
        case errc::batch_empty: return "batch_empty";
        case errc::empty_candidates: return "empty_candidates";
        case errc::empty_input: return "empty_input";
        case errc::length_mismatch: return "length_mismatch";
        case errc::degenerate_input: return "degenerate_input";
        case errc::key_mismatch: return "key_mismatch";
        case errc::not_pairwise: return "not_pairwise";
        case errc::not_single: return "not_single";
        case errc::unkept_record: return "unkept_record";
        case errc::usage_error: return "usage_error";
        case errc::config_error: return "config_error";
        case errc::data_error: return "data_error";
        case errc::insufficient_pool: return "insufficient_pool";
        case errc::malformed_row: return "malformed_row";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& message)
        : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
    throw Error(code, message);
}

}  // namespace autoj

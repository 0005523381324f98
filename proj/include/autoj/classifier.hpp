#pragma once

#include <map>
#include <string>
#include <string_view>

#include "autoj/gateway.hpp"
#include "autoj/registry.hpp"
#include "autoj/templates.hpp"

namespace autoj {

struct ClassifyResult {
    std::string scenario_id;
    bool matched = false;  // false means the fallback scenario was forced
    std::string raw_output;
};

/// Asks the backend which scenario a query belongs to. The query is
/// middle-truncated to the budget first. A trimmed output naming a known
/// scenario wins; "default" is the documented alias for the catch-all
/// scenario; anything else falls back to the catch-all with matched=false
/// so callers can log it. Extra metadata is carried into the request (mock
/// classifiers read oracle_scenario from it).
inline ClassifyResult classify_scenario(const Gateway& gateway, const BackendSpec& backend,
                                        const Registry& registry, const TemplateStore& store,
                                        std::string_view query,
                                        const TruncationBudget& budget = {},
                                        std::map<std::string, std::string> metadata = {}) {
    GenerationRequest req;
    req.messages = {{Role::user, build_classifier_prompt(store, query, budget)}};
    req.metadata = std::move(metadata);
    req.metadata["protocol"] = "classify";
    GenerationResult result = gateway.complete(backend, req);

    std::string id(detail::trim(result.text));
    if (id == "default") return {std::string(kOthersScenario), true, result.text};
    if (registry.contains(id)) return {id, true, result.text};
    return {std::string(kOthersScenario), false, result.text};
}

}  // namespace autoj

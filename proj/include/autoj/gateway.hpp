#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "autoj/detail/digest.hpp"
#include "autoj/detail/strings.hpp"
#include "autoj/errors.hpp"
#include "autoj/parsing.hpp"
#include "autoj/templates.hpp"

namespace autoj {

enum class BackendKind { http_chat, mock };

struct Sampling {
    double temperature = 0.0;
    double top_p = 1.0;
    std::int64_t max_new_units = 1024;
};

enum class MockMode { oracle, adversarial_first_position, noisy, fixed };

/// Deterministic stand-ins for a judge backend. The oracle reads the hidden
/// ground truth from request metadata and answers correctly; the adversary
/// always prefers whatever was presented first; noisy flips the oracle
/// verdict with probability p under a seeded stream; fixed echoes one text.
struct MockBehavior {
    MockMode mode = MockMode::oracle;
    double noise_p = 0.0;
    std::uint64_t noise_seed = 0;
    std::string fixed_text;

    static MockBehavior oracle() { return {}; }

    static MockBehavior adversarial_first_position() {
        MockBehavior b;
        b.mode = MockMode::adversarial_first_position;
        return b;
    }

    static MockBehavior noisy(double p, std::uint64_t seed) {
        if (p < 0.0 || p > 1.0) {
            raise(errc::config_error, "noise probability must be in [0, 1]");
        }
        MockBehavior b;
        b.mode = MockMode::noisy;
        b.noise_p = p;
        b.noise_seed = seed;
        return b;
    }

    static MockBehavior fixed(std::string text) {
        MockBehavior b;
        b.mode = MockMode::fixed;
        b.fixed_text = std::move(text);
        return b;
    }
};

struct BackendSpec {
    BackendKind kind = BackendKind::mock;
    std::string model_id = "mock-judge";
    std::string endpoint;  // http-chat only
    std::string auth_ref;  // name of the env var holding the key, never the key
    Sampling sampling;
    int max_attempts = 4;
    int backoff_base_ms = 250;
    std::optional<MockBehavior> behavior;  // mock only
};

inline BackendSpec mock_judge(const MockBehavior& behavior) {
    BackendSpec spec;
    spec.kind = BackendKind::mock;
    spec.model_id = "mock-judge";
    spec.behavior = behavior;
    return spec;
}

inline void validate_backend(const BackendSpec& spec) {
    if (spec.kind == BackendKind::http_chat && (spec.endpoint.empty() || spec.auth_ref.empty())) {
        raise(errc::config_error, "http-chat backend requires endpoint and auth_ref");
    }
    if (spec.kind == BackendKind::mock && !spec.behavior) {
        raise(errc::config_error, "mock backend requires a behavior");
    }
    const Sampling& s = spec.sampling;
    if (s.temperature < 0.0 || s.top_p <= 0.0 || s.top_p > 1.0 || s.max_new_units <= 0) {
        raise(errc::config_error, "sampling outside temperature >= 0, top_p in (0,1], max_new_units > 0");
    }
    if (spec.max_attempts < 1) raise(errc::config_error, "max_attempts must be >= 1");
}

/// Request metadata is opaque to real backends; mock judges read their
/// hidden ground truth from it (protocol, oracle_label, oracle_rating,
/// oracle_choice, oracle_scenario).
struct GenerationRequest {
    std::vector<ChatMessage> messages;
    std::optional<Sampling> sampling;
    bool want_score = false;
    std::map<std::string, std::string> metadata;
    // Distinguishes repeated draws of the same prompt at temperature > 0;
    // without it the cache would collapse all draws into one.
    std::optional<std::uint64_t> sample_index;
};

struct GenerationResult {
    std::string text;
    std::optional<double> seq_logprob;  // sum of emitted-unit log-probs, <= 0
    std::int64_t prompt_units = 0;
    std::int64_t completion_units = 0;
    bool cached = false;
};

/// Value-or-error slot for batch results, so one failed request never aborts
/// its siblings.
template <typename T>
class Fallible {
public:
    static Fallible success(T value) {
        Fallible f;
        f.value_ = std::move(value);
        return f;
    }

    static Fallible failure(errc code, std::string message) {
        Fallible f;
        f.code_ = code;
        f.message_ = std::move(message);
        return f;
    }

    bool ok() const { return value_.has_value(); }

    const T& value() const {
        if (!value_) raise(code_, message_);
        return *value_;
    }

    errc code() const { return code_; }
    const std::string& message() const { return message_; }

private:
    std::optional<T> value_;
    errc code_ = errc::data_error;
    std::string message_;
};

struct HttpResponse {
    int status = 0;  // <= 0 means the transport itself failed; body holds why
    std::string body;
};

struct HttpHeader {
    std::string name;
    std::string value;
};

/// Wire seam. The production transport speaks HTTP; tests inject stubs that
/// script statuses, bodies, and failures.
class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& endpoint, const std::vector<HttpHeader>& headers,
                              const std::string& body) = 0;
};

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// First 52 bits of the digest of `tag` over `key`, as a uniform [0,1) draw.
inline double digest_unit_interval(std::string_view tag, std::string_view key) {
    std::string hex = field_digest({tag, key});
    std::uint64_t bits = 0;
    for (int i = 0; i < 13; ++i) {
        char c = hex[static_cast<std::size_t>(i)];
        bits = bits * 16 + static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return static_cast<double>(bits) / 4503599627370496.0;  // 2^52
}

inline std::int64_t unit_count(std::string_view text) {
    return static_cast<std::int64_t>(split_whitespace(text).size());
}

}  // namespace detail

/// Digest of everything a backend sees: model, conversation, effective
/// sampling, scoring flag and the sample index. Used as the cache key; with
/// metadata folded in, it also drives mock determinism.
inline std::string request_digest(const BackendSpec& spec, const GenerationRequest& req,
                                  bool include_metadata) {
    const Sampling& s = req.sampling ? *req.sampling : spec.sampling;
    std::vector<std::string> owned;
    owned.push_back(spec.model_id);
    for (const ChatMessage& m : req.messages) {
        owned.push_back(std::string(role_name(m.role)));
        owned.push_back(m.content);
    }
    owned.push_back(detail::format_double(s.temperature));
    owned.push_back(detail::format_double(s.top_p));
    owned.push_back(std::to_string(s.max_new_units));
    owned.push_back(req.want_score ? "score" : "noscore");
    if (req.sample_index) {
        owned.push_back("sample#" + std::to_string(*req.sample_index));
    }
    if (include_metadata) {
        for (const auto& [key, value] : req.metadata) {
            owned.push_back("meta:" + key);
            owned.push_back(value);
        }
    }
    std::vector<std::string_view> views(owned.begin(), owned.end());
    return detail::field_digest(views);
}

namespace detail {

inline std::string mock_pairwise_judgment(Verdict verdict) {
    std::vector<Factor> factors = {
        {"helpfulness", "The preferred response resolves the request more completely."},
        {"clarity", "Its structure is easier to follow from start to finish."},
        {"accuracy", "No factual problems stood out during the comparison."},
    };
    return render_unified_judgment(factors, verdict, "");
}

inline std::string mock_critique(bool with_rating, std::string_view rating) {
    std::string out =
        "The response addresses the main intent of the query.\n"
        "    It stays on topic, though some points could be developed further.\n"
        "    The structure is serviceable and the tone fits the request.";
    if (with_rating) {
        out.append("\nRating: [[");
        out.append(rating);
        out.append("]]");
    }
    return out;
}

inline const std::string& require_meta(const GenerationRequest& req, const std::string& key) {
    auto it = req.metadata.find(key);
    if (it == req.metadata.end()) {
        raise(errc::missing_oracle_label, "mock judge needs metadata key '" + key + "'");
    }
    return it->second;
}

inline Verdict flip_verdict(Verdict v) {
    if (v == Verdict::response_1) return Verdict::response_2;
    if (v == Verdict::response_2) return Verdict::response_1;
    return Verdict::tie;
}

inline std::string mock_text(const MockBehavior& behavior, const GenerationRequest& req,
                             const std::string& digest) {
    if (behavior.mode == MockMode::fixed) return behavior.fixed_text;

    const std::string& protocol = require_meta(req, "protocol");
    if (protocol == "pairwise") {
        if (behavior.mode == MockMode::adversarial_first_position) {
            return mock_pairwise_judgment(Verdict::response_1);
        }
        Verdict v = verdict_from_label(require_meta(req, "oracle_label"));
        if (behavior.mode == MockMode::noisy &&
            digest_unit_interval("noise:" + std::to_string(behavior.noise_seed), digest) <
                behavior.noise_p) {
            v = flip_verdict(v);
        }
        return mock_pairwise_judgment(v);
    }
    if (protocol == "single" || protocol == "combine") {
        return mock_critique(true, require_meta(req, "oracle_rating"));
    }
    if (protocol == "critique") {
        return mock_critique(false, "");
    }
    if (protocol == "duel") {
        const std::string& choice = require_meta(req, "oracle_choice");
        if (behavior.mode == MockMode::adversarial_first_position) {
            return "A: Feedback 1 is significantly better.\nIt was presented first.";
        }
        if (choice == "A") return "A: Feedback 1 is significantly better.\nIt is more specific.";
        if (choice == "B") return "B: Feedback 2 is significantly better.\nIt is more specific.";
        return "C: Neither is significantly better.\nBoth make comparable points.";
    }
    if (protocol == "classify") {
        return require_meta(req, "oracle_scenario");
    }
    if (protocol == "generate") {
        // Plain text completion for base-model stand-ins; the digest keeps
        // distinct samples distinct and repeated runs identical.
        return "Candidate response " + digest.substr(0, 12) + " drafted for this query.";
    }
    raise(errc::missing_oracle_label, "mock judge does not know protocol '" + protocol + "'");
}

}  // namespace detail

struct GatewayOptions {
    std::filesystem::path cache_dir;  // empty disables the disk cache
    bool cache_enabled = true;
    std::shared_ptr<HttpTransport> transport;
    // Injectable so retry tests run without real sleeping.
    std::function<void(std::chrono::milliseconds)> sleeper;
    // Test seam: runs inside the worker before item i completes, letting
    // tests randomize completion interleavings and count concurrency.
    std::function<void(std::size_t)> batch_hook;
};

class Gateway {
public:
    explicit Gateway(GatewayOptions options = {}) : options_(std::move(options)) {}

    GenerationResult complete(const BackendSpec& spec, const GenerationRequest& req) const {
        validate_backend(spec);
        if (req.messages.empty()) {
            raise(errc::config_error, "generation request has no messages");
        }
        if (spec.kind == BackendKind::mock) return complete_mock(spec, req);
        return complete_http(spec, req);
    }

    /// Runs requests with at most max_in_flight outstanding at once.
    /// Results keep request order; a failed request occupies its own slot
    /// without disturbing siblings.
    std::vector<Fallible<GenerationResult>> complete_batch(const BackendSpec& spec,
                                                           const std::vector<GenerationRequest>& reqs,
                                                           std::size_t max_in_flight) const {
        if (reqs.empty()) raise(errc::batch_empty, "empty request batch");
        if (max_in_flight < 1) raise(errc::config_error, "max_in_flight must be >= 1");

        std::vector<Fallible<GenerationResult>> results(
            reqs.size(), Fallible<GenerationResult>::failure(errc::data_error, "not run"));
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= reqs.size()) return;
                try {
                    if (options_.batch_hook) options_.batch_hook(i);
                    results[i] = Fallible<GenerationResult>::success(complete(spec, reqs[i]));
                } catch (const Error& e) {
                    results[i] = Fallible<GenerationResult>::failure(e.code(), e.what());
                } catch (const std::exception& e) {
                    results[i] = Fallible<GenerationResult>::failure(errc::data_error, e.what());
                }
            }
        };

        std::size_t workers = std::min(max_in_flight, reqs.size());
        if (workers <= 1) {
            worker();
            return results;
        }
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
        return results;
    }

private:
    GenerationResult complete_mock(const BackendSpec& spec, const GenerationRequest& req) const {
        std::string digest = request_digest(spec, req, /*include_metadata=*/true);
        GenerationResult out;
        out.text = detail::mock_text(*spec.behavior, req, digest);
        out.cached = false;  // mock outputs are already deterministic
        if (req.want_score) {
            out.seq_logprob = -(0.25 + 15.0 * detail::digest_unit_interval("score", digest));
        }
        for (const ChatMessage& m : req.messages) out.prompt_units += detail::unit_count(m.content);
        out.completion_units = detail::unit_count(out.text);
        return out;
    }

    GenerationResult complete_http(const BackendSpec& spec, const GenerationRequest& req) const {
        std::string key = request_digest(spec, req, /*include_metadata=*/false);
        if (cache_on()) {
            if (std::optional<GenerationResult> hit = cache_read(key)) return *hit;
        }
        if (!options_.transport) {
            raise(errc::config_error, "http-chat backend has no transport configured");
        }

        const char* secret = std::getenv(spec.auth_ref.c_str());
        if (secret == nullptr || *secret == '\0') {
            raise(errc::auth_error, "secret source '" + spec.auth_ref + "' is not set");
        }

        const Sampling& s = req.sampling ? *req.sampling : spec.sampling;
        nlohmann::json body{
            {"model", spec.model_id},
            {"messages", nlohmann::json::array()},
            {"temperature", s.temperature},
            {"top_p", s.top_p},
            {"max_tokens", s.max_new_units},
        };
        for (const ChatMessage& m : req.messages) {
            body["messages"].push_back({{"role", std::string(role_name(m.role))}, {"content", m.content}});
        }
        if (req.want_score) body["logprobs"] = true;
        std::string payload = body.dump();
        std::vector<HttpHeader> headers{{"Authorization", std::string("Bearer ") + secret},
                                        {"Content-Type", "application/json"}};

        std::string last_failure;
        bool rate_limited = false;
        for (int attempt = 1; attempt <= spec.max_attempts; ++attempt) {
            if (attempt > 1) backoff(spec, attempt - 1);
            HttpResponse resp = options_.transport->post(spec.endpoint, headers, payload);
            if (resp.status == 401 || resp.status == 403) {
                raise(errc::auth_error, "backend rejected credentials (HTTP " +
                                            std::to_string(resp.status) + ")");
            }
            if (resp.status == 429 || resp.status >= 500 || resp.status <= 0) {
                rate_limited = resp.status == 429;
                last_failure = resp.status <= 0 ? resp.body : "HTTP " + std::to_string(resp.status);
                continue;
            }
            if (resp.status < 200 || resp.status >= 300) {
                raise(errc::network_error,
                      "backend returned HTTP " + std::to_string(resp.status));
            }
            GenerationResult out = parse_chat_response(resp.body, req.want_score);
            if (cache_on()) cache_write(key, out);
            return out;
        }
        if (rate_limited) {
            raise(errc::rate_limited_exhausted, "rate limited after " +
                                                    std::to_string(spec.max_attempts) +
                                                    " attempts: " + last_failure);
        }
        raise(errc::network_error, "backend unreachable after " +
                                       std::to_string(spec.max_attempts) +
                                       " attempts: " + last_failure);
    }

    void backoff(const BackendSpec& spec, int retries_so_far) const {
        std::int64_t ms = spec.backoff_base_ms;
        for (int i = 1; i < retries_so_far; ++i) ms *= 2;
        auto delay = std::chrono::milliseconds(ms);
        if (options_.sleeper) {
            options_.sleeper(delay);
        } else {
            std::this_thread::sleep_for(delay);
        }
    }

    static GenerationResult parse_chat_response(const std::string& body, bool want_score) {
        nlohmann::json doc = nlohmann::json::parse(body, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded()) {
            raise(errc::malformed_backend_response, "backend response is not JSON");
        }
        if (!doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty()) {
            raise(errc::malformed_backend_response, "backend response has no choices");
        }
        const nlohmann::json& choice = doc["choices"][0];
        if (!choice.contains("message") || !choice["message"].contains("content") ||
            !choice["message"]["content"].is_string()) {
            raise(errc::malformed_backend_response, "backend response has no message content");
        }
        GenerationResult out;
        out.text = choice["message"]["content"].get<std::string>();
        if (want_score && choice.contains("logprobs") && choice["logprobs"].is_object() &&
            choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
            double total = 0.0;
            for (const nlohmann::json& unit : choice["logprobs"]["content"]) {
                if (!unit.contains("logprob") || !unit["logprob"].is_number()) {
                    raise(errc::malformed_backend_response, "logprobs entry has no number");
                }
                total += unit["logprob"].get<double>();
            }
            if (total > 0.0) {
                raise(errc::malformed_backend_response, "positive sequence log-probability");
            }
            out.seq_logprob = total;
        }
        if (doc.contains("usage") && doc["usage"].is_object()) {
            out.prompt_units = doc["usage"].value("prompt_tokens", std::int64_t{0});
            out.completion_units = doc["usage"].value("completion_tokens", std::int64_t{0});
        }
        if (out.prompt_units < 0 || out.completion_units < 0) {
            raise(errc::malformed_backend_response, "negative usage counts");
        }
        out.cached = false;
        return out;
    }

    bool cache_on() const { return options_.cache_enabled && !options_.cache_dir.empty(); }

    std::filesystem::path cache_path(const std::string& key) const {
        return options_.cache_dir / (key + ".json");
    }

    std::optional<GenerationResult> cache_read(const std::string& key) const {
        std::ifstream in(cache_path(key), std::ios::binary);
        if (!in) return std::nullopt;
        nlohmann::json doc = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
        if (doc.is_discarded()) return std::nullopt;  // torn write, treat as a miss
        GenerationResult out;
        out.text = doc.value("text", std::string());
        if (doc.contains("seq_logprob") && doc["seq_logprob"].is_number()) {
            out.seq_logprob = doc["seq_logprob"].get<double>();
        }
        out.prompt_units = doc.value("prompt_units", std::int64_t{0});
        out.completion_units = doc.value("completion_units", std::int64_t{0});
        out.cached = true;
        return out;
    }

    void cache_write(const std::string& key, const GenerationResult& result) const {
        std::error_code ec;
        std::filesystem::create_directories(options_.cache_dir, ec);
        nlohmann::json doc{
            {"text", result.text},
            {"prompt_units", result.prompt_units},
            {"completion_units", result.completion_units},
        };
        if (result.seq_logprob) doc["seq_logprob"] = *result.seq_logprob;
        // Write-then-rename keeps concurrent writers last-writer-wins with
        // no torn reads; identical keys carry identical values anyway.
        std::filesystem::path final_path = cache_path(key);
        std::filesystem::path tmp =
            final_path.string() + ".tmp." +
            std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream out(tmp, std::ios::binary);
            out << doc.dump();
        }
        std::filesystem::rename(tmp, final_path, ec);
        if (ec) std::filesystem::remove(tmp, ec);
    }

    GatewayOptions options_;
};

}  // namespace autoj

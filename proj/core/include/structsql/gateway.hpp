#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "structsql/promptforge.hpp"
#include "structsql/types.hpp"

namespace structsql {

struct EndpointConfig {
    std::string base_url;     // scheme://host[:port][/prefix]
    std::string model_name;
    std::string api_key_env;  // empty: send no Authorization header
    std::size_t max_input_tokens = 15000;
    std::size_t max_output_tokens = 1500;
    double temperature = 0.0;
    std::size_t max_concurrency = 4;
    double request_timeout_s = 120.0;

    int max_attempts = 5;           // total tries for 429/5xx responses
    int backoff_initial_ms = 500;   // doubled after every retryable failure
    int backoff_max_ms = 30'000;

    // Throws Error on violated invariants.
    void validate() const;
};

struct GenerationRequest {
    std::int64_t question_id = 0;
    RenderedPrompt prompt;
    std::optional<double> temperature_override;
};

struct GenerationRecord {
    std::int64_t question_id = 0;
    PromptKind prompt_kind = PromptKind::QPCoT;
    std::string prompt;
    std::string response;
    ExtractedOutput extracted;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t latency_ms = 0;
    int attempt = 0;
    bool usage_estimated = false;                // endpoint reported no usage
    std::optional<std::string> transport_error;  // set only on failed records
};

class TransportError : public Error {
public:
    TransportError(const std::string& msg, int http_status, int attempts)
        : Error(msg), http_status_(http_status), attempts_(attempts) {}
    int http_status() const { return http_status_; }  // 0 when no HTTP response arrived
    int attempts() const { return attempts_; }

private:
    int http_status_;
    int attempts_;
};

class PromptTooLongError : public Error {
public:
    using Error::Error;
};

/// One chat-completion call (single pass). Retries 429/5xx with exponential
/// backoff up to max_attempts; other failures surface immediately as
/// TransportError. Prompts whose token estimate exceeds max_input_tokens
/// are rejected with PromptTooLongError before dispatch. A missing API key
/// env var is a configuration Error.
GenerationRecord generate(const EndpointConfig& config, const GenerationRequest& request);

struct BatchFailure {
    std::size_t index = 0;
    std::int64_t question_id = 0;
    std::string message;
};

struct BatchResult {
    // One record per request, in request order. Failed items carry
    // transport_error and an empty response.
    std::vector<GenerationRecord> records;
    std::vector<BatchFailure> failures;  // ascending index
};

// Runs up to config.max_concurrency requests at once and blocks until all
// finish. Per-item failures never abort the batch.
BatchResult generate_batch(const EndpointConfig& config, const std::vector<GenerationRequest>& requests);

// Wire helpers, exposed for testing mock endpoints.
std::string chat_request_body(const EndpointConfig& config, const GenerationRequest& request);
std::string chat_completions_path(const std::string& base_url);

}  // namespace structsql

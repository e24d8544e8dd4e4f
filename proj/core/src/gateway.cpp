#include "structsql/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace structsql {

using json = nlohmann::json;

namespace {

struct ParsedUrl {
    std::string scheme_host_port;
    std::string path_prefix;
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("endpoint base_url must include a scheme: '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl p;
    p.scheme_host_port = url.substr(0, path_start);
    if (path_start != std::string::npos) p.path_prefix = url.substr(path_start);
    while (!p.path_prefix.empty() && p.path_prefix.back() == '/') p.path_prefix.pop_back();
    return p;
}

std::string api_key(const EndpointConfig& config) {
    if (config.api_key_env.empty()) return {};
    const char* v = std::getenv(config.api_key_env.c_str());
    if (!v || !*v) throw Error("API key environment variable '" + config.api_key_env + "' is not set");
    return v;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

void EndpointConfig::validate() const {
    if (base_url.empty()) throw Error("endpoint base_url is empty");
    if (model_name.empty()) throw Error("endpoint model_name is empty");
    if (max_output_tokens > max_input_tokens) throw Error("max_output_tokens must not exceed max_input_tokens");
    if (temperature < 0) throw Error("temperature must be >= 0");
    if (max_concurrency == 0) throw Error("max_concurrency must be positive");
    if (request_timeout_s <= 0) throw Error("request_timeout_s must be positive");
    if (max_attempts < 1) throw Error("max_attempts must be >= 1");
}

std::string chat_completions_path(const std::string& base_url) {
    const auto prefix = parse_url(base_url).path_prefix;
    if (prefix.size() >= 3 && prefix.compare(prefix.size() - 3, 3, "/v1") == 0) return prefix + "/chat/completions";
    return prefix + "/v1/chat/completions";
}

std::string chat_request_body(const EndpointConfig& config, const GenerationRequest& request) {
    nlohmann::ordered_json body;
    body["model"] = config.model_name;
    body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", request.prompt.text}}});
    body["temperature"] = request.temperature_override.value_or(config.temperature);
    body["max_tokens"] = config.max_output_tokens;
    return body.dump();
}

GenerationRecord generate(const EndpointConfig& config, const GenerationRequest& request) {
    config.validate();
    const auto key = api_key(config);
    if (request.prompt.token_estimate > config.max_input_tokens)
        throw PromptTooLongError("prompt for question " + std::to_string(request.question_id) + " has ~" +
                                 std::to_string(request.prompt.token_estimate) + " tokens, limit " +
                                 std::to_string(config.max_input_tokens));

    const auto url = parse_url(config.base_url);
    const auto path = chat_completions_path(config.base_url);
    const auto body = chat_request_body(config, request);

    httplib::Client client(url.scheme_host_port);
    if (!client.is_valid()) throw Error("unsupported endpoint URL '" + config.base_url + "'");
    const auto secs = static_cast<time_t>(config.request_timeout_s);
    const auto usecs = static_cast<time_t>((config.request_timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    const auto start = std::chrono::steady_clock::now();
    int backoff = config.backoff_initial_ms;
    for (int attempt = 1;; ++attempt) {
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            throw TransportError("request for question " + std::to_string(request.question_id) +
                                     " failed: " + httplib::to_string(res.error()),
                                 0, attempt);
        }
        if (res->status == 200) {
            GenerationRecord rec;
            rec.question_id = request.question_id;
            rec.prompt_kind = request.prompt.kind;
            rec.prompt = request.prompt.text;
            rec.attempt = attempt;
            try {
                const auto j = json::parse(res->body);
                const auto& content = j.at("choices").at(0).at("message").at("content");
                rec.response = content.is_string() ? content.get<std::string>() : std::string();
                const auto usage = j.find("usage");
                if (usage != j.end() && usage->is_object() && usage->contains("completion_tokens")) {
                    rec.prompt_tokens = usage->value("prompt_tokens", std::int64_t{0});
                    rec.completion_tokens = usage->value("completion_tokens", std::int64_t{0});
                } else {
                    rec.usage_estimated = true;
                    rec.prompt_tokens = static_cast<std::int64_t>(request.prompt.token_estimate);
                    rec.completion_tokens = static_cast<std::int64_t>(estimate_tokens(rec.response));
                }
            } catch (const json::exception& e) {
                throw TransportError("malformed completion body for question " + std::to_string(request.question_id) +
                                         ": " + e.what(),
                                     res->status, attempt);
            }
            rec.extracted = extract_output(rec.prompt_kind, rec.response);
            rec.latency_ms =
                std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start)
                    .count();
            return rec;
        }
        if (!retryable(res->status) || attempt >= config.max_attempts) {
            throw TransportError("endpoint returned HTTP " + std::to_string(res->status) + " for question " +
                                     std::to_string(request.question_id) + " after " + std::to_string(attempt) +
                                     " attempt(s)",
                                 res->status, attempt);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
        backoff = std::min(config.backoff_max_ms, backoff * 2);
    }
}

BatchResult generate_batch(const EndpointConfig& config, const std::vector<GenerationRequest>& requests) {
    config.validate();
    (void)api_key(config);  // configuration errors are fatal for the whole batch

    BatchResult result;
    result.records.resize(requests.size());
    std::vector<std::optional<std::string>> errors(requests.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= requests.size()) return;
            const auto& req = requests[i];
            try {
                result.records[i] = generate(config, req);
            } catch (const Error& e) {
                GenerationRecord failed;
                failed.question_id = req.question_id;
                failed.prompt_kind = req.prompt.kind;
                failed.prompt = req.prompt.text;
                failed.extracted.note = ExtractionNote::NoSqlFound;
                failed.transport_error = e.what();
                if (const auto* te = dynamic_cast<const TransportError*>(&e)) failed.attempt = te->attempts();
                result.records[i] = std::move(failed);
                errors[i] = e.what();
            }
        }
    };

    const std::size_t n_workers = std::min(config.max_concurrency, requests.size());
    {
        std::vector<std::jthread> pool;
        pool.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < errors.size(); ++i)
        if (errors[i]) result.failures.push_back({i, requests[i].question_id, *errors[i]});
    return result;
}

}  // namespace structsql

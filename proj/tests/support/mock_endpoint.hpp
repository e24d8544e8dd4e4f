#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>

#include "structsql/types.hpp"

namespace httplib {
class Server;
}

namespace structsql::testing {

struct MockRequest {
    std::string model;
    std::string prompt;
    double temperature = 0.0;
    long long max_tokens = 0;
    std::string authorization;
    std::size_t sequence = 0;  // arrival order, from 0
};

struct MockReply {
    int status = 200;
    std::string content;
    bool with_usage = true;
    long long completion_tokens = 0;  // 0: word count of content
    int delay_ms = 0;
    std::optional<std::string> raw_body;  // sent verbatim instead of a completion
};

/// OpenAI-compatible chat-completions server on 127.0.0.1 with an
/// in-flight request gauge.
class MockEndpoint {
public:
    using Responder = std::function<MockReply(const MockRequest&)>;

    explicit MockEndpoint(Responder responder, std::size_t threads = 16);
    ~MockEndpoint();
    MockEndpoint(const MockEndpoint&) = delete;
    MockEndpoint& operator=(const MockEndpoint&) = delete;

    std::string base_url() const;
    std::size_t max_in_flight() const { return max_in_flight_.load(); }
    std::size_t requests() const { return requests_.load(); }

private:
    Responder responder_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> max_in_flight_{0};
    std::atomic<std::size_t> requests_{0};
};

// Text of the target question: the last "## User Question:" section.
std::string question_from_prompt(const std::string& prompt);

// A teacher that answers every question with its gold SQL, laid out the way
// the prompt kind expects.
MockEndpoint::Responder gold_teacher(std::map<std::string, std::string> gold_by_question, PromptKind kind);

}  // namespace structsql::testing

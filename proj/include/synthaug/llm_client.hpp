// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "synthaug/common.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

namespace synthaug {

struct ChatRequest {
    std::string model;
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    std::optional<int> max_tokens;
    /// Distinguishes repeated generations from the same prompt in the cache.
    std::size_t repetition_index = 0;

    /// Throws Error(config) on empty prompts or a temperature outside [0, 2].
    void validate() const;
};

struct ChatResponse {
    std::string raw_text;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    std::string model;
    std::chrono::milliseconds latency{0};
    bool cache_hit = false;
    std::size_t attempts = 0;
};

struct ClientPolicy {
    std::size_t max_retries = 3;
    /// Wait before retry i is backoff[min(i, size - 1)]; empty means no wait.
    std::vector<std::chrono::milliseconds> backoff{std::chrono::milliseconds(1000), std::chrono::milliseconds(2000),
                                                   std::chrono::milliseconds(4000)};
    std::size_t max_parallel = 4;
    /// Empty disables the on-disk cache.
    std::filesystem::path cache_dir;

    void validate() const;
};

/// Stable hex digest over every request field that can change the reply.
[[nodiscard]] std::string cache_key(const ChatRequest &request);

struct TokenRates {
    double input = 0.0;   ///< currency per prompt token
    double output = 0.0;  ///< currency per completion token
};

/// Σ prompt_tokens·input + completion_tokens·output. Unpriced models are an error.
[[nodiscard]] double estimate_cost(std::span<const ChatResponse> responses,
                                   const std::map<std::string, TokenRates> &price_table);

// Transports -----------------------------------------------------------------

struct TransportReply {
    int status = 0;
    std::string body;
};

/// Thrown by transports when the request never produced an HTTP status.
class NetworkFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Transport {
public:
    virtual ~Transport() = default;
    /// Sends one chat-completions request and returns the raw HTTP reply.
    virtual TransportReply send(const ChatRequest &request) = 0;
};

/// Request body in the OpenAI-compatible chat-completions shape.
[[nodiscard]] std::string encode_chat_request(const ChatRequest &request);
/// Wraps reply text in a chat-completions response body.
[[nodiscard]] std::string encode_chat_reply(std::string_view model, std::string_view content,
                                            std::size_t prompt_tokens = 0, std::size_t completion_tokens = 0);

class HttpTransport final : public Transport {
public:
    HttpTransport(std::string base_url, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(120));
    /// Reads LLM_API_KEY and LLM_API_BASE; a missing key is a credential error.
    static std::unique_ptr<HttpTransport> from_environment();

    TransportReply send(const ChatRequest &request) override;

private:
    std::string base_url_;
    std::string api_key_;
    std::chrono::seconds timeout_;
};

/// Offline backend: replies from a fixtures table keyed by cache_key, with an
/// optional deterministic fallback for requests the table does not cover.
class StubTransport final : public Transport {
public:
    enum class Fallback {
        none,    ///< uncovered requests get an empty reply (a content error)
        mirror,  ///< generation prompts get numbered rewrites of their Text: line,
                 ///< classification prompts get one of their bracketed options
    };

    explicit StubTransport(std::map<std::string, std::string> fixtures, Fallback fallback = Fallback::none);
    /// Fixtures file: a JSON object mapping cache_key -> reply text.
    static std::map<std::string, std::string> load_fixtures(const std::filesystem::path &path);

    TransportReply send(const ChatRequest &request) override;
    [[nodiscard]] static std::string mirror_reply(const ChatRequest &request);

private:
    std::map<std::string, std::string> fixtures_;
    Fallback fallback_;
};

// Client ---------------------------------------------------------------------

/// Outcome of one request inside a batch; exactly one of response/error is set.
struct CompletionResult {
    std::optional<ChatResponse> response;
    ErrorKind error_kind = ErrorKind::transport;
    std::string error;

    [[nodiscard]] bool ok() const noexcept { return response.has_value(); }
};

class ChatClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    ChatClient(std::shared_ptr<Transport> transport, ClientPolicy policy, Sleeper sleeper = {});

    /// Cache lookup, then the transport with retries. Thread-safe; at most
    /// policy.max_parallel calls are inside the transport at once.
    ChatResponse complete(const ChatRequest &request);

    /// Runs every request, up to max_parallel at a time. Results are indexed
    /// like the input regardless of completion order.
    std::vector<CompletionResult> complete_all(std::span<const ChatRequest> requests);

    [[nodiscard]] const ClientPolicy &policy() const noexcept { return policy_; }

private:
    std::optional<ChatResponse> read_cache(const std::string &key) const;
    void write_cache(const std::string &key, const ChatRequest &request, const ChatResponse &response) const;
    ChatResponse call_with_retries(const ChatRequest &request);

    std::shared_ptr<Transport> transport_;
    ClientPolicy policy_;
    Sleeper sleeper_;
    std::counting_semaphore<> in_flight_;
};

}  // namespace synthaug

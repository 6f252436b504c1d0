// SPDX-License-Identifier: Apache-2.0
#include "synthaug/llm_client.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <limits>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr std::string_view kDefaultApiBase = "https://api.openai.com/v1";

std::string truncate_for_message(std::string_view s, std::size_t limit = 500) {
    if (s.size() <= limit) {
        return std::string(s);
    }
    return fmt::format("{}... ({} bytes)", s.substr(0, limit), s.size());
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

bool retryable_status(int status) {
    return status == 408 || status == 429 || status >= 500;
}

// Pulls content and usage out of a chat-completions body. Refusals and empty
// content are content errors carrying the raw body.
ChatResponse decode_chat_reply(const std::string &body, const ChatRequest &request) {
    auto content_error = [&](std::string_view why) {
        return Error(ErrorKind::content, fmt::format("{}; raw body: {}", why, truncate_for_message(body)));
    };
    json j;
    try {
        j = json::parse(body);
    } catch (const json::parse_error &) {
        throw content_error("reply is not JSON");
    }
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
        throw content_error("reply has no choices");
    }
    const auto &choice = j["choices"][0];
    if (choice.value("finish_reason", std::string()) == "content_filter") {
        throw content_error("provider filtered the reply");
    }
    if (!choice.contains("message") || !choice["message"].is_object()) {
        throw content_error("reply has no message");
    }
    const auto &message = choice["message"];
    if (message.contains("refusal") && message["refusal"].is_string() &&
        !message["refusal"].get<std::string>().empty()) {
        throw content_error("provider refused the request");
    }
    if (!message.contains("content") || !message["content"].is_string() ||
        trim(message["content"].get<std::string>()).empty()) {
        throw content_error("reply content is empty");
    }
    ChatResponse response;
    response.raw_text = message["content"].get<std::string>();
    response.model = j.value("model", request.model);
    if (j.contains("usage") && j["usage"].is_object()) {
        response.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
        response.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
    }
    return response;
}

}  // namespace

void ChatRequest::validate() const {
    if (model.empty()) {
        throw Error(ErrorKind::config, "chat request has no model id");
    }
    if (trim(system_prompt).empty() || trim(user_prompt).empty()) {
        throw Error(ErrorKind::config, "chat request prompts must be non-empty");
    }
    if (!std::isfinite(temperature) || temperature < 0.0 || temperature > 2.0) {
        throw Error(ErrorKind::config, fmt::format("temperature {} outside [0, 2]", temperature));
    }
}

void ClientPolicy::validate() const {
    if (max_parallel < 1) {
        throw Error(ErrorKind::config, "max_parallel must be at least 1");
    }
}

std::string cache_key(const ChatRequest &request) {
    ordered_json j;
    j["model"] = request.model;
    j["system"] = request.system_prompt;
    j["user"] = request.user_prompt;
    j["temperature"] = request.temperature;
    j["max_tokens"] = request.max_tokens ? json(*request.max_tokens) : json(nullptr);
    j["repetition_index"] = request.repetition_index;
    return sha256_hex(j.dump(-1, ' ', false, json::error_handler_t::replace));
}

double estimate_cost(std::span<const ChatResponse> responses, const std::map<std::string, TokenRates> &price_table) {
    double total = 0.0;
    for (const auto &r : responses) {
        const auto it = price_table.find(r.model);
        if (it == price_table.end()) {
            throw Error(ErrorKind::config, fmt::format("no price for model '{}'", r.model));
        }
        total += static_cast<double>(r.prompt_tokens) * it->second.input +
                 static_cast<double>(r.completion_tokens) * it->second.output;
    }
    return total;
}

std::string encode_chat_request(const ChatRequest &request) {
    ordered_json j;
    j["model"] = request.model;
    j["messages"] = ordered_json::array({
        {{"role", "system"}, {"content", request.system_prompt}},
        {{"role", "user"}, {"content", request.user_prompt}},
    });
    j["temperature"] = request.temperature;
    if (request.max_tokens) {
        j["max_tokens"] = *request.max_tokens;
    }
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string encode_chat_reply(std::string_view model, std::string_view content, std::size_t prompt_tokens,
                              std::size_t completion_tokens) {
    ordered_json j;
    j["object"] = "chat.completion";
    j["model"] = model;
    j["choices"] = ordered_json::array({
        {{"index", 0},
         {"message", {{"role", "assistant"}, {"content", content}}},
         {"finish_reason", "stop"}},
    });
    j["usage"] = {{"prompt_tokens", prompt_tokens},
                  {"completion_tokens", completion_tokens},
                  {"total_tokens", prompt_tokens + completion_tokens}};
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

// HttpTransport --------------------------------------------------------------

HttpTransport::HttpTransport(std::string base_url, std::string api_key, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_(timeout) {
    while (!base_url_.empty() && base_url_.back() == '/') {
        base_url_.pop_back();
    }
}

std::unique_ptr<HttpTransport> HttpTransport::from_environment() {
    const char *key = std::getenv("LLM_API_KEY");
    if (key == nullptr || *key == '\0') {
        throw Error(ErrorKind::credential, "LLM_API_KEY is not set");
    }
    const char *base = std::getenv("LLM_API_BASE");
    return std::make_unique<HttpTransport>(base != nullptr && *base != '\0' ? base : std::string(kDefaultApiBase),
                                           key);
}

TransportReply HttpTransport::send(const ChatRequest &request) {
    // "https://host:port/v1" -> client "https://host:port", path "/v1/chat/completions"
    const auto scheme_end = base_url_.find("://");
    const auto path_start = base_url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = base_url_.substr(0, path_start);
    const std::string prefix = path_start == std::string::npos ? std::string() : base_url_.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto result = client.Post(prefix + "/chat/completions", headers, encode_chat_request(request), "application/json");
    if (!result) {
        throw NetworkFailure(fmt::format("request to {} failed: {}", origin, httplib::to_string(result.error())));
    }
    return {result->status, result->body};
}

// StubTransport --------------------------------------------------------------

StubTransport::StubTransport(std::map<std::string, std::string> fixtures, Fallback fallback)
    : fixtures_(std::move(fixtures)), fallback_(fallback) {}

std::map<std::string, std::string> StubTransport::load_fixtures(const std::filesystem::path &path) {
    try {
        return json::parse(read_file(path)).get<std::map<std::string, std::string>>();
    } catch (const json::exception &e) {
        throw Error(ErrorKind::config, fmt::format("{}: fixtures must map cache keys to strings: {}", path.string(),
                                                   e.what()));
    }
}

TransportReply StubTransport::send(const ChatRequest &request) {
    const auto it = fixtures_.find(cache_key(request));
    if (it != fixtures_.end()) {
        return {200, encode_chat_reply(request.model, it->second)};
    }
    if (fallback_ == Fallback::mirror) {
        return {200, encode_chat_reply(request.model, mirror_reply(request))};
    }
    return {200, encode_chat_reply(request.model, "")};
}

std::string StubTransport::mirror_reply(const ChatRequest &request) {
    static constexpr std::string_view kText = "Text: ";
    static constexpr std::string_view kAnswer = "\n\nAnswer:";
    const std::string &prompt = request.user_prompt;
    const auto text_at = prompt.rfind(kText);
    std::string_view instructions = prompt;
    std::string_view text = prompt;
    if (text_at != std::string::npos) {
        instructions = std::string_view(prompt).substr(0, text_at);
        text = std::string_view(prompt).substr(text_at + kText.size());
        if (text.ends_with(kAnswer)) {
            text.remove_suffix(kAnswer.size());
        }
    }
    const std::uint64_t h = fnv1a64(cache_key(request));

    // classification prompt: pick one of the bracketed quoted options
    const auto open = instructions.rfind('[');
    const auto close = instructions.rfind(']');
    if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
        std::vector<std::string_view> options;
        std::string_view list = instructions.substr(open + 1, close - open - 1);
        std::size_t pos = 0;
        while ((pos = list.find('"', pos)) != std::string_view::npos) {
            const auto end = list.find('"', pos + 1);
            if (end == std::string_view::npos) {
                break;
            }
            options.push_back(list.substr(pos + 1, end - pos - 1));
            pos = end + 1;
        }
        if (!options.empty()) {
            return std::string(options[h % options.size()]);
        }
    }

    // generation prompt: "write N ..." numbered rewrites of the text
    std::size_t count = 10;
    const std::string lowered = to_lower_ascii(instructions);
    if (const auto w = lowered.find("write "); w != std::string::npos) {
        std::size_t n = 0;
        std::size_t i = w + 6;
        while (i < lowered.size() && lowered[i] >= '0' && lowered[i] <= '9') {
            n = n * 10 + static_cast<std::size_t>(lowered[i] - '0');
            ++i;
        }
        if (n > 0) {
            count = n;
        }
    }
    std::vector<std::string_view> words;
    for (std::size_t i = 0; i < text.size();) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        const auto start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) {
            ++i;
        }
        if (i > start) {
            words.push_back(text.substr(start, i - start));
        }
    }
    static constexpr std::string_view kFiller[] = {"honestly", "today", "again", "lol", "really",
                                                   "for real", "tbh", "right now", "as usual", "again and again"};
    std::string reply;
    for (std::size_t line = 0; line < count; ++line) {
        const std::uint64_t lh = splitmix64(h + line);
        std::string rewritten;
        const std::size_t n = words.size();
        for (std::size_t k = 0; k < n; ++k) {
            if (!rewritten.empty()) {
                rewritten += ' ';
            }
            rewritten += words[(k + lh) % n];
        }
        if (!rewritten.empty()) {
            rewritten += ' ';
        }
        rewritten += kFiller[(lh >> 17) % std::size(kFiller)];
        reply += fmt::format("{}. {}\n", line + 1, rewritten);
    }
    return reply;
}

// ChatClient -----------------------------------------------------------------

ChatClient::ChatClient(std::shared_ptr<Transport> transport, ClientPolicy policy, Sleeper sleeper)
    : transport_(std::move(transport)),
      policy_(std::move(policy)),
      sleeper_(std::move(sleeper)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(policy_.max_parallel, 1))) {
    policy_.validate();
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

std::optional<ChatResponse> ChatClient::read_cache(const std::string &key) const {
    if (policy_.cache_dir.empty()) {
        return std::nullopt;
    }
    const auto path = policy_.cache_dir / (key + ".json");
    if (!std::filesystem::exists(path)) {
        return std::nullopt;
    }
    try {
        const auto j = json::parse(read_file(path));
        const auto &r = j.at("response");
        ChatResponse response;
        response.raw_text = r.at("raw_text").get<std::string>();
        response.prompt_tokens = r.at("prompt_tokens").get<std::size_t>();
        response.completion_tokens = r.at("completion_tokens").get<std::size_t>();
        response.model = r.at("model").get<std::string>();
        response.cache_hit = true;
        return response;
    } catch (const std::exception &) {
        // unreadable entry: treat as a miss, the next write replaces it
        return std::nullopt;
    }
}

void ChatClient::write_cache(const std::string &key, const ChatRequest &request, const ChatResponse &response) const {
    if (policy_.cache_dir.empty()) {
        return;
    }
    ordered_json j;
    j["request"] = {{"model", request.model},
                    {"system_prompt", request.system_prompt},
                    {"user_prompt", request.user_prompt},
                    {"temperature", request.temperature},
                    {"max_tokens", request.max_tokens ? json(*request.max_tokens) : json(nullptr)},
                    {"repetition_index", request.repetition_index}};
    j["response"] = {{"raw_text", response.raw_text},
                     {"prompt_tokens", response.prompt_tokens},
                     {"completion_tokens", response.completion_tokens},
                     {"model", response.model}};
    j["timestamp"] = utc_timestamp();
    write_file_atomic(policy_.cache_dir / (key + ".json"), j.dump(2, ' ', false, json::error_handler_t::replace));
}

ChatResponse ChatClient::call_with_retries(const ChatRequest &request) {
    std::vector<std::string> attempt_log;
    const std::size_t max_attempts = policy_.max_retries + 1;
    for (std::size_t attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1 && !policy_.backoff.empty()) {
            sleeper_(policy_.backoff[std::min(attempt - 2, policy_.backoff.size() - 1)]);
        }
        TransportReply reply;
        const auto started = std::chrono::steady_clock::now();
        try {
            in_flight_.acquire();
            try {
                reply = transport_->send(request);
            } catch (...) {
                in_flight_.release();
                throw;
            }
            in_flight_.release();
        } catch (const NetworkFailure &e) {
            attempt_log.push_back(fmt::format("attempt {}: {}", attempt, e.what()));
            continue;
        }
        const auto elapsed =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
        if (reply.status == 401 || reply.status == 403) {
            throw Error(ErrorKind::credential,
                        fmt::format("provider rejected credentials (HTTP {}): {}", reply.status,
                                    truncate_for_message(reply.body)));
        }
        if (reply.status >= 200 && reply.status < 300) {
            ChatResponse response = decode_chat_reply(reply.body, request);
            response.latency = elapsed;
            response.attempts = attempt;
            return response;
        }
        attempt_log.push_back(fmt::format("attempt {}: HTTP {}", attempt, reply.status));
        if (!retryable_status(reply.status)) {
            break;
        }
    }
    std::string log;
    for (const auto &line : attempt_log) {
        log += "\n  " + line;
    }
    throw Error(ErrorKind::transport, fmt::format("request failed after {} attempt(s):{}", attempt_log.size(), log));
}

ChatResponse ChatClient::complete(const ChatRequest &request) {
    request.validate();
    const std::string key = cache_key(request);
    if (auto cached = read_cache(key)) {
        return *cached;
    }
    ChatResponse response = call_with_retries(request);
    write_cache(key, request, response);
    return response;
}

std::vector<CompletionResult> ChatClient::complete_all(std::span<const ChatRequest> requests) {
    std::vector<CompletionResult> results(requests.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
            try {
                results[i].response = complete(requests[i]);
            } catch (const Error &e) {
                results[i].error_kind = e.kind();
                results[i].error = e.what();
            } catch (const std::exception &e) {
                results[i].error_kind = ErrorKind::transport;
                results[i].error = e.what();
            }
        }
    };
    const std::size_t n_workers = std::min(policy_.max_parallel, requests.size());
    if (n_workers <= 1) {
        worker();
        return results;
    }
    {
        std::vector<std::jthread> workers;
        workers.reserve(n_workers);
        for (std::size_t w = 0; w < n_workers; ++w) {
            workers.emplace_back(worker);
        }
    }
    return results;
}

}  // namespace synthaug

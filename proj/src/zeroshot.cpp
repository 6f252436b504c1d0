// SPDX-License-Identifier: Apache-2.0
#include "synthaug/zeroshot.hpp"

#include "synthaug/augment.hpp"
#include "synthaug/common.hpp"

#include <algorithm>

namespace synthaug {

std::string_view to_string(MatchKind kind) noexcept {
    switch (kind) {
        case MatchKind::exact: return "exact";
        case MatchKind::normalized: return "normalized";
        case MatchKind::invalid: return "invalid";
    }
    return "invalid";
}

ChatRequest render_zeroshot_prompt(std::string_view text, const TaskSchema &schema, const PromptTemplate &zeroshot,
                                   const std::string &model) {
    auto values = placeholder_values(schema, "", text);
    values.erase("label");
    values.erase("label_phrase");
    ChatRequest request;
    request.model = model;
    request.system_prompt = render_template(zeroshot.system, values);
    request.user_prompt = render_template(zeroshot.user, values);
    request.temperature = 0.0;
    return request;
}

namespace {

bool is_token_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || u >= 0x80;
}

std::vector<std::string> tokens_of(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && !is_token_char(s[i])) {
            ++i;
        }
        const auto start = i;
        while (i < s.size() && is_token_char(s[i])) {
            ++i;
        }
        if (i > start) {
            out.emplace_back(s.substr(start, i - start));
        }
    }
    return out;
}

bool is_edge_punct(char c) {
    static constexpr std::string_view kEdge = "\"'`.,;:!?()[]{}<>*";
    return kEdge.find(c) != std::string_view::npos;
}

std::string_view strip_edges(std::string_view s) {
    static constexpr std::string_view kCurly[] = {"\xE2\x80\x9C", "\xE2\x80\x9D", "\xE2\x80\x98", "\xE2\x80\x99"};
    for (bool changed = true; changed;) {
        changed = false;
        s = trim(s);
        if (!s.empty() && is_edge_punct(s.front())) {
            s.remove_prefix(1);
            changed = true;
        }
        if (!s.empty() && is_edge_punct(s.back())) {
            s.remove_suffix(1);
            changed = true;
        }
        for (const auto q : kCurly) {
            if (s.starts_with(q)) {
                s.remove_prefix(q.size());
                changed = true;
            }
            if (s.ends_with(q)) {
                s.remove_suffix(q.size());
                changed = true;
            }
        }
    }
    return s;
}

std::string normalize_answer(std::string_view s) {
    std::string out = to_lower_ascii(strip_edges(s));
    std::replace(out.begin(), out.end(), ' ', '_');
    std::replace(out.begin(), out.end(), '/', '_');
    return out;
}

}  // namespace

CoercionOutcome coerce_label(std::string_view raw, const TaskSchema &schema) {
    CoercionOutcome outcome;
    outcome.raw_reply = std::string(raw);

    const std::string answer = normalize_answer(raw);
    for (const auto &label : schema.labels) {
        if (answer == normalize_answer(label)) {
            outcome.predicted = label;
            outcome.match_kind = MatchKind::exact;
            return outcome;
        }
    }

    const bool keep_case = schema.case_significant();
    auto reply_tokens = tokens_of(raw);
    if (!keep_case) {
        for (auto &t : reply_tokens) {
            t = to_lower_ascii(t);
        }
    }
    std::vector<const std::string *> mentioned;
    for (const auto &label : schema.labels) {
        auto words = tokens_of(keep_case ? label : to_lower_ascii(label));
        if (words.empty() || words.size() > reply_tokens.size()) {
            continue;
        }
        const auto hit = std::search(reply_tokens.begin(), reply_tokens.end(), words.begin(), words.end());
        if (hit != reply_tokens.end()) {
            mentioned.push_back(&label);
        }
    }
    if (mentioned.size() == 1) {
        outcome.predicted = *mentioned.front();
        outcome.match_kind = MatchKind::normalized;
    } else {
        outcome.predicted = kInvalidLabel;
        outcome.match_kind = MatchKind::invalid;
    }
    return outcome;
}

BatchClassification classify_batch(std::span<const std::string> texts, const TaskSchema &schema, ChatClient &client,
                                   const PromptTemplate &zeroshot, const std::string &model) {
    std::vector<ChatRequest> requests;
    requests.reserve(texts.size());
    for (const auto &text : texts) {
        requests.push_back(render_zeroshot_prompt(text, schema, zeroshot, model));
    }
    const auto results = client.complete_all(requests);

    BatchClassification batch;
    batch.outcomes.reserve(texts.size());
    std::size_t invalid = 0;
    for (const auto &result : results) {
        if (result.ok()) {
            batch.responses.push_back(*result.response);
            batch.outcomes.push_back(coerce_label(result.response->raw_text, schema));
        } else {
            if (result.error_kind == ErrorKind::credential) {
                throw Error(ErrorKind::credential, result.error);
            }
            CoercionOutcome failed;
            failed.predicted = kInvalidLabel;
            failed.match_kind = MatchKind::invalid;
            failed.note = result.error;
            batch.outcomes.push_back(std::move(failed));
        }
        if (batch.outcomes.back().match_kind == MatchKind::invalid) {
            ++invalid;
        }
    }
    batch.invalid_rate = texts.empty() ? 0.0 : static_cast<double>(invalid) / static_cast<double>(texts.size());
    return batch;
}

}  // namespace synthaug

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "synthaug/corpus.hpp"
#include "synthaug/llm_client.hpp"
#include "synthaug/prompts.hpp"

#include <span>
#include <string>
#include <vector>

namespace synthaug {

enum class MatchKind { exact, normalized, invalid };

[[nodiscard]] std::string_view to_string(MatchKind kind) noexcept;

struct CoercionOutcome {
    std::string predicted;  ///< a schema label or kInvalidLabel
    std::string raw_reply;
    MatchKind match_kind = MatchKind::invalid;
    std::string note;  ///< transport error text when the request itself failed
};

/// Zero-shot request for one text, temperature 0.
[[nodiscard]] ChatRequest render_zeroshot_prompt(std::string_view text, const TaskSchema &schema,
                                                 const PromptTemplate &zeroshot, const std::string &model);

/// Maps a free-text reply onto the schema.
///
/// The reply is trimmed, stripped of quotes and punctuation at both ends,
/// lowercased, and spaces/slashes become underscores; if that equals a label
/// (compared the same way) the match is exact. Otherwise the reply is split
/// into alphanumeric tokens and a label whose words appear as a contiguous
/// token run counts as mentioned. Exactly one mentioned label is a normalized
/// match; zero or several is invalid. Schemas with upper-case labels (OFF/NOT)
/// only accept the canonical casing during the token scan.
[[nodiscard]] CoercionOutcome coerce_label(std::string_view raw, const TaskSchema &schema);

struct BatchClassification {
    std::vector<CoercionOutcome> outcomes;
    std::vector<ChatResponse> responses;
    double invalid_rate = 0.0;
};

/// One outcome per text, in input order. Failed requests become invalid
/// outcomes carrying the error in `note`.
[[nodiscard]] BatchClassification classify_batch(std::span<const std::string> texts, const TaskSchema &schema,
                                                 ChatClient &client, const PromptTemplate &zeroshot,
                                                 const std::string &model);

}  // namespace synthaug

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "synthaug/corpus.hpp"
#include "synthaug/llm_client.hpp"
#include "synthaug/prompts.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace synthaug {

enum class Strategy { proportional, balanced };

[[nodiscard]] std::string_view to_string(Strategy s) noexcept;
[[nodiscard]] std::optional<Strategy> parse_strategy(std::string_view s) noexcept;

struct AugmentationJob {
    LabeledExample seed_example;
    std::string target_label;
    double temperature = 0.0;
    std::size_t expected_yield = 10;
    std::size_t repetition_index = 0;
};

struct AugmentationPlan {
    std::vector<AugmentationJob> jobs;
    Strategy strategy = Strategy::proportional;
    std::size_t total_target = 0;

    [[nodiscard]] std::string fingerprint() const;
};

/// One temperature-0 job per base example, each asking for `factor` texts.
[[nodiscard]] AugmentationPlan plan_proportional(std::span<const LabeledExample> base, std::size_t factor = 10);

/// ceil(total_target / (k·factor)) temperature-1 jobs for each of the k schema
/// labels, seeds drawn uniformly with replacement from that label's base
/// examples. Jobs are interleaved across labels in schema order.
[[nodiscard]] AugmentationPlan plan_balanced(std::span<const LabeledExample> base, const TaskSchema &schema,
                                             std::size_t total_target, std::size_t factor, std::uint64_t seed);

/// Placeholder values for a (label, text) pair: text, label, label_phrase,
/// label_description, labels, plus the task aliases sentiment, hate_speech,
/// social_dimension and social_dimension_description.
[[nodiscard]] std::map<std::string, std::string> placeholder_values(const TaskSchema &schema,
                                                                    std::string_view label, std::string_view text);

[[nodiscard]] ChatRequest render_prompt(const AugmentationJob &job, const TaskSchema &schema,
                                        const PromptTemplate &augmentation, const std::string &model);

struct ParsedGeneration {
    std::vector<std::string> texts;
    std::size_t rejected = 0;
};

/// Splits a reply into texts: one per line, enumeration markers and wrapping
/// quotes stripped, lines under two characters rejected, at most
/// `expected_yield` kept. Blank lines are ignored without counting as rejected.
/// Throws Error(content) when nothing usable remains.
[[nodiscard]] ParsedGeneration parse_generation(std::string_view raw, std::size_t expected_yield,
                                                std::size_t max_chars = 1000);

[[nodiscard]] std::vector<std::string> default_refusal_phrases();
/// A reply of at most two non-blank lines whose first line opens with one of
/// `phrases` (case-insensitive).
[[nodiscard]] bool is_refusal(std::string_view raw, std::span<const std::string> phrases);

struct AugmentOptions {
    std::vector<std::string> refusal_phrases = default_refusal_phrases();
    double min_yield_fraction = 0.5;
    std::size_t max_text_chars = 1000;
};

struct SyntheticExample {
    LabeledExample example;
    std::size_t job_index = 0;
    std::size_t repetition_index = 0;
};

struct JobOutcome {
    std::size_t job_index = 0;
    std::string status;  ///< "ok", "refused", or an ErrorKind name
    std::size_t accepted = 0;
    std::size_t rejected = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    std::string error;
};

struct DedupReport {
    std::size_t repeated_within = 0;  ///< synthetic texts equal to an earlier synthetic text
    std::size_t equal_to_base = 0;    ///< synthetic texts equal to some base text
};

struct SyntheticDataset {
    std::vector<SyntheticExample> examples;
    std::string generator_model;
    std::string plan_fingerprint;
    std::size_t rejected_lines = 0;
    std::size_t generated = 0;  ///< usable texts before trimming
    std::vector<JobOutcome> jobs;
    std::vector<ChatResponse> responses;
    DedupReport dedup;
};

/// Trims generated examples to `total_target`. Proportional plans drop from the
/// end. Balanced plans drop from the end of each label's list so that per-label
/// counts end within one of each other and within the even share of the target.
[[nodiscard]] std::vector<SyntheticExample> trim_to_target(std::vector<SyntheticExample> generated,
                                                           Strategy strategy, std::size_t total_target,
                                                           const TaskSchema &schema);

/// Runs every job through the client, parses replies, assigns each text its
/// job's label and trims. Job-level failures are recorded and skipped; fewer
/// than min_yield_fraction·total_target usable texts is Error(shortfall).
[[nodiscard]] SyntheticDataset run_augmentation(const AugmentationPlan &plan, ChatClient &client,
                                                const TaskSchema &schema, const PromptTemplate &augmentation,
                                                const std::string &model, std::span<const LabeledExample> base,
                                                const AugmentOptions &options = {});

[[nodiscard]] std::string to_synthetic_jsonl(std::span<const SyntheticExample> examples);

}  // namespace synthaug

// SPDX-License-Identifier: Apache-2.0
#include "synthaug/augment.hpp"

#include "synthaug/common.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Strategy s) noexcept {
    return s == Strategy::proportional ? "proportional" : "balanced";
}

std::optional<Strategy> parse_strategy(std::string_view s) noexcept {
    if (s == "proportional") {
        return Strategy::proportional;
    }
    if (s == "balanced") {
        return Strategy::balanced;
    }
    return std::nullopt;
}

std::string AugmentationPlan::fingerprint() const {
    std::string canonical = fmt::format("{}|{}|{}\n", to_string(strategy), total_target, jobs.size());
    for (const auto &job : jobs) {
        canonical += fmt::format("{:016x}|{}|{}|{}|{}\n", example_identity(job.seed_example), job.target_label,
                                 job.temperature, job.expected_yield, job.repetition_index);
    }
    return sha256_hex(canonical);
}

// Planning -------------------------------------------------------------------

AugmentationPlan plan_proportional(std::span<const LabeledExample> base, std::size_t factor) {
    if (base.empty()) {
        throw Error(ErrorKind::data, "cannot plan augmentation from an empty base set");
    }
    if (factor < 1) {
        throw Error(ErrorKind::config, "augmentation factor must be at least 1");
    }
    AugmentationPlan plan;
    plan.strategy = Strategy::proportional;
    plan.total_target = base.size() * factor;
    plan.jobs.reserve(base.size());
    for (const auto &ex : base) {
        plan.jobs.push_back({ex, ex.label, 0.0, factor, 0});
    }
    return plan;
}

AugmentationPlan plan_balanced(std::span<const LabeledExample> base, const TaskSchema &schema,
                               std::size_t total_target, std::size_t factor, std::uint64_t seed) {
    if (base.empty()) {
        throw Error(ErrorKind::data, "cannot plan augmentation from an empty base set");
    }
    if (factor < 1 || total_target < 1) {
        throw Error(ErrorKind::config, "augmentation factor and target must be at least 1");
    }
    const std::size_t k = schema.labels.size();
    const std::size_t per_label = (total_target + k * factor - 1) / (k * factor);

    Rng rng(seed);
    std::vector<std::vector<std::size_t>> picks(k);
    for (std::size_t l = 0; l < k; ++l) {
        std::vector<std::size_t> candidates;
        for (std::size_t i = 0; i < base.size(); ++i) {
            if (base[i].label == schema.labels[l]) {
                candidates.push_back(i);
            }
        }
        if (candidates.empty()) {
            throw Error(ErrorKind::data,
                        fmt::format("label '{}' has no base example to seed generation", schema.labels[l]));
        }
        for (std::size_t j = 0; j < per_label; ++j) {
            picks[l].push_back(candidates[rng.below(candidates.size())]);
        }
    }

    AugmentationPlan plan;
    plan.strategy = Strategy::balanced;
    plan.total_target = total_target;
    plan.jobs.reserve(per_label * k);
    std::vector<std::size_t> uses(base.size(), 0);
    for (std::size_t j = 0; j < per_label; ++j) {
        for (std::size_t l = 0; l < k; ++l) {
            const std::size_t i = picks[l][j];
            plan.jobs.push_back({base[i], base[i].label, 1.0, factor, uses[i]++});
        }
    }
    return plan;
}

// Prompts --------------------------------------------------------------------

std::map<std::string, std::string> placeholder_values(const TaskSchema &schema, std::string_view label,
                                                      std::string_view text) {
    std::map<std::string, std::string> values;
    const std::string phrase = schema.phrase(label);
    values["text"] = text;
    values["label"] = label;
    values["label_phrase"] = phrase;
    values["sentiment"] = phrase;
    values["hate_speech"] = phrase;
    values["social_dimension"] = phrase;
    std::string labels;
    for (const auto &l : schema.labels) {
        labels += fmt::format("{}\"{}\"", labels.empty() ? "" : ", ", l);
    }
    values["labels"] = labels;
    if (const auto it = schema.descriptions.find(std::string(label)); it != schema.descriptions.end()) {
        values["label_description"] = it->second;
        values["social_dimension_description"] = it->second;
    }
    return values;
}

ChatRequest render_prompt(const AugmentationJob &job, const TaskSchema &schema, const PromptTemplate &augmentation,
                          const std::string &model) {
    const auto values = placeholder_values(schema, job.target_label, job.seed_example.text);
    ChatRequest request;
    request.model = model;
    try {
        request.system_prompt = render_template(augmentation.system, values);
        request.user_prompt = render_template(augmentation.user, values);
    } catch (const Error &e) {
        throw Error(ErrorKind::config, fmt::format("label '{}' of task '{}': {}", job.target_label, schema.task_id,
                                                   e.what()));
    }
    request.temperature = job.temperature;
    request.repetition_index = job.repetition_index;
    return request;
}

// Parsing --------------------------------------------------------------------

namespace {

constexpr std::string_view kBullet = "\xE2\x80\xA2";  // U+2022
constexpr std::string_view kLeftQuote = "\xE2\x80\x9C";
constexpr std::string_view kRightQuote = "\xE2\x80\x9D";

bool is_space(char c) {
    return c == ' ' || c == '\t';
}

std::string_view strip_marker(std::string_view line) {
    std::size_t i = 0;
    while (i < line.size() && line[i] >= '0' && line[i] <= '9') {
        ++i;
    }
    std::size_t after = 0;
    if (i > 0 && i < line.size() && (line[i] == '.' || line[i] == ')')) {
        after = i + 1;
    } else if (line.starts_with('-')) {
        after = 1;
    } else if (line.starts_with(kBullet)) {
        after = kBullet.size();
    }
    if (after > 0 && (after == line.size() || is_space(line[after]))) {
        return trim(line.substr(after));
    }
    return line;
}

std::string_view strip_quotes(std::string_view line) {
    for (;;) {
        if (line.size() >= 2 && ((line.front() == '"' && line.back() == '"') ||
                                 (line.front() == '\'' && line.back() == '\''))) {
            line = trim(line.substr(1, line.size() - 2));
        } else if (line.size() >= kLeftQuote.size() + kRightQuote.size() && line.starts_with(kLeftQuote) &&
                   line.ends_with(kRightQuote)) {
            line = trim(line.substr(kLeftQuote.size(), line.size() - kLeftQuote.size() - kRightQuote.size()));
        } else {
            return line;
        }
    }
}

// Cuts at the last whitespace before the max_chars-th code point.
std::string truncate_text(std::string_view text, std::size_t max_chars) {
    std::size_t chars = 0;
    std::size_t limit = text.size();
    for (std::size_t i = 0; i < text.size(); ++i) {
        if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) {
            if (chars == max_chars) {
                limit = i;
                break;
            }
            ++chars;
        }
    }
    if (limit == text.size()) {
        return std::string(text);
    }
    const auto space = text.substr(0, limit + 1).find_last_of(" \t");
    if (space != std::string_view::npos && space > 0) {
        return std::string(trim(text.substr(0, space)));
    }
    return std::string(text.substr(0, limit));
}

}  // namespace

ParsedGeneration parse_generation(std::string_view raw, std::size_t expected_yield, std::size_t max_chars) {
    ParsedGeneration parsed;
    std::vector<std::string> usable;
    for (const auto line : split_lines(raw)) {
        const auto t = trim(line);
        if (t.empty()) {
            continue;
        }
        const auto cleaned = strip_quotes(strip_marker(t));
        if (utf8_length(cleaned) < 2) {
            ++parsed.rejected;
            continue;
        }
        usable.push_back(truncate_text(cleaned, max_chars));
    }
    if (usable.empty()) {
        throw Error(ErrorKind::content, fmt::format("no usable lines in reply: {}", raw));
    }
    if (usable.size() > expected_yield) {
        parsed.rejected += usable.size() - expected_yield;
        usable.resize(expected_yield);
    }
    parsed.texts = std::move(usable);
    return parsed;
}

std::vector<std::string> default_refusal_phrases() {
    return {"I'm sorry", "I am sorry", "I apologize", "I cannot", "I can't", "I can not",
            "I won't",   "As an AI",   "Sorry, but"};
}

bool is_refusal(std::string_view raw, std::span<const std::string> phrases) {
    std::vector<std::string_view> lines;
    for (const auto line : split_lines(raw)) {
        if (!trim(line).empty()) {
            lines.push_back(trim(line));
        }
    }
    if (lines.empty() || lines.size() > 2) {
        return false;
    }
    const auto first = strip_quotes(lines.front());
    return std::any_of(phrases.begin(), phrases.end(),
                       [&](const std::string &p) { return starts_with_icase(first, p); });
}

// Execution ------------------------------------------------------------------

std::vector<SyntheticExample> trim_to_target(std::vector<SyntheticExample> generated, Strategy strategy,
                                             std::size_t total_target, const TaskSchema &schema) {
    if (strategy == Strategy::proportional) {
        if (generated.size() > total_target) {
            generated.resize(total_target);
        }
        return generated;
    }
    const std::size_t k = schema.labels.size();
    std::vector<std::size_t> available(k, 0);
    for (const auto &s : generated) {
        ++available[schema.index_of(s.example.label)];
    }
    const std::size_t floor_available = *std::min_element(available.begin(), available.end());
    std::vector<std::size_t> keep(k);
    for (std::size_t l = 0; l < k; ++l) {
        const std::size_t share = total_target / k + (l < total_target % k ? 1 : 0);
        keep[l] = std::min({available[l], share, floor_available + 1});
    }
    std::vector<SyntheticExample> kept;
    kept.reserve(total_target);
    std::vector<std::size_t> taken(k, 0);
    for (auto &s : generated) {
        const std::size_t l = schema.index_of(s.example.label);
        if (taken[l] < keep[l]) {
            ++taken[l];
            kept.push_back(std::move(s));
        }
    }
    return kept;
}

SyntheticDataset run_augmentation(const AugmentationPlan &plan, ChatClient &client, const TaskSchema &schema,
                                  const PromptTemplate &augmentation, const std::string &model,
                                  std::span<const LabeledExample> base, const AugmentOptions &options) {
    std::vector<ChatRequest> requests;
    requests.reserve(plan.jobs.size());
    for (const auto &job : plan.jobs) {
        if (!schema.contains(job.target_label)) {
            throw Error(ErrorKind::data, fmt::format("job label '{}' is not part of task '{}'", job.target_label,
                                                     schema.task_id));
        }
        requests.push_back(render_prompt(job, schema, augmentation, model));
    }
    const auto results = client.complete_all(requests);

    SyntheticDataset dataset;
    dataset.generator_model = model;
    dataset.plan_fingerprint = plan.fingerprint();
    std::vector<SyntheticExample> generated;
    for (std::size_t i = 0; i < plan.jobs.size(); ++i) {
        const auto &job = plan.jobs[i];
        const auto &result = results[i];
        JobOutcome outcome;
        outcome.job_index = i;
        if (!result.ok()) {
            if (result.error_kind == ErrorKind::credential) {
                throw Error(ErrorKind::credential, result.error);
            }
            outcome.status = to_string(result.error_kind);
            outcome.error = result.error;
            dataset.jobs.push_back(std::move(outcome));
            continue;
        }
        dataset.responses.push_back(*result.response);
        outcome.prompt_tokens = result.response->prompt_tokens;
        outcome.completion_tokens = result.response->completion_tokens;
        const std::string &raw = result.response->raw_text;
        if (is_refusal(raw, options.refusal_phrases)) {
            outcome.status = "refused";
            outcome.error = raw;
            dataset.jobs.push_back(std::move(outcome));
            continue;
        }
        try {
            auto parsed = parse_generation(raw, job.expected_yield, options.max_text_chars);
            outcome.status = "ok";
            outcome.accepted = parsed.texts.size();
            outcome.rejected = parsed.rejected;
            dataset.rejected_lines += parsed.rejected;
            for (auto &text : parsed.texts) {
                generated.push_back({{std::move(text), job.target_label, Provenance::synthetic, model},
                                     i,
                                     job.repetition_index});
            }
        } catch (const Error &e) {
            outcome.status = to_string(e.kind());
            outcome.error = e.what();
        }
        dataset.jobs.push_back(std::move(outcome));
    }

    dataset.generated = generated.size();
    const double required = options.min_yield_fraction * static_cast<double>(plan.total_target);
    if (static_cast<double>(generated.size()) < required) {
        throw Error(ErrorKind::shortfall,
                    fmt::format("augmentation produced {} usable texts, below the required {:.0f} of target {}",
                                generated.size(), std::ceil(required), plan.total_target));
    }
    dataset.examples = trim_to_target(std::move(generated), plan.strategy, plan.total_target, schema);

    std::unordered_set<std::string> base_texts;
    for (const auto &ex : base) {
        base_texts.insert(ex.text);
    }
    std::unordered_set<std::string> seen;
    for (const auto &s : dataset.examples) {
        if (!seen.insert(s.example.text).second) {
            ++dataset.dedup.repeated_within;
        }
        if (base_texts.contains(s.example.text)) {
            ++dataset.dedup.equal_to_base;
        }
    }
    return dataset;
}

std::string to_synthetic_jsonl(std::span<const SyntheticExample> examples) {
    std::string out;
    for (const auto &s : examples) {
        ordered_json j;
        j["text"] = s.example.text;
        j["label"] = s.example.label;
        j["provenance"] = to_string(s.example.provenance);
        j["origin"] = s.example.origin;
        j["job_index"] = s.job_index;
        j["repetition_index"] = s.repetition_index;
        out += j.dump(-1, ' ', false, json::error_handler_t::replace);
        out += '\n';
    }
    return out;
}

}  // namespace synthaug

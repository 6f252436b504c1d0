// SPDX-License-Identifier: Apache-2.0
#include "synthaug/corpus.hpp"

#include "synthaug/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(Provenance p) noexcept {
    return p == Provenance::human ? "human" : "synthetic";
}

std::optional<Provenance> parse_provenance(std::string_view s) noexcept {
    if (s == "human") {
        return Provenance::human;
    }
    if (s == "synthetic") {
        return Provenance::synthetic;
    }
    return std::nullopt;
}

std::uint64_t example_identity(const LabeledExample &example) noexcept {
    std::uint64_t h = fnv1a64(example.text);
    h = fnv1a64(std::string_view("\x1f", 1), h);
    h = fnv1a64(example.label, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
    return fnv1a64(example.origin, h);
}

// TaskSchema -----------------------------------------------------------------

bool TaskSchema::contains(std::string_view label) const noexcept {
    return std::find(labels.begin(), labels.end(), label) != labels.end();
}

std::size_t TaskSchema::index_of(std::string_view label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
        throw Error(ErrorKind::data, fmt::format("label '{}' is not part of task '{}'", label, task_id));
    }
    return static_cast<std::size_t>(it - labels.begin());
}

std::string TaskSchema::phrase(std::string_view label) const {
    const auto it = phrases.find(std::string(label));
    return it != phrases.end() ? it->second : std::string(label);
}

bool TaskSchema::case_significant() const noexcept {
    return std::any_of(labels.begin(), labels.end(), [](const std::string &l) {
        return std::any_of(l.begin(), l.end(), [](char c) { return c >= 'A' && c <= 'Z'; });
    });
}

void TaskSchema::validate() const {
    if (labels.size() < 2) {
        throw Error(ErrorKind::config, fmt::format("task '{}' needs at least two labels", task_id));
    }
    std::set<std::string> seen;
    for (const auto &label : labels) {
        if (trim(label).empty()) {
            throw Error(ErrorKind::config, fmt::format("task '{}' has an empty label", task_id));
        }
        if (label == kInvalidLabel) {
            throw Error(ErrorKind::config, fmt::format("label '{}' is reserved", label));
        }
        if (!seen.insert(label).second) {
            throw Error(ErrorKind::config, fmt::format("task '{}' repeats label '{}'", task_id, label));
        }
    }
}

TaskSchema sentiment_schema() {
    TaskSchema s;
    s.task_id = "sentiment";
    s.labels = {"negative", "neutral", "positive"};
    s.language = "en";
    return s;
}

TaskSchema hate_speech_schema() {
    TaskSchema s;
    s.task_id = "hate_speech";
    s.labels = {"NOT", "OFF"};
    s.phrases = {{"NOT", "not offensive"}, {"OFF", "offensive"}};
    s.language = "da";
    return s;
}

TaskSchema social_dimensions_schema() {
    TaskSchema s;
    s.task_id = "social_dimensions";
    s.labels = {"social_support", "conflict", "trust", "neutral", "fun",
                "respect", "knowledge", "power", "similarity_identity"};
    s.phrases = {{"social_support", "social support"}, {"similarity_identity", "similarity/identity"}};
    s.descriptions = {
        {"social_support", "giving emotional or practical aid and companionship"},
        {"conflict", "contrast or diverging views"},
        {"trust", "the will of relying on the actions or judgments of another"},
        {"neutral", "the absence of any particular social dimension; a plain or factual remark"},
        {"fun", "experiencing leisure, laughter and joy"},
        {"respect", "conferring status, appreciation, gratitude or admiration upon another"},
        {"knowledge", "the exchange of ideas or information; learning and teaching"},
        {"power", "having power over the behavior and outcomes of another"},
        {"similarity_identity", "shared interests, motivations or outlooks, or a shared sense of identity"},
    };
    s.language = "en";
    return s;
}

TaskSchema builtin_schema(std::string_view task_id) {
    if (task_id == "sentiment") {
        return sentiment_schema();
    }
    if (task_id == "hate_speech") {
        return hate_speech_schema();
    }
    if (task_id == "social_dimensions") {
        return social_dimensions_schema();
    }
    throw Error(ErrorKind::config, fmt::format("unknown built-in task '{}'", task_id));
}

TaskSchema schema_from_json(std::string_view json_text) {
    try {
        const auto j = json::parse(json_text);
        TaskSchema s;
        s.task_id = j.at("task_id").get<std::string>();
        s.labels = j.at("labels").get<std::vector<std::string>>();
        if (j.contains("descriptions")) {
            s.descriptions = j.at("descriptions").get<std::map<std::string, std::string>>();
        }
        if (j.contains("phrases")) {
            s.phrases = j.at("phrases").get<std::map<std::string, std::string>>();
        }
        s.language = j.value("language", std::string("en"));
        s.validate();
        return s;
    } catch (const json::exception &e) {
        throw Error(ErrorKind::config, fmt::format("invalid task schema: {}", e.what()));
    }
}

// Records --------------------------------------------------------------------

LabeledExample parse_record(std::string_view json_line, const TaskSchema &schema) {
    json j;
    try {
        j = json::parse(json_line);
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::data, fmt::format("malformed JSON: {}", e.what()));
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string() || !j.contains("label") ||
        !j["label"].is_string()) {
        throw Error(ErrorKind::data, "record needs string fields 'text' and 'label'");
    }
    LabeledExample ex;
    ex.text = j["text"].get<std::string>();
    ex.label = j["label"].get<std::string>();
    if (trim(ex.text).empty()) {
        throw Error(ErrorKind::data, "record text is empty");
    }
    if (!schema.contains(ex.label)) {
        throw Error(ErrorKind::data,
                    fmt::format("label '{}' is not part of task '{}'", ex.label, schema.task_id));
    }
    if (j.contains("provenance")) {
        const auto p = j["provenance"].is_string() ? parse_provenance(j["provenance"].get<std::string>())
                                                   : std::nullopt;
        if (!p) {
            throw Error(ErrorKind::data, "provenance must be \"human\" or \"synthetic\"");
        }
        ex.provenance = *p;
    }
    if (j.contains("origin")) {
        if (!j["origin"].is_string()) {
            throw Error(ErrorKind::data, "origin must be a string");
        }
        ex.origin = j["origin"].get<std::string>();
    }
    return ex;
}

std::string to_record(const LabeledExample &example) {
    ordered_json j;
    j["text"] = example.text;
    j["label"] = example.label;
    j["provenance"] = to_string(example.provenance);
    j["origin"] = example.origin;
    return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string to_jsonl(std::span<const LabeledExample> examples) {
    std::string out;
    for (const auto &ex : examples) {
        out += to_record(ex);
        out += '\n';
    }
    return out;
}

std::vector<LabeledExample> load_corpus(const std::filesystem::path &path, const TaskSchema &schema) {
    std::vector<LabeledExample> examples;
    for_each_jsonl_line(path, [&](std::size_t number, std::string_view line) {
        try {
            examples.push_back(parse_record(line, schema));
        } catch (const Error &e) {
            throw Error(e.kind(), fmt::format("{}:{}: {}", path.string(), number, e.what()));
        }
    });
    return examples;
}

std::vector<AnnotatedExample> load_annotated(const std::filesystem::path &path) {
    std::vector<AnnotatedExample> records;
    for_each_jsonl_line(path, [&](std::size_t number, std::string_view line) {
        auto fail = [&](std::string_view why) {
            throw Error(ErrorKind::data, fmt::format("{}:{}: {}", path.string(), number, why));
        };
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error &e) {
            fail(e.what());
        }
        if (!j.is_object() || !j.contains("text") || !j["text"].is_string() || !j.contains("votes") ||
            !j["votes"].is_object() || j["votes"].empty()) {
            fail("annotated record needs 'text' and a non-empty 'votes' object");
        }
        AnnotatedExample rec;
        rec.text = j["text"].get<std::string>();
        for (const auto &[key, value] : j["votes"].items()) {
            if (!value.is_number_integer() || value.get<int>() < 0) {
                fail(fmt::format("vote count for '{}' must be a non-negative integer", key));
            }
            rec.votes[key] = value.get<int>();
        }
        records.push_back(std::move(rec));
    });
    return records;
}

// Splits ---------------------------------------------------------------------

namespace {

void require_sizes(std::size_t available, std::size_t required, std::string_view what) {
    if (available < required) {
        throw Error(ErrorKind::data, fmt::format("corpus too small for {}: required {}, available {}", what,
                                                 required, available));
    }
}

// Shuffles `train` and carves base, validation and pool from it in that order.
void carve_training_side(std::span<const LabeledExample> train, std::span<const std::size_t> order,
                         const SplitOptions &options, SplitSet &out) {
    std::size_t cursor = 0;
    auto take = [&](std::size_t n, std::vector<LabeledExample> &into) {
        into.reserve(n);
        for (std::size_t i = 0; i < n; ++i) {
            into.push_back(train[order[cursor++]]);
        }
    };
    take(options.base_size, out.base);
    take(options.val_size, out.validation);
    take(order.size() - cursor, out.pool);
}

}  // namespace

SplitSet make_splits(std::span<const LabeledExample> corpus, std::uint64_t seed, const SplitOptions &options) {
    if (!(options.test_fraction >= 0.0 && options.test_fraction < 1.0)) {
        throw Error(ErrorKind::config, fmt::format("test_fraction {} outside [0, 1)", options.test_fraction));
    }
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(corpus.size()) * options.test_fraction));
    require_sizes(corpus.size(), n_test + options.base_size + options.val_size, "test+base+validation");

    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    SplitSet out;
    out.seed = seed;
    out.test.reserve(n_test);
    for (std::size_t i = 0; i < n_test; ++i) {
        out.test.push_back(corpus[order[i]]);
    }
    carve_training_side(corpus, std::span(order).subspan(n_test), options, out);
    return out;
}

SplitSet make_splits_with_test(std::span<const LabeledExample> train, std::vector<LabeledExample> test,
                               std::uint64_t seed, const SplitOptions &options) {
    require_sizes(train.size(), options.base_size + options.val_size, "base+validation");
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(order);

    SplitSet out;
    out.seed = seed;
    out.test = std::move(test);
    carve_training_side(train, order, options, out);
    return out;
}

// Social dimensions ----------------------------------------------------------

std::vector<LabeledExample> transform_social_dimensions(std::span<const AnnotatedExample> annotated, int threshold) {
    // original dimension name -> schema label; romance maps to nothing
    static const std::map<std::string, std::string, std::less<>> kAliases = {
        {"knowledge", "knowledge"},       {"power", "power"},
        {"status", "respect"},            {"respect", "respect"},
        {"trust", "trust"},               {"support", "social_support"},
        {"social_support", "social_support"},
        {"similarity", "similarity_identity"},
        {"identity", "similarity_identity"},
        {"similarity_identity", "similarity_identity"},
        {"fun", "fun"},                   {"conflict", "conflict"},
        {"neutral", "neutral"},           {"romance", ""},
    };
    const TaskSchema schema = social_dimensions_schema();

    std::vector<LabeledExample> out;
    for (const auto &record : annotated) {
        std::vector<int> merged(schema.labels.size(), 0);
        for (const auto &[dimension, count] : record.votes) {
            const auto it = kAliases.find(dimension);
            if (it == kAliases.end()) {
                throw Error(ErrorKind::data, fmt::format("unknown social dimension '{}'", dimension));
            }
            if (it->second.empty()) {
                continue;
            }
            merged[schema.index_of(it->second)] += count;
        }
        bool any = false;
        for (std::size_t i = 0; i < merged.size(); ++i) {
            if (merged[i] >= threshold) {
                out.push_back({record.text, schema.labels[i], Provenance::human, {}});
                any = true;
            }
        }
        if (!any) {
            out.push_back({record.text, "neutral", Provenance::human, {}});
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::size_t>> label_distribution(std::span<const LabeledExample> examples,
                                                                    const TaskSchema &schema) {
    std::vector<std::pair<std::string, std::size_t>> counts;
    counts.reserve(schema.labels.size());
    for (const auto &label : schema.labels) {
        counts.emplace_back(label, 0);
    }
    for (const auto &ex : examples) {
        auto it = std::find_if(counts.begin(), counts.end(), [&](const auto &c) { return c.first == ex.label; });
        if (it == counts.end()) {
            counts.emplace_back(ex.label, 1);
        } else {
            ++it->second;
        }
    }
    return counts;
}

}  // namespace synthaug

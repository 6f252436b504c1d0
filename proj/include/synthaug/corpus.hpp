// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synthaug {

/// Reserved prediction value for replies that map onto no schema label.
inline constexpr std::string_view kInvalidLabel = "<invalid>";

enum class Provenance { human, synthetic };

[[nodiscard]] std::string_view to_string(Provenance p) noexcept;
[[nodiscard]] std::optional<Provenance> parse_provenance(std::string_view s) noexcept;

struct LabeledExample {
    std::string text;
    std::string label;
    Provenance provenance = Provenance::human;
    std::string origin;

    friend bool operator==(const LabeledExample &, const LabeledExample &) = default;
};

/// Identity used for partition disjointness: hash of (text, label, origin).
[[nodiscard]] std::uint64_t example_identity(const LabeledExample &example) noexcept;

/// The label set of one classification task, plus the per-label strings the
/// prompt templates need.
struct TaskSchema {
    std::string task_id;
    std::vector<std::string> labels;
    /// Short definition of each label; required by tasks whose prompts cite it.
    std::map<std::string, std::string> descriptions;
    /// How a label is spelled inside prompts ("offensive", "social support").
    /// Falls back to the label id.
    std::map<std::string, std::string> phrases;
    std::string language = "en";

    [[nodiscard]] bool contains(std::string_view label) const noexcept;
    [[nodiscard]] std::size_t index_of(std::string_view label) const;
    [[nodiscard]] std::string phrase(std::string_view label) const;
    /// True when some label carries upper-case letters (OFF/NOT); such labels
    /// are matched with their canonical casing during token scans.
    [[nodiscard]] bool case_significant() const noexcept;
    /// Throws Error(config) if labels are empty, duplicated, fewer than two,
    /// or collide with the reserved invalid marker.
    void validate() const;
};

[[nodiscard]] TaskSchema sentiment_schema();
[[nodiscard]] TaskSchema hate_speech_schema();
[[nodiscard]] TaskSchema social_dimensions_schema();
/// Built-in schema by task id: "sentiment", "hate_speech", "social_dimensions".
[[nodiscard]] TaskSchema builtin_schema(std::string_view task_id);
[[nodiscard]] TaskSchema schema_from_json(std::string_view json_text);

/// One multi-annotator record: votes per original social dimension.
struct AnnotatedExample {
    std::string text;
    std::map<std::string, int> votes;
};

struct SplitSet {
    std::vector<LabeledExample> test;
    std::vector<LabeledExample> base;
    std::vector<LabeledExample> validation;
    std::vector<LabeledExample> pool;
    std::uint64_t seed = 0;
};

struct SplitOptions {
    double test_fraction = 0.20;
    std::size_t base_size = 500;
    std::size_t val_size = 750;
};

// Record I/O -----------------------------------------------------------------

[[nodiscard]] LabeledExample parse_record(std::string_view json_line, const TaskSchema &schema);
[[nodiscard]] std::string to_record(const LabeledExample &example);
[[nodiscard]] std::string to_jsonl(std::span<const LabeledExample> examples);

[[nodiscard]] std::vector<LabeledExample> load_corpus(const std::filesystem::path &path, const TaskSchema &schema);
[[nodiscard]] std::vector<AnnotatedExample> load_annotated(const std::filesystem::path &path);

// Operations -----------------------------------------------------------------

/// Seeded partition of one corpus into test / base / validation / pool.
[[nodiscard]] SplitSet make_splits(std::span<const LabeledExample> corpus, std::uint64_t seed,
                                   const SplitOptions &options = {});

/// Same, keeping a test split published with the dataset; base and validation
/// are drawn from `train` and test_fraction is ignored.
[[nodiscard]] SplitSet make_splits_with_test(std::span<const LabeledExample> train,
                                             std::vector<LabeledExample> test, std::uint64_t seed,
                                             const SplitOptions &options = {});

/// Multilabel votes to multiclass replicas: romance is dropped, similarity and
/// identity votes are summed, every label reaching `threshold` votes yields one
/// copy of the text, and texts with no such label become neutral.
[[nodiscard]] std::vector<LabeledExample> transform_social_dimensions(std::span<const AnnotatedExample> annotated,
                                                                      int threshold = 2);

/// Count per label, in schema order, with zero entries for absent labels.
/// Labels outside the schema are appended after the schema labels.
[[nodiscard]] std::vector<std::pair<std::string, std::size_t>> label_distribution(
    std::span<const LabeledExample> examples, const TaskSchema &schema);

}  // namespace synthaug

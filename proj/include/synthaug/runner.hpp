// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "synthaug/augment.hpp"
#include "synthaug/corpus.hpp"
#include "synthaug/llm_client.hpp"
#include "synthaug/metrics.hpp"
#include "synthaug/trainer.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace synthaug {

inline constexpr int kSchemaVersion = 1;

struct ClientConfig {
    std::string backend = "stub";  ///< "stub" or "openai"
    std::size_t max_retries = 3;
    std::vector<long> backoff_ms{1000, 2000, 4000};
    std::size_t max_parallel = 4;
    std::filesystem::path fixtures;    ///< stub only; optional
    std::string stub_fallback = "mirror";  ///< "mirror" or "none"
};

struct ExperimentConfig {
    std::string task = "sentiment";
    TaskSchema schema;
    std::uint64_t seed = 42;

    std::filesystem::path corpus;
    std::filesystem::path test_corpus;  ///< optional published test split
    std::string corpus_format = "labeled";  ///< "labeled" or "annotated"
    int vote_threshold = 2;
    std::filesystem::path output_dir = "out";
    std::filesystem::path cache_dir;    ///< default <output_dir>/cache
    std::filesystem::path prompts_dir;  ///< optional; built-in templates otherwise

    SplitOptions split;
    std::vector<Strategy> strategies{Strategy::proportional, Strategy::balanced};
    std::vector<std::string> generation_models{"stub-model"};
    std::vector<std::string> zeroshot_models{"stub-model"};
    std::size_t factor = 10;
    std::size_t total_target = 5000;
    AugmentOptions augment;
    std::vector<std::size_t> sizes{500, 1000, 1500, 2000, 2500, 3000, 3500, 4000, 4500, 5000};
    TrainConfig train;
    ClientConfig client;
    std::map<std::string, TokenRates> prices;

    /// Throws Error(config) on inconsistent settings. With check_paths, input
    /// files must exist.
    void validate(bool check_paths = true) const;
};

/// Builds a config from JSON text. Relative paths resolve against base_dir.
/// Each override is a dotted key ("train.epochs", "client.backend") and a
/// value parsed as JSON when it parses, else taken as a string; overrides are
/// applied to the JSON before it is read, so they win over the file.
[[nodiscard]] ExperimentConfig config_from_json(std::string_view json_text, const std::filesystem::path &base_dir,
                                                const std::vector<std::pair<std::string, std::string>> &overrides = {});
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path &path,
                                           const std::vector<std::pair<std::string, std::string>> &overrides = {});

/// Exclusive marker file in an output directory, removed on destruction.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path &dir);
    ~OutputLock();
    OutputLock(const OutputLock &) = delete;
    OutputLock &operator=(const OutputLock &) = delete;

private:
    std::filesystem::path path_;
};

struct SplitSummary {
    std::size_t test = 0;
    std::size_t base = 0;
    std::size_t validation = 0;
    std::size_t pool = 0;
    std::string hash;
};

struct AugmentSummary {
    std::string model;
    Strategy strategy = Strategy::proportional;
    std::size_t examples = 0;
    std::size_t rejected_lines = 0;
    std::size_t failed_jobs = 0;
    std::size_t refused_jobs = 0;
    double cost = 0.0;
    std::filesystem::path file;
    std::string hash;
};

struct CurveSummary {
    std::vector<CurvePoint> points;
    std::filesystem::path csv;
    std::string hash;
};

struct ZeroshotSummary {
    std::string model;
    ClassificationReport report;
    double invalid_rate = 0.0;
    std::filesystem::path predictions;
    std::string hash;
};

struct CostLine {
    std::string stage;  ///< "augment" or "zeroshot"
    std::string model;
    std::string backend;
    std::size_t requests = 0;
    std::size_t prompt_tokens = 0;
    std::size_t completion_tokens = 0;
    double cost = 0.0;
};

struct CostSummary {
    std::vector<CostLine> lines;
    double total = 0.0;
};

/// Variant tag of one synthetic dataset: "<model>_<strategy>" with characters
/// outside [A-Za-z0-9._-] replaced by '_'.
[[nodiscard]] std::string variant_name(std::string_view model, Strategy strategy);

/// Runs the experiment verbs against one output directory:
///   splits/{test,base,validation,pool}.jsonl, splits/manifest.json
///   synthetic/<variant>.jsonl, .log.jsonl, .manifest.json
///   curve/curve.csv, curve/manifest.json
///   zeroshot/<model>.predictions.jsonl, .log.jsonl, .report.txt, .report.json, .manifest.json
/// Each verb holds the directory lock while it runs.
class Pipeline {
public:
    using Progress = std::function<void(std::string_view)>;

    /// A transport passed here replaces the configured backend.
    explicit Pipeline(ExperimentConfig config, std::shared_ptr<Transport> transport = nullptr,
                      ChatClient::Sleeper sleeper = {});

    void set_progress(Progress progress) { progress_ = std::move(progress); }
    [[nodiscard]] const ExperimentConfig &config() const noexcept { return config_; }

    /// Refuses (Error(config)) when a split manifest exists and force is off.
    SplitSummary split(bool force = false);
    /// Every configured (model, strategy) pair unless narrowed.
    std::vector<AugmentSummary> augment(std::optional<Strategy> strategy = std::nullopt,
                                        std::optional<std::string> model = std::nullopt);
    CurveSummary curve();
    std::vector<ZeroshotSummary> zeroshot(std::optional<std::string> model = std::nullopt);
    /// Sums the generation and zero-shot logs against the price table and
    /// writes cost.json. Stub-backend requests cost nothing.
    CostSummary cost();

private:
    ChatClient &client();
    void note(std::string_view message) const;

    ExperimentConfig config_;
    std::shared_ptr<Transport> transport_;
    ChatClient::Sleeper sleeper_;
    std::unique_ptr<ChatClient> client_;
    Progress progress_;
};

struct PredictionRecord {
    std::string text;
    std::string gold;
    std::string predicted;
};

/// Reads a zero-shot predictions file (text, gold, predicted per line).
[[nodiscard]] std::vector<PredictionRecord> load_predictions(const std::filesystem::path &path);
/// Report over a predictions file; gold labels must belong to the schema.
[[nodiscard]] ClassificationReport report_from_predictions(const std::filesystem::path &path,
                                                           const TaskSchema &schema);
/// Per-class rows as a JSON array of {label, precision, recall, f1, support},
/// summarised with summarize_rows.
[[nodiscard]] ClassificationReport report_from_rows_json(std::string_view json_text);

}  // namespace synthaug

// SPDX-License-Identifier: Apache-2.0
#include "synthaug/runner.hpp"

#include "synthaug/common.hpp"
#include "synthaug/prompts.hpp"
#include "synthaug/zeroshot.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <set>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>
#include <json.hpp>

namespace synthaug {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Configuration --------------------------------------------------------------

namespace {

void reject_unknown_keys(const json &object, std::string_view section, std::initializer_list<std::string_view> known) {
    if (!object.is_object()) {
        throw Error(ErrorKind::config, fmt::format("'{}' must be an object", section));
    }
    for (const auto &item : object.items()) {
        if (std::find(known.begin(), known.end(), item.key()) == known.end()) {
            throw Error(ErrorKind::config, fmt::format("unknown key '{}{}{}'", section, section.empty() ? "" : ".",
                                                       item.key()));
        }
    }
}

fs::path resolve(const fs::path &base_dir, const std::string &value) {
    if (value.empty()) {
        return {};
    }
    const fs::path p(value);
    return p.is_absolute() ? p : base_dir / p;
}

json parse_override_value(const std::string &value) {
    try {
        return json::parse(value);
    } catch (const json::parse_error &) {
        return json(value);
    }
}

template <typename T>
void read_opt(const json &object, const char *key, T &slot) {
    if (object.contains(key)) {
        slot = object.at(key).get<T>();
    }
}

}  // namespace

ExperimentConfig config_from_json(std::string_view json_text, const fs::path &base_dir,
                                  const std::vector<std::pair<std::string, std::string>> &overrides) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::config, fmt::format("config is not valid JSON: {}", e.what()));
    }
    if (!j.is_object()) {
        throw Error(ErrorKind::config, "config must be a JSON object");
    }
    for (const auto &[key, value] : overrides) {
        if (key.empty()) {
            throw Error(ErrorKind::config, "empty override key");
        }
        std::string pointer = "/" + key;
        std::replace(pointer.begin(), pointer.end(), '.', '/');
        try {
            j[json::json_pointer(pointer)] = parse_override_value(value);
        } catch (const json::exception &e) {
            throw Error(ErrorKind::config, fmt::format("cannot apply override '{}': {}", key, e.what()));
        }
    }

    ExperimentConfig c;
    try {
        reject_unknown_keys(j, "", {"task", "schema", "schema_file", "seed", "paths", "corpus_format",
                                    "vote_threshold", "split", "augment", "zeroshot", "curve", "train", "client",
                                    "prices"});
        read_opt(j, "task", c.task);
        if (j.contains("schema")) {
            c.schema = schema_from_json(j.at("schema").dump());
        } else if (j.contains("schema_file")) {
            c.schema = schema_from_json(read_file(resolve(base_dir, j.at("schema_file").get<std::string>())));
        } else {
            c.schema = builtin_schema(c.task);
        }
        if (c.schema.task_id != c.task) {
            throw Error(ErrorKind::config,
                        fmt::format("schema task_id '{}' does not match task '{}'", c.schema.task_id, c.task));
        }
        read_opt(j, "seed", c.seed);
        read_opt(j, "corpus_format", c.corpus_format);
        read_opt(j, "vote_threshold", c.vote_threshold);

        if (j.contains("paths")) {
            const auto &p = j.at("paths");
            reject_unknown_keys(p, "paths", {"corpus", "test_corpus", "output_dir", "cache_dir", "prompts_dir"});
            c.corpus = resolve(base_dir, p.value("corpus", std::string()));
            c.test_corpus = resolve(base_dir, p.value("test_corpus", std::string()));
            if (p.contains("output_dir")) {
                c.output_dir = resolve(base_dir, p.at("output_dir").get<std::string>());
            } else {
                c.output_dir = base_dir / c.output_dir;
            }
            c.cache_dir = resolve(base_dir, p.value("cache_dir", std::string()));
            c.prompts_dir = resolve(base_dir, p.value("prompts_dir", std::string()));
        } else {
            c.output_dir = base_dir / c.output_dir;
        }

        if (j.contains("split")) {
            const auto &s = j.at("split");
            reject_unknown_keys(s, "split", {"test_fraction", "base_size", "val_size"});
            read_opt(s, "test_fraction", c.split.test_fraction);
            read_opt(s, "base_size", c.split.base_size);
            read_opt(s, "val_size", c.split.val_size);
        }

        if (j.contains("augment")) {
            const auto &a = j.at("augment");
            reject_unknown_keys(a, "augment", {"strategies", "models", "factor", "total_target",
                                               "min_yield_fraction", "max_text_chars", "refusal_phrases"});
            if (a.contains("strategies")) {
                c.strategies.clear();
                for (const auto &name : a.at("strategies").get<std::vector<std::string>>()) {
                    const auto s = parse_strategy(name);
                    if (!s) {
                        throw Error(ErrorKind::config, fmt::format("unknown strategy '{}'", name));
                    }
                    c.strategies.push_back(*s);
                }
            }
            read_opt(a, "models", c.generation_models);
            read_opt(a, "factor", c.factor);
            read_opt(a, "total_target", c.total_target);
            read_opt(a, "min_yield_fraction", c.augment.min_yield_fraction);
            read_opt(a, "max_text_chars", c.augment.max_text_chars);
            read_opt(a, "refusal_phrases", c.augment.refusal_phrases);
        }

        if (j.contains("zeroshot")) {
            const auto &z = j.at("zeroshot");
            reject_unknown_keys(z, "zeroshot", {"models"});
            read_opt(z, "models", c.zeroshot_models);
        }

        if (j.contains("curve")) {
            const auto &cv = j.at("curve");
            reject_unknown_keys(cv, "curve", {"sizes"});
            read_opt(cv, "sizes", c.sizes);
        }

        c.train.seed = derive_seed(c.seed, "train");
        if (j.contains("train")) {
            const auto &t = j.at("train");
            reject_unknown_keys(t, "train", {"epochs", "batch_size", "learning_rate", "weight_decay", "beta1",
                                             "beta2", "epsilon", "seed", "word_ngrams", "char_ngrams",
                                             "feature_dim"});
            read_opt(t, "epochs", c.train.epochs);
            read_opt(t, "batch_size", c.train.batch_size);
            read_opt(t, "learning_rate", c.train.learning_rate);
            read_opt(t, "weight_decay", c.train.weight_decay);
            read_opt(t, "beta1", c.train.beta1);
            read_opt(t, "beta2", c.train.beta2);
            read_opt(t, "epsilon", c.train.epsilon);
            read_opt(t, "seed", c.train.seed);
            read_opt(t, "word_ngrams", c.train.word_ngrams);
            read_opt(t, "char_ngrams", c.train.char_ngrams);
            read_opt(t, "feature_dim", c.train.feature_dim);
        }

        if (j.contains("client")) {
            const auto &cl = j.at("client");
            reject_unknown_keys(cl, "client",
                                {"backend", "max_retries", "backoff_ms", "max_parallel", "fixtures", "stub_fallback"});
            read_opt(cl, "backend", c.client.backend);
            read_opt(cl, "max_retries", c.client.max_retries);
            read_opt(cl, "backoff_ms", c.client.backoff_ms);
            read_opt(cl, "max_parallel", c.client.max_parallel);
            c.client.fixtures = resolve(base_dir, cl.value("fixtures", std::string()));
            read_opt(cl, "stub_fallback", c.client.stub_fallback);
        }

        if (j.contains("prices")) {
            for (const auto &item : j.at("prices").items()) {
                TokenRates rates;
                rates.input = item.value().at("input").get<double>();
                rates.output = item.value().at("output").get<double>();
                c.prices[item.key()] = rates;
            }
        }
    } catch (const json::exception &e) {
        throw Error(ErrorKind::config, fmt::format("bad config value: {}", e.what()));
    }
    return c;
}

ExperimentConfig load_config(const fs::path &path, const std::vector<std::pair<std::string, std::string>> &overrides) {
    if (!fs::exists(path)) {
        throw Error(ErrorKind::config, fmt::format("config file '{}' not found", path.string()));
    }
    return config_from_json(read_file(path), path.parent_path(), overrides);
}

void ExperimentConfig::validate(bool check_paths) const {
    schema.validate();
    train.validate();
    auto fail = [](const std::string &msg) { throw Error(ErrorKind::config, msg); };
    if (corpus_format != "labeled" && corpus_format != "annotated") {
        fail(fmt::format("corpus_format must be 'labeled' or 'annotated', got '{}'", corpus_format));
    }
    if (corpus_format == "annotated" && task != "social_dimensions") {
        fail("annotated corpora are only supported for the social_dimensions task");
    }
    if (vote_threshold < 1) {
        fail("vote_threshold must be at least 1");
    }
    if (output_dir.empty()) {
        fail("paths.output_dir is required");
    }
    if (!(split.test_fraction >= 0.0 && split.test_fraction < 1.0)) {
        fail("split.test_fraction must lie in [0, 1)");
    }
    if (split.base_size == 0 || split.val_size == 0) {
        fail("split.base_size and split.val_size must be positive");
    }
    if (strategies.empty()) {
        fail("augment.strategies must not be empty");
    }
    if (generation_models.empty() || zeroshot_models.empty()) {
        fail("augment.models and zeroshot.models must not be empty");
    }
    for (const auto &m : generation_models) {
        if (m.empty()) {
            fail("model ids must not be empty");
        }
    }
    if (std::set<std::string>(generation_models.begin(), generation_models.end()).size() !=
        generation_models.size()) {
        fail("augment.models contains duplicates");
    }
    if (factor == 0 || total_target == 0) {
        fail("augment.factor and augment.total_target must be positive");
    }
    if (!(augment.min_yield_fraction >= 0.0 && augment.min_yield_fraction <= 1.0)) {
        fail("augment.min_yield_fraction must lie in [0, 1]");
    }
    if (sizes.empty() || !std::is_sorted(sizes.begin(), sizes.end()) ||
        std::adjacent_find(sizes.begin(), sizes.end()) != sizes.end()) {
        fail("curve.sizes must be non-empty and strictly ascending");
    }
    if (sizes.front() < split.base_size) {
        fail(fmt::format("curve sizes start at {} but the base set has {} examples", sizes.front(), split.base_size));
    }
    if (client.backend != "stub" && client.backend != "openai") {
        fail(fmt::format("client.backend must be 'stub' or 'openai', got '{}'", client.backend));
    }
    if (client.stub_fallback != "mirror" && client.stub_fallback != "none") {
        fail("client.stub_fallback must be 'mirror' or 'none'");
    }
    if (client.max_parallel == 0) {
        fail("client.max_parallel must be at least 1");
    }
    for (const long ms : client.backoff_ms) {
        if (ms < 0) {
            fail("client.backoff_ms entries must be non-negative");
        }
    }
    if (check_paths) {
        if (corpus.empty()) {
            fail("paths.corpus is required");
        }
        if (!fs::is_regular_file(corpus)) {
            fail(fmt::format("corpus '{}' not found", corpus.string()));
        }
        if (!test_corpus.empty() && !fs::is_regular_file(test_corpus)) {
            fail(fmt::format("test corpus '{}' not found", test_corpus.string()));
        }
        if (!prompts_dir.empty() && !fs::is_directory(prompts_dir)) {
            fail(fmt::format("prompts directory '{}' not found", prompts_dir.string()));
        }
        if (!client.fixtures.empty() && !fs::is_regular_file(client.fixtures)) {
            fail(fmt::format("fixtures file '{}' not found", client.fixtures.string()));
        }
    }
}

// Lock -----------------------------------------------------------------------

OutputLock::OutputLock(const fs::path &dir) : path_(dir / ".lock") {
    fs::create_directories(dir);
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) {
            throw Error(ErrorKind::config, fmt::format("'{}' is locked by another command (delete {} if stale)",
                                                       dir.string(), path_.string()));
        }
        throw Error(ErrorKind::config, fmt::format("cannot create lock {}: {}", path_.string(), std::strerror(errno)));
    }
    const auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

OutputLock::~OutputLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

// Helpers --------------------------------------------------------------------

namespace {

std::string model_file_stem(std::string_view model) {
    std::string out;
    for (const char ch : model) {
        const bool keep = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
                          ch == '.' || ch == '_' || ch == '-';
        out += keep ? ch : '_';
    }
    return out;
}

}  // namespace

std::string variant_name(std::string_view model, Strategy strategy) {
    return fmt::format("{}_{}", model_file_stem(model), to_string(strategy));
}


namespace {

void write_json(const fs::path &path, const ordered_json &j) {
    write_file_atomic(path, j.dump(2, ' ', false, json::error_handler_t::replace) + "\n");
}

json read_json(const fs::path &path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw Error(ErrorKind::data, fmt::format("{}: malformed JSON: {}", path.string(), e.what()));
    }
}

std::string chain(std::initializer_list<std::string_view> parts) {
    std::string joined;
    for (const auto p : parts) {
        joined += p;
        joined += '\n';
    }
    return sha256_hex(joined);
}

ordered_json distribution_json(std::span<const LabeledExample> examples, const TaskSchema &schema) {
    ordered_json j = ordered_json::object();
    for (const auto &[label, count] : label_distribution(examples, schema)) {
        j[label] = count;
    }
    return j;
}

struct LoadedSplits {
    SplitSet set;
    std::string hash;
};

constexpr const char *kSplitNames[] = {"test", "base", "validation", "pool"};

LoadedSplits load_splits(const fs::path &output_dir, const TaskSchema &schema) {
    const fs::path dir = output_dir / "splits";
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) {
        throw Error(ErrorKind::data, fmt::format("no splits in '{}'; run the split command first", dir.string()));
    }
    const auto manifest = read_json(manifest_path);
    LoadedSplits out;
    out.hash = manifest.value("hash", std::string());
    if (manifest.value("task", std::string()) != schema.task_id) {
        throw Error(ErrorKind::data, fmt::format("splits in '{}' belong to task '{}', not '{}'", dir.string(),
                                                 manifest.value("task", std::string()), schema.task_id));
    }
    out.set.seed = manifest.value("split_seed", std::uint64_t{0});
    out.set.test = load_corpus(dir / "test.jsonl", schema);
    out.set.base = load_corpus(dir / "base.jsonl", schema);
    out.set.validation = load_corpus(dir / "validation.jsonl", schema);
    out.set.pool = load_corpus(dir / "pool.jsonl", schema);
    return out;
}

std::vector<LabeledExample> load_input(const fs::path &path, const ExperimentConfig &config) {
    if (config.corpus_format == "annotated") {
        const auto annotated = load_annotated(path);
        return transform_social_dimensions(annotated, config.vote_threshold);
    }
    return load_corpus(path, config.schema);
}

PromptSet prompts_for(const ExperimentConfig &config) {
    return config.prompts_dir.empty() ? builtin_prompts(config.task) : load_prompts(config.prompts_dir, config.task);
}

}  // namespace

// Pipeline -------------------------------------------------------------------

Pipeline::Pipeline(ExperimentConfig config, std::shared_ptr<Transport> transport, ChatClient::Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
    config_.validate(false);
}

void Pipeline::note(std::string_view message) const {
    if (progress_) {
        progress_(message);
    }
}

ChatClient &Pipeline::client() {
    if (client_) {
        return *client_;
    }
    std::shared_ptr<Transport> transport = transport_;
    if (!transport) {
        if (config_.client.backend == "openai") {
            transport = HttpTransport::from_environment();
        } else {
            std::map<std::string, std::string> fixtures;
            if (!config_.client.fixtures.empty()) {
                fixtures = StubTransport::load_fixtures(config_.client.fixtures);
            }
            transport = std::make_shared<StubTransport>(std::move(fixtures),
                                                        config_.client.stub_fallback == "mirror"
                                                            ? StubTransport::Fallback::mirror
                                                            : StubTransport::Fallback::none);
        }
    }
    ClientPolicy policy;
    policy.max_retries = config_.client.max_retries;
    policy.backoff.clear();
    for (const long ms : config_.client.backoff_ms) {
        policy.backoff.emplace_back(ms);
    }
    policy.max_parallel = config_.client.max_parallel;
    policy.cache_dir = config_.cache_dir.empty() ? config_.output_dir / "cache" : config_.cache_dir;
    client_ = std::make_unique<ChatClient>(std::move(transport), std::move(policy), sleeper_);
    return *client_;
}

SplitSummary Pipeline::split(bool force) {
    config_.validate(true);
    OutputLock lock(config_.output_dir);
    const fs::path dir = config_.output_dir / "splits";
    const fs::path manifest_path = dir / "manifest.json";
    if (fs::exists(manifest_path) && !force) {
        throw Error(ErrorKind::config,
                    fmt::format("'{}' already exists; pass --force to overwrite", manifest_path.string()));
    }

    const auto split_seed = derive_seed(config_.seed, "split");
    auto corpus = load_input(config_.corpus, config_);
    SplitSet set;
    std::string corpus_hash = sha256_file(config_.corpus);
    if (config_.test_corpus.empty()) {
        set = make_splits(corpus, split_seed, config_.split);
    } else {
        auto test = load_input(config_.test_corpus, config_);
        corpus_hash = chain({corpus_hash, sha256_file(config_.test_corpus)});
        set = make_splits_with_test(corpus, std::move(test), split_seed, config_.split);
    }
    note(fmt::format("split {} examples into test {} / base {} / validation {} / pool {}", corpus.size(),
                     set.test.size(), set.base.size(), set.validation.size(), set.pool.size()));

    fs::create_directories(dir);
    const std::vector<LabeledExample> *parts[] = {&set.test, &set.base, &set.validation, &set.pool};
    ordered_json files = ordered_json::object();
    ordered_json counts = ordered_json::object();
    ordered_json distributions = ordered_json::object();
    std::string file_hashes;
    for (std::size_t i = 0; i < 4; ++i) {
        const std::string body = to_jsonl(*parts[i]);
        const std::string name = fmt::format("{}.jsonl", kSplitNames[i]);
        write_file_atomic(dir / name, body);
        const auto h = sha256_hex(body);
        files[name] = h;
        counts[kSplitNames[i]] = parts[i]->size();
        distributions[kSplitNames[i]] = distribution_json(*parts[i], config_.schema);
        file_hashes += h;
    }
    const std::string hash = chain({corpus_hash, file_hashes});

    ordered_json m;
    m["schema_version"] = kSchemaVersion;
    m["kind"] = "split";
    m["task"] = config_.task;
    m["seed"] = config_.seed;
    m["split_seed"] = split_seed;
    m["corpus_format"] = config_.corpus_format;
    m["corpus_sha256"] = corpus_hash;
    m["test_fraction"] = config_.test_corpus.empty() ? config_.split.test_fraction : 0.0;
    m["counts"] = counts;
    m["label_distribution"] = distributions;
    m["files"] = files;
    m["hash"] = hash;
    write_json(manifest_path, m);

    return {set.test.size(), set.base.size(), set.validation.size(), set.pool.size(), hash};
}

std::vector<AugmentSummary> Pipeline::augment(std::optional<Strategy> strategy, std::optional<std::string> model) {
    OutputLock lock(config_.output_dir);
    const auto splits = load_splits(config_.output_dir, config_.schema);
    const auto prompts = prompts_for(config_);
    ChatClient &chat = client();  // a live backend without a key fails here, before any job

    std::vector<std::string> models = config_.generation_models;
    if (model) {
        models = {*model};
    }
    std::vector<Strategy> strategies = config_.strategies;
    if (strategy) {
        strategies = {*strategy};
    }
    const bool stub = config_.client.backend == "stub";
    const fs::path dir = config_.output_dir / "synthetic";
    fs::create_directories(dir);

    std::vector<AugmentSummary> summaries;
    for (const auto &m : models) {
        for (const Strategy s : strategies) {
            const auto plan = s == Strategy::proportional
                                  ? plan_proportional(splits.set.base, config_.factor)
                                  : plan_balanced(splits.set.base, config_.schema, config_.total_target,
                                                  config_.factor, derive_seed(config_.seed, "balance"));
            const std::string name = variant_name(m, s);
            note(fmt::format("augment {}: {} jobs, target {}", name, plan.jobs.size(), plan.total_target));
            const auto dataset =
                run_augmentation(plan, chat, config_.schema, prompts.augmentation, m, splits.set.base, config_.augment);

            std::string log;
            std::size_t failed = 0;
            std::size_t refused = 0;
            for (const auto &job : dataset.jobs) {
                const auto &spec = plan.jobs[job.job_index];
                ordered_json line;
                line["job_index"] = job.job_index;
                line["model"] = m;
                line["backend"] = config_.client.backend;
                line["target_label"] = spec.target_label;
                line["seed_origin"] = spec.seed_example.origin;
                line["temperature"] = spec.temperature;
                line["repetition_index"] = spec.repetition_index;
                line["status"] = job.status;
                line["accepted"] = job.accepted;
                line["rejected"] = job.rejected;
                line["prompt_tokens"] = job.prompt_tokens;
                line["completion_tokens"] = job.completion_tokens;
                if (!job.error.empty()) {
                    line["error"] = job.error;
                }
                log += line.dump(-1, ' ', false, json::error_handler_t::replace);
                log += '\n';
                if (job.status == "refused") {
                    ++refused;
                } else if (job.status != "ok") {
                    ++failed;
                }
            }

            ordered_json cost = nullptr;
            if (stub) {
                cost = 0.0;
            } else if (const auto rates = config_.prices.find(m); rates != config_.prices.end()) {
                double total = 0.0;
                for (const auto &r : dataset.responses) {
                    total += static_cast<double>(r.prompt_tokens) * rates->second.input +
                             static_cast<double>(r.completion_tokens) * rates->second.output;
                }
                cost = total;
            }

            std::vector<LabeledExample> examples;
            examples.reserve(dataset.examples.size());
            for (const auto &e : dataset.examples) {
                examples.push_back(e.example);
            }
            const std::string body = to_synthetic_jsonl(dataset.examples);
            const fs::path file = dir / (name + ".jsonl");
            write_file_atomic(file, body);
            write_file_atomic(dir / (name + ".log.jsonl"), log);
            const std::string file_hash = sha256_hex(body);
            const std::string hash = chain({splits.hash, dataset.plan_fingerprint, file_hash});

            ordered_json mf;
            mf["schema_version"] = kSchemaVersion;
            mf["kind"] = "synthetic";
            mf["task"] = config_.task;
            mf["model"] = m;
            mf["strategy"] = to_string(s);
            mf["backend"] = config_.client.backend;
            mf["split_hash"] = splits.hash;
            mf["plan_fingerprint"] = dataset.plan_fingerprint;
            mf["jobs"] = plan.jobs.size();
            mf["failed_jobs"] = failed;
            mf["refused_jobs"] = refused;
            mf["generated"] = dataset.generated;
            mf["examples"] = examples.size();
            mf["total_target"] = plan.total_target;
            mf["rejected_lines"] = dataset.rejected_lines;
            mf["duplicates_within"] = dataset.dedup.repeated_within;
            mf["duplicates_of_base"] = dataset.dedup.equal_to_base;
            mf["label_distribution"] = distribution_json(examples, config_.schema);
            mf["cost_estimate"] = cost;
            mf["file_sha256"] = file_hash;
            mf["hash"] = hash;
            write_json(dir / (name + ".manifest.json"), mf);

            AugmentSummary summary;
            summary.model = m;
            summary.strategy = s;
            summary.examples = examples.size();
            summary.rejected_lines = dataset.rejected_lines;
            summary.failed_jobs = failed;
            summary.refused_jobs = refused;
            summary.cost = cost.is_number() ? cost.get<double>() : 0.0;
            summary.file = file;
            summary.hash = hash;
            summaries.push_back(std::move(summary));
        }
    }
    return summaries;
}

CurveSummary Pipeline::curve() {
    OutputLock lock(config_.output_dir);
    const auto splits = load_splits(config_.output_dir, config_.schema);

    std::vector<Variant> variants;
    ordered_json variant_info = ordered_json::array();
    std::string variant_hashes;
    variants.emplace_back("crowdsourced", splits.set.pool);
    variant_info.push_back({{"name", "crowdsourced"}, {"examples", splits.set.pool.size()}, {"hash", splits.hash}});
    for (const auto &m : config_.generation_models) {
        for (const Strategy s : config_.strategies) {
            const std::string name = variant_name(m, s);
            const fs::path file = config_.output_dir / "synthetic" / (name + ".jsonl");
            const fs::path manifest = config_.output_dir / "synthetic" / (name + ".manifest.json");
            if (!fs::exists(file) || !fs::exists(manifest)) {
                throw Error(ErrorKind::data,
                            fmt::format("synthetic dataset '{}' is missing; run the augment command first", name));
            }
            const auto hash = read_json(manifest).value("hash", std::string());
            variants.emplace_back(name, load_corpus(file, config_.schema));
            variant_info.push_back({{"name", name}, {"examples", variants.back().second.size()}, {"hash", hash}});
            variant_hashes += hash;
        }
    }
    note(fmt::format("curve: {} variants x {} sizes", variants.size(), config_.sizes.size()));

    const auto shuffle_seed = derive_seed(config_.seed, "shuffle");
    auto points = learning_curve(variants, splits.set.base, config_.sizes, splits.set.validation, splits.set.test,
                                 config_.schema, config_.train, shuffle_seed);

    const fs::path dir = config_.output_dir / "curve";
    fs::create_directories(dir);
    const std::string csv = to_curve_csv(points);
    write_file_atomic(dir / "curve.csv", csv);
    const std::string csv_hash = sha256_hex(csv);
    const std::string hash = chain({splits.hash, variant_hashes, config_.train.fingerprint(), csv_hash});

    ordered_json mf;
    mf["schema_version"] = kSchemaVersion;
    mf["kind"] = "curve";
    mf["task"] = config_.task;
    mf["split_hash"] = splits.hash;
    mf["shuffle_seed"] = shuffle_seed;
    mf["train_fingerprint"] = config_.train.fingerprint();
    mf["sizes"] = config_.sizes;
    mf["variants"] = variant_info;
    ordered_json members = ordered_json::array();
    for (const auto &p : points) {
        members.push_back({{"variant", p.variant}, {"size", p.sample_size}, {"membership", p.membership_digest}});
    }
    mf["points"] = members;
    mf["csv_sha256"] = csv_hash;
    mf["hash"] = hash;
    write_json(dir / "manifest.json", mf);

    return {std::move(points), dir / "curve.csv", hash};
}

std::vector<ZeroshotSummary> Pipeline::zeroshot(std::optional<std::string> model) {
    OutputLock lock(config_.output_dir);
    const auto splits = load_splits(config_.output_dir, config_.schema);
    const auto prompts = prompts_for(config_);
    ChatClient &chat = client();

    std::vector<std::string> models = config_.zeroshot_models;
    if (model) {
        models = {*model};
    }
    const fs::path dir = config_.output_dir / "zeroshot";
    fs::create_directories(dir);

    std::vector<std::string> texts;
    std::vector<std::string> gold;
    for (const auto &e : splits.set.test) {
        texts.push_back(e.text);
        gold.push_back(e.label);
    }

    std::vector<ZeroshotSummary> summaries;
    for (const auto &m : models) {
        note(fmt::format("zeroshot {}: {} texts", m, texts.size()));
        const auto batch = classify_batch(texts, config_.schema, chat, prompts.zeroshot, m);
        std::string predictions;
        std::vector<std::string> predicted;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            const auto &o = batch.outcomes[i];
            ordered_json line;
            line["text"] = texts[i];
            line["gold"] = gold[i];
            line["predicted"] = o.predicted;
            line["raw_reply"] = o.raw_reply;
            line["match_kind"] = to_string(o.match_kind);
            if (!o.note.empty()) {
                line["error"] = o.note;
            }
            predictions += line.dump(-1, ' ', false, json::error_handler_t::replace);
            predictions += '\n';
            predicted.push_back(o.predicted);
        }
        std::string log;
        for (const auto &r : batch.responses) {
            ordered_json line;
            line["model"] = m;
            line["backend"] = config_.client.backend;
            line["prompt_tokens"] = r.prompt_tokens;
            line["completion_tokens"] = r.completion_tokens;
            log += line.dump();
            log += '\n';
        }
        const auto report = classification_report(gold, predicted, &config_.schema);

        const std::string stem = model_file_stem(m);
        const fs::path file = dir / (stem + ".predictions.jsonl");
        write_file_atomic(file, predictions);
        write_file_atomic(dir / (stem + ".log.jsonl"), log);
        write_file_atomic(dir / (stem + ".report.txt"), render_text(report));
        write_file_atomic(dir / (stem + ".report.json"), render_json(report));
        const std::string file_hash = sha256_hex(predictions);
        const std::string hash = chain({splits.hash, m, file_hash});

        ordered_json mf;
        mf["schema_version"] = kSchemaVersion;
        mf["kind"] = "zeroshot";
        mf["task"] = config_.task;
        mf["model"] = m;
        mf["backend"] = config_.client.backend;
        mf["split_hash"] = splits.hash;
        mf["texts"] = texts.size();
        mf["invalid_rate"] = batch.invalid_rate;
        mf["accuracy"] = report.accuracy;
        mf["macro_f1"] = report.macro.f1;
        mf["file_sha256"] = file_hash;
        mf["hash"] = hash;
        write_json(dir / (stem + ".manifest.json"), mf);

        summaries.push_back({m, report, batch.invalid_rate, file, hash});
    }
    return summaries;
}

CostSummary Pipeline::cost() {
    OutputLock lock(config_.output_dir);
    CostSummary summary;
    std::map<std::tuple<std::string, std::string, std::string>, CostLine> grouped;
    for (const auto &[stage, sub] : {std::pair{"augment", "synthetic"}, std::pair{"zeroshot", "zeroshot"}}) {
        const fs::path dir = config_.output_dir / sub;
        if (!fs::is_directory(dir)) {
            continue;
        }
        std::vector<fs::path> logs;
        for (const auto &entry : fs::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (entry.is_regular_file() && name.ends_with(".log.jsonl")) {
                logs.push_back(entry.path());
            }
        }
        std::sort(logs.begin(), logs.end());
        for (const auto &path : logs) {
            for_each_jsonl_line(path, [&](std::size_t line_no, std::string_view text) {
                json j;
                try {
                    j = json::parse(text);
                } catch (const json::parse_error &e) {
                    throw Error(ErrorKind::data, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
                }
                const auto model = j.value("model", std::string());
                const auto backend = j.value("backend", std::string());
                auto &line = grouped[{stage, model, backend}];
                line.stage = stage;
                line.model = model;
                line.backend = backend;
                ++line.requests;
                line.prompt_tokens += j.value("prompt_tokens", std::size_t{0});
                line.completion_tokens += j.value("completion_tokens", std::size_t{0});
            });
        }
    }
    ordered_json rows = ordered_json::array();
    for (auto &[key, line] : grouped) {
        if (line.backend != "stub") {
            const auto it = config_.prices.find(line.model);
            if (it == config_.prices.end()) {
                throw Error(ErrorKind::config, fmt::format("no price configured for model '{}'", line.model));
            }
            line.cost = static_cast<double>(line.prompt_tokens) * it->second.input +
                        static_cast<double>(line.completion_tokens) * it->second.output;
        }
        summary.total += line.cost;
        rows.push_back({{"stage", line.stage},
                        {"model", line.model},
                        {"backend", line.backend},
                        {"requests", line.requests},
                        {"prompt_tokens", line.prompt_tokens},
                        {"completion_tokens", line.completion_tokens},
                        {"cost", line.cost}});
        summary.lines.push_back(line);
    }
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["kind"] = "cost";
    j["lines"] = rows;
    j["total"] = summary.total;
    write_json(config_.output_dir / "cost.json", j);
    return summary;
}

// Reports --------------------------------------------------------------------

std::vector<PredictionRecord> load_predictions(const fs::path &path) {
    std::vector<PredictionRecord> out;
    for_each_jsonl_line(path, [&](std::size_t line_no, std::string_view text) {
        try {
            const auto j = json::parse(text);
            out.push_back({j.value("text", std::string()), j.at("gold").get<std::string>(),
                           j.at("predicted").get<std::string>()});
        } catch (const json::exception &e) {
            throw Error(ErrorKind::data, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    });
    return out;
}

ClassificationReport report_from_predictions(const fs::path &path, const TaskSchema &schema) {
    const auto records = load_predictions(path);
    std::vector<std::string> gold;
    std::vector<std::string> predicted;
    for (const auto &r : records) {
        gold.push_back(r.gold);
        predicted.push_back(r.predicted);
    }
    return classification_report(gold, predicted, &schema);
}

ClassificationReport report_from_rows_json(std::string_view json_text) {
    try {
        auto j = json::parse(json_text);
        if (j.is_object()) {
            j = j.at("rows");
        }
        std::vector<ClassMetrics> rows;
        for (const auto &r : j) {
            rows.push_back({r.at("label").get<std::string>(), r.at("precision").get<double>(),
                            r.at("recall").get<double>(), r.at("f1").get<double>(),
                            r.at("support").get<std::size_t>()});
        }
        if (rows.empty()) {
            throw Error(ErrorKind::data, "no per-class rows given");
        }
        return summarize_rows(std::move(rows));
    } catch (const json::exception &e) {
        throw Error(ErrorKind::data, fmt::format("malformed rows JSON: {}", e.what()));
    }
}

}  // namespace synthaug

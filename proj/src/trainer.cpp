// SPDX-License-Identifier: Apache-2.0
#include "synthaug/trainer.hpp"

#include "synthaug/common.hpp"
#include "synthaug/metrics.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

namespace synthaug {

using nlohmann::json;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
    if (epochs == 0) {
        throw Error(ErrorKind::config, "train.epochs must be at least 1");
    }
    if (batch_size == 0) {
        throw Error(ErrorKind::config, "train.batch_size must be at least 1");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorKind::config, "train.learning_rate must be positive");
    }
    if (weight_decay < 0.0 || learning_rate * weight_decay >= 1.0) {
        throw Error(ErrorKind::config, "train.weight_decay must be >= 0 and below 1/learning_rate");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
        throw Error(ErrorKind::config, "train.betas must lie in [0, 1) and epsilon must be positive");
    }
    if (feature_dim < 2 || !std::has_single_bit(feature_dim) || feature_dim > (std::size_t{1} << 31)) {
        throw Error(ErrorKind::config, fmt::format("train.feature_dim must be a power of two, got {}", feature_dim));
    }
    if (word_ngrams.empty() && char_ngrams.empty()) {
        throw Error(ErrorKind::config, "at least one word or character n-gram order is required");
    }
    for (const int n : word_ngrams) {
        if (n < 1) {
            throw Error(ErrorKind::config, "word n-gram orders must be >= 1");
        }
    }
    for (const int n : char_ngrams) {
        if (n < 1) {
            throw Error(ErrorKind::config, "character n-gram orders must be >= 1");
        }
    }
}

std::string TrainConfig::fingerprint() const {
    ordered_json j;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["learning_rate"] = learning_rate;
    j["weight_decay"] = weight_decay;
    j["beta1"] = beta1;
    j["beta2"] = beta2;
    j["epsilon"] = epsilon;
    j["seed"] = seed;
    j["word_ngrams"] = word_ngrams;
    j["char_ngrams"] = char_ngrams;
    j["feature_dim"] = feature_dim;
    return sha256_hex(j.dump());
}

double SparseVector::norm() const noexcept {
    double s = 0.0;
    for (const double v : values) {
        s += v * v;
    }
    return std::sqrt(s);
}

// Features -------------------------------------------------------------------

namespace {

constexpr std::uint64_t kWordBasis = 0x9ae16a3b2f90404fULL;
constexpr std::uint64_t kCharBasis = 0xc3a5c85c97cb3127ULL;

bool is_word_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || u >= 0x80;
}

std::vector<std::string_view> words_of(std::string_view lowered) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < lowered.size()) {
        while (i < lowered.size() && !is_word_char(lowered[i])) {
            ++i;
        }
        const auto start = i;
        while (i < lowered.size() && is_word_char(lowered[i])) {
            ++i;
        }
        if (i > start) {
            out.push_back(lowered.substr(start, i - start));
        }
    }
    return out;
}

std::uint32_t bucket(std::uint64_t h, std::size_t dim) {
    return static_cast<std::uint32_t>(splitmix64(h) & (dim - 1));
}

}  // namespace

SparseVector featurize(std::string_view text, const TrainConfig &config) {
    const std::string lowered = to_lower_ascii(text);
    const auto words = words_of(lowered);
    std::vector<std::uint32_t> hits;

    for (const int n : config.word_ngrams) {
        const auto order = static_cast<std::size_t>(n);
        for (std::size_t i = 0; i + order <= words.size(); ++i) {
            std::uint64_t h = fnv1a64(std::to_string(n), kWordBasis);
            for (std::size_t k = 0; k < order; ++k) {
                h = fnv1a64(words[i + k], h);
                h = fnv1a64(" ", h);
            }
            hits.push_back(bucket(h, config.feature_dim));
        }
    }
    if (!config.char_ngrams.empty()) {
        std::string padded;
        for (const auto word : words) {
            padded.assign(1, '<');
            padded.append(word);
            padded.push_back('>');
            const std::string_view view(padded);
            for (const int n : config.char_ngrams) {
                const auto order = static_cast<std::size_t>(n);
                const std::uint64_t basis = fnv1a64(std::to_string(n), kCharBasis);
                for (std::size_t i = 0; i + order <= view.size(); ++i) {
                    hits.push_back(bucket(fnv1a64(view.substr(i, order), basis), config.feature_dim));
                }
            }
        }
    }

    SparseVector x;
    if (hits.empty()) {
        return x;
    }
    std::sort(hits.begin(), hits.end());
    for (std::size_t i = 0; i < hits.size();) {
        std::size_t j = i;
        while (j < hits.size() && hits[j] == hits[i]) {
            ++j;
        }
        x.indices.push_back(hits[i]);
        x.values.push_back(static_cast<double>(j - i));
        i = j;
    }
    const double norm = x.norm();
    for (auto &v : x.values) {
        v /= norm;
    }
    return x;
}

// Model ----------------------------------------------------------------------

Model::Model(std::vector<std::string> labels, std::size_t feature_dim)
    : labels_(std::move(labels)),
      feature_dim_(feature_dim),
      weights_(feature_dim * labels_.size(), 0.0),
      bias_(labels_.size(), 0.0) {}

std::vector<double> Model::logits(const SparseVector &x) const {
    const std::size_t k = labels_.size();
    std::vector<double> z(bias_);
    for (std::size_t n = 0; n < x.indices.size(); ++n) {
        const double *row = weights_.data() + static_cast<std::size_t>(x.indices[n]) * k;
        const double v = x.values[n];
        for (std::size_t c = 0; c < k; ++c) {
            z[c] += row[c] * v;
        }
    }
    return z;
}

namespace {

/// In-place softmax; returns log-sum-exp of the input.
double softmax_inplace(std::vector<double> &z) {
    const double peak = *std::max_element(z.begin(), z.end());
    double total = 0.0;
    for (auto &v : z) {
        v = std::exp(v - peak);
        total += v;
    }
    for (auto &v : z) {
        v /= total;
    }
    return peak + std::log(total);
}

}  // namespace

std::vector<double> Model::probabilities(const SparseVector &x) const {
    auto z = logits(x);
    softmax_inplace(z);
    return z;
}

std::size_t Model::predict_index(const SparseVector &x) const {
    const auto z = logits(x);
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

bool Model::is_finite() const noexcept {
    const auto finite = [](double v) { return std::isfinite(v); };
    return std::all_of(weights_.begin(), weights_.end(), finite) && std::all_of(bias_.begin(), bias_.end(), finite);
}

std::string predict(const Model &model, std::string_view text) {
    return model.labels()[model.predict_index(featurize(text, model.config))];
}

std::string save_model(const Model &model) {
    ordered_json j;
    j["format"] = "synthaug-model";
    j["version"] = 1;
    j["labels"] = model.labels();
    j["feature_dim"] = model.feature_dim();
    j["fingerprint"] = model.fingerprint;
    const auto &c = model.config;
    j["config"] = {{"epochs", c.epochs},
                   {"batch_size", c.batch_size},
                   {"learning_rate", c.learning_rate},
                   {"weight_decay", c.weight_decay},
                   {"beta1", c.beta1},
                   {"beta2", c.beta2},
                   {"epsilon", c.epsilon},
                   {"seed", c.seed},
                   {"word_ngrams", c.word_ngrams},
                   {"char_ngrams", c.char_ngrams},
                   {"feature_dim", c.feature_dim}};
    j["bias"] = std::vector<double>(model.raw_bias().begin(), model.raw_bias().end());
    ordered_json rows = ordered_json::array();
    const std::size_t k = model.num_labels();
    const auto w = model.raw_weights();
    for (std::size_t f = 0; f < model.feature_dim(); ++f) {
        const auto row = w.subspan(f * k, k);
        if (std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; })) {
            rows.push_back({{"feature", f}, {"weights", std::vector<double>(row.begin(), row.end())}});
        }
    }
    j["weights"] = std::move(rows);
    return j.dump() + "\n";
}

Model load_model(std::string_view json_text) {
    try {
        const auto j = json::parse(json_text);
        if (j.value("format", std::string()) != "synthaug-model") {
            throw Error(ErrorKind::data, "not a model file");
        }
        Model model(j.at("labels").get<std::vector<std::string>>(), j.at("feature_dim").get<std::size_t>());
        model.fingerprint = j.value("fingerprint", std::string());
        const auto &c = j.at("config");
        auto &cfg = model.config;
        cfg.epochs = c.at("epochs").get<std::size_t>();
        cfg.batch_size = c.at("batch_size").get<std::size_t>();
        cfg.learning_rate = c.at("learning_rate").get<double>();
        cfg.weight_decay = c.at("weight_decay").get<double>();
        cfg.beta1 = c.at("beta1").get<double>();
        cfg.beta2 = c.at("beta2").get<double>();
        cfg.epsilon = c.at("epsilon").get<double>();
        cfg.seed = c.at("seed").get<std::uint64_t>();
        cfg.word_ngrams = c.at("word_ngrams").get<std::vector<int>>();
        cfg.char_ngrams = c.at("char_ngrams").get<std::vector<int>>();
        cfg.feature_dim = c.at("feature_dim").get<std::size_t>();
        const auto bias = j.at("bias").get<std::vector<double>>();
        if (bias.size() != model.num_labels()) {
            throw Error(ErrorKind::data, "bias length does not match the label count");
        }
        std::copy(bias.begin(), bias.end(), model.raw_bias().begin());
        for (const auto &row : j.at("weights")) {
            const auto f = row.at("feature").get<std::size_t>();
            const auto values = row.at("weights").get<std::vector<double>>();
            if (f >= model.feature_dim() || values.size() != model.num_labels()) {
                throw Error(ErrorKind::data, fmt::format("bad weight row for feature {}", f));
            }
            for (std::size_t c2 = 0; c2 < values.size(); ++c2) {
                model.weight(c2, f) = values[c2];
            }
        }
        return model;
    } catch (const json::exception &e) {
        throw Error(ErrorKind::data, fmt::format("malformed model JSON: {}", e.what()));
    }
}

// Loss and gradient ----------------------------------------------------------

double mean_cross_entropy(const Model &model, std::span<const SparseVector *const> rows,
                          std::span<const std::size_t> targets) {
    if (rows.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto z = model.logits(*rows[i]);
        const double peak = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (const double v : z) {
            sum += std::exp(v - peak);
        }
        total += peak + std::log(sum) - z[targets[i]];
    }
    return total / static_cast<double>(rows.size());
}

BatchGradient batch_gradient(const Model &model, std::span<const SparseVector *const> rows,
                             std::span<const std::size_t> targets) {
    const std::size_t k = model.num_labels();
    BatchGradient g;
    g.bias.assign(k, 0.0);
    if (rows.empty()) {
        return g;
    }
    std::unordered_map<std::uint32_t, std::size_t> slot;
    std::vector<std::uint32_t> order;
    std::vector<double> acc;
    const double scale = 1.0 / static_cast<double>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const SparseVector &x = *rows[i];
        auto p = model.logits(x);
        const double target_logit = p[targets[i]];
        g.loss += softmax_inplace(p) - target_logit;
        p[targets[i]] -= 1.0;
        for (std::size_t c = 0; c < k; ++c) {
            g.bias[c] += p[c] * scale;
        }
        for (std::size_t n = 0; n < x.indices.size(); ++n) {
            auto [it, fresh] = slot.try_emplace(x.indices[n], order.size());
            if (fresh) {
                order.push_back(x.indices[n]);
                acc.resize(acc.size() + k, 0.0);
            }
            double *dst = acc.data() + it->second * k;
            const double v = x.values[n] * scale;
            for (std::size_t c = 0; c < k; ++c) {
                dst[c] += p[c] * v;
            }
        }
    }
    g.loss *= scale;

    std::vector<std::size_t> perm(order.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return order[a] < order[b]; });
    g.features.reserve(order.size());
    g.weights.resize(order.size() * k);
    for (std::size_t r = 0; r < perm.size(); ++r) {
        g.features.push_back(order[perm[r]]);
        std::copy_n(acc.data() + perm[r] * k, k, g.weights.data() + r * k);
    }
    return g;
}

std::size_t select_checkpoint(std::span<const double> validation_losses) {
    if (validation_losses.empty()) {
        throw Error(ErrorKind::data, "no validation losses to select from");
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < validation_losses.size(); ++i) {
        if (validation_losses[i] < validation_losses[best]) {
            best = i;
        }
    }
    return best + 1;
}

// Training -------------------------------------------------------------------

namespace {

class LazyAdamW {
public:
    LazyAdamW(Model &model, const TrainConfig &config, std::size_t total_steps)
        : model_(model),
          cfg_(config),
          k_(model.num_labels()),
          m_(model.raw_weights().size(), 0.0),
          v_(model.raw_weights().size(), 0.0),
          last_(model.feature_dim(), 0),
          bias_m_(k_, 0.0),
          bias_v_(k_, 0.0),
          decay_pow_(total_steps + 1) {
        const double keep = 1.0 - config.learning_rate * config.weight_decay;
        decay_pow_[0] = 1.0;
        for (std::size_t i = 1; i < decay_pow_.size(); ++i) {
            decay_pow_[i] = decay_pow_[i - 1] * keep;
        }
    }

    void step(const BatchGradient &g) {
        ++t_;
        const double lr = cfg_.learning_rate;
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        auto w = model_.raw_weights();
        for (std::size_t r = 0; r < g.features.size(); ++r) {
            const std::size_t f = g.features[r];
            // decay owed for the steps this feature sat out, plus this step's
            const double decay = decay_pow_[t_ - last_[f]];
            last_[f] = static_cast<std::uint32_t>(t_);
            const std::size_t base = f * k_;
            for (std::size_t c = 0; c < k_; ++c) {
                const double grad = g.weights[r * k_ + c];
                double &m = m_[base + c];
                double &v = v_[base + c];
                m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
                v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * grad * grad;
                w[base + c] = w[base + c] * decay - lr * (m / c1) / (std::sqrt(v / c2) + cfg_.epsilon);
            }
        }
        auto b = model_.raw_bias();
        for (std::size_t c = 0; c < k_; ++c) {
            bias_m_[c] = cfg_.beta1 * bias_m_[c] + (1.0 - cfg_.beta1) * g.bias[c];
            bias_v_[c] = cfg_.beta2 * bias_v_[c] + (1.0 - cfg_.beta2) * g.bias[c] * g.bias[c];
            b[c] -= lr * (bias_m_[c] / c1) / (std::sqrt(bias_v_[c] / c2) + cfg_.epsilon);
        }
    }

    /// Applies all pending decay so the weights equal the eager result.
    void settle() {
        auto w = model_.raw_weights();
        for (std::size_t f = 0; f < last_.size(); ++f) {
            if (last_[f] == t_) {
                continue;
            }
            const double decay = decay_pow_[t_ - last_[f]];
            last_[f] = static_cast<std::uint32_t>(t_);
            for (std::size_t c = 0; c < k_; ++c) {
                w[f * k_ + c] *= decay;
            }
        }
    }

private:
    Model &model_;
    const TrainConfig &cfg_;
    std::size_t k_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::vector<std::uint32_t> last_;
    std::vector<double> bias_m_;
    std::vector<double> bias_v_;
    std::vector<double> decay_pow_;
    std::size_t t_ = 0;
};

}  // namespace

TrainOutcome train_featurized(std::span<const SparseVector *const> train_rows,
                              std::span<const std::size_t> train_targets,
                              std::span<const SparseVector *const> validation_rows,
                              std::span<const std::size_t> validation_targets, const std::vector<std::string> &labels,
                              const TrainConfig &config) {
    config.validate();
    if (train_rows.size() != train_targets.size() || validation_rows.size() != validation_targets.size()) {
        throw Error(ErrorKind::data, "feature and target counts differ");
    }
    if (train_rows.empty()) {
        throw Error(ErrorKind::data, "training set is empty");
    }
    if (validation_rows.empty()) {
        throw Error(ErrorKind::data, "validation set is empty");
    }
    if (std::all_of(train_targets.begin(), train_targets.end(),
                    [&](std::size_t t) { return t == train_targets.front(); })) {
        throw Error(ErrorKind::data,
                    fmt::format("training set is single-class (only '{}')", labels.at(train_targets.front())));
    }

    Model model(labels, config.feature_dim);
    model.config = config;
    const std::size_t n = train_rows.size();
    const std::size_t batches = (n + config.batch_size - 1) / config.batch_size;
    LazyAdamW optimizer(model, config, batches * config.epochs);

    TrainOutcome outcome;
    std::vector<std::size_t> order(n);
    std::vector<const SparseVector *> batch_rows;
    std::vector<std::size_t> batch_targets;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(config.seed ^ static_cast<std::uint64_t>(epoch));
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            batch_rows.clear();
            batch_targets.clear();
            for (std::size_t i = start; i < stop; ++i) {
                batch_rows.push_back(train_rows[order[i]]);
                batch_targets.push_back(train_targets[order[i]]);
            }
            const auto g = batch_gradient(model, batch_rows, batch_targets);
            if (!std::isfinite(g.loss)) {
                throw Error(ErrorKind::divergence, fmt::format("training loss became non-finite in epoch {}", epoch));
            }
            optimizer.step(g);
        }
        optimizer.settle();
        const double loss = mean_cross_entropy(model, validation_rows, validation_targets);
        if (!std::isfinite(loss) || !model.is_finite()) {
            throw Error(ErrorKind::divergence, fmt::format("validation loss became non-finite in epoch {}", epoch));
        }
        outcome.validation_losses.push_back(loss);
        if (outcome.best_epoch == 0 || loss < outcome.best_validation_loss) {
            outcome.best_epoch = epoch;
            outcome.best_validation_loss = loss;
            outcome.model = model;
        }
    }
    return outcome;
}

namespace {

std::string training_fingerprint(std::span<const LabeledExample> train_set, std::span<const LabeledExample> validation,
                                 const TrainConfig &config) {
    return sha256_hex(fmt::format("{}|{}|{}", config.fingerprint(), membership_digest(train_set),
                                  membership_digest(validation)));
}

}  // namespace

TrainOutcome train(std::span<const LabeledExample> train_set, std::span<const LabeledExample> validation,
                   const TaskSchema &schema, const TrainConfig &config) {
    config.validate();
    std::vector<SparseVector> features;
    features.reserve(train_set.size() + validation.size());
    std::vector<std::size_t> train_targets;
    std::vector<std::size_t> validation_targets;
    for (const auto &e : train_set) {
        features.push_back(featurize(e.text, config));
        train_targets.push_back(schema.index_of(e.label));
    }
    for (const auto &e : validation) {
        features.push_back(featurize(e.text, config));
        validation_targets.push_back(schema.index_of(e.label));
    }
    std::vector<const SparseVector *> rows;
    rows.reserve(features.size());
    for (const auto &f : features) {
        rows.push_back(&f);
    }
    const std::span<const SparseVector *const> all(rows);
    auto outcome = train_featurized(all.first(train_set.size()), train_targets, all.subspan(train_set.size()),
                                    validation_targets, schema.labels, config);
    outcome.model.fingerprint = training_fingerprint(train_set, validation, config);
    return outcome;
}

double gradient_check(const TrainConfig &config, double step) {
    constexpr std::size_t kLabels = 3;
    constexpr std::size_t kFeatures = 20;
    constexpr std::size_t kRows = 8;
    Rng rng(derive_seed(config.seed, "gradient-check"));

    Model model({"a", "b", "c"}, 32);
    for (std::size_t f = 0; f < kFeatures; ++f) {
        for (std::size_t c = 0; c < kLabels; ++c) {
            model.weight(c, f) = 0.5 * rng.normal();
        }
    }
    for (std::size_t c = 0; c < kLabels; ++c) {
        model.bias(c) = 0.1 * rng.normal();
    }
    std::vector<SparseVector> data(kRows);
    std::vector<std::size_t> targets(kRows);
    for (std::size_t i = 0; i < kRows; ++i) {
        for (std::uint32_t f = 0; f < kFeatures; ++f) {
            if (rng.unit() < 0.6) {
                data[i].indices.push_back(f);
                data[i].values.push_back(rng.normal());
            }
        }
        targets[i] = static_cast<std::size_t>(rng.below(kLabels));
    }
    std::vector<const SparseVector *> rows;
    for (const auto &x : data) {
        rows.push_back(&x);
    }

    const auto g = batch_gradient(model, rows, targets);
    auto relative = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-4); };
    auto numeric = [&](double &param) {
        const double saved = param;
        param = saved + step;
        const double up = mean_cross_entropy(model, rows, targets);
        param = saved - step;
        const double down = mean_cross_entropy(model, rows, targets);
        param = saved;
        return (up - down) / (2.0 * step);
    };

    double worst = 0.0;
    for (std::size_t f = 0; f < kFeatures; ++f) {
        const auto pos = std::lower_bound(g.features.begin(), g.features.end(), static_cast<std::uint32_t>(f));
        const bool present = pos != g.features.end() && *pos == f;
        for (std::size_t c = 0; c < kLabels; ++c) {
            const double analytic =
                present ? g.weights[static_cast<std::size_t>(pos - g.features.begin()) * kLabels + c] : 0.0;
            worst = std::max(worst, relative(analytic, numeric(model.weight(c, f))));
        }
    }
    for (std::size_t c = 0; c < kLabels; ++c) {
        worst = std::max(worst, relative(g.bias[c], numeric(model.bias(c))));
    }
    return worst;
}

// Learning curves ------------------------------------------------------------

std::string membership_digest(std::span<const LabeledExample> examples) {
    std::string bytes;
    bytes.reserve(examples.size() * 17);
    for (const auto &e : examples) {
        bytes += fmt::format("{:016x}\n", example_identity(e));
    }
    return sha256_hex(bytes);
}

std::vector<LabeledExample> curve_order(const Variant &variant, std::uint64_t seed) {
    std::vector<LabeledExample> ordered = variant.second;
    Rng rng(derive_seed(seed, "curve:" + variant.first));
    rng.shuffle(ordered);
    return ordered;
}

std::vector<LabeledExample> curve_training_set(std::span<const LabeledExample> base,
                                               std::span<const LabeledExample> ordered_variant, std::size_t size) {
    if (size < base.size()) {
        throw Error(ErrorKind::config,
                    fmt::format("curve size {} is smaller than the base set ({})", size, base.size()));
    }
    const std::size_t extra = size - base.size();
    if (extra > ordered_variant.size()) {
        throw Error(ErrorKind::data, fmt::format("size {} needs {} added examples but only {} exist (short by {})",
                                                 size, extra, ordered_variant.size(), extra - ordered_variant.size()));
    }
    std::vector<LabeledExample> out(base.begin(), base.end());
    out.insert(out.end(), ordered_variant.begin(), ordered_variant.begin() + static_cast<std::ptrdiff_t>(extra));
    return out;
}

std::vector<CurvePoint> learning_curve(const std::vector<Variant> &variants, std::span<const LabeledExample> base,
                                       std::span<const std::size_t> sizes, std::span<const LabeledExample> validation,
                                       std::span<const LabeledExample> test, const TaskSchema &schema,
                                       const TrainConfig &config, std::uint64_t shuffle_seed) {
    config.validate();
    if (sizes.empty()) {
        throw Error(ErrorKind::config, "no curve sizes given");
    }
    if (!std::is_sorted(sizes.begin(), sizes.end())) {
        throw Error(ErrorKind::config, "curve sizes must be ascending");
    }
    std::vector<std::vector<LabeledExample>> ordered;
    for (const auto &variant : variants) {
        ordered.push_back(curve_order(variant, shuffle_seed));
        const std::size_t need = sizes.back() > base.size() ? sizes.back() - base.size() : 0;
        if (sizes.back() < base.size()) {
            throw Error(ErrorKind::config, "curve sizes must not be smaller than the base set");
        }
        if (need > ordered.back().size()) {
            throw Error(ErrorKind::data,
                        fmt::format("variant '{}' has {} examples but size {} needs {} (short by {})", variant.first,
                                    ordered.back().size(), sizes.back(), need, need - ordered.back().size()));
        }
    }

    // featurise every distinct text once
    std::unordered_map<std::string, std::size_t> index;
    std::vector<SparseVector> features;
    auto intern = [&](const std::string &text) {
        auto [it, fresh] = index.try_emplace(text, features.size());
        if (fresh) {
            features.push_back(featurize(text, config));
        }
        return it->second;
    };
    auto rows_of = [&](std::span<const LabeledExample> set, std::vector<std::size_t> &ids,
                       std::vector<std::size_t> &targets) {
        for (const auto &e : set) {
            ids.push_back(intern(e.text));
            targets.push_back(schema.index_of(e.label));
        }
    };
    std::vector<std::size_t> base_ids, base_targets, val_ids, val_targets, test_ids, test_targets;
    rows_of(base, base_ids, base_targets);
    rows_of(validation, val_ids, val_targets);
    rows_of(test, test_ids, test_targets);
    std::vector<std::vector<std::size_t>> variant_ids(variants.size()), variant_targets(variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v) {
        rows_of(ordered[v], variant_ids[v], variant_targets[v]);
    }
    auto pointers = [&](const std::vector<std::size_t> &ids) {
        std::vector<const SparseVector *> out;
        out.reserve(ids.size());
        for (const auto id : ids) {
            out.push_back(&features[id]);
        }
        return out;
    };
    const auto val_rows = pointers(val_ids);
    const auto test_rows = pointers(test_ids);
    std::vector<std::string> gold;
    gold.reserve(test.size());
    for (const auto &e : test) {
        gold.push_back(e.label);
    }

    std::vector<CurvePoint> points;
    for (std::size_t v = 0; v < variants.size(); ++v) {
        for (const std::size_t size : sizes) {
            const auto members = curve_training_set(base, ordered[v], size);
            const std::size_t extra = size - base.size();
            std::vector<std::size_t> ids = base_ids;
            std::vector<std::size_t> targets = base_targets;
            ids.insert(ids.end(), variant_ids[v].begin(), variant_ids[v].begin() + static_cast<std::ptrdiff_t>(extra));
            targets.insert(targets.end(), variant_targets[v].begin(),
                           variant_targets[v].begin() + static_cast<std::ptrdiff_t>(extra));
            const auto rows = pointers(ids);
            const auto outcome = train_featurized(rows, targets, val_rows, val_targets, schema.labels, config);

            std::vector<std::string> predicted;
            predicted.reserve(test_rows.size());
            for (const auto *x : test_rows) {
                predicted.push_back(schema.labels[outcome.model.predict_index(*x)]);
            }
            const auto report = classification_report(gold, predicted, &schema);
            CurvePoint point;
            point.variant = variants[v].first;
            point.sample_size = size;
            point.macro_f1 = report.macro.f1;
            point.accuracy = report.accuracy;
            point.best_epoch = outcome.best_epoch;
            point.val_loss = outcome.best_validation_loss;
            point.membership_digest = membership_digest(members);
            points.push_back(std::move(point));
        }
    }
    return points;
}

namespace {

std::string shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string to_curve_csv(std::span<const CurvePoint> points) {
    std::string out = "variant,size,macro_f1,accuracy,best_epoch,val_loss\n";
    for (const auto &p : points) {
        out += fmt::format("{},{},{},{},{},{}\n", csv_field(p.variant), p.sample_size, shortest(p.macro_f1),
                           shortest(p.accuracy), p.best_epoch, shortest(p.val_loss));
    }
    return out;
}

namespace {

std::vector<std::string> csv_fields(std::string_view line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"' && cur.empty()) {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) {
        throw Error(ErrorKind::data, fmt::format("curve csv line {}: unterminated quote", line_no));
    }
    fields.push_back(std::move(cur));
    return fields;
}

template <typename T>
T csv_number(const std::string &field, std::string_view name, std::size_t line_no) {
    T value{};
    const auto *end = field.data() + field.size();
    const auto res = std::from_chars(field.data(), end, value);
    if (field.empty() || res.ec != std::errc() || res.ptr != end) {
        throw Error(ErrorKind::data, fmt::format("curve csv line {}: bad {} '{}'", line_no, name, field));
    }
    return value;
}

}  // namespace

std::vector<CurvePoint> parse_curve_csv(std::string_view text) {
    static constexpr std::string_view kHeader = "variant,size,macro_f1,accuracy,best_epoch,val_loss";
    std::vector<CurvePoint> points;
    std::size_t line_no = 0;
    for (auto line : split_lines(text)) {
        ++line_no;
        if (line.ends_with('\r')) {
            line.remove_suffix(1);
        }
        if (line_no == 1) {
            if (line != kHeader) {
                throw Error(ErrorKind::data, fmt::format("curve csv: expected header '{}'", kHeader));
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto f = csv_fields(line, line_no);
        if (f.size() != 6) {
            throw Error(ErrorKind::data, fmt::format("curve csv line {}: expected 6 fields, got {}", line_no, f.size()));
        }
        CurvePoint p;
        p.variant = f[0];
        p.sample_size = csv_number<std::size_t>(f[1], "size", line_no);
        p.macro_f1 = csv_number<double>(f[2], "macro_f1", line_no);
        p.accuracy = csv_number<double>(f[3], "accuracy", line_no);
        p.best_epoch = csv_number<std::size_t>(f[4], "best_epoch", line_no);
        p.val_loss = csv_number<double>(f[5], "val_loss", line_no);
        if (p.variant.empty() || p.sample_size == 0 || p.best_epoch == 0) {
            throw Error(ErrorKind::data,
                        fmt::format("curve csv line {}: variant, size and best_epoch must be set", line_no));
        }
        for (const double m : {p.macro_f1, p.accuracy}) {
            if (!(m >= 0.0 && m <= 1.0)) {
                throw Error(ErrorKind::data, fmt::format("curve csv line {}: metric {} outside [0, 1]", line_no, m));
            }
        }
        if (!(std::isfinite(p.val_loss) && p.val_loss >= 0.0)) {
            throw Error(ErrorKind::data, fmt::format("curve csv line {}: bad val_loss", line_no));
        }
        points.push_back(std::move(p));
    }
    if (line_no == 0) {
        throw Error(ErrorKind::data, "curve csv: empty input");
    }
    return points;
}

}  // namespace synthaug

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "synthaug/corpus.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace synthaug {

struct TrainConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 42;
    std::vector<int> word_ngrams{1, 2};
    std::vector<int> char_ngrams{3, 4, 5};
    std::size_t feature_dim = std::size_t{1} << 18;

    /// Throws Error(config) unless epochs, batch_size >= 1, the learning rate is
    /// positive and feature_dim is a power of two.
    void validate() const;
    [[nodiscard]] std::string fingerprint() const;
};

/// Sorted, duplicate-free feature indices with their values.
struct SparseVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    [[nodiscard]] std::size_t size() const noexcept { return indices.size(); }
    [[nodiscard]] double norm() const noexcept;
};

/// Hashed bag of lowercase word n-grams and boundary-marked character n-grams,
/// L2-normalised. Empty (or token-free) text gives the zero vector.
[[nodiscard]] SparseVector featurize(std::string_view text, const TrainConfig &config);

/// Multinomial logistic regression over hashed features.
class Model {
public:
    Model() = default;
    Model(std::vector<std::string> labels, std::size_t feature_dim);

    [[nodiscard]] const std::vector<std::string> &labels() const noexcept { return labels_; }
    [[nodiscard]] std::size_t num_labels() const noexcept { return labels_.size(); }
    [[nodiscard]] std::size_t feature_dim() const noexcept { return feature_dim_; }

    [[nodiscard]] double weight(std::size_t label, std::size_t feature) const {
        return weights_[feature * labels_.size() + label];
    }
    double &weight(std::size_t label, std::size_t feature) { return weights_[feature * labels_.size() + label]; }
    [[nodiscard]] double bias(std::size_t label) const { return bias_[label]; }
    double &bias(std::size_t label) { return bias_[label]; }

    /// Feature-major storage: entry (feature * num_labels + label).
    [[nodiscard]] std::span<const double> raw_weights() const noexcept { return weights_; }
    [[nodiscard]] std::span<double> raw_weights() noexcept { return weights_; }
    [[nodiscard]] std::span<const double> raw_bias() const noexcept { return bias_; }
    [[nodiscard]] std::span<double> raw_bias() noexcept { return bias_; }

    [[nodiscard]] std::vector<double> logits(const SparseVector &x) const;
    [[nodiscard]] std::vector<double> probabilities(const SparseVector &x) const;
    /// Index of the largest logit; ties go to the earliest label.
    [[nodiscard]] std::size_t predict_index(const SparseVector &x) const;
    [[nodiscard]] bool is_finite() const noexcept;

    std::string fingerprint;
    TrainConfig config;

private:
    std::vector<std::string> labels_;
    std::size_t feature_dim_ = 0;
    std::vector<double> weights_;
    std::vector<double> bias_;
};

[[nodiscard]] std::string predict(const Model &model, std::string_view text);

[[nodiscard]] std::string save_model(const Model &model);
[[nodiscard]] Model load_model(std::string_view json_text);

/// Mean softmax cross-entropy of `model` over rows with target label indices.
[[nodiscard]] double mean_cross_entropy(const Model &model, std::span<const SparseVector *const> rows,
                                        std::span<const std::size_t> targets);

/// Gradient of mean_cross_entropy, restricted to the features the rows touch.
struct BatchGradient {
    std::vector<std::uint32_t> features;  ///< sorted
    std::vector<double> weights;          ///< features.size() x num_labels, feature-major
    std::vector<double> bias;
    double loss = 0.0;
};

[[nodiscard]] BatchGradient batch_gradient(const Model &model, std::span<const SparseVector *const> rows,
                                           std::span<const std::size_t> targets);

/// 1-based epoch with the smallest loss; the earliest wins ties.
[[nodiscard]] std::size_t select_checkpoint(std::span<const double> validation_losses);

struct TrainOutcome {
    Model model;  ///< snapshot from best_epoch
    std::vector<double> validation_losses;
    std::size_t best_epoch = 0;
    double best_validation_loss = 0.0;
};

/// Mini-batch training with lazily applied AdamW (moments and decoupled decay
/// are updated only for features present in a batch; pending decay is applied
/// on the next touch and at each epoch end). Every epoch is scored on the
/// validation set and the lowest-loss snapshot is returned.
[[nodiscard]] TrainOutcome train(std::span<const LabeledExample> train_set,
                                 std::span<const LabeledExample> validation, const TaskSchema &schema,
                                 const TrainConfig &config);

/// Same as train() over already featurised rows.
[[nodiscard]] TrainOutcome train_featurized(std::span<const SparseVector *const> train_rows,
                                            std::span<const std::size_t> train_targets,
                                            std::span<const SparseVector *const> validation_rows,
                                            std::span<const std::size_t> validation_targets,
                                            const std::vector<std::string> &labels, const TrainConfig &config);

/// Central-difference check of batch_gradient on a random 3-class, 20-feature
/// instance seeded from config.seed. Returns the largest relative error.
[[nodiscard]] double gradient_check(const TrainConfig &config, double step = 1e-6);

// Learning curves ------------------------------------------------------------

struct CurvePoint {
    std::string variant;
    std::size_t sample_size = 0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    std::size_t best_epoch = 0;
    double val_loss = 0.0;
    std::string membership_digest;  ///< digest of the ordered training set
};

using Variant = std::pair<std::string, std::vector<LabeledExample>>;

/// Digest over the ordered identities of a training set.
[[nodiscard]] std::string membership_digest(std::span<const LabeledExample> examples);

/// The variant's examples in the fixed per-run order used for every size.
[[nodiscard]] std::vector<LabeledExample> curve_order(const Variant &variant, std::uint64_t seed);

/// base followed by the first (size - |base|) examples of an ordered variant.
[[nodiscard]] std::vector<LabeledExample> curve_training_set(std::span<const LabeledExample> base,
                                                             std::span<const LabeledExample> ordered_variant,
                                                             std::size_t size);

/// One point per (variant, size): train on curve_training_set, pick the
/// best-validation epoch, score it on test.
[[nodiscard]] std::vector<CurvePoint> learning_curve(const std::vector<Variant> &variants,
                                                     std::span<const LabeledExample> base,
                                                     std::span<const std::size_t> sizes,
                                                     std::span<const LabeledExample> validation,
                                                     std::span<const LabeledExample> test, const TaskSchema &schema,
                                                     const TrainConfig &config, std::uint64_t shuffle_seed);

/// CSV with header variant,size,macro_f1,accuracy,best_epoch,val_loss.
[[nodiscard]] std::string to_curve_csv(std::span<const CurvePoint> points);
/// Reads rows written by to_curve_csv or by an external trainer using the same
/// header. Membership digests are not part of the file. Throws Error(data).
[[nodiscard]] std::vector<CurvePoint> parse_curve_csv(std::string_view text);

}  // namespace synthaug

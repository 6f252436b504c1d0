// SPDX-License-Identifier: Apache-2.0
#include "synthaug/common.hpp"
#include "synthaug/metrics.hpp"
#include "synthaug/trainer.hpp"

#include "../support/toy.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

using namespace synthaug;

namespace {

TaskSchema two_labels() {
    TaskSchema s;
    s.task_id = "pair";
    s.labels = {"yes", "no"};
    return s;
}

// Perceptron over word sets: zero training mistakes in a pass shows the
// fixture is linearly separable in word space.
bool perceptron_separates(const std::vector<LabeledExample> &data) {
    std::map<std::string, int> w;
    int b = 0;
    auto words = [](const std::string &t) {
        std::set<std::string> s;
        std::istringstream in(t);
        for (std::string x; in >> x;) {
            s.insert(x);
        }
        return s;
    };
    for (int pass = 0; pass < 100; ++pass) {
        int mistakes = 0;
        for (const auto &e : data) {
            const int y = e.label == "yes" ? 1 : -1;
            int score = b;
            const auto ws = words(e.text);
            for (const auto &x : ws) {
                score += w[x];
            }
            if (y * score <= 0) {
                ++mistakes;
                for (const auto &x : ws) {
                    w[x] += y;
                }
                b += y;
            }
        }
        if (mistakes == 0) {
            return true;
        }
    }
    return false;
}

TrainConfig small_config() {
    TrainConfig c;
    c.feature_dim = 1 << 14;
    return c;
}

}  // namespace

TEST_SUITE("trainer") {
    TEST_CASE("config validation") {
        TrainConfig c;
        CHECK_NOTHROW(c.validate());
        c.feature_dim = 1000;
        CHECK_THROWS_AS(c.validate(), Error);
        c = TrainConfig{};
        c.epochs = 0;
        CHECK_THROWS_AS(c.validate(), Error);
        c = TrainConfig{};
        c.batch_size = 0;
        CHECK_THROWS_AS(c.validate(), Error);
        c = TrainConfig{};
        c.learning_rate = 0;
        CHECK_THROWS_AS(c.validate(), Error);
        CHECK(TrainConfig{}.fingerprint() == TrainConfig{}.fingerprint());
        c = TrainConfig{};
        c.seed = 1;
        CHECK(c.fingerprint() != TrainConfig{}.fingerprint());
    }

    TEST_CASE("featurize") {
        const auto c = small_config();
        CHECK(featurize("", c).size() == 0);
        CHECK(featurize("  ,, ", c).size() == 0);
        const auto a = featurize("Good morning, world", c);
        const auto b = featurize("Good morning, world", c);
        CHECK(a.indices == b.indices);
        CHECK(a.values == b.values);
        CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(std::is_sorted(a.indices.begin(), a.indices.end()));
        CHECK(std::adjacent_find(a.indices.begin(), a.indices.end()) == a.indices.end());
        for (const auto i : a.indices) {
            CHECK(i < c.feature_dim);
        }
        // lowercasing
        CHECK(featurize("GOOD MORNING, WORLD", c).indices == a.indices);
        CHECK(featurize("x", c).norm() == doctest::Approx(1.0));
    }

    TEST_CASE("zero-weight model") {
        const auto schema = sentiment_schema();
        Model m(schema.labels, 1 << 10);
        TrainConfig c;
        c.feature_dim = 1 << 10;
        m.config = c;
        CHECK(predict(m, "anything at all") == "negative");
        CHECK(predict(m, "") == "negative");

        const auto x = featurize("some text here", c);
        const std::vector<const SparseVector *> rows{&x, &x};
        const std::vector<std::size_t> targets{0, 2};
        CHECK(std::abs(mean_cross_entropy(m, rows, targets) - std::log(3.0)) <= 1e-15);
        const auto p = m.probabilities(x);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("a single weight on a present feature decides the label") {
        TrainConfig c;
        c.feature_dim = 1 << 12;
        Model m({"a", "b", "c"}, c.feature_dim);
        m.config = c;
        const auto x = featurize("zebra", c);
        m.weight(2, x.indices.front()) = 1.0;
        CHECK(predict(m, "zebra") == "c");
        const std::vector<std::string> texts{"zebra", "zebra", "zebra"};
        for (const auto &t : texts) {
            CHECK(predict(m, t) == "c");
        }
    }

    TEST_CASE("gradient matches finite differences") {
        TrainConfig c;
        for (std::uint64_t seed : {1, 2, 3, 42}) {
            c.seed = seed;
            CHECK(gradient_check(c) < 1e-5);
        }
    }

    TEST_CASE("duplicating every row leaves the mean gradient unchanged") {
        TrainConfig c;
        c.feature_dim = 1 << 10;
        Model m({"a", "b", "c"}, c.feature_dim);
        Rng rng(8);
        for (auto &w : m.raw_weights()) {
            w = rng.normal() * 0.3;
        }
        std::vector<SparseVector> xs;
        for (int i = 0; i < 6; ++i) {
            xs.push_back(featurize(toy::word(i) + " " + toy::word(i + 10), c));
        }
        std::vector<const SparseVector *> rows;
        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            rows.push_back(&xs[i]);
            targets.push_back(i % 3);
        }
        const auto once = batch_gradient(m, rows, targets);
        auto rows2 = rows;
        rows2.insert(rows2.end(), rows.begin(), rows.end());
        auto targets2 = targets;
        targets2.insert(targets2.end(), targets.begin(), targets.end());
        const auto twice = batch_gradient(m, rows2, targets2);
        REQUIRE(once.features == twice.features);
        for (std::size_t i = 0; i < once.weights.size(); ++i) {
            CHECK(once.weights[i] == doctest::Approx(twice.weights[i]).epsilon(1e-12));
        }
        CHECK(once.loss == doctest::Approx(twice.loss).epsilon(1e-12));
        CHECK(once.loss == doctest::Approx(mean_cross_entropy(m, rows, targets)).epsilon(1e-12));
    }

    TEST_CASE("checkpoint selection") {
        const std::vector<double> losses{0.9, 0.4, 0.4, 0.7};
        CHECK(select_checkpoint(losses) == 2);
        const std::vector<double> one{1.0};
        CHECK(select_checkpoint(one) == 1);
        CHECK_THROWS_AS((void)select_checkpoint({}), Error);
    }

    TEST_CASE("separable keyword fixture") {
        const auto data = toy::keyword_corpus(200, 3);
        CHECK(perceptron_separates(data));
        const std::span<const LabeledExample> all(data);
        const auto outcome = train(all.subspan(0, 150), all.subspan(150), two_labels(), small_config());
        std::size_t correct = 0;
        for (const auto &e : all.subspan(150)) {
            correct += predict(outcome.model, e.text) == e.label ? 1 : 0;
        }
        CHECK(static_cast<double>(correct) / 50.0 >= 0.99);
        CHECK(outcome.validation_losses.size() == 10);
        for (const double l : outcome.validation_losses) {
            CHECK(outcome.best_validation_loss <= l);
        }
        CHECK(outcome.validation_losses[outcome.best_epoch - 1] == outcome.best_validation_loss);
        CHECK(outcome.model.is_finite());
    }

    TEST_CASE("training is deterministic") {
        const auto data = toy::corpus(sentiment_schema(), {.size = 300, .seed = 9});
        const std::span<const LabeledExample> all(data);
        const auto a = train(all.subspan(0, 200), all.subspan(200), sentiment_schema(), small_config());
        const auto b = train(all.subspan(0, 200), all.subspan(200), sentiment_schema(), small_config());
        CHECK(std::equal(a.model.raw_weights().begin(), a.model.raw_weights().end(), b.model.raw_weights().begin()));
        CHECK(std::equal(a.model.raw_bias().begin(), a.model.raw_bias().end(), b.model.raw_bias().begin()));
        CHECK(a.validation_losses == b.validation_losses);
        CHECK(a.model.fingerprint == b.model.fingerprint);

        auto other = small_config();
        other.seed = 7;
        const auto c = train(all.subspan(0, 200), all.subspan(200), sentiment_schema(), other);
        CHECK(c.validation_losses != a.validation_losses);
    }

    TEST_CASE("training errors") {
        const auto schema = two_labels();
        std::vector<LabeledExample> one_class{{"a b", "yes", Provenance::human, ""}, {"c d", "yes", Provenance::human, ""}};
        try {
            (void)train(one_class, one_class, schema, small_config());
            FAIL("expected a data error");
        } catch (const Error &e) {
            CHECK(e.kind() == ErrorKind::data);
        }
        CHECK_THROWS_AS((void)train({}, one_class, schema, small_config()), Error);

        const auto data = toy::keyword_corpus(40, 1);
        auto wild = small_config();
        wild.learning_rate = 1e308;
        wild.weight_decay = 0.0;
        try {
            (void)train(data, data, schema, wild);
            FAIL("expected divergence");
        } catch (const Error &e) {
            CHECK(e.kind() == ErrorKind::divergence);
            CHECK(std::string(e.what()).find("epoch") != std::string::npos);
        }
    }

    TEST_CASE("model save and load") {
        const auto data = toy::keyword_corpus(60, 2);
        const std::span<const LabeledExample> all(data);
        const auto outcome = train(all.subspan(0, 40), all.subspan(40), two_labels(), small_config());
        const auto text = save_model(outcome.model);
        const auto back = load_model(text);
        CHECK(back.labels() == outcome.model.labels());
        CHECK(back.feature_dim() == outcome.model.feature_dim());
        CHECK(std::equal(back.raw_weights().begin(), back.raw_weights().end(), outcome.model.raw_weights().begin()));
        CHECK(back.fingerprint == outcome.model.fingerprint);
        for (const auto &e : data) {
            CHECK(predict(back, e.text) == predict(outcome.model, e.text));
        }
        CHECK(save_model(back) == text);
        CHECK_THROWS_AS((void)load_model("{}"), Error);
        CHECK_THROWS_AS((void)load_model("nope"), Error);
    }

    TEST_CASE("curve training sets nest") {
        const auto schema = sentiment_schema();
        const auto base = toy::corpus(schema, {.size = 50, .seed = 1});
        const auto pool = toy::corpus(schema, {.size = 200, .seed = 2});
        const Variant v{"pool", pool};
        const auto ordered = curve_order(v, 11);
        CHECK(ordered.size() == pool.size());
        CHECK(membership_digest(curve_order(v, 11)) == membership_digest(ordered));
        CHECK(membership_digest(curve_order(v, 12)) != membership_digest(ordered));

        CHECK(curve_training_set(base, ordered, 50) == base);
        std::vector<LabeledExample> previous;
        for (std::size_t size = 50; size <= 250; size += 50) {
            const auto set = curve_training_set(base, ordered, size);
            CHECK(set.size() == size);
            CHECK(std::equal(previous.begin(), previous.end(), set.begin()));
            previous = set;
        }
        try {
            (void)curve_training_set(base, ordered, 300);
            FAIL("expected a data error");
        } catch (const Error &e) {
            CHECK(std::string(e.what()).find("short by 50") != std::string::npos);
        }
    }

    TEST_CASE("small learning curve") {
        const auto schema = sentiment_schema();
        const auto base = toy::corpus(schema, {.size = 60, .seed = 1});
        const auto validation = toy::corpus(schema, {.size = 60, .seed = 2});
        const auto test = toy::corpus(schema, {.size = 90, .seed = 3});
        const std::vector<Variant> variants{{"first", toy::corpus(schema, {.size = 120, .seed = 4})},
                                            {"second", toy::corpus(schema, {.size = 120, .seed = 5})}};
        const std::vector<std::size_t> sizes{60, 120, 180};
        const auto points = learning_curve(variants, base, sizes, validation, test, schema, small_config(), 9);
        REQUIRE(points.size() == 6);
        CHECK(points[0].variant == "first");
        CHECK(points[3].variant == "second");
        CHECK(points[0].macro_f1 == points[3].macro_f1);
        CHECK(points[0].val_loss == points[3].val_loss);
        CHECK(points[0].membership_digest == points[3].membership_digest);
        CHECK(points[0].membership_digest == membership_digest(base));
        for (const auto &p : points) {
            CHECK(p.macro_f1 >= 0.0);
            CHECK(p.macro_f1 <= 1.0);
            CHECK(p.accuracy >= 0.0);
            CHECK(p.accuracy <= 1.0);
            CHECK(p.best_epoch >= 1);
            CHECK(p.best_epoch <= 10);
        }
        const auto again = learning_curve(variants, base, sizes, validation, test, schema, small_config(), 9);
        CHECK(to_curve_csv(again) == to_curve_csv(points));

        const auto csv = to_curve_csv(points);
        CHECK(csv.starts_with("variant,size,macro_f1,accuracy,best_epoch,val_loss\n"));
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

        const std::vector<std::size_t> too_big{60, 300};
        try {
            (void)learning_curve(variants, base, too_big, validation, test, schema, small_config(), 9);
            FAIL("expected a data error");
        } catch (const Error &e) {
            CHECK(e.kind() == ErrorKind::data);
            CHECK(std::string(e.what()).find("'first'") != std::string::npos);
            CHECK(std::string(e.what()).find("short by 120") != std::string::npos);
        }
        const std::vector<std::size_t> unsorted{120, 60};
        CHECK_THROWS_AS((void)learning_curve(variants, base, unsorted, validation, test, schema, small_config(), 9),
                        Error);
    }

    TEST_CASE("curve csv round trip") {
        std::vector<CurvePoint> points{{"crowdsourced", 500, 0.75, 0.8, 3, 0.41, "d1"},
                                       {"gpt,4 \"balanced\"", 1000, 1.0 / 3.0, 0.0, 10, 1e-9, "d2"}};
        const auto back = parse_curve_csv(to_curve_csv(points));
        REQUIRE(back.size() == 2);
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(back[i].variant == points[i].variant);
            CHECK(back[i].sample_size == points[i].sample_size);
            CHECK(back[i].macro_f1 == points[i].macro_f1);
            CHECK(back[i].accuracy == points[i].accuracy);
            CHECK(back[i].best_epoch == points[i].best_epoch);
            CHECK(back[i].val_loss == points[i].val_loss);
            CHECK(back[i].membership_digest.empty());
        }
        CHECK(parse_curve_csv("variant,size,macro_f1,accuracy,best_epoch,val_loss\r\nx,20,0.5,0.6,1,0.7\r\n").size() ==
              1);
        CHECK(parse_curve_csv("variant,size,macro_f1,accuracy,best_epoch,val_loss\n").empty());
    }

    TEST_CASE("curve csv rejects malformed rows") {
        const std::string header = "variant,size,macro_f1,accuracy,best_epoch,val_loss\n";
        for (const std::string body : {"x,20,0.5,0.6,1\n", "x,twenty,0.5,0.6,1,0.7\n", "x,20,1.5,0.6,1,0.7\n",
                                       "x,20,0.5,0.6,0,0.7\n", "x,20,0.5,0.6,1,nan\n", ",20,0.5,0.6,1,0.7\n",
                                       "\"x,20,0.5,0.6,1,0.7\n", "x,20,0.5,0.6,1,-1\n"}) {
            CAPTURE(body);
            CHECK_THROWS_AS((void)parse_curve_csv(header + body), Error);
        }
        CHECK_THROWS_AS((void)parse_curve_csv("size,variant\n"), Error);
        CHECK_THROWS_AS((void)parse_curve_csv(""), Error);
    }
}

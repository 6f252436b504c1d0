// SPDX-License-Identifier: Apache-2.0
#include "synthaug/common.hpp"
#include "synthaug/corpus.hpp"

#include "../support/toy.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

using namespace synthaug;

namespace {

ErrorKind kind_of(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::config;
}

std::string message_of(const std::function<void()> &fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.what();
    }
    return {};
}

// Reference implementation of the vote rule, written against the original
// ten-dimension names.
std::multiset<std::string> vote_oracle(const std::map<std::string, int> &votes, int threshold) {
    std::map<std::string, int> merged;
    for (const auto &[dim, n] : votes) {
        if (dim == "romance") {
            continue;
        }
        std::string target = dim;
        if (dim == "similarity" || dim == "identity") {
            target = "similarity_identity";
        } else if (dim == "support") {
            target = "social_support";
        } else if (dim == "status") {
            target = "respect";
        }
        merged[target] += n;
    }
    std::multiset<std::string> out;
    for (const auto &[label, n] : merged) {
        if (n >= threshold) {
            out.insert(label);
        }
    }
    if (out.empty()) {
        out.insert("neutral");
    }
    return out;
}

}  // namespace

TEST_SUITE("corpus") {
    TEST_CASE("built-in schemas") {
        const auto s = sentiment_schema();
        CHECK(s.labels == std::vector<std::string>{"negative", "neutral", "positive"});
        CHECK_FALSE(s.case_significant());
        const auto h = hate_speech_schema();
        CHECK(h.case_significant());
        CHECK(h.phrase("OFF") == "offensive");
        CHECK(h.phrase("NOT") == "not offensive");
        const auto d = social_dimensions_schema();
        CHECK(d.labels.size() == 9);
        for (const auto &label : d.labels) {
            CHECK(d.descriptions.contains(label));
        }
        CHECK(builtin_schema("hate_speech").language == "da");
        CHECK(kind_of([] { (void)builtin_schema("emotion"); }) == ErrorKind::config);
    }

    TEST_CASE("schema validation") {
        TaskSchema s;
        s.task_id = "t";
        s.labels = {"a"};
        CHECK(kind_of([&] { s.validate(); }) == ErrorKind::config);
        s.labels = {"a", "a"};
        CHECK(kind_of([&] { s.validate(); }) == ErrorKind::config);
        s.labels = {"a", std::string(kInvalidLabel)};
        CHECK(kind_of([&] { s.validate(); }) == ErrorKind::config);
        s.labels = {"a", "b"};
        CHECK_NOTHROW(s.validate());
        CHECK(s.index_of("b") == 1);
        CHECK(kind_of([&] { (void)s.index_of("c"); }) == ErrorKind::data);

        const auto parsed = schema_from_json(R"({"task_id":"x","labels":["yes","no"],"language":"de"})");
        CHECK(parsed.labels.size() == 2);
        CHECK(parsed.language == "de");
        CHECK(kind_of([] { (void)schema_from_json(R"({"labels":["a","b"]})"); }) == ErrorKind::config);
    }

    TEST_CASE("record round trip") {
        const LabeledExample ex{"h\xC3\xA9 \"quoted\"", "positive", Provenance::synthetic, "gen-a"};
        const auto line = to_record(ex);
        CHECK(line == R"({"text":"hé \"quoted\"","label":"positive","provenance":"synthetic","origin":"gen-a"})");
        CHECK(parse_record(line, sentiment_schema()) == ex);

        const auto minimal = parse_record(R"({"text":"hi","label":"neutral"})", sentiment_schema());
        CHECK(minimal.provenance == Provenance::human);
        CHECK(minimal.origin.empty());
    }

    TEST_CASE("malformed records") {
        const auto schema = sentiment_schema();
        CHECK(kind_of([&] { (void)parse_record("{", schema); }) == ErrorKind::data);
        CHECK(kind_of([&] { (void)parse_record(R"({"text":"x"})", schema); }) == ErrorKind::data);
        CHECK(kind_of([&] { (void)parse_record(R"({"text":"  ","label":"neutral"})", schema); }) == ErrorKind::data);
        CHECK(kind_of([&] { (void)parse_record(R"({"text":"x","label":"neutral","provenance":"bot"})", schema); }) ==
              ErrorKind::data);
    }

    TEST_CASE("load_corpus keeps order and reports line context") {
        toy::TempDir dir("corpus");
        const auto schema = sentiment_schema();
        const auto path = dir.path() / "c.jsonl";
        write_file_atomic(path, "{\"text\":\"a\",\"label\":\"negative\"}\n{\"text\":\"b\",\"label\":\"neutral\"}\n"
                                "{\"text\":\"c\",\"label\":\"positive\"}\n");
        const auto loaded = load_corpus(path, schema);
        REQUIRE(loaded.size() == 3);
        CHECK(loaded[0].text == "a");
        CHECK(loaded[2].label == "positive");

        write_file_atomic(path, "{\"text\":\"a\",\"label\":\"negative\"}\n{\"text\":\"b\",\"label\":\"joy\"}\n");
        const auto msg = message_of([&] { (void)load_corpus(path, schema); });
        CHECK(msg.find("joy") != std::string::npos);
        CHECK(msg.find(":2:") != std::string::npos);

        write_file_atomic(path, "");
        CHECK(load_corpus(path, schema).empty());
    }

    TEST_CASE("splits of a 10,000 example corpus") {
        const auto schema = sentiment_schema();
        const auto corpus = toy::corpus(schema, {.size = 10000, .seed = 3});
        const auto s = make_splits(corpus, 42);
        CHECK(s.test.size() == 2000);
        CHECK(s.base.size() == 500);
        CHECK(s.validation.size() == 750);
        CHECK(s.pool.size() == 6750);

        std::multiset<std::uint64_t> all;
        for (const auto *part : {&s.test, &s.base, &s.validation, &s.pool}) {
            for (const auto &e : *part) {
                all.insert(example_identity(e));
            }
        }
        std::multiset<std::uint64_t> source;
        for (const auto &e : corpus) {
            source.insert(example_identity(e));
        }
        CHECK(all == source);

        std::set<std::uint64_t> base_ids;
        for (const auto &e : s.base) {
            base_ids.insert(example_identity(e));
        }
        for (const auto *part : {&s.test, &s.validation, &s.pool}) {
            for (const auto &e : *part) {
                CHECK_FALSE(base_ids.contains(example_identity(e)));
            }
        }

        const auto again = make_splits(corpus, 42);
        CHECK(to_jsonl(again.test) == to_jsonl(s.test));
        CHECK(to_jsonl(again.pool) == to_jsonl(s.pool));
        const auto other = make_splits(corpus, 43);
        CHECK(to_jsonl(other.base) != to_jsonl(s.base));
    }

    TEST_CASE("split with a published test set") {
        const auto schema = hate_speech_schema();
        const auto train = toy::corpus(schema, {.size = 2960, .seed = 5, .weights = {0.87, 0.13}});
        const auto test = toy::corpus(schema, {.size = 329, .seed = 6, .weights = {0.87, 0.13}});
        const auto s = make_splits_with_test(train, test, 7);
        CHECK(s.test == test);
        CHECK(s.base.size() == 500);
        CHECK(s.validation.size() == 750);
        CHECK(s.pool.size() == 1710);
    }

    TEST_CASE("too small corpora report required and available counts") {
        const auto corpus = toy::corpus(sentiment_schema(), {.size = 1000, .seed = 1});
        CHECK(kind_of([&] { (void)make_splits(corpus, 1); }) == ErrorKind::data);
        const auto msg = message_of([&] { (void)make_splits(corpus, 1); });
        CHECK(msg.find("required 1450") != std::string::npos);
        CHECK(msg.find("available 1000") != std::string::npos);
    }

    TEST_CASE("social dimension transform examples") {
        const std::vector<AnnotatedExample> in{
            {"t1", {{"support", 3}, {"fun", 2}, {"trust", 1}}},
            {"t2", {{"similarity", 1}, {"identity", 1}}},
            {"t3", {{"romance", 5}, {"power", 1}}},
        };
        const auto out = transform_social_dimensions(in);
        REQUIRE(out.size() == 4);
        CHECK(out[0].text == "t1");
        CHECK(out[0].label == "social_support");
        CHECK(out[1].label == "fun");
        CHECK(out[2].label == "similarity_identity");
        CHECK(out[3].label == "neutral");
        CHECK(kind_of([] {
                  const std::vector<AnnotatedExample> bad{{"x", {{"joy", 2}}}};
                  (void)transform_social_dimensions(bad);
              }) == ErrorKind::data);
    }

    TEST_CASE("social dimension transform matches a brute-force oracle") {
        const std::vector<std::string> dims{"support", "similarity", "identity", "romance", "power", "status"};
        // every vote vector over six dimensions with counts 0..2
        std::size_t checked = 0;
        std::vector<int> v(dims.size(), 0);
        for (;;) {
            std::map<std::string, int> votes;
            for (std::size_t i = 0; i < dims.size(); ++i) {
                votes[dims[i]] = v[i];
            }
            const std::vector<AnnotatedExample> in{{"t", votes}};
            const auto out = transform_social_dimensions(in);
            std::multiset<std::string> got;
            for (const auto &e : out) {
                got.insert(e.label);
                CHECK(e.label != "romance");
                CHECK(e.label != "similarity");
                CHECK(e.label != "identity");
            }
            CHECK(got == vote_oracle(votes, 2));
            ++checked;
            std::size_t i = 0;
            while (i < v.size() && ++v[i] == 3) {
                v[i++] = 0;
            }
            if (i == v.size()) {
                break;
            }
        }
        CHECK(checked == 729);
    }

    TEST_CASE("transform output size is the sum of max(1, qualifying labels)") {
        Rng rng(13);
        const std::vector<std::string> dims{"knowledge", "power", "status", "trust", "support",
                                            "romance",   "similarity", "identity", "fun", "conflict"};
        std::vector<AnnotatedExample> in;
        std::size_t expected = 0;
        for (int t = 0; t < 300; ++t) {
            AnnotatedExample a;
            a.text = "text " + std::to_string(t);
            for (const auto &d : dims) {
                a.votes[d] = static_cast<int>(rng.below(3));
            }
            expected += std::max<std::size_t>(1, vote_oracle(a.votes, 2).size());
            in.push_back(a);
        }
        CHECK(transform_social_dimensions(in).size() == expected);
    }

    TEST_CASE("label distribution") {
        const auto schema = sentiment_schema();
        const auto empty = label_distribution({}, schema);
        REQUIRE(empty.size() == 3);
        for (const auto &[label, n] : empty) {
            CHECK(n == 0);
        }

        const auto hate = hate_speech_schema();
        std::vector<LabeledExample> sample;
        for (int i = 0; i < 100; ++i) {
            sample.push_back({"t", i < 13 ? "OFF" : "NOT", Provenance::human, ""});
        }
        const auto d = label_distribution(sample, hate);
        CHECK(d[0] == std::pair<std::string, std::size_t>{"NOT", 87});
        CHECK(d[1] == std::pair<std::string, std::size_t>{"OFF", 13});

        auto shuffled = sample;
        Rng rng(2);
        rng.shuffle(shuffled);
        CHECK(label_distribution(shuffled, hate) == d);
    }
}

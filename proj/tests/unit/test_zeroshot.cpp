// SPDX-License-Identifier: Apache-2.0
#include "synthaug/common.hpp"
#include "synthaug/zeroshot.hpp"

#include <doctest.h>

#include <algorithm>
#include <cctype>
#include <regex>

using namespace synthaug;

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

std::string padded_tokens(const std::string &s) {
    static const std::regex token("[A-Za-z0-9]+");
    std::string out = " ";
    for (auto it = std::sregex_iterator(s.begin(), s.end(), token); it != std::sregex_iterator(); ++it) {
        out += it->str() + " ";
    }
    return out;
}

// Exact match after edge stripping, else a single label whose padded token
// string occurs inside the reply's padded token string.
std::string oracle(const std::string &raw, const TaskSchema &schema) {
    static const std::regex edges(R"(^[\s"'`.,;:!?()\[\]{}<>*]+|[\s"'`.,;:!?()\[\]{}<>*]+$)");
    std::string core = lower(std::regex_replace(raw, edges, ""));
    std::replace(core.begin(), core.end(), ' ', '_');
    std::replace(core.begin(), core.end(), '/', '_');
    for (const auto &label : schema.labels) {
        if (core == lower(label)) {
            return label;
        }
    }
    const bool keep_case = std::any_of(schema.labels.begin(), schema.labels.end(), [](const std::string &l) {
        return std::any_of(l.begin(), l.end(), [](unsigned char c) { return std::isupper(c); });
    });
    const std::string hay = padded_tokens(keep_case ? raw : lower(raw));
    std::vector<std::string> found;
    for (const auto &label : schema.labels) {
        if (hay.find(padded_tokens(keep_case ? label : lower(label))) != std::string::npos) {
            found.push_back(label);
        }
    }
    return found.size() == 1 ? found.front() : std::string(kInvalidLabel);
}

struct Reply {
    const char *task;
    const char *raw;
};

const Reply kReplies[] = {
    {"sentiment", "positive"},
    {"sentiment", "Positive."},
    {"sentiment", "  \"negative\"  "},
    {"sentiment", "NEUTRAL"},
    {"sentiment", "The sentiment is positive"},
    {"sentiment", "I would say negative overall."},
    {"sentiment", "positive or negative"},
    {"sentiment", "positively"},
    {"sentiment", "nonneutral"},
    {"sentiment", "neutral-ish"},
    {"sentiment", "['positive']"},
    {"sentiment", "Answer: neutral"},
    {"sentiment", "mixed"},
    {"sentiment", ""},
    {"sentiment", "negative, negative"},
    {"sentiment", "It is not positive"},
    {"sentiment", "**positive**"},
    {"hate_speech", "OFF"},
    {"hate_speech", "off"},
    {"hate_speech", "The answer is: OFF."},
    {"hate_speech", "NOT"},
    {"hate_speech", "not offensive"},
    {"hate_speech", "NOT offensive"},
    {"hate_speech", "notoffensive"},
    {"hate_speech", "OFFENSIVE"},
    {"hate_speech", "Label: NOT"},
    {"hate_speech", "OFF or NOT"},
    {"hate_speech", "\"NOT\""},
    {"hate_speech", "It is OFF, clearly"},
    {"hate_speech", "offensive"},
    {"hate_speech", "(NOT)"},
    {"hate_speech", "Not"},
    {"hate_speech", "I cannot classify this."},
    {"social_dimensions", "appreciation"},
    {"social_dimensions", "empowerment"},
    {"social_dimensions", "apology"},
    {"social_dimensions", "social_support"},
    {"social_dimensions", "social support"},
    {"social_dimensions", "Social Support."},
    {"social_dimensions", "similarity/identity"},
    {"social_dimensions", "similarity_identity"},
    {"social_dimensions", "The dimension is conflict."},
    {"social_dimensions", "trust and respect"},
    {"social_dimensions", "support"},
    {"social_dimensions", "power"},
    {"social_dimensions", "empowerment through knowledge"},
    {"social_dimensions", "funny"},
    {"social_dimensions", "it shows social support for others"},
    {"social_dimensions", "similarity"},
    {"social_dimensions", "neutral."},
};

}  // namespace

TEST_SUITE("zeroshot") {
    TEST_CASE("prompt rendering") {
        const auto schema = sentiment_schema();
        const auto r = render_zeroshot_prompt("T", schema, builtin_prompts("sentiment").zeroshot, "m");
        CHECK(r.user_prompt.ends_with("Text: T\n\nAnswer:"));
        CHECK(r.temperature == 0.0);

        const auto sd = render_zeroshot_prompt("x", social_dimensions_schema(),
                                               builtin_prompts("social_dimensions").zeroshot, "m");
        for (const auto &label : social_dimensions_schema().labels) {
            CHECK(sd.user_prompt.find("\"" + label + "\"") != std::string::npos);
        }

        const auto empty = render_zeroshot_prompt("", schema, builtin_prompts("sentiment").zeroshot, "m");
        CHECK(empty.user_prompt.ends_with("Text: \n\nAnswer:"));
    }

    TEST_CASE("coercion examples") {
        const auto s = sentiment_schema();
        const auto h = hate_speech_schema();
        const auto d = social_dimensions_schema();

        auto c = coerce_label("positive", s);
        CHECK(c.predicted == "positive");
        CHECK(c.match_kind == MatchKind::exact);

        c = coerce_label("appreciation", d);
        CHECK(c.predicted == kInvalidLabel);
        CHECK(c.match_kind == MatchKind::invalid);
        CHECK(c.raw_reply == "appreciation");

        c = coerce_label("The answer is: OFF.", h);
        CHECK(c.predicted == "OFF");
        CHECK(c.match_kind == MatchKind::normalized);

        CHECK(coerce_label("off", h).predicted == "OFF");
        CHECK(coerce_label("off", h).match_kind == MatchKind::exact);
        CHECK(coerce_label("not offensive", h).predicted == kInvalidLabel);
        CHECK(coerce_label("notoffensive", h).predicted == kInvalidLabel);
        CHECK(coerce_label("NOT offensive", h).predicted == "NOT");
        CHECK(coerce_label("positive or negative", s).predicted == kInvalidLabel);
        CHECK(coerce_label("similarity/identity", d).predicted == "similarity_identity");
        CHECK(coerce_label("it shows social support for others", d).predicted == "social_support");
        CHECK(coerce_label("empowerment", d).predicted == kInvalidLabel);
    }

    TEST_CASE("token scan agrees with a substring oracle on 50 replies") {
        CHECK(std::size(kReplies) == 50);
        std::size_t invalid = 0;
        for (const auto &r : kReplies) {
            CAPTURE(r.task);
            CAPTURE(r.raw);
            const auto schema = builtin_schema(r.task);
            const auto c = coerce_label(r.raw, schema);
            CHECK(c.predicted == oracle(r.raw, schema));
            CHECK((c.match_kind == MatchKind::invalid) == (c.predicted == kInvalidLabel));
            if (c.predicted != kInvalidLabel) {
                CHECK(schema.contains(c.predicted));
            } else {
                ++invalid;
            }
        }
        CHECK(invalid > 10);
        CHECK(invalid < 40);
    }

    TEST_CASE("coercion is idempotent on canonical labels") {
        for (const auto *task : {"sentiment", "hate_speech", "social_dimensions"}) {
            const auto schema = builtin_schema(task);
            for (const auto &label : schema.labels) {
                const auto c = coerce_label(label, schema);
                CHECK(c.predicted == label);
                CHECK(c.match_kind == MatchKind::exact);
                CHECK(coerce_label(c.predicted, schema).predicted == label);
            }
        }
    }

    TEST_CASE("batch classification keeps order and counts invalid replies") {
        const auto schema = sentiment_schema();
        const auto prompts = builtin_prompts("sentiment");
        std::vector<std::string> texts;
        std::map<std::string, std::string> fixtures;
        const char *replies[] = {"neutral", "Positive!", "joy", "negative", "unsure"};
        for (int i = 0; i < 20; ++i) {
            texts.push_back("text number " + std::to_string(i));
            fixtures[cache_key(render_zeroshot_prompt(texts.back(), schema, prompts.zeroshot, "m"))] = replies[i % 5];
        }
        ClientPolicy policy;
        policy.backoff.clear();
        ChatClient client(std::make_shared<StubTransport>(fixtures), policy);
        const auto batch = classify_batch(texts, schema, client, prompts.zeroshot, "m");
        REQUIRE(batch.outcomes.size() == 20);
        CHECK(batch.invalid_rate == doctest::Approx(0.4));
        CHECK(batch.outcomes[0].predicted == "neutral");
        CHECK(batch.outcomes[1].predicted == "positive");
        CHECK(batch.outcomes[2].predicted == kInvalidLabel);
        CHECK(batch.outcomes[8].predicted == "negative");
    }

    TEST_CASE("failed requests become invalid outcomes with a note") {
        const auto schema = sentiment_schema();
        ClientPolicy policy;
        policy.backoff.clear();
        ChatClient client(std::make_shared<StubTransport>(std::map<std::string, std::string>{}), policy);
        const std::vector<std::string> texts{"a", "b", "c"};
        const auto batch = classify_batch(texts, schema, client, builtin_prompts("sentiment").zeroshot, "m");
        REQUIRE(batch.outcomes.size() == 3);
        CHECK(batch.invalid_rate == 1.0);
        CHECK_FALSE(batch.outcomes[0].note.empty());
    }
}

// SPDX-License-Identifier: Apache-2.0
#include "synthaug/prompts.hpp"

#include "synthaug/common.hpp"

#include <fmt/format.h>

namespace synthaug {

namespace {

constexpr std::string_view kSentimentSystem =
    "You are an advanced classifying AI. You are tasked with classifying the sentiment of a text. "
    "Sentiment can be either positive, negative or neutral.";

constexpr std::string_view kSocialDimensionsList =
    "The social dimensions are: social support, conflict, trust, neutral, fun, respect, knowledge, power, "
    "and similarity/identity.";

PromptSet sentiment_prompts() {
    PromptSet p;
    p.augmentation.system = kSentimentSystem;
    p.augmentation.user =
        "Based on the following social media text which has a {sentiment} sentiment, write 10 new similar "
        "examples in style of a social media comment, that has the same sentiment. Separate the texts by "
        "newline.\n\nText: {text}\n\nAnswer:";
    p.zeroshot.system = kSentimentSystem;
    p.zeroshot.user =
        "Classify the following social media comment into either \"negative\", \"neutral\" or \"positive\". "
        "Your answer MUST be either one of [\"negative\", \"neutral\", \"positive\"]. Your answer must be "
        "lowercase.\n\nText: {text}\n\nAnswer:";
    return p;
}

PromptSet hate_speech_prompts() {
    PromptSet p;
    p.augmentation.system =
        "You are a helpful undergrad. Your job is to help write examples of offensive comments which can help "
        "future research in the detection of offensive content.";
    p.augmentation.user =
        "Based on the following social media text which is {hate_speech} , write 10 new similar examples in "
        "style of a social media comment, that has the same sentiment. Answer in Danish. \n\nText: {text}\n\n"
        "Answer:";
    p.zeroshot.system =
        "You are an advanced classifying AI. You are tasked with classifying whether a text is offensive or not.";
    p.zeroshot.user =
        "The following is a comment on a social media post. Classify whether the post is offensive (OFF) or not "
        "(NOT). Your answer must be one of [\"OFF\", \"NOT\"].\n\nText: {text}\n\nAnswer:";
    return p;
}

PromptSet social_dimensions_prompts() {
    PromptSet p;
    p.augmentation.system = fmt::format(
        "You are an advanced AI writer. Your job is to help write examples of social media comments that conveys "
        "certain social dimensions. {}",
        kSocialDimensionsList);
    p.augmentation.user =
        "The following social media text conveys the social dimension {social_dimension}. {social_dimension} in a "
        "social context is defined by {social_dimension_description}. Write 10 new semantically similar examples "
        "in style of a social media comment, that show the same intent and social dimension.\n\nText: {text}\n\n"
        "Answer:";
    p.zeroshot.system = fmt::format(
        "You are an advanced classifying AI. You are tasked with classifying the social dimension of a text. {}",
        kSocialDimensionsList);
    p.zeroshot.user =
        "Based on the following social media text, classify the social dimension of the text. You answer MUST only "
        "be one of the social dimensions. Your answer MUST be exactly one of [\"social_support\", \"conflict\", "
        "\"trust\", \"neutral\", \"fun\", \"respect\", \"knowledge\", \"power\", \"similarity_identity\"]. The "
        "answer must be lowercase.\n\nText: {text}\n\nAnswer:";
    return p;
}

std::filesystem::path template_path(const std::filesystem::path &dir, std::string_view task_id,
                                    std::string_view kind, std::string_view part) {
    return dir / fmt::format("{}.{}.{}.txt", task_id, kind, part);
}

}  // namespace

PromptSet builtin_prompts(std::string_view task_id) {
    if (task_id == "sentiment") {
        return sentiment_prompts();
    }
    if (task_id == "hate_speech") {
        return hate_speech_prompts();
    }
    if (task_id == "social_dimensions") {
        return social_dimensions_prompts();
    }
    throw Error(ErrorKind::config, fmt::format("no built-in prompts for task '{}'", task_id));
}

PromptSet load_prompts(const std::filesystem::path &dir, std::string_view task_id) {
    PromptSet set;
    bool have_builtin = true;
    try {
        set = builtin_prompts(task_id);
    } catch (const Error &) {
        have_builtin = false;
    }
    auto load = [&](std::string &slot, std::string_view kind, std::string_view part) {
        const auto path = template_path(dir, task_id, kind, part);
        if (std::filesystem::exists(path)) {
            slot = read_file(path);
            if (!slot.empty() && slot.back() == '\n') {
                slot.pop_back();
            }
        } else if (!have_builtin) {
            throw Error(ErrorKind::config, fmt::format("missing prompt template '{}'", path.string()));
        }
    };
    load(set.augmentation.system, "augment", "system");
    load(set.augmentation.user, "augment", "user");
    load(set.zeroshot.system, "zeroshot", "system");
    load(set.zeroshot.user, "zeroshot", "user");
    return set;
}

void write_prompts(const std::filesystem::path &dir, std::string_view task_id, const PromptSet &set) {
    write_file_atomic(template_path(dir, task_id, "augment", "system"), set.augmentation.system + "\n");
    write_file_atomic(template_path(dir, task_id, "augment", "user"), set.augmentation.user + "\n");
    write_file_atomic(template_path(dir, task_id, "zeroshot", "system"), set.zeroshot.system + "\n");
    write_file_atomic(template_path(dir, task_id, "zeroshot", "user"), set.zeroshot.user + "\n");
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string> &values) {
    std::string out;
    out.reserve(tmpl.size() + 256);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            std::size_t j = i + 1;
            while (j < tmpl.size() && ((tmpl[j] >= 'a' && tmpl[j] <= 'z') || tmpl[j] == '_')) {
                ++j;
            }
            if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
                const std::string name(tmpl.substr(i + 1, j - i - 1));
                const auto it = values.find(name);
                if (it == values.end()) {
                    throw Error(ErrorKind::config, fmt::format("no value for template placeholder {{{}}}", name));
                }
                out += it->second;
                i = j + 1;
                continue;
            }
        }
        out += tmpl[i++];
    }
    return out;
}

}  // namespace synthaug

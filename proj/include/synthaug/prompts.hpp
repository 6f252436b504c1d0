// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace synthaug {

struct PromptTemplate {
    std::string system;
    std::string user;
};

/// Augmentation and zero-shot templates for one task.
struct PromptSet {
    PromptTemplate augmentation;
    PromptTemplate zeroshot;
};

/// Templates shipped for the built-in tasks. Throws Error(config) for other ids.
[[nodiscard]] PromptSet builtin_prompts(std::string_view task_id);

/// Reads `<task>.{augment,zeroshot}.{system,user}.txt` from `dir`. Files that
/// are absent fall back to the built-in template when the task has one.
/// One trailing newline per file is dropped.
[[nodiscard]] PromptSet load_prompts(const std::filesystem::path &dir, std::string_view task_id);

/// Writes the four template files for `set` into `dir`.
void write_prompts(const std::filesystem::path &dir, std::string_view task_id, const PromptSet &set);

/// Substitutes `{name}` placeholders in one left-to-right pass; substituted
/// values are never rescanned. A `{name}` (lowercase letters and underscores)
/// absent from `values` is an Error(config); other braces are literal.
[[nodiscard]] std::string render_template(std::string_view tmpl, const std::map<std::string, std::string> &values);

}  // namespace synthaug

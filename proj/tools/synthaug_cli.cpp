// SPDX-License-Identifier: Apache-2.0
#include "synthaug/synthaug.h"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

int fail(sa_status status) {
    std::cerr << "synthaug: " << sa_status_name(status) << ": " << sa_last_error() << "\n";
    return static_cast<int>(status);
}

void print_progress(const char *message, void * /*unused*/) { std::cerr << "[synthaug] " << message << "\n"; }

void print_and_free(char *text) {
    if (text != nullptr) {
        std::cout << text;
        if (text[0] != '\0' && text[std::char_traits<char>::length(text) - 1] != '\n') {
            std::cout << "\n";
        }
        sa_string_free(text);
    }
}

bool read_text(const std::string &path, std::string &text) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        std::cerr << "synthaug: cannot open " << path << "\n";
        return false;
    }
    text.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    return true;
}

struct PipelineHandle {
    sa_pipeline *p = nullptr;
    ~PipelineHandle() { sa_pipeline_close(p); }
};

struct ReportHandle {
    sa_report *r = nullptr;
    ~ReportHandle() { sa_report_free(r); }
};

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Synthetic data augmentation experiments for text classification"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(sa_version()));

    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::string> seed;
    std::optional<std::string> output;
    std::optional<std::string> backend;
    bool quiet = false;
    app.add_option("-c,--config", config_path, "Experiment config (JSON)");
    app.add_option("--set", sets, "Override a config value: dotted.key=value (repeatable)");
    app.add_option("--seed", seed, "Override the experiment seed");
    app.add_option("-o,--output", output, "Override paths.output_dir");
    app.add_option("--backend", backend, "Override client.backend (stub or openai)");
    app.add_flag("-q,--quiet", quiet, "No progress messages on stderr");

    auto *split = app.add_subcommand("split", "Partition the corpus into test/base/validation/pool");
    bool force = false;
    split->add_flag("-f,--force", force, "Overwrite existing splits");

    auto *augment = app.add_subcommand("augment", "Generate synthetic datasets from the base split");
    std::optional<std::string> strategy;
    std::optional<std::string> gen_model;
    augment->add_option("--strategy", strategy, "proportional or balanced (default: all configured)")
        ->check(CLI::IsMember({"proportional", "balanced"}));
    augment->add_option("--model", gen_model, "Generation model id (default: all configured)");

    auto *curve = app.add_subcommand("curve", "Train learning curves over every variant");

    auto *zeroshot = app.add_subcommand("zeroshot", "Zero-shot classify the test split");
    std::optional<std::string> zs_model;
    zeroshot->add_option("--model", zs_model, "Model id (default: all configured)");

    auto *report = app.add_subcommand("report", "Render or compare classification reports");
    std::string predictions;
    std::string rows;
    std::string report_json;
    std::string task;
    std::string format = "text";
    std::string compare;
    double tolerance = 0.001;
    auto *src_pred = report->add_option("--predictions", predictions, "Predictions JSONL (gold, predicted)");
    auto *src_rows = report->add_option("--rows", rows, "Per-class rows JSON; averages are recomputed");
    auto *src_json = report->add_option("--report", report_json, "Report JSON written by this tool");
    src_pred->excludes(src_rows)->excludes(src_json);
    src_rows->excludes(src_json);
    report->add_option("--task", task, "Built-in task for --predictions when no config is given");
    report->add_option("--format", format, "text or json")->check(CLI::IsMember({"text", "json"}));
    report->add_option("--compare", compare, "Report JSON to compare against");
    report->add_option("--tolerance", tolerance, "Allowed absolute difference per cell");

    auto *cost = app.add_subcommand("cost", "Sum token usage and cost from the run logs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e) == 0 ? 0 : SA_ERR_CONFIG;
    }

    const bool needs_pipeline = !report->parsed() || (!predictions.empty() && task.empty());
    PipelineHandle pipeline;
    if (needs_pipeline) {
        if (config_path.empty()) {
            std::cerr << "synthaug: --config is required for this command\n";
            return SA_ERR_CONFIG;
        }
        if (const auto st = sa_pipeline_open(config_path.c_str(), &pipeline.p); st != SA_OK) {
            return fail(st);
        }
        std::vector<std::pair<std::string, std::string>> overrides;
        for (const auto &s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0) {
                std::cerr << "synthaug: --set expects key=value, got '" << s << "'\n";
                return SA_ERR_CONFIG;
            }
            overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
        }
        if (seed) {
            overrides.emplace_back("seed", *seed);
        }
        if (output) {
            overrides.emplace_back("paths.output_dir", "\"" + *output + "\"");
        }
        if (backend) {
            overrides.emplace_back("client.backend", *backend);
        }
        for (const auto &[key, value] : overrides) {
            if (const auto st = sa_pipeline_set_option(pipeline.p, key.c_str(), value.c_str()); st != SA_OK) {
                return fail(st);
            }
        }
        if (!quiet) {
            if (const auto st = sa_pipeline_set_progress(pipeline.p, print_progress, nullptr); st != SA_OK) {
                return fail(st);
            }
        }
    }

    char *summary = nullptr;
    sa_status st = SA_OK;
    if (split->parsed()) {
        st = sa_pipeline_split(pipeline.p, force ? 1 : 0, &summary);
    } else if (augment->parsed()) {
        st = sa_pipeline_augment(pipeline.p, strategy ? strategy->c_str() : nullptr,
                                 gen_model ? gen_model->c_str() : nullptr, &summary);
    } else if (curve->parsed()) {
        st = sa_pipeline_curve(pipeline.p, &summary);
    } else if (zeroshot->parsed()) {
        st = sa_pipeline_zeroshot(pipeline.p, zs_model ? zs_model->c_str() : nullptr, &summary);
    } else if (cost->parsed()) {
        st = sa_pipeline_cost(pipeline.p, &summary);
    } else if (report->parsed()) {
        ReportHandle r;
        if (!predictions.empty()) {
            st = task.empty() ? sa_pipeline_report(pipeline.p, predictions.c_str(), &r.r)
                              : sa_report_from_predictions(predictions.c_str(), task.c_str(), &r.r);
        } else if (!rows.empty() || !report_json.empty()) {
            std::string text;
            if (!read_text(rows.empty() ? report_json : rows, text)) {
                return SA_ERR_DATA;
            }
            st = rows.empty() ? sa_report_from_json(text.c_str(), &r.r) : sa_report_from_rows_json(text.c_str(), &r.r);
        } else {
            std::cerr << "synthaug: report needs --predictions, --rows or --report\n";
            return SA_ERR_CONFIG;
        }
        if (st != SA_OK) {
            return fail(st);
        }
        char *rendered = nullptr;
        st = format == "json" ? sa_report_render_json(r.r, &rendered) : sa_report_render_text(r.r, &rendered);
        if (st != SA_OK) {
            return fail(st);
        }
        print_and_free(rendered);
        if (!compare.empty()) {
            std::string text;
            if (!read_text(compare, text)) {
                return SA_ERR_DATA;
            }
            ReportHandle other;
            if (st = sa_report_from_json(text.c_str(), &other.r); st != SA_OK) {
                return fail(st);
            }
            std::size_t differences = 0;
            char *details = nullptr;
            if (st = sa_report_compare(r.r, other.r, tolerance, &differences, &details); st != SA_OK) {
                return fail(st);
            }
            std::cerr << differences << " cell(s) differ by more than " << tolerance << "\n";
            if (differences > 0) {
                print_and_free(details);
                return 1;
            }
            sa_string_free(details);
        }
        return 0;
    }
    if (st != SA_OK) {
        return fail(st);
    }
    print_and_free(summary);
    return 0;
}

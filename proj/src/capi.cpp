// SPDX-License-Identifier: Apache-2.0
#include "synthaug/synthaug.h"

#include "synthaug/common.hpp"
#include "synthaug/metrics.hpp"
#include "synthaug/runner.hpp"
#include "synthaug/zeroshot.hpp"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include <json.hpp>

using nlohmann::ordered_json;

struct sa_pipeline {
    std::string config_json;
    std::filesystem::path base_dir;
    std::vector<std::pair<std::string, std::string>> overrides;
    std::unique_ptr<synthaug::Pipeline> pipeline;
    sa_progress_fn progress = nullptr;
    void *progress_data = nullptr;

    void rebuild() {
        auto config = synthaug::config_from_json(config_json, base_dir, overrides);
        auto fresh = std::make_unique<synthaug::Pipeline>(std::move(config));
        if (progress != nullptr) {
            fresh->set_progress([fn = progress, data = progress_data](std::string_view msg) {
                const std::string copy(msg);
                fn(copy.c_str(), data);
            });
        }
        pipeline = std::move(fresh);
    }
};

struct sa_report {
    synthaug::ClassificationReport report;
};

namespace {

thread_local std::string last_error;

sa_status status_for(synthaug::ErrorKind kind) {
    using synthaug::ErrorKind;
    switch (kind) {
        case ErrorKind::config: return SA_ERR_CONFIG;
        case ErrorKind::data:
        case ErrorKind::divergence: return SA_ERR_DATA;
        case ErrorKind::transport:
        case ErrorKind::credential:
        case ErrorKind::content: return SA_ERR_PROVIDER;
        case ErrorKind::shortfall: return SA_ERR_SHORTFALL;
    }
    return SA_ERR_INTERNAL;
}

template <typename F>
sa_status guarded(F &&body) {
    last_error.clear();
    try {
        body();
        return SA_OK;
    } catch (const synthaug::Error &e) {
        last_error = e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc &) {
        last_error = "out of memory";
        return SA_ERR_INTERNAL;
    } catch (const std::exception &e) {
        last_error = e.what();
        return SA_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return SA_ERR_INTERNAL;
    }
}

sa_status invalid(const char *what) {
    last_error = what;
    return SA_ERR_INVALID_ARGUMENT;
}

char *duplicate(const std::string &s) {
    auto *out = static_cast<char *>(std::malloc(s.size() + 1));
    if (out == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void emit(char **summary, const ordered_json &j) {
    if (summary != nullptr) {
        *summary = duplicate(j.dump(2));
    }
}

ordered_json report_summary(const synthaug::ClassificationReport &r) {
    return {{"accuracy", r.accuracy},
            {"macro_f1", r.macro.f1},
            {"weighted_f1", r.weighted.f1},
            {"support", r.total_support},
            {"invalid", r.invalid_count}};
}

}  // namespace

extern "C" {

const char *sa_version(void) { return "0.1.0"; }

const char *sa_status_name(sa_status status) {
    switch (status) {
        case SA_OK: return "ok";
        case SA_ERR_CONFIG: return "config error";
        case SA_ERR_DATA: return "data error";
        case SA_ERR_PROVIDER: return "provider error";
        case SA_ERR_SHORTFALL: return "shortfall";
        case SA_ERR_INVALID_ARGUMENT: return "invalid argument";
        case SA_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char *sa_last_error(void) { return last_error.c_str(); }

void sa_string_free(char *s) { std::free(s); }

// Pipeline -------------------------------------------------------------------

sa_status sa_pipeline_open_json(const char *config_json, const char *base_dir, sa_pipeline **out) {
    if (config_json == nullptr || out == nullptr) {
        return invalid("config_json and out are required");
    }
    *out = nullptr;
    return guarded([&] {
        auto handle = std::make_unique<sa_pipeline>();
        handle->config_json = config_json;
        handle->base_dir = base_dir != nullptr ? base_dir : ".";
        handle->rebuild();
        *out = handle.release();
    });
}

sa_status sa_pipeline_open(const char *config_path, sa_pipeline **out) {
    if (config_path == nullptr || out == nullptr) {
        return invalid("config_path and out are required");
    }
    *out = nullptr;
    return guarded([&] {
        const std::filesystem::path path(config_path);
        if (!std::filesystem::exists(path)) {
            throw synthaug::Error(synthaug::ErrorKind::config, "config file '" + path.string() + "' not found");
        }
        auto handle = std::make_unique<sa_pipeline>();
        handle->config_json = synthaug::read_file(path);
        handle->base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
        handle->rebuild();
        *out = handle.release();
    });
}

sa_status sa_pipeline_set_option(sa_pipeline *p, const char *key, const char *value) {
    if (p == nullptr || key == nullptr || value == nullptr) {
        return invalid("pipeline, key and value are required");
    }
    return guarded([&] {
        p->overrides.emplace_back(key, value);
        try {
            p->rebuild();
        } catch (...) {
            p->overrides.pop_back();
            throw;
        }
    });
}

sa_status sa_pipeline_set_progress(sa_pipeline *p, sa_progress_fn fn, void *user_data) {
    if (p == nullptr) {
        return invalid("pipeline is required");
    }
    return guarded([&] {
        p->progress = fn;
        p->progress_data = user_data;
        p->rebuild();
    });
}

void sa_pipeline_close(sa_pipeline *p) { delete p; }

sa_status sa_pipeline_split(sa_pipeline *p, int force, char **summary) {
    if (p == nullptr) {
        return invalid("pipeline is required");
    }
    return guarded([&] {
        const auto s = p->pipeline->split(force != 0);
        emit(summary, {{"test", s.test}, {"base", s.base}, {"validation", s.validation}, {"pool", s.pool},
                       {"hash", s.hash}});
    });
}

sa_status sa_pipeline_augment(sa_pipeline *p, const char *strategy, const char *model, char **summary) {
    if (p == nullptr) {
        return invalid("pipeline is required");
    }
    return guarded([&] {
        std::optional<synthaug::Strategy> s;
        if (strategy != nullptr) {
            s = synthaug::parse_strategy(strategy);
            if (!s) {
                throw synthaug::Error(synthaug::ErrorKind::config, std::string("unknown strategy '") + strategy + "'");
            }
        }
        std::optional<std::string> m;
        if (model != nullptr) {
            m = model;
        }
        const auto results = p->pipeline->augment(s, m);
        ordered_json j = ordered_json::array();
        for (const auto &r : results) {
            j.push_back({{"model", r.model},
                         {"strategy", synthaug::to_string(r.strategy)},
                         {"examples", r.examples},
                         {"rejected_lines", r.rejected_lines},
                         {"failed_jobs", r.failed_jobs},
                         {"refused_jobs", r.refused_jobs},
                         {"cost", r.cost},
                         {"file", r.file.string()},
                         {"hash", r.hash}});
        }
        emit(summary, j);
    });
}

sa_status sa_pipeline_curve(sa_pipeline *p, char **summary) {
    if (p == nullptr) {
        return invalid("pipeline is required");
    }
    return guarded([&] {
        const auto c = p->pipeline->curve();
        ordered_json points = ordered_json::array();
        for (const auto &pt : c.points) {
            points.push_back({{"variant", pt.variant},
                              {"size", pt.sample_size},
                              {"macro_f1", pt.macro_f1},
                              {"accuracy", pt.accuracy},
                              {"best_epoch", pt.best_epoch},
                              {"val_loss", pt.val_loss}});
        }
        emit(summary, {{"csv", c.csv.string()}, {"hash", c.hash}, {"points", points}});
    });
}

sa_status sa_pipeline_zeroshot(sa_pipeline *p, const char *model, char **summary) {
    if (p == nullptr) {
        return invalid("pipeline is required");
    }
    return guarded([&] {
        std::optional<std::string> m;
        if (model != nullptr) {
            m = model;
        }
        const auto results = p->pipeline->zeroshot(m);
        ordered_json j = ordered_json::array();
        for (const auto &r : results) {
            auto entry = report_summary(r.report);
            entry["model"] = r.model;
            entry["invalid_rate"] = r.invalid_rate;
            entry["predictions"] = r.predictions.string();
            entry["hash"] = r.hash;
            j.push_back(std::move(entry));
        }
        emit(summary, j);
    });
}

sa_status sa_pipeline_cost(sa_pipeline *p, char **summary) {
    if (p == nullptr) {
        return invalid("pipeline is required");
    }
    return guarded([&] {
        const auto c = p->pipeline->cost();
        ordered_json lines = ordered_json::array();
        for (const auto &l : c.lines) {
            lines.push_back({{"stage", l.stage},
                             {"model", l.model},
                             {"backend", l.backend},
                             {"requests", l.requests},
                             {"prompt_tokens", l.prompt_tokens},
                             {"completion_tokens", l.completion_tokens},
                             {"cost", l.cost}});
        }
        emit(summary, {{"lines", lines}, {"total", c.total}});
    });
}

sa_status sa_pipeline_report(const sa_pipeline *p, const char *predictions_path, sa_report **out) {
    if (p == nullptr || predictions_path == nullptr || out == nullptr) {
        return invalid("pipeline, predictions_path and out are required");
    }
    *out = nullptr;
    return guarded([&] {
        auto r = std::make_unique<sa_report>();
        r->report = synthaug::report_from_predictions(predictions_path, p->pipeline->config().schema);
        *out = r.release();
    });
}

// Reports --------------------------------------------------------------------

sa_status sa_report_from_labels(const char *const *gold, const char *const *predicted, size_t n, sa_report **out) {
    if (out == nullptr || (n > 0 && (gold == nullptr || predicted == nullptr))) {
        return invalid("gold, predicted and out are required");
    }
    *out = nullptr;
    return guarded([&] {
        std::vector<std::string> g;
        std::vector<std::string> pr;
        for (size_t i = 0; i < n; ++i) {
            if (gold[i] == nullptr || predicted[i] == nullptr) {
                throw synthaug::Error(synthaug::ErrorKind::data, "null label at index " + std::to_string(i));
            }
            g.emplace_back(gold[i]);
            pr.emplace_back(predicted[i]);
        }
        auto r = std::make_unique<sa_report>();
        r->report = synthaug::classification_report(g, pr);
        *out = r.release();
    });
}

sa_status sa_report_from_predictions(const char *predictions_path, const char *task_id, sa_report **out) {
    if (predictions_path == nullptr || task_id == nullptr || out == nullptr) {
        return invalid("predictions_path, task_id and out are required");
    }
    *out = nullptr;
    return guarded([&] {
        auto r = std::make_unique<sa_report>();
        r->report = synthaug::report_from_predictions(predictions_path, synthaug::builtin_schema(task_id));
        *out = r.release();
    });
}

sa_status sa_report_from_rows_json(const char *rows_json, sa_report **out) {
    if (rows_json == nullptr || out == nullptr) {
        return invalid("rows_json and out are required");
    }
    *out = nullptr;
    return guarded([&] {
        auto r = std::make_unique<sa_report>();
        r->report = synthaug::report_from_rows_json(rows_json);
        *out = r.release();
    });
}

sa_status sa_report_from_json(const char *report_json, sa_report **out) {
    if (report_json == nullptr || out == nullptr) {
        return invalid("report_json and out are required");
    }
    *out = nullptr;
    return guarded([&] {
        auto r = std::make_unique<sa_report>();
        r->report = synthaug::report_from_json(report_json);
        *out = r.release();
    });
}

void sa_report_free(sa_report *r) { delete r; }

size_t sa_report_class_count(const sa_report *r) { return r == nullptr ? 0 : r->report.rows.size(); }

sa_status sa_report_class(const sa_report *r, size_t index, const char **label, double *precision, double *recall,
                          double *f1, size_t *support) {
    if (r == nullptr || index >= r->report.rows.size()) {
        return invalid("report is null or index out of range");
    }
    const auto &row = r->report.rows[index];
    if (label != nullptr) {
        *label = row.label.c_str();
    }
    if (precision != nullptr) {
        *precision = row.precision;
    }
    if (recall != nullptr) {
        *recall = row.recall;
    }
    if (f1 != nullptr) {
        *f1 = row.f1;
    }
    if (support != nullptr) {
        *support = row.support;
    }
    return SA_OK;
}

double sa_report_accuracy(const sa_report *r) { return r == nullptr ? 0.0 : r->report.accuracy; }

void sa_report_macro(const sa_report *r, double *precision, double *recall, double *f1) {
    if (r == nullptr) {
        return;
    }
    if (precision != nullptr) {
        *precision = r->report.macro.precision;
    }
    if (recall != nullptr) {
        *recall = r->report.macro.recall;
    }
    if (f1 != nullptr) {
        *f1 = r->report.macro.f1;
    }
}

void sa_report_weighted(const sa_report *r, double *precision, double *recall, double *f1) {
    if (r == nullptr) {
        return;
    }
    if (precision != nullptr) {
        *precision = r->report.weighted.precision;
    }
    if (recall != nullptr) {
        *recall = r->report.weighted.recall;
    }
    if (f1 != nullptr) {
        *f1 = r->report.weighted.f1;
    }
}

size_t sa_report_total_support(const sa_report *r) { return r == nullptr ? 0 : r->report.total_support; }

size_t sa_report_invalid_count(const sa_report *r) { return r == nullptr ? 0 : r->report.invalid_count; }

sa_status sa_report_render_text(const sa_report *r, char **out) {
    if (r == nullptr || out == nullptr) {
        return invalid("report and out are required");
    }
    return guarded([&] { *out = duplicate(synthaug::render_text(r->report)); });
}

sa_status sa_report_render_json(const sa_report *r, char **out) {
    if (r == nullptr || out == nullptr) {
        return invalid("report and out are required");
    }
    return guarded([&] { *out = duplicate(synthaug::render_json(r->report)); });
}

sa_status sa_report_compare(const sa_report *a, const sa_report *b, double tolerance, size_t *differences,
                            char **details) {
    if (a == nullptr || b == nullptr) {
        return invalid("both reports are required");
    }
    return guarded([&] {
        const auto diffs = synthaug::compare_reports(a->report, b->report, tolerance);
        if (differences != nullptr) {
            *differences = diffs.size();
        }
        if (details != nullptr) {
            ordered_json j = ordered_json::array();
            for (const auto &d : diffs) {
                j.push_back({{"row", d.row}, {"metric", d.metric}, {"a", d.a}, {"b", d.b}});
            }
            *details = duplicate(j.dump(2));
        }
    });
}

sa_status sa_coerce_label(const char *task_id, const char *reply, char **label, sa_match_kind *kind) {
    if (task_id == nullptr || reply == nullptr || label == nullptr) {
        return invalid("task_id, reply and label are required");
    }
    return guarded([&] {
        const auto outcome = synthaug::coerce_label(reply, synthaug::builtin_schema(task_id));
        *label = duplicate(outcome.predicted);
        if (kind != nullptr) {
            switch (outcome.match_kind) {
                case synthaug::MatchKind::exact: *kind = SA_MATCH_EXACT; break;
                case synthaug::MatchKind::normalized: *kind = SA_MATCH_NORMALIZED; break;
                case synthaug::MatchKind::invalid: *kind = SA_MATCH_INVALID; break;
            }
        }
    });
}

}  // extern "C"

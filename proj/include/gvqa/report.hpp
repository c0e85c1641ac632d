#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvqa/detection.hpp"
#include "gvqa/diagnostics.hpp"
#include "gvqa/metrics.hpp"
#include "gvqa/tag.hpp"

namespace gvqa {

/// Recorded answer for a node whose backend query failed; dependents
/// still run with this sentinel as their context.
inline constexpr std::string_view kUnanswered = "UNANSWERED";

/// External judge hook: (question, gt, prediction) -> score in [0,100].
/// No judge ships with the harness; absent judge omits the component.
using JudgeFn = std::function<double(const std::string& question, const std::string& gt_answer,
                                     const std::string& prediction)>;

/// Everything a report echoes so its numbers are never compared across
/// unnoticed config changes. Parallelism is deliberately absent: the
/// same config must produce the same report at any parallelism.
struct ReportConfigEcho {
    std::string preset;  // empty when assembled from individual flags
    std::string strategy = "none";
    std::string context_form = "raw";
    bool format_instruction = false;
    bool detections = false;
    std::string backend_id;
    std::optional<std::uint64_t> seed;
    double radius = 16.0;
    std::string split = "all";
    std::size_t split_offset = 0;
};

struct FrameMatch {
    std::string frame_id;
    std::size_t matched = 0;
    std::size_t gt_total = 0;
};

struct EvalReport {
    double accuracy = 0.0;
    double match = 0.0;                 // percent of gt centers matched
    std::array<double, 4> bleu{};       // bleu[k] is BLEU-(k+1), in [0,1]
    double rouge_l = 0.0;
    double cider = 0.0;
    BehaviorScores behavior;
    std::optional<double> gpt_score;
    double final = 0.0;
    double coverage = 0.0;              // answered fraction

    std::size_t total_records = 0;
    std::size_t answered_records = 0;
    std::size_t closed_records = 0;
    std::size_t text_records = 0;       // perception/prediction/planning
    std::size_t behavior_records = 0;
    std::size_t match_matched = 0;
    std::size_t match_gt_total = 0;

    std::map<std::string, double> weights_used;
    ReportConfigEcho config;
    std::vector<FrameMatch> per_frame_match;  // dataset order
    std::vector<Diagnostic> warnings;
};

struct ScoreOptions {
    double radius = 16.0;
    MatchPolicy match_policy = MatchPolicy::Greedy;
    std::map<std::string, double> weights;  // empty: equal over present components
    JudgeFn judge;
    ReportConfigEcho echo;
};

/// Scores a prediction set. Text metrics cover the perception,
/// prediction, and planning stages; behavior has its own slot accuracy;
/// the match metric compares tag centers parsed from answers, pooled
/// over objects. Unanswered nodes stay in the set and score as wrong.
inline EvalReport score_predictions(const std::vector<PredictionRecord>& records,
                                    const ScoreOptions& options = {}) {
    EvalReport report;
    report.config = options.echo;
    report.config.radius = options.radius;
    report.total_records = records.size();

    std::vector<CiderItem> cider_corpus;
    double bleu_sums[4] = {0, 0, 0, 0};
    double rouge_sum = 0.0;
    std::map<std::string, std::pair<std::size_t, std::size_t>> frame_match;  // ordered by id
    std::vector<std::string> frame_order;
    std::vector<PredictionRecord> behavior_records;
    double judge_sum = 0.0;

    for (const PredictionRecord& rec : records) {
        if (rec.answer != kUnanswered) ++report.answered_records;
        if (rec.answer_form == AnswerForm::Closed) ++report.closed_records;

        if (rec.stage == Stage::Behavior) {
            ++report.behavior_records;
            behavior_records.push_back(rec);
        } else {
            ++report.text_records;
            auto cand = tokenize(rec.answer);
            auto ref = tokenize(rec.gt_answer);
            for (int n = 1; n <= 4; ++n) {
                bleu_sums[n - 1] += bleu_n(cand, {ref}, n);
            }
            rouge_sum += rouge_l(cand, ref);
            cider_corpus.push_back({std::move(cand), {std::move(ref)}});
        }

        auto gt_tags = parse_object_tags(rec.gt_answer);
        if (!gt_tags.empty()) {
            auto pred_tags = parse_object_tags(rec.answer);
            auto counts = match_counts(pred_tags, gt_tags, options.radius, options.match_policy);
            report.match_matched += counts.matched;
            report.match_gt_total += counts.gt_total;
            auto [it, inserted] = frame_match.try_emplace(rec.frame_id, std::make_pair<std::size_t, std::size_t>(0, 0));
            if (inserted) frame_order.push_back(rec.frame_id);
            it->second.first += counts.matched;
            it->second.second += counts.gt_total;
        }

        if (options.judge) judge_sum += options.judge(rec.question, rec.gt_answer, rec.answer);
    }

    report.coverage = report.total_records
                          ? static_cast<double>(report.answered_records) /
                                static_cast<double>(report.total_records)
                          : 0.0;
    report.accuracy = accuracy(records);
    if (report.closed_records == 0) {
        report.warnings.push_back({Severity::Warning, "no_closed_records",
                                   "no closed-form records; accuracy reported as 0", "", ""});
    }
    if (report.text_records > 0) {
        for (int n = 0; n < 4; ++n) {
            report.bleu[static_cast<std::size_t>(n)] =
                bleu_sums[n] / static_cast<double>(report.text_records);
        }
        report.rouge_l = rouge_sum / static_cast<double>(report.text_records);
        report.cider = cider(cider_corpus);
    } else {
        report.warnings.push_back({Severity::Warning, "no_text_records",
                                   "no perception/prediction/planning records; text metrics are 0",
                                   "", ""});
    }
    report.behavior = behavior_accuracy(behavior_records, &report.warnings);
    if (report.match_gt_total > 0) {
        report.match = 100.0 * static_cast<double>(report.match_matched) /
                       static_cast<double>(report.match_gt_total);
    } else {
        report.warnings.push_back({Severity::Warning, "no_gt_tags",
                                   "no ground-truth answers contain tags; match reported as 0", "",
                                   ""});
    }
    for (const std::string& frame_id : frame_order) {
        const auto& [matched, total] = frame_match.at(frame_id);
        report.per_frame_match.push_back({frame_id, matched, total});
    }
    if (options.judge && report.total_records > 0) {
        report.gpt_score = judge_sum / static_cast<double>(report.total_records);
    }

    std::map<std::string, double> components;
    if (report.closed_records > 0) components["accuracy"] = report.accuracy;
    if (report.match_gt_total > 0) components["match"] = report.match;
    if (report.text_records > 0) {
        components["bleu1"] = report.bleu[0];
        components["bleu2"] = report.bleu[1];
        components["bleu3"] = report.bleu[2];
        components["bleu4"] = report.bleu[3];
        components["rouge_l"] = report.rouge_l;
        components["cider"] = report.cider;
    }
    if (report.behavior_records > 0) components["behavior"] = report.behavior.overall;
    if (report.gpt_score) components["gpt"] = *report.gpt_score;

    std::map<std::string, double> weights = options.weights;
    if (weights.empty()) {
        // Equal weights over the headline components that have data.
        for (const char* key : {"accuracy", "match", "bleu1", "rouge_l", "cider", "behavior", "gpt"}) {
            if (components.count(key)) weights[key] = 1.0;
        }
    }
    report.weights_used = weights;
    report.final = weights.empty() ? 0.0 : final_score(components, weights);
    return report;
}

namespace detail {

inline std::string weights_compact(const std::map<std::string, double>& weights) {
    std::string out;
    for (const auto& [key, value] : weights) {
        if (!out.empty()) out += ';';
        out += key + ":" + nlohmann::json(value).dump();
    }
    return out;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["config"]["preset"] = report.config.preset;
    j["config"]["strategy"] = report.config.strategy;
    j["config"]["context_form"] = report.config.context_form;
    j["config"]["format_instruction"] = report.config.format_instruction;
    j["config"]["detections"] = report.config.detections;
    j["config"]["backend"] = report.config.backend_id;
    if (report.config.seed) {
        j["config"]["seed"] = *report.config.seed;
    } else {
        j["config"]["seed"] = nullptr;
    }
    j["config"]["radius"] = report.config.radius;
    j["config"]["split"] = report.config.split;
    j["config"]["split_offset"] = report.config.split_offset;
    j["config"]["weights"] = report.weights_used;

    j["counts"]["records"] = report.total_records;
    j["counts"]["answered"] = report.answered_records;
    j["counts"]["closed"] = report.closed_records;
    j["counts"]["text"] = report.text_records;
    j["counts"]["behavior"] = report.behavior_records;
    j["counts"]["match_matched"] = report.match_matched;
    j["counts"]["match_gt_total"] = report.match_gt_total;
    j["counts"]["coverage"] = report.coverage;

    j["metrics"]["accuracy"] = report.accuracy;
    j["metrics"]["match"] = report.match;
    j["metrics"]["bleu1"] = report.bleu[0];
    j["metrics"]["bleu2"] = report.bleu[1];
    j["metrics"]["bleu3"] = report.bleu[2];
    j["metrics"]["bleu4"] = report.bleu[3];
    j["metrics"]["rouge_l"] = report.rouge_l;
    j["metrics"]["cider"] = report.cider;
    j["metrics"]["behavior_overall"] = report.behavior.overall;
    j["metrics"]["behavior_speed"] = report.behavior.speed;
    j["metrics"]["behavior_steer"] = report.behavior.steer;
    if (report.gpt_score) {
        j["metrics"]["gpt_score"] = *report.gpt_score;
    } else {
        j["metrics"]["gpt_score"] = nullptr;
    }
    j["metrics"]["final_score"] = report.final;

    nlohmann::ordered_json frames = nlohmann::ordered_json::array();
    for (const FrameMatch& fm : report.per_frame_match) {
        frames.push_back({{"frame_id", fm.frame_id}, {"matched", fm.matched}, {"gt_total", fm.gt_total}});
    }
    j["per_frame_match"] = std::move(frames);

    nlohmann::ordered_json warnings = nlohmann::ordered_json::array();
    for (const Diagnostic& d : report.warnings) warnings.push_back(d.to_string());
    j["warnings"] = std::move(warnings);
    return j;
}

inline constexpr std::string_view kReportCsvHeader =
    "preset,strategy,context_form,format_instruction,detections,backend,seed,radius,split,"
    "records,answered,coverage,accuracy,match,bleu1,bleu2,bleu3,bleu4,rouge_l,cider,"
    "behavior_overall,behavior_speed,behavior_steer,gpt_score,final_score,weights";

inline std::string report_to_csv_row(const EvalReport& report) {
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    std::string row;
    row += report.config.preset + ",";
    row += report.config.strategy + ",";
    row += report.config.context_form + ",";
    row += std::string(report.config.format_instruction ? "true" : "false") + ",";
    row += std::string(report.config.detections ? "true" : "false") + ",";
    row += report.config.backend_id + ",";
    row += (report.config.seed ? std::to_string(*report.config.seed) : "") + ",";
    row += num(report.config.radius) + ",";
    row += report.config.split + ",";
    row += std::to_string(report.total_records) + ",";
    row += std::to_string(report.answered_records) + ",";
    row += num(report.coverage) + ",";
    row += num(report.accuracy) + ",";
    row += num(report.match) + ",";
    row += num(report.bleu[0]) + "," + num(report.bleu[1]) + "," + num(report.bleu[2]) + "," +
           num(report.bleu[3]) + ",";
    row += num(report.rouge_l) + ",";
    row += num(report.cider) + ",";
    row += num(report.behavior.overall) + "," + num(report.behavior.speed) + "," +
           num(report.behavior.steer) + ",";
    row += (report.gpt_score ? num(*report.gpt_score) : "") + ",";
    row += num(report.final) + ",";
    row += detail::weights_compact(report.weights_used);
    return row;
}

/// Benchmark-style table: language metrics on the 0-100 scale, one row
/// for this run.
inline std::string report_to_table(const EvalReport& report, const std::string& method_name) {
    auto cell = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", v);
        return std::string(buf);
    };
    std::string out;
    out += "Method\tAcc.\tChatGPT\tMatch\tBLEU1\tROUGEL\tCIDEr\tFinal Score\n";
    out += method_name + "\t";
    out += cell(report.accuracy) + "\t";
    out += (report.gpt_score ? cell(*report.gpt_score) : std::string("-")) + "\t";
    out += cell(report.match) + "\t";
    out += cell(report.bleu[0] * 100.0) + "\t";
    out += cell(report.rouge_l * 100.0) + "\t";
    out += cell(report.cider * 10.0) + "\t";
    out += cell(report.final) + "\n";
    return out;
}

inline nlohmann::ordered_json predictions_to_json(const std::vector<PredictionRecord>& records) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const PredictionRecord& rec : records) {
        arr.push_back({{"frame_id", rec.frame_id},
                       {"node_id", rec.node_id},
                       {"question", rec.question},
                       {"answer", rec.answer},
                       {"gt_answer", rec.gt_answer},
                       {"stage", std::string(stage_name(rec.stage))}});
    }
    return arr;
}

}  // namespace gvqa

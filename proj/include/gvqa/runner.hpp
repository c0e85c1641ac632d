#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvqa/backend.hpp"
#include "gvqa/data_model.hpp"
#include "gvqa/detection.hpp"
#include "gvqa/diagnostics.hpp"
#include "gvqa/graph.hpp"
#include "gvqa/prompting.hpp"
#include "gvqa/report.hpp"

namespace gvqa {

enum class VersionPreset { Baseline, A, B, C, D, E };

inline std::string_view preset_name(VersionPreset p) {
    switch (p) {
        case VersionPreset::Baseline: return "baseline";
        case VersionPreset::A:        return "a";
        case VersionPreset::B:        return "b";
        case VersionPreset::C:        return "c";
        case VersionPreset::D:        return "d";
        case VersionPreset::E:        return "e";
    }
    return "baseline";
}

inline std::optional<VersionPreset> parse_preset(std::string_view name) {
    for (VersionPreset p : {VersionPreset::Baseline, VersionPreset::A, VersionPreset::B,
                            VersionPreset::C, VersionPreset::D, VersionPreset::E}) {
        if (preset_name(p) == name) return p;
    }
    return std::nullopt;
}

struct PresetFragment {
    ContextStrategy strategy = ContextStrategy::BaselineNone;
    PromptStyle style;
};

/// Ablation ladder: no context; chain; chain plus first answer; graph;
/// graph with declarative context; and finally the camera-order
/// instruction plus detector sentences on top.
inline PresetFragment preset(VersionPreset version) {
    switch (version) {
        case VersionPreset::Baseline:
            return {ContextStrategy::BaselineNone, {ContextForm::RawQa, false, false}};
        case VersionPreset::A:
            return {ContextStrategy::Cot, {ContextForm::RawQa, false, false}};
        case VersionPreset::B:
            return {ContextStrategy::CotN0, {ContextForm::RawQa, false, false}};
        case VersionPreset::C:
            return {ContextStrategy::Got, {ContextForm::RawQa, false, false}};
        case VersionPreset::D:
            return {ContextStrategy::Got, {ContextForm::Declarative, false, false}};
        case VersionPreset::E:
            return {ContextStrategy::Got, {ContextForm::Declarative, true, true}};
    }
    throw std::invalid_argument("unknown preset");
}

enum class SplitSelection { All, Train, Val };

inline std::string_view split_name(SplitSelection s) {
    switch (s) {
        case SplitSelection::All:   return "all";
        case SplitSelection::Train: return "train";
        case SplitSelection::Val:   return "val";
    }
    return "all";
}

inline std::optional<SplitSelection> parse_split(std::string_view name) {
    for (SplitSelection s : {SplitSelection::All, SplitSelection::Train, SplitSelection::Val}) {
        if (split_name(s) == name) return s;
    }
    return std::nullopt;
}

struct RunConfig {
    std::string dataset_path;
    SplitSelection split = SplitSelection::All;
    std::size_t split_offset = 0;

    std::optional<VersionPreset> version;  // echoed when a preset was used
    ContextStrategy strategy = ContextStrategy::BaselineNone;
    PromptStyle style;

    std::optional<StubMode> stub;
    std::optional<HttpBackendConfig> remote;

    std::string detections_path;
    double radius = 16.0;
    MatchPolicy match_policy = MatchPolicy::Greedy;
    std::map<std::string, double> weights;
    std::size_t parallelism = 1;
    std::string out_dir;  // empty: nothing written

    ParseOptions parse_options;
    std::string edge_overrides_path;
    std::string rules_path;
    bool fix_instruction_typo = false;
    bool detection_paper_typo = false;
    bool dump_prompts = false;
};

struct RunResult {
    std::vector<PredictionRecord> records;
    EvalReport report;
    std::size_t failed_nodes = 0;
    std::vector<Diagnostic> diagnostics;
    std::string predictions_path;  // empty when out_dir unset
    std::string report_path;
};

namespace detail {

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

struct FrameOutput {
    std::vector<PredictionRecord> records;
    std::vector<std::pair<std::string, std::string>> prompts;  // node_id -> full_text
    std::vector<Diagnostic> diagnostics;
    std::size_t failed = 0;
    std::exception_ptr error;
};

struct FrameTask {
    const KeyFrame* frame = nullptr;
};

inline ReportConfigEcho make_echo(const RunConfig& config, const std::string& backend_id) {
    ReportConfigEcho echo;
    echo.preset = config.version ? std::string(preset_name(*config.version)) : "";
    echo.strategy = std::string(strategy_name(config.strategy));
    echo.context_form = std::string(context_form_name(config.style.context_form));
    echo.format_instruction = config.style.include_format_instruction;
    echo.detections = config.style.include_detections;
    echo.backend_id = backend_id;
    if (config.stub && config.stub->kind == StubMode::Kind::Corrupt) {
        echo.seed = config.stub->seed;
    }
    echo.radius = config.radius;
    echo.split = std::string(split_name(config.split));
    echo.split_offset = config.split_offset;
    return echo;
}

}  // namespace detail

/// Answers every node of one frame in dependency order against the
/// backend, then reports predictions in dataset order. A node whose
/// query fails is recorded as UNANSWERED so its dependents still run.
inline detail::FrameOutput run_frame(const KeyFrame& frame, const RunConfig& config,
                                     InferenceBackend& backend, const RewriteRules& rules,
                                     const EdgeOverrides* overrides,
                                     const std::vector<DetectionRecord>* frame_detections) {
    detail::FrameOutput out;
    if (frame.qa_list.empty()) {
        out.diagnostics.push_back({Severity::Warning, "empty_qa_list",
                                   "frame skipped: no QA pairs", frame.frame_id, ""});
        return out;
    }
    GvqaGraph graph = build_graph(frame, config.strategy, overrides);
    std::vector<std::string> order = execution_order(graph);

    std::string detection_context;
    if (config.style.include_detections && frame_detections) {
        detection_context = render_detection_context(*frame_detections, config.detection_paper_typo);
    }

    std::map<std::string, std::string> answers;
    for (const std::string& node_id : order) {
        const QANode& node = frame.qa_list[static_cast<std::size_t>(graph.index(node_id))];
        std::string context =
            assemble_context(node, graph, frame, answers, config.style, rules, &out.diagnostics);
        AssembledPrompt prompt = build_prompt(context, node.question, config.style,
                                              detection_context, config.fix_instruction_typo);
        InferenceRequest request;
        request.frame_id = frame.frame_id;
        request.node_id = node.node_id;
        request.prompt = prompt.full_text;
        request.image_refs = frame.camera_images;
        if (config.remote) request.timeout = config.remote->timeout;

        std::string answer;
        try {
            answer = backend.query(request).answer;
        } catch (const BackendError& e) {
            answer = std::string(kUnanswered);
            ++out.failed;
            out.diagnostics.push_back({Severity::Warning, "node_failed", e.what(),
                                       frame.frame_id, node.node_id});
        }
        answers[node.node_id] = std::move(answer);
    }

    for (const QANode& node : frame.qa_list) {
        out.records.push_back({frame.frame_id, node.node_id, node.question,
                               answers.at(node.node_id), node.gt_answer, node.stage,
                               node.answer_form});
    }
    if (config.dump_prompts) {
        // Prompts are re-derived per node in dataset order from the same
        // recorded answers, so the dump is schedule-independent.
        for (const QANode& node : frame.qa_list) {
            std::string context =
                assemble_context(node, graph, frame, answers, config.style, rules, nullptr);
            AssembledPrompt prompt = build_prompt(context, node.question, config.style,
                                                  detection_context, config.fix_instruction_typo);
            out.prompts.emplace_back(node.node_id, prompt.full_text);
        }
    }
    return out;
}

/// Prompt set a configuration would send when every answer echoes the
/// ground truth; the reference artifact for prompt regression tests.
inline std::vector<std::pair<std::string, std::string>> collect_prompts(
    const std::vector<Scene>& scenes, ContextStrategy strategy, const PromptStyle& style,
    const DetectionMap* detections = nullptr, const RewriteRules& rules = default_rewrite_rules(),
    const EdgeOverrides* overrides = nullptr, bool fix_instruction_typo = false,
    bool detection_paper_typo = false) {
    std::vector<std::pair<std::string, std::string>> prompts;
    for (const Scene& scene : scenes) {
        for (const KeyFrame& frame : scene.frames) {
            if (frame.qa_list.empty()) continue;
            GvqaGraph graph = build_graph(frame, strategy, overrides);
            std::string detection_context;
            if (style.include_detections && detections) {
                if (auto it = detections->find(frame.frame_id); it != detections->end()) {
                    detection_context = render_detection_context(it->second, detection_paper_typo);
                }
            }
            std::map<std::string, std::string> answers;
            for (const QANode& node : frame.qa_list) answers[node.node_id] = node.gt_answer;
            for (const QANode& node : frame.qa_list) {
                std::string context = assemble_context(node, graph, frame, answers, style, rules);
                AssembledPrompt prompt = build_prompt(context, node.question, style,
                                                      detection_context, fix_instruction_typo);
                prompts.emplace_back(node.node_id, prompt.full_text);
            }
        }
    }
    return prompts;
}

namespace detail {

inline nlohmann::ordered_json run_meta_json(const RunConfig& config, const EvalReport& report) {
    nlohmann::ordered_json meta;
    meta["preset"] = report.config.preset;
    meta["strategy"] = report.config.strategy;
    meta["context_form"] = report.config.context_form;
    meta["format_instruction"] = report.config.format_instruction;
    meta["detections"] = report.config.detections;
    meta["backend"] = report.config.backend_id;
    if (report.config.seed) {
        meta["seed"] = *report.config.seed;
    } else {
        meta["seed"] = nullptr;
    }
    meta["radius"] = report.config.radius;
    meta["split"] = report.config.split;
    meta["split_offset"] = report.config.split_offset;
    meta["weights"] = report.weights_used;
    meta["match_policy"] = config.match_policy == MatchPolicy::Greedy ? "greedy" : "optimal";
    meta["parallelism"] = config.parallelism;
    nlohmann::ordered_json vocab = nlohmann::ordered_json::array();
    for (const std::string& word : config.parse_options.closed_vocabulary) vocab.push_back(word);
    meta["closed_vocabulary"] = std::move(vocab);
    return meta;
}

}  // namespace detail

/// Executes a full configuration: parse, split, graph-driven inference
/// per frame (frames run concurrently up to `parallelism`), scoring, and
/// atomic persistence of predictions plus report.
inline RunResult run(const RunConfig& config) {
    if (config.style.include_detections && config.detections_path.empty()) {
        throw std::invalid_argument("detections path required when the style includes detections");
    }
    if (!config.stub && !config.remote) {
        throw std::invalid_argument("a backend is required: configure a stub or a remote URL");
    }

    RunResult result;
    std::vector<Scene> scenes =
        parse_dataset_file(config.dataset_path, config.parse_options, &result.diagnostics);
    if (config.split != SplitSelection::All) {
        DatasetSplit split = split_validation(scenes, config.split_offset);
        scenes = config.split == SplitSelection::Train ? std::move(split.train)
                                                       : std::move(split.val);
    }

    DetectionMap detections;
    if (!config.detections_path.empty()) {
        detections = load_detections_file(config.detections_path, &result.diagnostics);
    }
    EdgeOverrides overrides;
    const EdgeOverrides* overrides_ptr = nullptr;
    if (!config.edge_overrides_path.empty()) {
        overrides = load_edge_overrides_file(config.edge_overrides_path);
        overrides_ptr = &overrides;
    }
    RewriteRules rules =
        config.rules_path.empty() ? default_rewrite_rules() : load_rewrite_rules_file(config.rules_path);

    std::unique_ptr<InferenceBackend> backend;
    if (config.stub) {
        backend = std::make_unique<StubBackend>(*config.stub, scenes);
    } else {
        backend = std::make_unique<HttpBackend>(*config.remote);
    }

    std::vector<detail::FrameTask> tasks;
    for (const Scene& scene : scenes) {
        for (const KeyFrame& frame : scene.frames) tasks.push_back({&frame});
    }

    std::vector<detail::FrameOutput> slots(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        while (true) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) break;
            const KeyFrame& frame = *tasks[i].frame;
            try {
                const std::vector<DetectionRecord>* frame_det = nullptr;
                if (auto it = detections.find(frame.frame_id); it != detections.end()) {
                    frame_det = &it->second;
                }
                slots[i] = run_frame(frame, config, *backend, rules, overrides_ptr, frame_det);
            } catch (...) {
                slots[i].error = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(config.parallelism, tasks.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(n_threads);
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    for (detail::FrameOutput& slot : slots) {
        if (slot.error) std::rethrow_exception(slot.error);
        result.failed_nodes += slot.failed;
        for (auto& rec : slot.records) result.records.push_back(std::move(rec));
        for (auto& d : slot.diagnostics) result.diagnostics.push_back(std::move(d));
    }

    ScoreOptions score_options;
    score_options.radius = config.radius;
    score_options.match_policy = config.match_policy;
    score_options.weights = config.weights;
    score_options.echo = detail::make_echo(config, backend->id());
    result.report = score_predictions(result.records, score_options);

    if (!config.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::path dir(config.out_dir);
        fs::create_directories(dir);
        detail::atomic_write(dir / "predictions.json", predictions_to_json(result.records).dump(2) + "\n");
        detail::atomic_write(dir / "run_meta.json",
                             detail::run_meta_json(config, result.report).dump(2) + "\n");
        detail::atomic_write(dir / "report.json", report_to_json(result.report).dump(2) + "\n");
        detail::atomic_write(dir / "report.csv",
                             std::string(kReportCsvHeader) + "\n" + report_to_csv_row(result.report) + "\n");
        if (config.dump_prompts) {
            nlohmann::ordered_json prompts = nlohmann::ordered_json::object();
            for (const detail::FrameOutput& slot : slots) {
                for (const auto& [node_id, text] : slot.prompts) prompts[node_id] = text;
            }
            detail::atomic_write(dir / "prompts.json", prompts.dump(2) + "\n");
        }
        result.predictions_path = (dir / "predictions.json").string();
        result.report_path = (dir / "report.json").string();
    }
    return result;
}

struct EvalInputs {
    std::string predictions_path;
    std::string dataset_path;
    std::string meta_path;  // empty: run_meta.json beside the predictions, if present
    std::map<std::string, double> weights;
    std::optional<double> radius;
    MatchPolicy match_policy = MatchPolicy::Greedy;
    ParseOptions parse_options;
    std::string out_dir;  // empty: nothing written
};

struct EvalResult {
    std::vector<PredictionRecord> records;
    EvalReport report;
    std::vector<Diagnostic> diagnostics;
};

/// Rescores a persisted predictions file against the dataset without
/// re-running inference. Run metadata, when present, restores the
/// original config echo, radius, and weights so the report reproduces
/// the run's byte for byte.
inline EvalResult eval_predictions(const EvalInputs& inputs) {
    EvalResult result;

    std::ifstream in(inputs.predictions_path, std::ios::binary);
    if (!in) throw ParseError("cannot open predictions file: " + inputs.predictions_path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("predictions parse error: ") + e.what(), e.byte);
    }
    if (!doc.is_array()) throw ParseError("predictions file must be a list of records");

    std::vector<Scene> scenes =
        parse_dataset_file(inputs.dataset_path, inputs.parse_options, &result.diagnostics);
    struct NodeRef {
        std::size_t position;
        const QANode* node;
    };
    std::map<std::string, NodeRef> index;
    std::size_t position = 0;
    for (const Scene& scene : scenes) {
        for (const KeyFrame& frame : scene.frames) {
            for (const QANode& node : frame.qa_list) index[node.node_id] = {position++, &node};
        }
    }

    struct Loaded {
        std::size_t position;
        PredictionRecord record;
    };
    std::vector<Loaded> loaded;
    std::vector<std::string> unresolved;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("node_id") || !item.contains("answer")) {
            throw ParseError("prediction records need node_id and answer");
        }
        const std::string node_id = item["node_id"].get<std::string>();
        auto it = index.find(node_id);
        if (it == index.end()) {
            unresolved.push_back(node_id);
            continue;
        }
        const QANode& node = *it->second.node;
        PredictionRecord rec;
        rec.frame_id = item.value("frame_id", std::string());
        rec.node_id = node_id;
        rec.question = node.question;
        rec.answer = item["answer"].get<std::string>();
        rec.gt_answer = node.gt_answer;
        rec.stage = node.stage;
        rec.answer_form = node.answer_form;
        if (item.contains("gt_answer") && item["gt_answer"].get<std::string>() != node.gt_answer) {
            result.diagnostics.push_back({Severity::Warning, "gt_mismatch",
                                          "predictions file ground truth differs from dataset; "
                                          "dataset wins",
                                          rec.frame_id, node_id});
        }
        loaded.push_back({it->second.position, std::move(rec)});
    }
    if (!unresolved.empty()) {
        std::string joined;
        for (const std::string& id : unresolved) {
            if (!joined.empty()) joined += ", ";
            joined += id;
        }
        throw ParseError("predictions reference unknown node ids: " + joined);
    }
    std::stable_sort(loaded.begin(), loaded.end(),
                     [](const Loaded& a, const Loaded& b) { return a.position < b.position; });
    for (Loaded& l : loaded) result.records.push_back(std::move(l.record));

    // Restore the run's config echo from its metadata sidecar.
    ScoreOptions options;
    options.match_policy = inputs.match_policy;
    std::filesystem::path meta_path = inputs.meta_path;
    if (meta_path.empty()) {
        std::filesystem::path sibling =
            std::filesystem::path(inputs.predictions_path).parent_path() / "run_meta.json";
        if (std::filesystem::exists(sibling)) meta_path = sibling;
    }
    if (!meta_path.empty() && std::filesystem::exists(meta_path)) {
        std::ifstream meta_in(meta_path, std::ios::binary);
        nlohmann::json meta = nlohmann::json::parse(meta_in, nullptr, false);
        if (!meta.is_discarded() && meta.is_object()) {
            options.echo.preset = meta.value("preset", std::string());
            options.echo.strategy = meta.value("strategy", std::string("none"));
            options.echo.context_form = meta.value("context_form", std::string("raw"));
            options.echo.format_instruction = meta.value("format_instruction", false);
            options.echo.detections = meta.value("detections", false);
            options.echo.backend_id = meta.value("backend", std::string());
            if (meta.contains("seed") && meta["seed"].is_number_unsigned()) {
                options.echo.seed = meta["seed"].get<std::uint64_t>();
            }
            options.radius = meta.value("radius", 16.0);
            options.echo.split = meta.value("split", std::string("all"));
            options.echo.split_offset = meta.value("split_offset", std::size_t{0});
            if (meta.contains("match_policy") && meta["match_policy"] == "optimal") {
                options.match_policy = MatchPolicy::Optimal;
            }
            if (meta.contains("weights") && meta["weights"].is_object()) {
                for (const auto& [key, value] : meta["weights"].items()) {
                    options.weights[key] = value.get<double>();
                }
            }
        }
    }
    if (inputs.radius) options.radius = *inputs.radius;
    if (!inputs.weights.empty()) options.weights = inputs.weights;

    result.report = score_predictions(result.records, options);

    if (!inputs.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::path dir(inputs.out_dir);
        fs::create_directories(dir);
        detail::atomic_write(dir / "report.json", report_to_json(result.report).dump(2) + "\n");
        detail::atomic_write(dir / "report.csv",
                             std::string(kReportCsvHeader) + "\n" + report_to_csv_row(result.report) + "\n");
    }
    return result;
}

struct ValidationResult {
    std::vector<Diagnostic> diagnostics;
    bool fatal = false;
    std::string fatal_message;
};

/// Parses the dataset, validates every frame, and dry-builds the graphs
/// for all strategies. Structural damage is fatal; annotation noise is
/// listed and tolerated.
inline ValidationResult validate_dataset(const std::string& dataset_path,
                                         const ParseOptions& options = {}) {
    ValidationResult result;
    std::vector<Scene> scenes;
    try {
        scenes = parse_dataset_file(dataset_path, options, &result.diagnostics);
    } catch (const ParseError& e) {
        result.fatal = true;
        result.fatal_message = e.what();
        return result;
    }
    for (const Scene& scene : scenes) {
        if (scene.frames.empty()) {
            result.diagnostics.push_back({Severity::Warning, "empty_scene",
                                          "scene has no key frames", scene.scene_id, ""});
        }
        for (const KeyFrame& frame : scene.frames) {
            auto frame_diags = validate_frame(frame);
            result.diagnostics.insert(result.diagnostics.end(), frame_diags.begin(),
                                      frame_diags.end());
            if (frame.qa_list.empty()) continue;
            for (ContextStrategy strategy :
                 {ContextStrategy::BaselineNone, ContextStrategy::Cot, ContextStrategy::CotN0,
                  ContextStrategy::Got}) {
                try {
                    GvqaGraph graph = build_graph(frame, strategy);
                    execution_order(graph);
                } catch (const GraphError& e) {
                    result.diagnostics.push_back({Severity::Error, "graph_build_failed", e.what(),
                                                  frame.frame_id, ""});
                }
            }
        }
    }
    return result;
}

}  // namespace gvqa

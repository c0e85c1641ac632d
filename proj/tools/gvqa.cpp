// Command-line front end: run configurations against a backend, rescore
// persisted predictions, validate datasets, and show version presets.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gvqa/gvqa.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitBackendFailure = 2;

std::map<std::string, double> parse_weights(const std::string& spec) {
    std::map<std::string, double> weights;
    std::size_t begin = 0;
    while (begin <= spec.size()) {
        std::size_t end = spec.find(',', begin);
        if (end == std::string::npos) end = spec.size();
        std::string part = spec.substr(begin, end - begin);
        begin = end + 1;
        if (part.empty()) continue;
        auto eq = part.find('=');
        if (eq == std::string::npos) {
            throw CLI::ValidationError("--weights", "expected key=value pairs, got '" + part + "'");
        }
        weights[part.substr(0, eq)] = std::stod(part.substr(eq + 1));
    }
    return weights;
}

gvqa::StubMode parse_stub(const std::string& spec, std::optional<std::uint64_t> seed) {
    if (spec == "echo") return gvqa::StubMode::echo_gt();
    if (spec.rfind("fixed:", 0) == 0) return gvqa::StubMode::fixed(spec.substr(6));
    if (spec.rfind("corrupt:", 0) == 0) {
        std::string rest = spec.substr(8);
        auto colon = rest.find(':');
        double rate = std::stod(rest.substr(0, colon));
        if (colon != std::string::npos) {
            return gvqa::StubMode::corrupt(rate, std::stoull(rest.substr(colon + 1)));
        }
        if (!seed) {
            throw CLI::ValidationError(
                "--stub", "corrupt stub needs a seed: use corrupt:<p>:<seed> or --seed");
        }
        return gvqa::StubMode::corrupt(rate, *seed);
    }
    throw CLI::ValidationError("--stub", "expected echo, fixed:<text>, or corrupt:<p>[:<seed>]");
}

gvqa::ParseOptions parse_options_from(const std::string& closed_vocab) {
    gvqa::ParseOptions opts;
    if (closed_vocab.empty()) return opts;
    opts.closed_vocabulary.clear();
    std::size_t begin = 0;
    while (begin <= closed_vocab.size()) {
        std::size_t end = closed_vocab.find(',', begin);
        if (end == std::string::npos) end = closed_vocab.size();
        std::string word = gvqa::normalize_answer(closed_vocab.substr(begin, end - begin));
        if (!word.empty()) opts.closed_vocabulary.insert(word);
        begin = end + 1;
    }
    return opts;
}

gvqa::HttpBackendConfig backend_config_from(const std::string& url, const std::string& config_path,
                                            std::size_t parallelism) {
    gvqa::HttpBackendConfig config;
    config.base_url = url;
    config.max_inflight = std::max<std::size_t>(1, parallelism);
    if (!config_path.empty()) {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw gvqa::ParseError("cannot open backend config: " + config_path);
        nlohmann::json doc = nlohmann::json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.is_object()) {
            throw gvqa::ParseError("backend config must be a JSON object");
        }
        if (doc.contains("timeout_ms")) {
            config.timeout = std::chrono::milliseconds(doc["timeout_ms"].get<long>());
        }
        if (doc.contains("max_retries")) config.max_retries = doc["max_retries"].get<int>();
        if (doc.contains("backoff_ms")) {
            config.backoff_base = std::chrono::milliseconds(doc["backoff_ms"].get<long>());
        }
        if (doc.contains("max_inflight")) {
            config.max_inflight = doc["max_inflight"].get<std::size_t>();
        }
        if (doc.contains("auth_header")) config.auth_header = doc["auth_header"].get<std::string>();
    }
    return config;
}

void print_diagnostics(const std::vector<gvqa::Diagnostic>& diags) {
    for (const auto& d : diags) std::cerr << d.to_string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Graph-VQA orchestration and evaluation harness"};
    app.require_subcommand(1);

    // ----- run ------------------------------------------------------------
    auto* run_cmd = app.add_subcommand("run", "Execute a configuration and score the results");
    std::string dataset, split_str = "all", preset_str, strategy_str, style_str;
    std::string backend_url, stub_spec, detections, out_dir, weights_spec;
    std::string edge_overrides, rules_path, closed_vocab, backend_config_path;
    std::size_t split_offset = 0, parallelism = 1;
    double radius = 16.0;
    std::optional<std::uint64_t> seed;
    bool table = false, dump_prompts = false;
    bool fix_typo = false, paper_typo = false;
    std::string match_policy_str = "greedy";

    run_cmd->add_option("--dataset", dataset, "Dataset file")->required();
    run_cmd->add_option("--split", split_str, "Scene split: all, train, val")
        ->check(CLI::IsMember({"all", "train", "val"}));
    run_cmd->add_option("--split-offset", split_offset, "Which scene of each group of six is validation");
    run_cmd->add_option("--preset", preset_str, "Version preset: baseline, a, b, c, d, e")
        ->check(CLI::IsMember({"baseline", "a", "b", "c", "d", "e"}));
    run_cmd->add_option("--strategy", strategy_str, "Context strategy: none, cot, cot_n0, got")
        ->check(CLI::IsMember({"none", "cot", "cot_n0", "got"}));
    run_cmd->add_option("--style", style_str, "Context form: raw, declarative")
        ->check(CLI::IsMember({"raw", "declarative"}));
    auto* fi_opt = run_cmd->add_flag("--format-instruction,!--no-format-instruction",
                                     "Prepend the camera-order instruction");
    run_cmd->add_option("--backend", backend_url,
                        "Model server URL (or set GVQA_BACKEND_URL)");
    run_cmd->add_option("--stub", stub_spec, "Stub backend: echo, fixed:<text>, corrupt:<p>[:<seed>]");
    run_cmd->add_option("--detections", detections, "Detection sidecar file");
    run_cmd->add_option("--radius", radius, "Center-match radius in pixels");
    run_cmd->add_option("--weights", weights_spec, "Final-score weights, e.g. accuracy=1,bleu1=1");
    run_cmd->add_option("--seed", seed, "Seed for the corrupt stub");
    run_cmd->add_option("--parallelism", parallelism, "Frames processed concurrently");
    run_cmd->add_option("--out", out_dir, "Output directory for predictions and reports");
    run_cmd->add_option("--edge-overrides", edge_overrides, "Hand-authored GoT edge list");
    run_cmd->add_option("--rules", rules_path, "Declarative rewrite-rule file");
    run_cmd->add_option("--closed-vocab", closed_vocab, "Comma list of closed-answer words");
    run_cmd->add_option("--backend-config", backend_config_path,
                        "JSON with timeout_ms, max_retries, backoff_ms, max_inflight, auth_header");
    run_cmd->add_option("--match-policy", match_policy_str, "greedy or optimal")
        ->check(CLI::IsMember({"greedy", "optimal"}));
    run_cmd->add_flag("--table", table, "Print the benchmark-style score table");
    run_cmd->add_flag("--dump-prompts", dump_prompts, "Also write prompts.json");
    run_cmd->add_flag("--fix-instruction-typo", fix_typo,
                      "Emit 'back right' instead of the published 'back right left'");
    run_cmd->add_flag("--detection-paper-typo", paper_typo,
                      "Open detection sentences with the published 'These is'");

    // ----- eval -----------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "Rescore a persisted predictions file");
    std::string eval_predictions_path, eval_dataset, eval_meta, eval_weights_spec, eval_out;
    std::string eval_closed_vocab, eval_match_policy = "greedy";
    std::optional<double> eval_radius;
    bool eval_table = false;
    eval_cmd->add_option("--predictions", eval_predictions_path, "Predictions file")->required();
    eval_cmd->add_option("--dataset", eval_dataset, "Dataset file")->required();
    eval_cmd->add_option("--meta", eval_meta, "run_meta.json path (default: beside predictions)");
    eval_cmd->add_option("--weights", eval_weights_spec, "Final-score weights override");
    eval_cmd->add_option("--radius", eval_radius, "Center-match radius override");
    eval_cmd->add_option("--out", eval_out, "Output directory for the recomputed report");
    eval_cmd->add_option("--closed-vocab", eval_closed_vocab, "Comma list of closed-answer words");
    eval_cmd->add_option("--match-policy", eval_match_policy, "greedy or optimal")
        ->check(CLI::IsMember({"greedy", "optimal"}));
    eval_cmd->add_flag("--table", eval_table, "Print the benchmark-style score table");

    // ----- validate ---------------------------------------------------------
    auto* validate_cmd = app.add_subcommand("validate", "Check a dataset file for conformance");
    std::string validate_dataset_path, validate_closed_vocab;
    validate_cmd->add_option("--dataset", validate_dataset_path, "Dataset file")->required();
    validate_cmd->add_option("--closed-vocab", validate_closed_vocab,
                             "Comma list of closed-answer words");

    // ----- preset -----------------------------------------------------------
    auto* preset_cmd = app.add_subcommand("preset", "Show what a version preset expands to");
    std::string show_preset;
    preset_cmd->add_option("--show", show_preset, "Preset name")->required()
        ->check(CLI::IsMember({"baseline", "a", "b", "c", "d", "e"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) {
            gvqa::RunConfig config;
            config.dataset_path = dataset;
            config.split = *gvqa::parse_split(split_str);
            config.split_offset = split_offset;
            if (!preset_str.empty()) {
                auto version = *gvqa::parse_preset(preset_str);
                auto fragment = gvqa::preset(version);
                config.version = version;
                config.strategy = fragment.strategy;
                config.style = fragment.style;
            }
            if (!strategy_str.empty()) config.strategy = *gvqa::parse_strategy(strategy_str);
            if (!style_str.empty()) config.style.context_form = *gvqa::parse_context_form(style_str);
            if (fi_opt->count() > 0) {
                config.style.include_format_instruction = fi_opt->as<bool>();
            }
            if (!detections.empty()) {
                config.detections_path = detections;
                config.style.include_detections = true;
            }
            config.radius = radius;
            if (!weights_spec.empty()) config.weights = parse_weights(weights_spec);
            config.parallelism = std::max<std::size_t>(1, parallelism);
            config.out_dir = out_dir;
            config.parse_options = parse_options_from(closed_vocab);
            config.edge_overrides_path = edge_overrides;
            config.rules_path = rules_path;
            config.fix_instruction_typo = fix_typo;
            config.detection_paper_typo = paper_typo;
            config.dump_prompts = dump_prompts;
            config.match_policy = match_policy_str == "optimal" ? gvqa::MatchPolicy::Optimal
                                                                : gvqa::MatchPolicy::Greedy;

            if (!stub_spec.empty()) {
                config.stub = parse_stub(stub_spec, seed);
            } else {
                std::string url = backend_url;
                if (url.empty()) {
                    if (const char* env = std::getenv("GVQA_BACKEND_URL")) url = env;
                }
                if (url.empty()) {
                    std::cerr << "error: no backend configured; pass --stub, --backend, or set "
                                 "GVQA_BACKEND_URL\n";
                    return kExitInputError;
                }
                config.remote = backend_config_from(url, backend_config_path, config.parallelism);
            }

            gvqa::RunResult result = gvqa::run(config);
            print_diagnostics(result.diagnostics);
            std::string method = config.version
                                     ? "preset_" + std::string(gvqa::preset_name(*config.version))
                                     : std::string(gvqa::strategy_name(config.strategy));
            if (table) {
                std::cout << gvqa::report_to_table(result.report, method);
            } else {
                std::cout << gvqa::report_to_json(result.report).dump(2) << "\n";
            }
            if (!result.predictions_path.empty()) {
                std::cerr << "predictions: " << result.predictions_path << "\n";
            }
            return result.failed_nodes > 0 ? kExitBackendFailure : kExitOk;
        }

        if (eval_cmd->parsed()) {
            gvqa::EvalInputs inputs;
            inputs.predictions_path = eval_predictions_path;
            inputs.dataset_path = eval_dataset;
            inputs.meta_path = eval_meta;
            if (!eval_weights_spec.empty()) inputs.weights = parse_weights(eval_weights_spec);
            inputs.radius = eval_radius;
            inputs.parse_options = parse_options_from(eval_closed_vocab);
            inputs.match_policy = eval_match_policy == "optimal" ? gvqa::MatchPolicy::Optimal
                                                                 : gvqa::MatchPolicy::Greedy;
            inputs.out_dir = eval_out;
            gvqa::EvalResult result = gvqa::eval_predictions(inputs);
            print_diagnostics(result.diagnostics);
            if (eval_table) {
                std::cout << gvqa::report_to_table(result.report, "eval");
            } else {
                std::cout << gvqa::report_to_json(result.report).dump(2) << "\n";
            }
            return kExitOk;
        }

        if (validate_cmd->parsed()) {
            auto result = gvqa::validate_dataset(validate_dataset_path,
                                                 parse_options_from(validate_closed_vocab));
            if (result.fatal) {
                std::cerr << "fatal: " << result.fatal_message << "\n";
                return kExitInputError;
            }
            print_diagnostics(result.diagnostics);
            std::cout << result.diagnostics.size() << " diagnostic(s), none fatal\n";
            return kExitOk;
        }

        if (preset_cmd->parsed()) {
            auto fragment = gvqa::preset(*gvqa::parse_preset(show_preset));
            nlohmann::ordered_json doc;
            doc["preset"] = show_preset;
            doc["strategy"] = std::string(gvqa::strategy_name(fragment.strategy));
            doc["context_form"] = std::string(gvqa::context_form_name(fragment.style.context_form));
            doc["format_instruction"] = fragment.style.include_format_instruction;
            doc["detections"] = fragment.style.include_detections;
            std::cout << doc.dump(2) << "\n";
            return kExitOk;
        }
    } catch (const gvqa::BackendError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackendFailure;
    } catch (const gvqa::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitOk;
}

// Minimal library walkthrough: run the bundled fixture through preset D
// with the echo stub and print the score table.

#include <iostream>

#include "gvqa/gvqa.hpp"

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: stub_run <dataset.json> [detections.json]\n";
        return 1;
    }
    gvqa::RunConfig config;
    config.dataset_path = argv[1];
    auto fragment = gvqa::preset(gvqa::VersionPreset::D);
    config.version = gvqa::VersionPreset::D;
    config.strategy = fragment.strategy;
    config.style = fragment.style;
    if (argc > 2) {
        config.detections_path = argv[2];
        config.style.include_detections = true;
    }
    config.stub = gvqa::StubMode::echo_gt();

    try {
        gvqa::RunResult result = gvqa::run(config);
        std::cout << gvqa::report_to_table(result.report, "stub_run");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

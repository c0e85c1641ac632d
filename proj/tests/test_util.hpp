#pragma once

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "gvqa/data_model.hpp"
#include "gvqa/tag.hpp"

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return std::string(GVQA_TEST_FIXTURE_DIR) + "/" + name;
}

inline std::string golden_path(const std::string& name) {
    return std::string(GVQA_TEST_GOLDEN_DIR) + "/" + name;
}

inline std::string asset_path(const std::string& name) {
    return std::string(GVQA_ASSET_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

inline bool regen_golden() { return std::getenv("GVQA_REGEN_GOLDEN") != nullptr; }

/// Builds a frame directly from (stage, question, answer) triples; tags
/// are parsed out of the question text like the dataset parser does.
inline gvqa::KeyFrame make_frame(
    const std::string& frame_id,
    const std::vector<std::tuple<gvqa::Stage, std::string, std::string>>& qas) {
    gvqa::KeyFrame frame;
    frame.frame_id = frame_id;
    gvqa::ParseOptions opts;
    for (std::size_t i = 0; i < qas.size(); ++i) {
        const auto& [stage, question, answer] = qas[i];
        gvqa::QANode node;
        node.node_id = frame_id + "_" + std::to_string(i);
        node.stage = stage;
        node.question = question;
        node.gt_answer = answer;
        node.referenced_tags = gvqa::parse_object_tags(question);
        node.answer_form = gvqa::answer_form_for(answer, opts);
        frame.qa_list.push_back(std::move(node));
    }
    return frame;
}

/// Random tag on the one-decimal grid the dataset uses.
inline gvqa::ObjectTag random_tag(std::mt19937& rng) {
    std::uniform_int_distribution<int> id_dist(1, 99);
    std::uniform_int_distribution<int> cam_dist(0, 5);
    std::uniform_int_distribution<int> x_dist(0, 16000);
    std::uniform_int_distribution<int> y_dist(0, 9000);
    gvqa::ObjectTag tag;
    tag.id = "c" + std::to_string(id_dist(rng));
    tag.camera = gvqa::kAllCameras[static_cast<std::size_t>(cam_dist(rng))];
    tag.x = static_cast<double>(x_dist(rng)) / 10.0;
    tag.y = static_cast<double>(y_dist(rng)) / 10.0;
    return tag;
}

/// Random frame whose questions mention random tags; qa_list respects
/// the concatenated stage order like parsed data.
inline gvqa::KeyFrame random_frame(std::mt19937& rng, const std::string& frame_id) {
    std::uniform_int_distribution<int> n_dist(1, 12);
    std::uniform_int_distribution<int> tag_count_dist(0, 3);
    std::uniform_int_distribution<int> tag_id_dist(1, 5);
    const int n = n_dist(rng);
    std::vector<std::tuple<gvqa::Stage, std::string, std::string>> qas;
    for (int i = 0; i < n; ++i) {
        // Nondecreasing stage labels across the list.
        auto stage = gvqa::kAllStages[static_cast<std::size_t>(
            std::min<int>(3, (i * 4) / std::max(1, n)))];
        std::string question = "Question " + std::to_string(i);
        const int n_tags = tag_count_dist(rng);
        for (int t = 0; t < n_tags; ++t) {
            gvqa::ObjectTag tag = random_tag(rng);
            tag.id = "c" + std::to_string(tag_id_dist(rng));
            question += " " + gvqa::serialize_tag(tag);
        }
        question += "?";
        qas.emplace_back(stage, question, "Answer " + std::to_string(i) + ".");
    }
    return make_frame(frame_id, qas);
}

}  // namespace testutil

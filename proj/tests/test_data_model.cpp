#include "gvqa/data_model.hpp"

#include <gtest/gtest.h>

#include <sstream>

#include <nlohmann/json.hpp>

#include "test_util.hpp"

using namespace gvqa;

namespace {

std::vector<Scene> parse_string(const std::string& text, std::vector<Diagnostic>* diags = nullptr) {
    std::istringstream in(text);
    return parse_dataset(in, ParseOptions{}, diags);
}

const char* kMinimalDoc = R"({
  "s1": {
    "key_frames": {
      "f1": {
        "image_paths": {"CAM_FRONT": "a.jpg"},
        "key_object_infos": {},
        "QA": {"perception": [{"Q": "Anything ahead?", "A": "No."}]}
      }
    }
  }
})";

// Re-serializes exactly the fields the harness consumes, for the
// golden-file parse stability check.
nlohmann::ordered_json scenes_to_json(const std::vector<Scene>& scenes) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::object();
    for (const Scene& scene : scenes) {
        nlohmann::ordered_json jframes = nlohmann::ordered_json::object();
        for (const KeyFrame& frame : scene.frames) {
            nlohmann::ordered_json jframe;
            nlohmann::ordered_json images = nlohmann::ordered_json::object();
            for (const auto& [cam, path] : frame.camera_images) {
                images[std::string(camera_name(cam))] = path;
            }
            jframe["image_paths"] = images;
            nlohmann::ordered_json objects = nlohmann::ordered_json::object();
            for (const auto& [id, info] : frame.key_objects) {
                nlohmann::ordered_json jinfo;
                jinfo["Category"] = info.category;
                jinfo["Status"] = info.moving_state;
                jinfo["Visual_description"] = info.description;
                if (info.bbox) {
                    jinfo["2d_bbox"] = {info.bbox->x1, info.bbox->y1, info.bbox->x2, info.bbox->y2};
                }
                objects[serialize_tag(info.tag)] = jinfo;
            }
            jframe["key_object_infos"] = objects;
            nlohmann::ordered_json qa = nlohmann::ordered_json::object();
            for (Stage stage : kAllStages) qa[std::string(stage_name(stage))] = nlohmann::ordered_json::array();
            for (const QANode& node : frame.qa_list) {
                nlohmann::ordered_json jnode;
                jnode["Q"] = node.question;
                if (node.has_gt) jnode["A"] = node.gt_answer;
                jnode["node_id"] = node.node_id;
                jnode["answer_form"] = node.answer_form == AnswerForm::Closed ? "closed" : "open";
                nlohmann::ordered_json tags = nlohmann::ordered_json::array();
                for (const ObjectTag& tag : node.referenced_tags) tags.push_back(serialize_tag(tag));
                jnode["referenced_tags"] = tags;
                qa[std::string(stage_name(node.stage))].push_back(jnode);
            }
            jframe["QA"] = qa;
            jframes[frame.frame_id] = jframe;
        }
        doc[scene.scene_id]["key_frames"] = jframes;
    }
    return doc;
}

}  // namespace

TEST(ParseDataset, MinimalDocument) {
    auto scenes = parse_string(kMinimalDoc);
    ASSERT_EQ(scenes.size(), 1u);
    ASSERT_EQ(scenes[0].frames.size(), 1u);
    const KeyFrame& frame = scenes[0].frames[0];
    ASSERT_EQ(frame.qa_list.size(), 1u);
    EXPECT_EQ(frame.qa_list[0].node_id, "f1_0");
    EXPECT_EQ(frame.qa_list[0].stage, Stage::Perception);
    EXPECT_EQ(frame.qa_list[0].gt_answer, "No.");
    EXPECT_EQ(frame.qa_list[0].answer_form, AnswerForm::Closed);
}

TEST(ParseDataset, QuestionTagsBecomeReferencedTags) {
    auto scenes = parse_string(R"({
      "s1": {"key_frames": {"f1": {"QA": {"prediction": [
        {"Q": "Would <c1,CAM_FRONT,714.3,503.6> be in the moving direction of the ego vehicle?",
         "A": "No."}]}}}}
    })");
    const QANode& node = scenes[0].frames[0].qa_list[0];
    ASSERT_EQ(node.referenced_tags.size(), 1u);
    EXPECT_EQ(node.referenced_tags[0], (ObjectTag{"c1", Camera::Front, 714.3, 503.6}));
}

TEST(ParseDataset, MiniFixtureCountsMatchIndependentScan) {
    auto scenes = parse_dataset_file(testutil::fixture_path("mini_dataset.json"));
    ASSERT_EQ(scenes.size(), 2u);
    std::size_t frames = 0, nodes = 0;
    for (const Scene& scene : scenes) {
        frames += scene.frames.size();
        for (const KeyFrame& frame : scene.frames) nodes += frame.qa_list.size();
    }
    EXPECT_EQ(frames, 4u);

    // Independent oracle: a raw line-level scan of the fixture text.
    const std::string raw = testutil::read_file(testutil::fixture_path("mini_dataset.json"));
    std::size_t scanned_questions = 0;
    for (std::size_t pos = raw.find("\"Q\":"); pos != std::string::npos;
         pos = raw.find("\"Q\":", pos + 1)) {
        ++scanned_questions;
    }
    std::size_t scanned_frames = 0;
    for (std::size_t pos = raw.find("\"image_paths\""); pos != std::string::npos;
         pos = raw.find("\"image_paths\"", pos + 1)) {
        ++scanned_frames;
    }
    EXPECT_EQ(nodes, scanned_questions);
    EXPECT_EQ(frames, scanned_frames);
    EXPECT_GE(nodes, 20u);
}

TEST(ParseDataset, StagesConcatenatedInPipelineOrder) {
    auto scenes = parse_dataset_file(testutil::fixture_path("mini_dataset.json"));
    const KeyFrame& frame = scenes[0].frames[0];
    ASSERT_EQ(frame.qa_list.size(), 6u);
    EXPECT_EQ(frame.qa_list[0].stage, Stage::Perception);
    EXPECT_EQ(frame.qa_list[1].stage, Stage::Perception);
    EXPECT_EQ(frame.qa_list[2].stage, Stage::Prediction);
    EXPECT_EQ(frame.qa_list[3].stage, Stage::Prediction);
    EXPECT_EQ(frame.qa_list[4].stage, Stage::Planning);
    EXPECT_EQ(frame.qa_list[5].stage, Stage::Behavior);
    for (std::size_t i = 0; i < frame.qa_list.size(); ++i) {
        EXPECT_EQ(frame.qa_list[i].node_id, "f0101_" + std::to_string(i));
    }
}

TEST(ParseDataset, ReserializeIsStable) {
    auto scenes = parse_dataset_file(testutil::fixture_path("mini_dataset.json"));
    const std::string dumped = scenes_to_json(scenes).dump(2) + "\n";
    const std::string golden = testutil::golden_path("mini_dataset_roundtrip.json");
    if (testutil::regen_golden()) {
        testutil::write_file(golden, dumped);
        GTEST_SKIP() << "regenerated " << golden;
    }
    EXPECT_EQ(dumped, testutil::read_file(golden));
}

TEST(ParseDataset, MissingAnswerFlaggedAndRetained) {
    std::vector<Diagnostic> diags;
    auto scenes = parse_string(R"({
      "s1": {"key_frames": {"f1": {"QA": {"perception": [{"Q": "Anything?"}]}}}}
    })", &diags);
    const QANode& node = scenes[0].frames[0].qa_list[0];
    EXPECT_FALSE(node.has_gt);
    EXPECT_EQ(node.gt_answer, "");
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].code, "missing_gt_answer");
}

TEST(ParseDataset, UnknownCameraIsFatal) {
    EXPECT_THROW(parse_string(R"({
      "s1": {"key_frames": {"f1": {"image_paths": {"CAM_SIDE": "x.jpg"}}}}
    })"), ParseError);
}

TEST(ParseDataset, UnknownQaCategoryIsFatal) {
    EXPECT_THROW(parse_string(R"({
      "s1": {"key_frames": {"f1": {"QA": {"driving": []}}}}
    })"), ParseError);
}

TEST(ParseDataset, MalformedDocumentReportsByteOffset) {
    try {
        parse_string("{\"s1\": {");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_GT(e.byte_offset(), 0u);
    }
}

TEST(ParseDataset, BadKeyObjectKeyIsFatal) {
    EXPECT_THROW(parse_string(R"({
      "s1": {"key_frames": {"f1": {"key_object_infos": {"not a tag": {}}}}}
    })"), ParseError);
}

TEST(AnswerForm, ClosedVocabularyRule) {
    ParseOptions opts;
    EXPECT_EQ(answer_form_for("No.", opts), AnswerForm::Closed);
    EXPECT_EQ(answer_form_for("YES", opts), AnswerForm::Closed);
    EXPECT_EQ(answer_form_for("B", opts), AnswerForm::Closed);
    EXPECT_EQ(answer_form_for("Going ahead.", opts), AnswerForm::Open);
    opts.closed_vocabulary = {"left", "right"};
    EXPECT_EQ(answer_form_for("Left.", opts), AnswerForm::Closed);
    EXPECT_EQ(answer_form_for("No.", opts), AnswerForm::Open);
}

TEST(NormalizeAnswer, CollapsesCaseWhitespacePunctuation) {
    EXPECT_EQ(normalize_answer("  No.  "), "no");
    EXPECT_EQ(normalize_answer("Going\t ahead!"), "going ahead");
    EXPECT_EQ(normalize_answer("A"), "a");
    EXPECT_EQ(normalize_answer(""), "");
}

TEST(ValidateFrame, CleanFixtureFramesHaveNoDiagnostics) {
    auto scenes = parse_dataset_file(testutil::fixture_path("mini_dataset.json"));
    for (const Scene& scene : scenes) {
        for (const KeyFrame& frame : scene.frames) {
            EXPECT_TRUE(validate_frame(frame).empty()) << frame.frame_id;
        }
    }
}

TEST(ValidateFrame, DanglingReferenceReported) {
    KeyFrame frame = testutil::make_frame(
        "f1", {{Stage::Perception, "Is <c9,CAM_FRONT,100.0,100.0> parked?", "No."}});
    for (Camera cam : kAllCameras) frame.camera_images[cam] = "x.jpg";
    auto diags = validate_frame(frame);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].code, "dangling_tag");
}

TEST(ValidateFrame, OutOfBoundsKeyObjectReported) {
    KeyFrame frame;
    frame.frame_id = "f1";
    for (Camera cam : kAllCameras) frame.camera_images[cam] = "x.jpg";
    KeyObjectInfo info;
    info.tag = {"c1", Camera::Front, 1700.0, 10.0};
    info.bbox = Box{1650.0, 0.0, 1750.0, 60.0};
    frame.key_objects["c1"] = info;
    frame.qa_list.push_back({"f1_0", Stage::Perception, "Anything?", "No.", true, {}, AnswerForm::Closed});
    auto diags = validate_frame(frame);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].code, "tag_out_of_bounds");
}

TEST(ValidateFrame, MissingCamerasAndEmptyQaReported) {
    KeyFrame frame;
    frame.frame_id = "f1";
    auto diags = validate_frame(frame);
    std::size_t missing = 0, empty_qa = 0;
    for (const auto& d : diags) {
        if (d.code == "missing_camera") ++missing;
        if (d.code == "empty_qa_list") ++empty_qa;
    }
    EXPECT_EQ(missing, 6u);
    EXPECT_EQ(empty_qa, 1u);
}

TEST(ValidateFrame, CenterOutsideBboxReported) {
    KeyFrame frame;
    frame.frame_id = "f1";
    for (Camera cam : kAllCameras) frame.camera_images[cam] = "x.jpg";
    KeyObjectInfo info;
    info.tag = {"c1", Camera::Front, 100.0, 100.0};
    info.bbox = Box{200.0, 200.0, 300.0, 300.0};
    frame.key_objects["c1"] = info;
    frame.qa_list.push_back({"f1_0", Stage::Perception, "Anything?", "No.", true, {}, AnswerForm::Closed});
    auto diags = validate_frame(frame);
    ASSERT_EQ(diags.size(), 1u);
    EXPECT_EQ(diags[0].code, "center_outside_bbox");
}

namespace {
std::vector<Scene> synthetic_scenes(std::size_t count) {
    std::vector<Scene> scenes;
    for (std::size_t i = 0; i < count; ++i) {
        scenes.push_back({"scene_" + std::to_string(i), {}});
    }
    return scenes;
}
}  // namespace

TEST(SplitValidation, TwelveScenesSelectZeroAndSix) {
    auto split = split_validation(synthetic_scenes(12));
    ASSERT_EQ(split.val.size(), 2u);
    EXPECT_EQ(split.val[0].scene_id, "scene_0");
    EXPECT_EQ(split.val[1].scene_id, "scene_6");
    EXPECT_EQ(split.train.size(), 10u);
}

TEST(SplitValidation, SingleScene) {
    auto split = split_validation(synthetic_scenes(1));
    EXPECT_EQ(split.val.size(), 1u);
    EXPECT_TRUE(split.train.empty());
}

TEST(SplitValidation, OffsetIsConfigurable) {
    auto split = split_validation(synthetic_scenes(12), 1);
    ASSERT_EQ(split.val.size(), 2u);
    EXPECT_EQ(split.val[0].scene_id, "scene_1");
    EXPECT_EQ(split.val[1].scene_id, "scene_7");
}

TEST(SplitValidation, PartitionPreservesOrderAndContent) {
    for (std::size_t n : {0u, 1u, 5u, 6u, 7u, 13u, 24u}) {
        auto scenes = synthetic_scenes(n);
        auto split = split_validation(scenes);
        EXPECT_EQ(split.train.size() + split.val.size(), n);
        std::size_t ti = 0, vi = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (i % 6 == 0) {
                ASSERT_LT(vi, split.val.size());
                EXPECT_EQ(split.val[vi++].scene_id, scenes[i].scene_id);
            } else {
                ASSERT_LT(ti, split.train.size());
                EXPECT_EQ(split.train[ti++].scene_id, scenes[i].scene_id);
            }
        }
    }
}

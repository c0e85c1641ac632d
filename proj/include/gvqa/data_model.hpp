#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvqa/camera.hpp"
#include "gvqa/diagnostics.hpp"
#include "gvqa/tag.hpp"

namespace gvqa {

enum class Stage { Perception, Prediction, Planning, Behavior };

inline constexpr std::array<Stage, 4> kAllStages = {
    Stage::Perception, Stage::Prediction, Stage::Planning, Stage::Behavior};

inline std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::Perception: return "perception";
        case Stage::Prediction: return "prediction";
        case Stage::Planning:   return "planning";
        case Stage::Behavior:   return "behavior";
    }
    return "perception";
}

inline std::optional<Stage> parse_stage(std::string_view name) {
    for (Stage s : kAllStages) {
        if (stage_name(s) == name) return s;
    }
    return std::nullopt;
}

enum class AnswerForm { Closed, Open };

struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
    bool operator==(const Box&) const = default;
    bool ordered() const { return x1 <= x2 && y1 <= y2; }
    bool contains(double x, double y, double tol = 0.0) const {
        return x >= x1 - tol && x <= x2 + tol && y >= y1 - tol && y <= y2 + tol;
    }
};

struct KeyObjectInfo {
    ObjectTag tag;
    std::optional<Box> bbox;
    std::string category;
    std::string moving_state;
    std::string description;
};

struct QANode {
    std::string node_id;  // frame id + "_" + index within the frame
    Stage stage = Stage::Perception;
    std::string question;
    std::string gt_answer;
    bool has_gt = true;
    std::vector<ObjectTag> referenced_tags;  // parsed from question text
    AnswerForm answer_form = AnswerForm::Open;
};

struct KeyFrame {
    std::string frame_id;
    std::map<Camera, std::string> camera_images;       // camera -> opaque reference
    std::map<std::string, KeyObjectInfo> key_objects;  // c-identifier -> info
    std::vector<QANode> qa_list;                       // source order, stages concatenated
};

struct Scene {
    std::string scene_id;
    std::vector<KeyFrame> frames;
};

/// Answers whose normalized gt is in this set score on the accuracy
/// metric; everything else is free text.
inline const std::set<std::string>& default_closed_vocabulary() {
    static const std::set<std::string> vocab = {"yes", "no", "a", "b", "c", "d"};
    return vocab;
}

/// Lowercase, trim, collapse inner whitespace, drop terminal punctuation.
inline std::string normalize_answer(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char ch : text) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(u));
    }
    while (!out.empty()) {
        char back = out.back();
        if (back == '.' || back == '!' || back == '?' || back == ',' || back == ';' || back == ':') {
            out.pop_back();
        } else {
            break;
        }
    }
    return out;
}

struct ParseOptions {
    std::set<std::string> closed_vocabulary = default_closed_vocabulary();
};

inline AnswerForm answer_form_for(std::string_view gt_answer, const ParseOptions& opts) {
    return opts.closed_vocabulary.count(normalize_answer(gt_answer)) ? AnswerForm::Closed
                                                                     : AnswerForm::Open;
}

namespace detail {

using ojson = nlohmann::ordered_json;

inline std::string require_string(const ojson& j, const char* key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw ParseError(where + ": missing or non-string field '" + key + "'");
    }
    return it->get<std::string>();
}

inline KeyFrame parse_key_frame(const std::string& frame_id, const ojson& jframe,
                                const ParseOptions& opts, std::vector<Diagnostic>* diags) {
    KeyFrame frame;
    frame.frame_id = frame_id;

    if (auto images = jframe.find("image_paths"); images != jframe.end()) {
        if (!images->is_object()) throw ParseError("frame " + frame_id + ": image_paths must be an object");
        for (const auto& [cam_name, path] : images->items()) {
            auto cam = parse_camera(cam_name);
            if (!cam) throw ParseError("frame " + frame_id + ": unknown camera name '" + cam_name + "'");
            if (!path.is_string()) throw ParseError("frame " + frame_id + ": image path for " + cam_name + " must be a string");
            frame.camera_images[*cam] = path.get<std::string>();
        }
    }

    if (auto objects = jframe.find("key_object_infos"); objects != jframe.end()) {
        if (!objects->is_object()) throw ParseError("frame " + frame_id + ": key_object_infos must be an object");
        for (const auto& [tag_str, jinfo] : objects->items()) {
            auto tag = parse_single_tag(tag_str);
            if (!tag) throw ParseError("frame " + frame_id + ": key_object_infos key '" + tag_str + "' is not a tag");
            KeyObjectInfo info;
            info.tag = *tag;
            if (auto it = jinfo.find("Category"); it != jinfo.end() && it->is_string())
                info.category = it->get<std::string>();
            if (auto it = jinfo.find("Status"); it != jinfo.end() && it->is_string())
                info.moving_state = it->get<std::string>();
            if (auto it = jinfo.find("Visual_description"); it != jinfo.end() && it->is_string())
                info.description = it->get<std::string>();
            if (auto it = jinfo.find("2d_bbox"); it != jinfo.end()) {
                if (!it->is_array() || it->size() != 4) {
                    throw ParseError("frame " + frame_id + ": 2d_bbox of " + info.tag.id + " must be [x1,y1,x2,y2]");
                }
                info.bbox = Box{(*it)[0].get<double>(), (*it)[1].get<double>(),
                                (*it)[2].get<double>(), (*it)[3].get<double>()};
            } else {
                emit(diags, {Severity::Warning, "missing_bbox",
                             "key object " + info.tag.id + " has no 2d_bbox", frame_id, ""});
            }
            frame.key_objects[info.tag.id] = std::move(info);
        }
    }

    if (auto qa = jframe.find("QA"); qa != jframe.end()) {
        if (!qa->is_object()) throw ParseError("frame " + frame_id + ": QA must be an object");
        for (const auto& [stage_key, items] : qa->items()) {
            auto stage = parse_stage(stage_key);
            if (!stage) throw ParseError("frame " + frame_id + ": unknown QA category '" + stage_key + "'");
            if (!items.is_array()) throw ParseError("frame " + frame_id + ": QA." + stage_key + " must be an array");
        }
        // Stage arrays are concatenated in the fixed pipeline order, each
        // preserving its in-file order.
        for (Stage stage : kAllStages) {
            auto items = qa->find(std::string(stage_name(stage)));
            if (items == qa->end()) continue;
            for (const auto& jnode : *items) {
                if (!jnode.is_object()) throw ParseError("frame " + frame_id + ": QA entries must be objects");
                QANode node;
                node.node_id = frame_id + "_" + std::to_string(frame.qa_list.size());
                node.stage = stage;
                node.question = require_string(jnode, "Q", "frame " + frame_id + " QA entry");
                if (auto it = jnode.find("A"); it != jnode.end() && it->is_string()) {
                    node.gt_answer = it->get<std::string>();
                    node.has_gt = true;
                } else {
                    node.has_gt = false;
                    emit(diags, {Severity::Warning, "missing_gt_answer",
                                 "QA entry has no answer; node retained", frame_id, node.node_id});
                }
                node.referenced_tags = parse_object_tags(node.question, diags);
                node.answer_form = node.has_gt ? answer_form_for(node.gt_answer, opts) : AnswerForm::Open;
                frame.qa_list.push_back(std::move(node));
            }
        }
    }
    return frame;
}

}  // namespace detail

/// Parses a DriveLM-nuScenes-layout document. Scene, frame, and QA order
/// follow the file. Malformed documents throw ParseError with a byte
/// offset; annotation noise (dangling tags, missing answers) becomes
/// diagnostics instead.
inline std::vector<Scene> parse_dataset(std::istream& in, const ParseOptions& opts = {},
                                        std::vector<Diagnostic>* diags = nullptr) {
    detail::ojson doc;
    try {
        doc = detail::ojson::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("dataset parse error: ") + e.what(), e.byte);
    }
    if (!doc.is_object()) throw ParseError("dataset top level must map scene_id to scene");

    std::vector<Scene> scenes;
    for (const auto& [scene_id, jscene] : doc.items()) {
        if (!jscene.is_object()) throw ParseError("scene " + scene_id + " must be an object");
        Scene scene;
        scene.scene_id = scene_id;
        if (auto frames = jscene.find("key_frames"); frames != jscene.end()) {
            if (!frames->is_object()) throw ParseError("scene " + scene_id + ": key_frames must be an object");
            for (const auto& [frame_id, jframe] : frames->items()) {
                if (!jframe.is_object()) throw ParseError("frame " + frame_id + " must be an object");
                scene.frames.push_back(detail::parse_key_frame(frame_id, jframe, opts, diags));
            }
        }
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

inline std::vector<Scene> parse_dataset_file(const std::string& path, const ParseOptions& opts = {},
                                             std::vector<Diagnostic>* diags = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open dataset file: " + path);
    return parse_dataset(in, opts, diags);
}

/// Consistency checks over one parsed frame. Everything reported here is
/// annotation noise, not a reason to abort a run.
inline std::vector<Diagnostic> validate_frame(const KeyFrame& frame) {
    std::vector<Diagnostic> diags;
    for (Camera cam : kAllCameras) {
        if (!frame.camera_images.count(cam)) {
            diags.push_back({Severity::Warning, "missing_camera",
                             std::string("no image reference for ") + std::string(camera_name(cam)),
                             frame.frame_id, ""});
        }
    }
    if (frame.qa_list.empty()) {
        diags.push_back({Severity::Warning, "empty_qa_list", "frame has no QA pairs", frame.frame_id, ""});
    }
    for (const auto& [id, info] : frame.key_objects) {
        if (!info.tag.in_bounds()) {
            diags.push_back({Severity::Warning, "tag_out_of_bounds",
                             "key object " + serialize_tag(info.tag) + " center outside 1600x900",
                             frame.frame_id, ""});
        }
        if (info.bbox) {
            if (!info.bbox->ordered()) {
                diags.push_back({Severity::Warning, "bbox_unordered",
                                 "key object " + id + " bbox corners are not ordered",
                                 frame.frame_id, ""});
            } else if (!info.bbox->contains(info.tag.x, info.tag.y, 1.0)) {
                diags.push_back({Severity::Warning, "center_outside_bbox",
                                 "key object " + id + " tag center lies outside its bbox",
                                 frame.frame_id, ""});
            }
        }
    }
    for (const QANode& node : frame.qa_list) {
        for (const ObjectTag& tag : node.referenced_tags) {
            if (!tag.in_bounds()) {
                diags.push_back({Severity::Warning, "tag_out_of_bounds",
                                 "referenced tag " + serialize_tag(tag) + " outside 1600x900",
                                 frame.frame_id, node.node_id});
            }
            if (!frame.key_objects.count(tag.id)) {
                diags.push_back({Severity::Warning, "dangling_tag",
                                 "question references " + tag.id + " which is not in key_object_infos",
                                 frame.frame_id, node.node_id});
            }
        }
    }
    return diags;
}

struct DatasetSplit {
    std::vector<Scene> train;
    std::vector<Scene> val;
};

/// One scene out of every six goes to validation; by default the first
/// of each group. Order is preserved in both halves.
inline DatasetSplit split_validation(const std::vector<Scene>& scenes, std::size_t offset = 0) {
    DatasetSplit split;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        if (i % 6 == offset % 6) {
            split.val.push_back(scenes[i]);
        } else {
            split.train.push_back(scenes[i]);
        }
    }
    return split;
}

}  // namespace gvqa

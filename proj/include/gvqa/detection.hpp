#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvqa/camera.hpp"
#include "gvqa/data_model.hpp"
#include "gvqa/diagnostics.hpp"
#include "gvqa/tag.hpp"

namespace gvqa {

/// One external-detector output row, ingested from a sidecar file.
struct DetectionRecord {
    Camera camera = Camera::Front;
    std::string category;
    std::string color;
    double cx = 0.0;
    double cy = 0.0;
    std::optional<Box> bbox;
    std::optional<double> confidence;
};

using DetectionMap = std::map<std::string, std::vector<DetectionRecord>>;

/// Loads detector outputs grouped by frame, keeping source order within
/// each frame. Records whose center leaves the 1600x900 image are
/// dropped with a diagnostic.
inline DetectionMap load_detections(std::istream& in, std::vector<Diagnostic>* diags = nullptr) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("detection parse error: ") + e.what(), e.byte);
    }
    if (!doc.is_array()) throw ParseError("detection file must be a list of records");

    DetectionMap detections;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("frame_id") || !item.contains("camera") ||
            !item.contains("category") || !item.contains("color") || !item.contains("center")) {
            throw ParseError("detection records need frame_id, camera, category, color, center");
        }
        const std::string frame_id = item["frame_id"].get<std::string>();
        const std::string cam_name = item["camera"].get<std::string>();
        auto cam = parse_camera(cam_name);
        if (!cam) throw ParseError("detection record: unknown camera name '" + cam_name + "'");
        if (!item["center"].is_array() || item["center"].size() != 2) {
            throw ParseError("detection record: center must be [x, y]");
        }

        DetectionRecord rec;
        rec.camera = *cam;
        rec.category = item["category"].get<std::string>();
        rec.color = item["color"].get<std::string>();
        rec.cx = item["center"][0].get<double>();
        rec.cy = item["center"][1].get<double>();
        if (auto it = item.find("bbox"); it != item.end() && !it->is_null()) {
            if (!it->is_array() || it->size() != 4) throw ParseError("detection record: bbox must be [x1,y1,x2,y2]");
            rec.bbox = Box{(*it)[0].get<double>(), (*it)[1].get<double>(), (*it)[2].get<double>(),
                           (*it)[3].get<double>()};
        }
        if (auto it = item.find("confidence"); it != item.end() && !it->is_null()) {
            rec.confidence = it->get<double>();
            if (*rec.confidence < 0.0 || *rec.confidence > 1.0) {
                throw ParseError("detection record: confidence must be in [0,1]");
            }
        }
        if (rec.cx < 0.0 || rec.cx > kImageWidth || rec.cy < 0.0 || rec.cy > kImageHeight) {
            emit(diags, {Severity::Warning, "detection_out_of_bounds",
                         "detection center [" + format_coord(rec.cx) + "," + format_coord(rec.cy) +
                             "] outside 1600x900; record dropped",
                         frame_id, ""});
            continue;
        }
        detections[frame_id].push_back(std::move(rec));
    }
    return detections;
}

inline DetectionMap load_detections_file(const std::string& path,
                                         std::vector<Diagnostic>* diags = nullptr) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open detection file: " + path);
    return load_detections(in, diags);
}

/// One sentence per record, e.g. "There is a red car to the front of the
/// ego vehicle, and the box center is [714.3,503.6]."; `paper_typo`
/// reproduces the published "These is" opening.
inline std::string render_detection_context(const std::vector<DetectionRecord>& records,
                                            bool paper_typo = false) {
    std::string out;
    for (const DetectionRecord& rec : records) {
        if (!out.empty()) out += '\n';
        out += paper_typo ? "These is a " : "There is a ";
        out += rec.color;
        out += ' ';
        out += rec.category;
        out += " to the ";
        out += camera_phrase(rec.camera);
        out += " of the ego vehicle, and the box center is [";
        out += format_coord(rec.cx);
        out += ',';
        out += format_coord(rec.cy);
        out += "].";
    }
    return out;
}

enum class MatchPolicy { Greedy, Optimal };

struct MatchCounts {
    std::size_t matched = 0;
    std::size_t gt_total = 0;

    double fraction() const {
        return static_cast<double>(matched) / static_cast<double>(std::max<std::size_t>(gt_total, 1));
    }
};

namespace detail {

struct CandidatePair {
    double dist;
    std::size_t pred_idx;
    std::size_t gt_idx;
    std::string pred_key;  // input-order-independent tie-break
    std::string gt_key;
};

inline double center_distance(const ObjectTag& a, const ObjectTag& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

// Maximum-cardinality bipartite matching over within-radius pairs
// (augmenting paths; instances are small).
inline std::size_t optimal_match_count(const std::vector<std::vector<int>>& adj, std::size_t n_gt) {
    std::vector<int> gt_owner(n_gt, -1);
    std::size_t matched = 0;
    std::vector<char> visited;

    auto try_augment = [&](auto&& self, int pred) -> bool {
        for (int g : adj[static_cast<std::size_t>(pred)]) {
            if (visited[static_cast<std::size_t>(g)]) continue;
            visited[static_cast<std::size_t>(g)] = 1;
            if (gt_owner[static_cast<std::size_t>(g)] < 0 ||
                self(self, gt_owner[static_cast<std::size_t>(g)])) {
                gt_owner[static_cast<std::size_t>(g)] = pred;
                return true;
            }
        }
        return false;
    };

    for (std::size_t p = 0; p < adj.size(); ++p) {
        visited.assign(n_gt, 0);
        if (try_augment(try_augment, static_cast<int>(p))) ++matched;
    }
    return matched;
}

}  // namespace detail

/// One-to-one center matching between predicted and ground-truth tags of
/// the same camera. Greedy takes candidate pairs in ascending distance
/// (ties resolved by the tags themselves, so input order never matters);
/// Optimal maximizes the number of within-radius pairs.
inline MatchCounts match_counts(const std::vector<ObjectTag>& pred_tags,
                                const std::vector<ObjectTag>& gt_tags, double radius,
                                MatchPolicy policy = MatchPolicy::Greedy) {
    MatchCounts counts;
    counts.gt_total = gt_tags.size();

    std::vector<detail::CandidatePair> pairs;
    for (std::size_t p = 0; p < pred_tags.size(); ++p) {
        for (std::size_t g = 0; g < gt_tags.size(); ++g) {
            if (pred_tags[p].camera != gt_tags[g].camera) continue;
            double d = detail::center_distance(pred_tags[p], gt_tags[g]);
            if (d > radius) continue;
            pairs.push_back({d, p, g, serialize_tag(pred_tags[p]), serialize_tag(gt_tags[g])});
        }
    }

    if (policy == MatchPolicy::Optimal) {
        std::vector<std::vector<int>> adj(pred_tags.size());
        for (const auto& pr : pairs) adj[pr.pred_idx].push_back(static_cast<int>(pr.gt_idx));
        counts.matched = detail::optimal_match_count(adj, gt_tags.size());
        return counts;
    }

    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.pred_key != b.pred_key) return a.pred_key < b.pred_key;
        return a.gt_key < b.gt_key;
    });
    std::vector<char> pred_used(pred_tags.size(), 0), gt_used(gt_tags.size(), 0);
    for (const auto& pr : pairs) {
        if (pred_used[pr.pred_idx] || gt_used[pr.gt_idx]) continue;
        pred_used[pr.pred_idx] = 1;
        gt_used[pr.gt_idx] = 1;
        ++counts.matched;
    }
    return counts;
}

/// Fraction of ground-truth centers matched within `radius` pixels.
inline double match_predicted_centers(const std::vector<ObjectTag>& pred_tags,
                                      const std::vector<ObjectTag>& gt_tags, double radius,
                                      MatchPolicy policy = MatchPolicy::Greedy) {
    return match_counts(pred_tags, gt_tags, radius, policy).fraction();
}

}  // namespace gvqa

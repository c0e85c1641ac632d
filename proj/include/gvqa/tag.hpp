#pragma once

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "gvqa/camera.hpp"
#include "gvqa/diagnostics.hpp"

namespace gvqa {

/// Key-object reference of the form <c1,CAM_FRONT,714.3,503.6>.
struct ObjectTag {
    std::string id;  // "c" followed by a positive integer
    Camera camera = Camera::Front;
    double x = 0.0;  // box-center pixel, image width 1600
    double y = 0.0;  // box-center pixel, image height 900

    bool operator==(const ObjectTag&) const = default;

    bool in_bounds() const {
        return x >= 0.0 && x <= kImageWidth && y >= 0.0 && y <= kImageHeight;
    }
};

/// Renders a pixel coordinate with one decimal digit, the form every
/// tag in the dataset uses.
inline std::string format_coord(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, 1);
    return std::string(buf, res.ptr);
}

/// Canonical form <id,CAMERA,x,y>; parse_object_tags inverts it.
inline std::string serialize_tag(const ObjectTag& tag) {
    std::string out = "<";
    out += tag.id;
    out += ',';
    out += camera_name(tag.camera);
    out += ',';
    out += format_coord(tag.x);
    out += ',';
    out += format_coord(tag.y);
    out += '>';
    return out;
}

namespace detail {

inline void skip_spaces(std::string_view text, std::size_t& pos) {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
}

// "c" followed by a positive integer without leading zeros.
inline bool scan_tag_id(std::string_view text, std::size_t& pos, std::string& id) {
    std::size_t p = pos;
    if (p >= text.size() || text[p] != 'c') return false;
    ++p;
    std::size_t digits_begin = p;
    while (p < text.size() && text[p] >= '0' && text[p] <= '9') ++p;
    if (p == digits_begin) return false;
    if (text[digits_begin] == '0') return false;
    id.assign(text.substr(pos, p - pos));
    pos = p;
    return true;
}

inline bool scan_float(std::string_view text, std::size_t& pos, double& value) {
    std::size_t p = pos;
    if (p < text.size() && (text[p] == '+' || text[p] == '-')) ++p;
    std::size_t digits = p;
    while (p < text.size() && text[p] >= '0' && text[p] <= '9') ++p;
    if (p < text.size() && text[p] == '.') {
        ++p;
        while (p < text.size() && text[p] >= '0' && text[p] <= '9') ++p;
    }
    if (p == digits) return false;
    std::string token(text.substr(pos, p - pos));
    char* end = nullptr;
    value = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) return false;
    pos = p;
    return true;
}

// Matches the tag grammar starting at the '<' at `pos`. Whitespace is
// tolerated around commas. On success fills `tag` and advances `pos`
// past the closing '>'.
inline bool scan_tag(std::string_view text, std::size_t& pos, ObjectTag& tag) {
    std::size_t p = pos;
    if (text[p] != '<') return false;
    ++p;
    skip_spaces(text, p);
    if (!scan_tag_id(text, p, tag.id)) return false;
    skip_spaces(text, p);
    if (p >= text.size() || text[p] != ',') return false;
    ++p;
    skip_spaces(text, p);
    std::size_t cam_begin = p;
    while (p < text.size() && (std::isupper(static_cast<unsigned char>(text[p])) || text[p] == '_')) ++p;
    auto cam = parse_camera(text.substr(cam_begin, p - cam_begin));
    if (!cam) return false;
    tag.camera = *cam;
    skip_spaces(text, p);
    if (p >= text.size() || text[p] != ',') return false;
    ++p;
    skip_spaces(text, p);
    if (!scan_float(text, p, tag.x)) return false;
    skip_spaces(text, p);
    if (p >= text.size() || text[p] != ',') return false;
    ++p;
    skip_spaces(text, p);
    if (!scan_float(text, p, tag.y)) return false;
    skip_spaces(text, p);
    if (p >= text.size() || text[p] != '>') return false;
    ++p;
    pos = p;
    return true;
}

}  // namespace detail

/// Extracts every tag-grammar substring of `text` in source order.
/// Non-matching text is ignored. A syntactically valid tag whose
/// coordinates fall outside the 1600x900 image is rejected with a
/// diagnostic, never clamped.
inline std::vector<ObjectTag> parse_object_tags(std::string_view text,
                                                std::vector<Diagnostic>* diags = nullptr) {
    std::vector<ObjectTag> tags;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] != '<') {
            ++pos;
            continue;
        }
        ObjectTag tag;
        std::size_t next = pos;
        if (!detail::scan_tag(text, next, tag)) {
            ++pos;
            continue;
        }
        if (!tag.in_bounds()) {
            emit(diags, {Severity::Warning, "tag_out_of_bounds",
                         "tag " + serialize_tag(tag) + " has coordinates outside 1600x900",
                         "", ""});
        } else {
            tags.push_back(std::move(tag));
        }
        pos = next;
    }
    return tags;
}

/// Parses a string that must be exactly one tag (used for key-object
/// table keys). Bounds are not enforced here; validation reports them.
inline std::optional<ObjectTag> parse_single_tag(std::string_view text) {
    std::size_t pos = 0;
    detail::skip_spaces(text, pos);
    if (pos >= text.size() || text[pos] != '<') return std::nullopt;
    ObjectTag tag;
    if (!detail::scan_tag(text, pos, tag)) return std::nullopt;
    detail::skip_spaces(text, pos);
    if (pos != text.size()) return std::nullopt;
    return tag;
}

}  // namespace gvqa

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gvqa {

enum class Severity { Warning, Error };

/// A non-fatal finding attached to a frame, node, or input record.
struct Diagnostic {
    Severity severity = Severity::Warning;
    std::string code;      // stable machine-readable id, e.g. "dangling_tag"
    std::string message;
    std::string frame_id;  // empty when not frame-scoped
    std::string node_id;   // empty when not node-scoped

    std::string to_string() const {
        std::string out = severity == Severity::Error ? "error" : "warning";
        out += " [" + code + "]";
        if (!frame_id.empty()) out += " frame=" + frame_id;
        if (!node_id.empty()) out += " node=" + node_id;
        out += ": " + message;
        return out;
    }
};

inline void emit(std::vector<Diagnostic>* sink, Diagnostic d) {
    if (sink) sink->push_back(std::move(d));
}

/// Fatal input-document failure; byte_offset is 0 when unknown.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& what, std::size_t byte_offset = 0)
        : std::runtime_error(what), byte_offset_(byte_offset) {}
    std::size_t byte_offset() const { return byte_offset_; }

  private:
    std::size_t byte_offset_;
};

class GraphError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class BackendError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Backend answered, but not with a conforming message.
class ProtocolError : public BackendError {
  public:
    using BackendError::BackendError;
};

}  // namespace gvqa

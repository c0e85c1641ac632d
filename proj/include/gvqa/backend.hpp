#pragma once

#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvqa/camera.hpp"
#include "gvqa/data_model.hpp"
#include "gvqa/diagnostics.hpp"

namespace gvqa {

struct InferenceRequest {
    std::string frame_id;
    std::string node_id;
    std::string prompt;
    std::map<Camera, std::string> image_refs;  // all six cameras
    std::chrono::milliseconds timeout{30000};
    int attempt = 0;
};

struct InferenceResponse {
    std::string node_id;
    std::string answer;
    std::chrono::milliseconds latency{0};
    std::string backend_id;
};

/// Deterministic test oracles standing in for the model.
struct StubMode {
    enum class Kind { EchoGt, Fixed, Corrupt };
    Kind kind = Kind::EchoGt;
    std::string fixed_text;
    double corrupt_rate = 0.0;
    std::uint64_t seed = 0;

    static StubMode echo_gt() { return {Kind::EchoGt, "", 0.0, 0}; }
    static StubMode fixed(std::string text) { return {Kind::Fixed, std::move(text), 0.0, 0}; }
    static StubMode corrupt(double rate, std::uint64_t seed) {
        if (rate < 0.0 || rate > 1.0) throw std::invalid_argument("corruption rate must be in [0,1]");
        return {Kind::Corrupt, "", rate, seed};
    }

    std::string id() const {
        switch (kind) {
            case Kind::EchoGt:  return "stub:echo";
            case Kind::Fixed:   return "stub:fixed";
            case Kind::Corrupt:
                return "stub:corrupt:" + std::to_string(corrupt_rate) + ":" + std::to_string(seed);
        }
        return "stub";
    }
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 14695981039346656037ull) {
    for (char ch : bytes) {
        h ^= static_cast<unsigned char>(ch);
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64_u64(std::uint64_t value, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xff;
        h *= 1099511628211ull;
    }
    return h;
}

// Uniform draw in [0,1) keyed by (seed, frame, node, token index); the
// same key always lands on the same side of any threshold, so corruption
// sets nest as the rate grows.
inline double corruption_draw(std::uint64_t seed, std::string_view frame_id,
                              std::string_view node_id, std::uint64_t token_index) {
    std::uint64_t h = fnv1a64_u64(seed, 14695981039346656037ull);
    h = fnv1a64(frame_id, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(node_id, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64_u64(token_index, h);
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// Answer produced by a stub oracle for one node. Corruption replaces
/// whole whitespace tokens with "XX" and leaves the whitespace itself
/// untouched, so a zero rate reproduces the ground truth byte-exactly.
inline std::string stub_answer(const QANode& node, const StubMode& mode,
                               std::string_view frame_id = "") {
    switch (mode.kind) {
        case StubMode::Kind::Fixed:
            return mode.fixed_text;
        case StubMode::Kind::EchoGt:
        case StubMode::Kind::Corrupt:
            break;
    }
    if (!node.has_gt) {
        throw BackendError("stub needs a ground-truth answer for node " + node.node_id);
    }
    if (mode.kind == StubMode::Kind::EchoGt) return node.gt_answer;

    const std::string& gt = node.gt_answer;
    std::string out;
    out.reserve(gt.size());
    std::uint64_t token_index = 0;
    std::size_t i = 0;
    while (i < gt.size()) {
        if (std::isspace(static_cast<unsigned char>(gt[i]))) {
            out += gt[i];
            ++i;
            continue;
        }
        std::size_t begin = i;
        while (i < gt.size() && !std::isspace(static_cast<unsigned char>(gt[i]))) ++i;
        if (detail::corruption_draw(mode.seed, frame_id, node.node_id, token_index) < mode.corrupt_rate) {
            out += "XX";
        } else {
            out.append(gt, begin, i - begin);
        }
        ++token_index;
    }
    return out;
}

class InferenceBackend {
  public:
    virtual ~InferenceBackend() = default;
    virtual InferenceResponse query(const InferenceRequest& request) = 0;
    virtual std::string id() const = 0;
};

/// Serves stub answers from the dataset's ground truth.
class StubBackend : public InferenceBackend {
  public:
    StubBackend(StubMode mode, const std::vector<Scene>& scenes) : mode_(std::move(mode)) {
        for (const Scene& scene : scenes) {
            for (const KeyFrame& frame : scene.frames) {
                for (const QANode& node : frame.qa_list) nodes_[node.node_id] = &node;
            }
        }
    }

    InferenceResponse query(const InferenceRequest& request) override {
        auto it = nodes_.find(request.node_id);
        if (it == nodes_.end()) throw BackendError("stub has no node " + request.node_id);
        InferenceResponse resp;
        resp.node_id = request.node_id;
        resp.answer = stub_answer(*it->second, mode_, request.frame_id);
        resp.backend_id = mode_.id();
        return resp;
    }

    std::string id() const override { return mode_.id(); }

  private:
    StubMode mode_;
    std::unordered_map<std::string, const QANode*> nodes_;
};

class Semaphore {
  public:
    explicit Semaphore(std::size_t count) : count_(count) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return count_ > 0; });
        --count_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            ++count_;
        }
        cv_.notify_one();
    }

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::size_t count_;
};

struct TransportResult {
    bool ok = false;        // transport-level success (a response arrived)
    int status = 0;         // HTTP status when ok
    std::string body;
    std::string error;      // transport failure description
};

/// Sends one serialized request body, returns the raw outcome. The
/// default implementation POSTs to <base_url>/infer; tests swap in an
/// instrumented function.
using Transport = std::function<TransportResult(const std::string& body, std::chrono::milliseconds timeout)>;

struct HttpBackendConfig {
    std::string base_url;
    std::chrono::milliseconds timeout{30000};
    int max_retries = 2;                       // retries after the first attempt
    std::chrono::milliseconds backoff_base{200};
    std::size_t max_inflight = 4;
    std::string auth_header;                   // forwarded verbatim when nonempty
};

Transport make_http_transport(const HttpBackendConfig& config);

/// Wire-protocol client: one JSON request/response pair per node, with
/// bounded in-flight requests, retry on transient transport failures,
/// and exponential backoff.
class HttpBackend : public InferenceBackend {
  public:
    explicit HttpBackend(HttpBackendConfig config, Transport transport = {})
        : config_(std::move(config)),
          transport_(transport ? std::move(transport) : make_http_transport(config_)),
          inflight_(config_.max_inflight) {}

    static std::string serialize_request(const InferenceRequest& request) {
        nlohmann::ordered_json body;
        body["frame_id"] = request.frame_id;
        body["node_id"] = request.node_id;
        body["prompt"] = request.prompt;
        nlohmann::ordered_json images = nlohmann::ordered_json::object();
        for (const auto& [cam, ref] : request.image_refs) {
            images[std::string(camera_name(cam))] = ref;
        }
        body["images"] = std::move(images);
        return body.dump();
    }

    InferenceResponse query(const InferenceRequest& request) override {
        const std::string body = serialize_request(request);
        const auto start = std::chrono::steady_clock::now();
        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(config_.backoff_base * (1 << (attempt - 1)));
            }
            TransportResult result;
            {
                inflight_.acquire();
                struct Release {
                    Semaphore* s;
                    ~Release() { s->release(); }
                } release{&inflight_};
                result = transport_(body, config_.timeout);
            }
            if (!result.ok || result.status >= 500) {
                last_error = result.ok ? "server returned status " + std::to_string(result.status)
                                       : result.error;
                continue;  // transient; retry
            }
            if (result.status != 200) {
                throw ProtocolError("backend rejected request for " + request.node_id +
                                    " with status " + std::to_string(result.status));
            }
            return parse_response(request, result.body, start);
        }
        throw BackendError("backend unreachable for " + request.node_id + " after " +
                           std::to_string(config_.max_retries + 1) + " attempts: " + last_error);
    }

    std::string id() const override { return "http:" + config_.base_url; }

  private:
    InferenceResponse parse_response(const InferenceRequest& request, const std::string& body,
                                     std::chrono::steady_clock::time_point start) const {
        nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
        if (doc.is_discarded() || !doc.is_object() || !doc.contains("node_id") ||
            !doc.contains("answer") || !doc["answer"].is_string()) {
            throw ProtocolError("malformed backend response for " + request.node_id);
        }
        if (doc["node_id"].get<std::string>() != request.node_id) {
            throw ProtocolError("backend response node_id mismatch: expected " + request.node_id +
                                ", got " + doc["node_id"].get<std::string>());
        }
        InferenceResponse resp;
        resp.node_id = request.node_id;
        resp.answer = doc["answer"].get<std::string>();
        resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - start);
        resp.backend_id = id();
        return resp;
    }

    HttpBackendConfig config_;
    Transport transport_;
    Semaphore inflight_;
};

}  // namespace gvqa

// The default transport pulls in cpp-httplib; kept out of line so tests
// with fake transports do not need sockets.
#ifndef GVQA_NO_HTTP_TRANSPORT
#include "httplib.h"

namespace gvqa {

inline Transport make_http_transport(const HttpBackendConfig& config) {
    const std::string base_url = config.base_url;
    const std::string auth_header = config.auth_header;
    return [base_url, auth_header](const std::string& body, std::chrono::milliseconds timeout) {
        httplib::Client client(base_url);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers headers;
        if (!auth_header.empty()) {
            auto colon = auth_header.find(':');
            if (colon != std::string::npos) {
                std::string value = auth_header.substr(colon + 1);
                if (!value.empty() && value.front() == ' ') value.erase(0, 1);
                headers.emplace(auth_header.substr(0, colon), value);
            }
        }
        auto res = client.Post("/infer", headers, body, "application/json");
        TransportResult out;
        if (!res) {
            out.ok = false;
            out.error = httplib::to_string(res.error());
            return out;
        }
        out.ok = true;
        out.status = res->status;
        out.body = res->body;
        return out;
    };
}

}  // namespace gvqa
#else
namespace gvqa {
inline Transport make_http_transport(const HttpBackendConfig&) {
    throw BackendError("http transport disabled in this build");
}
}  // namespace gvqa
#endif

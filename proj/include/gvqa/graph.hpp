#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvqa/data_model.hpp"
#include "gvqa/diagnostics.hpp"

namespace gvqa {

enum class ContextStrategy { BaselineNone, Cot, CotN0, Got };

inline std::string_view strategy_name(ContextStrategy s) {
    switch (s) {
        case ContextStrategy::BaselineNone: return "none";
        case ContextStrategy::Cot:          return "cot";
        case ContextStrategy::CotN0:        return "cot_n0";
        case ContextStrategy::Got:          return "got";
    }
    return "none";
}

inline std::optional<ContextStrategy> parse_strategy(std::string_view name) {
    for (ContextStrategy s : {ContextStrategy::BaselineNone, ContextStrategy::Cot,
                              ContextStrategy::CotN0, ContextStrategy::Got}) {
        if (strategy_name(s) == name) return s;
    }
    return std::nullopt;
}

/// Frame-local dependency graph: nodes are the frame's QA pairs in
/// dataset order, every edge points from a context provider to a
/// consumer later in that order.
struct GvqaGraph {
    std::vector<std::string> node_ids;        // dataset order
    std::vector<std::pair<int, int>> edges;   // sorted, unique
    ContextStrategy strategy = ContextStrategy::BaselineNone;
    std::vector<std::vector<int>> preds;      // ascending per node
    std::vector<std::vector<int>> succs;      // ascending per node
    std::unordered_map<std::string, int> index_of;

    int index(const std::string& node_id) const {
        auto it = index_of.find(node_id);
        if (it == index_of.end()) throw GraphError("unknown node: " + node_id);
        return it->second;
    }
};

/// Edge list per frame, replacing the derived GoT edges when supplied.
using EdgeOverrides = std::map<std::string, std::vector<std::pair<int, int>>>;

inline EdgeOverrides load_edge_overrides(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("edge-override parse error: ") + e.what(), e.byte);
    }
    if (!doc.is_array()) throw ParseError("edge-override file must be a list of triples");
    EdgeOverrides overrides;
    for (const auto& item : doc) {
        if (!item.is_object() || !item.contains("frame_id") || !item.contains("source") ||
            !item.contains("target")) {
            throw ParseError("edge-override entries need frame_id, source, target");
        }
        overrides[item["frame_id"].get<std::string>()].emplace_back(item["source"].get<int>(),
                                                                    item["target"].get<int>());
    }
    return overrides;
}

inline EdgeOverrides load_edge_overrides_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open edge-override file: " + path);
    return load_edge_overrides(in);
}

namespace detail {

inline bool share_tag(const QANode& a, const QANode& b) {
    for (const ObjectTag& ta : a.referenced_tags) {
        for (const ObjectTag& tb : b.referenced_tags) {
            if (ta.id == tb.id) return true;
        }
    }
    return false;
}

inline void finalize_graph(GvqaGraph& graph, std::set<std::pair<int, int>>& edge_set) {
    graph.edges.assign(edge_set.begin(), edge_set.end());
    const int n = static_cast<int>(graph.node_ids.size());
    graph.preds.assign(n, {});
    graph.succs.assign(n, {});
    for (auto [u, v] : graph.edges) {
        graph.succs[u].push_back(v);
        graph.preds[v].push_back(u);
    }
    for (auto& p : graph.preds) std::sort(p.begin(), p.end());
    for (auto& s : graph.succs) std::sort(s.begin(), s.end());
    for (int i = 0; i < n; ++i) graph.index_of[graph.node_ids[i]] = i;
}

}  // namespace detail

/// Builds the dependency graph for one frame under the chosen context
/// strategy. GoT edges are derived object-centrically: the frame's
/// first node feeds every later node, and any pair of nodes that
/// mention a common c-identifier is linked in dataset order. A
/// hand-authored edge list can replace the derived GoT edges.
inline GvqaGraph build_graph(const KeyFrame& frame, ContextStrategy strategy,
                             const EdgeOverrides* overrides = nullptr) {
    if (frame.qa_list.empty()) {
        throw GraphError("frame " + frame.frame_id + " has an empty qa_list");
    }
    GvqaGraph graph;
    graph.strategy = strategy;
    for (const QANode& node : frame.qa_list) graph.node_ids.push_back(node.node_id);
    const int n = static_cast<int>(graph.node_ids.size());

    std::set<std::pair<int, int>> edge_set;
    switch (strategy) {
        case ContextStrategy::BaselineNone:
            break;
        case ContextStrategy::Cot:
            for (int i = 0; i + 1 < n; ++i) edge_set.emplace(i, i + 1);
            break;
        case ContextStrategy::CotN0:
            for (int i = 0; i + 1 < n; ++i) edge_set.emplace(i, i + 1);
            for (int j = 2; j < n; ++j) edge_set.emplace(0, j);
            break;
        case ContextStrategy::Got: {
            if (overrides) {
                auto it = overrides->find(frame.frame_id);
                if (it != overrides->end()) {
                    for (auto [u, v] : it->second) {
                        if (u < 0 || v < 0 || u >= n || v >= n || u >= v) {
                            throw GraphError("frame " + frame.frame_id + ": override edge (" +
                                             std::to_string(u) + "," + std::to_string(v) +
                                             ") is not a forward in-range pair");
                        }
                        edge_set.emplace(u, v);
                    }
                    break;
                }
            }
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    if (i == 0 || detail::share_tag(frame.qa_list[i], frame.qa_list[j])) {
                        edge_set.emplace(i, j);
                    }
                }
            }
            break;
        }
    }
    detail::finalize_graph(graph, edge_set);
    return graph;
}

namespace detail {

// Locates one concrete cycle for the error message.
inline std::string find_cycle_witness(const GvqaGraph& graph, const std::vector<bool>& remaining) {
    const int n = static_cast<int>(graph.node_ids.size());
    std::vector<int> state(n, 0);  // 0 unseen, 1 on stack, 2 done
    std::vector<int> parent(n, -1);
    for (int start = 0; start < n; ++start) {
        if (!remaining[start] || state[start] != 0) continue;
        std::vector<int> stack = {start};
        while (!stack.empty()) {
            int u = stack.back();
            if (state[u] == 0) {
                state[u] = 1;
                for (int v : graph.succs[u]) {
                    if (!remaining[v]) continue;
                    if (state[v] == 1) {
                        std::string path = graph.node_ids[v];
                        for (int w = u; w != -1 && w != v; w = parent[w]) {
                            path = graph.node_ids[w] + " -> " + path;
                        }
                        return graph.node_ids[v] + " -> " + path;
                    }
                    if (state[v] == 0) {
                        parent[v] = u;
                        stack.push_back(v);
                    }
                }
            } else {
                state[u] = 2;
                stack.pop_back();
            }
        }
    }
    return "(cycle nodes undetermined)";
}

}  // namespace detail

/// Topological order with dataset-order tie-breaking: among ready nodes
/// the lowest index runs first, so the result is stable across runs.
inline std::vector<std::string> execution_order(const GvqaGraph& graph) {
    const int n = static_cast<int>(graph.node_ids.size());
    std::vector<int> indegree(n, 0);
    for (auto [u, v] : graph.edges) {
        (void)u;
        ++indegree[v];
    }
    std::priority_queue<int, std::vector<int>, std::greater<int>> ready;
    for (int i = 0; i < n; ++i) {
        if (indegree[i] == 0) ready.push(i);
    }
    std::vector<std::string> order;
    order.reserve(n);
    std::vector<bool> remaining(n, true);
    while (!ready.empty()) {
        int u = ready.top();
        ready.pop();
        remaining[u] = false;
        order.push_back(graph.node_ids[u]);
        for (int v : graph.succs[u]) {
            if (--indegree[v] == 0) ready.push(v);
        }
    }
    if (static_cast<int>(order.size()) != n) {
        throw GraphError("dependency cycle: " + detail::find_cycle_witness(graph, remaining));
    }
    return order;
}

/// Direct predecessors of a node, in dataset order.
inline std::vector<std::string> predecessors(const GvqaGraph& graph, const std::string& node_id) {
    int idx = graph.index(node_id);
    std::vector<std::string> out;
    out.reserve(graph.preds[idx].size());
    for (int p : graph.preds[idx]) out.push_back(graph.node_ids[p]);
    return out;
}

}  // namespace gvqa

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gvqa/data_model.hpp"
#include "gvqa/declarative.hpp"
#include "gvqa/diagnostics.hpp"
#include "gvqa/graph.hpp"
#include "gvqa/tag.hpp"

namespace gvqa {

enum class ContextForm { RawQa, Declarative };

inline std::string_view context_form_name(ContextForm f) {
    return f == ContextForm::RawQa ? "raw" : "declarative";
}

inline std::optional<ContextForm> parse_context_form(std::string_view name) {
    if (name == "raw") return ContextForm::RawQa;
    if (name == "declarative") return ContextForm::Declarative;
    return std::nullopt;
}

struct PromptStyle {
    ContextForm context_form = ContextForm::RawQa;
    bool include_format_instruction = false;
    bool include_detections = false;
};

struct AssembledPrompt {
    std::string context_block;  // detection sentences + predecessor context
    std::string question;
    std::string full_text;
};

// Published camera-order preamble, reproduced byte-exactly including the
// "back right left" slip; pass fix_typo to emit "back right" instead.
inline constexpr std::string_view kFormatInstruction =
    "Input six images in turn. The first of six images is <CAM_FRONT>, which is in the front of "
    "the ego vehicle. The second of six images is <CAM_FRONT_LEFT>, which is in the front left of "
    "the ego vehicle. The third of six images is <CAM_FRONT_RIGHT>, which is in the front right "
    "of the ego vehicle. The fourth of six images is <CAM_BACK>, which is in the back of the ego "
    "vehicle. The fifth of six images is <CAM_BACK_LEFT>, which is in the back left of the ego "
    "vehicle. The sixth of six images is <CAM_BACK_RIGHT>, which is in the back right left of the "
    "ego vehicle. <number, number> is object box center coordinate in the image (1600*900).";

inline std::string format_instruction(bool fix_typo = false) {
    std::string text(kFormatInstruction);
    if (fix_typo) {
        const std::string slip = "back right left";
        if (auto pos = text.find(slip); pos != std::string::npos) {
            text.replace(pos, slip.size(), "back right");
        }
    }
    return text;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline bool strip_prefix(std::string& s, std::string_view prefix) {
    if (s.size() >= prefix.size() && std::string_view(s).substr(0, prefix.size()) == prefix) {
        s.erase(0, prefix.size());
        return true;
    }
    return false;
}

// Splits the object-list sentence "There is X, Y, ..., and Z" into one
// phrase per object, with the leading "There is"/"and" removed.
inline std::vector<std::string> split_description_clauses(std::string_view desc_text) {
    std::vector<std::string> clauses;
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= desc_text.size(); ++i) {
        if (i == desc_text.size() || desc_text[i] == ',') {
            std::string clause = trim(desc_text.substr(begin, i - begin));
            begin = i + 1;
            if (clause.empty()) continue;
            strip_prefix(clause, "and ");
            strip_prefix(clause, "There is ") || strip_prefix(clause, "There are ") ||
                strip_prefix(clause, "there is ") || strip_prefix(clause, "there are ") ||
                strip_prefix(clause, "These is ") || strip_prefix(clause, "These are ");
            clauses.push_back(std::move(clause));
        }
    }
    return clauses;
}

}  // namespace detail

/// Compresses the frame's first answer into one sentence per object the
/// current question mentions: "<tag> is <description phrase>.". The
/// first answer is expected to list descriptions and then tag ids in
/// matching order; when the counts disagree the tags are emitted alone.
inline std::string reformat_n0_answer(const std::string& n0_answer,
                                      const std::vector<ObjectTag>& mentioned_tags,
                                      std::vector<Diagnostic>* diags = nullptr) {
    const std::string marker = "The IDs of these objects are";
    const std::size_t marker_pos = n0_answer.find(marker);

    std::vector<ObjectTag> listed_tags;
    std::vector<std::string> clauses;
    if (marker_pos != std::string::npos) {
        listed_tags = parse_object_tags(std::string_view(n0_answer).substr(marker_pos), diags);
        std::string desc_text = detail::trim(std::string_view(n0_answer).substr(0, marker_pos));
        if (!desc_text.empty() && desc_text.back() == '.') desc_text.pop_back();
        clauses = detail::split_description_clauses(desc_text);
    } else {
        listed_tags = parse_object_tags(n0_answer, diags);
    }

    const bool paired = !listed_tags.empty() && clauses.size() == listed_tags.size();
    if (!paired && !listed_tags.empty()) {
        emit(diags, {Severity::Warning, "n0_pairing_mismatch",
                     "first answer lists " + std::to_string(listed_tags.size()) + " tags but " +
                         std::to_string(clauses.size()) + " description phrases",
                     "", ""});
    }

    std::string out;
    for (const ObjectTag& mentioned : mentioned_tags) {
        std::size_t k = listed_tags.size();
        for (std::size_t i = 0; i < listed_tags.size(); ++i) {
            if (listed_tags[i].id == mentioned.id) {
                k = i;
                break;
            }
        }
        if (k == listed_tags.size()) continue;  // not described by the first answer
        if (!out.empty()) out += '\n';
        if (paired) {
            out += serialize_tag(mentioned) + " is " + clauses[k] + ".";
        } else {
            out += serialize_tag(mentioned);
        }
    }
    return out;
}

/// Renders the context block for one node from its predecessors'
/// recorded answers, in predecessor order. Under the declarative form
/// the frame's first node is compressed via reformat_n0_answer and all
/// other predecessors are rewritten into statements; under the raw form
/// every predecessor is kept as "Q: ... A: ...". One block per line.
inline std::string assemble_context(const QANode& node, const GvqaGraph& graph,
                                    const KeyFrame& frame,
                                    const std::map<std::string, std::string>& answers,
                                    const PromptStyle& style,
                                    const RewriteRules& rules = default_rewrite_rules(),
                                    std::vector<Diagnostic>* diags = nullptr) {
    const int idx = graph.index(node.node_id);
    std::string out;
    for (int p : graph.preds[idx]) {
        const QANode& pred = frame.qa_list[static_cast<std::size_t>(p)];
        auto it = answers.find(pred.node_id);
        if (it == answers.end()) {
            throw std::logic_error("predecessor answer missing for " + pred.node_id +
                                   " while assembling " + node.node_id);
        }
        std::string block;
        if (style.context_form == ContextForm::Declarative && p == 0) {
            block = reformat_n0_answer(it->second, node.referenced_tags, diags);
            // Nothing mentioned: keep the first pair as ordinary context
            // rather than dropping the only predecessor.
            if (block.empty()) block = rewrite_declarative(pred.question, it->second, rules);
        } else if (style.context_form == ContextForm::Declarative) {
            block = rewrite_declarative(pred.question, it->second, rules);
        } else {
            block = "Q: " + pred.question + " A: " + it->second;
        }
        if (!block.empty()) {
            if (!out.empty()) out += '\n';
            out += block;
        }
    }
    return out;
}

/// Final prompt layout, fixed so generated prompts are reproducible:
/// format instruction, detection sentences, predecessor context, then
/// the question, with empty blocks skipped.
inline AssembledPrompt build_prompt(const std::string& context, const std::string& question,
                                    const PromptStyle& style, const std::string& detection_context,
                                    bool fix_instruction_typo = false) {
    AssembledPrompt prompt;
    prompt.question = question;

    std::string ctx_block;
    if (style.include_detections && !detection_context.empty()) ctx_block = detection_context;
    if (!context.empty()) {
        if (!ctx_block.empty()) ctx_block += '\n';
        ctx_block += context;
    }
    prompt.context_block = ctx_block;

    std::string full;
    if (style.include_format_instruction) full = format_instruction(fix_instruction_typo);
    if (!ctx_block.empty()) {
        if (!full.empty()) full += '\n';
        full += ctx_block;
    }
    if (!full.empty()) full += '\n';
    full += question;
    prompt.full_text = std::move(full);
    return prompt;
}

}  // namespace gvqa

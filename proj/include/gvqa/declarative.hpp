#pragma once

#include <cctype>
#include <fstream>
#include <istream>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "gvqa/data_model.hpp"
#include "gvqa/diagnostics.hpp"

namespace gvqa {

/// One question->statement rewrite pattern. `answer` selects which
/// normalized answers the rule applies to ("yes", "no", or "*").
/// `output` is a template over the pattern's capture groups: $N inserts
/// group N, $LN inserts group N lowercased, $$ is a literal dollar.
struct RewriteRule {
    std::string pattern;
    std::string answer;
    std::string output;
    std::regex re;

    RewriteRule(std::string pattern_, std::string answer_, std::string output_)
        : pattern(std::move(pattern_)),
          answer(std::move(answer_)),
          output(std::move(output_)),
          re(pattern) {}
};

using RewriteRules = std::vector<RewriteRule>;

/// Auxiliary-inversion table: subject + negated/affirmed auxiliary +
/// remainder, question mark dropped. Anything it cannot match falls
/// through to a lossless "Q: ... A: ..." rendering.
inline const RewriteRules& default_rewrite_rules() {
    static const RewriteRules rules = [] {
        const std::string aux =
            "(Would|Will|Is|Are|Was|Were|Does|Do|Did|Can|Could|Should|Shall|Must|May|Might)";
        const std::string subject = "(<[^>]+>|the ego vehicle|it|there)";
        const std::string pattern = "^" + aux + "\\s+" + subject + "\\s+(.+)\\?\\s*$";
        RewriteRules r;
        r.emplace_back(pattern, "no", "$2 $L1 not $3.");
        r.emplace_back(pattern, "yes", "$2 $L1 $3.");
        return r;
    }();
    return rules;
}

inline RewriteRules load_rewrite_rules(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("rewrite-rule parse error: ") + e.what(), e.byte);
    }
    if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array()) {
        throw ParseError("rewrite-rule file must be an object with a 'rules' array");
    }
    RewriteRules rules;
    for (const auto& item : doc["rules"]) {
        try {
            rules.emplace_back(item.at("pattern").get<std::string>(),
                               item.at("answer").get<std::string>(),
                               item.at("output").get<std::string>());
        } catch (const std::regex_error& e) {
            throw ParseError(std::string("invalid rewrite pattern: ") + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("rewrite-rule entries need pattern/answer/output: ") + e.what());
        }
    }
    return rules;
}

inline RewriteRules load_rewrite_rules_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open rewrite-rule file: " + path);
    return load_rewrite_rules(in);
}

namespace detail {

inline std::string to_lower_ascii(std::string s) {
    for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
}

inline std::string substitute_template(const std::string& tmpl, const std::smatch& m) {
    std::string out;
    out.reserve(tmpl.size() + 32);
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] != '$' || i + 1 >= tmpl.size()) {
            out += tmpl[i];
            continue;
        }
        char next = tmpl[i + 1];
        if (next == '$') {
            out += '$';
            ++i;
        } else if (next == 'L' && i + 2 < tmpl.size() && std::isdigit(static_cast<unsigned char>(tmpl[i + 2]))) {
            std::size_t group = static_cast<std::size_t>(tmpl[i + 2] - '0');
            if (group < m.size()) out += to_lower_ascii(m[group].str());
            i += 2;
        } else if (std::isdigit(static_cast<unsigned char>(next))) {
            std::size_t group = static_cast<std::size_t>(next - '0');
            if (group < m.size()) out += m[group].str();
            ++i;
        } else {
            out += tmpl[i];
        }
    }
    return out;
}

}  // namespace detail

/// Turns a QA pair into a declarative context sentence. The first rule
/// whose answer class and question pattern both match wins; otherwise
/// the pair is kept verbatim as "Q: <question> A: <answer>".
inline std::string rewrite_declarative(const std::string& question, const std::string& answer,
                                       const RewriteRules& rules = default_rewrite_rules()) {
    const std::string norm = normalize_answer(answer);
    for (const RewriteRule& rule : rules) {
        if (rule.answer != "*" && rule.answer != norm) continue;
        std::smatch m;
        if (std::regex_match(question, m, rule.re)) {
            return detail::substitute_template(rule.output, m);
        }
    }
    return "Q: " + question + " A: " + answer;
}

}  // namespace gvqa

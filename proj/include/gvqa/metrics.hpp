#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gvqa/data_model.hpp"
#include "gvqa/diagnostics.hpp"

namespace gvqa {

/// Lowercased whitespace tokenization; punctuation stays attached.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        unsigned char u = static_cast<unsigned char>(ch);
        if (std::isspace(u)) {
            if (!current.empty()) tokens.push_back(std::move(current));
            current.clear();
        } else {
            current += static_cast<char>(std::tolower(u));
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

namespace detail {

// n-gram key: tokens joined on a separator that cannot occur inside one.
inline std::string ngram_key(const std::vector<std::string>& tokens, std::size_t begin, std::size_t n) {
    std::string key;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) key += '\x1f';
        key += tokens[begin + i];
    }
    return key;
}

inline std::map<std::string, int> ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
    std::map<std::string, int> counts;
    if (tokens.size() >= n && n > 0) {
        for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
            ++counts[ngram_key(tokens, i, n)];
        }
    }
    return counts;
}

}  // namespace detail

/// Modified n-gram precision with reference-clipped counts, geometric
/// mean over orders 1..n, and the exp(1 - r/c) brevity penalty against
/// the closest reference length. Orders with zero matches get add-one
/// smoothing so the geometric mean stays finite.
inline double bleu_n(const std::vector<std::string>& candidate,
                     const std::vector<std::vector<std::string>>& references, int n) {
    if (n < 1) throw std::invalid_argument("bleu_n: order must be >= 1");
    if (candidate.empty() || references.empty()) return 0.0;

    const std::size_t c = candidate.size();
    std::size_t r = references.front().size();
    for (const auto& ref : references) {
        auto diff = [&](std::size_t len) {
            return len > c ? len - c : c - len;
        };
        if (diff(ref.size()) < diff(r) || (diff(ref.size()) == diff(r) && ref.size() < r)) {
            r = ref.size();
        }
    }

    std::vector<double> precisions;
    precisions.reserve(static_cast<std::size_t>(n));
    for (int k = 1; k <= n; ++k) {
        auto cand_counts = detail::ngram_counts(candidate, static_cast<std::size_t>(k));
        std::map<std::string, int> max_ref_counts;
        for (const auto& ref : references) {
            for (const auto& [gram, count] : detail::ngram_counts(ref, static_cast<std::size_t>(k))) {
                auto& best = max_ref_counts[gram];
                best = std::max(best, count);
            }
        }
        long long matched = 0, total = 0;
        for (const auto& [gram, count] : cand_counts) {
            total += count;
            auto it = max_ref_counts.find(gram);
            if (it != max_ref_counts.end()) matched += std::min(count, it->second);
        }
        double p = matched > 0 ? static_cast<double>(matched) / static_cast<double>(total)
                               : (static_cast<double>(matched) + 1.0) / (static_cast<double>(total) + 1.0);
        precisions.push_back(p);
    }

    double geo_mean;
    if (n == 1) {
        geo_mean = precisions[0];
    } else {
        double log_sum = 0.0;
        for (double p : precisions) log_sum += std::log(p);
        geo_mean = std::exp(log_sum / static_cast<double>(n));
    }
    const double brevity = c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
    return geo_mean * brevity;
}

/// LCS-based F-measure with recall weighted by beta = 1.2.
inline double rouge_l(const std::vector<std::string>& candidate,
                      const std::vector<std::string>& reference, double beta = 1.2) {
    if (candidate.empty() || reference.empty()) return 0.0;
    const std::size_t m = candidate.size(), n = reference.size();
    std::vector<std::size_t> prev(n + 1, 0), curr(n + 1, 0);
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            curr[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1
                                                           : std::max(prev[j], curr[j - 1]);
        }
        std::swap(prev, curr);
    }
    const std::size_t lcs = prev[n];
    if (lcs == 0) return 0.0;
    const double p = static_cast<double>(lcs) / static_cast<double>(m);
    const double r = static_cast<double>(lcs) / static_cast<double>(n);
    const double b2 = beta * beta;
    return (1.0 + b2) * p * r / (r + b2 * p);
}

struct CiderItem {
    std::vector<std::string> candidate;
    std::vector<std::vector<std::string>> references;
};

/// Corpus-level consensus score: TF-IDF n-gram vectors for n = 1..4,
/// cosine similarity against each reference with a Gaussian length
/// penalty (sigma = 6), scaled by 10 and averaged over orders, then over
/// items. IDF comes from the reference corpus, so a single-item corpus
/// scores 0 by convention.
inline double cider(const std::vector<CiderItem>& corpus, int max_n = 4, double sigma = 6.0) {
    if (corpus.empty()) throw std::invalid_argument("cider: corpus must be nonempty");

    using Counts = std::map<std::string, int>;
    const std::size_t n_orders = static_cast<std::size_t>(max_n);

    // Document frequency: number of items whose reference set contains the gram.
    std::vector<std::map<std::string, double>> df(n_orders);
    for (const CiderItem& item : corpus) {
        for (std::size_t k = 0; k < n_orders; ++k) {
            std::map<std::string, char> seen;
            for (const auto& ref : item.references) {
                for (const auto& [gram, count] : detail::ngram_counts(ref, k + 1)) {
                    (void)count;
                    seen[gram] = 1;
                }
            }
            for (const auto& [gram, one] : seen) {
                (void)one;
                df[k][gram] += 1.0;
            }
        }
    }
    const double log_corpus = std::log(static_cast<double>(corpus.size()));

    auto tfidf = [&](const Counts& counts, std::size_t k, double& norm_out) {
        std::map<std::string, double> vec;
        double norm_sq = 0.0;
        for (const auto& [gram, count] : counts) {
            double idf = log_corpus;
            if (auto it = df[k].find(gram); it != df[k].end()) {
                idf -= std::log(std::max(1.0, it->second));
            }
            double w = static_cast<double>(count) * idf;
            vec[gram] = w;
            norm_sq += w * w;
        }
        norm_out = std::sqrt(norm_sq);
        return vec;
    };

    double corpus_sum = 0.0;
    for (const CiderItem& item : corpus) {
        double item_sum = 0.0;
        for (std::size_t k = 0; k < n_orders; ++k) {
            double cand_norm = 0.0;
            auto cand_vec = tfidf(detail::ngram_counts(item.candidate, k + 1), k, cand_norm);
            double ref_avg = 0.0;
            for (const auto& ref : item.references) {
                double ref_norm = 0.0;
                auto ref_vec = tfidf(detail::ngram_counts(ref, k + 1), k, ref_norm);
                double cos = 0.0;
                if (cand_norm > 0.0 && ref_norm > 0.0) {
                    double dot = 0.0;
                    for (const auto& [gram, w] : cand_vec) {
                        if (auto it = ref_vec.find(gram); it != ref_vec.end()) dot += w * it->second;
                    }
                    cos = dot / (cand_norm * ref_norm);
                }
                const double delta =
                    static_cast<double>(item.candidate.size()) - static_cast<double>(ref.size());
                ref_avg += cos * std::exp(-(delta * delta) / (2.0 * sigma * sigma));
            }
            if (!item.references.empty()) ref_avg /= static_cast<double>(item.references.size());
            item_sum += 10.0 * ref_avg;
        }
        corpus_sum += item_sum / static_cast<double>(n_orders);
    }
    return corpus_sum / static_cast<double>(corpus.size());
}

/// One scored QA pair of a prediction set.
struct PredictionRecord {
    std::string frame_id;
    std::string node_id;
    std::string question;
    std::string answer;
    std::string gt_answer;
    Stage stage = Stage::Perception;
    AnswerForm answer_form = AnswerForm::Open;
};

/// Exact-match percentage over closed-form records after normalization.
inline double accuracy(const std::vector<PredictionRecord>& records) {
    std::size_t total = 0, correct = 0;
    for (const PredictionRecord& rec : records) {
        if (rec.answer_form != AnswerForm::Closed) continue;
        ++total;
        if (normalize_answer(rec.answer) == normalize_answer(rec.gt_answer)) ++correct;
    }
    return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

struct BehaviorScores {
    double overall = 0.0;
    double speed = 0.0;
    double steer = 0.0;
};

/// Behavior answers are "<speed-label>, <steer-label>"; a pair parses
/// only if it has exactly those two slots.
inline std::optional<std::pair<std::string, std::string>> parse_behavior_slots(std::string_view text) {
    auto comma = text.find(',');
    if (comma == std::string_view::npos) return std::nullopt;
    if (text.find(',', comma + 1) != std::string_view::npos) return std::nullopt;
    std::string speed = normalize_answer(text.substr(0, comma));
    std::string steer = normalize_answer(text.substr(comma + 1));
    if (speed.empty() || steer.empty()) return std::nullopt;
    return std::make_pair(std::move(speed), std::move(steer));
}

/// Slot-level classification accuracy over behavior-stage records;
/// overall counts a record only when both slots are right.
inline BehaviorScores behavior_accuracy(const std::vector<PredictionRecord>& records,
                                        std::vector<Diagnostic>* diags = nullptr) {
    std::size_t total = 0, speed_ok = 0, steer_ok = 0, both_ok = 0;
    for (const PredictionRecord& rec : records) {
        if (rec.stage != Stage::Behavior) continue;
        ++total;
        auto gt = parse_behavior_slots(rec.gt_answer);
        auto pred = parse_behavior_slots(rec.answer);
        if (!gt || !pred) {
            emit(diags, {Severity::Warning, "behavior_unparseable",
                         std::string(!gt ? "ground-truth" : "predicted") +
                             " behavior answer is not '<speed>, <steer>'",
                         rec.frame_id, rec.node_id});
            continue;  // counted wrong on all slots
        }
        const bool s_ok = gt->first == pred->first;
        const bool t_ok = gt->second == pred->second;
        if (s_ok) ++speed_ok;
        if (t_ok) ++steer_ok;
        if (s_ok && t_ok) ++both_ok;
    }
    BehaviorScores scores;
    if (total) {
        scores.overall = 100.0 * static_cast<double>(both_ok) / static_cast<double>(total);
        scores.speed = 100.0 * static_cast<double>(speed_ok) / static_cast<double>(total);
        scores.steer = 100.0 * static_cast<double>(steer_ok) / static_cast<double>(total);
    }
    return scores;
}

/// Puts every component on the 0-100 scale used by the final score.
inline double normalize_component(const std::string& key, double value) {
    if (key == "bleu1" || key == "bleu2" || key == "bleu3" || key == "bleu4" || key == "rouge_l") {
        return value * 100.0;
    }
    if (key == "cider") return std::min(10.0, value) * 10.0;
    return value;  // already a percentage
}

/// Weighted arithmetic mean of normalized components. Weights must be
/// nonnegative with positive sum, and may not name absent components.
inline double final_score(const std::map<std::string, double>& components,
                          const std::map<std::string, double>& weights) {
    double weight_sum = 0.0, value_sum = 0.0;
    for (const auto& [key, weight] : weights) {
        if (weight < 0.0) throw std::invalid_argument("final_score: negative weight for " + key);
        if (weight == 0.0) continue;
        auto it = components.find(key);
        if (it == components.end()) {
            throw std::invalid_argument("final_score: weight names missing component " + key);
        }
        weight_sum += weight;
        value_sum += weight * normalize_component(key, it->second);
    }
    if (weight_sum <= 0.0) throw std::invalid_argument("final_score: weights must sum to > 0");
    return value_sum / weight_sum;
}

}  // namespace gvqa

#include "factcheck/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace factcheck {

namespace {

std::size_t hits_in_top_k(const RetrievalJudgment& judgment, std::size_t k) {
    std::size_t hits = 0;
    const std::size_t depth = std::min(k, judgment.retrieved.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (judgment.gold_ids.count(judgment.retrieved[i]) > 0) ++hits;
    }
    return hits;
}

void require_gold(const RetrievalJudgment& judgment) {
    if (judgment.gold_ids.empty()) {
        throw NoGold("claim '" + judgment.claim_id + "' has no gold items for this modality");
    }
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                             std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)] += 1;
    }
    return counts;
}

Prf prf_from_counts(double matched, double candidate_total, double reference_total) {
    Prf out;
    out.precision = candidate_total > 0 ? matched / candidate_total : 0.0;
    out.recall = reference_total > 0 ? matched / reference_total : 0.0;
    out.f = (out.precision + out.recall) > 0
                ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
                : 0.0;
    return out;
}

}  // namespace

PrecisionRecall precision_recall_at_k(const RetrievalJudgment& judgment, std::size_t k) {
    require_gold(judgment);
    if (k == 0) throw NoGold("cutoff k must be at least 1");
    const double hits = static_cast<double>(hits_in_top_k(judgment, k));
    PrecisionRecall out;
    out.precision = hits / static_cast<double>(k);
    out.recall = hits / static_cast<double>(judgment.gold_ids.size());
    return out;
}

double ndcg_at_k(const RetrievalJudgment& judgment, std::size_t k) {
    require_gold(judgment);
    double dcg = 0.0;
    const std::size_t depth = std::min(k, judgment.retrieved.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (judgment.gold_ids.count(judgment.retrieved[i]) > 0) {
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
        }
    }
    double ideal = 0.0;
    const std::size_t ideal_depth = std::min(k, judgment.gold_ids.size());
    for (std::size_t i = 0; i < ideal_depth; ++i) {
        ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    }
    return ideal > 0 ? dcg / ideal : 0.0;
}

double average_precision_at_k(const RetrievalJudgment& judgment, std::size_t k) {
    require_gold(judgment);
    double sum = 0.0;
    std::size_t hits = 0;
    const std::size_t depth = std::min(k, judgment.retrieved.size());
    for (std::size_t i = 0; i < depth; ++i) {
        if (judgment.gold_ids.count(judgment.retrieved[i]) > 0) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
        }
    }
    const std::size_t denom = std::min(judgment.gold_ids.size(), k);
    return denom > 0 ? sum / static_cast<double>(denom) : 0.0;
}

double mean_average_precision(const std::vector<RetrievalJudgment>& judgments, std::size_t k,
                              std::size_t* excluded) {
    double sum = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
    for (const RetrievalJudgment& j : judgments) {
        if (j.gold_ids.empty()) {
            ++skipped;
            continue;
        }
        sum += average_precision_at_k(j, k);
        ++used;
    }
    if (excluded != nullptr) *excluded = skipped;
    return used > 0 ? sum / static_cast<double>(used) : 0.0;
}

double s_recall(const std::vector<RetrievalJudgment>& judgments, const EmbeddingLookup& embeddings) {
    double sum = 0.0;
    std::size_t gold_items = 0;
    for (const RetrievalJudgment& judgment : judgments) {
        for (const std::string& gold : judgment.gold_ids) {
            const auto g_it = embeddings.find(gold);
            if (g_it == embeddings.end()) {
                throw MissingEmbedding("no embedding for gold item '" + gold + "'");
            }
            double best = 0.0;
            for (const std::string& retrieved : judgment.retrieved) {
                const auto r_it = embeddings.find(retrieved);
                if (r_it == embeddings.end()) {
                    throw MissingEmbedding("no embedding for retrieved item '" + retrieved + "'");
                }
                best = std::max(best, cosine_similarity(g_it->second, r_it->second));
            }
            sum += best;
            ++gold_items;
        }
    }
    return gold_items > 0 ? sum / static_cast<double>(gold_items) : 0.0;
}

double micro_f1(const std::vector<TruthfulnessLabel>& predictions,
                const std::vector<TruthfulnessLabel>& golds) {
    if (predictions.size() != golds.size() || predictions.empty()) {
        throw LengthMismatch("predictions and golds must be non-empty and equal length");
    }
    std::size_t agree = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == golds[i]) ++agree;
    }
    return static_cast<double>(agree) / static_cast<double>(predictions.size());
}

std::vector<std::string> metric_tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char c : text) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Prf rouge_n(std::string_view candidate, std::string_view reference, std::size_t n) {
    const auto ref_tokens = metric_tokenize(reference);
    if (ref_tokens.empty()) throw EmptyReference("reference tokenizes to nothing");
    const auto cand_tokens = metric_tokenize(candidate);

    const auto cand_counts = ngram_counts(cand_tokens, n);
    const auto ref_counts = ngram_counts(ref_tokens, n);

    double matched = 0.0;
    for (const auto& [gram, count] : cand_counts) {
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matched += static_cast<double>(std::min(count, it->second));
    }
    const double cand_total = cand_tokens.size() >= n ? static_cast<double>(cand_tokens.size() - n + 1) : 0.0;
    const double ref_total = ref_tokens.size() >= n ? static_cast<double>(ref_tokens.size() - n + 1) : 0.0;
    return prf_from_counts(matched, cand_total, ref_total);
}

Prf rouge_l(std::string_view candidate, std::string_view reference) {
    const auto ref_tokens = metric_tokenize(reference);
    if (ref_tokens.empty()) throw EmptyReference("reference tokenizes to nothing");
    const auto cand_tokens = metric_tokenize(candidate);

    const std::size_t rows = cand_tokens.size();
    const std::size_t cols = ref_tokens.size();
    std::vector<std::size_t> prev(cols + 1, 0), curr(cols + 1, 0);
    for (std::size_t i = 1; i <= rows; ++i) {
        for (std::size_t j = 1; j <= cols; ++j) {
            if (cand_tokens[i - 1] == ref_tokens[j - 1]) {
                curr[j] = prev[j - 1] + 1;
            } else {
                curr[j] = std::max(prev[j], curr[j - 1]);
            }
        }
        std::swap(prev, curr);
        std::fill(curr.begin(), curr.end(), 0);
    }
    const double lcs = static_cast<double>(prev[cols]);
    return prf_from_counts(lcs, static_cast<double>(rows), static_cast<double>(cols));
}

namespace {

constexpr double kBleuEpsilon = 1e-9;

double bleu_from_stats(const std::vector<double>& matched, const std::vector<double>& totals,
                       double cand_len, double ref_len) {
    double log_sum = 0.0;
    std::size_t orders = 0;
    for (std::size_t i = 0; i < matched.size(); ++i) {
        if (totals[i] <= 0.0) continue;  // candidate shorter than this order
        const double p = matched[i] > 0.0 ? matched[i] / totals[i] : kBleuEpsilon / totals[i];
        log_sum += std::log(p);
        ++orders;
    }
    if (orders == 0) return 0.0;
    const double geo = std::exp(log_sum / static_cast<double>(orders));
    const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
    return bp * geo;
}

void accumulate_bleu(const std::vector<std::string>& cand_tokens,
                     const std::vector<std::string>& ref_tokens, std::size_t max_n,
                     std::vector<double>& matched, std::vector<double>& totals) {
    for (std::size_t n = 1; n <= max_n; ++n) {
        const auto cand_counts = ngram_counts(cand_tokens, n);
        const auto ref_counts = ngram_counts(ref_tokens, n);
        for (const auto& [gram, count] : cand_counts) {
            const auto it = ref_counts.find(gram);
            const std::size_t clip = it == ref_counts.end() ? 0 : std::min(count, it->second);
            matched[n - 1] += static_cast<double>(clip);
            totals[n - 1] += static_cast<double>(count);
        }
    }
}

}  // namespace

double sentence_bleu(std::string_view candidate, std::string_view reference, std::size_t max_n) {
    const auto cand_tokens = metric_tokenize(candidate);
    if (cand_tokens.empty()) throw EmptyCandidate("candidate tokenizes to nothing");
    const auto ref_tokens = metric_tokenize(reference);

    std::vector<double> matched(max_n, 0.0), totals(max_n, 0.0);
    accumulate_bleu(cand_tokens, ref_tokens, max_n, matched, totals);
    return bleu_from_stats(matched, totals, static_cast<double>(cand_tokens.size()),
                           static_cast<double>(ref_tokens.size()));
}

double corpus_bleu(const std::vector<GenerationPair>& pairs, std::size_t max_n) {
    std::vector<double> matched(max_n, 0.0), totals(max_n, 0.0);
    double cand_len = 0.0;
    double ref_len = 0.0;
    for (const GenerationPair& pair : pairs) {
        const auto cand_tokens = metric_tokenize(pair.candidate);
        if (cand_tokens.empty()) throw EmptyCandidate("candidate tokenizes to nothing");
        const auto ref_tokens = metric_tokenize(pair.reference);
        accumulate_bleu(cand_tokens, ref_tokens, max_n, matched, totals);
        cand_len += static_cast<double>(cand_tokens.size());
        ref_len += static_cast<double>(ref_tokens.size());
    }
    if (cand_len == 0.0) return 0.0;
    return bleu_from_stats(matched, totals, cand_len, ref_len);
}

double embedding_similarity(std::string_view candidate, std::string_view reference,
                            const EncoderBackend& backend) {
    const auto cand_tokens = metric_tokenize(candidate);
    const auto ref_tokens = metric_tokenize(reference);
    if (ref_tokens.empty()) throw EmptyReference("reference tokenizes to nothing");
    if (cand_tokens.empty()) throw EmptyCandidate("candidate tokenizes to nothing");

    std::vector<Vec> cand_vecs, ref_vecs;
    for (const auto& tok : cand_tokens) cand_vecs.push_back(backend.embed_text(tok));
    for (const auto& tok : ref_tokens) ref_vecs.push_back(backend.embed_text(tok));

    auto greedy = [](const std::vector<Vec>& from, const std::vector<Vec>& to) {
        double sum = 0.0;
        for (const Vec& f : from) {
            double best = 0.0;
            for (const Vec& t : to) best = std::max(best, cosine_similarity(f, t));
            sum += best;
        }
        return sum / static_cast<double>(from.size());
    };
    const double precision = greedy(cand_vecs, ref_vecs);
    const double recall = greedy(ref_vecs, cand_vecs);
    return (precision + recall) > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

RetrievalMetricsRow evaluate_retrieval(const std::vector<RetrievalJudgment>& judgments, std::size_t k,
                                       const EmbeddingLookup* embeddings) {
    RetrievalMetricsRow row;
    row.k = k;
    std::vector<RetrievalJudgment> with_gold;
    for (const RetrievalJudgment& j : judgments) {
        if (j.gold_ids.empty()) {
            ++row.excluded;
        } else {
            with_gold.push_back(j);
            // The row reports everything at cutoff k, similarity included.
            if (with_gold.back().retrieved.size() > k) with_gold.back().retrieved.resize(k);
        }
    }
    row.evaluated = with_gold.size();
    if (with_gold.empty()) return row;

    double p_sum = 0.0, r_sum = 0.0, n_sum = 0.0;
    for (const RetrievalJudgment& j : with_gold) {
        const PrecisionRecall pr = precision_recall_at_k(j, k);
        p_sum += pr.precision;
        r_sum += pr.recall;
        n_sum += ndcg_at_k(j, k);
    }
    const double count = static_cast<double>(with_gold.size());
    row.precision = p_sum / count;
    row.recall = r_sum / count;
    row.ndcg = n_sum / count;
    row.map = mean_average_precision(with_gold, k);
    if (embeddings != nullptr) row.s_recall = s_recall(with_gold, *embeddings);
    return row;
}

}  // namespace factcheck

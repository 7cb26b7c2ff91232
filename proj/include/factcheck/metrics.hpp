#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/encoders.hpp"
#include "factcheck/errors.hpp"
#include "factcheck/linalg.hpp"

namespace factcheck {

struct RetrievalJudgment {
    std::string claim_id;
    std::set<std::string> gold_ids;
    std::vector<std::string> retrieved;
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
};

// Lookup from item id to embedding, used by the similarity-based recall.
using EmbeddingLookup = std::unordered_map<std::string, Vec>;

PrecisionRecall precision_recall_at_k(const RetrievalJudgment& judgment, std::size_t k);
double ndcg_at_k(const RetrievalJudgment& judgment, std::size_t k);
double average_precision_at_k(const RetrievalJudgment& judgment, std::size_t k);

// Mean of average precision over judgments; judgments without gold are
// skipped and counted in `excluded` when given.
double mean_average_precision(const std::vector<RetrievalJudgment>& judgments, std::size_t k,
                              std::size_t* excluded = nullptr);

// For every gold item (pooled across judgments): the best cosine between its
// embedding and any retrieved item's, floored at zero; the metric is the mean
// over gold items. A judgment with nothing retrieved contributes zeros.
double s_recall(const std::vector<RetrievalJudgment>& judgments, const EmbeddingLookup& embeddings);

double micro_f1(const std::vector<TruthfulnessLabel>& predictions,
                const std::vector<TruthfulnessLabel>& golds);

// Shared tokenizer for the generation metrics: lowercase, split on every
// non-alphanumeric character.
std::vector<std::string> metric_tokenize(std::string_view text);

struct Prf {
    double precision = 0.0;
    double recall = 0.0;
    double f = 0.0;
};

Prf rouge_n(std::string_view candidate, std::string_view reference, std::size_t n);
Prf rouge_l(std::string_view candidate, std::string_view reference);

double sentence_bleu(std::string_view candidate, std::string_view reference, std::size_t max_n = 4);

struct GenerationPair {
    std::string candidate;
    std::string reference;
};

double corpus_bleu(const std::vector<GenerationPair>& pairs, std::size_t max_n = 4);

// Greedy token-matching F over per-token embeddings, floored at zero per
// match so the score stays in [0, 1].
double embedding_similarity(std::string_view candidate, std::string_view reference,
                            const EncoderBackend& backend);

// One Table-style row of retrieval metrics at cutoff k.
struct RetrievalMetricsRow {
    std::size_t k = 0;
    double precision = 0.0;
    double recall = 0.0;
    double ndcg = 0.0;
    double map = 0.0;
    std::optional<double> s_recall;
    std::size_t evaluated = 0;
    std::size_t excluded = 0;
};

RetrievalMetricsRow evaluate_retrieval(const std::vector<RetrievalJudgment>& judgments, std::size_t k,
                                       const EmbeddingLookup* embeddings = nullptr);

}  // namespace factcheck

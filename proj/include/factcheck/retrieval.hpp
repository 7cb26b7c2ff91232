#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "factcheck/corpus.hpp"
#include "factcheck/encoders.hpp"
#include "factcheck/errors.hpp"
#include "factcheck/linalg.hpp"

namespace factcheck {

struct SentenceEntry {
    std::string doc_id;
    std::size_t paragraph_index = 0;
    std::size_t sentence_index = 0;
    std::string text;
    Vec embedding;

    bool operator==(const SentenceEntry&) const = default;
};

// Stable identifier for a sentence entry, used in results and reports.
std::string sentence_item_id(const SentenceEntry& entry);

struct SentenceIndex {
    std::vector<SentenceEntry> entries;
    std::size_t dim = 0;
    BackendDescriptor backend;

    bool operator==(const SentenceIndex&) const = default;
};

struct ImageEntry {
    std::string image_id;
    Vec embedding;

    bool operator==(const ImageEntry&) const = default;
};

struct ImageIndex {
    std::vector<ImageEntry> entries;
    std::size_t dim = 0;
    BackendDescriptor backend;

    bool operator==(const ImageIndex&) const = default;
};

enum class Modality { Text, Image };

struct ScoredItem {
    std::string item_id;
    double score = 0.0;

    bool operator==(const ScoredItem&) const = default;
};

struct RetrievalResult {
    std::string claim_id;
    Modality modality = Modality::Text;
    std::vector<ScoredItem> ranked;
    std::size_t k = 0;
};

struct RetrievalConfig {
    std::size_t candidate_n = 1000;
    std::size_t k = 5;
    std::size_t batch_size = 8;
    double learning_rate = 0.01;
    std::size_t epochs = 2;
    std::uint64_t seed = 0;
};

// Candidate produced by the bi-encoder stage; index into SentenceIndex entries.
struct Candidate {
    std::size_t entry_index = 0;
    double score = 0.0;
};

// Trainable projection applied to both sides of the bi-encoder.
struct LinearHead {
    Mat w;

    static LinearHead identity(std::size_t d);
    Vec apply(const Vec& v) const;

    bool operator==(const LinearHead&) const = default;
};

SentenceIndex build_text_index(const std::vector<CorpusDocument>& documents,
                               const EncoderBackend& backend);

// Embeds every image's bytes, read from `root`-relative paths.
ImageIndex build_image_index(const std::vector<CorpusImage>& images,
                             const std::filesystem::path& root, const EncoderBackend& backend);

void save_text_index(const SentenceIndex& index, const std::filesystem::path& path);
SentenceIndex load_text_index(const std::filesystem::path& path);
void save_image_index(const ImageIndex& index, const std::filesystem::path& path);
ImageIndex load_image_index(const std::filesystem::path& path);

// Top-n sentences by cosine between the claim embedding and index entries.
// Ties break by (doc_id, paragraph_index, sentence_index) ascending. When a
// head is given it projects the claim and every entry before scoring.
std::vector<Candidate> retrieve_text_candidates(std::string_view claim_text,
                                                const SentenceIndex& index, std::size_t n,
                                                const EncoderBackend& backend,
                                                const LinearHead* head = nullptr);

// Rescores candidates with the backend's cross encoder and keeps the top k.
RetrievalResult rerank_text(std::string_view claim_id, std::string_view claim_text,
                            const SentenceIndex& index, const std::vector<Candidate>& candidates,
                            std::size_t k, const EncoderBackend& backend);

// Top-k images by cosine between the claim embedding and image embeddings.
// The optional head projects both sides, as in the text path.
RetrievalResult retrieve_images(std::string_view claim_id, std::string_view claim_text,
                                const ImageIndex& index, std::size_t k,
                                const EncoderBackend& backend,
                                const LinearHead* head = nullptr);

// Contrastive loss with in-batch negatives:
//   -log( exp(cos(c,p)) / sum_j exp(cos(c,t_j)) )
double info_nce_loss(const Vec& claim_emb, const Vec& positive_emb, const std::vector<Vec>& batch_embs);

struct TrainingPair {
    Vec claim;
    Vec positive;
};

struct RetrieverTrainResult {
    LinearHead head;
    std::vector<double> epoch_mean_loss;
};

// Minimizes the contrastive loss over cos(W c, W p) with in-batch negatives.
// Pairs whose positive duplicates one already in the batch are deferred to a
// later batch so negatives stay honest.
RetrieverTrainResult train_retriever(const std::vector<TrainingPair>& pairs,
                                     const RetrievalConfig& config);

// Convenience wrapper that embeds (claim, positive evidence) text pairs first.
RetrieverTrainResult train_retriever(const std::vector<std::pair<std::string, std::string>>& pairs,
                                     const RetrievalConfig& config, const EncoderBackend& backend);

}  // namespace factcheck

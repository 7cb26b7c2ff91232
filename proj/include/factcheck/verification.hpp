#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "factcheck/common.hpp"
#include "factcheck/corpus.hpp"
#include "factcheck/encoders.hpp"
#include "factcheck/errors.hpp"
#include "factcheck/linalg.hpp"
#include "factcheck/retrieval.hpp"

namespace factcheck {

// Trainable parameters of the stance head. The encoder stays frozen; these
// are the only tensors training updates.
struct StanceDetectorParams {
    Mat fuse_weight;  // 2d x d
    Vec fuse_bias;    // d
    Mat cls_weight;   // 2d x 3
    Vec cls_bias;     // 3
    double leaky_slope = 0.01;

    std::size_t dim() const { return fuse_bias.size(); }

    static StanceDetectorParams zeros(std::size_t d);
    static StanceDetectorParams random_init(std::size_t d, Rng& rng, double scale = 0.1);

    bool operator==(const StanceDetectorParams&) const = default;
};

struct StanceGradients {
    Mat fuse_weight;
    Vec fuse_bias;
    Mat cls_weight;
    Vec cls_bias;

    static StanceGradients zeros(std::size_t d);
    void scale(double factor);
};

struct VerificationOutput {
    Vec probs;  // 3, sums to 1
    TruthfulnessLabel predicted = TruthfulnessLabel::Supported;
    std::vector<std::string> text_evidence_used;
    std::vector<std::string> image_evidence_used;
};

// Attention from each claim token to the evidence units: output row i is
// Softmax(h_ci . H_E^T) . H_E. Single head, no scaling, no projections.
Mat cross_attend(const Mat& h_c, const Mat& h_e);

// Comparison features [attended (.) claim : attended - claim] pushed through
// one LeakyReLU layer, then column-wise max over the claim tokens.
Vec fuse_and_pool(const Mat& h_e2c, const Mat& h_c, const StanceDetectorParams& params);

// Arithmetic mean of stance vectors; an empty list aggregates to zeros.
Vec aggregate_stances(const std::vector<Vec>& stances, std::size_t d);

// Classifier over the concatenated per-modality aggregates.
VerificationOutput predict_label(const Vec& g_text, const Vec& g_image,
                                 const StanceDetectorParams& params);

struct TextEvidenceItem {
    std::string id;
    std::string text;
};

struct ImageEvidenceItem {
    std::string id;
    std::vector<std::uint8_t> bytes;
};

VerificationOutput verify_claim(std::string_view claim, const std::vector<TextEvidenceItem>& text_evidence,
                                const std::vector<ImageEvidenceItem>& image_evidence,
                                const StanceDetectorParams& params, const EncoderBackend& backend);

// Cross-entropy of the stance head on one encoded example. When `grads` is
// given, this example's parameter gradients are added into it.
double stance_loss_and_grad(const ClaimEvidenceEncoding& encoding, TruthfulnessLabel gold,
                            const StanceDetectorParams& params, StanceGradients* grads);

struct VerifyExample {
    std::string claim;
    std::vector<std::string> text_evidence;
    std::vector<std::vector<std::uint8_t>> image_evidence;
    TruthfulnessLabel label = TruthfulnessLabel::Nei;
};

struct VerifierConfig {
    std::size_t epochs = 10;
    std::size_t batch_size = 8;
    double learning_rate = 0.1;
    std::uint64_t seed = 0;
    double init_scale = 0.1;
};

struct VerifierTrainResult {
    StanceDetectorParams params;
    std::vector<double> epoch_mean_loss;
};

VerifierTrainResult train_verifier(const std::vector<VerifyExample>& examples,
                                   const VerifierConfig& config, const EncoderBackend& backend);

// Most frequent training label; ties resolve in declaration order.
TruthfulnessLabel majority_baseline(const std::vector<TruthfulnessLabel>& train_labels);

struct ThresholdConfig {
    double alpha1 = 0.75;
    double alpha2 = 0.4;
};

extern const std::vector<double> kAlpha1Grid;
extern const std::vector<double> kAlpha2Grid;

// Mean claim-to-evidence cosine bucketed by thresholds. No evidence at all
// falls back to NEI.
TruthfulnessLabel avg_similarity_label(double mean_similarity, const ThresholdConfig& thresholds);
TruthfulnessLabel avg_similarity_baseline(std::string_view claim,
                                          const std::vector<TextEvidenceItem>& text_evidence,
                                          const std::vector<ImageEvidenceItem>& image_evidence,
                                          const ThresholdConfig& thresholds,
                                          const EncoderBackend& backend);

// Picks the (alpha1, alpha2) pair maximizing micro-F1 on precomputed mean
// similarities, honoring alpha2 < alpha1. Ties keep the earlier grid entry.
ThresholdConfig threshold_grid_search(const std::vector<double>& mean_similarities,
                                      const std::vector<TruthfulnessLabel>& golds,
                                      const std::vector<double>& alpha1_grid = kAlpha1Grid,
                                      const std::vector<double>& alpha2_grid = kAlpha2Grid);

}  // namespace factcheck

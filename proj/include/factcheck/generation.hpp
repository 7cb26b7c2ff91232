#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "factcheck/common.hpp"
#include "factcheck/corpus.hpp"
#include "factcheck/errors.hpp"
#include "factcheck/linalg.hpp"

namespace factcheck {

enum class TruthfulnessSource { Gold, System };

std::string to_string(TruthfulnessSource source);

// Surface form of the separator between claim, label, and evidence segments.
inline constexpr std::string_view kGenerationSeparator = "⟨sep⟩";

struct GenerationInput {
    std::string sequence;
    TruthfulnessSource truthfulness_source = TruthfulnessSource::Gold;

    bool operator==(const GenerationInput&) const = default;
};

// Assembles "claim ⟨sep⟩ label ⟨sep⟩ e1 ⟨sep⟩ e2 ...". The label renders
// lowercase and evidence keeps its given order. A non-zero max_tokens caps
// the whitespace tokens: claim and label always survive, evidence items are
// kept in order, the item on the boundary is clipped, and the rest dropped.
// Separators do not count against the budget.
GenerationInput build_generation_input(std::string_view claim, TruthfulnessLabel label,
                                       const std::vector<std::string>& text_evidence,
                                       TruthfulnessSource source = TruthfulnessSource::Gold,
                                       std::size_t max_tokens = 0);

class Generator {
public:
    virtual ~Generator() = default;

    // Teacher-forced negative log-likelihood of the statement.
    virtual double nll(const GenerationInput& input, std::string_view gold_statement) const = 0;
    // Samples at most max_len tokens, joined by single spaces.
    virtual std::string generate(const GenerationInput& input, std::size_t max_len, Rng& rng) const = 0;
};

// Copies input tokens verbatim; its token distribution is a point mass on the
// input token at each position.
class EchoGenerator : public Generator {
public:
    double nll(const GenerationInput& input, std::string_view gold_statement) const override;
    std::string generate(const GenerationInput& input, std::size_t max_len, Rng& rng) const override;
};

// Position-independent categorical distribution over a fixed vocabulary with
// trainable logits. Sampling <eos> ends generation; tokens outside the
// vocabulary score as <unk>.
class CategoricalGenerator : public Generator {
public:
    static constexpr std::size_t kEosIndex = 0;
    static constexpr std::size_t kUnkIndex = 1;

    explicit CategoricalGenerator(const std::vector<std::string>& words);

    const std::vector<std::string>& vocabulary() const { return vocab_; }
    std::size_t token_index(std::string_view token) const;
    const Vec& logits() const { return logits_; }
    Vec& logits() { return logits_; }
    Vec token_probabilities() const { return softmax(logits_); }

    // Sampled vocabulary indices; a terminal <eos> is included when drawn.
    std::vector<std::size_t> sample_indices(std::size_t max_len, Rng& rng) const;
    std::string statement_from_indices(const std::vector<std::size_t>& indices) const;

    double nll(const GenerationInput& input, std::string_view gold_statement) const override;
    std::string generate(const GenerationInput& input, std::size_t max_len, Rng& rng) const override;

    bool operator==(const CategoricalGenerator& other) const {
        return vocab_ == other.vocab_ && logits_ == other.logits_;
    }

private:
    std::vector<std::string> vocab_;
    std::unordered_map<std::string, std::size_t> index_;
    Vec logits_;
};

// Validated wrappers used by the pipeline.
double nll_loss(const Generator& model, const GenerationInput& input, std::string_view gold_statement);
std::string generate_statement(const Generator& model, const GenerationInput& input,
                               std::size_t max_len, std::uint64_t seed);

// Three-way truthfulness distribution over a ruling statement, in
// TruthfulnessLabel declaration order. The statement is the only input.
class RewardClassifier {
public:
    virtual ~RewardClassifier() = default;
    virtual Vec classify(std::string_view statement) const = 0;
};

// Multinomial logistic regression on bag-of-token counts.
class BagOfTokensClassifier : public RewardClassifier {
public:
    BagOfTokensClassifier() : weight(0, 3), bias(3, 0.0) {}

    Vec classify(std::string_view statement) const override;

    std::unordered_map<std::string, std::size_t> vocabulary;  // token -> weight row
    Mat weight;  // |vocabulary| x 3
    Vec bias;    // 3
};

struct LabeledStatement {
    std::string statement;
    TruthfulnessLabel label = TruthfulnessLabel::Nei;
};

struct RewardClassifierConfig {
    std::size_t epochs = 30;
    double learning_rate = 0.5;
    double dev_fraction = 0.1;
    std::uint64_t seed = 0;
};

struct RewardClassifierTrainResult {
    BagOfTokensClassifier classifier;
    double dev_f1 = 0.0;
};

// Requires at least one example per label; the returned classifier is frozen
// (nothing downstream mutates it).
RewardClassifierTrainResult train_reward_classifier(const std::vector<LabeledStatement>& examples,
                                                    const RewardClassifierConfig& config);

// R = p(gold|statement) - sum of the other class probabilities = 2p - 1.
double truthfulness_reward(std::string_view statement, TruthfulnessLabel gold_label,
                           const RewardClassifier& classifier);

struct PolicyExample {
    GenerationInput input;
    TruthfulnessLabel gold_label = TruthfulnessLabel::Nei;
};

// One REINFORCE ascent step: sample a statement per example, weight its token
// log-likelihood gradient by the truthfulness reward, and apply the mean.
// Returns the mean reward. A batch whose rewards are all zero leaves the
// model bit-identical.
double policy_gradient_step(CategoricalGenerator& model, const std::vector<PolicyExample>& batch,
                            const RewardClassifier& classifier, double learning_rate,
                            std::size_t max_len, Rng& rng);

struct GeneratorTrainExample {
    GenerationInput input;
    std::string gold_statement;
    TruthfulnessLabel gold_label = TruthfulnessLabel::Nei;
};

struct GeneratorTrainConfig {
    std::size_t nll_epochs = 10;
    std::size_t rl_epochs = 2;
    std::size_t batch_size = 8;
    double nll_learning_rate = 0.5;
    double rl_learning_rate = 0.1;
    std::size_t max_output_length = 32;
    std::uint64_t seed = 0;
};

struct GeneratorTrainResult {
    CategoricalGenerator model;
    std::vector<double> nll_epoch_mean_loss;
    std::vector<double> rl_epoch_mean_reward;
};

// Likelihood pretraining over the gold statements, then reward fine-tuning.
// The classifier may be null only when rl_epochs is zero.
GeneratorTrainResult train_generator(const std::vector<GeneratorTrainExample>& examples,
                                     const GeneratorTrainConfig& config,
                                     const RewardClassifier* classifier);

// First min(3, n) sentences joined by single spaces.
std::string lead3(const std::vector<std::string>& evidence_sentences);

struct OracleSelection {
    std::vector<std::size_t> indices;  // in selection order
    std::string statement;             // selected sentences joined in that order
    double rouge2_f = 0.0;
};

// Greedily adds the sentence with the largest ROUGE-2 F gain against the
// reference; stops when no sentence improves the score or the cap is hit.
// Ties go to the smallest index. Bigrams are counted within sentences, never
// across joins, as extractive oracles conventionally score summaries.
OracleSelection oracle_extract(const std::vector<std::string>& sentences,
                               std::string_view reference, std::size_t max_sentences = 10);

}  // namespace factcheck

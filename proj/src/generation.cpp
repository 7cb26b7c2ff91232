#include "factcheck/generation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "factcheck/metrics.hpp"

namespace factcheck {

std::string to_string(TruthfulnessSource source) {
    return source == TruthfulnessSource::Gold ? "gold" : "system";
}

GenerationInput build_generation_input(std::string_view claim, TruthfulnessLabel label,
                                       const std::vector<std::string>& text_evidence,
                                       TruthfulnessSource source, std::size_t max_tokens) {
    const auto claim_tokens = split_whitespace(claim);
    if (claim_tokens.empty()) throw std::invalid_argument("claim must be non-empty");

    GenerationInput input;
    input.truthfulness_source = source;
    input.sequence = join(claim_tokens, " ");
    input.sequence += ' ';
    input.sequence += kGenerationSeparator;
    input.sequence += ' ';
    input.sequence += to_string(label);

    std::size_t remaining = std::numeric_limits<std::size_t>::max();
    if (max_tokens > 0) {
        const std::size_t used = claim_tokens.size() + 1;
        remaining = max_tokens > used ? max_tokens - used : 0;
    }
    for (const std::string& item : text_evidence) {
        if (remaining == 0) break;
        auto tokens = split_whitespace(item);
        if (tokens.empty()) continue;
        if (tokens.size() > remaining) tokens.resize(remaining);
        remaining -= tokens.size();
        input.sequence += ' ';
        input.sequence += kGenerationSeparator;
        input.sequence += ' ';
        input.sequence += join(tokens, " ");
    }
    return input;
}

double EchoGenerator::nll(const GenerationInput& input, std::string_view gold_statement) const {
    const auto gold = split_whitespace(gold_statement);
    const auto source = split_whitespace(input.sequence);
    // Point mass on the input token at each position: probability one along
    // the echo, zero anywhere else.
    if (gold.size() > source.size()) return std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] != source[i]) return std::numeric_limits<double>::infinity();
    }
    return 0.0;
}

std::string EchoGenerator::generate(const GenerationInput& input, std::size_t max_len, Rng&) const {
    auto tokens = split_whitespace(input.sequence);
    if (tokens.size() > max_len) tokens.resize(max_len);
    return join(tokens, " ");
}

CategoricalGenerator::CategoricalGenerator(const std::vector<std::string>& words) {
    vocab_ = {"<eos>", "<unk>"};
    index_ = {{"<eos>", kEosIndex}, {"<unk>", kUnkIndex}};
    for (const std::string& word : words) {
        if (index_.count(word) > 0) continue;
        index_.emplace(word, vocab_.size());
        vocab_.push_back(word);
    }
    logits_.assign(vocab_.size(), 0.0);
}

std::size_t CategoricalGenerator::token_index(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkIndex : it->second;
}

std::vector<std::size_t> CategoricalGenerator::sample_indices(std::size_t max_len, Rng& rng) const {
    const Vec probs = softmax(logits_);
    std::vector<std::size_t> indices;
    std::size_t emitted = 0;
    while (emitted < max_len) {
        const double r = rng.next_double();
        double cumulative = 0.0;
        std::size_t drawn = probs.size() - 1;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            cumulative += probs[i];
            if (r < cumulative) {
                drawn = i;
                break;
            }
        }
        indices.push_back(drawn);
        if (drawn == kEosIndex) break;
        ++emitted;
    }
    return indices;
}

std::string CategoricalGenerator::statement_from_indices(const std::vector<std::size_t>& indices) const {
    std::string out;
    for (std::size_t idx : indices) {
        if (idx == kEosIndex) continue;
        if (!out.empty()) out += ' ';
        out += vocab_[idx];
    }
    return out;
}

double CategoricalGenerator::nll(const GenerationInput&, std::string_view gold_statement) const {
    const double lse = logsumexp(logits_);
    double loss = 0.0;
    for (const std::string& token : split_whitespace(gold_statement)) {
        loss += lse - logits_[token_index(token)];
    }
    return loss;
}

std::string CategoricalGenerator::generate(const GenerationInput&, std::size_t max_len, Rng& rng) const {
    return statement_from_indices(sample_indices(max_len, rng));
}

double nll_loss(const Generator& model, const GenerationInput& input, std::string_view gold_statement) {
    if (split_whitespace(gold_statement).empty()) {
        throw EmptyReference("gold statement has no tokens");
    }
    const double loss = model.nll(input, gold_statement);
    if (!std::isfinite(loss)) throw NonFiniteLoss("statement likelihood is not finite");
    return loss;
}

std::string generate_statement(const Generator& model, const GenerationInput& input,
                               std::size_t max_len, std::uint64_t seed) {
    if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");
    Rng rng(seed);
    return model.generate(input, max_len, rng);
}

Vec BagOfTokensClassifier::classify(std::string_view statement) const {
    Vec logits = bias;
    for (const std::string& token : metric_tokenize(statement)) {
        const auto it = vocabulary.find(token);
        if (it == vocabulary.end()) continue;
        for (std::size_t k = 0; k < 3; ++k) logits[k] += weight.at(it->second, k);
    }
    return softmax(logits);
}

namespace {

std::unordered_map<std::string, double> token_counts(std::string_view statement) {
    std::unordered_map<std::string, double> counts;
    for (const std::string& token : metric_tokenize(statement)) counts[token] += 1.0;
    return counts;
}

}  // namespace

RewardClassifierTrainResult train_reward_classifier(const std::vector<LabeledStatement>& examples,
                                                    const RewardClassifierConfig& config) {
    std::array<std::size_t, 3> class_counts{};
    for (const LabeledStatement& ex : examples) ++class_counts[label_index(ex.label)];
    for (std::size_t i = 0; i < class_counts.size(); ++i) {
        if (class_counts[i] == 0) {
            throw MissingClass("no training statements labeled " + to_string(kAllLabels[i]));
        }
    }

    Rng rng(config.seed);
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::size_t dev_count = static_cast<std::size_t>(config.dev_fraction * static_cast<double>(examples.size()));
    if (dev_count >= examples.size()) dev_count = examples.size() - 1;
    const std::vector<std::size_t> dev(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(dev_count));
    const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(dev_count), order.end());

    RewardClassifierTrainResult result;
    std::set<std::string> token_set;
    for (std::size_t i : train) {
        for (const std::string& token : metric_tokenize(examples[i].statement)) token_set.insert(token);
    }
    for (const std::string& token : token_set) {
        result.classifier.vocabulary.emplace(token, result.classifier.vocabulary.size());
    }
    result.classifier.weight = Mat(result.classifier.vocabulary.size(), 3);

    std::vector<std::size_t> epoch_order = train;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(epoch_order);
        for (std::size_t i : epoch_order) {
            const auto counts = token_counts(examples[i].statement);
            const Vec probs = result.classifier.classify(examples[i].statement);
            const std::size_t gold = label_index(examples[i].label);
            for (std::size_t k = 0; k < 3; ++k) {
                const double delta = probs[k] - (k == gold ? 1.0 : 0.0);
                result.classifier.bias[k] -= config.learning_rate * delta;
                for (const auto& [token, count] : counts) {
                    const auto it = result.classifier.vocabulary.find(token);
                    if (it == result.classifier.vocabulary.end()) continue;
                    result.classifier.weight.at(it->second, k) -= config.learning_rate * count * delta;
                }
            }
        }
    }

    const std::vector<std::size_t>& scored = dev.empty() ? train : dev;
    std::vector<TruthfulnessLabel> predicted, gold;
    for (std::size_t i : scored) {
        const Vec probs = result.classifier.classify(examples[i].statement);
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k) {
            if (probs[k] > probs[best]) best = k;
        }
        predicted.push_back(kAllLabels[best]);
        gold.push_back(examples[i].label);
    }
    result.dev_f1 = micro_f1(predicted, gold);
    return result;
}

double truthfulness_reward(std::string_view statement, TruthfulnessLabel gold_label,
                           const RewardClassifier& classifier) {
    const Vec probs = classifier.classify(statement);
    return 2.0 * probs[label_index(gold_label)] - 1.0;
}

double policy_gradient_step(CategoricalGenerator& model, const std::vector<PolicyExample>& batch,
                            const RewardClassifier& classifier, double learning_rate,
                            std::size_t max_len, Rng& rng) {
    if (batch.empty()) throw EmptyBatch("policy gradient needs a non-empty batch");
    if (max_len == 0) throw std::invalid_argument("max_len must be at least 1");

    const Vec probs = model.token_probabilities();
    Vec grad(model.logits().size(), 0.0);
    double reward_sum = 0.0;
    bool any_update = false;

    for (const PolicyExample& example : batch) {
        const auto indices = model.sample_indices(max_len, rng);
        const std::string statement = model.statement_from_indices(indices);
        const double reward = truthfulness_reward(statement, example.gold_label, classifier);
        if (!std::isfinite(reward)) throw NonFiniteLoss("reward is not finite");
        reward_sum += reward;
        if (reward == 0.0) continue;
        any_update = true;
        // d/dtheta sum_i log p(s_i) = counts - |S| * softmax(theta)
        const double drawn = static_cast<double>(indices.size());
        for (std::size_t idx : indices) grad[idx] += reward;
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= reward * drawn * probs[k];
    }

    if (any_update) {
        const double scale = learning_rate / static_cast<double>(batch.size());
        Vec& logits = model.logits();
        for (std::size_t k = 0; k < logits.size(); ++k) {
            logits[k] += scale * grad[k];
            if (!std::isfinite(logits[k])) {
                throw NonFiniteLoss("policy update produced a non-finite logit");
            }
        }
    }
    return reward_sum / static_cast<double>(batch.size());
}

GeneratorTrainResult train_generator(const std::vector<GeneratorTrainExample>& examples,
                                     const GeneratorTrainConfig& config,
                                     const RewardClassifier* classifier) {
    if (examples.empty()) throw EmptyBatch("no generator training examples");
    if (classifier == nullptr && config.rl_epochs > 0) {
        throw MissingClass("reward fine-tuning needs a classifier");
    }

    std::set<std::string> token_set;
    for (const GeneratorTrainExample& ex : examples) {
        for (const std::string& token : split_whitespace(ex.gold_statement)) token_set.insert(token);
    }
    GeneratorTrainResult result{CategoricalGenerator(
                                    std::vector<std::string>(token_set.begin(), token_set.end())),
                                {}, {}};

    Rng rng(config.seed);
    const std::size_t batch_size = std::max<std::size_t>(config.batch_size, 1);
    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.nll_epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            Vec grad(result.model.logits().size(), 0.0);
            const Vec probs = result.model.token_probabilities();
            double batch_tokens = 0.0;
            for (std::size_t b = start; b < end; ++b) {
                const GeneratorTrainExample& ex = examples[order[b]];
                loss_sum += nll_loss(result.model, ex.input, ex.gold_statement);
                for (const std::string& token : split_whitespace(ex.gold_statement)) {
                    batch_tokens += 1.0;
                    const std::size_t idx = result.model.token_index(token);
                    for (std::size_t k = 0; k < grad.size(); ++k) {
                        grad[k] += probs[k] - (k == idx ? 1.0 : 0.0);
                    }
                }
            }
            if (batch_tokens == 0.0) continue;
            Vec& logits = result.model.logits();
            for (std::size_t k = 0; k < logits.size(); ++k) {
                logits[k] -= config.nll_learning_rate * grad[k] / batch_tokens;
                if (!std::isfinite(logits[k])) {
                    throw NonFiniteLoss("likelihood update produced a non-finite logit");
                }
            }
        }
        result.nll_epoch_mean_loss.push_back(loss_sum / static_cast<double>(examples.size()));
    }

    for (std::size_t epoch = 0; epoch < config.rl_epochs; ++epoch) {
        rng.shuffle(order);
        double reward_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            const std::size_t end = std::min(order.size(), start + batch_size);
            std::vector<PolicyExample> batch;
            for (std::size_t b = start; b < end; ++b) {
                batch.push_back({examples[order[b]].input, examples[order[b]].gold_label});
            }
            const double mean_reward = policy_gradient_step(
                result.model, batch, *classifier, config.rl_learning_rate,
                config.max_output_length, rng);
            reward_sum += mean_reward * static_cast<double>(batch.size());
        }
        result.rl_epoch_mean_reward.push_back(reward_sum / static_cast<double>(examples.size()));
    }
    return result;
}

std::string lead3(const std::vector<std::string>& evidence_sentences) {
    std::string out;
    const std::size_t take = std::min<std::size_t>(3, evidence_sentences.size());
    for (std::size_t i = 0; i < take; ++i) {
        if (!out.empty()) out += ' ';
        out += evidence_sentences[i];
    }
    return out;
}

namespace {

using BigramCounts = std::unordered_map<std::string, std::size_t>;

BigramCounts sentence_bigrams(const std::vector<std::string>& tokens) {
    BigramCounts counts;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        ++counts[tokens[i] + '\x1f' + tokens[i + 1]];
    }
    return counts;
}

double clipped_bigram_f(const BigramCounts& candidate, std::size_t candidate_total,
                        const BigramCounts& reference, std::size_t reference_total) {
    if (candidate_total == 0 || reference_total == 0) return 0.0;
    double matched = 0.0;
    for (const auto& [gram, count] : candidate) {
        const auto it = reference.find(gram);
        if (it != reference.end()) matched += static_cast<double>(std::min(count, it->second));
    }
    const double precision = matched / static_cast<double>(candidate_total);
    const double recall = matched / static_cast<double>(reference_total);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

OracleSelection oracle_extract(const std::vector<std::string>& sentences,
                               std::string_view reference, std::size_t max_sentences) {
    const auto ref_tokens = metric_tokenize(reference);
    if (ref_tokens.empty()) throw EmptyReference("reference statement has no tokens");
    const BigramCounts ref_bigrams = sentence_bigrams(ref_tokens);
    const std::size_t ref_total = ref_tokens.size() > 1 ? ref_tokens.size() - 1 : 0;

    // Bigrams are counted inside each sentence, never across a join, so a
    // sentence's contribution does not depend on what sits next to it.
    std::vector<BigramCounts> per_sentence;
    std::vector<std::size_t> per_sentence_total;
    for (const std::string& sentence : sentences) {
        const auto tokens = metric_tokenize(sentence);
        per_sentence.push_back(sentence_bigrams(tokens));
        per_sentence_total.push_back(tokens.size() > 1 ? tokens.size() - 1 : 0);
    }

    OracleSelection selection;
    BigramCounts selected_bigrams;
    std::size_t selected_total = 0;
    std::vector<bool> used(sentences.size(), false);
    while (selection.indices.size() < max_sentences) {
        double best_f = selection.rouge2_f;
        std::size_t best_idx = sentences.size();
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            if (used[i]) continue;
            BigramCounts merged = selected_bigrams;
            for (const auto& [gram, count] : per_sentence[i]) merged[gram] += count;
            const double f = clipped_bigram_f(merged, selected_total + per_sentence_total[i],
                                              ref_bigrams, ref_total);
            if (f > best_f) {
                best_f = f;
                best_idx = i;
            }
        }
        if (best_idx == sentences.size()) break;
        used[best_idx] = true;
        selection.indices.push_back(best_idx);
        if (!selection.statement.empty()) selection.statement += ' ';
        selection.statement += sentences[best_idx];
        selection.rouge2_f = best_f;
        for (const auto& [gram, count] : per_sentence[best_idx]) selected_bigrams[gram] += count;
        selected_total += per_sentence_total[best_idx];
    }
    return selection;
}

}  // namespace factcheck

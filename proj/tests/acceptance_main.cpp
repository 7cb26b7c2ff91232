// Release gate: one self-contained check per shipped guarantee, each printed
// as a single PASS/FAIL line with its runtime. Exits non-zero when any check
// fails. Checks that own a time budget fail when they exceed it.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "factcheck/config.hpp"
#include "factcheck/corpus.hpp"
#include "factcheck/encoders.hpp"
#include "factcheck/generation.hpp"
#include "factcheck/harness.hpp"
#include "factcheck/linalg.hpp"
#include "factcheck/metrics.hpp"
#include "factcheck/retrieval.hpp"
#include "factcheck/verification.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"
#include "testutil.hpp"

using namespace factcheck;

namespace {

struct CheckFailure : std::runtime_error {
    explicit CheckFailure(const std::string& msg) : std::runtime_error(msg) {}
};

void require(bool condition, const std::string& message) {
    if (!condition) throw CheckFailure(message);
}

std::string format(const char* fmt, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), fmt, value);
    return buf;
}

std::string file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "cannot open " + path.string());
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void append_line(const std::filesystem::path& path, const std::string& line) {
    std::ofstream out(path, std::ios::app);
    out << line << '\n';
}

Vec random_unit(Rng& rng, std::size_t dim) {
    Vec v(dim);
    for (double& x : v) x = rng.next_gaussian();
    normalize_in_place(v);
    return v;
}

// Unit vector orthogonal to `axis` (Gram-Schmidt on a random draw).
Vec random_orthogonal(Rng& rng, const Vec& axis) {
    while (true) {
        Vec v = random_unit(rng, axis.size());
        double dot = 0.0;
        for (std::size_t i = 0; i < axis.size(); ++i) dot += v[i] * axis[i];
        for (std::size_t i = 0; i < axis.size(); ++i) v[i] -= dot * axis[i];
        double norm = 0.0;
        for (double x : v) norm += x * x;
        if (norm > 1e-8) {
            normalize_in_place(v);
            return v;
        }
    }
}

RetrievalJudgment random_judgment(Rng& rng) {
    static const std::vector<std::string> universe{"a", "b", "c", "d", "e", "f"};
    RetrievalJudgment j;
    j.claim_id = "r";
    while (j.gold_ids.empty()) {
        for (const auto& id : universe) {
            if (rng.next_double() < 0.4) j.gold_ids.insert(id);
        }
    }
    std::vector<std::string> pool = universe;
    rng.shuffle(pool);
    const std::size_t take = rng.next_index(pool.size() + 1);
    j.retrieved.assign(pool.begin(), pool.begin() + take);
    return j;
}

std::string random_text(Rng& rng, std::size_t max_tokens, bool allow_empty) {
    static const std::vector<std::string> vocab{"cat", "dog", "sat", "ran", "the", "mat"};
    const std::size_t len = allow_empty ? rng.next_index(max_tokens + 1) : 1 + rng.next_index(max_tokens);
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        if (!out.empty()) out += ' ';
        out += vocab[rng.next_index(vocab.size())];
    }
    return out;
}

struct FixedClassifier : RewardClassifier {
    Vec probs;
    explicit FixedClassifier(Vec p) : probs(std::move(p)) {}
    Vec classify(std::string_view) const override { return probs; }
};

// Rewards statements that are exactly "A", punishes everything else.
struct BanditClassifier : RewardClassifier {
    Vec classify(std::string_view statement) const override {
        if (statement == "A") return {1.0, 0.0, 0.0};
        return {0.0, 1.0, 0.0};
    }
};

void close_to(double actual, double expected, double tol, const std::string& what) {
    if (std::fabs(actual - expected) > tol) {
        std::ostringstream msg;
        msg << what << ": got " << actual << ", expected " << expected << " (tol " << tol << ")";
        throw CheckFailure(msg.str());
    }
}

// ---------------------------------------------------------------------------
// 1. Micro F1 of the constant-Refuted predictor over the shipped test-split
//    label counts (825 refuted, 817 supported, 800 nei).

std::string check_majority_baseline() {
    std::vector<TruthfulnessLabel> golds;
    golds.insert(golds.end(), 825, TruthfulnessLabel::Refuted);
    golds.insert(golds.end(), 817, TruthfulnessLabel::Supported);
    golds.insert(golds.end(), 800, TruthfulnessLabel::Nei);
    const std::vector<TruthfulnessLabel> preds(golds.size(), TruthfulnessLabel::Refuted);

    const double f1 = micro_f1(preds, golds);
    close_to(f1, 825.0 / 2442.0, 1e-12, "constant predictor micro F1");
    close_to(f1 * 100.0, 33.78, 0.01, "micro F1 in percent");
    return "micro F1 = " + format("%.4f%%", f1 * 100.0) + " on 2442 claims";
}

// ---------------------------------------------------------------------------
// 2. Every metric agrees with its naive oracle on 200 random instances.

std::string check_metric_oracles() {
    Rng rng(4001);

    for (int trial = 0; trial < 200; ++trial) {
        const RetrievalJudgment j = random_judgment(rng);
        const std::size_t k = 1 + rng.next_index(6);
        const PrecisionRecall pr = precision_recall_at_k(j, k);
        close_to(pr.precision, oracles::precision_at_k(j.retrieved, j.gold_ids, k), 1e-9, "precision@k");
        close_to(pr.recall, oracles::recall_at_k(j.retrieved, j.gold_ids, k), 1e-9, "recall@k");
        close_to(ndcg_at_k(j, k), oracles::ndcg_at_k(j.retrieved, j.gold_ids, k), 1e-9, "ndcg@k");
        close_to(average_precision_at_k(j, k),
                 oracles::average_precision_at_k(j.retrieved, j.gold_ids, k), 1e-9, "ap@k");
    }

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<RetrievalJudgment> js;
        js.push_back(random_judgment(rng));
        std::size_t naive_excluded = 0;
        const std::size_t extra = rng.next_index(4);
        for (std::size_t i = 0; i < extra; ++i) {
            RetrievalJudgment j = random_judgment(rng);
            if (rng.next_double() < 0.3) {
                j.gold_ids.clear();
                ++naive_excluded;
            }
            js.push_back(std::move(j));
        }
        const std::size_t k = 1 + rng.next_index(6);
        double total = 0.0;
        for (const RetrievalJudgment& j : js) {
            if (j.gold_ids.empty()) continue;
            total += oracles::average_precision_at_k(j.retrieved, j.gold_ids, k);
        }
        const double naive_map = total / static_cast<double>(js.size() - naive_excluded);
        std::size_t excluded = 0;
        close_to(mean_average_precision(js, k, &excluded), naive_map, 1e-9, "map@k");
        require(excluded == naive_excluded, "map exclusion count mismatch");
    }

    static const std::vector<std::string> universe{"a", "b", "c", "d", "e", "f"};
    for (int trial = 0; trial < 200; ++trial) {
        EmbeddingLookup embs;
        std::map<std::string, std::vector<double>> naive_embs;
        const std::size_t dim = 2 + rng.next_index(3);
        for (const auto& id : universe) {
            const Vec v = random_unit(rng, dim);
            embs[id] = v;
            naive_embs[id] = v;
        }
        std::vector<RetrievalJudgment> js;
        std::vector<oracles::SRecallItem> naive_items;
        const std::size_t n_claims = 1 + rng.next_index(3);
        for (std::size_t c = 0; c < n_claims; ++c) {
            const RetrievalJudgment j = random_judgment(rng);
            js.push_back(j);
            naive_items.push_back({j.gold_ids, j.retrieved});
        }
        close_to(s_recall(js, embs), oracles::s_recall(naive_items, naive_embs), 1e-9, "s-recall");
    }

    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.next_index(30);
        std::vector<TruthfulnessLabel> preds, golds;
        std::vector<int> naive_preds, naive_golds;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t p = rng.next_index(3);
            const std::size_t g = rng.next_index(3);
            preds.push_back(kAllLabels[p]);
            golds.push_back(kAllLabels[g]);
            naive_preds.push_back(static_cast<int>(p));
            naive_golds.push_back(static_cast<int>(g));
        }
        close_to(micro_f1(preds, golds), oracles::micro_f1(naive_preds, naive_golds, 3), 1e-9,
                 "micro F1");
    }

    for (int trial = 0; trial < 200; ++trial) {
        const std::string cand = random_text(rng, 8, true);
        const std::string ref = random_text(rng, 8, false);
        for (std::size_t n = 1; n <= 2; ++n) {
            const Prf mine = rouge_n(cand, ref, n);
            const oracles::NaivePrf naive = oracles::rouge_n(cand, ref, n);
            close_to(mine.precision, naive.p, 1e-9, "rouge-n precision");
            close_to(mine.recall, naive.r, 1e-9, "rouge-n recall");
            close_to(mine.f, naive.f, 1e-9, "rouge-n F");
        }
        const Prf l = rouge_l(cand, ref);
        const oracles::NaivePrf nl = oracles::rouge_l(cand, ref);
        close_to(l.precision, nl.p, 1e-9, "rouge-l precision");
        close_to(l.recall, nl.r, 1e-9, "rouge-l recall");
        close_to(l.f, nl.f, 1e-9, "rouge-l F");
    }

    for (int trial = 0; trial < 200; ++trial) {
        const std::string cand = random_text(rng, 8, false);
        const std::string ref = random_text(rng, 8, false);
        close_to(sentence_bleu(cand, ref, 4), oracles::sentence_bleu(cand, ref, 4), 1e-9,
                 "sentence BLEU");
    }

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<GenerationPair> pairs;
        std::vector<oracles::BleuPair> naive_pairs;
        const std::size_t n = 1 + rng.next_index(4);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string cand = random_text(rng, 8, false);
            const std::string ref = random_text(rng, 8, false);
            pairs.push_back({cand, ref});
            naive_pairs.push_back({cand, ref});
        }
        close_to(corpus_bleu(pairs, 4), oracles::bleu(naive_pairs, 4), 1e-9, "corpus BLEU");
    }

    return "200 instances per metric, all within 1e-9";
}

// ---------------------------------------------------------------------------
// 3. Analytic stance head gradients match central finite differences.

std::string check_stance_gradients() {
    Rng rng(131);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        gradcheck::GradInstance inst = gradcheck::random_instance(rng);
        worst = std::max(worst, gradcheck::worst_grad_error(inst));
    }
    require(worst < 1e-4, "worst relative gradient error " + format("%.3e", worst) + " >= 1e-4");
    return "50 instances, worst relative error = " + format("%.3e", worst);
}

// ---------------------------------------------------------------------------
// 4. Contrastive loss closed forms and strict monotonicity in the positive
//    similarity.

std::string check_contrastive_loss() {
    Rng rng(88);
    const std::size_t dim = 8;

    for (int trial = 0; trial < 10; ++trial) {
        const Vec c = random_unit(rng, dim);
        const Vec p = random_unit(rng, dim);
        close_to(info_nce_loss(c, p, {p}), 0.0, 1e-9, "single-element batch loss");
    }

    for (std::size_t b = 2; b <= 8; ++b) {
        const Vec c = random_unit(rng, dim);
        const Vec p = random_unit(rng, dim);
        const std::vector<Vec> batch(b, p);
        close_to(info_nce_loss(c, p, batch), std::log(static_cast<double>(b)), 1e-9,
                 "uniform batch loss");
    }

    for (int trial = 0; trial < 10; ++trial) {
        const Vec c = random_unit(rng, dim);
        const Vec negative = random_orthogonal(rng, c);
        close_to(info_nce_loss(c, c, {c, negative}), std::log1p(std::exp(-1.0)), 1e-9,
                 "aligned-positive orthogonal-negative loss");
    }

    for (int trial = 0; trial < 100; ++trial) {
        const Vec c = random_unit(rng, dim);
        const Vec u = random_orthogonal(rng, c);
        double lo = rng.next_range(0.05, 0.95);
        double hi = rng.next_range(0.05, 0.95);
        while (std::fabs(hi - lo) < 0.05) hi = rng.next_range(0.05, 0.95);
        if (lo > hi) std::swap(lo, hi);
        auto positive_at = [&](double cos_target) {
            Vec p(dim);
            const double ortho = std::sqrt(1.0 - cos_target * cos_target);
            for (std::size_t i = 0; i < dim; ++i) p[i] = cos_target * c[i] + ortho * u[i];
            return p;
        };
        std::vector<Vec> negatives;
        const std::size_t n_neg = 1 + rng.next_index(4);
        for (std::size_t i = 0; i < n_neg; ++i) negatives.push_back(random_unit(rng, dim));

        const Vec p_lo = positive_at(lo);
        const Vec p_hi = positive_at(hi);
        std::vector<Vec> batch_lo{p_lo};
        std::vector<Vec> batch_hi{p_hi};
        batch_lo.insert(batch_lo.end(), negatives.begin(), negatives.end());
        batch_hi.insert(batch_hi.end(), negatives.begin(), negatives.end());
        const double loss_lo = info_nce_loss(c, p_lo, batch_lo);
        const double loss_hi = info_nce_loss(c, p_hi, batch_hi);
        require(loss_hi < loss_lo,
                "loss did not decrease when positive similarity rose from " + format("%.3f", lo) +
                    " to " + format("%.3f", hi));
    }

    return "closed forms within 1e-9; loss fell on all 100 similarity bumps";
}

// ---------------------------------------------------------------------------
// 5. Planted evidence comes back through candidate generation plus rerank on
//    a 500-sentence corpus.

std::string check_planted_retrieval() {
    static const std::vector<std::string> kTopic{"river",  "stone",  "orbit",  "signal", "meadow",
                                                 "carbon", "harbor", "violet", "thunder", "lattice"};
    static const std::vector<std::string> kFiller{"quartz", "ribbon",  "tunnel", "sparrow", "ledger",
                                                  "cobalt", "prairie", "anchor", "drift",   "ember"};
    Rng rng(505);
    auto capitalized = [&rng](const std::vector<std::string>& vocab, std::size_t len) {
        std::string text;
        for (std::size_t t = 0; t < len; ++t) {
            if (t > 0) text += ' ';
            text += vocab[rng.next_index(vocab.size())];
        }
        text[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
        return text + ".";
    };

    const std::size_t n_claims = 25;
    const std::size_t sentences_per_doc = 20;
    std::vector<Claim> claims;
    std::vector<CorpusDocument> documents;
    std::vector<std::string> gold_sentence_ids;
    for (std::size_t i = 0; i < n_claims; ++i) {
        Claim claim;
        claim.claim_id = "claim" + std::to_string(i);
        claim.text = capitalized(kTopic, 4 + rng.next_index(3));
        claim.text.insert(claim.text.size() - 1, " marker" + std::to_string(i));
        claims.push_back(claim);

        CorpusDocument doc;
        doc.doc_id = "doc" + std::to_string(i);
        const std::size_t plant_at = rng.next_index(sentences_per_doc);
        for (std::size_t s = 0; s < sentences_per_doc; ++s) {
            doc.paragraphs.push_back(s == plant_at ? claim.text : capitalized(kFiller, 5 + rng.next_index(4)));
        }
        for (std::size_t p = 0; p < doc.paragraphs.size(); ++p) {
            const auto parts = split_sentences(doc.paragraphs[p]);
            require(parts.size() == 1, "planted corpus paragraphs must stay single sentences");
            doc.sentences.push_back({p, 0, parts[0]});
        }
        documents.push_back(std::move(doc));
        gold_sentence_ids.push_back("doc" + std::to_string(i) + "#" + std::to_string(plant_at) + ".0");
    }

    BackendDescriptor desc;
    desc.dim = 64;
    const StubBackend backend(desc);
    const SentenceIndex index = build_text_index(documents, backend);
    require(index.entries.size() == 500, "expected exactly 500 indexed sentences");

    double ndcg_total = 0.0;
    for (std::size_t i = 0; i < n_claims; ++i) {
        const auto candidates = retrieve_text_candidates(claims[i].text, index, 1000, backend);
        const RetrievalResult result =
            rerank_text(claims[i].claim_id, claims[i].text, index, candidates, 5, backend);
        RetrievalJudgment j;
        j.claim_id = claims[i].claim_id;
        j.gold_ids = {gold_sentence_ids[i]};
        for (const ScoredItem& item : result.ranked) j.retrieved.push_back(item.item_id);
        const PrecisionRecall pr = precision_recall_at_k(j, 5);
        require(pr.recall == 1.0, "planted sentence missing from top 5 for " + claims[i].claim_id);
        ndcg_total += ndcg_at_k(j, 5);
    }
    const double mean_ndcg = ndcg_total / static_cast<double>(n_claims);
    require(mean_ndcg >= 0.95, "mean NDCG@5 " + format("%.4f", mean_ndcg) + " < 0.95");
    return "recall@5 = 1.0 on all 25 claims, mean NDCG@5 = " + format("%.4f", mean_ndcg);
}

// ---------------------------------------------------------------------------
// 6. The trainable stance head separates a synthetic task within 20 epochs.

std::string check_verifier_learnability() {
    Rng data_rng(33);
    const std::vector<VerifyExample> all = synthetic::stance_task(160, data_rng);
    const std::vector<VerifyExample> train(all.begin(), all.begin() + 120);
    const std::vector<VerifyExample> held(all.begin() + 120, all.end());

    BackendDescriptor desc;
    desc.dim = 32;
    const StubBackend backend(desc);
    VerifierConfig config;
    config.epochs = 20;
    config.batch_size = 8;
    config.learning_rate = 0.5;
    config.seed = 1;
    const VerifierTrainResult result = train_verifier(train, config, backend);

    std::size_t correct = 0;
    for (const VerifyExample& ex : held) {
        std::vector<TextEvidenceItem> text;
        for (std::size_t i = 0; i < ex.text_evidence.size(); ++i) {
            text.push_back({"e" + std::to_string(i), ex.text_evidence[i]});
        }
        const VerificationOutput out = verify_claim(ex.claim, text, {}, result.params, backend);
        if (out.predicted == ex.label) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(held.size());
    require(accuracy >= 0.95, "held-out accuracy " + format("%.3f", accuracy) + " < 0.95");
    return "held-out accuracy = " + format("%.3f", accuracy) + " after 20 epochs";
}

// ---------------------------------------------------------------------------
// 7. Policy gradient drives up the rewarded token; zero-reward batches leave
//    the model bit-identical.

std::string check_policy_gradient() {
    CategoricalGenerator model({"A", "B"});
    GenerationInput input;
    input.sequence = "bandit";
    const std::vector<PolicyExample> batch{{input, TruthfulnessLabel::Supported}};
    const BanditClassifier classifier;
    Rng rng(7);

    const std::size_t a = model.token_index("A");
    const double initial = model.token_probabilities()[a];
    for (int step = 0; step < 50; ++step) {
        policy_gradient_step(model, batch, classifier, 0.5, 1, rng);
    }
    const double final_p = model.token_probabilities()[a];
    require(final_p > initial + 0.3, "p(rewarded token) moved " + format("%.3f", initial) + " -> " +
                                         format("%.3f", final_p) + ", needed +0.3");

    CategoricalGenerator frozen({"A", "B"});
    const Vec before = frozen.logits();
    const FixedClassifier coin({0.5, 0.25, 0.25});
    Rng coin_rng(9);
    for (int step = 0; step < 3; ++step) {
        const double reward = policy_gradient_step(frozen, batch, coin, 0.5, 1, coin_rng);
        require(reward == 0.0, "coin-flip classifier must yield exactly zero reward");
    }
    const Vec& after = frozen.logits();
    require(before.size() == after.size() &&
                std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0,
            "zero-reward steps changed the logits");

    return "p(rewarded) " + format("%.3f", initial) + " -> " + format("%.3f", final_p) +
           "; zero-reward steps left logits bit-identical";
}

// ---------------------------------------------------------------------------
// 8. The reward equals 2 p(gold) - 1 on random probability simplices.

std::string check_reward_identity() {
    Rng rng(777);
    for (int trial = 0; trial < 1000; ++trial) {
        Vec p(3);
        double sum = 0.0;
        for (double& x : p) {
            x = 1e-6 + rng.next_double();
            sum += x;
        }
        for (double& x : p) x /= sum;
        const FixedClassifier classifier(p);
        for (const TruthfulnessLabel label : kAllLabels) {
            const double reward = truthfulness_reward("any statement", label, classifier);
            close_to(reward, 2.0 * p[label_index(label)] - 1.0, 1e-12, "reward identity");
            require(reward >= -1.0 && reward <= 1.0, "reward left [-1, 1]");
        }
    }
    return "identity held to 1e-12 on 1000 simplices x 3 labels";
}

// ---------------------------------------------------------------------------
// 9. Greedy extractive selection stays within 0.9 of the exhaustive best
//    ROUGE-2, with monotone non-negative gains.

std::string check_extractive_oracle() {
    static const std::vector<std::string> vocab{"cat", "dog", "sat", "ran", "the",
                                                "mat", "on",  "hill", "ridge"};
    Rng rng(606);
    auto sentence = [&](std::size_t len) {
        std::string out;
        for (std::size_t i = 0; i < len; ++i) {
            if (!out.empty()) out += ' ';
            out += vocab[rng.next_index(vocab.size())];
        }
        return out;
    };

    // Candidate bigrams never cross sentence joins, so a subset's bigram
    // multiset is the concatenation of per-sentence bigram lists and its
    // score is order independent.
    auto subset_score = [](const std::vector<std::vector<std::string>>& sent_grams,
                           const std::vector<std::string>& ref_grams,
                           const std::vector<std::size_t>& members) {
        std::vector<std::string> cand;
        for (const std::size_t i : members) {
            cand.insert(cand.end(), sent_grams[i].begin(), sent_grams[i].end());
        }
        const double m = static_cast<double>(oracles::clipped_matches(cand, ref_grams));
        const double p = cand.empty() ? 0.0 : m / static_cast<double>(cand.size());
        const double r = ref_grams.empty() ? 0.0 : m / static_cast<double>(ref_grams.size());
        return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    };

    double worst_ratio = 1.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.next_index(4);
        std::vector<std::string> sentences;
        for (std::size_t i = 0; i < n; ++i) sentences.push_back(sentence(3 + rng.next_index(6)));
        const std::string reference = sentence(5 + rng.next_index(9));

        const std::vector<std::string> ref_grams =
            oracles::ngrams_joined(oracles::tokenize(reference), 2);
        std::vector<std::vector<std::string>> sent_grams;
        for (const std::string& s : sentences) {
            sent_grams.push_back(oracles::ngrams_joined(oracles::tokenize(s), 2));
        }

        double best = 0.0;
        for (std::size_t mask = 1; mask < (1u << n); ++mask) {
            std::vector<std::size_t> members;
            for (std::size_t i = 0; i < n; ++i) {
                if (mask & (1u << i)) members.push_back(i);
            }
            best = std::max(best, subset_score(sent_grams, ref_grams, members));
        }

        const OracleSelection greedy = oracle_extract(sentences, reference);
        close_to(greedy.rouge2_f, subset_score(sent_grams, ref_grams, greedy.indices), 1e-9,
                 "greedy score disagrees with the independent scorer");
        require(greedy.rouge2_f <= best + 1e-9, "greedy beat the exhaustive best");
        require(greedy.rouge2_f >= 0.9 * best - 1e-12,
                "greedy " + format("%.4f", greedy.rouge2_f) + " fell below 0.9 x best " +
                    format("%.4f", best));
        if (best > 0.0) worst_ratio = std::min(worst_ratio, greedy.rouge2_f / best);

        double previous = 0.0;
        for (std::size_t len = 1; len <= greedy.indices.size(); ++len) {
            const std::vector<std::size_t> prefix(greedy.indices.begin(),
                                                  greedy.indices.begin() + len);
            const double score = subset_score(sent_grams, ref_grams, prefix);
            require(score >= previous - 1e-12, "greedy gain went negative");
            previous = score;
        }
    }
    return "100 instances, worst greedy/best ratio = " + format("%.4f", worst_ratio);
}

// ---------------------------------------------------------------------------
// 10. Two pipeline runs with the same seed produce byte-identical prediction
//     files.

std::string check_pipeline_determinism() {
    testutil::TempDir corpus_dir("accept_corpus");
    synthetic::disk_corpus(corpus_dir.path);

    const std::string config_text = "corpus.root = " + corpus_dir.path.string() + "\n" +
                                    "seed = 3\n"
                                    "backend.dim = 32\n"
                                    "backend.seed = 5\n"
                                    "retrieval.epochs = 1\n"
                                    "retrieval.k = 5\n"
                                    "verifier.epochs = 4\n"
                                    "verifier.learning_rate = 0.3\n"
                                    "generation.nll_epochs = 4\n"
                                    "generation.rl_epochs = 1\n"
                                    "generation.max_output_length = 12\n"
                                    "reward.epochs = 8\n"
                                    "mode.evidence = system\n"
                                    "mode.truthfulness = system\n"
                                    "mode.ablation = both\n";
    const PipelineConfig config = PipelineConfig::from_config(Config::parse_string(config_text));

    testutil::TempDir out1("accept_run1");
    testutil::TempDir out2("accept_run2");
    run_end_to_end(config, out1.path);
    run_end_to_end(config, out2.path);

    for (const char* name : {"retrieval.jsonl", "verification.jsonl", "generation.jsonl"}) {
        const std::string a = file_bytes(out1.path / "predictions" / name);
        const std::string b = file_bytes(out2.path / "predictions" / name);
        require(!a.empty(), std::string(name) + " is empty");
        require(a == b, std::string(name) + " differs between same-seed runs");
    }
    return "all three prediction files byte-identical across reruns";
}

// ---------------------------------------------------------------------------
// 11. Corpus save -> load is the identity and each injected fault is reported
//     exactly once.

void copy_image_bytes(const Corpus& corpus, const std::filesystem::path& from,
                      const std::filesystem::path& to) {
    for (const CorpusImage& image : corpus.images) {
        std::filesystem::create_directories((to / image.path).parent_path());
        std::filesystem::copy_file(from / image.path, to / image.path,
                                   std::filesystem::copy_options::overwrite_existing);
    }
}

std::string check_corpus_round_trip() {
    testutil::TempDir original("accept_rt_src");
    const Corpus corpus = synthetic::disk_corpus(original.path);

    testutil::TempDir copy("accept_rt_copy");
    save_corpus(corpus, copy.path);
    copy_image_bytes(corpus, original.path, copy.path);
    ValidationReport clean;
    const Corpus reloaded = load_corpus(copy.path, &clean);
    require(clean.ok(), "reloaded corpus reported issues: " + clean.to_string());
    require(reloaded == corpus, "save -> load changed the corpus");

    Corpus dangling = corpus;
    dangling.claims[0].gold_text_evidence_ids.push_back("ghost_evidence");
    const ValidationReport dangling_report = validate_corpus(dangling);
    require(dangling_report.count("dangling_reference") == 1,
            "dangling reference fired " + std::to_string(dangling_report.count("dangling_reference")) +
                " times, expected 1");
    require(dangling_report.issues.size() == 1, "dangling reference raised unrelated issues");

    testutil::TempDir dup_root("accept_rt_dup");
    save_corpus(corpus, dup_root.path);
    copy_image_bytes(corpus, original.path, dup_root.path);
    std::ifstream docs(dup_root.path / "documents.jsonl");
    std::string first_doc;
    std::getline(docs, first_doc);
    append_line(dup_root.path / "documents.jsonl", first_doc);
    ValidationReport dup_report;
    (void)load_corpus(dup_root.path, &dup_report);
    require(dup_report.count("duplicate_id") == 1,
            "duplicate id fired " + std::to_string(dup_report.count("duplicate_id")) +
                " times, expected 1");
    require(dup_report.issues.size() == 1, "duplicate id raised unrelated issues");

    testutil::TempDir bad_root("accept_rt_bad");
    save_corpus(corpus, bad_root.path);
    copy_image_bytes(corpus, original.path, bad_root.path);
    append_line(bad_root.path / "claims.jsonl", "{this is not a record");
    ValidationReport bad_report;
    (void)load_corpus(bad_root.path, &bad_report);
    require(bad_report.count("malformed_record") == 1,
            "malformed record fired " + std::to_string(bad_report.count("malformed_record")) +
                " times, expected 1");
    require(bad_report.issues.size() == 1, "malformed record raised unrelated issues");

    return "round trip identical; each injected fault reported exactly once";
}

struct Criterion {
    const char* name;
    std::function<std::string()> run;
    double time_limit_s;  // 0 means no budget
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"constant-refuted micro F1 matches the test-split counts", check_majority_baseline, 1.0},
        {"metrics agree with naive oracles on random instances", check_metric_oracles, 30.0},
        {"stance gradients match finite differences", check_stance_gradients, 60.0},
        {"contrastive loss closed forms and monotonicity", check_contrastive_loss, 0.0},
        {"planted evidence survives candidate generation and rerank", check_planted_retrieval, 60.0},
        {"verifier separates a synthetic task within 20 epochs", check_verifier_learnability, 300.0},
        {"policy gradient learns the bandit; zero reward is a no-op", check_policy_gradient, 60.0},
        {"truthfulness reward equals 2p - 1 on random simplices", check_reward_identity, 0.0},
        {"greedy sentence selection stays near the exhaustive best", check_extractive_oracle, 0.0},
        {"same-seed pipeline runs are byte-identical", check_pipeline_determinism, 0.0},
        {"corpus round trip and injected-fault detection", check_corpus_round_trip, 0.0},
    };

    std::size_t failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Criterion& criterion = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = true;
        try {
            detail = criterion.run();
        } catch (const std::exception& e) {
            ok = false;
            detail = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && criterion.time_limit_s > 0.0 && elapsed > criterion.time_limit_s) {
            ok = false;
            detail = "exceeded the " + format("%.0f", criterion.time_limit_s) + "s budget";
        }
        if (!ok) ++failures;
        std::printf("%-4s %2zu. %-58s (%6.2fs)  %s\n", ok ? "PASS" : "FAIL", i + 1, criterion.name,
                    elapsed, detail.c_str());
    }

    if (failures == 0) {
        std::printf("all %zu checks passed\n", criteria.size());
        return 0;
    }
    std::printf("%zu of %zu checks failed\n", failures, criteria.size());
    return 1;
}

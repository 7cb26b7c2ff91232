#include "factcheck/verification.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "factcheck/metrics.hpp"

namespace factcheck {

StanceDetectorParams StanceDetectorParams::zeros(std::size_t d) {
    StanceDetectorParams p;
    p.fuse_weight = Mat(2 * d, d);
    p.fuse_bias = Vec(d, 0.0);
    p.cls_weight = Mat(2 * d, 3);
    p.cls_bias = Vec(3, 0.0);
    return p;
}

StanceDetectorParams StanceDetectorParams::random_init(std::size_t d, Rng& rng, double scale) {
    StanceDetectorParams p = zeros(d);
    for (double& x : p.fuse_weight.data) x = scale * rng.next_gaussian();
    for (double& x : p.cls_weight.data) x = scale * rng.next_gaussian();
    return p;
}

StanceGradients StanceGradients::zeros(std::size_t d) {
    StanceGradients g;
    g.fuse_weight = Mat(2 * d, d);
    g.fuse_bias = Vec(d, 0.0);
    g.cls_weight = Mat(2 * d, 3);
    g.cls_bias = Vec(3, 0.0);
    return g;
}

void StanceGradients::scale(double factor) {
    for (double& x : fuse_weight.data) x *= factor;
    for (double& x : fuse_bias) x *= factor;
    for (double& x : cls_weight.data) x *= factor;
    for (double& x : cls_bias) x *= factor;
}

Mat cross_attend(const Mat& h_c, const Mat& h_e) {
    if (h_e.rows == 0) throw EmptyEvidence("attention needs at least one evidence unit");
    if (h_c.cols != h_e.cols) throw ShapeMismatch("claim and evidence dimensions disagree");

    Mat out(h_c.rows, h_c.cols);
    for (std::size_t i = 0; i < h_c.rows; ++i) {
        Vec logits(h_e.rows);
        for (std::size_t s = 0; s < h_e.rows; ++s) {
            double dot_is = 0.0;
            for (std::size_t k = 0; k < h_c.cols; ++k) dot_is += h_c.at(i, k) * h_e.at(s, k);
            logits[s] = dot_is;
        }
        const Vec weights = softmax(logits);
        for (std::size_t k = 0; k < h_c.cols; ++k) {
            double acc = 0.0;
            for (std::size_t s = 0; s < h_e.rows; ++s) acc += weights[s] * h_e.at(s, k);
            out.at(i, k) = acc;
        }
    }
    return out;
}

namespace {

// Comparison features for one claim token row: [a (.) c : a - c].
Vec comparison_row(const Mat& a, const Mat& c, std::size_t i) {
    const std::size_t d = c.cols;
    Vec z(2 * d);
    for (std::size_t k = 0; k < d; ++k) {
        z[k] = a.at(i, k) * c.at(i, k);
        z[d + k] = a.at(i, k) - c.at(i, k);
    }
    return z;
}

struct FuseTrace {
    Mat z;             // n x 2d comparison features
    Mat u;             // n x d pre-activation
    Vec pooled;        // d
    std::vector<std::size_t> argmax_row;  // d, winning row per output column
};

FuseTrace fuse_forward(const Mat& h_e2c, const Mat& h_c, const StanceDetectorParams& params) {
    if (h_e2c.rows != h_c.rows || h_e2c.cols != h_c.cols) {
        throw ShapeMismatch("attended and claim matrices disagree in shape");
    }
    const std::size_t n = h_c.rows;
    const std::size_t d = h_c.cols;
    if (params.fuse_weight.rows != 2 * d || params.fuse_weight.cols != d) {
        throw ShapeMismatch("fusion weight shape does not match the embedding dimension");
    }

    FuseTrace trace;
    trace.z = Mat(n, 2 * d);
    trace.u = Mat(n, d);
    trace.pooled = Vec(d, 0.0);
    trace.argmax_row.assign(d, 0);

    for (std::size_t i = 0; i < n; ++i) {
        const Vec z = comparison_row(h_e2c, h_c, i);
        for (std::size_t k = 0; k < 2 * d; ++k) trace.z.at(i, k) = z[k];
        for (std::size_t j = 0; j < d; ++j) {
            double u = params.fuse_bias[j];
            for (std::size_t k = 0; k < 2 * d; ++k) u += z[k] * params.fuse_weight.at(k, j);
            trace.u.at(i, j) = u;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        double best = 0.0;
        std::size_t best_row = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = trace.u.at(i, j);
            const double activated = u > 0.0 ? u : params.leaky_slope * u;
            if (i == 0 || activated > best) {
                best = activated;
                best_row = i;
            }
        }
        trace.pooled[j] = best;
        trace.argmax_row[j] = best_row;
    }
    return trace;
}

TruthfulnessLabel argmax_label(const Vec& probs) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return kAllLabels[best];
}

}  // namespace

Vec fuse_and_pool(const Mat& h_e2c, const Mat& h_c, const StanceDetectorParams& params) {
    return fuse_forward(h_e2c, h_c, params).pooled;
}

Vec aggregate_stances(const std::vector<Vec>& stances, std::size_t d) {
    Vec mean(d, 0.0);
    if (stances.empty()) return mean;
    for (const Vec& s : stances) {
        if (s.size() != d) throw ShapeMismatch("stance vectors disagree in dimension");
        for (std::size_t j = 0; j < d; ++j) mean[j] += s[j];
    }
    for (double& x : mean) x /= static_cast<double>(stances.size());
    return mean;
}

namespace {

Vec classifier_logits(const Vec& g_text, const Vec& g_image, const StanceDetectorParams& params) {
    const std::size_t d = g_text.size();
    if (g_image.size() != d) throw ShapeMismatch("modality aggregates disagree in dimension");
    if (params.cls_weight.rows != 2 * d || params.cls_weight.cols != 3) {
        throw ShapeMismatch("classifier weight shape does not match the embedding dimension");
    }
    Vec logits = params.cls_bias;
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            logits[k] += params.cls_weight.at(j, k) * g_text[j];
            logits[k] += params.cls_weight.at(d + j, k) * g_image[j];
        }
    }
    return logits;
}

}  // namespace

VerificationOutput predict_label(const Vec& g_text, const Vec& g_image,
                                 const StanceDetectorParams& params) {
    VerificationOutput out;
    out.probs = softmax(classifier_logits(g_text, g_image, params));
    out.predicted = argmax_label(out.probs);
    return out;
}

VerificationOutput verify_claim(std::string_view claim, const std::vector<TextEvidenceItem>& text_evidence,
                                const std::vector<ImageEvidenceItem>& image_evidence,
                                const StanceDetectorParams& params, const EncoderBackend& backend) {
    std::vector<std::string> texts;
    std::vector<std::vector<std::uint8_t>> images;
    for (const auto& item : text_evidence) texts.push_back(item.text);
    for (const auto& item : image_evidence) images.push_back(item.bytes);

    const ClaimEvidenceEncoding enc = encode_token_sequence(claim, texts, images, backend);
    const std::size_t d = backend.dim();

    std::vector<Vec> text_stances, image_stances;
    for (const Mat& e : enc.text_evidence) {
        text_stances.push_back(fuse_and_pool(cross_attend(enc.claim, e), enc.claim, params));
    }
    for (const Mat& e : enc.image_evidence) {
        image_stances.push_back(fuse_and_pool(cross_attend(enc.claim, e), enc.claim, params));
    }

    VerificationOutput out =
        predict_label(aggregate_stances(text_stances, d), aggregate_stances(image_stances, d), params);
    for (const auto& item : text_evidence) out.text_evidence_used.push_back(item.id);
    for (const auto& item : image_evidence) out.image_evidence_used.push_back(item.id);
    return out;
}

double stance_loss_and_grad(const ClaimEvidenceEncoding& encoding, TruthfulnessLabel gold,
                            const StanceDetectorParams& params, StanceGradients* grads) {
    const std::size_t d = params.dim();
    if (encoding.claim.cols != d) throw ShapeMismatch("encoding dimension does not match parameters");

    std::vector<FuseTrace> text_traces, image_traces;
    std::vector<Vec> text_stances, image_stances;
    for (const Mat& e : encoding.text_evidence) {
        text_traces.push_back(fuse_forward(cross_attend(encoding.claim, e), encoding.claim, params));
        text_stances.push_back(text_traces.back().pooled);
    }
    for (const Mat& e : encoding.image_evidence) {
        image_traces.push_back(fuse_forward(cross_attend(encoding.claim, e), encoding.claim, params));
        image_stances.push_back(image_traces.back().pooled);
    }

    const Vec g_text = aggregate_stances(text_stances, d);
    const Vec g_image = aggregate_stances(image_stances, d);
    const Vec logits = classifier_logits(g_text, g_image, params);
    const double lse = logsumexp(logits);
    const double loss = lse - logits[label_index(gold)];

    if (grads == nullptr) return loss;

    // dL/dlogits = softmax - onehot(gold)
    Vec dy(3);
    for (std::size_t k = 0; k < 3; ++k) {
        dy[k] = std::exp(logits[k] - lse) - (k == label_index(gold) ? 1.0 : 0.0);
    }
    for (std::size_t k = 0; k < 3; ++k) grads->cls_bias[k] += dy[k];
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            grads->cls_weight.at(j, k) += g_text[j] * dy[k];
            grads->cls_weight.at(d + j, k) += g_image[j] * dy[k];
        }
    }

    // dL/d(per-modality aggregate), then through the mean to each item.
    Vec dg_text(d, 0.0), dg_image(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t k = 0; k < 3; ++k) {
            dg_text[j] += params.cls_weight.at(j, k) * dy[k];
            dg_image[j] += params.cls_weight.at(d + j, k) * dy[k];
        }
    }

    auto backprop_items = [&](const std::vector<FuseTrace>& traces, const Vec& dg_modality) {
        if (traces.empty()) return;
        const double inv = 1.0 / static_cast<double>(traces.size());
        for (const FuseTrace& trace : traces) {
            if (trace.u.rows == 0) continue;
            // Max pool routes each column's gradient to its winning row.
            for (std::size_t j = 0; j < d; ++j) {
                const std::size_t row = trace.argmax_row[j];
                const double upstream = dg_modality[j] * inv;
                const double du =
                    upstream * (trace.u.at(row, j) > 0.0 ? 1.0 : params.leaky_slope);
                grads->fuse_bias[j] += du;
                for (std::size_t k = 0; k < 2 * d; ++k) {
                    grads->fuse_weight.at(k, j) += trace.z.at(row, k) * du;
                }
            }
        }
    };
    backprop_items(text_traces, dg_text);
    backprop_items(image_traces, dg_image);
    return loss;
}

VerifierTrainResult train_verifier(const std::vector<VerifyExample>& examples,
                                   const VerifierConfig& config, const EncoderBackend& backend) {
    if (examples.empty()) throw EmptyBatch("no verifier training examples");
    const std::size_t d = backend.dim();

    // The encoder is frozen, so every example encodes once up front.
    std::vector<ClaimEvidenceEncoding> encodings;
    encodings.reserve(examples.size());
    for (const VerifyExample& ex : examples) {
        encodings.push_back(
            encode_token_sequence(ex.claim, ex.text_evidence, ex.image_evidence, backend));
    }

    Rng rng(config.seed);
    VerifierTrainResult result;
    result.params = StanceDetectorParams::random_init(d, rng, config.init_scale);

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += std::max<std::size_t>(config.batch_size, 1)) {
            const std::size_t end = std::min(order.size(), start + std::max<std::size_t>(config.batch_size, 1));
            StanceGradients grads = StanceGradients::zeros(d);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                batch_loss += stance_loss_and_grad(encodings[order[i]], examples[order[i]].label,
                                                   result.params, &grads);
            }
            const double count = static_cast<double>(end - start);
            batch_loss /= count;
            if (!std::isfinite(batch_loss)) {
                throw NonFiniteLoss("verifier loss became non-finite at epoch " + std::to_string(epoch));
            }
            grads.scale(config.learning_rate / count);
            for (std::size_t i = 0; i < result.params.fuse_weight.data.size(); ++i) {
                result.params.fuse_weight.data[i] -= grads.fuse_weight.data[i];
            }
            for (std::size_t i = 0; i < d; ++i) result.params.fuse_bias[i] -= grads.fuse_bias[i];
            for (std::size_t i = 0; i < result.params.cls_weight.data.size(); ++i) {
                result.params.cls_weight.data[i] -= grads.cls_weight.data[i];
            }
            for (std::size_t i = 0; i < 3; ++i) result.params.cls_bias[i] -= grads.cls_bias[i];

            loss_sum += batch_loss * count;
            seen += end - start;
        }
        result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(seen));
    }
    return result;
}

TruthfulnessLabel majority_baseline(const std::vector<TruthfulnessLabel>& train_labels) {
    if (train_labels.empty()) throw EmptyBatch("majority baseline needs at least one label");
    std::array<std::size_t, 3> counts{};
    for (TruthfulnessLabel label : train_labels) ++counts[label_index(label)];
    std::size_t best = 0;
    for (std::size_t i = 1; i < counts.size(); ++i) {
        if (counts[i] > counts[best]) best = i;
    }
    return kAllLabels[best];
}

const std::vector<double> kAlpha1Grid{0.5, 0.6, 0.7, 0.75, 0.8};
const std::vector<double> kAlpha2Grid{0.2, 0.3, 0.4, 0.5, 0.6, 0.65, 0.7};

TruthfulnessLabel avg_similarity_label(double mean_similarity, const ThresholdConfig& thresholds) {
    if (mean_similarity >= thresholds.alpha1) return TruthfulnessLabel::Supported;
    if (mean_similarity < thresholds.alpha2) return TruthfulnessLabel::Refuted;
    return TruthfulnessLabel::Nei;
}

TruthfulnessLabel avg_similarity_baseline(std::string_view claim,
                                          const std::vector<TextEvidenceItem>& text_evidence,
                                          const std::vector<ImageEvidenceItem>& image_evidence,
                                          const ThresholdConfig& thresholds,
                                          const EncoderBackend& backend) {
    if (text_evidence.empty() && image_evidence.empty()) return TruthfulnessLabel::Nei;
    const Vec claim_emb = backend.embed_text(claim);
    double sum = 0.0;
    std::size_t count = 0;
    for (const TextEvidenceItem& item : text_evidence) {
        sum += cosine_similarity(claim_emb, backend.embed_text(item.text));
        ++count;
    }
    for (const ImageEvidenceItem& item : image_evidence) {
        sum += cosine_similarity(claim_emb, backend.embed_image(item.bytes));
        ++count;
    }
    return avg_similarity_label(sum / static_cast<double>(count), thresholds);
}

ThresholdConfig threshold_grid_search(const std::vector<double>& mean_similarities,
                                      const std::vector<TruthfulnessLabel>& golds,
                                      const std::vector<double>& alpha1_grid,
                                      const std::vector<double>& alpha2_grid) {
    if (mean_similarities.size() != golds.size() || golds.empty()) {
        throw LengthMismatch("similarities and gold labels must be non-empty and equal length");
    }
    ThresholdConfig best;
    double best_f1 = -1.0;
    for (double a1 : alpha1_grid) {
        for (double a2 : alpha2_grid) {
            if (!(a2 < a1)) continue;
            const ThresholdConfig t{a1, a2};
            std::vector<TruthfulnessLabel> preds;
            preds.reserve(mean_similarities.size());
            for (double s : mean_similarities) preds.push_back(avg_similarity_label(s, t));
            const double f1 = micro_f1(preds, golds);
            if (f1 > best_f1) {
                best_f1 = f1;
                best = t;
            }
        }
    }
    if (best_f1 < 0.0) throw LengthMismatch("threshold grids admit no pair with alpha2 < alpha1");
    return best;
}

}  // namespace factcheck

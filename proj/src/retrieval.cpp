#include "factcheck/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <unordered_set>

#include "factcheck/common.hpp"
#include "factcheck/jsonl.hpp"

namespace factcheck {

namespace {

bool entry_id_less(const SentenceEntry& a, const SentenceEntry& b) {
    if (a.doc_id != b.doc_id) return a.doc_id < b.doc_id;
    if (a.paragraph_index != b.paragraph_index) return a.paragraph_index < b.paragraph_index;
    return a.sentence_index < b.sentence_index;
}

Json descriptor_to_json(const BackendDescriptor& d) {
    Json j;
    j["kind"] = d.kind == BackendKind::Stub ? "stub" : "external";
    j["name"] = d.name;
    j["dim"] = d.dim;
    j["seed"] = d.seed;
    j["max_sequence_length"] = d.max_sequence_length;
    return j;
}

BackendDescriptor descriptor_from_json(const Json& j) {
    BackendDescriptor d;
    d.kind = j.at("kind").get<std::string>() == "stub" ? BackendKind::Stub : BackendKind::External;
    d.name = j.at("name").get<std::string>();
    d.dim = j.at("dim").get<std::size_t>();
    d.seed = j.at("seed").get<std::uint64_t>();
    d.max_sequence_length = j.at("max_sequence_length").get<std::size_t>();
    return d;
}

}  // namespace

std::string sentence_item_id(const SentenceEntry& entry) {
    return entry.doc_id + "#" + std::to_string(entry.paragraph_index) + "." +
           std::to_string(entry.sentence_index);
}

SentenceIndex build_text_index(const std::vector<CorpusDocument>& documents,
                               const EncoderBackend& backend) {
    SentenceIndex index;
    index.dim = backend.dim();
    index.backend = backend.descriptor();
    for (const CorpusDocument& doc : documents) {
        for (const SentenceRef& ref : doc.sentences) {
            SentenceEntry entry;
            entry.doc_id = doc.doc_id;
            entry.paragraph_index = ref.paragraph_index;
            entry.sentence_index = ref.sentence_index;
            entry.text = ref.text;
            entry.embedding = backend.embed_text(ref.text);
            index.entries.push_back(std::move(entry));
        }
    }
    return index;
}

ImageIndex build_image_index(const std::vector<CorpusImage>& images,
                             const std::filesystem::path& root, const EncoderBackend& backend) {
    ImageIndex index;
    index.dim = backend.dim();
    index.backend = backend.descriptor();
    for (const CorpusImage& image : images) {
        std::ifstream in(root / image.path, std::ios::binary);
        if (!in) throw UnreadableImage("cannot open image file " + (root / image.path).string());
        std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
        ImageEntry entry;
        entry.image_id = image.image_id;
        entry.embedding = backend.embed_image(bytes);
        index.entries.push_back(std::move(entry));
    }
    return index;
}

void save_text_index(const SentenceIndex& index, const std::filesystem::path& path) {
    JsonlWriter out(path);
    Json header;
    header["dim"] = index.dim;
    header["count"] = index.entries.size();
    header["backend"] = descriptor_to_json(index.backend);
    out.write(header);
    for (const SentenceEntry& entry : index.entries) {
        Json record;
        record["doc_id"] = entry.doc_id;
        record["paragraph_index"] = entry.paragraph_index;
        record["sentence_index"] = entry.sentence_index;
        record["text"] = entry.text;
        record["embedding"] = entry.embedding;
        out.write(record);
    }
}

SentenceIndex load_text_index(const std::filesystem::path& path) {
    SentenceIndex index;
    bool have_header = false;
    for_each_jsonl_record(
        path,
        [&](std::size_t, const Json& record) {
            if (!have_header) {
                index.dim = record.at("dim").get<std::size_t>();
                index.backend = descriptor_from_json(record.at("backend"));
                have_header = true;
                return;
            }
            SentenceEntry entry;
            entry.doc_id = record.at("doc_id").get<std::string>();
            entry.paragraph_index = record.at("paragraph_index").get<std::size_t>();
            entry.sentence_index = record.at("sentence_index").get<std::size_t>();
            entry.text = record.at("text").get<std::string>();
            entry.embedding = record.at("embedding").get<Vec>();
            index.entries.push_back(std::move(entry));
        },
        [&](std::size_t line, const std::string& what) {
            throw CorpusError("index file " + path.string() + ":" + std::to_string(line) + ": " + what);
        });
    return index;
}

void save_image_index(const ImageIndex& index, const std::filesystem::path& path) {
    JsonlWriter out(path);
    Json header;
    header["dim"] = index.dim;
    header["count"] = index.entries.size();
    header["backend"] = descriptor_to_json(index.backend);
    out.write(header);
    for (const ImageEntry& entry : index.entries) {
        Json record;
        record["image_id"] = entry.image_id;
        record["embedding"] = entry.embedding;
        out.write(record);
    }
}

ImageIndex load_image_index(const std::filesystem::path& path) {
    ImageIndex index;
    bool have_header = false;
    for_each_jsonl_record(
        path,
        [&](std::size_t, const Json& record) {
            if (!have_header) {
                index.dim = record.at("dim").get<std::size_t>();
                index.backend = descriptor_from_json(record.at("backend"));
                have_header = true;
                return;
            }
            ImageEntry entry;
            entry.image_id = record.at("image_id").get<std::string>();
            entry.embedding = record.at("embedding").get<Vec>();
            index.entries.push_back(std::move(entry));
        },
        [&](std::size_t line, const std::string& what) {
            throw CorpusError("index file " + path.string() + ":" + std::to_string(line) + ": " + what);
        });
    return index;
}

std::vector<Candidate> retrieve_text_candidates(std::string_view claim_text,
                                                const SentenceIndex& index, std::size_t n,
                                                const EncoderBackend& backend,
                                                const LinearHead* head) {
    if (index.entries.empty() || n == 0) return {};
    Vec claim = backend.embed_text(claim_text);
    if (head != nullptr) claim = head->apply(claim);

    std::vector<Candidate> scored;
    scored.reserve(index.entries.size());
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
        double score = head == nullptr
                           ? cosine_similarity(claim, index.entries[i].embedding)
                           : cosine_similarity(claim, head->apply(index.entries[i].embedding));
        scored.push_back({i, score});
    }
    auto better = [&](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return entry_id_less(index.entries[a.entry_index], index.entries[b.entry_index]);
    };
    const std::size_t keep = std::min(n, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(), better);
    scored.resize(keep);
    return scored;
}

RetrievalResult rerank_text(std::string_view claim_id, std::string_view claim_text,
                            const SentenceIndex& index, const std::vector<Candidate>& candidates,
                            std::size_t k, const EncoderBackend& backend) {
    std::vector<Candidate> rescored;
    rescored.reserve(candidates.size());
    for (const Candidate& c : candidates) {
        rescored.push_back({c.entry_index, backend.cross_score(claim_text, index.entries[c.entry_index].text)});
    }
    auto better = [&](const Candidate& a, const Candidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return entry_id_less(index.entries[a.entry_index], index.entries[b.entry_index]);
    };
    const std::size_t keep = std::min(k, rescored.size());
    std::partial_sort(rescored.begin(), rescored.begin() + keep, rescored.end(), better);
    rescored.resize(keep);

    RetrievalResult result;
    result.claim_id = std::string(claim_id);
    result.modality = Modality::Text;
    result.k = k;
    for (const Candidate& c : rescored) {
        result.ranked.push_back({sentence_item_id(index.entries[c.entry_index]), c.score});
    }
    return result;
}

RetrievalResult retrieve_images(std::string_view claim_id, std::string_view claim_text,
                                const ImageIndex& index, std::size_t k,
                                const EncoderBackend& backend,
                                const LinearHead* head) {
    RetrievalResult result;
    result.claim_id = std::string(claim_id);
    result.modality = Modality::Image;
    result.k = k;
    if (index.entries.empty() || k == 0) return result;

    Vec claim = backend.embed_text(claim_text);
    if (head != nullptr) claim = head->apply(claim);
    std::vector<std::size_t> order(index.entries.size());
    std::vector<double> scores(index.entries.size());
    for (std::size_t i = 0; i < index.entries.size(); ++i) {
        order[i] = i;
        scores[i] = head == nullptr
                        ? cosine_similarity(claim, index.entries[i].embedding)
                        : cosine_similarity(claim, head->apply(index.entries[i].embedding));
    }
    auto better = [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return index.entries[a].image_id < index.entries[b].image_id;
    };
    const std::size_t keep = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + keep, order.end(), better);
    for (std::size_t i = 0; i < keep; ++i) {
        result.ranked.push_back({index.entries[order[i]].image_id, scores[order[i]]});
    }
    return result;
}

double info_nce_loss(const Vec& claim_emb, const Vec& positive_emb,
                     const std::vector<Vec>& batch_embs) {
    if (batch_embs.empty()) throw EmptyBatch("contrastive batch is empty");
    bool found = false;
    Vec logits;
    logits.reserve(batch_embs.size());
    for (const Vec& t : batch_embs) {
        logits.push_back(cosine_similarity(claim_emb, t));
        found = found || t == positive_emb;
    }
    if (!found) throw MissingEmbedding("positive embedding is not a member of the batch");
    return logsumexp(logits) - cosine_similarity(claim_emb, positive_emb);
}

LinearHead LinearHead::identity(std::size_t d) {
    return LinearHead{Mat::identity(d)};
}

Vec LinearHead::apply(const Vec& v) const {
    return matvec(w, v);
}

namespace {

// d cos(u,v) / du = (v_hat - cos * u_hat) / |u|
Vec cosine_grad_u(const Vec& u, const Vec& v, double cos_uv) {
    const double nu = norm(u);
    const double nv = norm(v);
    Vec g(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        g[i] = (v[i] / nv - cos_uv * u[i] / nu) / nu;
    }
    return g;
}

void add_outer(Mat& acc, const Vec& a, const Vec& b, double scale) {
    for (std::size_t r = 0; r < acc.rows; ++r)
        for (std::size_t c = 0; c < acc.cols; ++c) acc.at(r, c) += scale * a[r] * b[c];
}

}  // namespace

RetrieverTrainResult train_retriever(const std::vector<TrainingPair>& pairs,
                                     const RetrievalConfig& config) {
    if (pairs.empty()) throw EmptyBatch("no training pairs");
    const std::size_t d = pairs.front().claim.size();
    for (const TrainingPair& p : pairs) {
        if (p.claim.size() != d || p.positive.size() != d) {
            throw ShapeMismatch("training pair dimensions disagree");
        }
    }

    RetrieverTrainResult result;
    result.head = LinearHead::identity(d);

    // One fixed shuffle for every epoch keeps batch composition, and with it
    // the in-batch negatives, stable: a zero learning rate then yields a flat
    // loss curve.
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(config.seed);
    rng.shuffle(order);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {

        std::deque<std::size_t> pending(order.begin(), order.end());
        double loss_sum = 0.0;
        std::size_t loss_count = 0;

        while (!pending.empty()) {
            std::vector<std::size_t> batch;
            std::deque<std::size_t> deferred;
            std::unordered_set<std::uint64_t> seen_positives;
            while (!pending.empty() && batch.size() < std::max<std::size_t>(config.batch_size, 1)) {
                const std::size_t idx = pending.front();
                pending.pop_front();
                const Vec& pos = pairs[idx].positive;
                const std::uint64_t key = fnv1a(pos.data(), pos.size() * sizeof(double));
                if (seen_positives.count(key) > 0) {
                    deferred.push_back(idx);
                } else {
                    seen_positives.insert(key);
                    batch.push_back(idx);
                }
            }
            for (auto it = deferred.rbegin(); it != deferred.rend(); ++it) pending.push_front(*it);

            const std::size_t b = batch.size();
            std::vector<Vec> u(b), v(b);
            for (std::size_t i = 0; i < b; ++i) {
                u[i] = result.head.apply(pairs[batch[i]].claim);
                v[i] = result.head.apply(pairs[batch[i]].positive);
            }

            Mat grad(d, d);
            double batch_loss = 0.0;
            for (std::size_t i = 0; i < b; ++i) {
                Vec sims(b);
                for (std::size_t j = 0; j < b; ++j) sims[j] = cosine_similarity(u[i], v[j]);
                const double lse = logsumexp(sims);
                batch_loss += lse - sims[i];

                for (std::size_t j = 0; j < b; ++j) {
                    const double q = std::exp(sims[j] - lse) - (j == i ? 1.0 : 0.0);
                    if (q == 0.0) continue;
                    const Vec du = cosine_grad_u(u[i], v[j], sims[j]);
                    const Vec dv = cosine_grad_u(v[j], u[i], sims[j]);
                    const double scale = q / static_cast<double>(b);
                    add_outer(grad, du, pairs[batch[i]].claim, scale);
                    add_outer(grad, dv, pairs[batch[j]].positive, scale);
                }
            }
            batch_loss /= static_cast<double>(b);
            if (!std::isfinite(batch_loss)) {
                throw NonFiniteLoss("contrastive loss became non-finite at epoch " +
                                    std::to_string(epoch) + " (batch of " + std::to_string(b) + ")");
            }
            loss_sum += batch_loss;
            ++loss_count;

            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < d; ++c)
                    result.head.w.at(r, c) -= config.learning_rate * grad.at(r, c);
        }
        result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(loss_count));
    }
    return result;
}

RetrieverTrainResult train_retriever(const std::vector<std::pair<std::string, std::string>>& pairs,
                                     const RetrievalConfig& config, const EncoderBackend& backend) {
    std::vector<TrainingPair> embedded;
    embedded.reserve(pairs.size());
    for (const auto& [claim, positive] : pairs) {
        embedded.push_back({backend.embed_text(claim), backend.embed_text(positive)});
    }
    return train_retriever(embedded, config);
}

}  // namespace factcheck

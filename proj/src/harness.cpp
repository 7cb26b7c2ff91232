#include "factcheck/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "factcheck/common.hpp"
#include "factcheck/jsonl.hpp"

namespace factcheck {

namespace {

std::string format_metric(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

std::string format_double_key(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

[[noreturn]] void schema_fail(const std::filesystem::path& path, std::size_t line,
                              const std::string& what) {
    throw SchemaMismatch(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::optional<std::size_t> parse_index(std::string_view digits) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || digits.empty()) return std::nullopt;
    return value;
}

struct SentenceId {
    std::string doc_id;
    std::size_t paragraph_index = 0;
    std::size_t sentence_index = 0;
};

std::optional<SentenceId> parse_sentence_id(std::string_view id) {
    const std::size_t hash = id.rfind('#');
    if (hash == std::string_view::npos || hash == 0 || hash + 1 >= id.size()) return std::nullopt;
    const std::string_view rest = id.substr(hash + 1);
    const std::size_t dot = rest.find('.');
    if (dot == std::string_view::npos) return std::nullopt;
    const auto p = parse_index(rest.substr(0, dot));
    const auto s = parse_index(rest.substr(dot + 1));
    if (!p || !s) return std::nullopt;
    return SentenceId{std::string(id.substr(0, hash)), *p, *s};
}

const std::string* resolve_sentence_text(const Corpus& corpus, const SentenceId& id) {
    const CorpusDocument* doc = corpus.find_document(id.doc_id);
    if (doc == nullptr) return nullptr;
    for (const SentenceRef& s : doc->sentences) {
        if (s.paragraph_index == id.paragraph_index && s.sentence_index == id.sentence_index) {
            return &s.text;
        }
    }
    return nullptr;
}

std::vector<std::uint8_t> read_image_bytes(const std::filesystem::path& root,
                                           const CorpusImage& image) {
    const std::filesystem::path path = root / image.path;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UnreadableImage("cannot open image file " + path.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

std::string iso8601_utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buf;
}

std::string hash_hex(std::uint64_t hash) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace

std::string to_string(EvidenceMode mode) {
    return mode == EvidenceMode::Gold ? "gold" : "system";
}

std::string to_string(EvidenceAblation ablation) {
    switch (ablation) {
        case EvidenceAblation::None: return "none";
        case EvidenceAblation::Text: return "text";
        case EvidenceAblation::Image: return "image";
        case EvidenceAblation::Both: return "both";
    }
    return "both";
}

std::string to_string(PipelineStage stage) {
    switch (stage) {
        case PipelineStage::Retrieval: return "retrieval";
        case PipelineStage::Verification: return "verification";
        case PipelineStage::Generation: return "generation";
    }
    return "retrieval";
}

EvidenceMode evidence_mode_from_string(std::string_view s) {
    const std::string lowered = to_lower(s);
    if (lowered == "gold") return EvidenceMode::Gold;
    if (lowered == "system") return EvidenceMode::System;
    throw ConfigError("evidence mode '" + std::string(s) + "' is not gold|system");
}

EvidenceAblation ablation_from_string(std::string_view s) {
    const std::string lowered = to_lower(s);
    if (lowered == "none") return EvidenceAblation::None;
    if (lowered == "text") return EvidenceAblation::Text;
    if (lowered == "image") return EvidenceAblation::Image;
    if (lowered == "both") return EvidenceAblation::Both;
    throw ConfigError("evidence ablation '" + std::string(s) + "' is not none|text|image|both");
}

PipelineStage stage_from_string(std::string_view s) {
    const std::string lowered = to_lower(s);
    if (lowered == "retrieval") return PipelineStage::Retrieval;
    if (lowered == "verification") return PipelineStage::Verification;
    if (lowered == "generation") return PipelineStage::Generation;
    throw ConfigError("stage '" + std::string(s) + "' is not retrieval|verification|generation");
}

TruthfulnessSource truthfulness_source_from_string(std::string_view s) {
    const std::string lowered = to_lower(s);
    if (lowered == "gold") return TruthfulnessSource::Gold;
    if (lowered == "system") return TruthfulnessSource::System;
    throw ConfigError("truthfulness source '" + std::string(s) + "' is not gold|system");
}

std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage) {
    return splitmix64(root_seed ^ fnv1a(stage));
}

PipelineConfig PipelineConfig::from_config(const Config& config) {
    PipelineConfig out;
    out.corpus_root = config.get_string("corpus.root");
    out.seed = config.get_uint("seed", 0);

    const std::string backend_name = to_lower(config.get_string("backend.name", "stub"));
    out.backend.kind = backend_name == "stub" ? BackendKind::Stub : BackendKind::External;
    out.backend.name = backend_name;
    out.backend.dim = config.get_uint("backend.dim", out.backend.dim);
    out.backend.seed = config.get_uint("backend.seed", out.backend.seed);
    out.backend.max_sequence_length =
        config.get_uint("backend.max_sequence_length", out.backend.max_sequence_length);
    if (out.backend.dim == 0) throw ConfigError("config key 'backend.dim': must be positive");

    out.retrieval.candidate_n = config.get_uint("retrieval.candidate_n", out.retrieval.candidate_n);
    out.retrieval.k = config.get_uint("retrieval.k", out.retrieval.k);
    out.retrieval.batch_size = config.get_uint("retrieval.batch_size", out.retrieval.batch_size);
    out.retrieval.learning_rate =
        config.get_double("retrieval.learning_rate", out.retrieval.learning_rate);
    out.retrieval.epochs = config.get_uint("retrieval.epochs", out.retrieval.epochs);
    out.retrieval.seed = stage_seed(out.seed, "retrieval");

    out.verifier.epochs = config.get_uint("verifier.epochs", out.verifier.epochs);
    out.verifier.batch_size = config.get_uint("verifier.batch_size", out.verifier.batch_size);
    out.verifier.learning_rate =
        config.get_double("verifier.learning_rate", out.verifier.learning_rate);
    out.verifier.init_scale = config.get_double("verifier.init_scale", out.verifier.init_scale);
    out.verifier.seed = stage_seed(out.seed, "verification");

    out.generator.nll_epochs = config.get_uint("generation.nll_epochs", out.generator.nll_epochs);
    out.generator.rl_epochs = config.get_uint("generation.rl_epochs", out.generator.rl_epochs);
    out.generator.batch_size = config.get_uint("generation.batch_size", out.generator.batch_size);
    out.generator.nll_learning_rate =
        config.get_double("generation.nll_learning_rate", out.generator.nll_learning_rate);
    out.generator.rl_learning_rate =
        config.get_double("generation.rl_learning_rate", out.generator.rl_learning_rate);
    out.generator.max_output_length =
        config.get_uint("generation.max_output_length", out.generator.max_output_length);
    out.generator.seed = stage_seed(out.seed, "generation");
    out.generation_input_budget =
        config.get_uint("generation.input_budget", out.generation_input_budget);

    out.reward.epochs = config.get_uint("reward.epochs", out.reward.epochs);
    out.reward.learning_rate = config.get_double("reward.learning_rate", out.reward.learning_rate);
    out.reward.dev_fraction = config.get_double("reward.dev_fraction", out.reward.dev_fraction);
    out.reward.seed = stage_seed(out.seed, "reward");

    out.evidence_mode = evidence_mode_from_string(config.get_string("mode.evidence", "system"));
    out.truthfulness_mode =
        truthfulness_source_from_string(config.get_string("mode.truthfulness", "system"));
    out.ablation = ablation_from_string(config.get_string("mode.ablation", "both"));
    out.eval_split = config.get_string("eval.split", "test");

    if (config.has("report.ks")) {
        out.report_ks.clear();
        for (const std::string& part : split(config.get_string("report.ks"), ',')) {
            const std::string token = trim(part);
            const auto k = parse_index(token);
            if (!k || *k == 0) {
                throw ConfigError("config key 'report.ks': '" + token + "' is not a positive integer");
            }
            out.report_ks.push_back(*k);
        }
        if (out.report_ks.empty()) throw ConfigError("config key 'report.ks': empty list");
    }
    return out;
}

namespace {

// Inverse of from_config over the same keys; hashing this rendering makes the
// provenance fingerprint sensitive to every effective setting.
Config effective_config(const PipelineConfig& config) {
    Config out;
    out.set("corpus.root", config.corpus_root.string());
    out.set("seed", std::to_string(config.seed));
    out.set("backend.name", config.backend.name);
    out.set("backend.dim", std::to_string(config.backend.dim));
    out.set("backend.seed", std::to_string(config.backend.seed));
    out.set("backend.max_sequence_length", std::to_string(config.backend.max_sequence_length));
    out.set("retrieval.candidate_n", std::to_string(config.retrieval.candidate_n));
    out.set("retrieval.k", std::to_string(config.retrieval.k));
    out.set("retrieval.batch_size", std::to_string(config.retrieval.batch_size));
    out.set("retrieval.learning_rate", format_double_key(config.retrieval.learning_rate));
    out.set("retrieval.epochs", std::to_string(config.retrieval.epochs));
    out.set("verifier.epochs", std::to_string(config.verifier.epochs));
    out.set("verifier.batch_size", std::to_string(config.verifier.batch_size));
    out.set("verifier.learning_rate", format_double_key(config.verifier.learning_rate));
    out.set("verifier.init_scale", format_double_key(config.verifier.init_scale));
    out.set("generation.nll_epochs", std::to_string(config.generator.nll_epochs));
    out.set("generation.rl_epochs", std::to_string(config.generator.rl_epochs));
    out.set("generation.batch_size", std::to_string(config.generator.batch_size));
    out.set("generation.nll_learning_rate", format_double_key(config.generator.nll_learning_rate));
    out.set("generation.rl_learning_rate", format_double_key(config.generator.rl_learning_rate));
    out.set("generation.max_output_length", std::to_string(config.generator.max_output_length));
    out.set("generation.input_budget", std::to_string(config.generation_input_budget));
    out.set("reward.epochs", std::to_string(config.reward.epochs));
    out.set("reward.learning_rate", format_double_key(config.reward.learning_rate));
    out.set("reward.dev_fraction", format_double_key(config.reward.dev_fraction));
    out.set("mode.evidence", to_string(config.evidence_mode));
    out.set("mode.truthfulness", to_string(config.truthfulness_mode));
    out.set("mode.ablation", to_string(config.ablation));
    out.set("eval.split", config.eval_split);
    std::vector<std::string> ks;
    for (std::size_t k : config.report_ks) ks.push_back(std::to_string(k));
    out.set("report.ks", join(ks, ","));
    return out;
}

}  // namespace

void save_retrieval_predictions(const std::vector<RetrievalPrediction>& predictions,
                                const std::filesystem::path& path) {
    JsonlWriter writer(path);
    for (const RetrievalPrediction& pred : predictions) {
        Json record;
        record["claim_id"] = pred.claim_id;
        record["text"] = Json::array();
        for (const ScoredItem& item : pred.text) {
            record["text"].push_back({{"id", item.item_id}, {"score", item.score}});
        }
        record["images"] = Json::array();
        for (const ScoredItem& item : pred.images) {
            record["images"].push_back({{"id", item.item_id}, {"score", item.score}});
        }
        writer.write(record);
    }
    writer.close();
}

namespace {

std::vector<ScoredItem> scored_items_field(const Json& record, const char* field,
                                           const std::filesystem::path& path, std::size_t line) {
    std::vector<ScoredItem> items;
    if (!record.contains(field) || !record.at(field).is_array()) {
        schema_fail(path, line, std::string("missing array field '") + field + "'");
    }
    for (const Json& entry : record.at(field)) {
        if (!entry.is_object() || !entry.contains("id") || !entry.at("id").is_string() ||
            !entry.contains("score") || !entry.at("score").is_number()) {
            schema_fail(path, line, std::string("entry in '") + field + "' needs string id and numeric score");
        }
        items.push_back({entry.at("id").get<std::string>(), entry.at("score").get<double>()});
    }
    return items;
}

std::string claim_id_field(const Json& record, const std::filesystem::path& path, std::size_t line) {
    if (!record.is_object() || !record.contains("claim_id") || !record.at("claim_id").is_string()) {
        schema_fail(path, line, "missing string field 'claim_id'");
    }
    return record.at("claim_id").get<std::string>();
}

std::vector<std::string> string_list_field(const Json& record, const char* field,
                                           const std::filesystem::path& path, std::size_t line) {
    if (!record.contains(field) || !record.at(field).is_array()) {
        schema_fail(path, line, std::string("missing array field '") + field + "'");
    }
    std::vector<std::string> out;
    for (const Json& entry : record.at(field)) {
        if (!entry.is_string()) schema_fail(path, line, std::string("'") + field + "' holds a non-string");
        out.push_back(entry.get<std::string>());
    }
    return out;
}

std::string string_field(const Json& record, const char* field, const std::filesystem::path& path,
                         std::size_t line) {
    if (!record.contains(field) || !record.at(field).is_string()) {
        schema_fail(path, line, std::string("missing string field '") + field + "'");
    }
    return record.at(field).get<std::string>();
}

}  // namespace

std::vector<RetrievalPrediction> load_retrieval_predictions(const std::filesystem::path& path) {
    std::vector<RetrievalPrediction> predictions;
    for_each_jsonl_record(
        path,
        [&](std::size_t line, const Json& record) {
            RetrievalPrediction pred;
            pred.claim_id = claim_id_field(record, path, line);
            pred.text = scored_items_field(record, "text", path, line);
            pred.images = scored_items_field(record, "images", path, line);
            predictions.push_back(std::move(pred));
        },
        [&](std::size_t line, const std::string& what) { schema_fail(path, line, what); });
    return predictions;
}

void save_verification_predictions(const std::vector<VerificationPrediction>& predictions,
                                   const std::filesystem::path& path) {
    JsonlWriter writer(path);
    for (const VerificationPrediction& pred : predictions) {
        Json record;
        record["claim_id"] = pred.claim_id;
        record["probs"] = pred.probs;
        record["predicted"] = to_string(pred.predicted);
        record["text_evidence"] = pred.text_evidence;
        record["image_evidence"] = pred.image_evidence;
        writer.write(record);
    }
    writer.close();
}

std::vector<VerificationPrediction> load_verification_predictions(const std::filesystem::path& path) {
    std::vector<VerificationPrediction> predictions;
    for_each_jsonl_record(
        path,
        [&](std::size_t line, const Json& record) {
            VerificationPrediction pred;
            pred.claim_id = claim_id_field(record, path, line);
            if (!record.contains("probs") || !record.at("probs").is_array() ||
                record.at("probs").size() != kAllLabels.size()) {
                schema_fail(path, line, "field 'probs' must hold one probability per label");
            }
            for (const Json& p : record.at("probs")) {
                if (!p.is_number()) schema_fail(path, line, "'probs' holds a non-number");
                pred.probs.push_back(p.get<double>());
            }
            const auto label = label_from_string(string_field(record, "predicted", path, line));
            if (!label) schema_fail(path, line, "field 'predicted' is not a truthfulness label");
            pred.predicted = *label;
            pred.text_evidence = string_list_field(record, "text_evidence", path, line);
            pred.image_evidence = string_list_field(record, "image_evidence", path, line);
            predictions.push_back(std::move(pred));
        },
        [&](std::size_t line, const std::string& what) { schema_fail(path, line, what); });
    return predictions;
}

void save_generation_predictions(const std::vector<GenerationPrediction>& predictions,
                                 const std::filesystem::path& path) {
    JsonlWriter writer(path);
    for (const GenerationPrediction& pred : predictions) {
        Json record;
        record["claim_id"] = pred.claim_id;
        record["statement"] = pred.statement;
        record["label"] = to_string(pred.label_used);
        record["truthfulness"] = to_string(pred.truthfulness_source);
        record["evidence"] = to_string(pred.evidence_mode);
        writer.write(record);
    }
    writer.close();
}

std::vector<GenerationPrediction> load_generation_predictions(const std::filesystem::path& path) {
    std::vector<GenerationPrediction> predictions;
    for_each_jsonl_record(
        path,
        [&](std::size_t line, const Json& record) {
            GenerationPrediction pred;
            pred.claim_id = claim_id_field(record, path, line);
            pred.statement = string_field(record, "statement", path, line);
            const auto label = label_from_string(string_field(record, "label", path, line));
            if (!label) schema_fail(path, line, "field 'label' is not a truthfulness label");
            pred.label_used = *label;
            const std::string truthfulness = string_field(record, "truthfulness", path, line);
            if (truthfulness == "gold") pred.truthfulness_source = TruthfulnessSource::Gold;
            else if (truthfulness == "system") pred.truthfulness_source = TruthfulnessSource::System;
            else schema_fail(path, line, "field 'truthfulness' is not gold|system");
            const std::string evidence = string_field(record, "evidence", path, line);
            if (evidence == "gold") pred.evidence_mode = EvidenceMode::Gold;
            else if (evidence == "system") pred.evidence_mode = EvidenceMode::System;
            else schema_fail(path, line, "field 'evidence' is not gold|system");
            predictions.push_back(std::move(pred));
        },
        [&](std::size_t line, const std::string& what) { schema_fail(path, line, what); });
    return predictions;
}

std::vector<ReportSection> evaluate_retrieval_stage(const std::vector<RetrievalPrediction>& predictions,
                                                    const Corpus& corpus,
                                                    const std::vector<std::size_t>& ks,
                                                    const EncoderBackend& backend) {
    std::vector<RetrievalJudgment> text_judgments;
    std::vector<RetrievalJudgment> image_judgments;
    EmbeddingLookup text_embeddings;

    for (const RetrievalPrediction& pred : predictions) {
        const Claim* claim = corpus.find_claim(pred.claim_id);
        if (claim == nullptr) {
            throw SchemaMismatch("retrieval predictions name unknown claim '" + pred.claim_id + "'");
        }

        RetrievalJudgment text_judgment;
        text_judgment.claim_id = pred.claim_id;
        // Gold paragraph key for crediting retrieved sentences.
        std::map<std::pair<std::string, std::size_t>, std::string> gold_paragraphs;
        for (const std::string& gid : claim->gold_text_evidence_ids) {
            const TextEvidence* evidence = corpus.find_text_evidence(gid);
            if (evidence == nullptr) {
                throw SchemaMismatch("claim '" + pred.claim_id + "' references unknown evidence '" + gid + "'");
            }
            text_judgment.gold_ids.insert(gid);
            gold_paragraphs.emplace(std::make_pair(evidence->doc_id, evidence->paragraph_index), gid);
            if (text_embeddings.find(gid) == text_embeddings.end()) {
                text_embeddings.emplace(gid, backend.embed_text(evidence->text));
            }
        }
        std::unordered_set<std::string> credited;
        for (const ScoredItem& item : pred.text) {
            const auto parsed = parse_sentence_id(item.item_id);
            if (!parsed) {
                throw SchemaMismatch("retrieved text id '" + item.item_id + "' is not doc#p.s");
            }
            const auto gold = gold_paragraphs.find({parsed->doc_id, parsed->paragraph_index});
            if (gold != gold_paragraphs.end() && credited.insert(gold->second).second) {
                // First sentence from a gold paragraph counts as that evidence.
                text_judgment.retrieved.push_back(gold->second);
                continue;
            }
            const std::string* sentence = resolve_sentence_text(corpus, *parsed);
            if (sentence == nullptr) {
                throw SchemaMismatch("retrieved text id '" + item.item_id + "' is not in the corpus");
            }
            text_judgment.retrieved.push_back(item.item_id);
            if (text_embeddings.find(item.item_id) == text_embeddings.end()) {
                text_embeddings.emplace(item.item_id, backend.embed_text(*sentence));
            }
        }
        text_judgments.push_back(std::move(text_judgment));

        RetrievalJudgment image_judgment;
        image_judgment.claim_id = pred.claim_id;
        for (const std::string& gid : claim->gold_image_evidence_ids) image_judgment.gold_ids.insert(gid);
        for (const ScoredItem& item : pred.images) image_judgment.retrieved.push_back(item.item_id);
        image_judgments.push_back(std::move(image_judgment));
    }

    const std::vector<std::string> columns = {"k",   "recall",    "precision", "ndcg",
                                              "map", "s_recall",  "evaluated", "excluded"};
    ReportSection text_section{"retrieval/text", columns, {}};
    ReportSection image_section{"retrieval/image", columns, {}};
    for (std::size_t k : ks) {
        const RetrievalMetricsRow text_row = evaluate_retrieval(text_judgments, k, &text_embeddings);
        text_section.rows.push_back({std::to_string(k), format_metric(text_row.recall),
                                     format_metric(text_row.precision), format_metric(text_row.ndcg),
                                     format_metric(text_row.map),
                                     text_row.s_recall ? format_metric(*text_row.s_recall) : "-",
                                     std::to_string(text_row.evaluated),
                                     std::to_string(text_row.excluded)});
        const RetrievalMetricsRow image_row = evaluate_retrieval(image_judgments, k, nullptr);
        image_section.rows.push_back({std::to_string(k), format_metric(image_row.recall),
                                      format_metric(image_row.precision), format_metric(image_row.ndcg),
                                      format_metric(image_row.map), "-",
                                      std::to_string(image_row.evaluated),
                                      std::to_string(image_row.excluded)});
    }
    return {text_section, image_section};
}

ReportSection evaluate_verification_stage(const std::vector<VerificationPrediction>& predictions,
                                          const Corpus& corpus, EvidenceMode evidence_mode,
                                          EvidenceAblation ablation) {
    std::vector<TruthfulnessLabel> predicted;
    std::vector<TruthfulnessLabel> gold;
    for (const VerificationPrediction& pred : predictions) {
        const Claim* claim = corpus.find_claim(pred.claim_id);
        if (claim == nullptr) {
            throw SchemaMismatch("verification predictions name unknown claim '" + pred.claim_id + "'");
        }
        predicted.push_back(pred.predicted);
        gold.push_back(claim->label);
    }
    ReportSection section{"verification", {"evidence", "ablation", "micro_f1", "claims"}, {}};
    if (!predicted.empty()) {
        section.rows.push_back({to_string(evidence_mode), to_string(ablation),
                                format_metric(micro_f1(predicted, gold)),
                                std::to_string(predicted.size())});
    }
    return section;
}

ReportSection evaluate_generation_stage(const std::vector<GenerationPrediction>& predictions,
                                        const Corpus& corpus, const EncoderBackend& backend) {
    struct Bucket {
        double rouge1 = 0.0;
        double rouge2 = 0.0;
        double rouge_l = 0.0;
        double emb = 0.0;
        std::vector<GenerationPair> pairs;
        std::size_t evaluated = 0;
        std::size_t excluded = 0;
    };
    std::map<std::pair<std::string, std::string>, Bucket> buckets;

    for (const GenerationPrediction& pred : predictions) {
        const Claim* claim = corpus.find_claim(pred.claim_id);
        if (claim == nullptr) {
            throw SchemaMismatch("generation predictions name unknown claim '" + pred.claim_id + "'");
        }
        Bucket& bucket =
            buckets[{to_string(pred.evidence_mode), to_string(pred.truthfulness_source)}];
        if (!claim->ruling_statement || metric_tokenize(*claim->ruling_statement).empty()) {
            ++bucket.excluded;
            continue;
        }
        ++bucket.evaluated;
        const std::string& reference = *claim->ruling_statement;
        // An empty statement earns zero on every metric rather than an error.
        if (metric_tokenize(pred.statement).empty()) continue;
        bucket.rouge1 += rouge_n(pred.statement, reference, 1).f;
        bucket.rouge2 += rouge_n(pred.statement, reference, 2).f;
        bucket.rouge_l += rouge_l(pred.statement, reference).f;
        bucket.emb += embedding_similarity(pred.statement, reference, backend);
        bucket.pairs.push_back({pred.statement, reference});
    }

    ReportSection section{"generation",
                          {"evidence", "truthfulness", "rouge1_f", "rouge2_f", "rougeL_f", "bleu",
                           "embedding_sim", "evaluated", "excluded"},
                          {}};
    for (const auto& [mode, bucket] : buckets) {
        const double count = bucket.evaluated > 0 ? static_cast<double>(bucket.evaluated) : 1.0;
        section.rows.push_back({mode.first, mode.second, format_metric(bucket.rouge1 / count),
                                format_metric(bucket.rouge2 / count),
                                format_metric(bucket.rouge_l / count),
                                format_metric(bucket.pairs.empty() ? 0.0 : corpus_bleu(bucket.pairs)),
                                format_metric(bucket.emb / count), std::to_string(bucket.evaluated),
                                std::to_string(bucket.excluded)});
    }
    return section;
}

std::vector<ReportSection> evaluate_stage(PipelineStage stage, const std::filesystem::path& predictions,
                                          const Corpus& gold, const PipelineConfig& config) {
    const auto backend = make_backend(config.backend);
    switch (stage) {
        case PipelineStage::Retrieval:
            return evaluate_retrieval_stage(load_retrieval_predictions(predictions), gold,
                                            config.report_ks, *backend);
        case PipelineStage::Verification:
            return {evaluate_verification_stage(load_verification_predictions(predictions), gold,
                                                config.evidence_mode, config.ablation)};
        case PipelineStage::Generation:
            return {evaluate_generation_stage(load_generation_predictions(predictions), gold,
                                              *backend)};
    }
    return {};
}

ValidationReport validate_dataset(const std::filesystem::path& root) {
    // load_corpus already folds the referential checks into the report.
    ValidationReport report;
    (void)load_corpus(root, &report);
    return report;
}

std::string render_report(const std::vector<ReportSection>& sections) {
    std::string out;
    for (const ReportSection& section : sections) {
        if (!out.empty()) out += '\n';
        out += '[' + section.title + "]\n";
        out += join(section.columns, "\t");
        out += '\n';
        for (const auto& row : section.rows) {
            out += join(row, "\t");
            out += '\n';
        }
    }
    return out;
}

namespace {

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

template <typename Fn>
auto guard_stage(const char* stage, const std::string& claim_id, Fn&& fn) {
    try {
        return fn();
    } catch (const StageFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure(stage, claim_id, e.what());
    }
}

}  // namespace

PipelineReport run_end_to_end(const PipelineConfig& config, const std::filesystem::path& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir / "predictions");
    std::ofstream log(out_dir / "pipeline.log");

    PipelineReport report;
    report.config_hash = effective_config(config).hash();
    report.seed = config.seed;

    const auto write_provenance = [&] {
        Json provenance;
        provenance["config_hash"] = hash_hex(report.config_hash);
        provenance["seed"] = report.seed;
        provenance["created_at"] = iso8601_utc_now();
        provenance["stages"] = Json::array();
        for (const StageStatus& stage : report.stages) {
            provenance["stages"].push_back({{"name", stage.name},
                                            {"bypassed", stage.bypassed},
                                            {"seed", stage.seed},
                                            {"detail", stage.detail}});
        }
        write_text_file(out_dir / "provenance.json", provenance.dump(2) + "\n");
    };
    const auto flush_report = [&] {
        write_text_file(out_dir / "report.tsv", render_report(report.sections));
        write_provenance();
    };

    // Corpus
    ValidationReport validation;
    Corpus corpus = guard_stage("corpus", "", [&] { return load_corpus(config.corpus_root, &validation); });
    if (!validation.ok()) {
        throw StageFailure("corpus", "",
                           std::to_string(validation.issues.size()) + " validation issue(s); first: " +
                               validation.issues.front().message);
    }
    if (!corpus.splits) {
        throw StageFailure("corpus", "", "corpus has no split table; ingest it first");
    }
    const CorpusStats stats = corpus.stats();
    log << "[corpus] claims=" << stats.claims << " documents=" << stats.documents
        << " sentences=" << stats.sentences << " evidence=" << stats.text_evidence
        << " images=" << stats.images << "\n";

    const std::vector<std::string> train_ids = corpus.claim_ids_in_split("train");
    const std::vector<std::string> eval_ids =
        guard_stage("corpus", "", [&] { return corpus.claim_ids_in_split(config.eval_split); });
    if (eval_ids.empty()) {
        throw StageFailure("corpus", "", "eval split '" + config.eval_split + "' is empty");
    }
    log << "[corpus] train=" << train_ids.size() << " eval(" << config.eval_split
        << ")=" << eval_ids.size() << "\n";

    const auto backend = make_backend(config.backend);

    std::unordered_map<std::string, std::vector<std::uint8_t>> image_cache;
    const auto image_bytes = [&](const std::string& image_id) -> const std::vector<std::uint8_t>& {
        const auto cached = image_cache.find(image_id);
        if (cached != image_cache.end()) return cached->second;
        const CorpusImage* image = corpus.find_image(image_id);
        if (image == nullptr) throw UnreadableImage("unknown image id '" + image_id + "'");
        return image_cache.emplace(image_id, read_image_bytes(config.corpus_root, *image)).first->second;
    };
    const auto gold_text_items = [&](const Claim& claim) {
        std::vector<TextEvidenceItem> items;
        for (const std::string& gid : claim.gold_text_evidence_ids) {
            const TextEvidence* evidence = corpus.find_text_evidence(gid);
            if (evidence != nullptr) items.push_back({gid, evidence->text});
        }
        return items;
    };
    const auto gold_image_items = [&](const Claim& claim) {
        std::vector<ImageEvidenceItem> items;
        for (const std::string& gid : claim.gold_image_evidence_ids) {
            items.push_back({gid, image_bytes(gid)});
        }
        return items;
    };
    // The verifier sees evidence through the configured ablation; None swaps
    // in the claim itself so the stance head runs claim-only.
    const auto ablate = [&](const Claim& claim, std::vector<TextEvidenceItem>& text,
                            std::vector<ImageEvidenceItem>& images) {
        switch (config.ablation) {
            case EvidenceAblation::None:
                text.assign({TextEvidenceItem{claim.claim_id, claim.text}});
                images.clear();
                break;
            case EvidenceAblation::Text:
                images.clear();
                break;
            case EvidenceAblation::Image:
                text.clear();
                break;
            case EvidenceAblation::Both:
                break;
        }
    };

    // Retrieval
    const std::uint64_t retrieval_seed = stage_seed(config.seed, "retrieval");
    const bool run_retrieval = config.evidence_mode == EvidenceMode::System;
    SentenceIndex text_index;
    ImageIndex image_index;
    std::unordered_map<std::string, std::size_t> sentence_entry_by_id;
    std::unordered_map<std::string, const RetrievalPrediction*> retrieval_by_claim;
    if (run_retrieval) {
        LinearHead text_head;
        LinearHead image_head;
        bool have_text_head = false;
        bool have_image_head = false;
        std::size_t text_pairs_count = 0;
        std::size_t image_pairs_count = 0;
        guard_stage("retrieval", "", [&] {
            text_index = build_text_index(corpus.documents, *backend);
            image_index = build_image_index(corpus.images, config.corpus_root, *backend);
            for (std::size_t i = 0; i < text_index.entries.size(); ++i) {
                sentence_entry_by_id.emplace(sentence_item_id(text_index.entries[i]), i);
            }
            log << "[retrieval] index: " << text_index.entries.size() << " sentences, "
                << image_index.entries.size() << " images\n";

            RetrievalConfig rc = config.retrieval;
            rc.seed = retrieval_seed;
            std::vector<std::pair<std::string, std::string>> text_pairs;
            std::vector<TrainingPair> image_pairs;
            for (const std::string& id : train_ids) {
                const Claim* claim = corpus.find_claim(id);
                for (const TextEvidenceItem& item : gold_text_items(*claim)) {
                    text_pairs.emplace_back(claim->text, item.text);
                }
                for (const std::string& gid : claim->gold_image_evidence_ids) {
                    image_pairs.push_back(
                        {backend->embed_text(claim->text), backend->embed_image(image_bytes(gid))});
                }
            }
            text_pairs_count = text_pairs.size();
            image_pairs_count = image_pairs.size();
            if (!text_pairs.empty() && rc.epochs > 0) {
                const RetrieverTrainResult trained = train_retriever(text_pairs, rc, *backend);
                text_head = trained.head;
                have_text_head = true;
                log << "[retrieval] text head: " << text_pairs.size() << " pairs, final loss "
                    << format_metric(trained.epoch_mean_loss.back()) << "\n";
            }
            if (!image_pairs.empty() && rc.epochs > 0) {
                RetrievalConfig image_rc = rc;
                image_rc.seed = splitmix64(rc.seed ^ fnv1a("image"));
                const RetrieverTrainResult trained = train_retriever(image_pairs, image_rc);
                image_head = trained.head;
                have_image_head = true;
                log << "[retrieval] image head: " << image_pairs.size() << " pairs, final loss "
                    << format_metric(trained.epoch_mean_loss.back()) << "\n";
            }
        });
        for (const std::string& id : eval_ids) {
            guard_stage("retrieval", id, [&] {
                const Claim* claim = corpus.find_claim(id);
                const auto candidates =
                    retrieve_text_candidates(claim->text, text_index, config.retrieval.candidate_n,
                                             *backend, have_text_head ? &text_head : nullptr);
                const RetrievalResult text = rerank_text(id, claim->text, text_index, candidates,
                                                         config.retrieval.k, *backend);
                const RetrievalResult images =
                    retrieve_images(id, claim->text, image_index, config.retrieval.k, *backend,
                                    have_image_head ? &image_head : nullptr);
                report.retrieval.push_back({id, text.ranked, images.ranked});
            });
        }
        guard_stage("retrieval", "", [&] {
            save_retrieval_predictions(report.retrieval, out_dir / "predictions" / "retrieval.jsonl");
            for (ReportSection& section :
                 evaluate_retrieval_stage(report.retrieval, corpus, config.report_ks, *backend)) {
                report.sections.push_back(std::move(section));
            }
        });
        for (const RetrievalPrediction& pred : report.retrieval) {
            retrieval_by_claim.emplace(pred.claim_id, &pred);
        }
        report.stages.push_back({"retrieval", false, retrieval_seed,
                                 "text pairs: " + std::to_string(text_pairs_count) +
                                     ", image pairs: " + std::to_string(image_pairs_count)});
        log << "[retrieval] wrote " << report.retrieval.size() << " prediction records\n";
    } else {
        report.stages.push_back({"retrieval", true, retrieval_seed, "gold evidence mode"});
        log << "[retrieval] bypassed (gold evidence mode)\n";
    }
    flush_report();

    // Evidence items a downstream stage sees for an eval claim.
    const auto evidence_for = [&](const Claim& claim) {
        std::pair<std::vector<TextEvidenceItem>, std::vector<ImageEvidenceItem>> evidence;
        if (config.evidence_mode == EvidenceMode::Gold) {
            evidence.first = gold_text_items(claim);
            evidence.second = gold_image_items(claim);
            return evidence;
        }
        const RetrievalPrediction* pred = retrieval_by_claim.at(claim.claim_id);
        for (const ScoredItem& item : pred->text) {
            evidence.first.push_back(
                {item.item_id, text_index.entries[sentence_entry_by_id.at(item.item_id)].text});
        }
        for (const ScoredItem& item : pred->images) {
            evidence.second.push_back({item.item_id, image_bytes(item.item_id)});
        }
        return evidence;
    };

    // Verification
    const std::uint64_t verification_seed = stage_seed(config.seed, "verification");
    const bool run_verification = config.truthfulness_mode == TruthfulnessSource::System;
    std::unordered_map<std::string, TruthfulnessLabel> predicted_labels;
    if (run_verification) {
        StanceDetectorParams params;
        guard_stage("verification", "", [&] {
            std::vector<VerifyExample> examples;
            for (const std::string& id : train_ids) {
                const Claim* claim = corpus.find_claim(id);
                std::vector<TextEvidenceItem> text = gold_text_items(*claim);
                std::vector<ImageEvidenceItem> images = gold_image_items(*claim);
                ablate(*claim, text, images);
                VerifyExample example;
                example.claim = claim->text;
                for (TextEvidenceItem& item : text) example.text_evidence.push_back(std::move(item.text));
                for (ImageEvidenceItem& item : images) example.image_evidence.push_back(std::move(item.bytes));
                example.label = claim->label;
                examples.push_back(std::move(example));
            }
            VerifierConfig vc = config.verifier;
            vc.seed = verification_seed;
            const VerifierTrainResult trained = train_verifier(examples, vc, *backend);
            params = trained.params;
            log << "[verification] trained on " << examples.size() << " examples, final loss "
                << (trained.epoch_mean_loss.empty() ? std::string("-")
                                                    : format_metric(trained.epoch_mean_loss.back()))
                << "\n";
        });
        for (const std::string& id : eval_ids) {
            guard_stage("verification", id, [&] {
                const Claim* claim = corpus.find_claim(id);
                auto [text, images] = evidence_for(*claim);
                ablate(*claim, text, images);
                const VerificationOutput out = verify_claim(claim->text, text, images, params, *backend);
                predicted_labels.emplace(id, out.predicted);
                report.verification.push_back(
                    {id, out.probs, out.predicted, out.text_evidence_used, out.image_evidence_used});
            });
        }
        guard_stage("verification", "", [&] {
            save_verification_predictions(report.verification,
                                          out_dir / "predictions" / "verification.jsonl");
            report.sections.push_back(evaluate_verification_stage(report.verification, corpus,
                                                                  config.evidence_mode, config.ablation));
        });
        report.stages.push_back({"verification", false, verification_seed,
                                 "trained on " + std::to_string(train_ids.size()) + " examples"});
        log << "[verification] wrote " << report.verification.size() << " prediction records\n";
    } else {
        report.stages.push_back({"verification", true, verification_seed, "gold truthfulness mode"});
        log << "[verification] bypassed (gold truthfulness mode)\n";
    }
    flush_report();

    // Generation
    const std::uint64_t generation_seed = stage_seed(config.seed, "generation");
    {
        CategoricalGenerator model({});
        guard_stage("generation", "", [&] {
            std::vector<GeneratorTrainExample> examples;
            std::vector<LabeledStatement> statements;
            for (const std::string& id : train_ids) {
                const Claim* claim = corpus.find_claim(id);
                if (!claim->ruling_statement || trim(*claim->ruling_statement).empty()) continue;
                std::vector<std::string> evidence;
                for (const TextEvidenceItem& item : gold_text_items(*claim)) evidence.push_back(item.text);
                GeneratorTrainExample example;
                example.input = build_generation_input(claim->text, claim->label, evidence,
                                                       TruthfulnessSource::Gold,
                                                       config.generation_input_budget);
                example.gold_statement = *claim->ruling_statement;
                example.gold_label = claim->label;
                examples.push_back(std::move(example));
                statements.push_back({*claim->ruling_statement, claim->label});
            }
            if (examples.empty()) {
                throw StageFailure("generation", "", "no training claim has a ruling statement");
            }
            GeneratorTrainConfig gc = config.generator;
            gc.seed = generation_seed;
            const BagOfTokensClassifier* classifier = nullptr;
            RewardClassifierTrainResult reward;
            if (gc.rl_epochs > 0) {
                RewardClassifierConfig rc = config.reward;
                rc.seed = stage_seed(config.seed, "reward");
                reward = train_reward_classifier(statements, rc);
                classifier = &reward.classifier;
                log << "[generation] reward classifier dev f1 " << format_metric(reward.dev_f1) << "\n";
            }
            const GeneratorTrainResult trained = train_generator(examples, gc, classifier);
            model = trained.model;
            log << "[generation] trained on " << examples.size() << " statements, final nll "
                << (trained.nll_epoch_mean_loss.empty()
                        ? std::string("-")
                        : format_metric(trained.nll_epoch_mean_loss.back()))
                << "\n";
        });
        for (const std::string& id : eval_ids) {
            guard_stage("generation", id, [&] {
                const Claim* claim = corpus.find_claim(id);
                const TruthfulnessLabel label = config.truthfulness_mode == TruthfulnessSource::Gold
                                                    ? claim->label
                                                    : predicted_labels.at(id);
                std::vector<std::string> evidence;
                if (config.evidence_mode == EvidenceMode::Gold) {
                    for (const TextEvidenceItem& item : gold_text_items(*claim)) {
                        evidence.push_back(item.text);
                    }
                } else {
                    const RetrievalPrediction* pred = retrieval_by_claim.at(id);
                    for (const ScoredItem& item : pred->text) {
                        evidence.push_back(text_index.entries[sentence_entry_by_id.at(item.item_id)].text);
                    }
                }
                const GenerationInput input =
                    build_generation_input(claim->text, label, evidence, config.truthfulness_mode,
                                           config.generation_input_budget);
                const std::string statement =
                    generate_statement(model, input, config.generator.max_output_length,
                                       splitmix64(generation_seed ^ fnv1a(id)));
                report.generation.push_back(
                    {id, statement, label, config.truthfulness_mode, config.evidence_mode});
            });
        }
        guard_stage("generation", "", [&] {
            save_generation_predictions(report.generation, out_dir / "predictions" / "generation.jsonl");
            report.sections.push_back(evaluate_generation_stage(report.generation, corpus, *backend));
        });
        report.stages.push_back({"generation", false, generation_seed,
                                 "generated " + std::to_string(report.generation.size()) + " statements"});
        log << "[generation] wrote " << report.generation.size() << " prediction records\n";
    }
    flush_report();
    log << "[pipeline] done\n";
    return report;
}

}  // namespace factcheck

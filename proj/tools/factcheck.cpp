#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "factcheck/common.hpp"
#include "factcheck/config.hpp"
#include "factcheck/corpus.hpp"
#include "factcheck/encoders.hpp"
#include "factcheck/errors.hpp"
#include "factcheck/generation.hpp"
#include "factcheck/harness.hpp"
#include "factcheck/retrieval.hpp"
#include "factcheck/verification.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;
using namespace factcheck;

namespace {

Config load_cli_config(const std::string& path) {
    Config config = Config::parse_file(path);
    config.apply_env_overrides();
    return config;
}

PipelineConfig load_pipeline_config(const std::string& path) {
    return PipelineConfig::from_config(load_cli_config(path));
}

// One claim id per line; blank lines and '#' comments are skipped.
std::vector<std::string> read_claim_ids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open claims file '" + path + "'");
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
            line.pop_back();
        }
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        if (line[start] == '#') continue;
        ids.push_back(line.substr(start));
    }
    return ids;
}

// --claims wins over the configured eval split.
std::vector<std::string> resolve_claim_ids(const Corpus& corpus, const std::string& claims_file,
                                           const std::string& split) {
    if (!claims_file.empty()) return read_claim_ids(claims_file);
    return corpus.claim_ids_in_split(split);
}

const Claim& claim_or_fail(const Corpus& corpus, const std::string& id) {
    const Claim* claim = corpus.find_claim(id);
    if (claim == nullptr) throw CorpusError("unknown claim id '" + id + "'");
    return *claim;
}

std::vector<std::uint8_t> image_bytes(const fs::path& root, const Corpus& corpus,
                                      const std::string& image_id) {
    const CorpusImage* image = corpus.find_image(image_id);
    if (image == nullptr) throw UnreadableImage("unknown image id '" + image_id + "'");
    std::ifstream in(root / image->path, std::ios::binary);
    if (!in) throw UnreadableImage("cannot open image file '" + (root / image->path).string() + "'");
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

std::size_t parse_index(std::string_view s) {
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw SchemaMismatch("'" + std::string(s) + "' is not an index");
    }
    return value;
}

// Retrieval emits paragraph-level evidence ids for credited hits and
// "doc#paragraph.sentence" ids otherwise; both resolve to their surface text.
std::string evidence_text_for(const Corpus& corpus, const std::string& item_id) {
    if (const TextEvidence* evidence = corpus.find_text_evidence(item_id)) return evidence->text;
    const std::size_t hash = item_id.rfind('#');
    const std::size_t dot = item_id.rfind('.');
    if (hash != std::string::npos && dot != std::string::npos && dot > hash) {
        const CorpusDocument* doc = corpus.find_document(item_id.substr(0, hash));
        if (doc != nullptr) {
            const std::size_t paragraph = parse_index(item_id.substr(hash + 1, dot - hash - 1));
            const std::size_t sentence = parse_index(item_id.substr(dot + 1));
            for (const SentenceRef& ref : doc->sentences) {
                if (ref.paragraph_index == paragraph && ref.sentence_index == sentence) return ref.text;
            }
        }
    }
    throw SchemaMismatch("evidence id '" + item_id + "' matches no evidence record or sentence");
}

// The verifier sees evidence through the configured ablation; None swaps in
// the claim itself so the stance head still has one unit to attend over.
void apply_ablation(EvidenceAblation ablation, const Claim& claim,
                    std::vector<TextEvidenceItem>& text, std::vector<ImageEvidenceItem>& images) {
    switch (ablation) {
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
}

std::vector<TextEvidenceItem> gold_text_items(const Corpus& corpus, const Claim& claim) {
    std::vector<TextEvidenceItem> items;
    for (const std::string& gid : claim.gold_text_evidence_ids) {
        const TextEvidence* evidence = corpus.find_text_evidence(gid);
        if (evidence != nullptr) items.push_back({gid, evidence->text});
    }
    return items;
}

std::vector<ImageEvidenceItem> gold_image_items(const fs::path& root, const Corpus& corpus,
                                                const Claim& claim) {
    std::vector<ImageEvidenceItem> items;
    for (const std::string& gid : claim.gold_image_evidence_ids) {
        items.push_back({gid, image_bytes(root, corpus, gid)});
    }
    return items;
}

// Model artifacts travel as tagged JSON so a mixed-up path fails loudly
// instead of silently misreading tensor data.

Json mat_to_json(const Mat& m) {
    return Json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

Mat mat_from_json(const Json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("rows") || !j.contains("cols") || !j.contains("data")) {
        throw SchemaMismatch(what + ": expected a matrix object");
    }
    Mat m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) throw SchemaMismatch(what + ": matrix size mismatch");
    return m;
}

Json read_artifact(const std::string& path, const std::string& kind) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw SchemaMismatch(path + ": " + e.what());
    }
    if (!j.is_object() || j.value("kind", "") != kind) {
        throw SchemaMismatch(path + ": expected a '" + kind + "' artifact");
    }
    return j;
}

void write_artifact(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write model file '" + path + "'");
    out << j.dump(2) << "\n";
}

void save_head(const LinearHead& head, const std::string& path) {
    write_artifact(Json{{"kind", "retrieval_head"}, {"w", mat_to_json(head.w)}}, path);
}

LinearHead load_head(const std::string& path) {
    const Json j = read_artifact(path, "retrieval_head");
    LinearHead head;
    head.w = mat_from_json(j.at("w"), path);
    return head;
}

void save_stance(const StanceDetectorParams& params, const std::string& path) {
    write_artifact(Json{{"kind", "stance_params"},
                        {"leaky_slope", params.leaky_slope},
                        {"fuse_weight", mat_to_json(params.fuse_weight)},
                        {"fuse_bias", params.fuse_bias},
                        {"cls_weight", mat_to_json(params.cls_weight)},
                        {"cls_bias", params.cls_bias}},
                   path);
}

StanceDetectorParams load_stance(const std::string& path) {
    const Json j = read_artifact(path, "stance_params");
    StanceDetectorParams params;
    params.leaky_slope = j.at("leaky_slope").get<double>();
    params.fuse_weight = mat_from_json(j.at("fuse_weight"), path);
    params.fuse_bias = j.at("fuse_bias").get<Vec>();
    params.cls_weight = mat_from_json(j.at("cls_weight"), path);
    params.cls_bias = j.at("cls_bias").get<Vec>();
    return params;
}

void save_generator(const CategoricalGenerator& model, const std::string& path) {
    write_artifact(Json{{"kind", "categorical_generator"},
                        {"vocabulary", model.vocabulary()},
                        {"logits", model.logits()}},
                   path);
}

CategoricalGenerator load_generator(const std::string& path) {
    const Json j = read_artifact(path, "categorical_generator");
    // The constructor re-seeds <eos>/<unk> and skips duplicates, so feeding
    // the saved vocabulary back reproduces the same token order.
    CategoricalGenerator model(j.at("vocabulary").get<std::vector<std::string>>());
    const Vec logits = j.at("logits").get<Vec>();
    if (logits.size() != model.vocabulary().size()) {
        throw SchemaMismatch(path + ": logits do not match the vocabulary");
    }
    model.logits() = logits;
    return model;
}

// Training-set assembly, shared by the train-* and on-the-fly paths. These
// mirror what the pipeline feeds each stage.

std::vector<std::pair<std::string, std::string>> retrieval_text_pairs(const Corpus& corpus) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const std::string& id : corpus.claim_ids_in_split("train")) {
        const Claim& claim = claim_or_fail(corpus, id);
        for (const TextEvidenceItem& item : gold_text_items(corpus, claim)) {
            pairs.emplace_back(claim.text, item.text);
        }
    }
    return pairs;
}

std::vector<TrainingPair> retrieval_image_pairs(const fs::path& root, const Corpus& corpus,
                                                const EncoderBackend& backend) {
    std::vector<TrainingPair> pairs;
    for (const std::string& id : corpus.claim_ids_in_split("train")) {
        const Claim& claim = claim_or_fail(corpus, id);
        for (const std::string& gid : claim.gold_image_evidence_ids) {
            pairs.push_back({backend.embed_text(claim.text),
                             backend.embed_image(image_bytes(root, corpus, gid))});
        }
    }
    return pairs;
}

std::vector<VerifyExample> verifier_examples(const PipelineConfig& config, const Corpus& corpus) {
    std::vector<VerifyExample> examples;
    for (const std::string& id : corpus.claim_ids_in_split("train")) {
        const Claim& claim = claim_or_fail(corpus, id);
        std::vector<TextEvidenceItem> text = gold_text_items(corpus, claim);
        std::vector<ImageEvidenceItem> images = gold_image_items(config.corpus_root, corpus, claim);
        apply_ablation(config.ablation, claim, text, images);
        VerifyExample example;
        example.claim = claim.text;
        for (TextEvidenceItem& item : text) example.text_evidence.push_back(std::move(item.text));
        for (ImageEvidenceItem& item : images) example.image_evidence.push_back(std::move(item.bytes));
        example.label = claim.label;
        examples.push_back(std::move(example));
    }
    return examples;
}

std::vector<GeneratorTrainExample> generator_examples(const PipelineConfig& config,
                                                      const Corpus& corpus) {
    std::vector<GeneratorTrainExample> examples;
    for (const std::string& id : corpus.claim_ids_in_split("train")) {
        const Claim& claim = claim_or_fail(corpus, id);
        if (!claim.ruling_statement) continue;
        if (claim.ruling_statement->find_first_not_of(" \t\r\n") == std::string::npos) continue;
        std::vector<std::string> texts;
        for (const TextEvidenceItem& item : gold_text_items(corpus, claim)) texts.push_back(item.text);
        GeneratorTrainExample example;
        example.input = build_generation_input(claim.text, claim.label, texts,
                                               TruthfulnessSource::Gold,
                                               config.generation_input_budget);
        example.gold_statement = *claim.ruling_statement;
        example.gold_label = claim.label;
        examples.push_back(std::move(example));
    }
    if (examples.empty()) throw ConfigError("no training claim has a ruling statement");
    return examples;
}

std::vector<LabeledStatement> reward_examples(const Corpus& corpus) {
    std::vector<LabeledStatement> examples;
    for (const std::string& id : corpus.claim_ids_in_split("train")) {
        const Claim& claim = claim_or_fail(corpus, id);
        if (claim.ruling_statement && !claim.ruling_statement->empty()) {
            examples.push_back({*claim.ruling_statement, claim.label});
        }
    }
    return examples;
}

void print_curve(const char* name, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::cout << name << " epoch " << (i + 1) << ": " << values[i] << "\n";
    }
}

// Command implementations. Each throws on failure; main reports and exits 1.

int cmd_ingest(const std::string& root, const std::string& label_map, const std::string& out,
               std::uint64_t seed, bool keep_unevidenced) {
    const LabelMap mapping = LabelMap::from_tsv_file(label_map);
    IngestOptions options;
    options.seed = seed;
    options.drop_claims_without_evidence = !keep_unevidenced;
    ValidationReport report;
    IngestResult result = ingest_from_disk(root, mapping, options, &report);
    const std::string target = out.empty() ? root : out;
    save_corpus(result.corpus, target);
    // Image bytes live beside the manifest; carry them over when the
    // normalized corpus lands in a different root.
    if (!fs::equivalent(fs::path(root), fs::path(target))) {
        for (const CorpusImage& image : result.corpus.images) {
            const fs::path source = fs::path(root) / image.path;
            const fs::path destination = fs::path(target) / image.path;
            fs::create_directories(destination.parent_path());
            fs::copy_file(source, destination, fs::copy_options::overwrite_existing);
        }
    }
    std::cout << "claims: " << result.summary.claims_in << " in, " << result.summary.claims_out
              << " out (" << result.summary.claims_dropped_label << " unmapped label, "
              << result.summary.claims_dropped_no_evidence << " without evidence)\n"
              << "images: " << result.summary.images_in << " in, " << result.summary.images_rejected
              << " rejected\n"
              << "issues: " << report.issues.size() << "\n"
              << "wrote corpus to " << target << "\n";
    return 0;
}

int cmd_validate(const std::string& root, bool strict) {
    const ValidationReport report = validate_dataset(root);
    for (const ValidationIssue& issue : report.issues) {
        std::cout << issue.code << " " << issue.file << ":" << issue.line << " " << issue.message
                  << "\n";
    }
    if (report.ok()) {
        std::cout << "ok\n";
        return 0;
    }
    std::cout << report.issues.size() << " issue(s)\n";
    return strict ? 1 : 0;
}

int cmd_train_retrieval(const std::string& config_path, const std::string& modality,
                        const std::string& out) {
    const PipelineConfig config = load_pipeline_config(config_path);
    const Corpus corpus = load_corpus(config.corpus_root);
    const auto backend = make_backend(config.backend);
    RetrievalConfig rc = config.retrieval;
    RetrieverTrainResult result;
    if (modality == "text") {
        const auto pairs = retrieval_text_pairs(corpus);
        std::cout << "training on " << pairs.size() << " text pairs\n";
        result = train_retriever(pairs, rc, *backend);
    } else {
        rc.seed = splitmix64(rc.seed ^ fnv1a("image"));
        const auto pairs = retrieval_image_pairs(config.corpus_root, corpus, *backend);
        std::cout << "training on " << pairs.size() << " image pairs\n";
        result = train_retriever(pairs, rc);
    }
    print_curve("loss", result.epoch_mean_loss);
    save_head(result.head, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_retrieve(const std::string& config_path, const std::string& claims_file, std::size_t k,
                 const std::string& head_path, const std::string& image_head_path,
                 const std::string& out) {
    const PipelineConfig config = load_pipeline_config(config_path);
    const Corpus corpus = load_corpus(config.corpus_root);
    const auto backend = make_backend(config.backend);
    const SentenceIndex text_index = build_text_index(corpus.documents, *backend);
    const ImageIndex image_index = build_image_index(corpus.images, config.corpus_root, *backend);

    std::optional<LinearHead> text_head;
    if (!head_path.empty()) text_head = load_head(head_path);
    std::optional<LinearHead> image_head;
    if (!image_head_path.empty()) image_head = load_head(image_head_path);
    const std::size_t top_k = k > 0 ? k : config.retrieval.k;

    std::vector<RetrievalPrediction> predictions;
    for (const std::string& id : resolve_claim_ids(corpus, claims_file, config.eval_split)) {
        const Claim& claim = claim_or_fail(corpus, id);
        const auto candidates =
            retrieve_text_candidates(claim.text, text_index, config.retrieval.candidate_n, *backend,
                                     text_head ? &*text_head : nullptr);
        const RetrievalResult text =
            rerank_text(id, claim.text, text_index, candidates, top_k, *backend);
        const RetrievalResult images = retrieve_images(id, claim.text, image_index, top_k, *backend,
                                                       image_head ? &*image_head : nullptr);
        predictions.push_back({id, text.ranked, images.ranked});
    }
    save_retrieval_predictions(predictions, out);
    std::cout << "wrote " << predictions.size() << " predictions to " << out << "\n";
    return 0;
}

int cmd_train_verify(const std::string& config_path, const std::string& out) {
    const PipelineConfig config = load_pipeline_config(config_path);
    const Corpus corpus = load_corpus(config.corpus_root);
    const auto backend = make_backend(config.backend);
    const auto examples = verifier_examples(config, corpus);
    std::cout << "training on " << examples.size() << " examples\n";
    const VerifierTrainResult result = train_verifier(examples, config.verifier, *backend);
    print_curve("loss", result.epoch_mean_loss);
    save_stance(result.params, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_verify(const std::string& config_path, const std::string& claims_file,
               const std::string& params_path, const std::string& retrieved_path,
               const std::string& evidence, const std::string& out) {
    const PipelineConfig config = load_pipeline_config(config_path);
    const Corpus corpus = load_corpus(config.corpus_root);
    const auto backend = make_backend(config.backend);
    const EvidenceMode mode =
        evidence.empty() ? config.evidence_mode : evidence_mode_from_string(evidence);

    std::unordered_map<std::string, RetrievalPrediction> retrieved;
    if (mode == EvidenceMode::System) {
        if (retrieved_path.empty()) {
            throw ConfigError("system evidence needs --retrieved (see the retrieve command)");
        }
        for (RetrievalPrediction& p : load_retrieval_predictions(retrieved_path)) {
            retrieved.emplace(p.claim_id, std::move(p));
        }
    }

    StanceDetectorParams params;
    if (!params_path.empty()) {
        params = load_stance(params_path);
    } else {
        const auto examples = verifier_examples(config, corpus);
        std::cout << "training on " << examples.size() << " examples\n";
        params = train_verifier(examples, config.verifier, *backend).params;
    }

    std::vector<VerificationPrediction> predictions;
    for (const std::string& id : resolve_claim_ids(corpus, claims_file, config.eval_split)) {
        const Claim& claim = claim_or_fail(corpus, id);
        std::vector<TextEvidenceItem> text;
        std::vector<ImageEvidenceItem> images;
        if (mode == EvidenceMode::Gold) {
            text = gold_text_items(corpus, claim);
            images = gold_image_items(config.corpus_root, corpus, claim);
        } else {
            const auto it = retrieved.find(id);
            if (it == retrieved.end()) {
                throw SchemaMismatch("no retrieval prediction for claim '" + id + "'");
            }
            for (const ScoredItem& item : it->second.text) {
                text.push_back({item.item_id, evidence_text_for(corpus, item.item_id)});
            }
            for (const ScoredItem& item : it->second.images) {
                images.push_back({item.item_id, image_bytes(config.corpus_root, corpus, item.item_id)});
            }
        }
        apply_ablation(config.ablation, claim, text, images);
        const VerificationOutput output = verify_claim(claim.text, text, images, params, *backend);
        predictions.push_back(
            {id, output.probs, output.predicted, output.text_evidence_used, output.image_evidence_used});
    }
    save_verification_predictions(predictions, out);
    std::cout << "wrote " << predictions.size() << " predictions to " << out << "\n";
    return 0;
}

int cmd_train_generate(const std::string& config_path, const std::string& phase,
                       const std::string& out) {
    const PipelineConfig config = load_pipeline_config(config_path);
    const Corpus corpus = load_corpus(config.corpus_root);
    const auto examples = generator_examples(config, corpus);
    std::cout << "training on " << examples.size() << " examples\n";

    GeneratorTrainConfig gc = config.generator;
    std::unique_ptr<BagOfTokensClassifier> classifier;
    if (phase == "nll") {
        gc.rl_epochs = 0;
    } else if (gc.rl_epochs > 0) {
        const auto statements = reward_examples(corpus);
        const RewardClassifierTrainResult reward =
            train_reward_classifier(statements, config.reward);
        std::cout << "reward classifier dev f1: " << reward.dev_f1 << "\n";
        classifier = std::make_unique<BagOfTokensClassifier>(reward.classifier);
    }
    const GeneratorTrainResult result = train_generator(examples, gc, classifier.get());
    print_curve("nll", result.nll_epoch_mean_loss);
    print_curve("reward", result.rl_epoch_mean_reward);
    save_generator(result.model, out);
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_generate(const std::string& config_path, const std::string& claims_file,
                 const std::string& model_path, const std::string& verified_path,
                 const std::string& retrieved_path, const std::string& evidence,
                 const std::string& truthfulness, const std::string& out) {
    const PipelineConfig config = load_pipeline_config(config_path);
    const Corpus corpus = load_corpus(config.corpus_root);
    const EvidenceMode evidence_mode =
        evidence.empty() ? config.evidence_mode : evidence_mode_from_string(evidence);
    const TruthfulnessSource truthfulness_mode =
        truthfulness.empty() ? config.truthfulness_mode
                             : truthfulness_source_from_string(truthfulness);

    std::unordered_map<std::string, RetrievalPrediction> retrieved;
    if (evidence_mode == EvidenceMode::System) {
        if (retrieved_path.empty()) {
            throw ConfigError("system evidence needs --retrieved (see the retrieve command)");
        }
        for (RetrievalPrediction& p : load_retrieval_predictions(retrieved_path)) {
            retrieved.emplace(p.claim_id, std::move(p));
        }
    }
    std::unordered_map<std::string, TruthfulnessLabel> predicted_labels;
    if (truthfulness_mode == TruthfulnessSource::System) {
        if (verified_path.empty()) {
            throw ConfigError("system truthfulness needs --verified (see the verify command)");
        }
        for (const VerificationPrediction& p : load_verification_predictions(verified_path)) {
            predicted_labels.emplace(p.claim_id, p.predicted);
        }
    }

    CategoricalGenerator model({});
    if (!model_path.empty()) {
        model = load_generator(model_path);
    } else {
        const auto examples = generator_examples(config, corpus);
        std::cout << "training on " << examples.size() << " examples\n";
        GeneratorTrainConfig gc = config.generator;
        std::unique_ptr<BagOfTokensClassifier> classifier;
        if (gc.rl_epochs > 0) {
            const RewardClassifierTrainResult reward =
                train_reward_classifier(reward_examples(corpus), config.reward);
            classifier = std::make_unique<BagOfTokensClassifier>(reward.classifier);
        }
        model = train_generator(examples, gc, classifier.get()).model;
    }

    std::vector<GenerationPrediction> predictions;
    for (const std::string& id : resolve_claim_ids(corpus, claims_file, config.eval_split)) {
        const Claim& claim = claim_or_fail(corpus, id);
        TruthfulnessLabel label = claim.label;
        if (truthfulness_mode == TruthfulnessSource::System) {
            const auto it = predicted_labels.find(id);
            if (it == predicted_labels.end()) {
                throw SchemaMismatch("no verification prediction for claim '" + id + "'");
            }
            label = it->second;
        }
        std::vector<std::string> texts;
        if (evidence_mode == EvidenceMode::Gold) {
            for (const TextEvidenceItem& item : gold_text_items(corpus, claim)) {
                texts.push_back(item.text);
            }
        } else {
            const auto it = retrieved.find(id);
            if (it == retrieved.end()) {
                throw SchemaMismatch("no retrieval prediction for claim '" + id + "'");
            }
            for (const ScoredItem& item : it->second.text) {
                texts.push_back(evidence_text_for(corpus, item.item_id));
            }
        }
        const GenerationInput input = build_generation_input(
            claim.text, label, texts, truthfulness_mode, config.generation_input_budget);
        const std::string statement = generate_statement(
            model, input, config.generator.max_output_length,
            splitmix64(config.generator.seed ^ fnv1a(id)));
        predictions.push_back({id, statement, label, truthfulness_mode, evidence_mode});
    }
    save_generation_predictions(predictions, out);
    std::cout << "wrote " << predictions.size() << " predictions to " << out << "\n";
    return 0;
}

int cmd_evaluate(const std::string& task, const std::string& pred, const std::string& gold_root,
                 const std::string& config_path, const std::vector<std::size_t>& ks,
                 const std::string& out) {
    PipelineConfig config;
    if (!config_path.empty()) {
        config = load_pipeline_config(config_path);
    } else {
        Config raw;
        raw.set("corpus.root", gold_root);
        config = PipelineConfig::from_config(raw);
    }
    config.corpus_root = gold_root;
    if (!ks.empty()) config.report_ks = ks;

    const Corpus corpus = load_corpus(config.corpus_root);
    const auto sections = evaluate_stage(stage_from_string(task), pred, corpus, config);
    const std::string rendered = render_report(sections);
    if (out.empty()) {
        std::cout << rendered;
    } else {
        std::ofstream file(out, std::ios::binary);
        if (!file) throw ConfigError("cannot write report file '" + out + "'");
        file << rendered;
        std::cout << "wrote " << out << "\n";
    }
    return 0;
}

int cmd_pipeline(const std::string& config_path, const std::string& out) {
    const PipelineConfig config = load_pipeline_config(config_path);
    const PipelineReport report = run_end_to_end(config, out);
    for (const StageStatus& stage : report.stages) {
        std::cout << stage.name << ": " << (stage.bypassed ? "bypassed" : "ran") << " ("
                  << stage.detail << ")\n";
    }
    std::cout << "report: " << (fs::path(out) / "report.tsv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal fact checking toolkit"};
    app.require_subcommand(1);
    int exit_code = 0;

    auto* ingest = app.add_subcommand("ingest", "normalize a raw dataset into the corpus layout");
    std::string ingest_root, ingest_map, ingest_out;
    std::uint64_t ingest_seed = 0;
    bool ingest_keep = false;
    ingest->add_option("--root", ingest_root, "raw dataset root")->required();
    ingest->add_option("--label-map", ingest_map, "raw label to canonical label TSV")->required();
    ingest->add_option("--out", ingest_out, "output corpus root (default: in place)");
    ingest->add_option("--seed", ingest_seed, "split shuffle seed");
    ingest->add_flag("--keep-unevidenced", ingest_keep, "keep claims without any gold evidence");
    ingest->callback(
        [&] { exit_code = cmd_ingest(ingest_root, ingest_map, ingest_out, ingest_seed, ingest_keep); });

    auto* validate = app.add_subcommand("validate", "check a corpus root and report issues");
    std::string validate_root;
    bool validate_strict = false;
    validate->add_option("--root", validate_root, "corpus root")->required();
    validate->add_flag("--strict", validate_strict, "exit nonzero when issues are found");
    validate->callback([&] { exit_code = cmd_validate(validate_root, validate_strict); });

    auto* train_retrieval =
        app.add_subcommand("train-retrieval", "train the retrieval projection head");
    std::string tr_config, tr_modality = "text", tr_out = "retrieval_head.json";
    train_retrieval->add_option("--config", tr_config, "pipeline config file")->required();
    train_retrieval->add_option("--modality", tr_modality, "text or image")
        ->check(CLI::IsMember({"text", "image"}));
    train_retrieval->add_option("--out", tr_out, "output head file");
    train_retrieval->callback([&] { exit_code = cmd_train_retrieval(tr_config, tr_modality, tr_out); });

    auto* retrieve = app.add_subcommand("retrieve", "rank evidence for claims");
    std::string re_config, re_claims, re_head, re_image_head, re_out;
    std::size_t re_k = 0;
    retrieve->add_option("--config", re_config, "pipeline config file")->required();
    retrieve->add_option("--claims", re_claims, "claim id list (default: configured eval split)");
    retrieve->add_option("--k", re_k, "results per modality (default: from config)");
    retrieve->add_option("--head", re_head, "trained text head file");
    retrieve->add_option("--image-head", re_image_head, "trained image head file");
    retrieve->add_option("--out", re_out, "output predictions file")->required();
    retrieve->callback(
        [&] { exit_code = cmd_retrieve(re_config, re_claims, re_k, re_head, re_image_head, re_out); });

    auto* train_verify = app.add_subcommand("train-verify", "train the stance verifier");
    std::string tv_config, tv_out = "stance_params.json";
    train_verify->add_option("--config", tv_config, "pipeline config file")->required();
    train_verify->add_option("--out", tv_out, "output parameters file");
    train_verify->callback([&] { exit_code = cmd_train_verify(tv_config, tv_out); });

    auto* verify = app.add_subcommand("verify", "predict truthfulness labels");
    std::string ve_config, ve_claims, ve_params, ve_retrieved, ve_evidence, ve_out;
    verify->add_option("--config", ve_config, "pipeline config file")->required();
    verify->add_option("--claims", ve_claims, "claim id list (default: configured eval split)");
    verify->add_option("--params", ve_params, "trained parameters file (default: train now)");
    verify->add_option("--retrieved", ve_retrieved, "retrieval predictions for system evidence");
    verify->add_option("--evidence", ve_evidence, "gold or system (default: from config)")
        ->check(CLI::IsMember({"gold", "system"}));
    verify->add_option("--out", ve_out, "output predictions file")->required();
    verify->callback([&] {
        exit_code = cmd_verify(ve_config, ve_claims, ve_params, ve_retrieved, ve_evidence, ve_out);
    });

    auto* train_generate = app.add_subcommand("train-generate", "train the explanation generator");
    std::string tg_config, tg_phase = "rl", tg_out = "generator.json";
    train_generate->add_option("--config", tg_config, "pipeline config file")->required();
    train_generate->add_option("--phase", tg_phase, "nll stops before reward tuning")
        ->check(CLI::IsMember({"nll", "rl"}));
    train_generate->add_option("--out", tg_out, "output model file");
    train_generate->callback([&] { exit_code = cmd_train_generate(tg_config, tg_phase, tg_out); });

    auto* generate = app.add_subcommand("generate", "produce ruling statements");
    std::string ge_config, ge_claims, ge_model, ge_verified, ge_retrieved, ge_evidence,
        ge_truthfulness, ge_out;
    generate->add_option("--config", ge_config, "pipeline config file")->required();
    generate->add_option("--claims", ge_claims, "claim id list (default: configured eval split)");
    generate->add_option("--model", ge_model, "trained model file (default: train now)");
    generate->add_option("--verified", ge_verified, "verification predictions for system truthfulness");
    generate->add_option("--retrieved", ge_retrieved, "retrieval predictions for system evidence");
    generate->add_option("--evidence", ge_evidence, "gold or system (default: from config)")
        ->check(CLI::IsMember({"gold", "system"}));
    generate->add_option("--truthfulness", ge_truthfulness, "gold or system (default: from config)")
        ->check(CLI::IsMember({"gold", "system"}));
    generate->add_option("--out", ge_out, "output predictions file")->required();
    generate->callback([&] {
        exit_code = cmd_generate(ge_config, ge_claims, ge_model, ge_verified, ge_retrieved,
                                 ge_evidence, ge_truthfulness, ge_out);
    });

    auto* evaluate = app.add_subcommand("evaluate", "score a prediction file");
    std::string ev_task, ev_pred, ev_gold, ev_config, ev_out;
    std::vector<std::size_t> ev_ks;
    evaluate->add_option("--task", ev_task, "retrieval, verification, or generation")
        ->required()
        ->check(CLI::IsMember({"retrieval", "verification", "generation"}));
    evaluate->add_option("--pred", ev_pred, "predictions file")->required();
    evaluate->add_option("--gold", ev_gold, "corpus root with the gold annotations")->required();
    evaluate->add_option("--config", ev_config, "pipeline config file (for backend and modes)");
    evaluate->add_option("--k", ev_ks, "report cutoffs (default: from config)");
    evaluate->add_option("--out", ev_out, "report file (default: stdout)");
    evaluate->callback(
        [&] { exit_code = cmd_evaluate(ev_task, ev_pred, ev_gold, ev_config, ev_ks, ev_out); });

    auto* pipeline = app.add_subcommand("pipeline", "run every stage end to end");
    std::string pi_config, pi_out;
    pipeline->add_option("--config", pi_config, "pipeline config file")->required();
    pipeline->add_option("--out", pi_out, "output directory")->required();
    pipeline->callback([&] { exit_code = cmd_pipeline(pi_config, pi_out); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}

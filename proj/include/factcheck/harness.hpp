#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "factcheck/config.hpp"
#include "factcheck/corpus.hpp"
#include "factcheck/encoders.hpp"
#include "factcheck/generation.hpp"
#include "factcheck/linalg.hpp"
#include "factcheck/metrics.hpp"
#include "factcheck/retrieval.hpp"
#include "factcheck/verification.hpp"

namespace factcheck {

// Where the evidence fed to verification and generation comes from: the
// annotated gold items or the system's own retrieval output.
enum class EvidenceMode { Gold, System };

// Which evidence the verifier sees. None replaces the evidence with the
// claim itself, so the stance head degenerates to claim-only.
enum class EvidenceAblation { None, Text, Image, Both };

enum class PipelineStage { Retrieval, Verification, Generation };

std::string to_string(EvidenceMode mode);
std::string to_string(EvidenceAblation ablation);
std::string to_string(PipelineStage stage);
EvidenceMode evidence_mode_from_string(std::string_view s);
EvidenceAblation ablation_from_string(std::string_view s);
PipelineStage stage_from_string(std::string_view s);
TruthfulnessSource truthfulness_source_from_string(std::string_view s);

struct PipelineConfig {
    std::filesystem::path corpus_root;
    BackendDescriptor backend;
    RetrievalConfig retrieval;
    VerifierConfig verifier;
    GeneratorTrainConfig generator;
    RewardClassifierConfig reward;
    EvidenceMode evidence_mode = EvidenceMode::System;
    TruthfulnessSource truthfulness_mode = TruthfulnessSource::System;
    EvidenceAblation ablation = EvidenceAblation::Both;
    std::size_t generation_input_budget = 512;
    std::vector<std::size_t> report_ks{5, 10};
    std::string eval_split = "test";
    std::uint64_t seed = 0;

    // Reads the dotted keys (corpus.root, backend.dim, retrieval.k,
    // mode.evidence, ...); unknown keys are ignored, bad values throw
    // ConfigError. The root seed fans out to every stage config.
    static PipelineConfig from_config(const Config& config);
};

// Per-stage seed derived from the root seed and the stage name, so stages
// draw independent streams and adding a stage never shifts the others.
std::uint64_t stage_seed(std::uint64_t root_seed, std::string_view stage);

struct StageStatus {
    std::string name;
    bool bypassed = false;
    std::uint64_t seed = 0;
    std::string detail;
};

struct RetrievalPrediction {
    std::string claim_id;
    std::vector<ScoredItem> text;
    std::vector<ScoredItem> images;

    bool operator==(const RetrievalPrediction&) const = default;
};

struct VerificationPrediction {
    std::string claim_id;
    Vec probs;
    TruthfulnessLabel predicted = TruthfulnessLabel::Nei;
    std::vector<std::string> text_evidence;
    std::vector<std::string> image_evidence;

    bool operator==(const VerificationPrediction&) const = default;
};

struct GenerationPrediction {
    std::string claim_id;
    std::string statement;
    TruthfulnessLabel label_used = TruthfulnessLabel::Nei;
    TruthfulnessSource truthfulness_source = TruthfulnessSource::Gold;
    EvidenceMode evidence_mode = EvidenceMode::Gold;

    bool operator==(const GenerationPrediction&) const = default;
};

// One titled block of report.tsv: a header row and formatted value rows.
struct ReportSection {
    std::string title;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

struct PipelineReport {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<StageStatus> stages;
    std::vector<RetrievalPrediction> retrieval;
    std::vector<VerificationPrediction> verification;
    std::vector<GenerationPrediction> generation;
    std::vector<ReportSection> sections;
};

// Prediction files are JSONL, one record per claim. Loaders throw
// SchemaMismatch with file and line context on malformed records.
void save_retrieval_predictions(const std::vector<RetrievalPrediction>& predictions,
                                const std::filesystem::path& path);
std::vector<RetrievalPrediction> load_retrieval_predictions(const std::filesystem::path& path);
void save_verification_predictions(const std::vector<VerificationPrediction>& predictions,
                                   const std::filesystem::path& path);
std::vector<VerificationPrediction> load_verification_predictions(const std::filesystem::path& path);
void save_generation_predictions(const std::vector<GenerationPrediction>& predictions,
                                 const std::filesystem::path& path);
std::vector<GenerationPrediction> load_generation_predictions(const std::filesystem::path& path);

// Retrieval rows per modality and cutoff. Retrieved sentences are credited
// against paragraph-level gold: the first ranked sentence from a gold
// paragraph takes that evidence id, later ones keep their sentence id so a
// paragraph is never counted twice. Claims with no gold in a modality are
// excluded from that modality's averages and reported in the excluded column.
std::vector<ReportSection> evaluate_retrieval_stage(const std::vector<RetrievalPrediction>& predictions,
                                                    const Corpus& corpus,
                                                    const std::vector<std::size_t>& ks,
                                                    const EncoderBackend& backend);

ReportSection evaluate_verification_stage(const std::vector<VerificationPrediction>& predictions,
                                          const Corpus& corpus, EvidenceMode evidence_mode,
                                          EvidenceAblation ablation);

// Scores statements against the gold ruling statements; claims without one
// are excluded and counted.
ReportSection evaluate_generation_stage(const std::vector<GenerationPrediction>& predictions,
                                        const Corpus& corpus, const EncoderBackend& backend);

// File-level wrapper behind `evaluate --task ...`: loads the stage's
// prediction file and scores it against the corpus.
std::vector<ReportSection> evaluate_stage(PipelineStage stage, const std::filesystem::path& predictions,
                                          const Corpus& gold, const PipelineConfig& config);

// Loads the corpus at root and runs every referential invariant.
ValidationReport validate_dataset(const std::filesystem::path& root);

std::string render_report(const std::vector<ReportSection>& sections);

// Runs corpus loading, retrieval, verification, and generation into out_dir:
// predictions/*.jsonl, report.tsv, provenance.json, pipeline.log. Gold modes
// bypass the corresponding system stage (recorded in provenance). Each
// stage's files are flushed before the next stage starts, so a later failure
// never corrupts them. Two runs with the same config and seed produce
// byte-identical prediction files.
PipelineReport run_end_to_end(const PipelineConfig& config, const std::filesystem::path& out_dir);

}  // namespace factcheck

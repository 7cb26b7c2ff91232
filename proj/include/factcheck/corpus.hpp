#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace factcheck {

enum class TruthfulnessLabel { Supported, Refuted, Nei };

inline constexpr std::array<TruthfulnessLabel, 3> kAllLabels = {
    TruthfulnessLabel::Supported, TruthfulnessLabel::Refuted, TruthfulnessLabel::Nei};

std::string to_string(TruthfulnessLabel label);
std::optional<TruthfulnessLabel> label_from_string(std::string_view s);
std::size_t label_index(TruthfulnessLabel label);

struct Claim {
    std::string claim_id;
    std::string text;
    TruthfulnessLabel label = TruthfulnessLabel::Nei;
    std::optional<std::string> ruling_statement;
    std::vector<std::string> gold_text_evidence_ids;
    std::vector<std::string> gold_image_evidence_ids;
    std::optional<std::string> source_url;

    bool operator==(const Claim&) const = default;
};

struct SentenceRef {
    std::size_t paragraph_index = 0;
    std::size_t sentence_index = 0;
    std::string text;

    bool operator==(const SentenceRef&) const = default;
};

struct CorpusDocument {
    std::string doc_id;
    std::optional<std::string> url;
    std::vector<std::string> paragraphs;
    std::vector<SentenceRef> sentences;  // derived from paragraphs at load time

    bool operator==(const CorpusDocument&) const = default;
};

struct CorpusImage {
    std::string image_id;
    std::string path;  // relative to the corpus root
    int width = 0;
    int height = 0;
    std::string source_name;

    bool operator==(const CorpusImage&) const = default;
};

struct TextEvidence {
    std::string evidence_id;
    std::string claim_id;
    std::string doc_id;
    std::size_t paragraph_index = 0;
    std::string text;

    bool operator==(const TextEvidence&) const = default;
};

struct Splits {
    std::set<std::string> train;
    std::set<std::string> dev;
    std::set<std::string> test;
    std::uint64_t seed = 0;

    bool operator==(const Splits&) const = default;
};

// Raw-label table: raw string -> canonical label, or nullopt for DROP.
// Shipped as data (label_map.tsv); the canonical names always map to
// themselves even when absent from the table.
class LabelMap {
public:
    void add(std::string raw, std::optional<TruthfulnessLabel> target);
    std::optional<TruthfulnessLabel> lookup(std::string_view raw) const;
    bool declared(std::string_view raw) const;

    static LabelMap from_tsv_file(const std::filesystem::path& path);
    void save_tsv(const std::filesystem::path& path) const;

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    bool operator==(const LabelMap& other) const { return entries_ == other.entries_; }

private:
    // Insertion-ordered so the table round-trips byte for byte.
    std::vector<std::pair<std::string, std::optional<TruthfulnessLabel>>> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Returns one of the three labels when `raw` is mapped; nullopt means the
// claim is dropped. Never throws.
std::optional<TruthfulnessLabel> map_raw_label(std::string_view raw, const LabelMap& mapping);

// Images are rejected when the file name contains any of these substrings
// (case-sensitive) or when min(width, height) < 400.
extern const std::array<std::string_view, 15> kImageRejectKeywords;
bool keep_image(std::string_view name, int width, int height);

// First paragraph starting with "Our ruling" or "In sum" after leading
// whitespace; the returned string is the stored paragraph itself.
std::optional<std::string> extract_ruling_summary(const CorpusDocument& article);

// Rule-based splitter: terminal [.!?] runs followed by whitespace close a
// sentence unless the preceding token is on the frozen abbreviation list and
// the next sentence must open with an uppercase letter, digit, quote or
// bracket. Joining the output with single spaces reproduces the paragraph
// modulo inter-sentence whitespace.
std::vector<std::string> split_sentences(const std::string& paragraph);

struct SplitRatios {
    double train = 0.75;
    double dev = 0.10;
    double test = 0.15;
};

// Uniform random split (no stratification), deterministic in (claim id set,
// seed). Sizes are floor-then-distribute-remainder by largest fraction.
Splits split_dataset(const std::vector<Claim>& claims, const SplitRatios& ratios, std::uint64_t seed);

struct ValidationIssue {
    std::string code;  // malformed_record | duplicate_id | dangling_reference | invalid_label | ...
    std::string file;
    std::size_t line = 0;  // 1-based; 0 when not line-addressable
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }
    std::size_t count(std::string_view code) const;
    void add(std::string code, std::string file, std::size_t line, std::string message);
    std::string to_string() const;
};

struct CorpusStats {
    std::size_t claims = 0;
    std::size_t documents = 0;
    std::size_t sentences = 0;
    std::size_t text_evidence = 0;
    std::size_t images = 0;
    std::map<std::string, std::size_t> label_counts;
};

struct Corpus {
    std::vector<Claim> claims;
    std::vector<CorpusDocument> documents;
    std::vector<TextEvidence> text_evidence;
    std::vector<CorpusImage> images;
    std::optional<Splits> splits;
    std::optional<LabelMap> label_map;

    const Claim* find_claim(std::string_view id) const;
    const CorpusDocument* find_document(std::string_view id) const;
    const TextEvidence* find_text_evidence(std::string_view id) const;
    const CorpusImage* find_image(std::string_view id) const;

    std::vector<std::string> claim_ids_in_split(std::string_view split) const;
    CorpusStats stats() const;

    void rebuild_lookup();
    bool operator==(const Corpus& other) const;

private:
    std::unordered_map<std::string, std::size_t> claim_index_;
    std::unordered_map<std::string, std::size_t> document_index_;
    std::unordered_map<std::string, std::size_t> evidence_index_;
    std::unordered_map<std::string, std::size_t> image_index_;
};

struct CorpusError : std::runtime_error {
    explicit CorpusError(const std::string& msg) : std::runtime_error(msg) {}
};

// Canonical line-delimited layout under `root`:
//   claims.jsonl, documents.jsonl, text_evidence.jsonl,
//   images/manifest.jsonl (+ image bytes under images/),
//   splits.jsonl, label_map.tsv.
// Malformed records are skipped and reported with their line number;
// duplicates keep the first occurrence. Referential checks run afterwards.
Corpus load_corpus(const std::filesystem::path& root, ValidationReport* report = nullptr);
void save_corpus(const Corpus& corpus, const std::filesystem::path& root);

// Referential and schema invariants over an in-memory corpus.
ValidationReport validate_corpus(const Corpus& corpus);

struct IngestOptions {
    SplitRatios ratios;
    std::uint64_t seed = 0;
    bool drop_claims_without_evidence = true;
};

struct IngestSummary {
    std::size_t claims_in = 0;
    std::size_t claims_out = 0;
    std::size_t claims_dropped_label = 0;
    std::size_t claims_dropped_no_evidence = 0;
    std::size_t images_in = 0;
    std::size_t images_rejected = 0;
};

// Normalizes labels through `mapping` (unmapped labels drop the claim),
// filters images, prunes dangling image references, derives missing ruling
// statements, and splits when no split table is present. Claims without a
// usable ruling paragraph are kept (they still serve retrieval and
// verification).
IngestSummary ingest_corpus(Corpus& corpus, const LabelMap& mapping, const IngestOptions& options);

struct IngestResult {
    Corpus corpus;
    IngestSummary summary;
};

// Full ingestion from a dataset root whose claims may carry raw annotation
// labels ("TRUE", "Mostly False", ...). Applies `mapping`, runs the in-memory
// ingest transform, and validates the result into `report` when given.
IngestResult ingest_from_disk(const std::filesystem::path& root, const LabelMap& mapping,
                              const IngestOptions& options, ValidationReport* report = nullptr);

}  // namespace factcheck

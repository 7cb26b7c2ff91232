#include "factcheck/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "factcheck/common.hpp"
#include "factcheck/jsonl.hpp"

namespace factcheck {

std::string to_string(TruthfulnessLabel label) {
    switch (label) {
        case TruthfulnessLabel::Supported: return "supported";
        case TruthfulnessLabel::Refuted: return "refuted";
        case TruthfulnessLabel::Nei: return "nei";
    }
    return "nei";
}

std::optional<TruthfulnessLabel> label_from_string(std::string_view s) {
    const std::string lower = to_lower(s);
    if (lower == "supported") return TruthfulnessLabel::Supported;
    if (lower == "refuted") return TruthfulnessLabel::Refuted;
    if (lower == "nei") return TruthfulnessLabel::Nei;
    return std::nullopt;
}

std::size_t label_index(TruthfulnessLabel label) {
    return static_cast<std::size_t>(label);
}

// ---------------------------------------------------------------------------
// LabelMap

void LabelMap::add(std::string raw, std::optional<TruthfulnessLabel> target) {
    auto it = index_.find(raw);
    if (it != index_.end()) {
        entries_[it->second].second = target;
        return;
    }
    index_.emplace(raw, entries_.size());
    entries_.emplace_back(std::move(raw), target);
}

std::optional<TruthfulnessLabel> LabelMap::lookup(std::string_view raw) const {
    auto it = index_.find(std::string(raw));
    if (it == index_.end()) return std::nullopt;
    return entries_[it->second].second;
}

bool LabelMap::declared(std::string_view raw) const {
    return index_.count(std::string(raw)) > 0;
}

LabelMap LabelMap::from_tsv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open label map " + path.string());
    LabelMap map;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw CorpusError("label map " + path.string() + ":" + std::to_string(line_no) +
                              ": expected raw<TAB>target");
        }
        const std::string raw = line.substr(0, tab);
        const std::string target = trim(line.substr(tab + 1));
        if (target == "DROP") {
            map.add(raw, std::nullopt);
            continue;
        }
        const auto label = label_from_string(target);
        if (!label) {
            throw CorpusError("label map " + path.string() + ":" + std::to_string(line_no) +
                              ": unknown target '" + target + "'");
        }
        map.add(raw, *label);
    }
    return map;
}

void LabelMap::save_tsv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw CorpusError("cannot write label map " + path.string());
    for (const auto& [raw, target] : entries_) {
        out << raw << '\t' << (target ? to_string(*target) : "DROP") << '\n';
    }
}

std::optional<TruthfulnessLabel> map_raw_label(std::string_view raw, const LabelMap& mapping) {
    if (mapping.declared(raw)) return mapping.lookup(raw);
    // Already-canonical names map to themselves even without a table entry.
    return label_from_string(raw);
}

// ---------------------------------------------------------------------------
// Image filtering

const std::array<std::string_view, 15> kImageRejectKeywords = {
    "-ad-",   "logo",         ".gif",        ".ico",   ".cgi",
    " .php",  "lazyload",     "Logo",        "icon",   "Bubble",
    "svg",    "rating-false", "rating-true", "banner", "-line"};

bool keep_image(std::string_view name, int width, int height) {
    for (std::string_view kw : kImageRejectKeywords) {
        if (contains(name, kw)) return false;
    }
    return std::min(width, height) >= 400;
}

// ---------------------------------------------------------------------------
// Ruling summary

std::optional<std::string> extract_ruling_summary(const CorpusDocument& article) {
    for (const std::string& paragraph : article.paragraphs) {
        std::size_t b = 0;
        while (b < paragraph.size() && std::isspace(static_cast<unsigned char>(paragraph[b]))) ++b;
        const std::string_view body = std::string_view(paragraph).substr(b);
        if (body.starts_with("Our ruling") || body.starts_with("In sum")) {
            return paragraph;
        }
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Sentence splitting

namespace {

// Frozen abbreviation list, matched case-insensitively against the token
// preceding a period.
const std::unordered_set<std::string>& abbreviations() {
    static const std::unordered_set<std::string> abbr = {
        "mr",   "mrs",  "ms",   "dr",   "prof", "sr",   "jr",    "st",   "mt",   "vs",
        "etc",  "inc",  "ltd",  "co",   "corp", "no",   "gen",   "gov",  "sen",  "rep",
        "capt", "col",  "lt",   "sgt",  "maj",  "adm",  "hon",   "rev",  "pres", "dept",
        "univ", "approx", "est", "fig",  "figs", "min",  "max",   "ave",  "blvd", "rd",
        "jan",  "feb",  "mar",  "apr",  "jun",  "jul",  "aug",   "sep",  "sept", "oct",
        "nov",  "dec",  "u.s",  "u.k",  "u.n",  "e.g",  "i.e",   "a.m",  "p.m",  "ph.d",
        "al"};
    return abbr;
}

bool is_terminal(char c) {
    return c == '.' || c == '!' || c == '?';
}

bool is_closing(char c) {
    return c == '"' || c == '\'' || c == ')' || c == ']';
}

bool opens_sentence(char c) {
    return std::isupper(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) ||
           c == '"' || c == '\'' || c == '(' || c == '[';
}

// Token of letters and internal dots immediately before position `end`.
std::string token_before(const std::string& s, std::size_t end) {
    std::size_t b = end;
    while (b > 0) {
        const char c = s[b - 1];
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '.') {
            --b;
        } else {
            break;
        }
    }
    std::string tok = s.substr(b, end - b);
    while (!tok.empty() && tok.front() == '.') tok.erase(tok.begin());
    return tok;
}

}  // namespace

std::vector<std::string> split_sentences(const std::string& paragraph) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    std::size_t i = 0;
    const std::size_t n = paragraph.size();

    auto flush = [&](std::size_t end) {
        std::string s = trim(std::string_view(paragraph).substr(start, end - start));
        if (!s.empty()) sentences.push_back(std::move(s));
    };

    while (i < n) {
        if (!is_terminal(paragraph[i])) {
            ++i;
            continue;
        }
        const std::size_t punct_begin = i;
        bool has_period = false;
        while (i < n && is_terminal(paragraph[i])) {
            has_period = has_period || paragraph[i] == '.';
            ++i;
        }
        while (i < n && is_closing(paragraph[i])) ++i;
        if (i < n && !std::isspace(static_cast<unsigned char>(paragraph[i]))) {
            continue;  // mid-token punctuation, e.g. "3.14" or "e.g.,"
        }
        if (has_period) {
            const std::string tok = to_lower(token_before(paragraph, punct_begin));
            if (abbreviations().count(tok) > 0) continue;
        }
        std::size_t next = i;
        while (next < n && std::isspace(static_cast<unsigned char>(paragraph[next]))) ++next;
        if (next < n && !opens_sentence(paragraph[next])) continue;
        flush(i);
        start = next;
        i = next;
    }
    flush(n);
    return sentences;
}

// ---------------------------------------------------------------------------
// Splitting

Splits split_dataset(const std::vector<Claim>& claims, const SplitRatios& ratios, std::uint64_t seed) {
    if (claims.empty()) throw CorpusError("split_dataset: no claims");
    const double sum = ratios.train + ratios.dev + ratios.test;
    if (std::abs(sum - 1.0) > 1e-9) {
        throw CorpusError("split_dataset: ratios sum to " + std::to_string(sum) + ", expected 1");
    }

    std::vector<std::string> ids;
    ids.reserve(claims.size());
    for (const Claim& c : claims) ids.push_back(c.claim_id);
    std::sort(ids.begin(), ids.end());
    Rng rng(seed);
    rng.shuffle(ids);

    const std::size_t n = ids.size();
    const std::array<double, 3> r{ratios.train, ratios.dev, ratios.test};
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> fractions{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = static_cast<double>(n) * r[i];
        counts[i] = static_cast<std::size_t>(std::floor(exact));
        fractions[i] = exact - std::floor(exact);
        assigned += counts[i];
    }
    // Hand out the remainder by largest fractional part, ties by split order.
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fractions[a] > fractions[b]; });
    for (std::size_t k = 0; assigned < n; ++k) {
        ++counts[order[k % 3]];
        ++assigned;
    }

    Splits splits;
    splits.seed = seed;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < counts[0]; ++i) splits.train.insert(ids[pos++]);
    for (std::size_t i = 0; i < counts[1]; ++i) splits.dev.insert(ids[pos++]);
    for (std::size_t i = 0; i < counts[2]; ++i) splits.test.insert(ids[pos++]);
    return splits;
}

// ---------------------------------------------------------------------------
// ValidationReport

std::size_t ValidationReport::count(std::string_view code) const {
    std::size_t n = 0;
    for (const auto& issue : issues) {
        if (issue.code == code) ++n;
    }
    return n;
}

void ValidationReport::add(std::string code, std::string file, std::size_t line, std::string message) {
    issues.push_back({std::move(code), std::move(file), line, std::move(message)});
}

std::string ValidationReport::to_string() const {
    std::ostringstream out;
    for (const auto& issue : issues) {
        out << issue.code << " " << issue.file;
        if (issue.line > 0) out << ":" << issue.line;
        out << " " << issue.message << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Corpus lookups

void Corpus::rebuild_lookup() {
    claim_index_.clear();
    document_index_.clear();
    evidence_index_.clear();
    image_index_.clear();
    for (std::size_t i = 0; i < claims.size(); ++i) claim_index_.emplace(claims[i].claim_id, i);
    for (std::size_t i = 0; i < documents.size(); ++i) document_index_.emplace(documents[i].doc_id, i);
    for (std::size_t i = 0; i < text_evidence.size(); ++i)
        evidence_index_.emplace(text_evidence[i].evidence_id, i);
    for (std::size_t i = 0; i < images.size(); ++i) image_index_.emplace(images[i].image_id, i);
}

const Claim* Corpus::find_claim(std::string_view id) const {
    auto it = claim_index_.find(std::string(id));
    return it == claim_index_.end() ? nullptr : &claims[it->second];
}

const CorpusDocument* Corpus::find_document(std::string_view id) const {
    auto it = document_index_.find(std::string(id));
    return it == document_index_.end() ? nullptr : &documents[it->second];
}

const TextEvidence* Corpus::find_text_evidence(std::string_view id) const {
    auto it = evidence_index_.find(std::string(id));
    return it == evidence_index_.end() ? nullptr : &text_evidence[it->second];
}

const CorpusImage* Corpus::find_image(std::string_view id) const {
    auto it = image_index_.find(std::string(id));
    return it == image_index_.end() ? nullptr : &images[it->second];
}

std::vector<std::string> Corpus::claim_ids_in_split(std::string_view split) const {
    std::vector<std::string> ids;
    if (!splits) {
        for (const Claim& c : claims) ids.push_back(c.claim_id);
        return ids;
    }
    const std::set<std::string>* wanted = nullptr;
    if (split == "train") wanted = &splits->train;
    else if (split == "dev") wanted = &splits->dev;
    else if (split == "test") wanted = &splits->test;
    else throw CorpusError("unknown split '" + std::string(split) + "'");
    for (const Claim& c : claims) {
        if (wanted->count(c.claim_id) > 0) ids.push_back(c.claim_id);
    }
    return ids;
}

CorpusStats Corpus::stats() const {
    CorpusStats s;
    s.claims = claims.size();
    s.documents = documents.size();
    s.text_evidence = text_evidence.size();
    s.images = images.size();
    for (const CorpusDocument& d : documents) s.sentences += d.sentences.size();
    for (const Claim& c : claims) ++s.label_counts[to_string(c.label)];
    return s;
}

bool Corpus::operator==(const Corpus& other) const {
    return claims == other.claims && documents == other.documents &&
           text_evidence == other.text_evidence && images == other.images &&
           splits == other.splits && label_map == other.label_map;
}

// ---------------------------------------------------------------------------
// Load / save

namespace {

std::optional<std::string> optional_string(const Json& record, const char* key) {
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

bool require(const Json& record, const char* key, Json::value_t type, std::string& why) {
    auto it = record.find(key);
    if (it == record.end()) {
        why = std::string("missing field '") + key + "'";
        return false;
    }
    const bool ok = it->type() == type ||
                    (type == Json::value_t::number_unsigned && it->is_number_integer()) ||
                    (type == Json::value_t::number_integer && it->is_number_unsigned());
    if (!ok) {
        why = std::string("field '") + key + "' has wrong type";
        return false;
    }
    return true;
}

std::vector<std::string> string_list(const Json& value) {
    std::vector<std::string> out;
    for (const auto& item : value) {
        if (item.is_string()) out.push_back(item.get<std::string>());
    }
    return out;
}

void derive_sentences(CorpusDocument& doc) {
    doc.sentences.clear();
    for (std::size_t p = 0; p < doc.paragraphs.size(); ++p) {
        const auto sentences = split_sentences(doc.paragraphs[p]);
        for (std::size_t s = 0; s < sentences.size(); ++s) {
            doc.sentences.push_back({p, s, sentences[s]});
        }
    }
}

struct ClaimLoadOptions {
    // When set, label strings run through map_raw_label and unmapped labels
    // drop the record silently (counted in dropped). When null, only the
    // three canonical label strings are accepted.
    const LabelMap* raw_label_map = nullptr;
    std::size_t dropped = 0;
};

void load_claims_file(const std::filesystem::path& path, Corpus& corpus, ValidationReport& rep,
                      std::unordered_set<std::string>& seen, ClaimLoadOptions& opts) {
    for_each_jsonl_record(
        path,
        [&](std::size_t line, const Json& record) {
            std::string why;
            if (!require(record, "claim_id", Json::value_t::string, why) ||
                !require(record, "text", Json::value_t::string, why) ||
                !require(record, "label", Json::value_t::string, why)) {
                rep.add("malformed_record", "claims.jsonl", line, why);
                return;
            }
            Claim c;
            c.claim_id = record["claim_id"].get<std::string>();
            c.text = record["text"].get<std::string>();
            const std::string raw_label = record["label"].get<std::string>();
            std::optional<TruthfulnessLabel> label;
            if (opts.raw_label_map != nullptr) {
                label = map_raw_label(raw_label, *opts.raw_label_map);
                if (!label) {
                    ++opts.dropped;
                    return;
                }
            } else {
                label = label_from_string(raw_label);
                if (!label) {
                    rep.add("invalid_label", "claims.jsonl", line,
                            "label '" + raw_label + "' outside the 3-class set");
                    return;
                }
            }
            c.label = *label;
            if (c.text.empty()) {
                rep.add("malformed_record", "claims.jsonl", line, "empty claim text");
                return;
            }
            c.ruling_statement = optional_string(record, "ruling_statement");
            c.source_url = optional_string(record, "source_url");
            if (record.contains("gold_text_evidence_ids"))
                c.gold_text_evidence_ids = string_list(record["gold_text_evidence_ids"]);
            if (record.contains("gold_image_evidence_ids"))
                c.gold_image_evidence_ids = string_list(record["gold_image_evidence_ids"]);
            if (!seen.insert("c:" + c.claim_id).second) {
                rep.add("duplicate_id", "claims.jsonl", line, "duplicate claim_id '" + c.claim_id + "'");
                return;
            }
            corpus.claims.push_back(std::move(c));
        },
        [&](std::size_t line, const std::string& what) {
            rep.add("malformed_record", "claims.jsonl", line, what);
        });
}

Corpus load_corpus_files(const std::filesystem::path& root, ValidationReport& rep,
                         ClaimLoadOptions& claim_opts) {
    Corpus corpus;

    const auto claims_path = root / "claims.jsonl";
    const auto documents_path = root / "documents.jsonl";
    const auto evidence_path = root / "text_evidence.jsonl";
    const auto manifest_path = root / "images" / "manifest.jsonl";
    const auto splits_path = root / "splits.jsonl";
    const auto label_map_path = root / "label_map.tsv";

    if (!std::filesystem::exists(claims_path)) {
        throw CorpusError("missing claims.jsonl under " + root.string());
    }

    std::unordered_set<std::string> seen;
    load_claims_file(claims_path, corpus, rep, seen, claim_opts);

    if (std::filesystem::exists(documents_path)) {
        for_each_jsonl_record(
            documents_path,
            [&](std::size_t line, const Json& record) {
                std::string why;
                if (!require(record, "doc_id", Json::value_t::string, why) ||
                    !require(record, "paragraphs", Json::value_t::array, why)) {
                    rep.add("malformed_record", "documents.jsonl", line, why);
                    return;
                }
                CorpusDocument d;
                d.doc_id = record["doc_id"].get<std::string>();
                d.url = optional_string(record, "url");
                d.paragraphs = string_list(record["paragraphs"]);
                if (!seen.insert("d:" + d.doc_id).second) {
                    rep.add("duplicate_id", "documents.jsonl", line, "duplicate doc_id '" + d.doc_id + "'");
                    return;
                }
                derive_sentences(d);
                corpus.documents.push_back(std::move(d));
            },
            [&](std::size_t line, const std::string& what) {
                rep.add("malformed_record", "documents.jsonl", line, what);
            });
    }

    if (std::filesystem::exists(evidence_path)) {
        for_each_jsonl_record(
            evidence_path,
            [&](std::size_t line, const Json& record) {
                std::string why;
                if (!require(record, "evidence_id", Json::value_t::string, why) ||
                    !require(record, "claim_id", Json::value_t::string, why) ||
                    !require(record, "doc_id", Json::value_t::string, why) ||
                    !require(record, "paragraph_index", Json::value_t::number_unsigned, why) ||
                    !require(record, "text", Json::value_t::string, why)) {
                    rep.add("malformed_record", "text_evidence.jsonl", line, why);
                    return;
                }
                TextEvidence e;
                e.evidence_id = record["evidence_id"].get<std::string>();
                e.claim_id = record["claim_id"].get<std::string>();
                e.doc_id = record["doc_id"].get<std::string>();
                e.paragraph_index = record["paragraph_index"].get<std::size_t>();
                e.text = record["text"].get<std::string>();
                if (!seen.insert("e:" + e.evidence_id).second) {
                    rep.add("duplicate_id", "text_evidence.jsonl", line,
                            "duplicate evidence_id '" + e.evidence_id + "'");
                    return;
                }
                corpus.text_evidence.push_back(std::move(e));
            },
            [&](std::size_t line, const std::string& what) {
                rep.add("malformed_record", "text_evidence.jsonl", line, what);
            });
    }

    if (std::filesystem::exists(manifest_path)) {
        for_each_jsonl_record(
            manifest_path,
            [&](std::size_t line, const Json& record) {
                std::string why;
                if (!require(record, "image_id", Json::value_t::string, why) ||
                    !require(record, "path", Json::value_t::string, why) ||
                    !require(record, "width", Json::value_t::number_unsigned, why) ||
                    !require(record, "height", Json::value_t::number_unsigned, why) ||
                    !require(record, "source_name", Json::value_t::string, why)) {
                    rep.add("malformed_record", "images/manifest.jsonl", line, why);
                    return;
                }
                CorpusImage img;
                img.image_id = record["image_id"].get<std::string>();
                img.path = record["path"].get<std::string>();
                img.width = record["width"].get<int>();
                img.height = record["height"].get<int>();
                img.source_name = record["source_name"].get<std::string>();
                if (!seen.insert("i:" + img.image_id).second) {
                    rep.add("duplicate_id", "images/manifest.jsonl", line,
                            "duplicate image_id '" + img.image_id + "'");
                    return;
                }
                corpus.images.push_back(std::move(img));
            },
            [&](std::size_t line, const std::string& what) {
                rep.add("malformed_record", "images/manifest.jsonl", line, what);
            });
    }

    if (std::filesystem::exists(splits_path)) {
        Splits splits;
        bool any = false;
        for_each_jsonl_record(
            splits_path,
            [&](std::size_t line, const Json& record) {
                std::string why;
                if (!require(record, "claim_id", Json::value_t::string, why) ||
                    !require(record, "split", Json::value_t::string, why)) {
                    rep.add("malformed_record", "splits.jsonl", line, why);
                    return;
                }
                const std::string id = record["claim_id"].get<std::string>();
                const std::string split = record["split"].get<std::string>();
                if (record.contains("seed") && record["seed"].is_number()) {
                    splits.seed = record["seed"].get<std::uint64_t>();
                }
                if (split == "train") splits.train.insert(id);
                else if (split == "dev") splits.dev.insert(id);
                else if (split == "test") splits.test.insert(id);
                else {
                    rep.add("invalid_split", "splits.jsonl", line, "unknown split '" + split + "'");
                    return;
                }
                any = true;
            },
            [&](std::size_t line, const std::string& what) {
                rep.add("malformed_record", "splits.jsonl", line, what);
            });
        if (any) corpus.splits = std::move(splits);
    }

    if (std::filesystem::exists(label_map_path)) {
        corpus.label_map = LabelMap::from_tsv_file(label_map_path);
    }

    corpus.rebuild_lookup();
    return corpus;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& root, ValidationReport* report) {
    ValidationReport local;
    ValidationReport& rep = report ? *report : local;
    ClaimLoadOptions claim_opts;
    Corpus corpus = load_corpus_files(root, rep, claim_opts);
    const ValidationReport referential = validate_corpus(corpus);
    for (const auto& issue : referential.issues) rep.issues.push_back(issue);
    return corpus;
}

ValidationReport validate_corpus(const Corpus& corpus) {
    ValidationReport rep;
    for (const Claim& c : corpus.claims) {
        for (const std::string& id : c.gold_text_evidence_ids) {
            if (corpus.find_text_evidence(id) == nullptr) {
                rep.add("dangling_reference", "claims.jsonl", 0,
                        "claim '" + c.claim_id + "' references missing text evidence '" + id + "'");
            }
        }
        for (const std::string& id : c.gold_image_evidence_ids) {
            if (corpus.find_image(id) == nullptr) {
                rep.add("dangling_reference", "claims.jsonl", 0,
                        "claim '" + c.claim_id + "' references missing image '" + id + "'");
            }
        }
        if (c.ruling_statement && c.ruling_statement->empty()) {
            rep.add("malformed_record", "claims.jsonl", 0,
                    "claim '" + c.claim_id + "' has an empty ruling statement");
        }
    }
    for (const TextEvidence& e : corpus.text_evidence) {
        const CorpusDocument* doc = corpus.find_document(e.doc_id);
        if (doc == nullptr) {
            rep.add("dangling_reference", "text_evidence.jsonl", 0,
                    "evidence '" + e.evidence_id + "' references missing document '" + e.doc_id + "'");
        } else if (e.paragraph_index >= doc->paragraphs.size()) {
            rep.add("dangling_reference", "text_evidence.jsonl", 0,
                    "evidence '" + e.evidence_id + "' paragraph index " +
                        std::to_string(e.paragraph_index) + " out of range for '" + e.doc_id + "'");
        }
        if (corpus.find_claim(e.claim_id) == nullptr) {
            rep.add("dangling_reference", "text_evidence.jsonl", 0,
                    "evidence '" + e.evidence_id + "' references missing claim '" + e.claim_id + "'");
        }
    }
    for (const CorpusImage& img : corpus.images) {
        if (img.width <= 0 || img.height <= 0) {
            rep.add("malformed_record", "images/manifest.jsonl", 0,
                    "image '" + img.image_id + "' has non-positive dimensions");
        }
    }
    if (corpus.splits) {
        auto check_split = [&](const std::set<std::string>& ids, const char* name) {
            for (const std::string& id : ids) {
                if (corpus.find_claim(id) == nullptr) {
                    rep.add("dangling_reference", "splits.jsonl", 0,
                            std::string("split '") + name + "' references missing claim '" + id + "'");
                }
            }
        };
        check_split(corpus.splits->train, "train");
        check_split(corpus.splits->dev, "dev");
        check_split(corpus.splits->test, "test");
        for (const Claim& c : corpus.claims) {
            const int hits = static_cast<int>(corpus.splits->train.count(c.claim_id)) +
                             static_cast<int>(corpus.splits->dev.count(c.claim_id)) +
                             static_cast<int>(corpus.splits->test.count(c.claim_id));
            if (hits == 0) {
                rep.add("invalid_split", "splits.jsonl", 0,
                        "claim '" + c.claim_id + "' is missing from the split table");
            } else if (hits > 1) {
                rep.add("invalid_split", "splits.jsonl", 0,
                        "claim '" + c.claim_id + "' appears in multiple splits");
            }
        }
    }
    return rep;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& root) {
    std::filesystem::create_directories(root / "images");

    {
        JsonlWriter out(root / "claims.jsonl");
        for (const Claim& c : corpus.claims) {
            Json record;
            record["claim_id"] = c.claim_id;
            record["text"] = c.text;
            record["label"] = to_string(c.label);
            if (c.ruling_statement) record["ruling_statement"] = *c.ruling_statement;
            record["gold_text_evidence_ids"] = c.gold_text_evidence_ids;
            record["gold_image_evidence_ids"] = c.gold_image_evidence_ids;
            if (c.source_url) record["source_url"] = *c.source_url;
            out.write(record);
        }
    }
    {
        JsonlWriter out(root / "documents.jsonl");
        for (const CorpusDocument& d : corpus.documents) {
            Json record;
            record["doc_id"] = d.doc_id;
            if (d.url) record["url"] = *d.url;
            record["paragraphs"] = d.paragraphs;
            out.write(record);
        }
    }
    {
        JsonlWriter out(root / "text_evidence.jsonl");
        for (const TextEvidence& e : corpus.text_evidence) {
            Json record;
            record["evidence_id"] = e.evidence_id;
            record["claim_id"] = e.claim_id;
            record["doc_id"] = e.doc_id;
            record["paragraph_index"] = e.paragraph_index;
            record["text"] = e.text;
            out.write(record);
        }
    }
    {
        JsonlWriter out(root / "images" / "manifest.jsonl");
        for (const CorpusImage& img : corpus.images) {
            Json record;
            record["image_id"] = img.image_id;
            record["path"] = img.path;
            record["width"] = img.width;
            record["height"] = img.height;
            record["source_name"] = img.source_name;
            out.write(record);
        }
    }
    if (corpus.splits) {
        JsonlWriter out(root / "splits.jsonl");
        auto emit = [&](const std::set<std::string>& ids, const char* name) {
            for (const std::string& id : ids) {
                Json record;
                record["claim_id"] = id;
                record["split"] = name;
                record["seed"] = corpus.splits->seed;
                out.write(record);
            }
        };
        emit(corpus.splits->train, "train");
        emit(corpus.splits->dev, "dev");
        emit(corpus.splits->test, "test");
    }
    if (corpus.label_map) {
        corpus.label_map->save_tsv(root / "label_map.tsv");
    }
}

// ---------------------------------------------------------------------------
// Ingest

IngestSummary ingest_corpus(Corpus& corpus, const LabelMap& mapping, const IngestOptions& options) {
    IngestSummary summary;
    summary.claims_in = corpus.claims.size();
    summary.images_in = corpus.images.size();

    // Image filtering on the original file name.
    std::unordered_set<std::string> kept_images;
    {
        std::vector<CorpusImage> kept;
        for (CorpusImage& img : corpus.images) {
            if (keep_image(img.source_name, img.width, img.height)) {
                kept_images.insert(img.image_id);
                kept.push_back(std::move(img));
            } else {
                ++summary.images_rejected;
            }
        }
        corpus.images = std::move(kept);
    }

    std::vector<Claim> kept_claims;
    for (Claim& c : corpus.claims) {
        const auto label = map_raw_label(to_string(c.label), mapping);
        if (!label) {
            ++summary.claims_dropped_label;
            continue;
        }
        c.label = *label;
        c.gold_image_evidence_ids.erase(
            std::remove_if(c.gold_image_evidence_ids.begin(), c.gold_image_evidence_ids.end(),
                           [&](const std::string& id) { return kept_images.count(id) == 0; }),
            c.gold_image_evidence_ids.end());
        const bool has_evidence = !c.gold_text_evidence_ids.empty() || !c.gold_image_evidence_ids.empty();
        if (options.drop_claims_without_evidence && !has_evidence) {
            ++summary.claims_dropped_no_evidence;
            continue;
        }
        kept_claims.push_back(std::move(c));
    }
    corpus.claims = std::move(kept_claims);
    corpus.rebuild_lookup();

    // Evidence tied to a dropped claim has nothing left to support.
    corpus.text_evidence.erase(
        std::remove_if(corpus.text_evidence.begin(), corpus.text_evidence.end(),
                       [&](const TextEvidence& e) { return corpus.find_claim(e.claim_id) == nullptr; }),
        corpus.text_evidence.end());
    corpus.rebuild_lookup();

    // A claim may still point at evidence that was pruned with its document.
    for (Claim& c : corpus.claims) {
        c.gold_text_evidence_ids.erase(
            std::remove_if(c.gold_text_evidence_ids.begin(), c.gold_text_evidence_ids.end(),
                           [&](const std::string& id) { return corpus.find_text_evidence(id) == nullptr; }),
            c.gold_text_evidence_ids.end());
    }

    // Derive missing ruling statements from the evidence documents.
    for (Claim& c : corpus.claims) {
        if (c.ruling_statement) continue;
        for (const std::string& eid : c.gold_text_evidence_ids) {
            const TextEvidence* e = corpus.find_text_evidence(eid);
            if (e == nullptr) continue;
            const CorpusDocument* doc = corpus.find_document(e->doc_id);
            if (doc == nullptr) continue;
            if (auto summary_para = extract_ruling_summary(*doc)) {
                c.ruling_statement = std::move(summary_para);
                break;
            }
        }
    }

    if (corpus.splits) {
        auto prune = [&](std::set<std::string>& ids) {
            for (auto it = ids.begin(); it != ids.end();) {
                it = corpus.find_claim(*it) == nullptr ? ids.erase(it) : std::next(it);
            }
        };
        prune(corpus.splits->train);
        prune(corpus.splits->dev);
        prune(corpus.splits->test);
    } else if (!corpus.claims.empty()) {
        corpus.splits = split_dataset(corpus.claims, options.ratios, options.seed);
    }

    summary.claims_out = corpus.claims.size();
    return summary;
}

IngestResult ingest_from_disk(const std::filesystem::path& root, const LabelMap& mapping,
                              const IngestOptions& options, ValidationReport* report) {
    ValidationReport local;
    ValidationReport& rep = report ? *report : local;

    ClaimLoadOptions claim_opts;
    claim_opts.raw_label_map = &mapping;

    IngestResult result;
    result.corpus = load_corpus_files(root, rep, claim_opts);
    result.corpus.label_map = mapping;

    result.summary = ingest_corpus(result.corpus, mapping, options);
    result.summary.claims_in += claim_opts.dropped;
    result.summary.claims_dropped_label += claim_opts.dropped;

    const ValidationReport referential = validate_corpus(result.corpus);
    for (const auto& issue : referential.issues) rep.issues.push_back(issue);
    return result;
}

}  // namespace factcheck

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "factcheck/harness.hpp"
#include "synthetic.hpp"
#include "testutil.hpp"

using namespace factcheck;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CorpusDocument doc_with(const std::string& id, const std::vector<std::string>& paragraphs) {
    CorpusDocument doc;
    doc.doc_id = id;
    doc.paragraphs = paragraphs;
    for (std::size_t p = 0; p < paragraphs.size(); ++p) {
        const auto sentences = split_sentences(paragraphs[p]);
        for (std::size_t s = 0; s < sentences.size(); ++s) doc.sentences.push_back({p, s, sentences[s]});
    }
    return doc;
}

BackendDescriptor small_backend(std::size_t dim = 32, std::uint64_t seed = 5) {
    BackendDescriptor desc;
    desc.dim = dim;
    desc.seed = seed;
    return desc;
}

// Pipeline settings small enough that a full run takes well under a second.
std::string pipeline_config_text(const std::filesystem::path& root) {
    return "corpus.root = " + root.string() + "\n" +
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
           "mode.ablation = both\n"
           "report.ks = 5,10\n"
           "eval.split = test\n";
}

PipelineConfig pipeline_config(const std::filesystem::path& root) {
    return PipelineConfig::from_config(Config::parse_string(pipeline_config_text(root)));
}

const ReportSection* find_section(const std::vector<ReportSection>& sections, std::string_view title) {
    for (const ReportSection& section : sections) {
        if (section.title == title) return &section;
    }
    return nullptr;
}

std::size_t column_index(const ReportSection& section, std::string_view name) {
    for (std::size_t i = 0; i < section.columns.size(); ++i) {
        if (section.columns[i] == name) return i;
    }
    REQUIRE(false);
    return 0;
}

}  // namespace

TEST_CASE("config parses comments, blank lines, and dotted keys") {
    const Config config = Config::parse_string(
        "# leading comment\n"
        "\n"
        "backend.dim = 64\n"
        "  retrieval.k=7  \n"
        "name = hello = world\n"
        "flag = Yes\n"
        "name = second wins\n");
    CHECK(config.get_uint("backend.dim") == 64);
    CHECK(config.get_uint("retrieval.k") == 7);
    CHECK(config.get_string("name") == "second wins");
    CHECK(config.get_bool("flag"));
    CHECK(config.size() == 4);
    CHECK_FALSE(config.has("missing"));
}

TEST_CASE("config typed getters validate and fall back") {
    Config config;
    config.set("rate", "0.25");
    config.set("count", "12");
    config.set("neg", "-3");
    config.set("word", "abc");

    CHECK(config.get_double("rate") == doctest::Approx(0.25));
    CHECK(config.get_int("neg") == -3);
    CHECK(config.get_uint("count") == 12);
    CHECK(config.get_string("none", "dflt") == "dflt");
    CHECK(config.get_double("none", 1.5) == doctest::Approx(1.5));
    CHECK(config.get_uint("none", 9) == 9);
    CHECK(config.get_bool("none", true));

    CHECK_THROWS_AS((void)config.get_string("none"), ConfigError);
    CHECK_THROWS_AS((void)config.get_double("word"), ConfigError);
    CHECK_THROWS_AS((void)config.get_int("word"), ConfigError);
    CHECK_THROWS_AS((void)config.get_uint("neg"), ConfigError);
    CHECK_THROWS_AS((void)config.get_bool("word"), ConfigError);
    CHECK_THROWS_AS((void)config.get_bool("count", false), ConfigError);
}

TEST_CASE("config rejects lines without an assignment") {
    CHECK_THROWS_AS((void)Config::parse_string("just words\n"), ConfigError);
    CHECK_THROWS_AS((void)Config::parse_string("= value\n"), ConfigError);
}

TEST_CASE("config canonical form ignores input order and drives the hash") {
    const Config a = Config::parse_string("x = 1\ny = 2\n");
    const Config b = Config::parse_string("y = 2\n# noise\nx  =  1\n");
    CHECK(a.canonical() == "x = 1\ny = 2\n");
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());

    Config c = a;
    c.set("y", "3");
    CHECK(c.hash() != a.hash());
}

TEST_CASE("config files round trip through parse_file") {
    testutil::TempDir dir("config");
    testutil::write_file(dir.path / "run.conf", "alpha.beta = 4\n# c\ngamma = x\n");
    const Config config = Config::parse_file(dir.path / "run.conf");
    CHECK(config.get_uint("alpha.beta") == 4);
    CHECK(config.get_string("gamma") == "x");
    CHECK_THROWS_AS((void)Config::parse_file(dir.path / "missing.conf"), ConfigError);
}

TEST_CASE("environment overrides map prefixed names onto dotted keys") {
    Config config;
    config.set("mode.ablation", "both");
    ::setenv("FACTCHECK_MODE__ABLATION", "text", 1);
    ::setenv("FACTCHECK_SEED", "42", 1);
    ::setenv("OTHERAPP_MODE__ABLATION", "image", 1);
    config.apply_env_overrides();
    ::unsetenv("FACTCHECK_MODE__ABLATION");
    ::unsetenv("FACTCHECK_SEED");
    ::unsetenv("OTHERAPP_MODE__ABLATION");

    CHECK(config.get_string("mode.ablation") == "text");
    CHECK(config.get_uint("seed") == 42);
    CHECK(config.size() == 2);
}

TEST_CASE("mode names parse both ways and reject junk") {
    CHECK(to_string(evidence_mode_from_string("GOLD")) == "gold");
    CHECK(to_string(evidence_mode_from_string("system")) == "system");
    CHECK(to_string(ablation_from_string("None")) == "none");
    CHECK(to_string(ablation_from_string("image")) == "image");
    CHECK(to_string(stage_from_string("Verification")) == "verification");
    CHECK(to_string(truthfulness_source_from_string("system")) == "system");
    CHECK_THROWS_AS((void)evidence_mode_from_string("goldish"), ConfigError);
    CHECK_THROWS_AS((void)ablation_from_string(""), ConfigError);
    CHECK_THROWS_AS((void)stage_from_string("retrieve"), ConfigError);
    CHECK_THROWS_AS((void)truthfulness_source_from_string("oracle"), ConfigError);
}

TEST_CASE("stage seeds split the root seed deterministically") {
    const std::uint64_t a = stage_seed(7, "retrieval");
    CHECK(a == stage_seed(7, "retrieval"));
    CHECK(a != stage_seed(7, "verification"));
    CHECK(a != stage_seed(8, "retrieval"));
}

TEST_CASE("pipeline config reads dotted keys and seeds each stage") {
    Config raw = Config::parse_string(
        "corpus.root = /data/corpus\n"
        "seed = 9\n"
        "backend.dim = 16\n"
        "retrieval.k = 3\n"
        "retrieval.learning_rate = 0.5\n"
        "verifier.epochs = 2\n"
        "generation.rl_epochs = 0\n"
        "mode.evidence = gold\n"
        "mode.truthfulness = gold\n"
        "mode.ablation = image\n"
        "report.ks = 1, 3\n"
        "eval.split = dev\n");
    const PipelineConfig config = PipelineConfig::from_config(raw);
    CHECK(config.corpus_root == std::filesystem::path("/data/corpus"));
    CHECK(config.seed == 9);
    CHECK(config.backend.dim == 16);
    CHECK(config.backend.name == "stub");
    CHECK(config.retrieval.k == 3);
    CHECK(config.retrieval.learning_rate == doctest::Approx(0.5));
    CHECK(config.retrieval.seed == stage_seed(9, "retrieval"));
    CHECK(config.verifier.epochs == 2);
    CHECK(config.verifier.seed == stage_seed(9, "verification"));
    CHECK(config.generator.rl_epochs == 0);
    CHECK(config.generator.seed == stage_seed(9, "generation"));
    CHECK(config.reward.seed == stage_seed(9, "reward"));
    CHECK(config.evidence_mode == EvidenceMode::Gold);
    CHECK(config.truthfulness_mode == TruthfulnessSource::Gold);
    CHECK(config.ablation == EvidenceAblation::Image);
    CHECK(config.report_ks == std::vector<std::size_t>{1, 3});
    CHECK(config.eval_split == "dev");

    CHECK_THROWS_AS((void)PipelineConfig::from_config(Config{}), ConfigError);
    raw.set("report.ks", "1,zero");
    CHECK_THROWS_AS((void)PipelineConfig::from_config(raw), ConfigError);
    raw.set("report.ks", "5");
    raw.set("backend.dim", "0");
    CHECK_THROWS_AS((void)PipelineConfig::from_config(raw), ConfigError);
}

TEST_CASE("prediction files round trip and reject malformed records") {
    testutil::TempDir dir("preds");

    std::vector<RetrievalPrediction> retrieval{
        {"c1", {{"d1#0.0", 0.75}, {"d1#1.0", 0.5}}, {{"img1", 0.25}}},
        {"c2", {}, {}}};
    save_retrieval_predictions(retrieval, dir.path / "r.jsonl");
    CHECK(load_retrieval_predictions(dir.path / "r.jsonl") == retrieval);

    std::vector<VerificationPrediction> verification{
        {"c1", {0.2, 0.5, 0.3}, TruthfulnessLabel::Refuted, {"d1#0.0"}, {"img1"}}};
    save_verification_predictions(verification, dir.path / "v.jsonl");
    CHECK(load_verification_predictions(dir.path / "v.jsonl") == verification);

    std::vector<GenerationPrediction> generation{
        {"c1", "the ruling", TruthfulnessLabel::Supported, TruthfulnessSource::System,
         EvidenceMode::Gold}};
    save_generation_predictions(generation, dir.path / "g.jsonl");
    CHECK(load_generation_predictions(dir.path / "g.jsonl") == generation);

    testutil::write_file(dir.path / "bad1.jsonl", "{\"text\":[],\"images\":[]}\n");
    CHECK_THROWS_AS((void)load_retrieval_predictions(dir.path / "bad1.jsonl"), SchemaMismatch);
    testutil::write_file(dir.path / "bad2.jsonl", "not json\n");
    CHECK_THROWS_AS((void)load_retrieval_predictions(dir.path / "bad2.jsonl"), SchemaMismatch);
    testutil::write_file(dir.path / "bad3.jsonl",
                         "{\"claim_id\":\"c\",\"probs\":[0.5,0.5],\"predicted\":\"nei\","
                         "\"text_evidence\":[],\"image_evidence\":[]}\n");
    CHECK_THROWS_AS((void)load_verification_predictions(dir.path / "bad3.jsonl"), SchemaMismatch);
    testutil::write_file(dir.path / "bad4.jsonl",
                         "{\"claim_id\":\"c\",\"statement\":\"s\",\"label\":\"sure\","
                         "\"truthfulness\":\"gold\",\"evidence\":\"gold\"}\n");
    CHECK_THROWS_AS((void)load_generation_predictions(dir.path / "bad4.jsonl"), SchemaMismatch);
    testutil::write_file(dir.path / "bad5.jsonl",
                         "{\"claim_id\":\"c\",\"text\":[{\"id\":\"x\"}],\"images\":[]}\n");
    CHECK_THROWS_AS((void)load_retrieval_predictions(dir.path / "bad5.jsonl"), SchemaMismatch);
}

TEST_CASE("retrieval evaluation credits gold paragraphs once and excludes goldless claims") {
    StubBackend backend(small_backend());
    Corpus corpus;
    corpus.documents.push_back(
        doc_with("d1", {"Alpha beta gamma. Delta epsilon zeta.", "Eta theta iota."}));
    Claim c1;
    c1.claim_id = "c1";
    c1.text = "alpha beta gamma";
    c1.gold_text_evidence_ids = {"ev1"};
    Claim c2;
    c2.claim_id = "c2";
    c2.text = "nothing here";
    c2.gold_image_evidence_ids = {"i1"};
    Claim c3;
    c3.claim_id = "c3";
    c3.text = "also nothing";
    corpus.claims = {c1, c2, c3};
    TextEvidence ev1;
    ev1.evidence_id = "ev1";
    ev1.claim_id = "c1";
    ev1.doc_id = "d1";
    ev1.paragraph_index = 0;
    ev1.text = "Alpha beta gamma. Delta epsilon zeta.";
    corpus.text_evidence = {ev1};
    corpus.images.push_back({"i1", "images/a.bin", 640, 480, "src"});
    corpus.images.push_back({"i2", "images/b.bin", 640, 480, "src"});
    corpus.rebuild_lookup();

    std::vector<RetrievalPrediction> predictions{
        {"c1", {{"d1#0.0", 0.9}, {"d1#0.1", 0.8}, {"d1#1.0", 0.2}}, {}},
        {"c2", {}, {{"i2", 0.6}, {"i1", 0.5}}},
        {"c3", {}, {{"i2", 0.4}}}};
    const auto sections = evaluate_retrieval_stage(predictions, corpus, {2}, backend);
    REQUIRE(sections.size() == 2);

    const ReportSection& text = sections[0];
    CHECK(text.title == "retrieval/text");
    REQUIRE(text.rows.size() == 1);
    const auto& trow = text.rows[0];
    CHECK(trow[column_index(text, "k")] == "2");
    CHECK(trow[column_index(text, "recall")] == "1.000000");
    CHECK(trow[column_index(text, "precision")] == "0.500000");
    CHECK(trow[column_index(text, "ndcg")] == "1.000000");
    CHECK(trow[column_index(text, "map")] == "1.000000");
    CHECK(trow[column_index(text, "s_recall")] == "1.000000");
    CHECK(trow[column_index(text, "evaluated")] == "1");
    CHECK(trow[column_index(text, "excluded")] == "2");

    const ReportSection& image = sections[1];
    CHECK(image.title == "retrieval/image");
    const auto& irow = image.rows[0];
    CHECK(irow[column_index(image, "recall")] == "1.000000");
    CHECK(irow[column_index(image, "precision")] == "0.500000");
    CHECK(irow[column_index(image, "ndcg")] == "0.630930");
    CHECK(irow[column_index(image, "map")] == "0.500000");
    CHECK(irow[column_index(image, "s_recall")] == "-");
    CHECK(irow[column_index(image, "evaluated")] == "1");
    CHECK(irow[column_index(image, "excluded")] == "2");

    std::vector<RetrievalPrediction> unknown{{"ghost", {}, {}}};
    CHECK_THROWS_AS((void)evaluate_retrieval_stage(unknown, corpus, {2}, backend), SchemaMismatch);
    std::vector<RetrievalPrediction> bad_id{{"c1", {{"not-a-sentence-id", 0.9}}, {}}};
    CHECK_THROWS_AS((void)evaluate_retrieval_stage(bad_id, corpus, {2}, backend), SchemaMismatch);
}

TEST_CASE("verification evaluation reports micro f1 for the configured mode") {
    Corpus corpus;
    Claim c1, c2, c3;
    c1.claim_id = "c1";
    c1.label = TruthfulnessLabel::Supported;
    c2.claim_id = "c2";
    c2.label = TruthfulnessLabel::Refuted;
    c3.claim_id = "c3";
    c3.label = TruthfulnessLabel::Nei;
    corpus.claims = {c1, c2, c3};
    corpus.rebuild_lookup();

    std::vector<VerificationPrediction> predictions{
        {"c1", {0.8, 0.1, 0.1}, TruthfulnessLabel::Supported, {}, {}},
        {"c2", {0.1, 0.2, 0.7}, TruthfulnessLabel::Nei, {}, {}},
        {"c3", {0.1, 0.2, 0.7}, TruthfulnessLabel::Nei, {}, {}}};
    const ReportSection section =
        evaluate_verification_stage(predictions, corpus, EvidenceMode::Gold, EvidenceAblation::Text);
    REQUIRE(section.rows.size() == 1);
    CHECK(section.rows[0][0] == "gold");
    CHECK(section.rows[0][1] == "text");
    CHECK(section.rows[0][2] == "0.666667");
    CHECK(section.rows[0][3] == "3");

    CHECK(evaluate_verification_stage({}, corpus, EvidenceMode::Gold, EvidenceAblation::Both)
              .rows.empty());
    std::vector<VerificationPrediction> unknown{{"ghost", {1, 0, 0}, TruthfulnessLabel::Nei, {}, {}}};
    CHECK_THROWS_AS(
        (void)evaluate_verification_stage(unknown, corpus, EvidenceMode::Gold, EvidenceAblation::Both),
        SchemaMismatch);
}

TEST_CASE("generation evaluation averages matched statements and counts exclusions") {
    StubBackend backend(small_backend());
    Corpus corpus;
    Claim c1, c2, c3;
    c1.claim_id = "c1";
    c1.ruling_statement = "the quick brown fox jumped over fences";
    c2.claim_id = "c2";
    c2.ruling_statement = "another ruling entirely";
    c3.claim_id = "c3";  // no ruling
    corpus.claims = {c1, c2, c3};
    corpus.rebuild_lookup();

    std::vector<GenerationPrediction> predictions{
        {"c1", "the quick brown fox jumped over fences", TruthfulnessLabel::Supported,
         TruthfulnessSource::Gold, EvidenceMode::Gold},
        {"c2", "", TruthfulnessLabel::Nei, TruthfulnessSource::Gold, EvidenceMode::Gold},
        {"c3", "anything", TruthfulnessLabel::Nei, TruthfulnessSource::Gold, EvidenceMode::Gold}};
    const ReportSection section = evaluate_generation_stage(predictions, corpus, backend);
    REQUIRE(section.rows.size() == 1);
    const auto& row = section.rows[0];
    CHECK(row[column_index(section, "evidence")] == "gold");
    CHECK(row[column_index(section, "truthfulness")] == "gold");
    // Exact echo scores 1 everywhere; the empty statement adds zeros.
    CHECK(row[column_index(section, "rouge1_f")] == "0.500000");
    CHECK(row[column_index(section, "rouge2_f")] == "0.500000");
    CHECK(row[column_index(section, "rougeL_f")] == "0.500000");
    CHECK(row[column_index(section, "bleu")] == "1.000000");
    CHECK(row[column_index(section, "embedding_sim")] == "0.500000");
    CHECK(row[column_index(section, "evaluated")] == "2");
    CHECK(row[column_index(section, "excluded")] == "1");

    // Distinct mode pairs land on distinct rows.
    std::vector<GenerationPrediction> mixed = predictions;
    mixed.push_back({"c1", "x", TruthfulnessLabel::Nei, TruthfulnessSource::System,
                     EvidenceMode::System});
    CHECK(evaluate_generation_stage(mixed, corpus, backend).rows.size() == 2);

    std::vector<GenerationPrediction> unknown{
        {"ghost", "x", TruthfulnessLabel::Nei, TruthfulnessSource::Gold, EvidenceMode::Gold}};
    CHECK_THROWS_AS((void)evaluate_generation_stage(unknown, corpus, backend), SchemaMismatch);
}

TEST_CASE("report rendering prints titled tab-separated sections") {
    ReportSection a{"alpha", {"x", "y"}, {{"1", "2"}, {"3", "4"}}};
    ReportSection b{"beta", {"z"}, {{"5"}}};
    CHECK(render_report({a, b}) ==
          "[alpha]\n"
          "x\ty\n"
          "1\t2\n"
          "3\t4\n"
          "\n"
          "[beta]\n"
          "z\n"
          "5\n");
}

TEST_CASE("dataset validation flags injected corpus faults") {
    testutil::TempDir dir("validate");
    synthetic::disk_corpus(dir.path, {});
    CHECK(validate_dataset(dir.path).ok());

    // Dangle a gold evidence reference from the first claim.
    Corpus broken = load_corpus(dir.path);
    broken.claims[0].gold_text_evidence_ids.push_back("ev-missing");
    testutil::TempDir dir2("validate2");
    save_corpus(broken, dir2.path);
    for (const CorpusImage& image : broken.images) {
        testutil::write_file(dir2.path / image.path, "bytes");
    }
    const ValidationReport report = validate_dataset(dir2.path);
    CHECK_FALSE(report.ok());
    CHECK(report.count("dangling_reference") == 1);
}

TEST_CASE("system pipeline hits planted text evidence and writes every artifact") {
    testutil::TempDir corpus_dir("pipe_corpus");
    testutil::TempDir out_dir("pipe_out");
    const Corpus corpus = synthetic::disk_corpus(corpus_dir.path, {});
    const PipelineConfig config = pipeline_config(corpus_dir.path);

    const PipelineReport report = run_end_to_end(config, out_dir.path);

    REQUIRE(report.stages.size() == 3);
    for (const StageStatus& stage : report.stages) CHECK_FALSE(stage.bypassed);
    CHECK(report.stages[0].seed == stage_seed(3, "retrieval"));

    const std::size_t eval_count = corpus.claim_ids_in_split("test").size();
    REQUIRE(eval_count == 3);
    CHECK(report.retrieval.size() == eval_count);
    CHECK(report.verification.size() == eval_count);
    CHECK(report.generation.size() == eval_count);
    std::set<std::string> seen;
    for (const auto& pred : report.generation) seen.insert(pred.claim_id);
    CHECK(seen.size() == eval_count);

    const ReportSection* text = find_section(report.sections, "retrieval/text");
    REQUIRE(text != nullptr);
    REQUIRE_FALSE(text->rows.empty());
    CHECK(text->rows[0][column_index(*text, "k")] == "5");
    CHECK(text->rows[0][column_index(*text, "recall")] == "1.000000");
    CHECK(text->rows[0][column_index(*text, "excluded")] == "0");
    CHECK(find_section(report.sections, "retrieval/image") != nullptr);
    const ReportSection* verification = find_section(report.sections, "verification");
    REQUIRE(verification != nullptr);
    REQUIRE(verification->rows.size() == 1);
    CHECK(verification->rows[0][0] == "system");
    CHECK(verification->rows[0][1] == "both");
    const ReportSection* generation = find_section(report.sections, "generation");
    REQUIRE(generation != nullptr);
    REQUIRE(generation->rows.size() == 1);
    CHECK(generation->rows[0][column_index(*generation, "excluded")] == "0");

    CHECK(std::filesystem::exists(out_dir.path / "predictions" / "retrieval.jsonl"));
    CHECK(std::filesystem::exists(out_dir.path / "predictions" / "verification.jsonl"));
    CHECK(std::filesystem::exists(out_dir.path / "predictions" / "generation.jsonl"));
    CHECK(std::filesystem::exists(out_dir.path / "provenance.json"));
    CHECK(std::filesystem::exists(out_dir.path / "pipeline.log"));
    CHECK(file_bytes(out_dir.path / "report.tsv") == render_report(report.sections));

    // The saved files carry exactly the in-memory predictions.
    CHECK(load_retrieval_predictions(out_dir.path / "predictions" / "retrieval.jsonl") ==
          report.retrieval);
    CHECK(load_verification_predictions(out_dir.path / "predictions" / "verification.jsonl") ==
          report.verification);
    CHECK(load_generation_predictions(out_dir.path / "predictions" / "generation.jsonl") ==
          report.generation);

    // File-level evaluation reproduces the in-run retrieval sections.
    const auto reloaded = evaluate_stage(PipelineStage::Retrieval,
                                         out_dir.path / "predictions" / "retrieval.jsonl",
                                         corpus, config);
    REQUIRE(reloaded.size() == 2);
    CHECK(render_report(reloaded) == render_report({report.sections[0], report.sections[1]}));
}

TEST_CASE("gold modes bypass retrieval and verification") {
    testutil::TempDir corpus_dir("gold_corpus");
    testutil::TempDir out_dir("gold_out");
    const Corpus corpus = synthetic::disk_corpus(corpus_dir.path, {});
    Config raw = Config::parse_string(pipeline_config_text(corpus_dir.path));
    raw.set("mode.evidence", "gold");
    raw.set("mode.truthfulness", "gold");
    const PipelineConfig config = PipelineConfig::from_config(raw);

    const PipelineReport report = run_end_to_end(config, out_dir.path);

    REQUIRE(report.stages.size() == 3);
    CHECK(report.stages[0].name == "retrieval");
    CHECK(report.stages[0].bypassed);
    CHECK(report.stages[1].name == "verification");
    CHECK(report.stages[1].bypassed);
    CHECK_FALSE(report.stages[2].bypassed);
    CHECK(report.retrieval.empty());
    CHECK(report.verification.empty());
    CHECK_FALSE(std::filesystem::exists(out_dir.path / "predictions" / "retrieval.jsonl"));
    CHECK_FALSE(std::filesystem::exists(out_dir.path / "predictions" / "verification.jsonl"));
    CHECK(std::filesystem::exists(out_dir.path / "predictions" / "generation.jsonl"));

    // Gold truthfulness feeds the annotated label straight through.
    for (const GenerationPrediction& pred : report.generation) {
        const Claim* claim = corpus.find_claim(pred.claim_id);
        REQUIRE(claim != nullptr);
        CHECK(pred.label_used == claim->label);
        CHECK(pred.truthfulness_source == TruthfulnessSource::Gold);
        CHECK(pred.evidence_mode == EvidenceMode::Gold);
    }
    REQUIRE(report.sections.size() == 1);
    CHECK(report.sections[0].title == "generation");
}

TEST_CASE("same seed reruns are byte-identical; config changes move the hash") {
    testutil::TempDir corpus_dir("det_corpus");
    testutil::TempDir out_a("det_a");
    testutil::TempDir out_b("det_b");
    synthetic::disk_corpus(corpus_dir.path, {});
    const PipelineConfig config = pipeline_config(corpus_dir.path);

    const PipelineReport first = run_end_to_end(config, out_a.path);
    const PipelineReport second = run_end_to_end(config, out_b.path);

    for (const char* name : {"retrieval.jsonl", "verification.jsonl", "generation.jsonl"}) {
        CHECK(file_bytes(out_a.path / "predictions" / name) ==
              file_bytes(out_b.path / "predictions" / name));
    }
    CHECK(file_bytes(out_a.path / "report.tsv") == file_bytes(out_b.path / "report.tsv"));
    CHECK(file_bytes(out_a.path / "pipeline.log") == file_bytes(out_b.path / "pipeline.log"));
    CHECK(first.config_hash == second.config_hash);

    PipelineConfig altered = config;
    altered.seed = 4;
    testutil::TempDir out_c("det_c");
    const PipelineReport third = run_end_to_end(altered, out_c.path);
    CHECK(third.config_hash != first.config_hash);
}

TEST_CASE("every ablation and mode combination is reachable") {
    testutil::TempDir corpus_dir("abl_corpus");
    synthetic::disk_corpus(corpus_dir.path, {});
    for (const char* ablation : {"none", "text", "image"}) {
        testutil::TempDir out_dir(std::string("abl_") + ablation);
        Config raw = Config::parse_string(pipeline_config_text(corpus_dir.path));
        raw.set("mode.evidence", "gold");
        raw.set("mode.ablation", ablation);
        const PipelineReport report =
            run_end_to_end(PipelineConfig::from_config(raw), out_dir.path);
        const ReportSection* verification = find_section(report.sections, "verification");
        REQUIRE(verification != nullptr);
        REQUIRE(verification->rows.size() == 1);
        CHECK(verification->rows[0][0] == "gold");
        CHECK(verification->rows[0][1] == ablation);
    }
}

TEST_CASE("generation failure leaves earlier stage outputs intact") {
    testutil::TempDir corpus_dir("fail_corpus");
    testutil::TempDir out_dir("fail_out");
    synthetic::DiskCorpusOptions options;
    options.with_rulings = false;
    synthetic::disk_corpus(corpus_dir.path, options);
    const PipelineConfig config = pipeline_config(corpus_dir.path);

    bool failed = false;
    try {
        (void)run_end_to_end(config, out_dir.path);
    } catch (const StageFailure& e) {
        failed = true;
        CHECK(e.stage == "generation");
    }
    CHECK(failed);

    CHECK(load_retrieval_predictions(out_dir.path / "predictions" / "retrieval.jsonl").size() == 3);
    CHECK(load_verification_predictions(out_dir.path / "predictions" / "verification.jsonl").size() ==
          3);
    CHECK_FALSE(std::filesystem::exists(out_dir.path / "predictions" / "generation.jsonl"));
    const std::string tsv = file_bytes(out_dir.path / "report.tsv");
    CHECK(tsv.find("[retrieval/text]") != std::string::npos);
    CHECK(tsv.find("[verification]") != std::string::npos);
    CHECK(tsv.find("[generation]") == std::string::npos);
}

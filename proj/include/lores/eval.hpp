#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace lores {

// Scoring tokenizer, fixed and versioned: no lowercasing, ASCII
// punctuation split from words, whitespace tokenize. All scores in this
// repo cite this tokenizer.
inline const char* kBleuTokenizerVersion = "v1";
std::vector<std::string> bleu_tokenize(const std::string& sentence);

struct BleuReport {
    double score = 0.0;                      // in [0, 100]
    std::array<double, 4> precisions{};      // modified n-gram precisions
    double brevity_penalty = 1.0;
    int64_t hyp_len = 0;
    int64_t ref_len = 0;

    // Machine-readable one-liner:
    // BLEU=<s> P=<p1>/<p2>/<p3>/<p4> BP=<bp> hyp_len=<c> ref_len=<r>
    std::string record() const;
    std::string pretty() const;
};

// Corpus-level BLEU-4: clipped modified n-gram precisions summed over the
// corpus, multiplicative brevity penalty exp(1 - r/c) when c < r. Strict
// zero-precision handling (no smoothing); orders with no n-grams at all
// are vacuous and report precision 1.
// Errors: LengthMismatch, EmptyCorpus.
BleuReport corpus_bleu(const std::vector<std::string>& hypotheses,
                       const std::vector<std::string>& references);

// BLEU internals, exposed for testing: clipped matches and totals for one
// n-gram order (n in 1..4).
std::pair<int64_t, int64_t> ngram_precision(const std::vector<std::string>& hypotheses,
                                            const std::vector<std::string>& references, int n);

// Sentence-level diagnostic with add-one smoothing on zero counts; never
// used for reported corpus scores.
double sentence_bleu_smoothed(const std::string& hypothesis, const std::string& reference);

struct ExperimentRow {
    std::string dataset;
    std::vector<std::pair<std::string, int64_t>> subwords;  // lang -> merge budget
    int64_t lines = 0;
    std::vector<std::pair<std::string, int64_t>> tokens;    // lang -> token count
    std::vector<std::pair<std::string, double>> bleu;       // "src-tgt" -> score
};

enum class ReportFormat { tsv, markdown };

// Deterministic rendering with the fixed column set
// dataset | subwords | lines | tokens:<lang>... | bleu:<direction>...
// Language and direction columns appear in first-mention order.
std::string experiment_report(const std::vector<ExperimentRow>& rows, ReportFormat format);

std::string experiment_row_to_json(const ExperimentRow& row);
ExperimentRow experiment_row_from_json(const std::string& json_text);

}  // namespace lores

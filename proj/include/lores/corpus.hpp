#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lores {

// Short lowercase language identifier ("sc", "en", "it", ...). The set of
// known tags is closed per run; validation against that set happens where
// a config is in scope.
struct LangTag {
    std::string code;

    LangTag() = default;
    explicit LangTag(std::string c);

    bool operator==(const LangTag& o) const { return code == o.code; }
    bool operator!=(const LangTag& o) const { return code != o.code; }
    bool operator<(const LangTag& o) const { return code < o.code; }
};

bool valid_lang_code(const std::string& code);

enum class Origin { parallel, bridge, synthetic };

const char* origin_name(Origin o);

struct SentencePair {
    std::string src_text;
    std::string tgt_text;
    LangTag src_lang;
    LangTag tgt_lang;
    Origin origin = Origin::parallel;
};

// Validates the SentencePair invariants (nonempty after trim, no interior
// newline, distinct languages).
SentencePair make_pair(std::string src_text, std::string tgt_text, LangTag src_lang,
                       LangTag tgt_lang, Origin origin);

struct Corpus {
    std::vector<SentencePair> pairs;
    std::string provenance;

    size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

// One row of mutually translated sentences, column order fixed by the
// trilingual TSV format.
struct TriRow {
    std::string sc;
    std::string en;
    std::string it;
};

// Two aligned one-sentence-per-line files -> Corpus.
// Errors: LineCountMismatch(n_src, n_tgt), InvalidEncoding(line_no),
// EmptyLine(line_no); line numbers are 1-based and reported with the file.
Corpus ingest_parallel(const std::string& src_path, const std::string& tgt_path,
                       const LangTag& src_lang, const LangTag& tgt_lang);

// Inverse of ingest_parallel: one sentence per line, '\n' terminated.
void write_parallel(const Corpus& c, const std::string& src_path, const std::string& tgt_path);

// Removes exact duplicates (trimmed (src,tgt) match, first kept), pairs
// with a side longer than max_len whitespace tokens, and pairs whose token
// count ratio exceeds max_ratio. Survivor order preserved.
Corpus clean_and_dedup(const Corpus& c, size_t max_len, double max_ratio);

struct SplitResult {
    Corpus train;
    Corpus dev;
    Corpus test;
};

// Deterministic pseudo-random partition; sizes are round(frac*N) with
// train taking the remainder. Original corpus order is kept inside each
// split.
SplitResult split_corpus(const Corpus& c, double dev_frac, double test_frac, uint64_t seed);

// TSV with literal header "sc\ten\tit", exactly 3 columns per row.
// Errors: BadHeader, ColumnCountMismatch(line_no), EmptyField(line_no).
std::vector<TriRow> ingest_trilingual(const std::string& tsv_path);

void write_trilingual(const std::vector<TriRow>& rows, const std::string& tsv_path);

}  // namespace lores

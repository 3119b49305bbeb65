#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lores/corpus.hpp"

namespace lores {

// Deduplicated word list (dictionary entries plus inflection tables).
// Added once to the BPE training counts so the learned subword inventory
// fills up with stems and desinences without disturbing whole-word
// frequencies.
struct BiasLexicon {
    std::vector<std::string> words;  // sorted, unique
    std::vector<std::string> sources;

    bool contains(const std::string& w) const;
};

// Ordered BPE merge rules. Symbols are UTF-8 strings; a word is the
// sequence of its code points plus the end-of-word sentinel, and merges
// replay in learned order.
struct MergeTable {
    std::vector<std::pair<std::string, std::string>> merges;
    std::string end_marker = "</w>";

    size_t num_merges() const { return merges.size(); }
};

struct SubwordVocab {
    std::map<std::string, int64_t> entries;  // token -> corpus count

    size_t size() const { return entries.size(); }
};

inline const char* kJoiner = "@@";

// One word per line, UTF-8; union of all files, duplicates removed,
// sorted for reproducibility. Errors: EmptyLexicon.
BiasLexicon build_bias_lexicon(const std::vector<std::string>& word_list_files);

BiasLexicon lexicon_from_words(std::vector<std::string> words, std::string source);

// Whitespace word counts of one corpus side; the count map BPE learns from.
std::map<std::string, int64_t> count_words(const std::vector<std::string>& sentences);

enum class Side { source, target };

std::vector<std::string> corpus_side(const Corpus& c, Side side);

// Lexicon injection: every lexicon word's count is incremented by exactly
// one; corpus counts themselves are never modified.
std::map<std::string, int64_t> biased_counts(std::map<std::string, int64_t> counts,
                                             const BiasLexicon* lexicon);

// Standard BPE learning: repeatedly merge the most frequent adjacent
// symbol pair, ties broken lexicographically on (left, right). Stops early
// when no pair occurs at least twice.
MergeTable learn_merges(const std::map<std::string, int64_t>& word_counts,
                        const BiasLexicon* lexicon, size_t num_merges);

// Splits one word into subword pieces by replaying merges in table order.
// Non-final pieces carry the "@@" joiner; unknown characters pass through.
std::vector<std::string> segment_word(const MergeTable& mt, const std::string& word);

// Whitespace-tokenized sentence -> subword tokens. Words for which
// `is_protected` returns true (e.g. direction tokens) pass through whole.
std::vector<std::string> segment(const MergeTable& mt, const std::string& sentence,
                                 bool (*is_protected)(const std::string&) = nullptr);

// Inverse of segment: joins "x@@" to its successor without a space.
// Errors: DanglingJoiner if the final token carries the joiner.
std::string desegment(const std::vector<std::string>& tokens);

SubwordVocab build_subword_vocab(const MergeTable& mt, const Corpus& c, Side side);
SubwordVocab vocab_from_sentences(const MergeTable& mt, const std::vector<std::string>& sentences);

// Merges file: line 1 "#bpe-merges v1 <count> <end_marker>", then one
// "left right" pair per line in learned order.
void write_merges(const MergeTable& mt, const std::string& path);
MergeTable read_merges(const std::string& path);

// Vocab file: "token<TAB>count" per line, descending count, ties
// lexicographic.
void write_vocab(const SubwordVocab& v, const std::string& path);

std::string serialize_merges(const MergeTable& mt);
std::string serialize_vocab(const SubwordVocab& v);

}  // namespace lores

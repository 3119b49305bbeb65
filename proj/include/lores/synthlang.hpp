#pragma once

// Deterministic synthetic related-language generator. Three toy languages
// share stems and differ by word endings (a token bijection), with an
// optional set of irregular words that share nothing across languages.
// Used by the bundled toy dataset and the verification suites.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lores/corpus.hpp"

namespace lores::synth {

struct SynthSpec {
    int n_stems = 30;
    int n_irregular = 0;
    std::array<std::string, 3> endings{{"u", "is", "o"}};
    std::array<LangTag, 3> langs{};
    int min_len = 2;
    int max_len = 6;
    uint64_t seed = 1;
};

struct SynthLexicon {
    // words[i] = the three translations of vocabulary item i, in language
    // order; irregular[i] marks items with unrelated surface forms.
    std::vector<std::array<std::string, 3>> words;
    std::vector<bool> irregular;
};

SynthLexicon make_lexicon(const SynthSpec& spec);

// Mutually translated rows: each row is a random word-index sequence
// rendered in all three languages. Deterministic in (spec.seed, salt).
std::vector<TriRow> make_rows(const SynthSpec& spec, const SynthLexicon& lex, int n_rows,
                              uint64_t salt);

// Directed pairs for one language index pair, drawn from fresh rows.
Corpus make_parallel(const SynthSpec& spec, const SynthLexicon& lex, int n_rows, int src_idx,
                     int tgt_idx, uint64_t salt);

}  // namespace lores::synth

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lores/corpus.hpp"

namespace lores {

// Reserved source-prefix token selecting the target language, "<2it>".
// Never produced by segmentation; a first-class member of the model
// vocabulary.
std::string direction_token(const LangTag& tgt);

// True for any well-formed direction token "<2xx>"/"<2xxx>".
bool is_direction_token(const std::string& word);

// Returns p with src_text prefixed by "<2tgt> ".
// Errors: AlreadyTagged if the source already starts with a direction
// token, UnknownLanguage if p.tgt_lang is not in `known`.
SentencePair tag_direction(const SentencePair& p, const std::vector<LangTag>& known);

struct MultiwayDirection {
    LangTag src;
    LangTag tgt;
    Corpus corpus;
    double weight = 1.0;
};

struct MultiwaySpec {
    std::vector<MultiwayDirection> directions;
};

// Expands mutually-translated rows into directed pairs (origin = bridge).
// `langs` assigns language tags to the three TriRow columns in order.
Corpus expand_bridge(const std::vector<TriRow>& rows, const std::array<LangTag, 3>& langs,
                     const std::vector<std::pair<LangTag, LangTag>>& directions);

std::vector<std::pair<LangTag, LangTag>> all_six_directions(const std::array<LangTag, 3>& langs);

// Each direction's corpus repeated floor(weight) times plus a seeded
// random subset of size round(frac(weight)*N), then a seeded shuffle of
// the concatenation.
Corpus oversample(const MultiwaySpec& spec, uint64_t seed);

// oversample + tag_direction on every pair; ready for segmentation.
Corpus assemble_multiway(const MultiwaySpec& spec, const std::vector<LangTag>& known,
                         uint64_t seed);

}  // namespace lores

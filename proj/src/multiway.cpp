#include "lores/multiway.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "lores/errors.hpp"
#include "lores/rng.hpp"
#include "lores/text.hpp"

namespace lores {

std::string direction_token(const LangTag& tgt) { return "<2" + tgt.code + ">"; }

bool is_direction_token(const std::string& word) {
    if (word.size() < 5 || word.size() > 6) return false;
    if (word[0] != '<' || word[1] != '2' || word.back() != '>') return false;
    for (size_t i = 2; i + 1 < word.size(); ++i)
        if (word[i] < 'a' || word[i] > 'z') return false;
    return true;
}

SentencePair tag_direction(const SentencePair& p, const std::vector<LangTag>& known) {
    if (std::find(known.begin(), known.end(), p.tgt_lang) == known.end())
        fail("UnknownLanguage", "target language '" + p.tgt_lang.code + "' is not declared");
    const auto words = split_ws(p.src_text);
    if (!words.empty() && is_direction_token(words.front()))
        fail("AlreadyTagged", "source already starts with " + words.front());
    SentencePair tagged = p;
    tagged.src_text = direction_token(p.tgt_lang) + " " + p.src_text;
    return tagged;
}

std::vector<std::pair<LangTag, LangTag>> all_six_directions(const std::array<LangTag, 3>& langs) {
    std::vector<std::pair<LangTag, LangTag>> out;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            if (a != b) out.emplace_back(langs[a], langs[b]);
    return out;
}

Corpus expand_bridge(const std::vector<TriRow>& rows, const std::array<LangTag, 3>& langs,
                     const std::vector<std::pair<LangTag, LangTag>>& directions) {
    if (directions.empty()) fail("EmptyDirections", "expand_bridge needs at least one direction");
    auto text_of = [&](const TriRow& row, const LangTag& lang) -> const std::string& {
        if (lang == langs[0]) return row.sc;
        if (lang == langs[1]) return row.en;
        if (lang == langs[2]) return row.it;
        fail("UnknownLanguage", "'" + lang.code + "' is not one of the bridge languages");
    };
    Corpus out;
    out.provenance = "bridge";
    out.pairs.reserve(rows.size() * directions.size());
    for (const auto& row : rows)
        for (const auto& [src, tgt] : directions)
            out.pairs.push_back(
                make_pair(text_of(row, src), text_of(row, tgt), src, tgt, Origin::bridge));
    return out;
}

Corpus oversample(const MultiwaySpec& spec, uint64_t seed) {
    if (spec.directions.empty()) fail("EmptySpec", "multiway spec has no directions");
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& d : spec.directions) {
        if (!(d.weight > 0) || !std::isfinite(d.weight))
            fail("InvalidWeight", "direction weight must be finite and > 0");
        const auto key = std::make_tuple(d.src.code, d.tgt.code, d.corpus.provenance);
        if (!seen.insert(key).second)
            fail("DuplicateDirection", "duplicate (src,tgt,provenance) entry " + d.src.code +
                                           "->" + d.tgt.code + " '" + d.corpus.provenance + "'");
    }

    Corpus out;
    out.provenance = "multiway";
    for (size_t di = 0; di < spec.directions.size(); ++di) {
        const auto& d = spec.directions[di];
        const size_t n = d.corpus.pairs.size();
        const auto whole = static_cast<size_t>(std::floor(d.weight));
        const double frac = d.weight - static_cast<double>(whole);
        for (size_t rep = 0; rep < whole; ++rep)
            out.pairs.insert(out.pairs.end(), d.corpus.pairs.begin(), d.corpus.pairs.end());
        const auto extra = static_cast<size_t>(std::llround(frac * static_cast<double>(n)));
        if (extra > 0) {
            Rng rng(derive_seed(seed, "oversample-frac", di));
            for (size_t idx : sample_indices(n, extra, rng))
                out.pairs.push_back(d.corpus.pairs[idx]);
        }
    }
    Rng rng(derive_seed(seed, "oversample-shuffle"));
    shuffle(out.pairs, rng);
    return out;
}

Corpus assemble_multiway(const MultiwaySpec& spec, const std::vector<LangTag>& known,
                         uint64_t seed) {
    Corpus mixed = oversample(spec, seed);
    for (auto& p : mixed.pairs) p = tag_direction(p, known);
    return mixed;
}

}  // namespace lores

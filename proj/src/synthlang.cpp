#include "lores/synthlang.hpp"

#include <set>

#include "lores/errors.hpp"
#include "lores/rng.hpp"
#include "lores/text.hpp"

namespace lores::synth {

namespace {

const char* kConsonants = "bcdfgjlmnprstvz";
const char* kVowels = "aeiou";

std::string random_stem(Rng& rng) {
    const std::string cons = kConsonants;
    const std::string vows = kVowels;
    // Sicilian-flavored stem shape: C V C C (parr-, mett-, cant-).
    std::string s;
    s += cons[rng.below(cons.size())];
    s += vows[rng.below(vows.size())];
    const char c2 = cons[rng.below(cons.size())];
    s += c2;
    if (rng.uniform() < 0.5)
        s += c2;  // geminate
    else
        s += cons[rng.below(cons.size())];
    return s;
}

std::string random_word(Rng& rng, int min_len, int max_len) {
    const std::string cons = kConsonants;
    const std::string vows = kVowels;
    const int len = min_len + static_cast<int>(rng.below(
                                  static_cast<uint64_t>(max_len - min_len + 1)));
    std::string s;
    for (int i = 0; i < len; ++i)
        s += (i % 2 == 0) ? cons[rng.below(cons.size())] : vows[rng.below(vows.size())];
    return s;
}

}  // namespace

SynthLexicon make_lexicon(const SynthSpec& spec) {
    Rng rng(derive_seed(spec.seed, "synth-lexicon"));
    SynthLexicon lex;
    std::set<std::string> taken;

    for (int i = 0; i < spec.n_stems; ++i) {
        std::string stem;
        std::array<std::string, 3> forms;
        for (int attempt = 0;; ++attempt) {
            if (attempt > 10000) fail("SynthExhausted", "cannot generate distinct stems");
            stem = random_stem(rng);
            bool clash = false;
            for (int k = 0; k < 3; ++k) {
                forms[static_cast<size_t>(k)] = stem + spec.endings[static_cast<size_t>(k)];
                if (taken.count(forms[static_cast<size_t>(k)])) clash = true;
            }
            if (!clash) break;
        }
        for (const auto& f : forms) taken.insert(f);
        lex.words.push_back(forms);
        lex.irregular.push_back(false);
    }

    for (int i = 0; i < spec.n_irregular; ++i) {
        std::array<std::string, 3> forms;
        for (int k = 0; k < 3; ++k) {
            for (int attempt = 0;; ++attempt) {
                if (attempt > 10000) fail("SynthExhausted", "cannot generate irregular words");
                const std::string w = random_word(rng, 5, 8);
                if (!taken.count(w)) {
                    forms[static_cast<size_t>(k)] = w;
                    taken.insert(w);
                    break;
                }
            }
        }
        lex.words.push_back(forms);
        lex.irregular.push_back(true);
    }
    return lex;
}

std::vector<TriRow> make_rows(const SynthSpec& spec, const SynthLexicon& lex, int n_rows,
                              uint64_t salt) {
    Rng rng(derive_seed(spec.seed, "synth-rows", salt));
    std::vector<TriRow> rows;
    rows.reserve(static_cast<size_t>(n_rows));
    for (int r = 0; r < n_rows; ++r) {
        const int len = spec.min_len + static_cast<int>(rng.below(static_cast<uint64_t>(
                                           spec.max_len - spec.min_len + 1)));
        std::vector<std::string> a, b, c;
        for (int i = 0; i < len; ++i) {
            const auto w = static_cast<size_t>(rng.below(lex.words.size()));
            a.push_back(lex.words[w][0]);
            b.push_back(lex.words[w][1]);
            c.push_back(lex.words[w][2]);
        }
        rows.push_back(TriRow{join(a, " "), join(b, " "), join(c, " ")});
    }
    return rows;
}

Corpus make_parallel(const SynthSpec& spec, const SynthLexicon& lex, int n_rows, int src_idx,
                     int tgt_idx, uint64_t salt) {
    const auto rows = make_rows(spec, lex, n_rows, salt);
    Corpus out;
    out.provenance = "synth:" + spec.langs[static_cast<size_t>(src_idx)].code + "-" +
                     spec.langs[static_cast<size_t>(tgt_idx)].code;
    auto field = [](const TriRow& r, int idx) -> const std::string& {
        return idx == 0 ? r.sc : (idx == 1 ? r.en : r.it);
    };
    for (const auto& r : rows)
        out.pairs.push_back(make_pair(field(r, src_idx), field(r, tgt_idx),
                                      spec.langs[static_cast<size_t>(src_idx)],
                                      spec.langs[static_cast<size_t>(tgt_idx)],
                                      Origin::parallel));
    return out;
}

}  // namespace lores::synth

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lores/corpus.hpp"
#include "lores/model/nmt.hpp"

namespace lores {

struct MonolingualCorpus {
    std::vector<std::string> sentences;
    LangTag lang;
};

// One sentence per line, UTF-8.
MonolingualCorpus read_monolingual(const std::string& path, const LangTag& lang);

// Per-sentence outcome log for generate_synthetic.
struct BacktransLog {
    int64_t attempted = 0;
    int64_t failed = 0;
    std::vector<std::string> failures;  // "line <n>: <error>"
};

// Core generation against any sentence-level translator; the model
// overload below binds a reverse-direction checkpoint. Output pairs are
// (synthetic source in to_lang, real monolingual sentence); failed
// sentences are skipped and logged.
Corpus generate_synthetic(const std::function<std::string(const std::string&)>& reverse_translate,
                          const MonolingualCorpus& mono, const LangTag& to_lang,
                          BacktransLog* log);

// Reverse model translates mono.lang -> to_lang; generation fans out
// across sentences but output order always matches input order.
Corpus generate_synthetic(const model::Checkpoint& reverse_model, const MonolingualCorpus& mono,
                          const LangTag& to_lang, int beam, BacktransLog* log = nullptr);

// Concatenates real and synthetic pairs, repeating the synthetic part per
// weight with the same floor-plus-seeded-fraction semantics as
// multiway::oversample. Errors: DirectionMismatch.
Corpus merge_synthetic(const Corpus& parallel, const Corpus& synthetic, double synthetic_weight,
                       uint64_t seed = 0);

}  // namespace lores

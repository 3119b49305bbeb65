#include "lores/backtrans.hpp"

#include <cmath>

#include "lores/errors.hpp"
#include "lores/multiway.hpp"
#include "lores/parallel.hpp"
#include "lores/rng.hpp"
#include "lores/subword.hpp"
#include "lores/text.hpp"

namespace lores {

MonolingualCorpus read_monolingual(const std::string& path, const LangTag& lang) {
    MonolingualCorpus mono;
    mono.lang = lang;
    for (const auto& line : read_lines(path)) {
        if (!utf8_valid(line)) fail("InvalidEncoding", path + " is not valid UTF-8");
        if (trim(line).empty()) continue;
        mono.sentences.push_back(line);
    }
    if (mono.sentences.empty()) fail("EmptyCorpus", path + " has no sentences");
    return mono;
}

Corpus generate_synthetic(const std::function<std::string(const std::string&)>& reverse_translate,
                          const MonolingualCorpus& mono, const LangTag& to_lang,
                          BacktransLog* log) {
    if (mono.lang == to_lang)
        fail("SameLanguagePair", "monolingual text is already in '" + to_lang.code + "'");
    if (mono.sentences.empty()) fail("EmptyCorpus", "monolingual corpus is empty");

    const int n = static_cast<int>(mono.sentences.size());
    std::vector<std::string> outputs(static_cast<size_t>(n));
    std::vector<std::string> errors(static_cast<size_t>(n));
    parallel_shards(n, worker_threads(), [&](int, int begin, int end) {
        for (int i = begin; i < end; ++i) {
            try {
                outputs[static_cast<size_t>(i)] =
                    reverse_translate(mono.sentences[static_cast<size_t>(i)]);
            } catch (const Error& e) {
                errors[static_cast<size_t>(i)] = e.what();
            }
        }
    });

    Corpus out;
    out.provenance = "backtranslation:" + mono.lang.code + "->" + to_lang.code;
    BacktransLog local;
    local.attempted = n;
    for (int i = 0; i < n; ++i) {
        const auto idx = static_cast<size_t>(i);
        if (!errors[idx].empty() || trim(outputs[idx]).empty()) {
            ++local.failed;
            local.failures.push_back("line " + std::to_string(i + 1) + ": " +
                                     (errors[idx].empty() ? "empty output" : errors[idx]));
            continue;
        }
        // Synthetic side is the model output; the real monolingual sentence
        // stays verbatim on the target side.
        out.pairs.push_back(SentencePair{outputs[idx], mono.sentences[idx], to_lang, mono.lang,
                                         Origin::synthetic});
    }
    if (log) *log = std::move(local);
    return out;
}

Corpus generate_synthetic(const model::Checkpoint& reverse_model, const MonolingualCorpus& mono,
                          const LangTag& to_lang, int beam, BacktransLog* log) {
    const model::Translator translator(reverse_model);
    const MergeTable& merges = reverse_model.merges_src;
    const std::string tag = direction_token(to_lang);
    auto translate_one = [&](const std::string& sentence) {
        std::vector<std::string> tokens{tag};
        for (const auto& t : segment(merges, sentence, is_direction_token))
            tokens.push_back(t);
        return desegment(translator.tokens(tokens, beam, 2.0));
    };
    return generate_synthetic(translate_one, mono, to_lang, log);
}

Corpus merge_synthetic(const Corpus& parallel, const Corpus& synthetic, double synthetic_weight,
                       uint64_t seed) {
    if (synthetic_weight < 0 || !std::isfinite(synthetic_weight))
        fail("InvalidWeight", "synthetic_weight must be finite and >= 0");
    for (const auto& p : synthetic.pairs) {
        if (parallel.pairs.empty()) break;
        const auto& ref = parallel.pairs.front();
        if (p.src_lang != ref.src_lang || p.tgt_lang != ref.tgt_lang)
            fail("DirectionMismatch", "synthetic corpus is " + p.src_lang.code + "->" +
                                          p.tgt_lang.code + ", parallel is " +
                                          ref.src_lang.code + "->" + ref.tgt_lang.code);
    }

    Corpus out;
    out.provenance = parallel.provenance + "+synthetic";
    out.pairs = parallel.pairs;
    const auto whole = static_cast<size_t>(std::floor(synthetic_weight));
    for (size_t rep = 0; rep < whole; ++rep)
        out.pairs.insert(out.pairs.end(), synthetic.pairs.begin(), synthetic.pairs.end());
    const double frac = synthetic_weight - std::floor(synthetic_weight);
    const auto extra = static_cast<size_t>(
        std::llround(frac * static_cast<double>(synthetic.pairs.size())));
    if (extra > 0) {
        Rng rng(derive_seed(seed, "merge-synthetic"));
        for (size_t idx : sample_indices(synthetic.pairs.size(), extra, rng))
            out.pairs.push_back(synthetic.pairs[idx]);
    }
    return out;
}

}  // namespace lores

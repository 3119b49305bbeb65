#include <algorithm>
#include <cmath>

#include "lores/errors.hpp"
#include "lores/model/nmt.hpp"
#include "lores/subword.hpp"
#include "lores/text.hpp"

namespace lores::model {

namespace {

struct Hyp {
    std::vector<int> ids;
    double logp = 0.0;

    double norm_score(bool finished) const {
        const auto len = static_cast<double>(ids.size()) + (finished ? 1.0 : 0.0);
        return logp / std::max(1.0, len);
    }
};

std::vector<int> beam_decode(const Transformer<float>& model, const std::vector<int>& src_ids,
                             int beam, double max_len_factor) {
    if (beam < 1) fail("InvalidBeam", "beam must be >= 1");
    std::vector<int> src = src_ids;
    src.push_back(Vocab::kEos);
    const auto encoded = model.encode_one(src);

    const int max_len = std::max(
        2, static_cast<int>(std::ceil(max_len_factor * static_cast<double>(src_ids.size()))));

    std::vector<Hyp> live{Hyp{}};
    std::vector<Hyp> finished;

    for (int step = 0; step < max_len && !live.empty(); ++step) {
        std::vector<std::vector<int>> prefixes;
        prefixes.reserve(live.size());
        for (const auto& h : live) prefixes.push_back(h.ids);
        const Mat<float> logprobs = model.next_token_logprobs(encoded, prefixes, Vocab::kBos);

        struct Cand {
            double score;
            int hyp;
            int tok;
        };
        std::vector<Cand> cands;
        cands.reserve(live.size() * static_cast<size_t>(model.tgt_vocab()));
        for (size_t i = 0; i < live.size(); ++i)
            for (int v = 0; v < model.tgt_vocab(); ++v) {
                if (v == Vocab::kPad || v == Vocab::kBos) continue;
                cands.push_back(Cand{live[i].logp + logprobs(static_cast<Eigen::Index>(i), v),
                                     static_cast<int>(i), v});
            }
        const size_t keep = std::min(cands.size(), static_cast<size_t>(beam));
        std::partial_sort(cands.begin(), cands.begin() + static_cast<long>(keep), cands.end(),
                          [](const Cand& a, const Cand& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.hyp != b.hyp) return a.hyp < b.hyp;
                              return a.tok < b.tok;
                          });

        std::vector<Hyp> next;
        for (size_t c = 0; c < keep; ++c) {
            Hyp h = live[static_cast<size_t>(cands[c].hyp)];
            h.logp = cands[c].score;
            if (cands[c].tok == Vocab::kEos) {
                finished.push_back(h);
            } else {
                h.ids.push_back(cands[c].tok);
                next.push_back(std::move(h));
            }
        }
        live = std::move(next);
        if (static_cast<int>(finished.size()) >= beam) break;
    }

    // Hypotheses that hit the length cap compete with their running score.
    for (auto& h : live) finished.push_back(std::move(h));
    const Hyp* best = nullptr;
    for (const auto& h : finished)
        if (!best || h.norm_score(true) > best->norm_score(true)) best = &h;
    return best ? best->ids : std::vector<int>{};
}

}  // namespace

std::vector<std::string> translate_tokens(const Checkpoint& ck,
                                          const std::vector<std::string>& src_tokens, int beam,
                                          double max_len_factor) {
    Transformer<float> model(ck.config, ck.src_vocab.size(), ck.tgt_vocab.size());
    model.params() = ck.params;
    std::vector<int> ids;
    ids.reserve(src_tokens.size());
    for (const auto& t : src_tokens) ids.push_back(ck.src_vocab.id(t));
    const std::vector<int> out = beam_decode(model, ids, beam, max_len_factor);
    std::vector<std::string> tokens;
    tokens.reserve(out.size());
    for (int id : out) tokens.push_back(ck.tgt_vocab.token(id));
    return tokens;
}

std::string translate(const Checkpoint& ck, const std::string& tagged_segmented_src, int beam,
                      double max_len_factor) {
    const auto out = translate_tokens(ck, split_ws(tagged_segmented_src), beam, max_len_factor);
    return desegment(out);
}

Translator::Translator(const Checkpoint& ck)
    : model_(ck.config, ck.src_vocab.size(), ck.tgt_vocab.size()),
      src_vocab_(ck.src_vocab),
      tgt_vocab_(ck.tgt_vocab) {
    model_.params() = ck.params;
}

std::vector<std::string> Translator::tokens(const std::vector<std::string>& src_tokens, int beam,
                                            double max_len_factor) const {
    std::vector<int> ids;
    ids.reserve(src_tokens.size());
    for (const auto& t : src_tokens) ids.push_back(src_vocab_.id(t));
    const std::vector<int> out = beam_decode(model_, ids, beam, max_len_factor);
    std::vector<std::string> result;
    result.reserve(out.size());
    for (int id : out) result.push_back(tgt_vocab_.token(id));
    return result;
}

std::string Translator::line(const std::string& tagged_segmented_src, int beam,
                             double max_len_factor) const {
    return desegment(tokens(split_ws(tagged_segmented_src), beam, max_len_factor));
}

}  // namespace lores::model

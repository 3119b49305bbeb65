#include <algorithm>
#include <cmath>

#include "lores/errors.hpp"
#include "lores/model/nmt.hpp"
#include "lores/rng.hpp"

namespace lores::model {

double gradient_check(const ModelConfig& cfg, const std::vector<TokenizedPair>& pairs,
                      double epsilon, int samples_per_tensor, uint64_t seed) {
    if (samples_per_tensor <= 0) return 0.0;  // vacuous subset
    if (pairs.empty()) fail("EmptyCorpus", "gradient check needs at least one pair");

    Vocab vocab;
    for (const auto& p : pairs) {
        for (const auto& t : p.src) vocab.add(t);
        for (const auto& t : p.tgt) vocab.add(t);
    }
    std::vector<std::vector<int>> src_ids, tgt_ids;
    for (const auto& p : pairs) {
        std::vector<int> s, t;
        for (const auto& tok : p.src) s.push_back(vocab.id(tok));
        for (const auto& tok : p.tgt) t.push_back(vocab.id(tok));
        src_ids.push_back(std::move(s));
        tgt_ids.push_back(std::move(t));
    }
    const Batch batch = make_batch(src_ids, tgt_ids, Vocab::kPad, Vocab::kBos, Vocab::kEos);

    Transformer<double> model(cfg, vocab.size(), vocab.size());
    model.init_params(seed);

    ParamSet<double> grads = model.params().zeros_like();
    model.forward_backward(batch, grads, nullptr, cfg.label_smoothing);

    Rng rng(derive_seed(seed, "gradcheck"));
    double max_rel = 0.0;
    for (size_t ti = 0; ti < model.params().tensors.size(); ++ti) {
        auto& tensor = model.params().tensors[ti];
        const auto size = static_cast<uint64_t>(tensor.size());
        const int n_samples =
            static_cast<int>(std::min<uint64_t>(size, static_cast<uint64_t>(samples_per_tensor)));
        for (int s = 0; s < n_samples; ++s) {
            const auto flat = static_cast<Eigen::Index>(rng.below(size));
            double* cell = tensor.data() + flat;
            const double saved = *cell;

            *cell = saved + epsilon;
            const double up = model.eval_loss(batch, cfg.label_smoothing).loss_sum;
            *cell = saved - epsilon;
            const double down = model.eval_loss(batch, cfg.label_smoothing).loss_sum;
            *cell = saved;

            const double numeric = (up - down) / (2.0 * epsilon);
            const double analytic = grads.tensors[ti].data()[flat];
            // Floor keeps finite-difference noise on near-zero entries from
            // registering as relative error.
            const double denom =
                std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace lores::model

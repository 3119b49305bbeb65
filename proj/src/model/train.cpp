#include <algorithm>
#include <cmath>
#include <iostream>

#include "lores/errors.hpp"
#include "lores/model/nmt.hpp"
#include "lores/parallel.hpp"
#include "lores/rng.hpp"
#include "lores/text.hpp"

namespace lores::model {

void TrainSpec::validate() const {
    if (batch_tokens < 1) fail("InvalidTrainSpec", "batch_tokens must be >= 1");
    if (max_updates < 0) fail("InvalidTrainSpec", "max_updates must be >= 0");
    if (patience < 1) fail("InvalidTrainSpec", "patience must be >= 1");
    if (checkpoint_interval < 1) fail("InvalidTrainSpec", "checkpoint_interval must be >= 1");
    if (warmup < 1) fail("InvalidTrainSpec", "warmup must be >= 1");
    if (!(lr_peak > 0)) fail("InvalidTrainSpec", "lr_peak must be > 0");
}

std::vector<TokenizedPair> tokenize_corpus(const Corpus& c) {
    std::vector<TokenizedPair> out;
    out.reserve(c.pairs.size());
    for (const auto& p : c.pairs)
        out.push_back(TokenizedPair{split_ws(p.src_text), split_ws(p.tgt_text)});
    return out;
}

std::vector<std::vector<int>> ids_of(const std::vector<std::vector<std::string>>& lines,
                                     const Vocab& v) {
    std::vector<std::vector<int>> out;
    out.reserve(lines.size());
    for (const auto& line : lines) {
        std::vector<int> ids;
        ids.reserve(line.size());
        for (const auto& tok : line) ids.push_back(v.id(tok));
        out.push_back(std::move(ids));
    }
    return out;
}

namespace {

struct IdPairs {
    std::vector<std::vector<int>> src;
    std::vector<std::vector<int>> tgt;
};

IdPairs to_ids(const std::vector<TokenizedPair>& pairs, const Vocab& sv, const Vocab& tv) {
    IdPairs out;
    out.src.reserve(pairs.size());
    out.tgt.reserve(pairs.size());
    for (const auto& p : pairs) {
        std::vector<int> s, t;
        for (const auto& tok : p.src) s.push_back(sv.id(tok));
        for (const auto& tok : p.tgt) t.push_back(tv.id(tok));
        out.src.push_back(std::move(s));
        out.tgt.push_back(std::move(t));
    }
    return out;
}

// Pool-sorted batching: shuffle, sort modest windows by length so batches
// pad tightly, pack up to batch_tokens target tokens per batch.
std::vector<Batch> make_batches(const IdPairs& ids, int64_t batch_tokens, Rng& rng) {
    const size_t n = ids.src.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(order, rng);
    const size_t pool = 256;
    for (size_t b = 0; b < n; b += pool) {
        const size_t e = std::min(n, b + pool);
        std::sort(order.begin() + static_cast<long>(b), order.begin() + static_cast<long>(e),
                  [&](size_t a, size_t c) {
                      const size_t la = ids.src[a].size() + ids.tgt[a].size();
                      const size_t lc = ids.src[c].size() + ids.tgt[c].size();
                      return la != lc ? la < lc : a < c;
                  });
    }

    std::vector<Batch> batches;
    std::vector<std::vector<int>> bs, bt;
    int64_t tokens = 0;
    auto flush = [&] {
        if (!bs.empty()) {
            batches.push_back(make_batch(bs, bt, Vocab::kPad, Vocab::kBos, Vocab::kEos));
            bs.clear();
            bt.clear();
            tokens = 0;
        }
    };
    for (size_t i : order) {
        const auto need = static_cast<int64_t>(ids.tgt[i].size()) + 1;
        if (tokens + need > batch_tokens) flush();
        bs.push_back(ids.src[i]);
        bt.push_back(ids.tgt[i]);
        tokens += need;
    }
    flush();
    shuffle(batches, rng);
    return batches;
}

struct Adam {
    ParamSet<float> m;
    ParamSet<float> v;
    int64_t step = 0;
    double beta1, beta2, eps;

    Adam(const ParamSet<float>& shape, const TrainSpec& spec)
        : m(shape.zeros_like()),
          v(shape.zeros_like()),
          beta1(spec.adam_beta1),
          beta2(spec.adam_beta2),
          eps(spec.adam_eps) {}

    void update(ParamSet<float>& params, const ParamSet<float>& grads, double lr) {
        ++step;
        const auto b1 = static_cast<float>(beta1);
        const auto b2 = static_cast<float>(beta2);
        const float bc1 = 1.0f - std::pow(b1, static_cast<float>(step));
        const float bc2 = 1.0f - std::pow(b2, static_cast<float>(step));
        const auto flr = static_cast<float>(lr);
        const auto feps = static_cast<float>(eps);
        for (size_t i = 0; i < params.tensors.size(); ++i) {
            auto& p = params.tensors[i];
            const auto& g = grads.tensors[i];
            auto& mi = m.tensors[i];
            auto& vi = v.tensors[i];
            mi = b1 * mi + (1.0f - b1) * g;
            vi = b2 * vi + (1.0f - b2) * g.cwiseProduct(g);
            p.array() -= flr * (mi.array() / bc1) /
                         ((vi.array() / bc2).sqrt() + feps);
        }
    }
};

double lr_at(const TrainSpec& spec, int64_t step) {
    if (step <= spec.warmup)
        return spec.lr_peak * static_cast<double>(step) / static_cast<double>(spec.warmup);
    return spec.lr_peak *
           std::sqrt(static_cast<double>(spec.warmup) / static_cast<double>(step));
}

double dataset_loss(const Transformer<float>& model, const std::vector<Batch>& batches,
                    double label_smoothing) {
    double loss = 0;
    int64_t tokens = 0;
    for (const auto& b : batches) {
        const LossStats st = model.eval_loss(b, label_smoothing);
        loss += st.loss_sum;
        tokens += st.tokens;
    }
    return tokens > 0 ? loss / static_cast<double>(tokens) : 0.0;
}

}  // namespace

Checkpoint train(const ModelConfig& cfg, const TrainSpec& spec,
                 const std::vector<TokenizedPair>& train_pairs,
                 const std::vector<TokenizedPair>& dev_pairs, const Vocab& src_vocab,
                 const Vocab& tgt_vocab) {
    cfg.validate();
    spec.validate();
    if (dev_pairs.empty()) fail("EmptyCorpus", "dev set is empty");
    if (train_pairs.empty()) fail("EmptyCorpus", "training set is empty");

    const IdPairs train_ids = to_ids(train_pairs, src_vocab, tgt_vocab);
    const IdPairs dev_ids = to_ids(dev_pairs, src_vocab, tgt_vocab);
    for (const auto& t : train_ids.tgt)
        if (static_cast<int64_t>(t.size()) + 1 > spec.batch_tokens)
            fail("InvalidTrainSpec", "batch_tokens is smaller than the longest target sequence");

    Transformer<float> model(cfg, src_vocab.size(), tgt_vocab.size());
    model.init_params(spec.seed);
    Adam adam(model.params(), spec);

    Rng dev_batch_rng(derive_seed(spec.seed, "dev-batches"));
    const std::vector<Batch> dev_batches = make_batches(dev_ids, spec.batch_tokens, dev_batch_rng);

    Checkpoint ck;
    ck.config = cfg;
    ck.src_vocab = src_vocab;
    ck.tgt_vocab = tgt_vocab;
    ck.seed = spec.seed;

    double best_dev = dataset_loss(model, dev_batches, 0.0);
    ck.dev_loss_trace.push_back(best_dev);
    ParamSet<float> best_params = model.params();
    int64_t best_update = 0;
    int64_t stale_evals = 0;

    const int threads = worker_threads();
    std::vector<Batch> batches;
    size_t batch_pos = 0;
    int64_t epoch = 0;

    ParamSet<float> grads = model.params().zeros_like();
    std::vector<ParamSet<float>> shard_grads;

    for (int64_t update = 1; update <= spec.max_updates; ++update) {
        if (batch_pos >= batches.size()) {
            Rng epoch_rng(derive_seed(spec.seed, "epoch", static_cast<uint64_t>(epoch++)));
            batches = make_batches(train_ids, spec.batch_tokens, epoch_rng);
            batch_pos = 0;
        }
        const Batch& batch = batches[batch_pos++];

        const int shards = std::min(threads, batch.n);
        double loss_sum = 0;
        int64_t tokens = 0;
        if (shards <= 1) {
            grads.zero();
            Rng drop_rng(derive_seed(spec.seed, "dropout", static_cast<uint64_t>(update)));
            const LossStats st =
                model.forward_backward(batch, grads, &drop_rng, cfg.label_smoothing);
            loss_sum = st.loss_sum;
            tokens = st.tokens;
        } else {
            while (static_cast<int>(shard_grads.size()) < shards)
                shard_grads.push_back(model.params().zeros_like());
            std::vector<double> shard_loss(static_cast<size_t>(shards), 0.0);
            std::vector<int64_t> shard_tokens(static_cast<size_t>(shards), 0);
            parallel_shards(batch.n, shards, [&](int shard, int begin, int end) {
                shard_grads[static_cast<size_t>(shard)].zero();
                Batch sub = batch.slice(begin, end);
                Rng drop_rng(derive_seed(derive_seed(spec.seed, "dropout",
                                                     static_cast<uint64_t>(update)),
                                         "shard", static_cast<uint64_t>(shard)));
                const LossStats st = model.forward_backward(
                    sub, shard_grads[static_cast<size_t>(shard)], &drop_rng,
                    cfg.label_smoothing);
                shard_loss[static_cast<size_t>(shard)] = st.loss_sum;
                shard_tokens[static_cast<size_t>(shard)] = st.tokens;
            });
            grads.zero();
            for (int s = 0; s < shards; ++s) {
                grads.add_scaled(shard_grads[static_cast<size_t>(s)], 1.0f);
                loss_sum += shard_loss[static_cast<size_t>(s)];
                tokens += shard_tokens[static_cast<size_t>(s)];
            }
        }

        if (!std::isfinite(loss_sum))
            fail("NonfiniteLoss", "update " + std::to_string(update) + ": loss " +
                                      std::to_string(loss_sum) + " over " +
                                      std::to_string(tokens) + " tokens");
        if (tokens > 0) {
            const float inv = 1.0f / static_cast<float>(tokens);
            for (auto& g : grads.tensors) g *= inv;
        }
        adam.update(model.params(), grads, lr_at(spec, update));

        if (update % spec.checkpoint_interval == 0 || update == spec.max_updates) {
            const double dev_loss = dataset_loss(model, dev_batches, 0.0);
            ck.dev_loss_trace.push_back(dev_loss);
            if (spec.verbose)
                std::cerr << "update " << update << " train_loss "
                          << (tokens ? loss_sum / static_cast<double>(tokens) : 0.0)
                          << " dev_loss " << dev_loss << " lr " << lr_at(spec, update) << "\n";
            if (dev_loss < best_dev) {
                best_dev = dev_loss;
                best_params = model.params();
                best_update = update;
                stale_evals = 0;
            } else if (++stale_evals >= spec.patience) {
                ck.updates = update;
                break;
            }
        }
        ck.updates = update;
    }

    ck.params = std::move(best_params);
    ck.best_update = best_update;
    return ck;
}

double dev_perplexity(const Checkpoint& ck, const std::vector<TokenizedPair>& dev_pairs) {
    if (dev_pairs.empty()) fail("EmptyCorpus", "dev set is empty");
    Transformer<float> model(ck.config, ck.src_vocab.size(), ck.tgt_vocab.size());
    model.params() = ck.params;
    const IdPairs ids = to_ids(dev_pairs, ck.src_vocab, ck.tgt_vocab);
    Rng rng(derive_seed(ck.seed, "ppl-batches"));
    const auto batches = make_batches(ids, 4000, rng);
    double loss = 0;
    int64_t tokens = 0;
    for (const auto& b : batches) {
        const LossStats st = model.eval_loss(b, 0.0);
        loss += st.loss_sum;
        tokens += st.tokens;
    }
    return std::exp(loss / static_cast<double>(tokens));
}

}  // namespace lores::model

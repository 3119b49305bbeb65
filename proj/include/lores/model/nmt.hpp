#pragma once

// Training, checkpointing, decoding and verification around the
// float-precision Transformer.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lores/corpus.hpp"
#include "lores/model/config.hpp"
#include "lores/model/transformer.hpp"
#include "lores/model/vocab.hpp"
#include "lores/subword.hpp"

namespace lores::model {

struct TrainSpec {
    int64_t batch_tokens = 1000;        // target tokens per batch
    int64_t max_updates = 20000;
    double lr_peak = 5e-4;              // inverse-sqrt decay with linear warmup
    int64_t warmup = 4000;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.98;
    double adam_eps = 1e-9;
    uint64_t seed = 1;
    int64_t checkpoint_interval = 500;  // updates between dev evaluations
    int64_t patience = 10;              // dev evaluations without improvement
    bool verbose = false;

    void validate() const;
};

// Trained parameters plus everything needed to reproduce and reuse them.
struct Checkpoint {
    ModelConfig config;
    ParamSet<float> params;
    Vocab src_vocab;
    Vocab tgt_vocab;
    MergeTable merges_src;
    MergeTable merges_tgt;
    uint64_t seed = 0;
    int64_t updates = 0;
    std::vector<double> dev_loss_trace;
    int64_t best_update = 0;
};

// One segmented, tagged sentence pair as whitespace token strings.
struct TokenizedPair {
    std::vector<std::string> src;
    std::vector<std::string> tgt;
};

std::vector<TokenizedPair> tokenize_corpus(const Corpus& c);

// Maps token strings to ids; errors with OOVToken naming the offender.
std::vector<std::vector<int>> ids_of(const std::vector<std::vector<std::string>>& lines,
                                     const Vocab& v);

// Label-smoothed cross-entropy training with teacher forcing, adaptive
// moments, inverse-sqrt decay and linear warmup. Returns the best-dev
// checkpoint (merge tables left empty; the pipeline fills them).
// Errors: OOVToken, NonfiniteLoss.
Checkpoint train(const ModelConfig& cfg, const TrainSpec& spec,
                 const std::vector<TokenizedPair>& train_pairs,
                 const std::vector<TokenizedPair>& dev_pairs, const Vocab& src_vocab,
                 const Vocab& tgt_vocab);

// exp of mean per-token cross entropy, no label smoothing.
double dev_perplexity(const Checkpoint& ck, const std::vector<TokenizedPair>& dev_pairs);

// Beam search over target subwords with length-normalized log-probability;
// stops at </s> or max_len_factor * source length. Input and output are
// whitespace token strings (segmentation handled by callers).
std::vector<std::string> translate_tokens(const Checkpoint& ck,
                                          const std::vector<std::string>& src_tokens, int beam,
                                          double max_len_factor);

// Raw tagged sentence in, desegmented sentence out.
std::string translate(const Checkpoint& ck, const std::string& tagged_segmented_src, int beam,
                      double max_len_factor);

// Holds the instantiated model so repeated translate calls don't re-copy
// parameters. Immutable after construction; safe for concurrent use.
class Translator {
public:
    explicit Translator(const Checkpoint& ck);
    std::vector<std::string> tokens(const std::vector<std::string>& src_tokens, int beam,
                                    double max_len_factor) const;
    std::string line(const std::string& tagged_segmented_src, int beam,
                     double max_len_factor) const;

private:
    Transformer<float> model_;
    Vocab src_vocab_;
    Vocab tgt_vocab_;
};

// Checkpoint directory: params.bin, config.json, vocab.src, vocab.tgt,
// merges.src, merges.tgt, meta.json.
void save_checkpoint(const Checkpoint& ck, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

// Analytic-vs-central-difference comparison on `samples_per_tensor`
// random entries of every parameter tensor, run in double precision.
// Returns the max relative error (0 for an empty sample).
double gradient_check(const ModelConfig& cfg, const std::vector<TokenizedPair>& pairs,
                      double epsilon, int samples_per_tensor, uint64_t seed);

}  // namespace lores::model

#pragma once

// Small self-attentional encoder-decoder with analytic gradients.
// Templated on the scalar type: float for training speed, double for the
// finite-difference verification harness. No autograd graph; every
// backward rule is written out against a forward tape.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lores/errors.hpp"
#include "lores/model/config.hpp"
#include "lores/rng.hpp"

namespace lores::model {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

// =====================================================================
//  Batches
// =====================================================================

// Padded id matrix over n sentences. Source rows already carry the
// direction token; make_batch appends </s> to the source and builds the
// teacher-forcing shift (<s> y1..yn | y1..yn </s>) for the target.
struct Batch {
    int n = 0;
    int src_len = 0;
    int tgt_len = 0;
    std::vector<int> src;      // n * src_len
    std::vector<int> tgt_in;   // n * tgt_len
    std::vector<int> tgt_out;  // n * tgt_len
    std::vector<int> src_n;
    std::vector<int> tgt_n;

    int src_at(int b, int t) const { return src[static_cast<size_t>(b) * src_len + t]; }
    int64_t out_tokens() const {
        int64_t c = 0;
        for (int v : tgt_n) c += v;
        return c;
    }
    Batch slice(int begin, int end) const;
};

Batch make_batch(const std::vector<std::vector<int>>& src_ids,
                 const std::vector<std::vector<int>>& tgt_ids, int pad, int bos, int eos);

// =====================================================================
//  Parameters
// =====================================================================

template <class S>
struct ParamSet {
    std::vector<Mat<S>> tensors;
    std::vector<std::string> names;

    int add(const std::string& name, int rows, int cols) {
        tensors.emplace_back(Mat<S>::Zero(rows, cols));
        names.push_back(name);
        return static_cast<int>(tensors.size()) - 1;
    }
    void zero() {
        for (auto& t : tensors) t.setZero();
    }
    int64_t total_size() const {
        int64_t s = 0;
        for (const auto& t : tensors) s += t.size();
        return s;
    }
    // grads-like structural copy with zeroed values
    ParamSet<S> zeros_like() const {
        ParamSet<S> g;
        g.names = names;
        g.tensors.reserve(tensors.size());
        for (const auto& t : tensors) g.tensors.emplace_back(Mat<S>::Zero(t.rows(), t.cols()));
        return g;
    }
    void add_scaled(const ParamSet<S>& other, S scale) {
        for (size_t i = 0; i < tensors.size(); ++i) tensors[i] += scale * other.tensors[i];
    }
};

struct LnIdx {
    int g = -1, b = -1;
};
struct AttnIdx {
    int wq = -1, bq = -1, wk = -1, bk = -1, wv = -1, bv = -1, wo = -1, bo = -1;
};
struct FfnIdx {
    int w1 = -1, b1 = -1, w2 = -1, b2 = -1;
};
struct EncIdx {
    LnIdx ln1;
    AttnIdx attn;
    LnIdx ln2;
    FfnIdx ffn;
};
struct DecIdx {
    LnIdx ln1;
    AttnIdx self;
    LnIdx ln2;
    AttnIdx cross;
    LnIdx ln3;
    FfnIdx ffn;
};
struct Layout {
    int src_emb = -1, tgt_emb = -1;
    std::vector<EncIdx> enc;
    std::vector<DecIdx> dec;
    LnIdx enc_final, dec_final;
};

// =====================================================================
//  Dropout
// =====================================================================

// Inverted dropout; mask entries are 0 or 1/(1-p). A null rng disables it
// (inference / gradient checking).
template <class S>
struct DropCtx {
    Rng* rng = nullptr;
    double p = 0.0;
    bool active() const { return rng != nullptr && p > 0.0; }
    Mat<S> mask(Eigen::Index rows, Eigen::Index cols) {
        Mat<S> m(rows, cols);
        const S keep = static_cast<S>(1.0 / (1.0 - p));
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r)
                m(r, c) = rng->uniform() < p ? S(0) : keep;
        return m;
    }
};

// =====================================================================
//  Forward tape
// =====================================================================

template <class S>
struct LnTrace {
    Mat<S> xhat;          // normalized rows
    std::vector<S> inv_std;
};

template <class S>
struct AttnTrace {
    Mat<S> x_norm;  // LN output feeding the projections
    LnTrace<S> ln;
    Mat<S> q, k, v;              // (rows x d); k/v rows come from kv input
    std::vector<Mat<S>> attn;    // per (sentence*head): post-softmax weights
    std::vector<Mat<S>> amask;   // dropout masks on attention weights (empty if off)
    Mat<S> ctx;                  // concatenated head outputs
    Mat<S> res_mask;             // residual dropout mask (empty if off)
};

template <class S>
struct FfnTrace {
    Mat<S> x_norm;
    LnTrace<S> ln;
    Mat<S> h;        // post-ReLU activations
    Mat<S> h_mask;   // dropout on activations
    Mat<S> res_mask;
};

template <class S>
struct EncTape {
    Mat<S> x0;  // embedded input (post positional encoding and dropout)
    Mat<S> emb_mask;
    std::vector<Mat<S>> layer_in;  // residual stream entering each layer
    std::vector<AttnTrace<S>> attn;
    std::vector<FfnTrace<S>> ffn;
    Mat<S> final_in;
    LnTrace<S> final_ln;
};

template <class S>
struct DecTape {
    Mat<S> x0;
    Mat<S> emb_mask;
    std::vector<Mat<S>> layer_in;
    std::vector<AttnTrace<S>> self_attn;
    std::vector<AttnTrace<S>> cross_attn;
    std::vector<FfnTrace<S>> ffn;
    Mat<S> final_in;
    LnTrace<S> final_ln;
};

// Per-sentence loss diagnostics.
struct LossStats {
    double loss_sum = 0.0;  // summed over tokens (not averaged)
    int64_t tokens = 0;
    std::vector<double> sent_loss;
    std::vector<int64_t> sent_tokens;
};

// Attention snapshot for inspection in tests: one matrix per
// (layer, sentence, head), rows are query positions.
template <class S>
struct AttnSnapshot {
    std::vector<Mat<S>> enc_self;
    std::vector<Mat<S>> dec_self;
    std::vector<Mat<S>> dec_cross;
};

// =====================================================================
//  Transformer
// =====================================================================

template <class S>
class Transformer {
public:
    Transformer(ModelConfig cfg, int src_vocab, int tgt_vocab)
        : cfg_(cfg), src_vocab_(src_vocab), tgt_vocab_(tgt_vocab) {
        cfg_.validate();
        build_layout();
    }

    const ModelConfig& config() const { return cfg_; }
    int src_vocab() const { return src_vocab_; }
    int tgt_vocab() const { return tgt_vocab_; }
    ParamSet<S>& params() { return params_; }
    const ParamSet<S>& params() const { return params_; }
    const Layout& layout() const { return layout_; }

    void init_params(uint64_t seed) {
        Rng rng(derive_seed(seed, "init"));
        const double d = cfg_.model_size;
        for (size_t i = 0; i < params_.tensors.size(); ++i) {
            Mat<S>& t = params_.tensors[i];
            const std::string& name = params_.names[i];
            if (name.find("emb") != std::string::npos) {
                const double std_dev = 1.0 / std::sqrt(d);
                for (Eigen::Index c = 0; c < t.cols(); ++c)
                    for (Eigen::Index r = 0; r < t.rows(); ++r)
                        t(r, c) = static_cast<S>(rng.normal() * std_dev);
            } else if (name.find(".g") != std::string::npos && t.rows() == 1) {
                t.setOnes();
            } else if (t.rows() == 1) {
                t.setZero();  // biases
            } else {
                const double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
                for (Eigen::Index c = 0; c < t.cols(); ++c)
                    for (Eigen::Index r = 0; r < t.rows(); ++r)
                        t(r, c) = static_cast<S>((rng.uniform() * 2.0 - 1.0) * limit);
            }
        }
        if (cfg_.shared_embeddings) params_.tensors[layout_.src_emb] = params_.tensors[layout_.tgt_emb];
    }

    // ---- training ----------------------------------------------------

    // Forward + backward over one batch; grads accumulate loss SUMS
    // (caller scales by 1/tokens before the optimizer step). The dropout
    // rng may be null to disable dropout.
    LossStats forward_backward(const Batch& b, ParamSet<S>& grads, Rng* dropout_rng,
                               double label_smoothing) const {
        DropCtx<S> drop{dropout_rng, dropout_rng ? cfg_.dropout : 0.0};
        EncTape<S> enc_tape;
        Mat<S> memory = encode_batch(b, &enc_tape, drop, nullptr);
        DecTape<S> dec_tape;
        Mat<S> hidden = decode_batch(b, memory, &dec_tape, drop, nullptr);

        Mat<S> dhidden;
        LossStats stats = loss_and_dhidden(b, hidden, label_smoothing, &dhidden, &grads);
        Mat<S> dmemory = Mat<S>::Zero(memory.rows(), memory.cols());
        decode_backward(b, dec_tape, memory, dhidden, grads, dmemory);
        encode_backward(b, enc_tape, dmemory, grads);
        return stats;
    }

    // Loss without gradients (label_smoothing = 0 gives plain CE).
    LossStats eval_loss(const Batch& b, double label_smoothing) const {
        DropCtx<S> drop{};
        Mat<S> memory = encode_batch(b, nullptr, drop, nullptr);
        Mat<S> hidden = decode_batch(b, memory, nullptr, drop, nullptr);
        return loss_and_dhidden(b, hidden, label_smoothing, nullptr, nullptr);
    }

    // Forward with attention capture (dropout off), for invariant tests.
    LossStats inspect(const Batch& b, AttnSnapshot<S>* snap, Mat<S>* logits_out = nullptr) const {
        DropCtx<S> drop{};
        Mat<S> memory = encode_batch(b, nullptr, drop, snap);
        Mat<S> hidden = decode_batch(b, memory, nullptr, drop, snap);
        if (logits_out) *logits_out = output_logits(hidden);
        return loss_and_dhidden(b, hidden, 0.0, nullptr, nullptr);
    }

    // ---- decoding ----------------------------------------------------

    struct Encoded {
        Mat<S> memory;  // src_len x d
        int src_n = 0;
    };

    Encoded encode_one(const std::vector<int>& src_ids) const {
        Batch b;
        b.n = 1;
        b.src_len = static_cast<int>(src_ids.size());
        b.tgt_len = 0;
        b.src = src_ids;
        b.src_n = {b.src_len};
        b.tgt_n = {0};
        DropCtx<S> drop{};
        Encoded e;
        e.memory = encode_batch(b, nullptr, drop, nullptr);
        e.src_n = b.src_len;
        return e;
    }

    // Next-token log-probabilities for each prefix against one encoded
    // source. Prefixes are target ids without <s>; row i of the result is
    // the distribution after prefixes[i].
    Mat<S> next_token_logprobs(const Encoded& es,
                               const std::vector<std::vector<int>>& prefixes, int bos) const {
        const int n = static_cast<int>(prefixes.size());
        int max_len = 1;
        for (const auto& p : prefixes)
            max_len = std::max(max_len, static_cast<int>(p.size()) + 1);

        Batch b;
        b.n = n;
        b.src_len = es.src_n;
        b.tgt_len = max_len;
        b.src.assign(static_cast<size_t>(n) * es.src_n, 0);
        b.src_n.assign(n, es.src_n);
        b.tgt_in.assign(static_cast<size_t>(n) * max_len, 0);
        b.tgt_out.assign(static_cast<size_t>(n) * max_len, 0);
        b.tgt_n.resize(n);
        for (int i = 0; i < n; ++i) {
            b.tgt_in[static_cast<size_t>(i) * max_len] = bos;
            for (size_t k = 0; k < prefixes[i].size(); ++k)
                b.tgt_in[static_cast<size_t>(i) * max_len + k + 1] = prefixes[i][k];
            b.tgt_n[i] = static_cast<int>(prefixes[i].size()) + 1;
        }

        // Replicate the encoded memory per prefix row block.
        Mat<S> memory(static_cast<Eigen::Index>(n) * es.src_n, cfg_.model_size);
        for (int i = 0; i < n; ++i)
            memory.middleRows(static_cast<Eigen::Index>(i) * es.src_n, es.src_n) = es.memory;

        DropCtx<S> drop{};
        Mat<S> hidden = decode_batch(b, memory, nullptr, drop, nullptr);
        Mat<S> out(n, tgt_vocab_);
        const Mat<S>& emb = params_.tensors[layout_.tgt_emb];
        for (int i = 0; i < n; ++i) {
            const Eigen::Index row = static_cast<Eigen::Index>(i) * max_len + b.tgt_n[i] - 1;
            Eigen::Matrix<S, 1, Eigen::Dynamic> logits = hidden.row(row) * emb.transpose();
            // log softmax
            const S mx = logits.maxCoeff();
            S sum = 0;
            for (int v = 0; v < tgt_vocab_; ++v) sum += std::exp(logits(0, v) - mx);
            const S lse = mx + std::log(sum);
            for (int v = 0; v < tgt_vocab_; ++v) out(i, v) = logits(0, v) - lse;
        }
        return out;
    }

    Mat<S> output_logits(const Mat<S>& hidden) const {
        return hidden * params_.tensors[layout_.tgt_emb].transpose();
    }

private:
    ModelConfig cfg_;
    int src_vocab_;
    int tgt_vocab_;
    ParamSet<S> params_;
    Layout layout_;
    static constexpr double kLnEps = 1e-5;

    // ---- layout -------------------------------------------------------

    LnIdx add_ln(const std::string& prefix) {
        LnIdx ln;
        ln.g = params_.add(prefix + ".g", 1, cfg_.model_size);
        ln.b = params_.add(prefix + ".b", 1, cfg_.model_size);
        return ln;
    }
    AttnIdx add_attn(const std::string& prefix) {
        const int d = cfg_.model_size;
        AttnIdx a;
        a.wq = params_.add(prefix + ".wq", d, d);
        a.bq = params_.add(prefix + ".bq", 1, d);
        a.wk = params_.add(prefix + ".wk", d, d);
        a.bk = params_.add(prefix + ".bk", 1, d);
        a.wv = params_.add(prefix + ".wv", d, d);
        a.bv = params_.add(prefix + ".bv", 1, d);
        a.wo = params_.add(prefix + ".wo", d, d);
        a.bo = params_.add(prefix + ".bo", 1, d);
        return a;
    }
    FfnIdx add_ffn(const std::string& prefix) {
        const int d = cfg_.model_size;
        FfnIdx f;
        f.w1 = params_.add(prefix + ".w1", d, cfg_.feed_forward);
        f.b1 = params_.add(prefix + ".b1", 1, cfg_.feed_forward);
        f.w2 = params_.add(prefix + ".w2", cfg_.feed_forward, d);
        f.b2 = params_.add(prefix + ".b2", 1, d);
        return f;
    }

    void build_layout() {
        layout_.tgt_emb = params_.add("tgt_emb", tgt_vocab_, cfg_.model_size);
        if (cfg_.shared_embeddings) {
            if (src_vocab_ != tgt_vocab_)
                fail("InvalidModelConfig", "shared embeddings require a joint vocabulary");
            layout_.src_emb = layout_.tgt_emb;
        } else {
            layout_.src_emb = params_.add("src_emb", src_vocab_, cfg_.model_size);
        }
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "enc." + std::to_string(l);
            EncIdx e;
            e.ln1 = add_ln(p + ".ln1");
            e.attn = add_attn(p + ".attn");
            e.ln2 = add_ln(p + ".ln2");
            e.ffn = add_ffn(p + ".ffn");
            layout_.enc.push_back(e);
        }
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "dec." + std::to_string(l);
            DecIdx dd;
            dd.ln1 = add_ln(p + ".ln1");
            dd.self = add_attn(p + ".self");
            dd.ln2 = add_ln(p + ".ln2");
            dd.cross = add_attn(p + ".cross");
            dd.ln3 = add_ln(p + ".ln3");
            dd.ffn = add_ffn(p + ".ffn");
            layout_.dec.push_back(dd);
        }
        layout_.enc_final = add_ln("enc.final_ln");
        layout_.dec_final = add_ln("dec.final_ln");
    }

    // ---- primitive forward/backward ------------------------------------

    Mat<S> layer_norm(const Mat<S>& x, const LnIdx& idx, LnTrace<S>* trace) const {
        const auto& g = params_.tensors[idx.g];
        const auto& bta = params_.tensors[idx.b];
        Mat<S> y(x.rows(), x.cols());
        LnTrace<S> local;
        local.xhat.resize(x.rows(), x.cols());
        local.inv_std.resize(static_cast<size_t>(x.rows()));
        const auto d = static_cast<S>(x.cols());
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            const S mean = x.row(r).sum() / d;
            S var = 0;
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                const S t = x(r, c) - mean;
                var += t * t;
            }
            var /= d;
            const S inv = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
            local.inv_std[static_cast<size_t>(r)] = inv;
            for (Eigen::Index c = 0; c < x.cols(); ++c) {
                const S xh = (x(r, c) - mean) * inv;
                local.xhat(r, c) = xh;
                y(r, c) = xh * g(0, c) + bta(0, c);
            }
        }
        if (trace) *trace = std::move(local);
        return y;
    }

    // dy -> dx; accumulates dg/db.
    Mat<S> layer_norm_backward(const Mat<S>& dy, const LnTrace<S>& tr, const LnIdx& idx,
                               ParamSet<S>& grads) const {
        const auto& g = params_.tensors[idx.g];
        auto& dg = grads.tensors[idx.g];
        auto& db = grads.tensors[idx.b];
        Mat<S> dx(dy.rows(), dy.cols());
        const auto d = static_cast<S>(dy.cols());
        for (Eigen::Index r = 0; r < dy.rows(); ++r) {
            S sum_dxhat = 0, sum_dxhat_xhat = 0;
            for (Eigen::Index c = 0; c < dy.cols(); ++c) {
                const S dxh = dy(r, c) * g(0, c);
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * tr.xhat(r, c);
                dg(0, c) += dy(r, c) * tr.xhat(r, c);
                db(0, c) += dy(r, c);
            }
            const S inv = tr.inv_std[static_cast<size_t>(r)];
            const S m1 = sum_dxhat / d;
            const S m2 = sum_dxhat_xhat / d;
            for (Eigen::Index c = 0; c < dy.cols(); ++c) {
                const S dxh = dy(r, c) * g(0, c);
                dx(r, c) = inv * (dxh - m1 - tr.xhat(r, c) * m2);
            }
        }
        return dx;
    }

    static void softmax_rows(Mat<S>& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            const S mx = m.row(r).maxCoeff();
            S sum = 0;
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = std::exp(m(r, c) - mx);
                sum += m(r, c);
            }
            m.row(r) /= sum;
        }
    }

    // Multi-head attention over per-sentence row blocks.
    //   x_rows:  queries come from x (rows_per_sent_q rows per sentence)
    //   kv:      keys/values source (rows_per_sent_k rows per sentence)
    //   key_n:   valid key count per sentence
    //   causal:  restrict key j <= query i (self-attention in the decoder)
    Mat<S> attention(const Mat<S>& x, const Mat<S>& kv, int n_sent, int q_rows, int k_rows,
                     const std::vector<int>& key_n, bool causal, const AttnIdx& idx,
                     AttnTrace<S>* trace, DropCtx<S>& drop,
                     std::vector<Mat<S>>* snapshot) const {
        const int d = cfg_.model_size;
        const int heads = cfg_.attention_heads;
        const int dk = d / heads;
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));

        Mat<S> q = x * params_.tensors[idx.wq];
        q.rowwise() += params_.tensors[idx.bq].row(0);
        Mat<S> k = kv * params_.tensors[idx.wk];
        k.rowwise() += params_.tensors[idx.bk].row(0);
        Mat<S> v = kv * params_.tensors[idx.wv];
        v.rowwise() += params_.tensors[idx.bv].row(0);

        Mat<S> ctx = Mat<S>::Zero(x.rows(), d);
        std::vector<Mat<S>> attn_store;
        std::vector<Mat<S>> mask_store;
        attn_store.reserve(static_cast<size_t>(n_sent) * heads);

        for (int b = 0; b < n_sent; ++b) {
            const Eigen::Index qoff = static_cast<Eigen::Index>(b) * q_rows;
            const Eigen::Index koff = static_cast<Eigen::Index>(b) * k_rows;
            const int kn = key_n[static_cast<size_t>(b)];
            for (int h = 0; h < heads; ++h) {
                const Eigen::Index hoff = static_cast<Eigen::Index>(h) * dk;
                Mat<S> scores = q.block(qoff, hoff, q_rows, dk) *
                                k.block(koff, hoff, k_rows, dk).transpose() * scale;
                for (Eigen::Index i = 0; i < scores.rows(); ++i)
                    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
                        const bool masked = j >= kn || (causal && j > i);
                        if (masked) scores(i, j) = static_cast<S>(-1e30);
                    }
                softmax_rows(scores);
                Mat<S> weights = scores;
                if (drop.active()) {
                    Mat<S> m = drop.mask(weights.rows(), weights.cols());
                    weights = weights.cwiseProduct(m);
                    if (trace) mask_store.push_back(std::move(m));
                }
                ctx.block(qoff, hoff, q_rows, dk).noalias() =
                    weights * v.block(koff, hoff, k_rows, dk);
                if (snapshot) snapshot->push_back(scores);
                if (trace) attn_store.push_back(std::move(scores));
            }
        }

        Mat<S> out = ctx * params_.tensors[idx.wo];
        out.rowwise() += params_.tensors[idx.bo].row(0);
        if (trace) {
            trace->q = std::move(q);
            trace->k = std::move(k);
            trace->v = std::move(v);
            trace->attn = std::move(attn_store);
            trace->amask = std::move(mask_store);
            trace->ctx = std::move(ctx);
        }
        return out;
    }

    // Backward through attention. d_out is the gradient at the Wo output,
    // kv_input the matrix that produced k/v (x_norm for self-attention,
    // the encoder memory for cross-attention). Returns dx for the query
    // side; adds the key/value-side input gradient to d_kv.
    Mat<S> attention_backward(const Mat<S>& d_out, const AttnTrace<S>& tr, int n_sent, int q_rows,
                              int k_rows, const AttnIdx& idx, ParamSet<S>& grads,
                              const Mat<S>& kv_input, Mat<S>& d_kv) const {
        const int d = cfg_.model_size;
        const int heads = cfg_.attention_heads;
        const int dk = d / heads;
        const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dk)));

        grads.tensors[idx.wo].noalias() += tr.ctx.transpose() * d_out;
        grads.tensors[idx.bo].row(0) += d_out.colwise().sum();
        Mat<S> d_ctx = d_out * params_.tensors[idx.wo].transpose();

        Mat<S> dq = Mat<S>::Zero(tr.q.rows(), d);
        Mat<S> dk_m = Mat<S>::Zero(tr.k.rows(), d);
        Mat<S> dv_m = Mat<S>::Zero(tr.v.rows(), d);
        const bool dropped = !tr.amask.empty();

        for (int b = 0; b < n_sent; ++b) {
            const Eigen::Index qoff = static_cast<Eigen::Index>(b) * q_rows;
            const Eigen::Index koff = static_cast<Eigen::Index>(b) * k_rows;
            for (int h = 0; h < heads; ++h) {
                const Eigen::Index hoff = static_cast<Eigen::Index>(h) * dk;
                const size_t slot = static_cast<size_t>(b) * heads + static_cast<size_t>(h);
                const Mat<S>& a = tr.attn[slot];
                Mat<S> weights = dropped ? a.cwiseProduct(tr.amask[slot]) : a;

                const auto d_ctx_blk = d_ctx.block(qoff, hoff, q_rows, dk);
                dv_m.block(koff, hoff, k_rows, dk).noalias() +=
                    weights.transpose() * d_ctx_blk;
                Mat<S> d_weights = d_ctx_blk * tr.v.block(koff, hoff, k_rows, dk).transpose();
                if (dropped) d_weights = d_weights.cwiseProduct(tr.amask[slot]);
                // softmax backward: dS = A (x) (dA - rowsum(dA (x) A))
                Mat<S> d_scores(a.rows(), a.cols());
                for (Eigen::Index i = 0; i < a.rows(); ++i) {
                    const S dot = a.row(i).dot(d_weights.row(i));
                    d_scores.row(i) = a.row(i).cwiseProduct(
                        d_weights.row(i) - Eigen::Matrix<S, 1, Eigen::Dynamic>::Constant(
                                               a.cols(), dot));
                }
                d_scores *= scale;
                dq.block(qoff, hoff, q_rows, dk).noalias() +=
                    d_scores * tr.k.block(koff, hoff, k_rows, dk);
                dk_m.block(koff, hoff, k_rows, dk).noalias() +=
                    d_scores.transpose() * tr.q.block(qoff, hoff, q_rows, dk);
            }
        }

        grads.tensors[idx.wq].noalias() += tr.x_norm.transpose() * dq;
        grads.tensors[idx.bq].row(0) += dq.colwise().sum();
        Mat<S> dx = dq * params_.tensors[idx.wq].transpose();

        grads.tensors[idx.bk].row(0) += dk_m.colwise().sum();
        grads.tensors[idx.bv].row(0) += dv_m.colwise().sum();
        grads.tensors[idx.wk].noalias() += kv_input.transpose() * dk_m;
        grads.tensors[idx.wv].noalias() += kv_input.transpose() * dv_m;
        d_kv.noalias() += dk_m * params_.tensors[idx.wk].transpose();
        d_kv.noalias() += dv_m * params_.tensors[idx.wv].transpose();
        return dx;
    }

    Mat<S> ffn_forward(const Mat<S>& x_norm, const FfnIdx& idx, FfnTrace<S>* trace,
                       DropCtx<S>& drop) const {
        Mat<S> h = x_norm * params_.tensors[idx.w1];
        h.rowwise() += params_.tensors[idx.b1].row(0);
        h = h.cwiseMax(S(0));
        Mat<S> hd = h;
        Mat<S> h_mask;
        if (drop.active()) {
            h_mask = drop.mask(h.rows(), h.cols());
            hd = h.cwiseProduct(h_mask);
        }
        Mat<S> y = hd * params_.tensors[idx.w2];
        y.rowwise() += params_.tensors[idx.b2].row(0);
        if (trace) {
            trace->h = std::move(h);
            trace->h_mask = std::move(h_mask);
        }
        return y;
    }

    Mat<S> ffn_backward(const Mat<S>& dy, const FfnTrace<S>& tr, const FfnIdx& idx,
                        ParamSet<S>& grads) const {
        Mat<S> hd = tr.h_mask.size() ? tr.h.cwiseProduct(tr.h_mask) : tr.h;
        grads.tensors[idx.w2].noalias() += hd.transpose() * dy;
        grads.tensors[idx.b2].row(0) += dy.colwise().sum();
        Mat<S> dh = dy * params_.tensors[idx.w2].transpose();
        if (tr.h_mask.size()) dh = dh.cwiseProduct(tr.h_mask);
        // ReLU gate
        for (Eigen::Index c = 0; c < dh.cols(); ++c)
            for (Eigen::Index r = 0; r < dh.rows(); ++r)
                if (tr.h(r, c) <= S(0)) dh(r, c) = S(0);
        grads.tensors[idx.w1].noalias() += tr.x_norm.transpose() * dh;
        grads.tensors[idx.b1].row(0) += dh.colwise().sum();
        return dh * params_.tensors[idx.w1].transpose();
    }

    Mat<S> embed(const std::vector<int>& ids, int n_sent, int len, int emb_idx, int vocab,
                 Mat<S>* mask_out, DropCtx<S>& drop) const {
        const int d = cfg_.model_size;
        const auto& emb = params_.tensors[emb_idx];
        const S emb_scale = static_cast<S>(std::sqrt(static_cast<double>(d)));
        Mat<S> x(static_cast<Eigen::Index>(n_sent) * len, d);
        for (int b = 0; b < n_sent; ++b) {
            for (int t = 0; t < len; ++t) {
                const int id = ids[static_cast<size_t>(b) * len + t];
                if (id < 0 || id >= vocab) fail("OOVToken", "id " + std::to_string(id));
                const Eigen::Index row = static_cast<Eigen::Index>(b) * len + t;
                x.row(row) = emb.row(id) * emb_scale;
                // sinusoidal positional encoding
                for (int c = 0; c < d; c += 2) {
                    const double angle =
                        t / std::pow(10000.0, static_cast<double>(c) / static_cast<double>(d));
                    x(row, c) += static_cast<S>(std::sin(angle));
                    if (c + 1 < d) x(row, c + 1) += static_cast<S>(std::cos(angle));
                }
            }
        }
        if (drop.active()) {
            Mat<S> m = drop.mask(x.rows(), x.cols());
            x = x.cwiseProduct(m);
            if (mask_out) *mask_out = std::move(m);
        }
        return x;
    }

    void embed_backward(const Mat<S>& dx0, const std::vector<int>& ids, int n_sent, int len,
                        int emb_idx, const Mat<S>& mask, ParamSet<S>& grads) const {
        const S emb_scale = static_cast<S>(std::sqrt(static_cast<double>(cfg_.model_size)));
        auto& demb = grads.tensors[emb_idx];
        for (int b = 0; b < n_sent; ++b)
            for (int t = 0; t < len; ++t) {
                const Eigen::Index row = static_cast<Eigen::Index>(b) * len + t;
                const int id = ids[static_cast<size_t>(b) * len + t];
                if (mask.size())
                    demb.row(id) +=
                        dx0.row(row).cwiseProduct(mask.row(row)) * emb_scale;
                else
                    demb.row(id) += dx0.row(row) * emb_scale;
            }
    }

    // ---- encoder / decoder stacks --------------------------------------

    Mat<S> encode_batch(const Batch& b, EncTape<S>* tape, DropCtx<S>& drop,
                        AttnSnapshot<S>* snap) const {
        Mat<S> x = embed(b.src, b.n, b.src_len, layout_.src_emb, src_vocab_,
                         tape ? &tape->emb_mask : nullptr, drop);
        if (tape) tape->x0 = x;
        for (int l = 0; l < cfg_.layers; ++l) {
            const EncIdx& e = layout_.enc[static_cast<size_t>(l)];
            if (tape) tape->layer_in.push_back(x);

            AttnTrace<S> atr;
            Mat<S> x_norm = layer_norm(x, e.ln1, tape ? &atr.ln : nullptr);
            Mat<S> a = attention(x_norm, x_norm, b.n, b.src_len, b.src_len, b.src_n,
                                 /*causal=*/false, e.attn, tape ? &atr : nullptr, drop,
                                 snap ? &snap->enc_self : nullptr);
            if (drop.active()) {
                Mat<S> m = drop.mask(a.rows(), a.cols());
                a = a.cwiseProduct(m);
                if (tape) atr.res_mask = std::move(m);
            }
            x += a;
            if (tape) {
                atr.x_norm = std::move(x_norm);
                tape->attn.push_back(std::move(atr));
            }

            FfnTrace<S> ftr;
            Mat<S> f_norm = layer_norm(x, e.ln2, tape ? &ftr.ln : nullptr);
            Mat<S> f = ffn_forward(f_norm, e.ffn, tape ? &ftr : nullptr, drop);
            if (drop.active()) {
                Mat<S> m = drop.mask(f.rows(), f.cols());
                f = f.cwiseProduct(m);
                if (tape) ftr.res_mask = std::move(m);
            }
            if (tape) {
                ftr.x_norm = std::move(f_norm);
                tape->ffn.push_back(std::move(ftr));
            }
            x += f;
        }
        if (tape) tape->final_in = x;
        return layer_norm(x, layout_.enc_final, tape ? &tape->final_ln : nullptr);
    }

    void encode_backward(const Batch& b, EncTape<S>& tape, const Mat<S>& d_memory,
                         ParamSet<S>& grads) const {
        Mat<S> dx = layer_norm_backward(d_memory, tape.final_ln, layout_.enc_final, grads);
        for (int l = cfg_.layers - 1; l >= 0; --l) {
            const EncIdx& e = layout_.enc[static_cast<size_t>(l)];
            FfnTrace<S>& ftr = tape.ffn[static_cast<size_t>(l)];
            Mat<S> df = ftr.res_mask.size() ? dx.cwiseProduct(ftr.res_mask) : dx;
            Mat<S> df_norm = ffn_backward(df, ftr, e.ffn, grads);
            dx += layer_norm_backward(df_norm, ftr.ln, e.ln2, grads);

            AttnTrace<S>& atr = tape.attn[static_cast<size_t>(l)];
            Mat<S> da = atr.res_mask.size() ? dx.cwiseProduct(atr.res_mask) : dx;
            Mat<S> d_kv = Mat<S>::Zero(atr.x_norm.rows(), atr.x_norm.cols());
            Mat<S> dq_in = attention_backward(da, atr, b.n, b.src_len, b.src_len, e.attn, grads,
                                              atr.x_norm, d_kv);
            Mat<S> dx_norm = dq_in + d_kv;  // self-attention: q and kv share input
            dx += layer_norm_backward(dx_norm, atr.ln, e.ln1, grads);
        }
        embed_backward(dx, b.src, b.n, b.src_len, layout_.src_emb, tape.emb_mask, grads);
    }

    Mat<S> decode_batch(const Batch& b, const Mat<S>& memory, DecTape<S>* tape, DropCtx<S>& drop,
                        AttnSnapshot<S>* snap) const {
        Mat<S> x = embed(b.tgt_in, b.n, b.tgt_len, layout_.tgt_emb, tgt_vocab_,
                         tape ? &tape->emb_mask : nullptr, drop);
        if (tape) tape->x0 = x;
        for (int l = 0; l < cfg_.layers; ++l) {
            const DecIdx& dd = layout_.dec[static_cast<size_t>(l)];
            if (tape) tape->layer_in.push_back(x);

            // masked self-attention: causal mask, key count = full padded
            // length (causality already excludes pads for valid queries)
            std::vector<int> full_keys(static_cast<size_t>(b.n), b.tgt_len);
            AttnTrace<S> str;
            Mat<S> x_norm = layer_norm(x, dd.ln1, tape ? &str.ln : nullptr);
            Mat<S> a = attention(x_norm, x_norm, b.n, b.tgt_len, b.tgt_len, full_keys,
                                 /*causal=*/true, dd.self, tape ? &str : nullptr, drop,
                                 snap ? &snap->dec_self : nullptr);
            if (drop.active()) {
                Mat<S> m = drop.mask(a.rows(), a.cols());
                a = a.cwiseProduct(m);
                if (tape) str.res_mask = std::move(m);
            }
            x += a;
            if (tape) {
                str.x_norm = std::move(x_norm);
                tape->self_attn.push_back(std::move(str));
            }

            // cross-attention over the encoded source
            AttnTrace<S> ctr;
            Mat<S> c_norm = layer_norm(x, dd.ln2, tape ? &ctr.ln : nullptr);
            Mat<S> c = attention(c_norm, memory, b.n, b.tgt_len, b.src_len, b.src_n,
                                 /*causal=*/false, dd.cross, tape ? &ctr : nullptr, drop,
                                 snap ? &snap->dec_cross : nullptr);
            if (drop.active()) {
                Mat<S> m = drop.mask(c.rows(), c.cols());
                c = c.cwiseProduct(m);
                if (tape) ctr.res_mask = std::move(m);
            }
            x += c;
            if (tape) {
                ctr.x_norm = std::move(c_norm);
                tape->cross_attn.push_back(std::move(ctr));
            }

            FfnTrace<S> ftr;
            Mat<S> f_norm = layer_norm(x, dd.ln3, tape ? &ftr.ln : nullptr);
            Mat<S> f = ffn_forward(f_norm, dd.ffn, tape ? &ftr : nullptr, drop);
            if (drop.active()) {
                Mat<S> m = drop.mask(f.rows(), f.cols());
                f = f.cwiseProduct(m);
                if (tape) ftr.res_mask = std::move(m);
            }
            if (tape) {
                ftr.x_norm = std::move(f_norm);
                tape->ffn.push_back(std::move(ftr));
            }
            x += f;
        }
        if (tape) tape->final_in = x;
        return layer_norm(x, layout_.dec_final, tape ? &tape->final_ln : nullptr);
    }

    void decode_backward(const Batch& b, DecTape<S>& tape, const Mat<S>& memory,
                         const Mat<S>& d_hidden, ParamSet<S>& grads, Mat<S>& d_memory) const {
        Mat<S> dx = layer_norm_backward(d_hidden, tape.final_ln, layout_.dec_final, grads);
        for (int l = cfg_.layers - 1; l >= 0; --l) {
            const DecIdx& dd = layout_.dec[static_cast<size_t>(l)];

            FfnTrace<S>& ftr = tape.ffn[static_cast<size_t>(l)];
            Mat<S> df = ftr.res_mask.size() ? dx.cwiseProduct(ftr.res_mask) : dx;
            Mat<S> df_norm = ffn_backward(df, ftr, dd.ffn, grads);
            dx += layer_norm_backward(df_norm, ftr.ln, dd.ln3, grads);

            AttnTrace<S>& ctr = tape.cross_attn[static_cast<size_t>(l)];
            Mat<S> dc = ctr.res_mask.size() ? dx.cwiseProduct(ctr.res_mask) : dx;
            Mat<S> dq_in = attention_backward(dc, ctr, b.n, b.tgt_len, b.src_len, dd.cross,
                                              grads, memory, d_memory);
            dx += layer_norm_backward(dq_in, ctr.ln, dd.ln2, grads);

            AttnTrace<S>& str = tape.self_attn[static_cast<size_t>(l)];
            Mat<S> da = str.res_mask.size() ? dx.cwiseProduct(str.res_mask) : dx;
            Mat<S> d_kv = Mat<S>::Zero(str.x_norm.rows(), str.x_norm.cols());
            Mat<S> dq2 = attention_backward(da, str, b.n, b.tgt_len, b.tgt_len, dd.self, grads,
                                            str.x_norm, d_kv);
            Mat<S> dx_norm = dq2 + d_kv;
            dx += layer_norm_backward(dx_norm, str.ln, dd.ln1, grads);
        }
        embed_backward(dx, b.tgt_in, b.n, b.tgt_len, layout_.tgt_emb, tape.emb_mask, grads);
    }

    // ---- loss -----------------------------------------------------------

    // Computes the label-smoothed cross entropy summed over non-pad target
    // positions. If d_hidden is non-null, also writes the gradient of the
    // SUM (not mean) and accumulates the tied output-projection gradient.
    LossStats loss_and_dhidden(const Batch& b, const Mat<S>& hidden, double label_smoothing,
                               Mat<S>* d_hidden, ParamSet<S>* grads) const {
        const auto& emb = params_.tensors[layout_.tgt_emb];
        LossStats stats;
        stats.sent_loss.assign(static_cast<size_t>(b.n), 0.0);
        stats.sent_tokens.assign(static_cast<size_t>(b.n), 0);
        if (d_hidden) *d_hidden = Mat<S>::Zero(hidden.rows(), hidden.cols());

        const int vocab = tgt_vocab_;
        const double ls = label_smoothing;
        const double smooth = vocab > 1 ? ls / static_cast<double>(vocab - 1) : 0.0;

        Mat<S> logits = hidden * emb.transpose();  // rows x V
        Mat<S> d_logits;
        if (d_hidden) d_logits = Mat<S>::Zero(logits.rows(), logits.cols());

        for (int bi = 0; bi < b.n; ++bi) {
            for (int t = 0; t < b.tgt_len; ++t) {
                const int y = b.tgt_out[static_cast<size_t>(bi) * b.tgt_len + t];
                if (t >= b.tgt_n[static_cast<size_t>(bi)]) continue;
                const Eigen::Index row = static_cast<Eigen::Index>(bi) * b.tgt_len + t;

                const S mx = logits.row(row).maxCoeff();
                double sum = 0;
                for (int v = 0; v < vocab; ++v)
                    sum += std::exp(static_cast<double>(logits(row, v) - mx));
                const double lse = static_cast<double>(mx) + std::log(sum);

                // loss = -(1-ls) log p_y - smooth * sum_{j != y} log p_j
                double loss = (1.0 - ls) * (lse - static_cast<double>(logits(row, y)));
                if (ls > 0) {
                    for (int v = 0; v < vocab; ++v) {
                        if (v == y) continue;
                        loss += smooth * (lse - static_cast<double>(logits(row, v)));
                    }
                }
                stats.loss_sum += loss;
                stats.sent_loss[static_cast<size_t>(bi)] += loss;
                ++stats.tokens;
                ++stats.sent_tokens[static_cast<size_t>(bi)];

                if (d_hidden) {
                    for (int v = 0; v < vocab; ++v) {
                        const double p = std::exp(static_cast<double>(logits(row, v)) - lse);
                        const double q = v == y ? 1.0 - ls : smooth;
                        d_logits(row, v) = static_cast<S>(p - q);
                    }
                }
            }
        }
        if (d_hidden) {
            d_hidden->noalias() = d_logits * emb;
            grads->tensors[layout_.tgt_emb].noalias() += d_logits.transpose() * hidden;
        }
        return stats;
    }
};

}  // namespace lores::model

#include "lores/model/transformer.hpp"

namespace lores::model {

Batch make_batch(const std::vector<std::vector<int>>& src_ids,
                 const std::vector<std::vector<int>>& tgt_ids, int pad, int bos, int eos) {
    if (src_ids.size() != tgt_ids.size())
        fail("LengthMismatch", "source/target sentence counts differ");
    Batch b;
    b.n = static_cast<int>(src_ids.size());
    for (const auto& s : src_ids) b.src_len = std::max(b.src_len, static_cast<int>(s.size()) + 1);
    for (const auto& t : tgt_ids) b.tgt_len = std::max(b.tgt_len, static_cast<int>(t.size()) + 1);

    b.src.assign(static_cast<size_t>(b.n) * b.src_len, pad);
    b.tgt_in.assign(static_cast<size_t>(b.n) * b.tgt_len, pad);
    b.tgt_out.assign(static_cast<size_t>(b.n) * b.tgt_len, pad);
    b.src_n.resize(static_cast<size_t>(b.n));
    b.tgt_n.resize(static_cast<size_t>(b.n));

    for (int i = 0; i < b.n; ++i) {
        const auto& s = src_ids[static_cast<size_t>(i)];
        for (size_t k = 0; k < s.size(); ++k) b.src[static_cast<size_t>(i) * b.src_len + k] = s[k];
        b.src[static_cast<size_t>(i) * b.src_len + s.size()] = eos;
        b.src_n[static_cast<size_t>(i)] = static_cast<int>(s.size()) + 1;

        const auto& t = tgt_ids[static_cast<size_t>(i)];
        b.tgt_in[static_cast<size_t>(i) * b.tgt_len] = bos;
        for (size_t k = 0; k < t.size(); ++k) {
            b.tgt_in[static_cast<size_t>(i) * b.tgt_len + k + 1] = t[k];
            b.tgt_out[static_cast<size_t>(i) * b.tgt_len + k] = t[k];
        }
        b.tgt_out[static_cast<size_t>(i) * b.tgt_len + t.size()] = eos;
        b.tgt_n[static_cast<size_t>(i)] = static_cast<int>(t.size()) + 1;
    }
    return b;
}

Batch Batch::slice(int begin, int end) const {
    Batch s;
    s.n = end - begin;
    s.src_len = src_len;
    s.tgt_len = tgt_len;
    s.src.assign(src.begin() + static_cast<long>(begin) * src_len,
                 src.begin() + static_cast<long>(end) * src_len);
    s.tgt_in.assign(tgt_in.begin() + static_cast<long>(begin) * tgt_len,
                    tgt_in.begin() + static_cast<long>(end) * tgt_len);
    s.tgt_out.assign(tgt_out.begin() + static_cast<long>(begin) * tgt_len,
                     tgt_out.begin() + static_cast<long>(end) * tgt_len);
    s.src_n.assign(src_n.begin() + begin, src_n.begin() + end);
    s.tgt_n.assign(tgt_n.begin() + begin, tgt_n.begin() + end);
    return s;
}

}  // namespace lores::model

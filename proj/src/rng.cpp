#include "lores/rng.hpp"

#include <algorithm>

namespace lores {

std::vector<size_t> sample_indices(size_t n, size_t k, Rng& rng) {
    if (k >= n) {
        std::vector<size_t> all(n);
        for (size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    // Partial Fisher-Yates over an index array, then sort the chosen prefix.
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    for (size_t i = 0; i < k; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace lores

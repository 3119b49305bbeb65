#include "lores/hash.hpp"

#include <cstdio>

#include "lores/rng.hpp"
#include "lores/text.hpp"

namespace lores {

uint64_t hash_bytes(std::string_view data) { return fnv1a64(data); }

std::string hash_hex(std::string_view data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a64(data)));
    return std::string(buf);
}

std::string hash_file_hex(const std::string& path) { return hash_hex(read_file(path)); }

}  // namespace lores

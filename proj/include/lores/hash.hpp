#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lores {

// FNV-1a over arbitrary bytes, rendered as fixed-width hex. Used for config
// and artifact fingerprints in stage manifests (not cryptographic).
uint64_t hash_bytes(std::string_view data);
std::string hash_hex(std::string_view data);
std::string hash_file_hex(const std::string& path);

}  // namespace lores

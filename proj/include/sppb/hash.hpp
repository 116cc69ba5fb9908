#pragma once

#include <cstdint>
#include <string_view>

namespace sppb {

/// FNV-1a, 64 bit. Used for config hashes in manifests and for model
/// digests in tests; stability across platforms matters, cryptographic
/// strength does not.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

}  // namespace sppb

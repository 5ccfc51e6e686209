#include "hash.hpp"

#include <fmt/format.h>

namespace mti::detail {

std::string hex_digest(std::string_view bytes) {
    // Two independent FNV-1a lanes give a 128-bit identifier; not cryptographic.
    const std::uint64_t a = fnv1a64(bytes);
    const std::uint64_t b = fnv1a64(bytes, 0x84222325cbf29ce4ULL ^ bytes.size());
    return fmt::format("{:016x}{:016x}", a, b);
}

} // namespace mti::detail

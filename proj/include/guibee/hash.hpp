#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace guibee {

// 64-bit FNV-1a. Stable across platforms and processes; used for action keys,
// request hashes and file digests. Not cryptographic.
class Fnv64 {
public:
    Fnv64& update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            state_ ^= p[i];
            state_ *= 0x100000001b3ull;
        }
        return *this;
    }
    Fnv64& update(std::string_view s) { return update(s.data(), s.size()); }
    // Field separator so that ("ab","c") and ("a","bc") hash differently.
    Fnv64& field(std::string_view s) {
        update(s);
        const unsigned char sep = 0x1f;
        return update(&sep, 1);
    }
    std::uint64_t value() const { return state_; }
    std::string hex() const;

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

std::string to_hex64(std::uint64_t v);

inline std::string Fnv64::hex() const { return to_hex64(state_); }

inline std::uint64_t fnv64(std::string_view s) { return Fnv64().update(s).value(); }

}  // namespace guibee

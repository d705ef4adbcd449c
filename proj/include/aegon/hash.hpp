#pragma once

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <string_view>

#include "aegon/encoding.hpp"

namespace aegon {

using Digest = std::array<std::uint8_t, 32>;

inline Digest sha256(const std::uint8_t* data, std::size_t len) {
    Digest out{};
    unsigned int out_len = 0;
    if (EVP_Digest(data, len, out.data(), &out_len, EVP_sha256(), nullptr) != 1 ||
        out_len != out.size()) {
        throw std::runtime_error("sha256 failed");
    }
    return out;
}

inline Digest sha256(const Bytes& data) { return sha256(data.data(), data.size()); }

inline Digest sha256(std::string_view s) {
    return sha256(reinterpret_cast<const std::uint8_t*>(s.data()), s.size());
}

inline std::string sha256_hex(std::string_view s) {
    Digest d = sha256(s);
    return hex_encode(Bytes(d.begin(), d.end()));
}

inline Digest hmac_sha256(const Bytes& key, std::string_view message) {
    Digest out{};
    unsigned int out_len = 0;
    if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
             reinterpret_cast<const std::uint8_t*>(message.data()), message.size(), out.data(),
             &out_len) == nullptr ||
        out_len != out.size()) {
        throw std::runtime_error("hmac_sha256 failed");
    }
    return out;
}

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t len) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

inline std::uint32_t crc32_of(const Bytes& data) { return crc32_of(data.data(), data.size()); }

inline Bytes random_bytes(std::size_t n) {
    Bytes out(n);
    if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1) {
        throw std::runtime_error("RAND_bytes failed");
    }
    return out;
}

inline std::string hex(const Digest& d) { return hex_encode(Bytes(d.begin(), d.end())); }

inline Digest digest_from_hex(std::string_view hex_str) {
    Bytes b = hex_decode(hex_str);
    if (b.size() != 32) throw std::invalid_argument("expected 32-byte hex digest");
    Digest d{};
    std::copy(b.begin(), b.end(), d.begin());
    return d;
}

} // namespace aegon

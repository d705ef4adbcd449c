#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

#include "aegon/hash.hpp"

namespace aegon {

// Bloom filter with double hashing over SHA-256. Sized from capacity and a
// target false-positive rate; positives must be confirmed by an exact set
// before anything is rejected on its account.
class BloomFilter {
public:
    BloomFilter(std::size_t capacity, double target_fpr) {
        double m = -static_cast<double>(capacity) * std::log(target_fpr) /
                   (std::numbers::ln2 * std::numbers::ln2);
        bit_count_ = std::max<std::size_t>(64, static_cast<std::size_t>(std::ceil(m)));
        hash_count_ = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(m / capacity * std::numbers::ln2)));
        bits_.assign((bit_count_ + 63) / 64, 0);
    }

    void add(std::string_view item) {
        auto [h1, h2] = seeds(item);
        for (std::size_t i = 0; i < hash_count_; ++i) set_bit((h1 + i * h2) % bit_count_);
    }

    bool maybe_contains(std::string_view item) const {
        auto [h1, h2] = seeds(item);
        for (std::size_t i = 0; i < hash_count_; ++i) {
            if (!get_bit((h1 + i * h2) % bit_count_)) return false;
        }
        return true;
    }

    void clear() { bits_.assign(bits_.size(), 0); }

    std::size_t bit_count() const { return bit_count_; }
    std::size_t hash_count() const { return hash_count_; }

private:
    static std::pair<std::uint64_t, std::uint64_t> seeds(std::string_view item) {
        Digest d = sha256(item);
        std::uint64_t h1 = 0;
        std::uint64_t h2 = 0;
        for (int i = 0; i < 8; ++i) {
            h1 = (h1 << 8) | d[i];
            h2 = (h2 << 8) | d[8 + i];
        }
        return {h1, h2 | 1};
    }

    void set_bit(std::uint64_t i) { bits_[i >> 6] |= (1ULL << (i & 63)); }
    bool get_bit(std::uint64_t i) const { return (bits_[i >> 6] >> (i & 63)) & 1; }

    std::size_t bit_count_;
    std::size_t hash_count_;
    std::vector<std::uint64_t> bits_;
};

} // namespace aegon

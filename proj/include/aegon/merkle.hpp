#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "aegon/hash.hpp"

namespace aegon {

// RFC 6962 tree hashing: 0x00 domain prefix for leaves, 0x01 for interior nodes.
inline Digest leaf_hash(const Bytes& encoded_entry) {
    Bytes buf;
    buf.reserve(encoded_entry.size() + 1);
    buf.push_back(0x00);
    buf.insert(buf.end(), encoded_entry.begin(), encoded_entry.end());
    return sha256(buf);
}

inline Digest leaf_hash(std::string_view encoded_entry) {
    return leaf_hash(to_bytes(encoded_entry));
}

inline Digest interior_hash(const Digest& left, const Digest& right) {
    Bytes buf;
    buf.reserve(65);
    buf.push_back(0x01);
    buf.insert(buf.end(), left.begin(), left.end());
    buf.insert(buf.end(), right.begin(), right.end());
    return sha256(buf);
}

inline Digest empty_tree_hash() { return sha256(std::string_view{}); }

struct InclusionProof {
    std::uint64_t leaf_index = 0;
    std::uint64_t tree_size = 0;
    std::vector<Digest> audit_path;
};

struct ConsistencyProof {
    std::uint64_t old_size = 0;
    std::uint64_t new_size = 0;
    std::vector<Digest> path;
};

namespace detail {

// Largest power of two strictly less than n (n >= 2).
inline std::uint64_t split_point(std::uint64_t n) {
    std::uint64_t k = 1;
    while (k * 2 < n) k *= 2;
    return k;
}

inline Digest subtree_root(std::span<const Digest> leaves) {
    if (leaves.empty()) return empty_tree_hash();
    if (leaves.size() == 1) return leaves[0];
    std::uint64_t k = split_point(leaves.size());
    return interior_hash(subtree_root(leaves.first(k)), subtree_root(leaves.subspan(k)));
}

inline void audit_path(std::uint64_t m, std::span<const Digest> leaves,
                       std::vector<Digest>& out) {
    if (leaves.size() <= 1) return;
    std::uint64_t k = split_point(leaves.size());
    if (m < k) {
        audit_path(m, leaves.first(k), out);
        out.push_back(subtree_root(leaves.subspan(k)));
    } else {
        audit_path(m - k, leaves.subspan(k), out);
        out.push_back(subtree_root(leaves.first(k)));
    }
}

inline void subproof(std::uint64_t m, std::span<const Digest> leaves, bool complete,
                     std::vector<Digest>& out) {
    if (m == leaves.size()) {
        if (!complete) out.push_back(subtree_root(leaves));
        return;
    }
    std::uint64_t k = split_point(leaves.size());
    if (m <= k) {
        subproof(m, leaves.first(k), complete, out);
        out.push_back(subtree_root(leaves.subspan(k)));
    } else {
        subproof(m - k, leaves.subspan(k), false, out);
        out.push_back(subtree_root(leaves.first(k)));
    }
}

} // namespace detail

// Merkle tree over a sequence of pre-hashed leaves. Proof and root queries
// accept any historical size <= the current leaf count.
class MerkleTree {
public:
    void push_leaf(const Digest& d) { leaves_.push_back(d); }

    std::uint64_t size() const { return leaves_.size(); }

    Digest root(std::uint64_t tree_size) const {
        check_size(tree_size);
        return detail::subtree_root(std::span(leaves_).first(tree_size));
    }

    Digest root() const { return root(leaves_.size()); }

    InclusionProof inclusion(std::uint64_t leaf_index, std::uint64_t tree_size) const {
        check_size(tree_size);
        if (leaf_index >= tree_size) throw std::out_of_range("leaf_index >= tree_size");
        InclusionProof p{leaf_index, tree_size, {}};
        detail::audit_path(leaf_index, std::span(leaves_).first(tree_size), p.audit_path);
        return p;
    }

    ConsistencyProof consistency(std::uint64_t old_size, std::uint64_t new_size) const {
        check_size(new_size);
        if (old_size > new_size) throw std::out_of_range("old_size > new_size");
        ConsistencyProof p{old_size, new_size, {}};
        if (old_size == 0 || old_size == new_size) return p;
        detail::subproof(old_size, std::span(leaves_).first(new_size), true, p.path);
        return p;
    }

private:
    void check_size(std::uint64_t tree_size) const {
        if (tree_size > leaves_.size()) throw std::out_of_range("tree_size beyond current size");
    }

    std::vector<Digest> leaves_;
};

// Stateless verification (RFC 9162 algorithms); used by the auditor with no
// broker state.
inline bool verify_inclusion(const InclusionProof& proof, const Digest& leaf_digest,
                             const Digest& expected_root, std::uint64_t expected_tree_size) {
    if (proof.tree_size != expected_tree_size) return false;
    if (proof.leaf_index >= proof.tree_size) return false;
    std::uint64_t fn = proof.leaf_index;
    std::uint64_t sn = proof.tree_size - 1;
    Digest r = leaf_digest;
    for (const Digest& p : proof.audit_path) {
        if (sn == 0) return false;
        if ((fn & 1) == 1 || fn == sn) {
            r = interior_hash(p, r);
            if ((fn & 1) == 0) {
                while (fn != 0 && (fn & 1) == 0) {
                    fn >>= 1;
                    sn >>= 1;
                }
            }
        } else {
            r = interior_hash(r, p);
        }
        fn >>= 1;
        sn >>= 1;
    }
    return sn == 0 && r == expected_root;
}

inline bool verify_consistency(const ConsistencyProof& proof, const Digest& old_root,
                               const Digest& new_root) {
    const std::uint64_t first = proof.old_size;
    const std::uint64_t second = proof.new_size;
    if (first > second) return false;
    if (first == second) return proof.path.empty() && old_root == new_root;
    if (first == 0) return proof.path.empty();

    std::vector<Digest> path = proof.path;
    // When first is an exact power of two the old root itself anchors the walk.
    if ((first & (first - 1)) == 0) path.insert(path.begin(), old_root);
    if (path.empty()) return false;

    std::uint64_t fn = first - 1;
    std::uint64_t sn = second - 1;
    while ((fn & 1) == 1) {
        fn >>= 1;
        sn >>= 1;
    }
    Digest fr = path[0];
    Digest sr = path[0];
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Digest& c = path[i];
        if (sn == 0) return false;
        if ((fn & 1) == 1 || fn == sn) {
            fr = interior_hash(c, fr);
            sr = interior_hash(c, sr);
            while (fn != 0 && (fn & 1) == 0) {
                fn >>= 1;
                sn >>= 1;
            }
        } else {
            sr = interior_hash(sr, c);
        }
        fn >>= 1;
        sn >>= 1;
    }
    return sn == 0 && fr == old_root && sr == new_root;
}

} // namespace aegon

#pragma once

#include <openssl/evp.h>

#include <optional>
#include <stdexcept>

#include "aegon/hash.hpp"

namespace aegon {

// AES-256-GCM, output framed as nonce(12) || ciphertext || tag(16).
inline Bytes aead_encrypt(const Bytes& key32, const Bytes& plaintext) {
    if (key32.size() != 32) throw std::invalid_argument("aead_encrypt: key must be 32 bytes");
    Bytes nonce = random_bytes(12);
    Bytes out(12 + plaintext.size() + 16);
    std::copy(nonce.begin(), nonce.end(), out.begin());

    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    int len = 0;
    bool ok = ctx && EVP_EncryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key32.data(),
                                        nonce.data()) == 1 &&
              EVP_EncryptUpdate(ctx, out.data() + 12, &len, plaintext.data(),
                                static_cast<int>(plaintext.size())) == 1;
    int total = len;
    ok = ok && EVP_EncryptFinal_ex(ctx, out.data() + 12 + total, &len) == 1;
    total += len;
    ok = ok && EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, 16,
                                   out.data() + 12 + plaintext.size()) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok || total != static_cast<int>(plaintext.size())) {
        throw std::runtime_error("aead_encrypt failed");
    }
    return out;
}

inline std::optional<Bytes> aead_decrypt(const Bytes& key32, const Bytes& frame) {
    if (key32.size() != 32 || frame.size() < 28) return std::nullopt;
    std::size_t ct_len = frame.size() - 28;
    Bytes out(ct_len);
    Bytes tag(frame.end() - 16, frame.end());

    EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
    int len = 0;
    bool ok = ctx && EVP_DecryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key32.data(),
                                        frame.data()) == 1 &&
              EVP_DecryptUpdate(ctx, out.data(), &len, frame.data() + 12,
                                static_cast<int>(ct_len)) == 1 &&
              EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, 16, tag.data()) == 1 &&
              EVP_DecryptFinal_ex(ctx, out.data() + len, &len) == 1;
    EVP_CIPHER_CTX_free(ctx);
    if (!ok) return std::nullopt;
    return out;
}

} // namespace aegon

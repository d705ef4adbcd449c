#pragma once

#include <openssl/bn.h>
#include <openssl/core_names.h>
#include <openssl/ec.h>
#include <openssl/ecdsa.h>
#include <openssl/evp.h>
#include <openssl/param_build.h>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "aegon/canonical.hpp"
#include "aegon/hash.hpp"

namespace aegon {

namespace detail {
struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
} // namespace detail

using PkeyPtr = std::shared_ptr<EVP_PKEY>;

inline PkeyPtr wrap_pkey(EVP_PKEY* raw) {
    if (!raw) throw std::runtime_error("null EVP_PKEY");
    return PkeyPtr(raw, detail::PkeyDeleter{});
}

// P-256 key pair (or public-only key) with JOSE-style raw r||s signatures.
class EcKey {
public:
    static EcKey generate() {
        EVP_PKEY* raw = EVP_EC_gen("P-256");
        if (!raw) throw std::runtime_error("P-256 keygen failed");
        return EcKey(wrap_pkey(raw), true);
    }

    // Public key from JWK coordinates (base64url, 32 bytes each).
    static EcKey from_public_jwk(const Json& jwk) {
        Bytes x = base64url_decode(jwk.at("x").get<std::string>());
        Bytes y = base64url_decode(jwk.at("y").get<std::string>());
        if (x.size() != 32 || y.size() != 32) throw std::invalid_argument("bad JWK coordinates");
        Bytes point;
        point.push_back(0x04);
        point.insert(point.end(), x.begin(), x.end());
        point.insert(point.end(), y.begin(), y.end());
        return EcKey(import_key(point, std::nullopt), false);
    }

    // Full key pair from a JWK carrying the private scalar "d".
    static EcKey from_private_jwk(const Json& jwk) {
        Bytes x = base64url_decode(jwk.at("x").get<std::string>());
        Bytes y = base64url_decode(jwk.at("y").get<std::string>());
        Bytes d = base64url_decode(jwk.at("d").get<std::string>());
        if (x.size() != 32 || y.size() != 32 || d.size() != 32) {
            throw std::invalid_argument("bad JWK coordinates");
        }
        Bytes point;
        point.push_back(0x04);
        point.insert(point.end(), x.begin(), x.end());
        point.insert(point.end(), y.begin(), y.end());
        return EcKey(import_key(point, d), true);
    }

    bool has_private() const { return has_private_; }

    // Raw 64-byte (r||s) ECDSA-SHA256 signature over message bytes.
    Bytes sign(std::string_view message) const {
        if (!has_private_) throw std::logic_error("sign: public-only key");
        EVP_MD_CTX* ctx = EVP_MD_CTX_new();
        if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
        Bytes der(128);
        std::size_t der_len = der.size();
        bool ok = EVP_DigestSignInit(ctx, nullptr, EVP_sha256(), nullptr, pkey_.get()) == 1 &&
                  EVP_DigestSign(ctx, der.data(), &der_len,
                                 reinterpret_cast<const std::uint8_t*>(message.data()),
                                 message.size()) == 1;
        EVP_MD_CTX_free(ctx);
        if (!ok) throw std::runtime_error("ECDSA sign failed");
        der.resize(der_len);
        return der_to_raw64(der);
    }

    bool verify(std::string_view message, const Bytes& raw_sig) const {
        if (raw_sig.size() != 64) return false;
        Bytes der = raw64_to_der(raw_sig);
        EVP_MD_CTX* ctx = EVP_MD_CTX_new();
        if (!ctx) throw std::runtime_error("EVP_MD_CTX_new failed");
        bool ok = EVP_DigestVerifyInit(ctx, nullptr, EVP_sha256(), nullptr, pkey_.get()) == 1 &&
                  EVP_DigestVerify(ctx, der.data(), der.size(),
                                   reinterpret_cast<const std::uint8_t*>(message.data()),
                                   message.size()) == 1;
        EVP_MD_CTX_free(ctx);
        return ok;
    }

    Json public_jwk() const {
        auto [x, y] = public_coords();
        return Json{{"kty", "EC"}, {"crv", "P-256"}, {"x", base64url_encode(x)},
                    {"y", base64url_encode(y)}};
    }

    Json private_jwk() const {
        if (!has_private_) throw std::logic_error("private_jwk: public-only key");
        Json jwk = public_jwk();
        BIGNUM* d = nullptr;
        if (EVP_PKEY_get_bn_param(pkey_.get(), OSSL_PKEY_PARAM_PRIV_KEY, &d) != 1) {
            throw std::runtime_error("private key export failed");
        }
        Bytes buf(32);
        BN_bn2binpad(d, buf.data(), 32);
        BN_free(d);
        jwk["d"] = base64url_encode(buf);
        return jwk;
    }

    EcKey public_only() const { return EcKey(pkey_, false); }

private:
    EcKey(PkeyPtr pkey, bool has_private) : pkey_(std::move(pkey)), has_private_(has_private) {}

    static PkeyPtr import_key(const Bytes& pub_point, std::optional<Bytes> priv) {
        OSSL_PARAM_BLD* bld = OSSL_PARAM_BLD_new();
        if (!bld) throw std::runtime_error("OSSL_PARAM_BLD_new failed");
        OSSL_PARAM_BLD_push_utf8_string(bld, OSSL_PKEY_PARAM_GROUP_NAME, "P-256", 0);
        OSSL_PARAM_BLD_push_octet_string(bld, OSSL_PKEY_PARAM_PUB_KEY, pub_point.data(),
                                         pub_point.size());
        BIGNUM* d = nullptr;
        if (priv) {
            d = BN_bin2bn(priv->data(), static_cast<int>(priv->size()), nullptr);
            OSSL_PARAM_BLD_push_BN(bld, OSSL_PKEY_PARAM_PRIV_KEY, d);
        }
        OSSL_PARAM* params = OSSL_PARAM_BLD_to_param(bld);
        OSSL_PARAM_BLD_free(bld);

        EVP_PKEY* raw = nullptr;
        EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new_from_name(nullptr, "EC", nullptr);
        bool ok = ctx && params && EVP_PKEY_fromdata_init(ctx) == 1 &&
                  EVP_PKEY_fromdata(ctx, &raw, priv ? EVP_PKEY_KEYPAIR : EVP_PKEY_PUBLIC_KEY,
                                    params) == 1;
        EVP_PKEY_CTX_free(ctx);
        OSSL_PARAM_free(params);
        if (d) BN_clear_free(d);
        if (!ok || !raw) throw std::runtime_error("EC key import failed");
        return wrap_pkey(raw);
    }

    std::pair<Bytes, Bytes> public_coords() const {
        BIGNUM* x = nullptr;
        BIGNUM* y = nullptr;
        if (EVP_PKEY_get_bn_param(pkey_.get(), OSSL_PKEY_PARAM_EC_PUB_X, &x) != 1 ||
            EVP_PKEY_get_bn_param(pkey_.get(), OSSL_PKEY_PARAM_EC_PUB_Y, &y) != 1) {
            BN_free(x);
            throw std::runtime_error("public key export failed");
        }
        Bytes xb(32), yb(32);
        BN_bn2binpad(x, xb.data(), 32);
        BN_bn2binpad(y, yb.data(), 32);
        BN_free(x);
        BN_free(y);
        return {xb, yb};
    }

    static Bytes der_to_raw64(const Bytes& der) {
        const std::uint8_t* p = der.data();
        ECDSA_SIG* sig = d2i_ECDSA_SIG(nullptr, &p, static_cast<long>(der.size()));
        if (!sig) throw std::runtime_error("ECDSA DER decode failed");
        Bytes out(64);
        BN_bn2binpad(ECDSA_SIG_get0_r(sig), out.data(), 32);
        BN_bn2binpad(ECDSA_SIG_get0_s(sig), out.data() + 32, 32);
        ECDSA_SIG_free(sig);
        return out;
    }

    static Bytes raw64_to_der(const Bytes& raw) {
        ECDSA_SIG* sig = ECDSA_SIG_new();
        BIGNUM* r = BN_bin2bn(raw.data(), 32, nullptr);
        BIGNUM* s = BN_bin2bn(raw.data() + 32, 32, nullptr);
        ECDSA_SIG_set0(sig, r, s);
        int len = i2d_ECDSA_SIG(sig, nullptr);
        Bytes der(static_cast<std::size_t>(len));
        std::uint8_t* p = der.data();
        i2d_ECDSA_SIG(sig, &p);
        ECDSA_SIG_free(sig);
        return der;
    }

    PkeyPtr pkey_;
    bool has_private_;
};

} // namespace aegon

#include "rangeforge/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>

#include "rangeforge/error.hpp"

namespace rangeforge {

namespace {

EVP_MD_CTX* as_ctx(void* p) { return static_cast<EVP_MD_CTX*>(p); }

}  // namespace

Sha256::Sha256() {
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256: failed to initialize digest context");
    }
    ctx_ = ctx;
}

Sha256::~Sha256() {
    if (ctx_ != nullptr) EVP_MD_CTX_free(as_ctx(ctx_));
}

Sha256::Sha256(Sha256&& other) noexcept : ctx_(other.ctx_) { other.ctx_ = nullptr; }

Sha256::Sha256(const Sha256& other) {
    if (other.ctx_ == nullptr) return;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (ctx == nullptr || EVP_MD_CTX_copy_ex(ctx, as_ctx(other.ctx_)) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha256: failed to copy digest context");
    }
    ctx_ = ctx;
}

Sha256& Sha256::operator=(const Sha256& other) {
    if (this != &other) {
        Sha256 copy(other);
        std::swap(ctx_, copy.ctx_);
    }
    return *this;
}

Sha256& Sha256::operator=(Sha256&& other) noexcept {
    if (this != &other) {
        if (ctx_ != nullptr) EVP_MD_CTX_free(as_ctx(ctx_));
        ctx_ = other.ctx_;
        other.ctx_ = nullptr;
    }
    return *this;
}

void Sha256::update(std::string_view bytes) {
    if (ctx_ == nullptr) throw Error("sha256: update after finalize");
    if (EVP_DigestUpdate(as_ctx(ctx_), bytes.data(), bytes.size()) != 1) {
        throw Error("sha256: digest update failed");
    }
}

std::string Sha256::hex_digest() {
    if (ctx_ == nullptr) throw Error("sha256: already finalized");
    std::array<unsigned char, EVP_MAX_MD_SIZE> raw{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(as_ctx(ctx_), raw.data(), &len) != 1) {
        throw Error("sha256: digest finalize failed");
    }
    EVP_MD_CTX_free(as_ctx(ctx_));
    ctx_ = nullptr;

    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(static_cast<std::size_t>(len) * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[raw[i] >> 4]);
        out.push_back(hex[raw[i] & 0xf]);
    }
    return out;
}

std::string Sha256::of(std::string_view bytes) {
    Sha256 h;
    h.update(bytes);
    return h.hex_digest();
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file for digest: " + path);
    Sha256 h;
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())));
    }
    return h.hex_digest();
}

}  // namespace rangeforge

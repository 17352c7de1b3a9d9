#pragma once

#include <string>
#include <string_view>

namespace rangeforge {

/// Streaming SHA-256, hex output. Wraps the OpenSSL EVP interface so the
/// header stays dependency-free.
class Sha256 {
public:
    Sha256();
    ~Sha256();

    Sha256(Sha256&& other) noexcept;
    Sha256& operator=(Sha256&& other) noexcept;
    Sha256(const Sha256& other);
    Sha256& operator=(const Sha256& other);

    void update(std::string_view bytes);

    /// Finalizes; the object must not be updated afterwards.
    std::string hex_digest();

    static std::string of(std::string_view bytes);

private:
    void* ctx_ = nullptr;
};

std::string sha256_file(const std::string& path);

}  // namespace rangeforge

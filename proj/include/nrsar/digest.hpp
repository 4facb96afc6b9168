#pragma once

// SHA-256 hex digests for provenance records. Requires linking OpenSSL::Crypto.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include <openssl/evp.h>

#include "nrsar/audio_io.hpp"
#include "nrsar/error.hpp"

namespace nrsar {

inline std::string sha256_hex(std::span<const unsigned char> data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

inline std::string sha256_hex(std::string_view s) {
    return sha256_hex(std::span<const unsigned char>(reinterpret_cast<const unsigned char*>(s.data()), s.size()));
}

inline std::string file_sha256(const std::filesystem::path& p) { return sha256_hex(detail::read_file_bytes(p)); }

} // namespace nrsar

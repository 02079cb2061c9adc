#include "aiv/digest.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <vector>

namespace aiv {

std::string sha256_hex(std::string_view data) {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

namespace {

void canonical_into(const nlohmann::json& j, std::string& out) {
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            out += '{';
            bool first = true;
            for (const auto& [k, v] : j.items()) {  // std::map storage: sorted keys
                if (!first) out += ',';
                first = false;
                out += nlohmann::json(k).dump();
                out += ':';
                canonical_into(v, out);
            }
            out += '}';
            break;
        }
        case nlohmann::json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i) out += ',';
                canonical_into(j[i], out);
            }
            out += ']';
            break;
        }
        case nlohmann::json::value_t::number_float: {
            double v = j.get<double>();
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite number in configuration");
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            if (std::string_view(buf) == "-0.000000") std::snprintf(buf, sizeof(buf), "%.6f", 0.0);
            out += buf;
            break;
        }
        default: out += j.dump(); break;
    }
}

}  // namespace

std::string canonical_json(const nlohmann::json& j) {
    std::string out;
    canonical_into(j, out);
    return out;
}

FileIdentity identify_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<char> buf(kIdentityPrefixBytes);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    FileIdentity id;
    id.path = path.string();
    id.digest = sha256_hex(std::string_view(buf.data(), got));
    id.bytes = std::filesystem::file_size(path);
    return id;
}

}  // namespace aiv

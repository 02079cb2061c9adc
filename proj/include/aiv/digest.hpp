#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

namespace aiv {

std::string sha256_hex(std::string_view data);

/// Serialization with sorted keys and every floating-point value printed in
/// fixed notation with 6 decimals, so equal configurations hash equally.
std::string canonical_json(const nlohmann::json& j);

/// Cheap identity of a (possibly large) input file: SHA-256 of the first
/// 1 MiB plus the total length.
struct FileIdentity {
    std::string path;
    std::string digest;
    std::uint64_t bytes = 0;

    friend bool operator==(const FileIdentity&, const FileIdentity&) = default;
};

inline constexpr std::size_t kIdentityPrefixBytes = 1U << 20;

FileIdentity identify_file(const std::filesystem::path& path);

}  // namespace aiv

#pragma once

#include <string>

#include "aiv/cache.hpp"
#include "aiv/counting.hpp"

namespace aiv {

/// Counts from cached track outputs without re-running detection or
/// tracking. Throws ConfigMismatchError when the cache was produced with a
/// configuration whose hash differs from `expected_hash`.
CountLedger quick_count(CacheReader& cache, const CountingConfig& config, const std::string& expected_hash);

/// Same, for a cache file on disk.
CountLedger quick_count(const std::filesystem::path& cache_path, const CountingConfig& config,
                        const std::string& expected_hash);

}  // namespace aiv

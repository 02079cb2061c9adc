#include "aiv/quick_count.hpp"

namespace aiv {

CountLedger quick_count(CacheReader& cache, const CountingConfig& config, const std::string& expected_hash) {
    if (!cache.config_matches(expected_hash)) {
        throw ConfigMismatchError("cache was built with a different tracker/detector configuration (" +
                                  cache.header().config_hash.substr(0, 12) + " != " + expected_hash.substr(0, 12) +
                                  "); re-run the pipeline before counting");
    }
    CountingEngine engine(config);
    cache.rewind();
    while (auto record = cache.next()) engine.consume(*record);
    return engine.ledger();
}

CountLedger quick_count(const std::filesystem::path& cache_path, const CountingConfig& config,
                        const std::string& expected_hash) {
    CacheReader reader(cache_path);
    return quick_count(reader, config, expected_hash);
}

}  // namespace aiv

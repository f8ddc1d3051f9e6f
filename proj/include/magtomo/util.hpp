#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace magtomo {

// FNV-1a over bytes; used for config fingerprints in reports.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

// Worker cap: MAGTOMO_THREADS if set, else hardware concurrency (clamped).
int thread_budget();

// Runs fn(i) for i in [0, n).  Work is split into contiguous blocks; results
// must be written by index so the outcome does not depend on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

std::string utc_timestamp();

}  // namespace magtomo

#pragma once

#include <cstddef>
#include <functional>

namespace rlchain {

/// Worker threads used by ensemble steps. Results never depend on it.
void set_worker_count(int workers);
int worker_count();

/// Calls body(begin, end) on contiguous chunks of [0, n), possibly concurrently.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace rlchain

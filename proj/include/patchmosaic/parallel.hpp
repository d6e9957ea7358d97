#pragma once

#include <cstddef>
#include <functional>

namespace patchmosaic {

/// Worker count from PATCHMOSAIC_WORKERS, or 1 when unset or unparsable.
std::size_t default_workers();

/// Runs body(begin, end) over contiguous chunks of [0, count) on up to
/// `workers` threads. Chunks are disjoint, so callers that write only to their
/// own indices get results independent of the worker count.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace patchmosaic

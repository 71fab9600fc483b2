#pragma once

#include <cstddef>
#include <functional>

namespace wavessm {

// Worker cap for all library kernels. 0 means "use hardware concurrency".
// Initialised from WAVE_SSM_THREADS on first use.
std::size_t num_threads();
void set_num_threads(std::size_t n);

// Runs body(begin, end) over a static partition of [0, n). Each index is
// visited by exactly one worker, so kernels that write disjoint outputs with a
// fixed per-element reduction order are bit-identical for any thread count.
// Work below `grain` indices per worker runs inline.
void parallel_for(std::size_t n, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace wavessm

#pragma once

#include <functional>

namespace crom {

/// Worker count used by parallel loops; 1 (the default) runs inline.
void set_num_threads(int n);
int num_threads();

/// Run body(i) for i in [0, n) over contiguous chunks. Iterations must be
/// independent; the first exception raised by any worker is rethrown.
void parallel_for(int n, const std::function<void(int)>& body);

}  // namespace crom

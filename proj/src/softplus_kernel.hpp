#pragma once

#include <cstddef>

namespace esmeta::detail {

// z <- softplus_β(z), slope <- σ(βz), elementwise over n entries. Compiled
// with vector math enabled; inputs must be finite.
void softplus_inplace(double* z, double* slope, std::size_t n, double beta);

}  // namespace esmeta::detail

#pragma once

namespace cycpl {

/// Bounds the BLAS worker pool, the only internal parallelism. 1 is the
/// reference (bit-reproducible) mode.
void set_num_threads(int n);
int num_threads();

}  // namespace cycpl

#include "cycpl/parallel.hpp"

#include <cblas.h>

#include "cycpl/error.hpp"

namespace cycpl {

void set_num_threads(int n) {
  if (n < 1) fail(ErrorCode::Config, "thread count must be >= 1");
  openblas_set_num_threads(n);
}

int num_threads() { return openblas_get_num_threads(); }

}  // namespace cycpl

#include "gemv.h"

void gemv(int64_t M, int64_t N, float *A, float *x, float *y) {
  // assert M % 8 == 0
  // assert N % 8 == 0
  for (int64_t io = 0; io < M / 8; io++) {
    for (int64_t jo = 0; jo < N / 8; jo++) {
      for (int64_t ii = 0; ii < 8; ii++) {
        for (int64_t ji = 0; ji < 8; ji++) {
          y[8 * io + ii] += A[(8 * io + ii) * N + 8 * jo + ji] * x[8 * jo + ji];
        }
      }
    }
  }
}

#ifndef GEMV_H
#define GEMV_H

#include <stdint.h>
#include <stdbool.h>

void gemv(int64_t M, int64_t N, float *A, float *x, float *y);

#endif  // GEMV_H

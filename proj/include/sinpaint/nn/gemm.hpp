#pragma once

#include <cstddef>

namespace sinpaint::nn {

// Row-major general matrix multiply:
//   C[m x n] = alpha * op(A) * op(B) + beta * C
// op(A) is A (m x k, leading dimension lda) or, when trans_a is set, the
// transpose of a stored k x m matrix. Same for B. The reduction order is fixed,
// so results are bit-reproducible for identical inputs.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc);

}  // namespace sinpaint::nn

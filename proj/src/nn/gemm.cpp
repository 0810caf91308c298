#include "sinpaint/nn/gemm.hpp"

#include <algorithm>
#include <vector>

namespace sinpaint::nn {

namespace {

constexpr std::size_t kMR = 12;
constexpr std::size_t kNR = 32;
constexpr std::size_t kMC = 96;
constexpr std::size_t kKC = 256;
constexpr std::size_t kNC = 2048;

template <typename T>
inline T load(const T* p, std::size_t ld, bool trans, std::size_t row, std::size_t col) {
    return trans ? p[col * ld + row] : p[row * ld + col];
}

// Packs rows [i0, i0+mc) x cols [p0, p0+kc) of op(A) into MR-row panels,
// each stored k-major: panel[kk * MR + i].
template <typename T>
void pack_a(const T* a, std::size_t lda, bool trans, std::size_t i0, std::size_t mc,
            std::size_t p0, std::size_t kc, T* out) {
    for (std::size_t ip = 0; ip < mc; ip += kMR) {
        const std::size_t rows = std::min(kMR, mc - ip);
        for (std::size_t kk = 0; kk < kc; ++kk) {
            for (std::size_t i = 0; i < rows; ++i) {
                out[kk * kMR + i] = load(a, lda, trans, i0 + ip + i, p0 + kk);
            }
            for (std::size_t i = rows; i < kMR; ++i) out[kk * kMR + i] = T(0);
        }
        out += kc * kMR;
    }
}

template <typename T>
void pack_b(const T* b, std::size_t ldb, bool trans, std::size_t p0, std::size_t kc,
            std::size_t j0, std::size_t nc, T* out) {
    for (std::size_t jp = 0; jp < nc; jp += kNR) {
        const std::size_t cols = std::min(kNR, nc - jp);
        for (std::size_t kk = 0; kk < kc; ++kk) {
            T* dst = out + kk * kNR;
            if (!trans) {
                const T* src = b + (p0 + kk) * ldb + j0 + jp;
                for (std::size_t j = 0; j < cols; ++j) dst[j] = src[j];
            } else {
                for (std::size_t j = 0; j < cols; ++j) dst[j] = b[(j0 + jp + j) * ldb + p0 + kk];
            }
            for (std::size_t j = cols; j < kNR; ++j) dst[j] = T(0);
        }
        out += kc * kNR;
    }
}

template <typename T>
struct Simd;
template <>
struct Simd<float> {
    typedef float type __attribute__((vector_size(64)));
};
template <>
struct Simd<double> {
    typedef double type __attribute__((vector_size(64)));
};
template <typename T>
using Vec = typename Simd<T>::type;

template <typename T>
void micro_kernel(std::size_t kc, const T* __restrict ap, const T* __restrict bp, T alpha,
                  T* c, std::size_t ldc, std::size_t rows, std::size_t cols) {
    constexpr std::size_t lanes = 64 / sizeof(T);
    constexpr std::size_t nv = kNR / lanes;
    Vec<T> acc[kMR][nv] = {};
    for (std::size_t kk = 0; kk < kc; ++kk) {
        Vec<T> bv[nv];
        for (std::size_t v = 0; v < nv; ++v) {
            __builtin_memcpy(&bv[v], bp + kk * kNR + v * lanes, sizeof(Vec<T>));
        }
        const T* av = ap + kk * kMR;
        for (std::size_t i = 0; i < kMR; ++i) {
            const T ai = av[i];
            for (std::size_t v = 0; v < nv; ++v) acc[i][v] += ai * bv[v];
        }
    }
    for (std::size_t i = 0; i < rows; ++i) {
        T* crow = c + i * ldc;
        for (std::size_t j = 0; j < cols; ++j) crow[j] += alpha * acc[i][j / lanes][j % lanes];
    }
}

}  // namespace

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc) {
    if (m == 0 || n == 0) return;
    for (std::size_t i = 0; i < m; ++i) {
        T* row = c + i * ldc;
        if (beta == T(0)) {
            std::fill(row, row + n, T(0));
        } else if (beta != T(1)) {
            for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
        }
    }
    if (k == 0 || alpha == T(0)) return;

    thread_local std::vector<T> a_pack;
    thread_local std::vector<T> b_pack;
    b_pack.resize(((std::min(n, kNC) + kNR - 1) / kNR) * kNR * kKC);
    a_pack.resize(((std::min(m, kMC) + kMR - 1) / kMR) * kMR * kKC);

    for (std::size_t j0 = 0; j0 < n; j0 += kNC) {
        const std::size_t nc = std::min(kNC, n - j0);
        for (std::size_t p0 = 0; p0 < k; p0 += kKC) {
            const std::size_t kc = std::min(kKC, k - p0);
            pack_b(b, ldb, trans_b, p0, kc, j0, nc, b_pack.data());
            for (std::size_t i0 = 0; i0 < m; i0 += kMC) {
                const std::size_t mc = std::min(kMC, m - i0);
                pack_a(a, lda, trans_a, i0, mc, p0, kc, a_pack.data());
                for (std::size_t jp = 0; jp < nc; jp += kNR) {
                    const T* bp = b_pack.data() + (jp / kNR) * kc * kNR;
                    const std::size_t cols = std::min(kNR, nc - jp);
                    for (std::size_t ip = 0; ip < mc; ip += kMR) {
                        const T* ap = a_pack.data() + (ip / kMR) * kc * kMR;
                        const std::size_t rows = std::min(kMR, mc - ip);
                        micro_kernel(kc, ap, bp, alpha, c + (i0 + ip) * ldc + j0 + jp, ldc, rows,
                                     cols);
                    }
                }
            }
        }
    }
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, float, const float*,
                          std::size_t, const float*, std::size_t, float, float*, std::size_t);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, double,
                           const double*, std::size_t, const double*, std::size_t, double, double*,
                           std::size_t);

}  // namespace sinpaint::nn

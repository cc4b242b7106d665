#include <immintrin.h>

#include <cmath>

#include "gemm_packed.hpp"
#include "omib/simd/dispatch.hpp"

namespace omib::simd::detail {
namespace {

// 6x8 register tile: 12 ymm accumulators, two B vectors, one broadcast.
struct MicroAvx2 {
  static constexpr std::size_t MR = 6;
  static constexpr std::size_t NR = 8;

  static void run(std::size_t kc, const double* ap, const double* bp, double alpha, double* c,
                  std::size_t ldc, std::size_t mr, std::size_t nr) {
    __m256d acc[MR][2];
    for (std::size_t r = 0; r < MR; ++r) {
      acc[r][0] = _mm256_setzero_pd();
      acc[r][1] = _mm256_setzero_pd();
    }
    for (std::size_t p = 0; p < kc; ++p) {
      const __m256d b0 = _mm256_loadu_pd(bp);
      const __m256d b1 = _mm256_loadu_pd(bp + 4);
#pragma GCC unroll 6
      for (std::size_t r = 0; r < MR; ++r) {
        const __m256d av = _mm256_broadcast_sd(ap + r);
        acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
        acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
      }
      ap += MR;
      bp += NR;
    }
    const __m256d va = _mm256_set1_pd(alpha);
    if (mr == MR && nr == NR) {
      for (std::size_t r = 0; r < MR; ++r) {
        double* row = c + r * ldc;
        _mm256_storeu_pd(row, _mm256_fmadd_pd(va, acc[r][0], _mm256_loadu_pd(row)));
        _mm256_storeu_pd(row + 4, _mm256_fmadd_pd(va, acc[r][1], _mm256_loadu_pd(row + 4)));
      }
      return;
    }
    alignas(32) double tile[MR][NR];
    for (std::size_t r = 0; r < MR; ++r) {
      _mm256_store_pd(tile[r], _mm256_mul_pd(va, acc[r][0]));
      _mm256_store_pd(tile[r] + 4, _mm256_mul_pd(va, acc[r][1]));
    }
    for (std::size_t r = 0; r < mr; ++r) {
      for (std::size_t j = 0; j < nr; ++j) c[r * ldc + j] += tile[r][j];
    }
  }
};

void gemm_avx2(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
               double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
               double beta, double* c, std::size_t ldc) {
  gemm_packed<MicroAvx2>(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, _mm256_add_pd(s0, s1));
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void adam_avx2(std::size_t n, double* param, const double* grad, double* m, double* v,
               const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d one_b1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d one_b2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d wd = _mm256_set1_pd(c.weight_decay);
  const __m256d inv_c1 = _mm256_set1_pd(1.0 / c.bias_correction1);
  const __m256d inv_c2 = _mm256_set1_pd(1.0 / c.bias_correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_loadu_pd(param + i);
    const __m256d g = _mm256_fmadd_pd(wd, p, _mm256_loadu_pd(grad + i));
    const __m256d mi = _mm256_fmadd_pd(b1, _mm256_loadu_pd(m + i), _mm256_mul_pd(one_b1, g));
    const __m256d vi =
        _mm256_fmadd_pd(b2, _mm256_loadu_pd(v + i), _mm256_mul_pd(one_b2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(_mm256_mul_pd(vi, inv_c2)), eps);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, _mm256_mul_pd(mi, inv_c1)), denom);
    _mm256_storeu_pd(param + i, _mm256_sub_pd(p, step));
  }
  for (; i < n; ++i) {
    const double g = grad[i] + c.weight_decay * param[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
    param[i] -= c.lr * (m[i] / c.bias_correction1) /
                (std::sqrt(v[i] / c.bias_correction2) + c.eps);
  }
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Isa::avx2, gemm_avx2, axpy_avx2, dot_avx2, adam_avx2};
  return table;
}

}  // namespace omib::simd::detail

#include <immintrin.h>

#include <cmath>

#include "gemm_packed.hpp"
#include "omib/simd/dispatch.hpp"

namespace omib::simd::detail {
namespace {

// 12x16 register tile: 24 zmm accumulators, two B vectors, one broadcast.
struct MicroAvx512 {
  static constexpr std::size_t MR = 12;
  static constexpr std::size_t NR = 16;

  static void run(std::size_t kc, const double* ap, const double* bp, double alpha, double* c,
                  std::size_t ldc, std::size_t mr, std::size_t nr) {
    __m512d acc[MR][2];
    for (std::size_t r = 0; r < MR; ++r) {
      acc[r][0] = _mm512_setzero_pd();
      acc[r][1] = _mm512_setzero_pd();
    }
    for (std::size_t p = 0; p < kc; ++p) {
      const __m512d b0 = _mm512_loadu_pd(bp);
      const __m512d b1 = _mm512_loadu_pd(bp + 8);
#pragma GCC unroll 12
      for (std::size_t r = 0; r < MR; ++r) {
        const __m512d av = _mm512_set1_pd(ap[r]);
        acc[r][0] = _mm512_fmadd_pd(av, b0, acc[r][0]);
        acc[r][1] = _mm512_fmadd_pd(av, b1, acc[r][1]);
      }
      ap += MR;
      bp += NR;
    }
    const __m512d va = _mm512_set1_pd(alpha);
    if (mr == MR && nr == NR) {
      for (std::size_t r = 0; r < MR; ++r) {
        double* row = c + r * ldc;
        _mm512_storeu_pd(row, _mm512_fmadd_pd(va, acc[r][0], _mm512_loadu_pd(row)));
        _mm512_storeu_pd(row + 8, _mm512_fmadd_pd(va, acc[r][1], _mm512_loadu_pd(row + 8)));
      }
      return;
    }
    alignas(64) double tile[MR][NR];
    for (std::size_t r = 0; r < MR; ++r) {
      _mm512_store_pd(tile[r], _mm512_mul_pd(va, acc[r][0]));
      _mm512_store_pd(tile[r] + 8, _mm512_mul_pd(va, acc[r][1]));
    }
    for (std::size_t r = 0; r < mr; ++r) {
      for (std::size_t j = 0; j < nr; ++j) c[r * ldc + j] += tile[r][j];
    }
  }
};

void gemm_avx512(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
                 double beta, double* c, std::size_t ldc) {
  gemm_packed<MicroAvx512>(trans_a, trans_b, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
}

void axpy_avx512(std::size_t n, double alpha, const double* x, double* y) {
  const __m512d va = _mm512_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm512_storeu_pd(y + i, _mm512_fmadd_pd(va, _mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i)));
  }
  if (i < n) {
    const __mmask8 tail = static_cast<__mmask8>((1u << (n - i)) - 1u);
    const __m512d xv = _mm512_maskz_loadu_pd(tail, x + i);
    const __m512d yv = _mm512_maskz_loadu_pd(tail, y + i);
    _mm512_mask_storeu_pd(y + i, tail, _mm512_fmadd_pd(va, xv, yv));
  }
}

double dot_avx512(std::size_t n, const double* x, const double* y) {
  __m512d s0 = _mm512_setzero_pd();
  __m512d s1 = _mm512_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s0 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i), _mm512_loadu_pd(y + i), s0);
    s1 = _mm512_fmadd_pd(_mm512_loadu_pd(x + i + 8), _mm512_loadu_pd(y + i + 8), s1);
  }
  double s = _mm512_reduce_add_pd(_mm512_add_pd(s0, s1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void adam_avx512(std::size_t n, double* param, const double* grad, double* m, double* v,
                 const AdamCoeffs& c) {
  const __m512d b1 = _mm512_set1_pd(c.beta1);
  const __m512d b2 = _mm512_set1_pd(c.beta2);
  const __m512d one_b1 = _mm512_set1_pd(1.0 - c.beta1);
  const __m512d one_b2 = _mm512_set1_pd(1.0 - c.beta2);
  const __m512d wd = _mm512_set1_pd(c.weight_decay);
  const __m512d inv_c1 = _mm512_set1_pd(1.0 / c.bias_correction1);
  const __m512d inv_c2 = _mm512_set1_pd(1.0 / c.bias_correction2);
  const __m512d lr = _mm512_set1_pd(c.lr);
  const __m512d eps = _mm512_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m512d p = _mm512_loadu_pd(param + i);
    const __m512d g = _mm512_fmadd_pd(wd, p, _mm512_loadu_pd(grad + i));
    const __m512d mi = _mm512_fmadd_pd(b1, _mm512_loadu_pd(m + i), _mm512_mul_pd(one_b1, g));
    const __m512d vi =
        _mm512_fmadd_pd(b2, _mm512_loadu_pd(v + i), _mm512_mul_pd(one_b2, _mm512_mul_pd(g, g)));
    _mm512_storeu_pd(m + i, mi);
    _mm512_storeu_pd(v + i, vi);
    const __m512d denom = _mm512_add_pd(_mm512_sqrt_pd(_mm512_mul_pd(vi, inv_c2)), eps);
    const __m512d step = _mm512_div_pd(_mm512_mul_pd(lr, _mm512_mul_pd(mi, inv_c1)), denom);
    _mm512_storeu_pd(param + i, _mm512_sub_pd(p, step));
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

const KernelTable& avx512_table() {
  static const KernelTable table{Isa::avx512, gemm_avx512, axpy_avx512, dot_avx512, adam_avx512};
  return table;
}

}  // namespace omib::simd::detail

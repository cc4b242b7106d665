#pragma once

// Cache-blocked GEMM driver shared by the SIMD translation units. Panels of
// op(A) and op(B) are packed into contiguous MR-row / NR-column slivers (zero
// padded at the edges) so the micro-kernel streams both operands linearly
// regardless of transposition.
//
// Include only from a kernel TU: everything here lives in an anonymous
// namespace so each ISA gets its own instantiation compiled with its own flags.

#include <algorithm>
#include <cstddef>
#include <vector>

namespace omib::simd::detail {
namespace {

constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 132;  // multiple of every MR; holds a 128-row batch
constexpr std::size_t kNc = 3072;

inline void scale_c(std::size_t m, std::size_t n, double beta, double* c, std::size_t ldc) {
  if (beta == 1.0) return;
  for (std::size_t i = 0; i < m; ++i) {
    double* row = c + i * ldc;
    if (beta == 0.0) {
      std::fill(row, row + n, 0.0);
    } else {
      for (std::size_t j = 0; j < n; ++j) row[j] *= beta;
    }
  }
}

template <std::size_t MR>
void pack_a(bool trans, const double* a, std::size_t lda, std::size_t i0, std::size_t mc,
            std::size_t p0, std::size_t kc, double* dst) {
  for (std::size_t s = 0; s < mc; s += MR) {
    const std::size_t rows = std::min(MR, mc - s);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < MR; ++r) {
        double value = 0.0;
        if (r < rows) {
          const std::size_t i = i0 + s + r;
          const std::size_t q = p0 + p;
          value = trans ? a[q * lda + i] : a[i * lda + q];
        }
        *dst++ = value;
      }
    }
  }
}

template <std::size_t NR>
void pack_b(bool trans, const double* b, std::size_t ldb, std::size_t p0, std::size_t kc,
            std::size_t j0, std::size_t nc, double* dst) {
  for (std::size_t s = 0; s < nc; s += NR) {
    const std::size_t cols = std::min(NR, nc - s);
    for (std::size_t p = 0; p < kc; ++p) {
      const std::size_t q = p0 + p;
      if (!trans && cols == NR) {
        const double* src = b + q * ldb + j0 + s;
        std::copy(src, src + NR, dst);
        dst += NR;
        continue;
      }
      for (std::size_t j = 0; j < NR; ++j) {
        double value = 0.0;
        if (j < cols) {
          const std::size_t col = j0 + s + j;
          value = trans ? b[col * ldb + q] : b[q * ldb + col];
        }
        *dst++ = value;
      }
    }
  }
}

template <class Micro>
void gemm_packed(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
                 double alpha, const double* a, std::size_t lda, const double* b,
                 std::size_t ldb, double beta, double* c, std::size_t ldc) {
  constexpr std::size_t MR = Micro::MR;
  constexpr std::size_t NR = Micro::NR;

  scale_c(m, n, beta, c, ldc);
  if (alpha == 0.0 || k == 0 || m == 0 || n == 0) return;

  thread_local std::vector<double> apack;
  thread_local std::vector<double> bpack;

  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = std::min(kNc, n - jc);
    const std::size_t nc_padded = (nc + NR - 1) / NR * NR;
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      bpack.resize(nc_padded * kc);
      pack_b<NR>(trans_b, b, ldb, pc, kc, jc, nc, bpack.data());
      for (std::size_t ic = 0; ic < m; ic += kMc) {
        const std::size_t mc = std::min(kMc, m - ic);
        const std::size_t mc_padded = (mc + MR - 1) / MR * MR;
        apack.resize(mc_padded * kc);
        pack_a<MR>(trans_a, a, lda, ic, mc, pc, kc, apack.data());
        for (std::size_t jr = 0; jr < nc; jr += NR) {
          const std::size_t nr = std::min(NR, nc - jr);
          const double* bp = bpack.data() + jr * kc;
          for (std::size_t ir = 0; ir < mc; ir += MR) {
            const std::size_t mr = std::min(MR, mc - ir);
            Micro::run(kc, apack.data() + ir * kc, bp, alpha, c + (ic + ir) * ldc + jc + jr, ldc,
                       mr, nr);
          }
        }
      }
    }
  }
}

}  // namespace
}  // namespace omib::simd::detail

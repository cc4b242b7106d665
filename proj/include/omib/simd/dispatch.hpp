#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace omib::simd {

/// Instruction-set variants of the arithmetic kernels. `scalar` is the
/// portable reference every other variant is tested against.
enum class Isa { scalar, avx2, avx512 };

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double weight_decay;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

/// Row-major dense kernels. `gemm` computes
///   C = alpha * op(A) * op(B) + beta * C
/// where op(A) is m x k and op(B) is k x n. With `trans_a` the buffer `a`
/// holds a k x m matrix (leading dimension lda), likewise for `b`.
struct KernelTable {
  Isa isa;
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
               std::size_t k, double alpha, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, double beta, double* c,
               std::size_t ldc);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  double (*dot)(std::size_t n, const double* x, const double* y);
  // In-place bias-corrected Adam update of one parameter buffer.
  void (*adam)(std::size_t n, double* param, const double* grad, double* m,
               double* v, const AdamCoeffs& coeffs);
};

bool isa_supported(Isa isa);
Isa best_isa();

/// The active table. Chosen on first use: the `OMIB_ISA` environment
/// variable if set (scalar|avx2|avx512), otherwise the best supported ISA.
const KernelTable& kernels();

/// Table for a specific ISA; throws std::invalid_argument when the host
/// cannot run it.
const KernelTable& kernels_for(Isa isa);

void set_active_isa(Isa isa);
Isa active_isa();

std::string_view isa_name(Isa isa);
std::optional<Isa> parse_isa(std::string_view name);

namespace detail {
const KernelTable& scalar_table();
#if defined(OMIB_HAVE_X86_KERNELS)
const KernelTable& avx2_table();
const KernelTable& avx512_table();
#endif
}  // namespace detail

}  // namespace omib::simd

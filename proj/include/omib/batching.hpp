#pragma once

#include <span>

#include "omib/synth.hpp"
#include "omib/tensor.hpp"

namespace omib {

/// Selected rows of a dataset matrix as a constant tensor.
Tensor gather_batch(const Matrix& m, std::span<const std::size_t> rows);
Tensor to_tensor(const Matrix& m);
Matrix to_matrix(const Tensor& t);

/// Contiguous batches of a permutation; the last one may be short.
std::vector<std::span<const std::size_t>> batches_of(std::span<const std::size_t> order,
                                                     std::size_t batch_size);

}  // namespace omib

#include "omib/batching.hpp"

#include <algorithm>

namespace omib {

Tensor gather_batch(const Matrix& m, std::span<const std::size_t> rows) {
  std::vector<double> values(rows.size() * m.cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::span<const double> src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), values.begin() + static_cast<std::ptrdiff_t>(i * m.cols));
  }
  return Tensor::from({rows.size(), m.cols}, std::move(values));
}

Tensor to_tensor(const Matrix& m) { return Tensor::from({m.rows, m.cols}, m.values); }

Matrix to_matrix(const Tensor& t) {
  Matrix m(t.rows(), t.cols());
  std::span<const double> v = t.values();
  std::copy(v.begin(), v.end(), m.values.begin());
  return m;
}

std::vector<std::span<const std::size_t>> batches_of(std::span<const std::size_t> order,
                                                     std::size_t batch_size) {
  std::vector<std::span<const std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    out.push_back(order.subspan(start, std::min(batch_size, order.size() - start)));
  }
  return out;
}

}  // namespace omib

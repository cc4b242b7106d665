#include "omib/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "omib/simd/dispatch.hpp"

namespace omib {
namespace {

using detail::Node;

struct Dims {
  std::size_t r;
  std::size_t c;
};

Dims dims_of(const Shape& s) {
  if (s.empty()) return {1, 1};
  if (s.size() == 1) return {1, s[0]};
  return {s[0], s[1]};
}

int axis_2d(const Shape& s, int axis, const char* op) {
  if (s.size() == 2) {
    if (axis == 0 || axis == 1) return axis;
    if (axis == -1) return 1;
  } else if (s.size() == 1) {
    if (axis == 0 || axis == -1) return 1;
  }
  throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for shape " +
                   shape_str(s));
}

Shape shape_from_dims(Dims d, std::size_t rank) {
  if (rank == 0) return {};
  if (rank == 1) return {d.c};
  return {d.r, d.c};
}

void accumulate(Node& parent, std::span<const double> g) {
  if (!parent.requires_grad) return;
  auto& dst = parent.ensure_grad();
  simd::kernels().axpy(g.size(), 1.0, g.data(), dst.data());
}

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

// Sums a broadcast gradient of dims `out` back down to operand dims `in`.
std::vector<double> reduce_to(std::span<const double> g, Dims out, Dims in) {
  if (out.r == in.r && out.c == in.c) return {g.begin(), g.end()};
  std::vector<double> red(in.r * in.c, 0.0);
  for (std::size_t i = 0; i < out.r; ++i) {
    const std::size_t ii = in.r == 1 ? 0 : i;
    for (std::size_t j = 0; j < out.c; ++j) {
      const std::size_t jj = in.c == 1 ? 0 : j;
      red[ii * in.c + jj] += g[i * out.c + j];
    }
  }
  return red;
}

std::vector<double> expand(std::span<const double> v, Dims in, Dims out) {
  if (out.r == in.r && out.c == in.c) return {v.begin(), v.end()};
  std::vector<double> res(out.r * out.c);
  for (std::size_t i = 0; i < out.r; ++i) {
    const std::size_t ii = in.r == 1 ? 0 : i;
    for (std::size_t j = 0; j < out.c; ++j) {
      res[i * out.c + j] = v[ii * in.c + (in.c == 1 ? 0 : j)];
    }
  }
  return res;
}

struct Broadcast {
  Dims out;
  Dims a;
  Dims b;
  Shape shape;
};

Broadcast broadcast_dims(const char* op, const Shape& sa, const Shape& sb) {
  const Dims a = dims_of(sa);
  const Dims b = dims_of(sb);
  auto fit = [&](std::size_t x, std::size_t y) -> std::size_t {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(sa) + " with " +
                     shape_str(sb));
  };
  Dims out{fit(a.r, b.r), fit(a.c, b.c)};
  return {out, a, b, shape_from_dims(out, std::max(sa.size(), sb.size()))};
}

enum class BinaryKind { add, sub, mul };

Tensor binary(const char* op, BinaryKind kind, const Tensor& x, const Tensor& y) {
  Broadcast bc = broadcast_dims(op, x.shape(), y.shape());
  std::vector<double> av = expand(x.values(), bc.a, bc.out);
  std::vector<double> bv = expand(y.values(), bc.b, bc.out);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    switch (kind) {
      case BinaryKind::add:
        out[i] = av[i] + bv[i];
        break;
      case BinaryKind::sub:
        out[i] = av[i] - bv[i];
        break;
      case BinaryKind::mul:
        out[i] = av[i] * bv[i];
        break;
    }
  }
  return detail::make_result(op, bc.shape, std::move(out), {x, y}, [bc, kind](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const std::vector<double>& g = self.grad;
    if (pa.requires_grad) {
      if (kind == BinaryKind::mul) {
        std::vector<double> bv = expand(pb.value, bc.b, bc.out);
        for (std::size_t i = 0; i < bv.size(); ++i) bv[i] *= g[i];
        accumulate(pa, reduce_to(bv, bc.out, bc.a));
      } else {
        accumulate(pa, reduce_to(g, bc.out, bc.a));
      }
    }
    if (pb.requires_grad) {
      if (kind == BinaryKind::mul) {
        std::vector<double> av = expand(pa.value, bc.a, bc.out);
        for (std::size_t i = 0; i < av.size(); ++i) av[i] *= g[i];
        accumulate(pb, reduce_to(av, bc.out, bc.b));
      } else if (kind == BinaryKind::sub) {
        std::vector<double> neg = reduce_to(g, bc.out, bc.b);
        for (double& v : neg) v = -v;
        accumulate(pb, neg);
      } else {
        accumulate(pb, reduce_to(g, bc.out, bc.b));
      }
    }
  });
}

// Elementwise map with derivative expressed through input x and output y.
template <class F, class D>
Tensor unary(const char* op, const Tensor& x, F f, D deriv) {
  std::span<const double> xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  return detail::make_result(op, x.shape(), std::move(out), {x}, [deriv](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& dx = px.ensure_grad();
    for (std::size_t i = 0; i < dx.size(); ++i) {
      dx[i] += self.grad[i] * deriv(px.value[i], self.value[i]);
    }
  });
}

// Visits the 1-D lines of a matrix along `axis2d`: (start, stride, length).
template <class Fn>
void for_each_line(Dims d, int axis2d, Fn fn) {
  if (axis2d == 1) {
    for (std::size_t i = 0; i < d.r; ++i) fn(i * d.c, std::size_t{1}, d.c);
  } else {
    for (std::size_t j = 0; j < d.c; ++j) fn(j, d.c, d.r);
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n);
  simd::kernels().gemm(false, false, m, n, k, 1.0, a.values().data(), k, b.values().data(), n,
                       0.0, out.data(), n);
  return detail::make_result("matmul", {m, n}, std::move(out), {a, b}, [m, n, k](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    const auto& gemm = simd::kernels().gemm;
    if (pa.requires_grad) {
      gemm(false, true, m, k, n, 1.0, self.grad.data(), n, pb.value.data(), n, 1.0,
           pa.ensure_grad().data(), k);
    }
    if (pb.requires_grad) {
      gemm(true, false, k, n, m, 1.0, pa.value.data(), k, self.grad.data(), n, 1.0,
           pb.ensure_grad().data(), n);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[0] ||
      bias.numel() != w.shape()[1]) {
    throw ShapeError("linear: incompatible shapes x=" + shape_str(x.shape()) + " w=" +
                     shape_str(w.shape()) + " bias=" + shape_str(bias.shape()));
  }
  const std::size_t m = x.shape()[0], k = x.shape()[1], n = w.shape()[1];
  std::vector<double> out(m * n);
  std::span<const double> bv = bias.values();
  for (std::size_t i = 0; i < m; ++i) std::copy(bv.begin(), bv.end(), out.begin() + i * n);
  simd::kernels().gemm(false, false, m, n, k, 1.0, x.values().data(), k, w.values().data(), n,
                       1.0, out.data(), n);
  return detail::make_result(
      "linear", {m, n}, std::move(out), {x, w, bias}, [m, n, k](Node& self) {
        Node& px = parent(self, 0);
        Node& pw = parent(self, 1);
        Node& pb = parent(self, 2);
        const auto& gemm = simd::kernels().gemm;
        if (px.requires_grad) {
          gemm(false, true, m, k, n, 1.0, self.grad.data(), n, pw.value.data(), n, 1.0,
               px.ensure_grad().data(), k);
        }
        if (pw.requires_grad) {
          gemm(true, false, k, n, m, 1.0, px.value.data(), k, self.grad.data(), n, 1.0,
               pw.ensure_grad().data(), n);
        }
        if (pb.requires_grad) {
          auto& db = pb.ensure_grad();
          const auto& axpy = simd::kernels().axpy;
          for (std::size_t i = 0; i < m; ++i) axpy(n, 1.0, self.grad.data() + i * n, db.data());
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", BinaryKind::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", BinaryKind::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", BinaryKind::mul, a, b); }

Tensor broadcast_to(const Tensor& x, const Shape& shape) {
  const Dims in = dims_of(x.shape());
  const Dims out = dims_of(shape);
  if (shape.size() > 2 || (in.r != out.r && in.r != 1) || (in.c != out.c && in.c != 1)) {
    throw ShapeError("broadcast: cannot broadcast " + shape_str(x.shape()) + " to " +
                     shape_str(shape));
  }
  return detail::make_result("broadcast", shape, expand(x.values(), in, out), {x},
                             [in, out](Node& self) {
                               accumulate(parent(self, 0), reduce_to(self.grad, out, in));
                             });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary(
      "add_scalar", x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor concat(std::span<const Tensor> parts, int axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& s0 = parts[0].shape();
  const int ax = axis_2d(s0, axis, "concat");
  std::vector<Dims> dims;
  Dims out = dims_of(s0);
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    const Dims d = dims_of(s);
    if (s.size() != s0.size() || (ax == 1 && d.r != out.r) || (ax == 0 && d.c != out.c)) {
      throw ShapeError("concat: shape " + shape_str(s) + " incompatible with " + shape_str(s0) +
                       " along axis " + std::to_string(axis));
    }
    dims.push_back(d);
    if (p > 0) (ax == 1 ? out.c : out.r) += (ax == 1 ? d.c : d.r);
  }
  std::vector<double> value(out.r * out.c);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    std::span<const double> v = parts[p].values();
    const Dims d = dims[p];
    if (ax == 0) {
      std::copy(v.begin(), v.end(), value.begin() + offset * out.c);
      offset += d.r;
    } else {
      for (std::size_t i = 0; i < d.r; ++i) {
        std::copy(v.begin() + i * d.c, v.begin() + (i + 1) * d.c,
                  value.begin() + i * out.c + offset);
      }
      offset += d.c;
    }
  }
  Shape shape = shape_from_dims(out, s0.size());
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return detail::make_result("concat", std::move(shape), std::move(value), std::move(parents),
                             [dims, out, ax](Node& self) {
                               std::size_t off = 0;
                               for (std::size_t p = 0; p < dims.size(); ++p) {
                                 Node& pp = parent(self, p);
                                 const Dims d = dims[p];
                                 if (pp.requires_grad) {
                                   auto& g = pp.ensure_grad();
                                   for (std::size_t i = 0; i < d.r; ++i) {
                                     for (std::size_t j = 0; j < d.c; ++j) {
                                       const std::size_t src = ax == 0
                                                                   ? (off + i) * out.c + j
                                                                   : i * out.c + off + j;
                                       g[i * d.c + j] += self.grad[src];
                                     }
                                   }
                                 }
                                 off += ax == 0 ? d.r : d.c;
                               }
                             });
}

Tensor concat(std::initializer_list<Tensor> parts, int axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor slice(const Tensor& x, int axis, std::size_t begin, std::size_t end) {
  const int ax = axis_2d(x.shape(), axis, "slice");
  const Dims d = dims_of(x.shape());
  const std::size_t extent = ax == 0 ? d.r : d.c;
  if (begin >= end || end > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for shape " + shape_str(x.shape()));
  }
  Dims out = d;
  (ax == 0 ? out.r : out.c) = end - begin;
  std::span<const double> v = x.values();
  std::vector<double> value(out.r * out.c);
  for (std::size_t i = 0; i < out.r; ++i) {
    for (std::size_t j = 0; j < out.c; ++j) {
      const std::size_t si = ax == 0 ? i + begin : i;
      const std::size_t sj = ax == 1 ? j + begin : j;
      value[i * out.c + j] = v[si * d.c + sj];
    }
  }
  return detail::make_result("slice", shape_from_dims(out, x.rank()), std::move(value), {x},
                             [d, out, ax, begin](Node& self) {
                               Node& px = parent(self, 0);
                               if (!px.requires_grad) return;
                               auto& g = px.ensure_grad();
                               for (std::size_t i = 0; i < out.r; ++i) {
                                 for (std::size_t j = 0; j < out.c; ++j) {
                                   const std::size_t si = ax == 0 ? i + begin : i;
                                   const std::size_t sj = ax == 1 ? j + begin : j;
                                   g[si * d.c + sj] += self.grad[i * out.c + j];
                                 }
                               }
                             });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel() || shape.size() > 2) {
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  std::span<const double> v = x.values();
  return detail::make_result("reshape", std::move(shape), {v.begin(), v.end()}, {x},
                             [](Node& self) { accumulate(parent(self, 0), self.grad); });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose: needs rank 2, got " + shape_str(x.shape()));
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  std::span<const double> v = x.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  return detail::make_result("transpose", {c, r}, std::move(out), {x}, [r, c](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) g[i * c + j] += self.grad[j * r + i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  if (x.rank() != 2) throw ShapeError("gather_rows: needs rank 2, got " + shape_str(x.shape()));
  const std::size_t r = x.shape()[0], c = x.shape()[1];
  if (index.empty()) throw ShapeError("gather_rows: empty index");
  std::span<const double> v = x.values();
  std::vector<double> out(index.size() * c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= r) {
      throw ShapeError("gather_rows: row " + std::to_string(index[i]) + " out of range for " +
                       shape_str(x.shape()));
    }
    std::copy(v.begin() + index[i] * c, v.begin() + (index[i] + 1) * c, out.begin() + i * c);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return detail::make_result("gather_rows", {idx.size(), c}, std::move(out), {x},
                             [idx, c](Node& self) {
                               Node& px = parent(self, 0);
                               if (!px.requires_grad) return;
                               auto& g = px.ensure_grad();
                               for (std::size_t i = 0; i < idx.size(); ++i) {
                                 for (std::size_t j = 0; j < c; ++j) {
                                   g[idx[i] * c + j] += self.grad[i * c + j];
                                 }
                               }
                             });
}

Tensor pick(const Tensor& x, std::span<const std::size_t> index) {
  if (x.rank() != 2 || index.size() != x.shape()[0]) {
    throw ShapeError("pick: shape " + shape_str(x.shape()) + " with " +
                     std::to_string(index.size()) + " indices");
  }
  const std::size_t c = x.shape()[1];
  std::vector<double> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= c) {
      throw ShapeError("pick: index " + std::to_string(index[i]) + " out of range for " +
                       shape_str(x.shape()));
    }
    out[i] = x.values()[i * c + index[i]];
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return detail::make_result("pick", {idx.size()}, std::move(out), {x}, [idx, c](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) g[i * c + idx[i]] += self.grad[i];
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      "leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
      [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor gelu(const Tensor& x) {
  constexpr double kC = 0.044715;
  const double k = std::sqrt(2.0 / std::numbers::pi);
  std::span<const double> xv = x.values();
  std::vector<double> out(xv.size());
  auto t = std::make_shared<std::vector<double>>(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = xv[i];
    (*t)[i] = std::tanh(k * (v + kC * v * v * v));
    out[i] = 0.5 * v * (1.0 + (*t)[i]);
  }
  return detail::make_result("gelu", x.shape(), std::move(out), {x}, [k, t](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& dx = px.ensure_grad();
    const std::vector<double>& tv = *t;
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double v = px.value[i];
      const double d = 0.5 * (1.0 + tv[i]) + 0.5 * v * (1.0 - tv[i] * tv[i]) * k * (1.0 + 3.0 * kC * v * v);
      dx[i] += self.grad[i] * d;
    }
  });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      "log", x, [](double v) { return std::log(std::max(v, kLogClamp)); },
      [](double v, double) { return v > kLogClamp ? 1.0 / v : 0.0; });
}

Tensor softmax(const Tensor& x, int axis) {
  const int ax = axis_2d(x.shape(), axis, "softmax");
  const Dims d = dims_of(x.shape());
  std::span<const double> v = x.values();
  std::vector<double> out(v.size());
  for_each_line(d, ax, [&](std::size_t start, std::size_t stride, std::size_t len) {
    double mx = v[start];
    for (std::size_t t = 1; t < len; ++t) mx = std::max(mx, v[start + t * stride]);
    double total = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double e = std::exp(v[start + t * stride] - mx);
      out[start + t * stride] = e;
      total += e;
    }
    for (std::size_t t = 0; t < len; ++t) out[start + t * stride] /= total;
  });
  return detail::make_result("softmax", x.shape(), std::move(out), {x}, [d, ax](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for_each_line(d, ax, [&](std::size_t start, std::size_t stride, std::size_t len) {
      double inner = 0.0;
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t q = start + t * stride;
        inner += self.grad[q] * self.value[q];
      }
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t q = start + t * stride;
        g[q] += self.value[q] * (self.grad[q] - inner);
      }
    });
  });
}

Tensor log_softmax(const Tensor& x, int axis) {
  const int ax = axis_2d(x.shape(), axis, "log_softmax");
  const Dims d = dims_of(x.shape());
  std::span<const double> v = x.values();
  std::vector<double> out(v.size());
  for_each_line(d, ax, [&](std::size_t start, std::size_t stride, std::size_t len) {
    double mx = v[start];
    for (std::size_t t = 1; t < len; ++t) mx = std::max(mx, v[start + t * stride]);
    double total = 0.0;
    for (std::size_t t = 0; t < len; ++t) total += std::exp(v[start + t * stride] - mx);
    const double lse = mx + std::log(total);
    for (std::size_t t = 0; t < len; ++t) out[start + t * stride] = v[start + t * stride] - lse;
  });
  return detail::make_result("log_softmax", x.shape(), std::move(out), {x}, [d, ax](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for_each_line(d, ax, [&](std::size_t start, std::size_t stride, std::size_t len) {
      double gsum = 0.0;
      for (std::size_t t = 0; t < len; ++t) gsum += self.grad[start + t * stride];
      for (std::size_t t = 0; t < len; ++t) {
        const std::size_t q = start + t * stride;
        g[q] += self.grad[q] - std::exp(self.value[q]) * gsum;
      }
    });
  });
}

Tensor sum(const Tensor& x, int axis) {
  const int ax = axis_2d(x.shape(), axis, "sum");
  const Dims d = dims_of(x.shape());
  std::span<const double> v = x.values();
  Dims od = ax == 1 ? Dims{d.r, 1} : Dims{1, d.c};
  std::vector<double> out(od.r * od.c, 0.0);
  std::size_t line = 0;
  for_each_line(d, ax, [&](std::size_t start, std::size_t stride, std::size_t len) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += v[start + t * stride];
    out[line++] = s;
  });
  Shape shape = x.rank() == 2 ? Shape{od.r, od.c} : Shape{};
  return detail::make_result("sum", std::move(shape), std::move(out), {x}, [d, ax](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    std::size_t line = 0;
    for_each_line(d, ax, [&](std::size_t start, std::size_t stride, std::size_t len) {
      const double gl = self.grad[line++];
      for (std::size_t t = 0; t < len; ++t) g[start + t * stride] += gl;
    });
  });
}

Tensor mean(const Tensor& x, int axis) {
  const int ax = axis_2d(x.shape(), axis, "mean");
  const Dims d = dims_of(x.shape());
  return scale(sum(x, axis), 1.0 / static_cast<double>(ax == 1 ? d.c : d.r));
}

Tensor sum_all(const Tensor& x) {
  std::span<const double> v = x.values();
  double s = 0.0;
  for (double e : v) s += e;
  return detail::make_result("sum_all", {}, {s}, {x}, [](Node& self) {
    Node& px = parent(self, 0);
    if (!px.requires_grad) return;
    auto& g = px.ensure_grad();
    for (double& e : g) e += self.grad[0];
  });
}

Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace omib

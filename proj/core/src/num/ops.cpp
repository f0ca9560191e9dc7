#include "topolidar/num/ops.hpp"

#include <algorithm>
#include <cmath>

#include "topolidar/common/error.hpp"

namespace topolidar::num {

using detail::make_result;
using detail::Node;

namespace {

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Result shape for a trailing-suffix broadcast, or ShapeError.
const Shape& broadcast_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.numel() >= b.numel() && is_suffix(b.shape(), a.shape())) return a.shape();
  if (is_suffix(a.shape(), b.shape())) return b.shape();
  if (b.numel() == 1 && a.numel() >= 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a.shape()) + " with " +
                   to_string(b.shape()));
}

template <class Fwd, class Da, class Db>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd f, Da da, Db db) {
  Shape shape = broadcast_shape(op, a, b);
  const std::size_t n = numel_of(shape);
  const std::size_t na = a.numel(), nb = b.numel();
  auto ad = a.data();
  auto bd = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f(ad[i % na], bd[i % nb]);
  return make_result(op, std::move(shape), std::move(out), {a, b}, [n, na, nb, da, db](Node& self) {
    Node& A = *self.inputs[0];
    Node& B = *self.inputs[1];
    for (std::size_t i = 0; i < n; ++i) {
      const double g = self.grad[i];
      const double x = A.data[i % na], y = B.data[i % nb];
      if (A.requires_grad) A.grad[i % na] += g * da(x, y);
      if (B.requires_grad) B.grad[i % nb] += g * db(x, y);
    }
  });
}

template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& a, Fwd f, Deriv d) {
  auto ad = a.data();
  std::vector<double> out(ad.size());
  for (std::size_t i = 0; i < ad.size(); ++i) out[i] = f(ad[i]);
  return make_result(op, a.shape(), std::move(out), {a}, [d](Node& self) {
    Node& A = *self.inputs[0];
    for (std::size_t i = 0; i < A.data.size(); ++i) A.grad[i] += self.grad[i] * d(A.data[i], self.data[i]);
  });
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     to_string(t.shape()));
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const char* op, const Shape& s, std::size_t axis) {
  if (axis >= s.size())
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + to_string(s));
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

Shape drop_axis(const Shape& s, std::size_t axis) {
  Shape out;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out.push_back(s[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

Tensor neg(const Tensor& a) { return mul_scalar(a, -1.0); }

Tensor square(const Tensor& a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
  return unary(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions differ, " + to_string(a.shape()) + " x " + to_string(b.shape()));
  auto A = a.data();
  auto B = b.data();
  std::vector<double> C(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = B.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return make_result("matmul", {m, n}, std::move(C), {a, b}, [m, k, n](Node& self) {
    Node& NA = *self.inputs[0];
    Node& NB = *self.inputs[1];
    const double* G = self.grad.data();
    if (NA.requires_grad) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = NB.data.data() + p * n;
          const double* grow = G + i * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          NA.grad[i * k + p] += acc;
        }
    }
    if (NB.requires_grad) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = NA.data[i * k + p];
          const double* grow = G + i * n;
          double* gb = NB.grad.data() + p * n;
          for (std::size_t j = 0; j < n; ++j) gb[j] += av * grow[j];
        }
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.dim(0), c = a.dim(1);
  auto A = a.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = A[i * c + j];
  return make_result("transpose", {c, r}, std::move(out), {a}, [r, c](Node& self) {
    Node& NA = *self.inputs[0];
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) NA.grad[i * c + j] += self.grad[j * r + i];
  });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  return b.defined() ? add(y, b) : y;
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_result("sum", {}, {s}, {a}, [](Node& self) {
    Node& A = *self.inputs[0];
    const double g = self.grad[0];
    for (double& x : A.grad) x += g;
  });
}

Tensor mean(const Tensor& a) { return mul_scalar(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor sum(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis("sum", a.shape(), axis);
  auto A = a.data();
  std::vector<double> out(sp.outer * sp.inner, 0.0);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t e = 0; e < sp.extent; ++e)
      for (std::size_t i = 0; i < sp.inner; ++i) out[o * sp.inner + i] += A[(o * sp.extent + e) * sp.inner + i];
  Shape shape = drop_axis(a.shape(), axis);
  return make_result("sum_axis", std::move(shape), std::move(out), {a}, [sp](Node& self) {
    Node& NA = *self.inputs[0];
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t e = 0; e < sp.extent; ++e)
        for (std::size_t i = 0; i < sp.inner; ++i)
          NA.grad[(o * sp.extent + e) * sp.inner + i] += self.grad[o * sp.inner + i];
  });
}

Tensor max(const Tensor& a, std::size_t axis) {
  const auto sp = split_axis("max", a.shape(), axis);
  auto A = a.data();
  std::vector<double> out(sp.outer * sp.inner);
  std::vector<std::size_t> arg(sp.outer * sp.inner);
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t i = 0; i < sp.inner; ++i) {
      std::size_t best = 0;
      double bv = A[o * sp.extent * sp.inner + i];
      for (std::size_t e = 1; e < sp.extent; ++e) {
        const double v = A[(o * sp.extent + e) * sp.inner + i];
        if (v > bv) {
          bv = v;
          best = e;
        }
      }
      out[o * sp.inner + i] = bv;
      arg[o * sp.inner + i] = (o * sp.extent + best) * sp.inner + i;
    }
  Shape shape = drop_axis(a.shape(), axis);
  return make_result("max_axis", std::move(shape), std::move(out), {a}, [arg = std::move(arg)](Node& self) {
    Node& NA = *self.inputs[0];
    for (std::size_t j = 0; j < arg.size(); ++j) NA.grad[arg[j]] += self.grad[j];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel_of(shape) != a.numel())
    throw ShapeError("reshape: " + to_string(a.shape()) + " cannot become " + to_string(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_result("reshape", std::move(shape), std::move(out), {a}, [](Node& self) {
    Node& NA = *self.inputs[0];
    for (std::size_t i = 0; i < self.grad.size(); ++i) NA.grad[i] += self.grad[i];
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape& first = parts[0].shape();
  const auto sp0 = split_axis("concat", first, axis);
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat: rank mismatch " + to_string(first) + " vs " + to_string(s));
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != axis && s[i] != first[i])
        throw ShapeError("concat: shape mismatch " + to_string(first) + " vs " + to_string(s));
    extents.push_back(s[axis]);
    total += s[axis];
  }
  const std::size_t outer = sp0.outer, inner = sp0.inner;
  std::vector<double> out(outer * total * inner);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    auto d = parts[p].data();
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(d.begin() + o * extents[p] * inner, extents[p] * inner,
                  out.begin() + (o * total + offset) * inner);
    offset += extents[p];
  }
  Shape shape = first;
  shape[axis] = total;
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return make_result("concat", std::move(shape), std::move(out), std::move(inputs),
                     [outer, inner, total, extents](Node& self) {
                       std::size_t offset = 0;
                       for (std::size_t p = 0; p < extents.size(); ++p) {
                         Node& in = *self.inputs[p];
                         if (in.requires_grad)
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t j = 0; j < extents[p] * inner; ++j)
                               in.grad[o * extents[p] * inner + j] += self.grad[(o * total + offset) * inner + j];
                         offset += extents[p];
                       }
                     });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  if (a.rank() < 1) throw ShapeError("gather_rows: scalar input");
  if (rows.empty()) throw ShapeError("gather_rows: empty index list");
  const std::size_t n = a.dim(0);
  const std::size_t inner = a.numel() / n;
  auto A = a.data();
  std::vector<double> out(rows.size() * inner);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= n)
      throw ShapeError("gather_rows: index " + std::to_string(rows[r]) + " out of range for " + to_string(a.shape()));
    std::copy_n(A.begin() + rows[r] * inner, inner, out.begin() + r * inner);
  }
  Shape shape = a.shape();
  shape[0] = rows.size();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return make_result("gather_rows", std::move(shape), std::move(out), {a}, [idx = std::move(idx), inner](Node& self) {
    Node& NA = *self.inputs[0];
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < inner; ++j) NA.grad[idx[r] * inner + j] += self.grad[r * inner + j];
  });
}

Tensor conv2d_circular(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride_h,
                       std::size_t stride_w) {
  require_rank("conv2d_circular", x, 3);
  require_rank("conv2d_circular", w, 4);
  const std::size_t H = x.dim(0), W = x.dim(1), Cin = x.dim(2);
  const std::size_t KH = w.dim(0), KW = w.dim(1), Cout = w.dim(3);
  if (w.dim(2) != Cin)
    throw ShapeError("conv2d_circular: input channels " + to_string(x.shape()) + " vs weights " +
                     to_string(w.shape()));
  if (b.defined() && (b.rank() != 1 || b.dim(0) != Cout))
    throw ShapeError("conv2d_circular: bias " + to_string(b.shape()) + " for " + std::to_string(Cout) + " outputs");
  if (stride_h == 0 || stride_w == 0) throw ShapeError("conv2d_circular: zero stride");
  const std::size_t ph = KH / 2, pw = KW / 2;
  const std::size_t OH = (H + 2 * ph - KH) / stride_h + 1;
  const std::size_t OW = (W + 2 * pw - KW) / stride_w + 1;
  auto X = x.data();
  auto Wt = w.data();

  // Column of input tap (ox, kx), with wrap-around.
  auto in_col = [=](std::size_t ox, std::size_t kx) {
    const std::ptrdiff_t c = static_cast<std::ptrdiff_t>(ox * stride_w + kx) - static_cast<std::ptrdiff_t>(pw);
    const std::ptrdiff_t Wi = static_cast<std::ptrdiff_t>(W);
    return static_cast<std::size_t>(((c % Wi) + Wi) % Wi);
  };

  std::vector<double> out(OH * OW * Cout, 0.0);
  for (std::size_t oy = 0; oy < OH; ++oy)
    for (std::size_t ox = 0; ox < OW; ++ox) {
      double* o = out.data() + (oy * OW + ox) * Cout;
      if (b.defined()) std::copy_n(b.data().begin(), Cout, o);
      for (std::size_t ky = 0; ky < KH; ++ky) {
        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride_h + ky) - static_cast<std::ptrdiff_t>(ph);
        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
        for (std::size_t kx = 0; kx < KW; ++kx) {
          const double* xin = X.data() + (static_cast<std::size_t>(iy) * W + in_col(ox, kx)) * Cin;
          const double* wk = Wt.data() + (ky * KW + kx) * Cin * Cout;
          for (std::size_t ci = 0; ci < Cin; ++ci) {
            const double xv = xin[ci];
            const double* wrow = wk + ci * Cout;
            for (std::size_t co = 0; co < Cout; ++co) o[co] += xv * wrow[co];
          }
        }
      }
    }

  std::vector<Tensor> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  const bool has_bias = b.defined();
  return make_result(
      "conv2d_circular", {OH, OW, Cout}, std::move(out), std::move(inputs),
      [=](Node& self) {
        Node& NX = *self.inputs[0];
        Node& NW = *self.inputs[1];
        const double* G = self.grad.data();
        for (std::size_t oy = 0; oy < OH; ++oy)
          for (std::size_t ox = 0; ox < OW; ++ox) {
            const double* g = G + (oy * OW + ox) * Cout;
            for (std::size_t ky = 0; ky < KH; ++ky) {
              const std::ptrdiff_t iy =
                  static_cast<std::ptrdiff_t>(oy * stride_h + ky) - static_cast<std::ptrdiff_t>(ph);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
              for (std::size_t kx = 0; kx < KW; ++kx) {
                const std::size_t xoff = (static_cast<std::size_t>(iy) * W + in_col(ox, kx)) * Cin;
                const std::size_t woff = (ky * KW + kx) * Cin * Cout;
                for (std::size_t ci = 0; ci < Cin; ++ci) {
                  const double* wrow = NW.data.data() + woff + ci * Cout;
                  if (NX.requires_grad) {
                    double acc = 0.0;
                    for (std::size_t co = 0; co < Cout; ++co) acc += wrow[co] * g[co];
                    NX.grad[xoff + ci] += acc;
                  }
                  if (NW.requires_grad) {
                    const double xv = NX.data[xoff + ci];
                    double* gw = NW.grad.data() + woff + ci * Cout;
                    for (std::size_t co = 0; co < Cout; ++co) gw[co] += xv * g[co];
                  }
                }
              }
            }
          }
        if (has_bias) {
          Node& NB = *self.inputs[2];
          if (NB.requires_grad)
            for (std::size_t p = 0; p < OH * OW; ++p)
              for (std::size_t co = 0; co < Cout; ++co) NB.grad[co] += G[p * Cout + co];
        }
      });
}

Tensor upsample_nearest(const Tensor& x, std::size_t fy, std::size_t fx) {
  require_rank("upsample_nearest", x, 3);
  if (fy == 0 || fx == 0) throw ShapeError("upsample_nearest: zero factor");
  const std::size_t H = x.dim(0), W = x.dim(1), C = x.dim(2);
  const std::size_t OH = H * fy, OW = W * fx;
  auto X = x.data();
  std::vector<double> out(OH * OW * C);
  for (std::size_t oy = 0; oy < OH; ++oy)
    for (std::size_t ox = 0; ox < OW; ++ox)
      std::copy_n(X.begin() + ((oy / fy) * W + ox / fx) * C, C, out.begin() + (oy * OW + ox) * C);
  return make_result("upsample_nearest", {OH, OW, C}, std::move(out), {x}, [=](Node& self) {
    Node& NX = *self.inputs[0];
    for (std::size_t oy = 0; oy < OH; ++oy)
      for (std::size_t ox = 0; ox < OW; ++ox)
        for (std::size_t c = 0; c < C; ++c)
          NX.grad[((oy / fy) * W + ox / fx) * C + c] += self.grad[(oy * OW + ox) * C + c];
  });
}

}  // namespace topolidar::num

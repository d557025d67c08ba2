#include "vc/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace vc {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

// C (m x n) = op(A) * op(B), op(A) is m x k. Accumulates into C when asked.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, const double* b, double* c, bool accumulate) {
  const auto M = static_cast<Eigen::Index>(m);
  const auto N = static_cast<Eigen::Index>(n);
  const auto K = static_cast<Eigen::Index>(k);
  ConstMatMap A(a, trans_a ? K : M, trans_a ? M : K);
  ConstMatMap B(b, trans_b ? N : K, trans_b ? K : N);
  MatMap C(c, M, N);
  if (!accumulate) C.setZero();
  if (!trans_a && !trans_b) C.noalias() += A * B;
  else if (trans_a && !trans_b) C.noalias() += A.transpose() * B;
  else if (!trans_a && trans_b) C.noalias() += A * B.transpose();
  else C.noalias() += A.transpose() * B.transpose();
}

bool wants_grad(const detail::Node& self, std::size_t input) {
  return self.inputs[input]->requires_grad;
}

std::vector<double>& grad_of(detail::Node& self, std::size_t input) {
  return self.inputs[input]->ensure_grad();
}

// ---- broadcasting --------------------------------------------------------

// For each flat index of `a`, the flat index into `b`. Empty when shapes match.
std::vector<std::size_t> broadcast_map(const Shape& a, const Shape& b) {
  if (a == b) return {};
  auto fail = [&] {
    throw ShapeError("shape mismatch: cannot broadcast " + shape_string(b) + " onto " +
                     shape_string(a));
  };
  if (b.size() > a.size()) fail();
  const std::size_t offset = a.size() - b.size();
  std::vector<std::size_t> b_stride(a.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = b.size(); i-- > 0;) {
    const auto ad = a[offset + i];
    if (b[i] != ad && b[i] != 1) fail();
    b_stride[offset + i] = (b[i] == 1) ? 0 : stride;
    stride *= b[i];
  }
  const auto n = shape_size(a);
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> counter(a.size(), 0);
  std::size_t bi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    map[i] = bi;
    for (std::size_t d = a.size(); d-- > 0;) {
      ++counter[d];
      bi += b_stride[d];
      if (counter[d] < a[d]) break;
      bi -= b_stride[d] * counter[d];
      counter[d] = 0;
    }
  }
  return map;
}

enum class Arith { add, sub, mul };

Tensor elementwise(Arith kind, const Tensor& a, const Tensor& b) {
  auto map = broadcast_map(a.shape(), b.shape());
  const auto ad = a.data();
  const auto bd = b.data();
  const auto n = ad.size();
  std::vector<double> out(n);
  auto bidx = [&map](std::size_t i) { return map.empty() ? i : map[i]; };
  for (std::size_t i = 0; i < n; ++i) {
    const double x = ad[i], y = bd[bidx(i)];
    out[i] = kind == Arith::add ? x + y : kind == Arith::sub ? x - y : x * y;
  }
  static constexpr const char* names[] = {"add", "sub", "mul"};
  return Tensor::from_op(
      names[static_cast<int>(kind)], a.shape(), std::move(out), {a, b},
      [kind, map = std::move(map)](detail::Node& self) {
        const auto& g = self.grad;
        const auto& x = self.inputs[0]->data;
        const auto& y = self.inputs[1]->data;
        auto bidx = [&map](std::size_t i) { return map.empty() ? i : map[i]; };
        if (wants_grad(self, 0)) {
          auto& ga = grad_of(self, 0);
          for (std::size_t i = 0; i < g.size(); ++i)
            ga[i] += kind == Arith::mul ? g[i] * y[bidx(i)] : g[i];
        }
        if (wants_grad(self, 1)) {
          auto& gb = grad_of(self, 1);
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = kind == Arith::add ? g[i]
                             : kind == Arith::sub ? -g[i]
                                                  : g[i] * x[i];
            gb[bidx(i)] += v;
          }
        }
      });
}

// ---- convolution lowering ------------------------------------------------

struct ConvGeometry {
  std::size_t channels, height, width;   // image side
  std::size_t kh, kw;
  std::size_t out_h, out_w;              // patch grid side
  std::size_t stride, padding;

  std::size_t patch_rows() const { return channels * kh * kw; }
  std::size_t patch_cols() const { return out_h * out_w; }
};

void im2col(const ConvGeometry& g, const double* image, double* cols) {
  const auto P = g.patch_cols();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        double* row = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto y = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                         static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto x = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                           static_cast<std::ptrdiff_t>(g.padding);
            const bool inside = y >= 0 && x >= 0 && y < static_cast<std::ptrdiff_t>(g.height) &&
                                x < static_cast<std::ptrdiff_t>(g.width);
            row[oh * g.out_w + ow] =
                inside ? image[(c * g.height + static_cast<std::size_t>(y)) * g.width +
                               static_cast<std::size_t>(x)]
                       : 0.0;
          }
        }
      }
}

void col2im_accumulate(const ConvGeometry& g, const double* cols, double* image) {
  const auto P = g.patch_cols();
  for (std::size_t c = 0; c < g.channels; ++c)
    for (std::size_t i = 0; i < g.kh; ++i)
      for (std::size_t j = 0; j < g.kw; ++j) {
        const double* row = cols + ((c * g.kh + i) * g.kw + j) * P;
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto y = static_cast<std::ptrdiff_t>(oh * g.stride + i) -
                         static_cast<std::ptrdiff_t>(g.padding);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.height)) continue;
          for (std::size_t ow = 0; ow < g.out_w; ++ow) {
            const auto x = static_cast<std::ptrdiff_t>(ow * g.stride + j) -
                           static_cast<std::ptrdiff_t>(g.padding);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.width)) continue;
            image[(c * g.height + static_cast<std::size_t>(y)) * g.width +
                  static_cast<std::size_t>(x)] += row[oh * g.out_w + ow];
          }
        }
      }
}

struct BatchView {
  bool batched;
  std::size_t n, c, h, w;
};

BatchView image_batch(const Tensor& input, const char* op) {
  if (input.rank() == 3) return {false, 1, input.dim(0), input.dim(1), input.dim(2)};
  if (input.rank() == 4)
    return {true, input.dim(0), input.dim(1), input.dim(2), input.dim(3)};
  throw ShapeError(std::string(op) + ": input must be [C x H x W] or [N x C x H x W], got " +
                   shape_string(input.shape()));
}

void check_kernel_rank(const Tensor& kernels, const char* op) {
  if (kernels.rank() != 4)
    throw ShapeError(std::string(op) + ": kernels must be rank 4, got " +
                     shape_string(kernels.shape()));
}

void check_bias(const Tensor& bias, std::size_t channels, const char* op) {
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels))
    throw ShapeError(std::string(op) + ": bias must be [" + std::to_string(channels) +
                     "], got " + shape_string(bias.shape()));
}

void add_channel_bias(std::vector<double>& out, const Tensor& bias, std::size_t n,
                      std::size_t channels, std::size_t plane) {
  if (!bias.defined()) return;
  const auto b = bias.data();
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t c = 0; c < channels; ++c) {
      double* p = out.data() + (s * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) p[i] += b[c];
    }
}

void accumulate_channel_bias_grad(detail::Node& self, std::size_t bias_input, std::size_t n,
                                  std::size_t channels, std::size_t plane) {
  if (self.inputs.size() <= bias_input || !wants_grad(self, bias_input)) return;
  auto& gb = grad_of(self, bias_input);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t c = 0; c < channels; ++c) {
      const double* p = self.grad.data() + (s * channels + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      gb[c] += acc;
    }
}

Shape image_shape(const BatchView& v, std::size_t c, std::size_t h, std::size_t w) {
  if (v.batched) return {v.n, c, h, w};
  return {c, h, w};
}

Tensor conv2d_impl(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                   ConvParams params) {
  const auto v = image_batch(input, "conv2d");
  check_kernel_rank(kernels, "conv2d");
  if (params.stride == 0) throw ShapeError("conv2d: stride must be positive");
  const auto c_out = kernels.dim(0), c_in = kernels.dim(1);
  const auto kh = kernels.dim(2), kw = kernels.dim(3);
  if (c_in != v.c)
    throw ShapeError("conv2d: input " + shape_string(input.shape()) + " has " +
                     std::to_string(v.c) + " channels but kernels " +
                     shape_string(kernels.shape()) + " expect " + std::to_string(c_in));
  if (v.h + 2 * params.padding < kh || v.w + 2 * params.padding < kw)
    throw ShapeError("conv2d: kernel " + shape_string(kernels.shape()) +
                     " larger than padded input " + shape_string(input.shape()));
  check_bias(bias, c_out, "conv2d");

  const ConvGeometry g{v.c, v.h, v.w, kh, kw, conv_output_size(v.h, kh, params),
                       conv_output_size(v.w, kw, params), params.stride, params.padding};
  const auto rows = g.patch_rows(), cols_n = g.patch_cols();
  const auto in_plane = v.c * v.h * v.w;
  const auto out_plane = c_out * cols_n;

  std::vector<double> cols(v.n * rows * cols_n);
  std::vector<double> out(v.n * out_plane);
  const double* x = input.data().data();
  const double* k = kernels.data().data();
  for (std::size_t s = 0; s < v.n; ++s) {
    double* cs = cols.data() + s * rows * cols_n;
    im2col(g, x + s * in_plane, cs);
    gemm(false, false, c_out, cols_n, rows, k, cs, out.data() + s * out_plane, false);
  }
  add_channel_bias(out, bias, v.n, c_out, cols_n);

  std::vector<Tensor> inputs{input, kernels};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::from_op(
      "conv2d", image_shape(v, c_out, g.out_h, g.out_w), std::move(out), std::move(inputs),
      [g, v, c_out, cols = std::move(cols)](detail::Node& self) {
        const auto rows = g.patch_rows(), cols_n = g.patch_cols();
        const auto in_plane = v.c * v.h * v.w;
        const auto out_plane = c_out * cols_n;
        const double* dy = self.grad.data();
        if (wants_grad(self, 1)) {
          auto& gk = grad_of(self, 1);
          for (std::size_t s = 0; s < v.n; ++s)
            gemm(false, true, c_out, rows, cols_n, dy + s * out_plane,
                 cols.data() + s * rows * cols_n, gk.data(), true);
        }
        if (wants_grad(self, 0)) {
          auto& gx = grad_of(self, 0);
          const double* k = self.inputs[1]->data.data();
          std::vector<double> dcols(rows * cols_n);
          for (std::size_t s = 0; s < v.n; ++s) {
            gemm(true, false, rows, cols_n, c_out, k, dy + s * out_plane, dcols.data(), false);
            col2im_accumulate(g, dcols.data(), gx.data() + s * in_plane);
          }
        }
        accumulate_channel_bias_grad(self, 2, v.n, c_out, cols_n);
      });
}

Tensor conv2d_transpose_impl(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                             ConvParams params, OutputPadding output_padding) {
  const auto v = image_batch(input, "conv2d_transpose");
  check_kernel_rank(kernels, "conv2d_transpose");
  if (params.stride == 0) throw ShapeError("conv2d_transpose: stride must be positive");
  if (output_padding.rows >= params.stride || output_padding.cols >= params.stride)
    throw ShapeError("conv2d_transpose: output_padding must be smaller than stride");
  const auto c_in = kernels.dim(0), c_out = kernels.dim(1);
  const auto kh = kernels.dim(2), kw = kernels.dim(3);
  if (c_in != v.c)
    throw ShapeError("conv2d_transpose: input " + shape_string(input.shape()) + " has " +
                     std::to_string(v.c) + " channels but kernels " +
                     shape_string(kernels.shape()) + " expect " + std::to_string(c_in));
  const auto out_h = conv_transpose_output_size(v.h, kh, params, output_padding.rows);
  const auto out_w = conv_transpose_output_size(v.w, kw, params, output_padding.cols);
  check_bias(bias, c_out, "conv2d_transpose");

  // Geometry of the forward convolution whose adjoint this is.
  const ConvGeometry g{c_out, out_h, out_w, kh, kw, v.h, v.w, params.stride, params.padding};
  const auto rows = g.patch_rows(), cols_n = g.patch_cols();
  const auto in_plane = c_in * cols_n;
  const auto out_plane = c_out * out_h * out_w;

  std::vector<double> out(v.n * out_plane, 0.0);
  std::vector<double> cols(rows * cols_n);
  const double* x = input.data().data();
  const double* k = kernels.data().data();
  for (std::size_t s = 0; s < v.n; ++s) {
    gemm(true, false, rows, cols_n, c_in, k, x + s * in_plane, cols.data(), false);
    col2im_accumulate(g, cols.data(), out.data() + s * out_plane);
  }
  add_channel_bias(out, bias, v.n, c_out, out_h * out_w);

  std::vector<Tensor> inputs{input, kernels};
  if (bias.defined()) inputs.push_back(bias);
  return Tensor::from_op(
      "conv2d_transpose", image_shape(v, c_out, out_h, out_w), std::move(out),
      std::move(inputs), [g, v, c_in, c_out](detail::Node& self) {
        const auto rows = g.patch_rows(), cols_n = g.patch_cols();
        const auto in_plane = c_in * cols_n;
        const auto out_plane = c_out * g.height * g.width;
        const bool need_x = wants_grad(self, 0), need_k = wants_grad(self, 1);
        if (need_x || need_k) {
          std::vector<double> dcols(rows * cols_n);
          const double* x = self.inputs[0]->data.data();
          const double* k = self.inputs[1]->data.data();
          for (std::size_t s = 0; s < v.n; ++s) {
            im2col(g, self.grad.data() + s * out_plane, dcols.data());
            if (need_x)
              gemm(false, false, c_in, cols_n, rows, k, dcols.data(),
                   grad_of(self, 0).data() + s * in_plane, true);
            if (need_k)
              gemm(false, true, c_in, rows, cols_n, x + s * in_plane, dcols.data(),
                   grad_of(self, 1).data(), true);
          }
        }
        accumulate_channel_bias_grad(self, 2, v.n, c_out, g.height * g.width);
      });
}

template <typename Fwd, typename Deriv>
Tensor unary(const char* name, const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xd = x.data();
  std::vector<double> out(xd.size());
  for (std::size_t i = 0; i < xd.size(); ++i) out[i] = fwd(xd[i]);
  return Tensor::from_op(name, x.shape(), std::move(out), {x}, [deriv](detail::Node& self) {
    auto& gx = grad_of(self, 0);
    const auto& xin = self.inputs[0]->data;
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * deriv(xin[i], self.data[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(Arith::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(Arith::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(Arith::mul, a, b); }

Tensor scale(const Tensor& a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor sum(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  return Tensor::from_op("sum", {1}, {acc}, {a}, [](detail::Node& self) {
    auto& ga = grad_of(self, 0);
    for (auto& v : ga) v += self.grad[0];
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw ShapeError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                     shape_string(shape));
  return Tensor::from_op("reshape", std::move(shape), a.to_vector(), {a},
                         [](detail::Node& self) {
                           auto& ga = grad_of(self, 0);
                           for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
                         });
}

Tensor concat_columns(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
    throw ShapeError("concat_columns: shape mismatch " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()));
  const auto n = a.dim(0), ca = a.dim(1), cb = b.dim(1);
  std::vector<double> out(n * (ca + cb));
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(a.data().begin() + r * ca, ca, out.begin() + r * (ca + cb));
    std::copy_n(b.data().begin() + r * cb, cb, out.begin() + r * (ca + cb) + ca);
  }
  return Tensor::from_op("concat", {n, ca + cb}, std::move(out), {a, b},
                         [n, ca, cb](detail::Node& self) {
                           for (std::size_t r = 0; r < n; ++r) {
                             const double* g = self.grad.data() + r * (ca + cb);
                             if (wants_grad(self, 0)) {
                               auto& ga = grad_of(self, 0);
                               for (std::size_t j = 0; j < ca; ++j) ga[r * ca + j] += g[j];
                             }
                             if (wants_grad(self, 1)) {
                               auto& gb = grad_of(self, 1);
                               for (std::size_t j = 0; j < cb; ++j) gb[r * cb + j] += g[ca + j];
                             }
                           }
                         });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: shape mismatch " + shape_string(a.shape()) + " x " +
                     shape_string(b.shape()));
  const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  gemm(false, false, m, n, k, a.data().data(), b.data().data(), out.data(), false);
  return Tensor::from_op("matmul", {m, n}, std::move(out), {a, b},
                         [m, k, n](detail::Node& self) {
                           const double* g = self.grad.data();
                           if (wants_grad(self, 0))
                             gemm(false, true, m, k, n, g, self.inputs[1]->data.data(),
                                  grad_of(self, 0).data(), true);
                           if (wants_grad(self, 1))
                             gemm(true, false, k, n, m, self.inputs[0]->data.data(), g,
                                  grad_of(self, 1).data(), true);
                         });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add(matmul(x, weight), bias);
}

std::size_t conv_output_size(std::size_t in, std::size_t kernel, ConvParams params) {
  if (in + 2 * params.padding < kernel)
    throw ShapeError("kernel " + std::to_string(kernel) + " larger than padded input " +
                     std::to_string(in + 2 * params.padding));
  return (in + 2 * params.padding - kernel) / params.stride + 1;
}

std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, ConvParams params,
                                       std::size_t output_padding) {
  const auto full = (in - 1) * params.stride + kernel + output_padding;
  if (full <= 2 * params.padding)
    throw ShapeError("conv2d_transpose: padding " + std::to_string(params.padding) +
                     " leaves no output");
  return full - 2 * params.padding;
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, ConvParams params) {
  return conv2d_impl(input, kernels, Tensor{}, params);
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              ConvParams params) {
  return conv2d_impl(input, kernels, bias, params);
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernels, ConvParams params,
                        std::size_t output_padding) {
  return conv2d_transpose_impl(input, kernels, Tensor{}, params, {output_padding, output_padding});
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                        ConvParams params, std::size_t output_padding) {
  return conv2d_transpose_impl(input, kernels, bias, params, {output_padding, output_padding});
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernels, ConvParams params,
                        OutputPadding output_padding) {
  return conv2d_transpose_impl(input, kernels, Tensor{}, params, output_padding);
}

Tensor conv2d_transpose(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                        ConvParams params, OutputPadding output_padding) {
  return conv2d_transpose_impl(input, kernels, bias, params, output_padding);
}

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x,
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& x, double alpha) {
  return unary("leaky_relu", x, [alpha](double v) { return v > 0.0 ? v : alpha * v; },
               [alpha](double v, double) { return v > 0.0 ? 1.0 : alpha; });
}

Tensor activation(Activation act, const Tensor& x) {
  switch (act.kind) {
    case Activation::Kind::relu: return relu(x);
    case Activation::Kind::tanh: return tanh(x);
    case Activation::Kind::sigmoid: return sigmoid(x);
    case Activation::Kind::leaky_relu: return leaky_relu(x, act.alpha);
  }
  throw ContractError("unknown activation");
}

std::vector<double> softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2)
    throw ShapeError("softmax expects [N x C] logits, got " + shape_string(logits.shape()));
  const auto n = logits.dim(0), c = logits.dim(1);
  const auto z = logits.data();
  std::vector<double> p(n * c);
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = z.data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += p[r * c + j] = std::exp(row[j] - mx);
    for (std::size_t j = 0; j < c; ++j) p[r * c + j] /= total;
  }
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  if (logits.rank() != 2)
    throw ShapeError("softmax_cross_entropy expects [N x C] logits, got " +
                     shape_string(logits.shape()));
  const auto n = logits.dim(0), c = logits.dim(1);
  if (targets.size() != n)
    throw ShapeError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                     " targets for " + std::to_string(n) + " rows");
  for (auto t : targets)
    if (t >= c)
      throw std::out_of_range("softmax_cross_entropy: target class " + std::to_string(t) +
                              " outside [0, " + std::to_string(c) + ")");
  const auto z = logits.data();
  double loss = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = z.data() + r * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) total += std::exp(row[j] - mx);
    loss += mx + std::log(total) - row[targets[r]];
  }
  loss /= static_cast<double>(n);
  std::vector<std::size_t> t(targets.begin(), targets.end());
  return Tensor::from_op("softmax_cross_entropy", {1}, {loss}, {logits},
                         [t = std::move(t)](detail::Node& self) {
                           const auto& in = *self.inputs[0];
                           const auto n = in.shape[0], c = in.shape[1];
                           Tensor view(in.shape, in.data);
                           const auto p = softmax_rows(view);
                           auto& g = grad_of(self, 0);
                           const double scale = self.grad[0] / static_cast<double>(n);
                           for (std::size_t r = 0; r < n; ++r)
                             for (std::size_t j = 0; j < c; ++j)
                               g[r * c + j] +=
                                   scale * (p[r * c + j] - (j == t[r] ? 1.0 : 0.0));
                         });
}

Tensor mse_loss(const Tensor& pred, const Tensor& target, std::size_t batch) {
  if (pred.shape() != target.shape())
    throw ShapeError("mse_loss: shape mismatch " + shape_string(pred.shape()) + " vs " +
                     shape_string(target.shape()));
  if (batch == 0) throw ContractError("mse_loss: batch must be positive");
  const auto p = pred.data(), q = target.data();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += (p[i] - q[i]) * (p[i] - q[i]);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  return Tensor::from_op("mse_loss", {1}, {0.5 * acc * inv_batch}, {pred, target},
                         [inv_batch](detail::Node& self) {
                           const auto& p = self.inputs[0]->data;
                           const auto& q = self.inputs[1]->data;
                           const double g = self.grad[0] * inv_batch;
                           if (wants_grad(self, 0)) {
                             auto& gp = grad_of(self, 0);
                             for (std::size_t i = 0; i < p.size(); ++i) gp[i] += g * (p[i] - q[i]);
                           }
                           if (wants_grad(self, 1)) {
                             auto& gq = grad_of(self, 1);
                             for (std::size_t i = 0; i < p.size(); ++i) gq[i] -= g * (p[i] - q[i]);
                           }
                         });
}

}  // namespace vc

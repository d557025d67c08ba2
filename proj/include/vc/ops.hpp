#pragma once

#include <cstddef>
#include <span>

#include "vc/tensor.hpp"

namespace vc {

// Elementwise arithmetic. `b` may equal a's shape or broadcast against its
// trailing dimensions (each of b's dims equal to a's or 1). Output has a's shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
// Concatenates two rank-2 tensors along the column axis.
Tensor concat_columns(const Tensor& a, const Tensor& b);

Tensor matmul(const Tensor& a, const Tensor& b);
// x: [N x In], weight: [In x Out], bias: [Out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

struct ConvParams {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation. input: [C_in x H x W] or [N x C_in x H x W],
// kernels: [C_out x C_in x kH x kW], optional bias: [C_out].
Tensor conv2d(const Tensor& input, const Tensor& kernels, ConvParams params);
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              ConvParams params);

// Adjoint of conv2d with the same kernels and hyperparameters.
// input: [C x H' x W'] (or batched), kernels: [C x C_out x kH x kW] where C is
// the output channel count of the forward convolution. output_padding (< stride)
// selects among the output sizes that the forward map sends to H' x W'.
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernels, ConvParams params,
                        std::size_t output_padding = 0);
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                        ConvParams params, std::size_t output_padding = 0);

// Separate output padding for the row and column axes.
struct OutputPadding {
  std::size_t rows = 0;
  std::size_t cols = 0;
};
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernels, ConvParams params,
                        OutputPadding output_padding);
Tensor conv2d_transpose(const Tensor& input, const Tensor& kernels, const Tensor& bias,
                        ConvParams params, OutputPadding output_padding);

std::size_t conv_output_size(std::size_t in, std::size_t kernel, ConvParams params);
std::size_t conv_transpose_output_size(std::size_t in, std::size_t kernel, ConvParams params,
                                       std::size_t output_padding);

struct Activation {
  enum class Kind { relu, tanh, sigmoid, leaky_relu };
  Kind kind = Kind::relu;
  double alpha = 0.2;  // leaky_relu slope for negative inputs
};

Tensor activation(Activation act, const Tensor& x);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double alpha = 0.2);

// Mean over rows of -log softmax(logits)[target]. logits: [N x C].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);
// 0.5 * (sum of squared differences) / batch.
Tensor mse_loss(const Tensor& pred, const Tensor& target, std::size_t batch = 1);

// Row-wise softmax of a [N x C] tensor; not differentiable.
std::vector<double> softmax_rows(const Tensor& logits);

}  // namespace vc

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "crowding/nn/tensor.hpp"

namespace crowding::nn {

struct Conv2dParams {
    std::size_t stride = 1;
    std::size_t padding = 0;
};

std::size_t conv_output_dim(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

/// Cross-correlation of x [N,C,H,W] with w [OC,C,K,K] plus bias b [OC].
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dParams p);

struct Conv2dGrads {
    Tensor dx;  ///< empty when the input gradient was not requested
    Tensor dw;
    Tensor db;
};

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, Conv2dParams p,
                            bool need_input_grad = true);

/// x [N,in], w [out,in], b [out] -> [N,out].
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);

struct DenseGrads {
    Tensor dx;
    Tensor dw;
    Tensor db;
};

DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, bool need_input_grad = true);

struct MaxPoolResult {
    Tensor out;
    std::vector<std::size_t> argmax;  ///< flat input index of each output element
};

MaxPoolResult maxpool2d_forward(const Tensor& x, std::size_t size, std::size_t stride);
Tensor maxpool2d_backward(const Tensor& grad_out, std::span<const std::size_t> argmax, const Shape& input_shape);

Tensor leaky_relu_forward(const Tensor& x, float negative_slope);
Tensor leaky_relu_backward(const Tensor& grad_out, const Tensor& x, float negative_slope);

/// Row-wise softmax of [N,K] logits, stabilized by max subtraction.
Tensor softmax(const Tensor& logits);

struct LossResult {
    double loss = 0.0;     ///< mean over the batch
    Tensor grad;           ///< d(mean loss)/d(logits)
    std::size_t correct = 0;
};

/// Mean cross-entropy of softmax(logits) against integer labels.
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace crowding::nn

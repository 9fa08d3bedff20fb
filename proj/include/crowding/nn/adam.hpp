#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crowding/nn/network.hpp"
#include "crowding/nn/tensor.hpp"

namespace crowding::nn {

struct OptimizerState {
    double learning_rate = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<Tensor> m;  ///< first moments, aligned with the parameter list
    std::vector<Tensor> v;  ///< second moments

    /// Zero moments shaped like `params`.
    static OptimizerState for_parameters(std::span<const Parameter> params, double learning_rate = 0.01);
};

/// One bias-corrected ADAM update. Parameters whose `trainable` flag is false
/// are skipped entirely, moments included. Throws DivergenceError on
/// non-finite gradients.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, const std::vector<bool>& trainable,
               OptimizerState& state);

/// Convenience overload driven by the network's trainable mask.
void adam_step(Network& net, std::span<const Tensor> grads, OptimizerState& state);

}  // namespace crowding::nn

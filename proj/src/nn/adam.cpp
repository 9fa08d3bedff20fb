#include "crowding/nn/adam.hpp"

#include <cmath>
#include <string>

#include "crowding/error.hpp"

namespace crowding::nn {

OptimizerState OptimizerState::for_parameters(std::span<const Parameter> params, double learning_rate) {
    OptimizerState s;
    s.learning_rate = learning_rate;
    for (const auto& p : params) {
        s.m.emplace_back(p.value.shape());
        s.v.emplace_back(p.value.shape());
    }
    return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, const std::vector<bool>& trainable,
               OptimizerState& state) {
    if (grads.size() != params.size() || trainable.size() != params.size() || state.m.size() != params.size() ||
        state.v.size() != params.size())
        throw ShapeError("ADAM: parameter, gradient and moment lists differ in length");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable[i]) continue;
        if (grads[i].shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape())
            throw ShapeError("ADAM: gradient shape mismatch for parameter " + std::to_string(i));
        grads[i].check_finite("gradient of parameter " + std::to_string(i));
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!trainable[i]) continue;
        Tensor& theta = *params[i];
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        const Tensor& g = grads[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double gk = g[k];
            const double mk = state.beta1 * m[k] + (1.0 - state.beta1) * gk;
            const double vk = state.beta2 * v[k] + (1.0 - state.beta2) * gk * gk;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            const double m_hat = mk / correction1;
            const double v_hat = vk / correction2;
            theta[k] = static_cast<float>(theta[k] - state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
        }
    }
}

void adam_step(Network& net, std::span<const Tensor> grads, OptimizerState& state) {
    auto& params = net.parameters();
    std::vector<Tensor*> ptrs;
    std::vector<bool> mask;
    ptrs.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        ptrs.push_back(&params[i].value);
        mask.push_back(net.parameter_trainable(i));
    }
    adam_step(ptrs, grads, mask, state);
}

}  // namespace crowding::nn

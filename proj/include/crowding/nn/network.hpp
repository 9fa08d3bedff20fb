#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crowding/image.hpp"
#include "crowding/nn/ops.hpp"
#include "crowding/nn/tensor.hpp"

namespace crowding::nn {

enum class LayerKind : std::uint8_t { Conv2d, MaxPool2d, Dense, LeakyRelu, Flatten, Softmax };

std::string layer_kind_name(LayerKind k);

struct LayerSpec {
    LayerKind kind = LayerKind::Flatten;
    std::size_t units = 0;   ///< conv output channels or dense units
    std::size_t kernel = 0;  ///< conv kernel or pooling window
    std::size_t stride = 1;
    std::size_t padding = 0;
    float negative_slope = 0.01f;

    static LayerSpec conv(std::size_t channels, std::size_t kernel, std::size_t stride = 1, std::size_t padding = 0) {
        return {LayerKind::Conv2d, channels, kernel, stride, padding, 0.0f};
    }
    static LayerSpec maxpool(std::size_t size, std::size_t stride) { return {LayerKind::MaxPool2d, 0, size, stride, 0, 0.0f}; }
    static LayerSpec dense(std::size_t units) { return {LayerKind::Dense, units, 0, 1, 0, 0.0f}; }
    static LayerSpec leaky_relu(float slope) { return {LayerKind::LeakyRelu, 0, 0, 1, 0, slope}; }
    static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, 1, 0, 0.0f}; }
    static LayerSpec softmax() { return {LayerKind::Softmax, 0, 0, 1, 0, 0.0f}; }

    bool has_parameters() const { return kind == LayerKind::Conv2d || kind == LayerKind::Dense; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Parameter {
    std::string name;
    Tensor value;
    std::size_t layer = 0;  ///< index into Network::layers()
};

/// Per-layer state recorded by a training forward pass.
struct ForwardCache {
    std::vector<Tensor> inputs;
    std::vector<std::vector<std::size_t>> argmax;
    bool valid = false;
};

/// Sequential network. Every conv/dense layer owns one weight and one bias,
/// stored in layer order as "<kind><n>.weight" / "<kind><n>.bias".
class Network {
public:
    Network() = default;

    /// Builds a zero-initialized network; throws ShapeError if the layer
    /// chain does not fit `input_shape` ([C,H,W]).
    Network(Shape input_shape, std::vector<LayerSpec> layers);

    const Shape& input_shape() const { return input_shape_; }
    const std::vector<LayerSpec>& layers() const { return layers_; }
    std::vector<Parameter>& parameters() { return params_; }
    const std::vector<Parameter>& parameters() const { return params_; }
    const Parameter& parameter(const std::string& name) const;
    std::size_t parameter_count() const;
    std::size_t output_size() const { return output_size_; }

    /// Per-layer trainability; layers without parameters are ignored.
    const std::vector<bool>& trainable_mask() const { return trainable_; }
    void set_trainable(std::size_t layer, bool on) { trainable_.at(layer) = on; }
    void set_all_trainable(bool on);
    bool parameter_trainable(std::size_t param_index) const { return trainable_[params_[param_index].layer]; }
    /// Indices of conv/dense layers, input to output.
    std::vector<std::size_t> parameterized_layers() const;

    /// Logits (everything before a trailing softmax) for a [N,C,H,W] batch.
    Tensor forward(const Tensor& batch, ForwardCache* cache = nullptr) const;

    /// Parameter gradients (aligned with parameters()) of a scalar loss given
    /// its gradient with respect to the logits.
    std::vector<Tensor> backward(const ForwardCache& cache, const Tensor& grad_logits) const;

    /// Class probabilities for a batch.
    Tensor probabilities(const Tensor& batch) const;

    friend bool operator==(const Network&, const Network&);

private:
    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::vector<Parameter> params_;
    std::vector<bool> trainable_;
    std::vector<std::size_t> weight_index_;  ///< per layer, index of its weight in params_ (or npos)
    std::size_t output_size_ = 0;
};

/// i.i.d. uniform on [-L, L] with L = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);

/// Glorot-uniform weights (Keras fan convention for conv kernels) and zero biases.
void initialize_glorot(Network& net, std::uint64_t seed);

struct SimpleNetPlan {
    std::vector<std::size_t> conv_channels{32, 64, 96, 96, 64};
    std::vector<std::size_t> dense_units{512, 256};
    std::vector<std::size_t> pool_after{1, 2, 5};  ///< 1-based conv block numbers
    std::size_t kernel = 3;
};

/// The reference AlexNet-style classifier: conv + leaky ReLU blocks with
/// pooling after blocks 1, 2 and 5, then dense layers and a softmax.
Network build_simplenet(Canvas canvas, std::size_t n_classes = 10, float negative_slope = 0.01f,
                        const SimpleNetPlan& plan = {}, std::uint64_t seed = 0);

/// Maps an 8-bit RGB image to [1,3,H,W] floats in [-0.5, 0.5].
Tensor image_to_tensor(const ImageBuffer& image);
/// Writes `image` into sample `index` of a preallocated [N,3,H,W] batch.
void write_sample(Tensor& batch, std::size_t index, const ImageBuffer& image);

/// Softmax probabilities for one image; throws ShapeError on canvas mismatch.
std::vector<float> predict(const Network& net, const ImageBuffer& image);

int argmax(std::span<const float> values);

}  // namespace crowding::nn

#include "crowding/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowding/error.hpp"
#include "crowding/rng.hpp"

namespace crowding::nn {

namespace {
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
}

std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::MaxPool2d: return "maxpool2d";
        case LayerKind::Dense: return "dense";
        case LayerKind::LeakyRelu: return "leaky_relu";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

Network::Network(Shape input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), trainable_(layers_.size(), true),
      weight_index_(layers_.size(), kNone) {
    if (input_shape_.size() != 3) throw ShapeError("network input must be [C,H,W]");
    Shape cur = input_shape_;
    std::size_t conv_count = 0, dense_count = 0;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        const std::string where = "layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) + ")";
        switch (l.kind) {
            case LayerKind::Conv2d: {
                if (cur.size() != 3) throw ShapeError(where + " needs a [C,H,W] input, got " + shape_string(cur));
                if (l.units == 0 || l.kernel == 0 || l.stride == 0) throw ShapeError(where + " has a zero hyperparameter");
                if (cur[1] + 2 * l.padding < l.kernel || cur[2] + 2 * l.padding < l.kernel)
                    throw ShapeError(where + " kernel exceeds input " + shape_string(cur));
                const std::string name = "conv" + std::to_string(++conv_count);
                weight_index_[i] = params_.size();
                params_.push_back({name + ".weight", Tensor({l.units, cur[0], l.kernel, l.kernel}), i});
                params_.push_back({name + ".bias", Tensor({l.units}), i});
                cur = {l.units, conv_output_dim(cur[1], l.kernel, l.stride, l.padding),
                       conv_output_dim(cur[2], l.kernel, l.stride, l.padding)};
                break;
            }
            case LayerKind::MaxPool2d:
                if (cur.size() != 3) throw ShapeError(where + " needs a [C,H,W] input, got " + shape_string(cur));
                if (l.kernel == 0 || l.stride == 0) throw ShapeError(where + " has a zero hyperparameter");
                if (cur[1] < l.kernel || cur[2] < l.kernel) throw ShapeError(where + " window exceeds input " + shape_string(cur));
                cur = {cur[0], (cur[1] - l.kernel) / l.stride + 1, (cur[2] - l.kernel) / l.stride + 1};
                break;
            case LayerKind::Flatten:
                cur = {element_count(cur)};
                break;
            case LayerKind::Dense: {
                if (cur.size() != 1) throw ShapeError(where + " needs a flat input, got " + shape_string(cur));
                if (l.units == 0) throw ShapeError(where + " has zero units");
                const std::string name = "dense" + std::to_string(++dense_count);
                weight_index_[i] = params_.size();
                params_.push_back({name + ".weight", Tensor({l.units, cur[0]}), i});
                params_.push_back({name + ".bias", Tensor({l.units}), i});
                cur = {l.units};
                break;
            }
            case LayerKind::LeakyRelu:
                break;
            case LayerKind::Softmax:
                if (i + 1 != layers_.size()) throw ShapeError("softmax must be the final layer");
                if (cur.size() != 1) throw ShapeError("softmax needs a flat input");
                break;
        }
    }
    if (cur.size() != 1) throw ShapeError("network output must be flat, got " + shape_string(cur));
    output_size_ = cur[0];
}

const Parameter& Network::parameter(const std::string& name) const {
    for (const auto& p : params_)
        if (p.name == name) return p;
    throw ShapeError("no parameter named " + name);
}

std::size_t Network::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
}

void Network::set_all_trainable(bool on) { std::fill(trainable_.begin(), trainable_.end(), on); }

std::vector<std::size_t> Network::parameterized_layers() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].has_parameters()) out.push_back(i);
    return out;
}

Tensor Network::forward(const Tensor& batch, ForwardCache* cache) const {
    if (batch.rank() != 4 || Shape(batch.shape().begin() + 1, batch.shape().end()) != input_shape_)
        throw ShapeError("network expects [N," + shape_string(input_shape_).substr(1) + " input, got " +
                         shape_string(batch.shape()));
    if (cache) {
        cache->inputs.assign(layers_.size(), Tensor());
        cache->argmax.assign(layers_.size(), {});
        cache->valid = true;
    }
    Tensor cur = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const LayerSpec& l = layers_[i];
        if (l.kind == LayerKind::Softmax) break;
        if (cache) cache->inputs[i] = cur;
        switch (l.kind) {
            case LayerKind::Conv2d:
                cur = conv2d_forward(cur, params_[weight_index_[i]].value, params_[weight_index_[i] + 1].value,
                                     {l.stride, l.padding});
                break;
            case LayerKind::MaxPool2d: {
                auto r = maxpool2d_forward(cur, l.kernel, l.stride);
                cur = std::move(r.out);
                if (cache) cache->argmax[i] = std::move(r.argmax);
                break;
            }
            case LayerKind::Flatten:
                cur = cur.reshaped({cur.dim(0), cur.size() / cur.dim(0)});
                break;
            case LayerKind::Dense:
                cur = dense_forward(cur, params_[weight_index_[i]].value, params_[weight_index_[i] + 1].value);
                break;
            case LayerKind::LeakyRelu:
                cur = leaky_relu_forward(cur, l.negative_slope);
                break;
            case LayerKind::Softmax:
                break;
        }
    }
    return cur;
}

std::vector<Tensor> Network::backward(const ForwardCache& cache, const Tensor& grad_logits) const {
    if (!cache.valid || cache.inputs.size() != layers_.size())
        throw ShapeError("backward called without a cached forward pass");

    std::vector<Tensor> grads;
    grads.reserve(params_.size());
    for (const auto& p : params_) grads.emplace_back(p.value.shape());

    // Nothing below the lowest trainable parameterized layer needs gradients.
    std::size_t lowest = kNone;
    for (std::size_t i : parameterized_layers())
        if (trainable_[i]) {
            lowest = i;
            break;
        }
    if (lowest == kNone) return grads;

    std::size_t top = layers_.size();
    if (top > 0 && layers_[top - 1].kind == LayerKind::Softmax) --top;

    Tensor g = grad_logits;
    for (std::size_t i = top; i-- > lowest;) {
        const LayerSpec& l = layers_[i];
        const Tensor& x = cache.inputs[i];
        const bool need_dx = i > lowest;
        switch (l.kind) {
            case LayerKind::Conv2d: {
                auto r = conv2d_backward(g, x, params_[weight_index_[i]].value, {l.stride, l.padding}, need_dx);
                if (trainable_[i]) {
                    grads[weight_index_[i]] = std::move(r.dw);
                    grads[weight_index_[i] + 1] = std::move(r.db);
                }
                g = std::move(r.dx);
                break;
            }
            case LayerKind::Dense: {
                auto r = dense_backward(g, x, params_[weight_index_[i]].value, need_dx);
                if (trainable_[i]) {
                    grads[weight_index_[i]] = std::move(r.dw);
                    grads[weight_index_[i] + 1] = std::move(r.db);
                }
                g = std::move(r.dx);
                break;
            }
            case LayerKind::MaxPool2d:
                g = maxpool2d_backward(g, cache.argmax[i], x.shape());
                break;
            case LayerKind::Flatten:
                g = g.reshaped(x.shape());
                break;
            case LayerKind::LeakyRelu:
                g = leaky_relu_backward(g, x, l.negative_slope);
                break;
            case LayerKind::Softmax:
                break;
        }
    }
    return grads;
}

Tensor Network::probabilities(const Tensor& batch) const { return softmax(forward(batch)); }

bool operator==(const Network& a, const Network& b) {
    if (a.input_shape_ != b.input_shape_ || a.layers_ != b.layers_ || a.trainable_ != b.trainable_) return false;
    if (a.params_.size() != b.params_.size()) return false;
    for (std::size_t i = 0; i < a.params_.size(); ++i)
        if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) return false;
    return true;
}

Tensor glorot_uniform_init(const Shape& shape, std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
    if (fan_in == 0 || fan_out == 0) throw ConfigError("Glorot fans must be positive");
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Rng rng(seed);
    Tensor t(shape);
    for (auto& v : t.values()) {
        // Clamp guards the float rounding of values drawn just below the limit.
        v = std::clamp(static_cast<float>(rng.uniform(-limit, limit)), static_cast<float>(-limit),
                       std::nextafter(static_cast<float>(limit), 0.0f));
    }
    return t;
}

void initialize_glorot(Network& net, std::uint64_t seed) {
    auto& params = net.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& t = params[i].value;
        if (t.rank() == 1) {
            t.fill(0.0f);
            continue;
        }
        std::size_t fan_in = 0, fan_out = 0;
        if (t.rank() == 4) {
            const std::size_t receptive = t.dim(2) * t.dim(3);
            fan_in = t.dim(1) * receptive;
            fan_out = t.dim(0) * receptive;
        } else {
            fan_in = t.dim(1);
            fan_out = t.dim(0);
        }
        t = glorot_uniform_init(t.shape(), fan_in, fan_out, mix_seed(seed, i));
    }
}

Network build_simplenet(Canvas canvas, std::size_t n_classes, float negative_slope, const SimpleNetPlan& plan,
                        std::uint64_t seed) {
    if (canvas.width < 32 || canvas.height < 32)
        throw ConfigError("the reference network needs a canvas of at least 32x32 pixels");
    if (plan.conv_channels.empty()) throw ConfigError("network plan needs at least one conv block");
    std::vector<LayerSpec> layers;
    for (std::size_t b = 0; b < plan.conv_channels.size(); ++b) {
        layers.push_back(LayerSpec::conv(plan.conv_channels[b], plan.kernel, 1, plan.kernel / 2));
        layers.push_back(LayerSpec::leaky_relu(negative_slope));
        if (std::find(plan.pool_after.begin(), plan.pool_after.end(), b + 1) != plan.pool_after.end())
            layers.push_back(LayerSpec::maxpool(2, 2));
    }
    layers.push_back(LayerSpec::flatten());
    for (std::size_t units : plan.dense_units) {
        layers.push_back(LayerSpec::dense(units));
        layers.push_back(LayerSpec::leaky_relu(negative_slope));
    }
    layers.push_back(LayerSpec::dense(n_classes));
    layers.push_back(LayerSpec::softmax());

    Network net({3, static_cast<std::size_t>(canvas.height), static_cast<std::size_t>(canvas.width)}, std::move(layers));
    initialize_glorot(net, seed);
    return net;
}

void write_sample(Tensor& batch, std::size_t index, const ImageBuffer& image) {
    const auto h = static_cast<std::size_t>(image.height());
    const auto w = static_cast<std::size_t>(image.width());
    if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != h || batch.dim(3) != w)
        throw ShapeError("image " + std::to_string(w) + "x" + std::to_string(h) + " does not match input " +
                         shape_string(batch.shape()));
    float* dst = batch.data() + index * 3 * h * w;
    const auto px = image.data();
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < h * w; ++i) dst[c * h * w + i] = px[i * 3 + c] / 255.0f - 0.5f;
}

Tensor image_to_tensor(const ImageBuffer& image) {
    Tensor t({1, 3, static_cast<std::size_t>(image.height()), static_cast<std::size_t>(image.width())});
    write_sample(t, 0, image);
    return t;
}

std::vector<float> predict(const Network& net, const ImageBuffer& image) {
    const Tensor probs = net.probabilities(image_to_tensor(image));
    return {probs.values().begin(), probs.values().end()};
}

int argmax(std::span<const float> values) {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace crowding::nn

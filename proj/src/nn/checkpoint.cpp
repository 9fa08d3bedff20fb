#include "crowding/nn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "crowding/error.hpp"

namespace crowding::nn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'R', 'W', 'D'};

class Writer {
public:
    void u32(std::uint32_t v) { raw(&v, 4); }
    void f32(float v) { raw(&v, 4); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
    void tensor(const std::string& name, const Tensor& t) {
        u32(static_cast<std::uint32_t>(name.size()));
        raw(name.data(), name.size());
        u32(static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) u32(static_cast<std::uint32_t>(d));
        raw(t.data(), t.size() * sizeof(float));
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::uint8_t* p, std::size_t n) : p_(p), end_(p + n) {}
    bool done() const { return p_ == end_; }
    std::uint32_t u32() {
        std::uint32_t v;
        take(&v, 4);
        return v;
    }
    void take(void* dst, std::size_t n) {
        if (static_cast<std::size_t>(end_ - p_) < n) throw FormatError("checkpoint is truncated");
        std::memcpy(dst, p_, n);
        p_ += n;
    }

private:
    const std::uint8_t* p_;
    const std::uint8_t* end_;
};

std::uint32_t crc32_of(const std::uint8_t* p, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(::crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

const Tensor& require(const std::map<std::string, const Tensor*>& by_name, const std::string& name) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing tensor " + name);
    return *it->second;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Network& net, const OptimizerState* state) {
    Writer body;
    const Shape& in = net.input_shape();
    body.tensor("meta.input", Tensor({3}, {static_cast<float>(in[0]), static_cast<float>(in[1]), static_cast<float>(in[2])}));

    const auto& layers = net.layers();
    Tensor spec({layers.size(), 6});
    Tensor mask({layers.size()});
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        const float row[6] = {static_cast<float>(l.kind), static_cast<float>(l.units), static_cast<float>(l.kernel),
                              static_cast<float>(l.stride), static_cast<float>(l.padding), l.negative_slope};
        std::memcpy(spec.data() + i * 6, row, sizeof row);
        mask[i] = net.trainable_mask()[i] ? 1.0f : 0.0f;
    }
    body.tensor("meta.layers", spec);
    body.tensor("meta.trainable", mask);
    for (const auto& p : net.parameters()) body.tensor(p.name, p.value);

    if (state) {
        if (state->m.size() != net.parameters().size() || state->v.size() != net.parameters().size())
            throw ShapeError("optimizer state does not match the network parameters");
        body.tensor("adam.hyper", Tensor({5}, {static_cast<float>(state->learning_rate), static_cast<float>(state->beta1),
                                               static_cast<float>(state->beta2), static_cast<float>(state->epsilon),
                                               static_cast<float>(state->step)}));
        for (std::size_t i = 0; i < net.parameters().size(); ++i) {
            body.tensor("adam.m/" + net.parameters()[i].name, state->m[i]);
            body.tensor("adam.v/" + net.parameters()[i].name, state->v[i]);
        }
    }

    Writer out;
    out.raw(kMagic, 4);
    out.u32(kCheckpointVersion);
    out.raw(body.bytes.data(), body.bytes.size());
    out.u32(crc32_of(body.bytes.data(), body.bytes.size()));
    return out.bytes;
}

std::vector<NamedTensor> decode_tensors(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12) throw FormatError("checkpoint is truncated");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint file (bad magic)");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + 4, 4);
    if (version != kCheckpointVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version));

    const std::size_t body_size = bytes.size() - 12;
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + 8 + body_size, 4);
    if (crc32_of(bytes.data() + 8, body_size) != stored_crc) throw FormatError("checkpoint CRC mismatch (corrupt or truncated)");

    std::vector<NamedTensor> out;
    Reader r(bytes.data() + 8, body_size);
    while (!r.done()) {
        const std::uint32_t name_len = r.u32();
        if (name_len > body_size) throw FormatError("checkpoint tensor name length is corrupt");
        std::string name(name_len, '\0');
        r.take(name.data(), name_len);
        const std::uint32_t rank = r.u32();
        if (rank > 8) throw FormatError("checkpoint tensor " + name + " has implausible rank");
        Shape shape(rank);
        std::size_t count = 1;
        for (auto& d : shape) {
            d = r.u32();
            count *= d;
        }
        if (count * sizeof(float) > body_size) throw FormatError("checkpoint tensor " + name + " exceeds file size");
        std::vector<float> data(count);
        r.take(data.data(), count * sizeof(float));
        out.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
    }
    return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    const auto tensors = decode_tensors(bytes);
    std::map<std::string, const Tensor*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t.tensor;

    const Tensor& input = require(by_name, "meta.input");
    const Tensor& spec = require(by_name, "meta.layers");
    const Tensor& mask = require(by_name, "meta.trainable");
    if (input.size() != 3 || spec.rank() != 2 || spec.dim(1) != 6 || mask.size() != spec.dim(0))
        throw FormatError("checkpoint graph metadata is inconsistent");

    std::vector<LayerSpec> layers;
    for (std::size_t i = 0; i < spec.dim(0); ++i) {
        const float* row = spec.data() + i * 6;
        if (row[0] < 0 || row[0] > static_cast<float>(LayerKind::Softmax)) throw FormatError("checkpoint has an unknown layer kind");
        layers.push_back({static_cast<LayerKind>(static_cast<int>(row[0])), static_cast<std::size_t>(row[1]),
                          static_cast<std::size_t>(row[2]), static_cast<std::size_t>(row[3]),
                          static_cast<std::size_t>(row[4]), row[5]});
    }

    Checkpoint ck;
    try {
        ck.network = Network({static_cast<std::size_t>(input[0]), static_cast<std::size_t>(input[1]),
                              static_cast<std::size_t>(input[2])},
                             std::move(layers));
    } catch (const ShapeError& e) {
        throw FormatError(std::string("checkpoint graph is inconsistent: ") + e.what());
    }
    for (std::size_t i = 0; i < mask.size(); ++i) ck.network.set_trainable(i, mask[i] != 0.0f);

    for (auto& p : ck.network.parameters()) {
        const Tensor& t = require(by_name, p.name);
        if (t.shape() != p.value.shape())
            throw FormatError("checkpoint tensor " + p.name + " has shape " + shape_string(t.shape()) + ", graph expects " +
                              shape_string(p.value.shape()));
        p.value = t;
    }

    if (by_name.count("adam.hyper")) {
        const Tensor& h = *by_name.at("adam.hyper");
        if (h.size() != 5) throw FormatError("checkpoint optimizer header is malformed");
        OptimizerState s;
        s.learning_rate = h[0];
        s.beta1 = h[1];
        s.beta2 = h[2];
        s.epsilon = h[3];
        s.step = static_cast<std::uint64_t>(h[4]);
        for (const auto& p : ck.network.parameters()) {
            const Tensor& m = require(by_name, "adam.m/" + p.name);
            const Tensor& v = require(by_name, "adam.v/" + p.name);
            if (m.shape() != p.value.shape() || v.shape() != p.value.shape())
                throw FormatError("checkpoint optimizer moments for " + p.name + " have the wrong shape");
            s.m.push_back(m);
            s.v.push_back(v);
        }
        ck.optimizer = std::move(s);
    }
    return ck;
}

void save_checkpoint(const Network& net, const OptimizerState* state, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(net, state);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace crowding::nn

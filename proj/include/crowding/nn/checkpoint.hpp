#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crowding/nn/adam.hpp"
#include "crowding/nn/network.hpp"

namespace crowding::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Little-endian layout:
///   "CRWD" | u32 version | body | u32 CRC32(body)
/// where body is a sequence of named tensors, each
///   u32 name length | UTF-8 name | u32 rank | u32 dims[rank] | f32 payload.
/// The graph is stored as tensors too: meta.input [C,H,W], meta.layers
/// [L,6] (kind, units, kernel, stride, padding, slope), meta.trainable [L].
/// Optimizer state, when present, is adam.hyper [lr, beta1, beta2, eps, step]
/// plus adam.m/<param> and adam.v/<param>.
struct Checkpoint {
    Network network;
    std::optional<OptimizerState> optimizer;
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

std::vector<std::uint8_t> encode_checkpoint(const Network& net, const OptimizerState* state = nullptr);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

/// Raw tensor list of a checkpoint after magic/version/CRC validation.
std::vector<NamedTensor> decode_tensors(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const Network& net, const OptimizerState* state, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace crowding::nn

#pragma once

#include <cstdint>
#include <string>

#include "bridgegan/model.hpp"

namespace bridgegan {

// Binary checkpoint, magic "BGCK" version 1: architecture string, iteration,
// config hash, rng states, then every named parameter with its Adam state.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
    ModelConfig arch;
    std::uint64_t iteration = 0;
    std::uint64_t config_hash = 0;
    std::string data_rng_state;
};

void save_checkpoint(const std::string& path, BridgeGAN& net,
                     std::uint64_t iteration, std::uint64_t config_hash,
                     const std::string& data_rng_state);

// Restores parameters, Adam state and the model's noise rng into net.
// Refuses (input_error) on bad magic, version mismatch, or an architecture
// that does not match net's.
CheckpointInfo load_checkpoint(const std::string& path, BridgeGAN& net);

// Reads only the header, so a caller can construct a matching model first.
CheckpointInfo peek_checkpoint(const std::string& path);

}  // namespace bridgegan

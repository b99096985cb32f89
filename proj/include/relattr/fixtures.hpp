#pragma once

#include <cstdint>
#include <filesystem>

#include "relattr/model.hpp"

namespace relattr {

inline constexpr std::uint64_t kResnetMiniSeed = 20240;

/// Single dense layer, w=[1,2], b=0. The smallest useful model.
Model make_tiny_linear();

/// Deterministic 2-residual-block 1-D CNN (8/16 channels) on 4096x12
/// input with 6 outputs. All biases, BN shifts and BN means are zero, so
/// the batch-norm-folded model is bias-free. Same seed, same weights.
Model make_resnet_mini(std::uint64_t seed = kResnetMiniSeed);

/// Hand-weighted single-filter model whose score tracks P-bump energy in
/// lead II: a zero-mean P-shaped matched filter, ReLU, max-pooling and an
/// averaging dense layer. No trained weights anywhere.
Model make_pwave_scorer();

/// Writes `per_class` synthetic recordings for each of Normal/AF/LBBB
/// plus a manifest; returns the manifest path. Deterministic per seed.
std::filesystem::path write_synth_dataset(const std::filesystem::path& dir, int per_class, std::uint64_t seed);

}  // namespace relattr

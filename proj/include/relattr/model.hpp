#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "relattr/tensor.hpp"

namespace relattr {

enum class LayerKind { Conv1D, Dense, BatchNorm, ReLU, MaxPool1D, ResidualAdd, Flatten, OutputActivation };

enum class PaddingMode { Same, Valid };

enum class OutputMode { Sigmoid, Linear };

const char* layer_kind_name(LayerKind kind);

struct Conv1DParams {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    std::int64_t kernel = 0;
    std::int64_t stride = 1;
    PaddingMode padding = PaddingMode::Same;
    std::vector<double> weights;  // [out_channel][in_channel][tap], row-major
    std::vector<double> bias;     // [out_channel]

    double w(std::int64_t oc, std::int64_t ic, std::int64_t t) const {
        return weights[static_cast<std::size_t>((oc * in_channels + ic) * kernel + t)];
    }
    double& w(std::int64_t oc, std::int64_t ic, std::int64_t t) {
        return weights[static_cast<std::size_t>((oc * in_channels + ic) * kernel + t)];
    }
};

struct DenseParams {
    std::int64_t in_dim = 0;
    std::int64_t out_dim = 0;
    std::vector<double> weights;  // [out][in], row-major
    std::vector<double> bias;     // [out]

    double w(std::int64_t o, std::int64_t i) const { return weights[static_cast<std::size_t>(o * in_dim + i)]; }
    double& w(std::int64_t o, std::int64_t i) { return weights[static_cast<std::size_t>(o * in_dim + i)]; }
};

struct BatchNormParams {
    std::vector<double> scale;
    std::vector<double> shift;
    std::vector<double> mean;
    std::vector<double> variance;
    double epsilon = 1e-3;
};

struct MaxPool1DParams {
    std::int64_t width = 0;
    std::int64_t stride = 0;  // 0 means width
    std::int64_t effective_stride() const { return stride > 0 ? stride : width; }
};

struct OutputActivationParams {
    OutputMode mode = OutputMode::Sigmoid;
};

using LayerParams = std::variant<std::monostate, Conv1DParams, DenseParams, BatchNormParams, MaxPool1DParams,
                                 OutputActivationParams>;

struct Layer {
    LayerKind kind = LayerKind::ReLU;
    std::vector<int> inputs;  // indices of predecessor layers; -1 is the model input
    LayerParams params;

    const Conv1DParams& conv() const { return std::get<Conv1DParams>(params); }
    const DenseParams& dense() const { return std::get<DenseParams>(params); }
    const BatchNormParams& bn() const { return std::get<BatchNormParams>(params); }
    const MaxPool1DParams& pool() const { return std::get<MaxPool1DParams>(params); }
    const OutputActivationParams& output_activation() const { return std::get<OutputActivationParams>(params); }
};

struct Model {
    std::string name;
    int version = 1;
    std::uint64_t seed = 0;
    std::vector<std::int64_t> input_shape;
    std::int64_t output_dim = 0;
    std::vector<std::string> class_names;
    std::vector<Layer> layers;
};

std::int64_t conv_output_length(std::int64_t in_len, std::int64_t kernel, std::int64_t stride, PaddingMode padding);

/// Left zero-padding implied by "same" mode (TensorFlow split: pad_left = total/2).
std::int64_t conv_pad_left(std::int64_t in_len, std::int64_t out_len, std::int64_t kernel, std::int64_t stride,
                           PaddingMode padding);

/// Output shape of every layer, in layer order. Throws ShapeError /
/// ValidationError naming the offending layer index.
std::vector<std::vector<std::int64_t>> infer_shapes(const Model& model);

/// Full structural validation: ref ordering (acyclicity), parameter shape
/// consistency, BN variance positivity, ResidualAdd arity/shapes, and a
/// finite forward pass on an all-zeros input.
void validate_model(const Model& model);

}  // namespace relattr

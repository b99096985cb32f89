#include "relattr/model.hpp"

#include <string>

#include "relattr/engine.hpp"
#include "relattr/errors.hpp"

namespace relattr {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Conv1D: return "conv1d";
        case LayerKind::Dense: return "dense";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::ReLU: return "relu";
        case LayerKind::MaxPool1D: return "maxpool1d";
        case LayerKind::ResidualAdd: return "residual_add";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::OutputActivation: return "output_activation";
    }
    return "?";
}

std::int64_t conv_output_length(std::int64_t in_len, std::int64_t kernel, std::int64_t stride, PaddingMode padding) {
    if (padding == PaddingMode::Same) {
        return (in_len + stride - 1) / stride;
    }
    return (in_len - kernel) / stride + 1;
}

std::int64_t conv_pad_left(std::int64_t in_len, std::int64_t out_len, std::int64_t kernel, std::int64_t stride,
                           PaddingMode padding) {
    if (padding == PaddingMode::Valid) return 0;
    const std::int64_t total = std::max<std::int64_t>(0, (out_len - 1) * stride + kernel - in_len);
    return total / 2;
}

namespace {

[[noreturn]] void fail(const char* what, std::size_t layer_index, const std::string& detail) {
    throw ValidationError(std::string(what) + " at layer " + std::to_string(layer_index) + ": " + detail);
}

}  // namespace

std::vector<std::vector<std::int64_t>> infer_shapes(const Model& model) {
    if (model.input_shape.empty()) throw ValidationError("model has no input shape");
    if (model.layers.empty()) throw ValidationError("model has no layers");

    std::vector<std::vector<std::int64_t>> shapes(model.layers.size());
    auto shape_of = [&](int ref, std::size_t i) -> const std::vector<std::int64_t>& {
        if (ref == -1) return model.input_shape;
        if (ref < -1 || ref >= static_cast<int>(i)) {
            fail("input ref out of order", i, "ref " + std::to_string(ref));
        }
        return shapes[static_cast<std::size_t>(ref)];
    };

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        const std::size_t arity = layer.kind == LayerKind::ResidualAdd ? 2 : 1;
        if (layer.inputs.size() != arity) {
            fail("wrong input count", i, std::to_string(layer.inputs.size()) + " refs");
        }
        const auto& in = shape_of(layer.inputs[0], i);

        switch (layer.kind) {
            case LayerKind::Conv1D: {
                const auto& p = layer.conv();
                if (in.size() != 2) fail("conv1d needs rank-2 input", i, "got rank " + std::to_string(in.size()));
                if (in[1] != p.in_channels) {
                    fail("conv1d channel mismatch", i,
                         "input has " + std::to_string(in[1]) + ", layer declares " + std::to_string(p.in_channels));
                }
                if (p.kernel <= 0 || p.stride <= 0) fail("conv1d bad kernel/stride", i, "");
                if (static_cast<std::int64_t>(p.weights.size()) != p.out_channels * p.in_channels * p.kernel) {
                    fail("conv1d weight size mismatch", i, std::to_string(p.weights.size()) + " values");
                }
                if (static_cast<std::int64_t>(p.bias.size()) != p.out_channels) {
                    fail("conv1d bias size mismatch", i, std::to_string(p.bias.size()) + " values");
                }
                const std::int64_t out_len = conv_output_length(in[0], p.kernel, p.stride, p.padding);
                if (out_len <= 0) fail("conv1d output would be empty", i, "");
                shapes[i] = {out_len, p.out_channels};
                break;
            }
            case LayerKind::Dense: {
                const auto& p = layer.dense();
                if (in.size() != 1) fail("dense needs rank-1 input", i, "got rank " + std::to_string(in.size()));
                if (in[0] != p.in_dim) {
                    fail("dense input size mismatch", i,
                         "input has " + std::to_string(in[0]) + ", layer declares " + std::to_string(p.in_dim));
                }
                if (static_cast<std::int64_t>(p.weights.size()) != p.out_dim * p.in_dim) {
                    fail("dense weight size mismatch", i, std::to_string(p.weights.size()) + " values");
                }
                if (static_cast<std::int64_t>(p.bias.size()) != p.out_dim) {
                    fail("dense bias size mismatch", i, std::to_string(p.bias.size()) + " values");
                }
                shapes[i] = {p.out_dim};
                break;
            }
            case LayerKind::BatchNorm: {
                const auto& p = layer.bn();
                const std::int64_t channels = in.size() == 2 ? in[1] : in[0];
                const auto n = static_cast<std::size_t>(channels);
                if (p.scale.size() != n || p.shift.size() != n || p.mean.size() != n || p.variance.size() != n) {
                    fail("batchnorm parameter size mismatch", i, "expected " + std::to_string(channels) + " per array");
                }
                for (double v : p.variance) {
                    if (!(v > 0.0)) fail("batchnorm variance must be strictly positive", i, std::to_string(v));
                }
                shapes[i] = in;
                break;
            }
            case LayerKind::ReLU: shapes[i] = in; break;
            case LayerKind::MaxPool1D: {
                const auto& p = layer.pool();
                if (in.size() != 2) fail("maxpool1d needs rank-2 input", i, "");
                if (p.width <= 0) fail("maxpool1d bad width", i, "");
                const std::int64_t out_len = (in[0] - p.width) / p.effective_stride() + 1;
                if (out_len <= 0) fail("maxpool1d output would be empty", i, "");
                shapes[i] = {out_len, in[1]};
                break;
            }
            case LayerKind::ResidualAdd: {
                const auto& rhs = shape_of(layer.inputs[1], i);
                if (in != rhs) fail("residual_add branch shapes differ", i, "");
                shapes[i] = in;
                break;
            }
            case LayerKind::Flatten: {
                std::int64_t n = 1;
                for (std::int64_t d : in) n *= d;
                shapes[i] = {n};
                break;
            }
            case LayerKind::OutputActivation: shapes[i] = in; break;
        }
    }
    return shapes;
}

void validate_model(const Model& model) {
    const auto shapes = infer_shapes(model);
    const auto& out = shapes.back();
    if (out.size() != 1 || out[0] != model.output_dim) {
        throw ValidationError("model output shape does not match declared output_dim " +
                              std::to_string(model.output_dim));
    }
    if (!model.class_names.empty() && static_cast<std::int64_t>(model.class_names.size()) != model.output_dim) {
        throw ValidationError("class_names count does not match output_dim");
    }
    // Terminates and stays finite on an all-zeros input.
    const ForwardTrace trace = forward(model, Tensor::zeros(model.input_shape));
    for (const Tensor& t : trace.outputs) {
        if (!t.all_finite()) throw ValidationError("forward pass on zeros produced non-finite values");
    }
}

}  // namespace relattr

#include "relattr/model_io.hpp"

#include <fstream>
#include <json.hpp>
#include <string>

#include "relattr/errors.hpp"

namespace relattr {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "relattr-model";

json conv_weights_to_json(const Conv1DParams& p) {
    json ocs = json::array();
    for (std::int64_t oc = 0; oc < p.out_channels; ++oc) {
        json ics = json::array();
        for (std::int64_t ic = 0; ic < p.in_channels; ++ic) {
            json taps = json::array();
            for (std::int64_t t = 0; t < p.kernel; ++t) taps.push_back(p.w(oc, ic, t));
            ics.push_back(std::move(taps));
        }
        ocs.push_back(std::move(ics));
    }
    return ocs;
}

json dense_weights_to_json(const DenseParams& p) {
    json rows = json::array();
    for (std::int64_t o = 0; o < p.out_dim; ++o) {
        json row = json::array();
        for (std::int64_t i = 0; i < p.in_dim; ++i) row.push_back(p.w(o, i));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> number_list(const json& j, const char* field, std::size_t layer_index) {
    if (!j.is_array()) {
        throw ParseError("layer " + std::to_string(layer_index) + ": " + field + " must be an array");
    }
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number()) {
            throw ParseError("layer " + std::to_string(layer_index) + ": " + field + " contains a non-number");
        }
        out.push_back(v.get<double>());
    }
    return out;
}

Layer layer_from_json(const json& j, std::size_t index) {
    auto require = [&](const char* field) -> const json& {
        auto it = j.find(field);
        if (it == j.end()) {
            throw ParseError("layer " + std::to_string(index) + ": missing field '" + field + "'");
        }
        return *it;
    };

    Layer layer;
    const std::string kind = require("kind").get<std::string>();
    for (const auto& ref : require("inputs")) layer.inputs.push_back(ref.get<int>());

    if (kind == "conv1d") {
        layer.kind = LayerKind::Conv1D;
        Conv1DParams p;
        p.in_channels = require("in_channels").get<std::int64_t>();
        p.out_channels = require("out_channels").get<std::int64_t>();
        p.kernel = require("kernel").get<std::int64_t>();
        p.stride = j.value("stride", std::int64_t{1});
        const std::string pad = j.value("padding", std::string("same"));
        if (pad == "same") {
            p.padding = PaddingMode::Same;
        } else if (pad == "valid") {
            p.padding = PaddingMode::Valid;
        } else {
            throw ParseError("layer " + std::to_string(index) + ": unknown padding '" + pad + "'");
        }
        const json& w = require("weights");
        p.weights.reserve(static_cast<std::size_t>(p.out_channels * p.in_channels * p.kernel));
        for (const auto& ocs : w) {
            for (const auto& ics : ocs) {
                for (const auto& tap : ics) p.weights.push_back(tap.get<double>());
            }
        }
        p.bias = number_list(require("bias"), "bias", index);
        layer.params = std::move(p);
    } else if (kind == "dense") {
        layer.kind = LayerKind::Dense;
        DenseParams p;
        p.in_dim = require("in_dim").get<std::int64_t>();
        p.out_dim = require("out_dim").get<std::int64_t>();
        const json& w = require("weights");
        p.weights.reserve(static_cast<std::size_t>(p.out_dim * p.in_dim));
        for (const auto& row : w) {
            for (const auto& v : row) p.weights.push_back(v.get<double>());
        }
        p.bias = number_list(require("bias"), "bias", index);
        layer.params = std::move(p);
    } else if (kind == "batchnorm") {
        layer.kind = LayerKind::BatchNorm;
        BatchNormParams p;
        p.scale = number_list(require("scale"), "scale", index);
        p.shift = number_list(require("shift"), "shift", index);
        p.mean = number_list(require("mean"), "mean", index);
        p.variance = number_list(require("variance"), "variance", index);
        p.epsilon = j.value("epsilon", 1e-3);
        layer.params = std::move(p);
    } else if (kind == "relu") {
        layer.kind = LayerKind::ReLU;
    } else if (kind == "maxpool1d") {
        layer.kind = LayerKind::MaxPool1D;
        MaxPool1DParams p;
        p.width = require("width").get<std::int64_t>();
        p.stride = j.value("stride", std::int64_t{0});
        layer.params = p;
    } else if (kind == "residual_add") {
        layer.kind = LayerKind::ResidualAdd;
    } else if (kind == "flatten") {
        layer.kind = LayerKind::Flatten;
    } else if (kind == "output_activation") {
        layer.kind = LayerKind::OutputActivation;
        OutputActivationParams p;
        const std::string mode = j.value("mode", std::string("sigmoid"));
        if (mode == "sigmoid") {
            p.mode = OutputMode::Sigmoid;
        } else if (mode == "linear") {
            p.mode = OutputMode::Linear;
        } else {
            throw ParseError("layer " + std::to_string(index) + ": unknown output mode '" + mode + "'");
        }
        layer.params = p;
    } else {
        throw ParseError("layer " + std::to_string(index) + ": unknown kind '" + kind + "'");
    }
    return layer;
}

json layer_to_json(const Layer& layer) {
    json j;
    j["kind"] = layer_kind_name(layer.kind);
    j["inputs"] = layer.inputs;
    switch (layer.kind) {
        case LayerKind::Conv1D: {
            const auto& p = layer.conv();
            j["in_channels"] = p.in_channels;
            j["out_channels"] = p.out_channels;
            j["kernel"] = p.kernel;
            j["stride"] = p.stride;
            j["padding"] = p.padding == PaddingMode::Same ? "same" : "valid";
            j["weights"] = conv_weights_to_json(p);
            j["bias"] = p.bias;
            break;
        }
        case LayerKind::Dense: {
            const auto& p = layer.dense();
            j["in_dim"] = p.in_dim;
            j["out_dim"] = p.out_dim;
            j["weights"] = dense_weights_to_json(p);
            j["bias"] = p.bias;
            break;
        }
        case LayerKind::BatchNorm: {
            const auto& p = layer.bn();
            j["scale"] = p.scale;
            j["shift"] = p.shift;
            j["mean"] = p.mean;
            j["variance"] = p.variance;
            j["epsilon"] = p.epsilon;
            break;
        }
        case LayerKind::MaxPool1D:
            j["width"] = layer.pool().width;
            j["stride"] = layer.pool().stride;
            break;
        case LayerKind::OutputActivation:
            j["mode"] = layer.output_activation().mode == OutputMode::Sigmoid ? "sigmoid" : "linear";
            break;
        default: break;
    }
    return j;
}

}  // namespace

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file: " + path.string());

    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw ParseError("model file " + path.string() + ": " + e.what());
    }

    try {
        if (j.value("format", std::string()) != kFormat) {
            throw ParseError("model file " + path.string() + ": missing or wrong format marker");
        }
        Model model;
        model.version = j.value("version", 1);
        model.name = j.value("name", std::string());
        model.seed = j.value("seed", std::uint64_t{0});
        model.input_shape = j.at("input_shape").get<std::vector<std::int64_t>>();
        model.output_dim = j.at("output_dim").get<std::int64_t>();
        if (j.contains("class_names")) {
            model.class_names = j["class_names"].get<std::vector<std::string>>();
        }
        const json& layers = j.at("layers");
        for (std::size_t i = 0; i < layers.size(); ++i) {
            model.layers.push_back(layer_from_json(layers[i], i));
        }
        validate_model(model);
        return model;
    } catch (const json::exception& e) {
        throw ParseError("model file " + path.string() + ": " + e.what());
    }
}

void save_model(const Model& model, const std::filesystem::path& path) {
    json j;
    j["format"] = kFormat;
    j["version"] = model.version;
    j["name"] = model.name;
    j["seed"] = model.seed;
    j["input_shape"] = model.input_shape;
    j["output_dim"] = model.output_dim;
    if (!model.class_names.empty()) j["class_names"] = model.class_names;
    json layers = json::array();
    for (const Layer& layer : model.layers) layers.push_back(layer_to_json(layer));
    j["layers"] = std::move(layers);

    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file: " + path.string());
    out << j.dump(1) << "\n";
    if (!out) throw IoError("failed writing model file: " + path.string());
}

}  // namespace relattr

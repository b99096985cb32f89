#include "relattr/fixtures.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "relattr/io.hpp"
#include "relattr/rng.hpp"
#include "relattr/signal.hpp"

namespace relattr {

namespace {

Layer conv_layer(int input, std::int64_t ic, std::int64_t oc, std::int64_t kernel, std::int64_t stride,
                 PaddingMode padding, Rng& rng) {
    Conv1DParams p;
    p.in_channels = ic;
    p.out_channels = oc;
    p.kernel = kernel;
    p.stride = stride;
    p.padding = padding;
    const double sigma = std::sqrt(2.0 / static_cast<double>(ic * kernel));
    p.weights.resize(static_cast<std::size_t>(oc * ic * kernel));
    for (double& w : p.weights) w = rng.normal(0.0, sigma);
    p.bias.assign(static_cast<std::size_t>(oc), 0.0);
    Layer layer;
    layer.kind = LayerKind::Conv1D;
    layer.inputs = {input};
    layer.params = std::move(p);
    return layer;
}

Layer bn_layer(int input, std::int64_t channels, Rng& rng) {
    BatchNormParams p;
    const auto n = static_cast<std::size_t>(channels);
    p.scale.resize(n);
    p.variance.resize(n);
    for (std::size_t c = 0; c < n; ++c) p.scale[c] = rng.uniform(0.8, 1.25);
    for (std::size_t c = 0; c < n; ++c) p.variance[c] = rng.uniform(0.5, 1.5);
    p.shift.assign(n, 0.0);
    p.mean.assign(n, 0.0);
    p.epsilon = 1e-3;
    Layer layer;
    layer.kind = LayerKind::BatchNorm;
    layer.inputs = {input};
    layer.params = std::move(p);
    return layer;
}

Layer plain_layer(LayerKind kind, std::vector<int> inputs) {
    Layer layer;
    layer.kind = kind;
    layer.inputs = std::move(inputs);
    return layer;
}

Layer pool_layer(int input, std::int64_t width, std::int64_t stride) {
    Layer layer;
    layer.kind = LayerKind::MaxPool1D;
    layer.inputs = {input};
    layer.params = MaxPool1DParams{width, stride};
    return layer;
}

Layer output_layer(int input, OutputMode mode) {
    Layer layer;
    layer.kind = LayerKind::OutputActivation;
    layer.inputs = {input};
    layer.params = OutputActivationParams{mode};
    return layer;
}

}  // namespace

Model make_tiny_linear() {
    Model model;
    model.name = "tiny_linear";
    model.input_shape = {2};
    model.output_dim = 1;
    DenseParams p;
    p.in_dim = 2;
    p.out_dim = 1;
    p.weights = {1.0, 2.0};
    p.bias = {0.0};
    Layer layer;
    layer.kind = LayerKind::Dense;
    layer.inputs = {-1};
    layer.params = std::move(p);
    model.layers.push_back(std::move(layer));
    return model;
}

Model make_resnet_mini(std::uint64_t seed) {
    Rng rng(seed);
    Model model;
    model.name = "resnet_mini";
    model.seed = seed;
    model.input_shape = {4096, 12};
    model.output_dim = 6;
    model.class_names = {"1dAVb", "RBBB", "LBBB", "SB", "AF", "ST"};

    auto& L = model.layers;
    L.push_back(conv_layer(-1, 12, 8, 8, 8, PaddingMode::Same, rng));  // 0: 512x8
    L.push_back(bn_layer(0, 8, rng));                                  // 1
    L.push_back(plain_layer(LayerKind::ReLU, {1}));                    // 2
    // residual block 1: 8 -> 8 channels, /4
    L.push_back(conv_layer(2, 8, 8, 8, 1, PaddingMode::Same, rng));    // 3: 512x8
    L.push_back(bn_layer(3, 8, rng));                                  // 4
    L.push_back(plain_layer(LayerKind::ReLU, {4}));                    // 5
    L.push_back(conv_layer(5, 8, 8, 8, 4, PaddingMode::Same, rng));    // 6: 128x8
    L.push_back(pool_layer(2, 4, 4));                                  // 7: 128x8 (skip)
    L.push_back(plain_layer(LayerKind::ResidualAdd, {6, 7}));          // 8
    L.push_back(plain_layer(LayerKind::ReLU, {8}));                    // 9
    // residual block 2: 8 -> 16 channels, /4
    L.push_back(conv_layer(9, 8, 16, 8, 1, PaddingMode::Same, rng));   // 10: 128x16
    L.push_back(bn_layer(10, 16, rng));                                // 11
    L.push_back(plain_layer(LayerKind::ReLU, {11}));                   // 12
    L.push_back(conv_layer(12, 16, 16, 8, 4, PaddingMode::Same, rng)); // 13: 32x16
    L.push_back(conv_layer(9, 8, 16, 1, 1, PaddingMode::Valid, rng));  // 14: 128x16 (skip 1x1)
    L.push_back(pool_layer(14, 4, 4));                                 // 15: 32x16
    L.push_back(plain_layer(LayerKind::ResidualAdd, {13, 15}));        // 16
    L.push_back(plain_layer(LayerKind::ReLU, {16}));                   // 17
    L.push_back(plain_layer(LayerKind::Flatten, {17}));                // 18: 512

    DenseParams dense;
    dense.in_dim = 512;
    dense.out_dim = 6;
    dense.weights.resize(static_cast<std::size_t>(dense.in_dim * dense.out_dim));
    const double dense_sigma = std::sqrt(1.0 / static_cast<double>(dense.in_dim));
    for (double& w : dense.weights) w = rng.normal(0.0, dense_sigma);
    dense.bias.assign(6, 0.0);
    Layer dense_layer;
    dense_layer.kind = LayerKind::Dense;
    dense_layer.inputs = {18};
    dense_layer.params = std::move(dense);
    L.push_back(std::move(dense_layer));                               // 19
    L.push_back(output_layer(19, OutputMode::Sigmoid));                // 20
    return model;
}

Model make_pwave_scorer() {
    Model model;
    model.name = "pwave_scorer";
    model.input_shape = {4096, 12};
    model.output_dim = 1;
    model.class_names = {"PWave"};

    // Zero-mean Gaussian matched to the P-bump width (sigma 8 samples at
    // 400 Hz) on lead II only; the zero mean rejects baseline offsets.
    Conv1DParams conv;
    conv.in_channels = 12;
    conv.out_channels = 1;
    conv.kernel = 33;
    conv.stride = 4;
    conv.padding = PaddingMode::Valid;
    conv.weights.assign(static_cast<std::size_t>(12 * 33), 0.0);
    conv.bias = {0.0};
    std::vector<double> g(33);
    double g_sum = 0.0;
    for (int t = 0; t < 33; ++t) {
        g[static_cast<std::size_t>(t)] = std::exp(-std::pow(t - 16.0, 2) / (2.0 * 8.0 * 8.0));
        g_sum += g[static_cast<std::size_t>(t)];
    }
    const double g_mean = g_sum / 33.0;
    for (int t = 0; t < 33; ++t) {
        conv.weights[static_cast<std::size_t>(1 * 33 + t)] = g[static_cast<std::size_t>(t)] - g_mean;
    }
    Layer conv_l;
    conv_l.kind = LayerKind::Conv1D;
    conv_l.inputs = {-1};
    conv_l.params = std::move(conv);
    model.layers.push_back(std::move(conv_l));                 // 0: 1016x1
    model.layers.push_back(plain_layer(LayerKind::ReLU, {0})); // 1
    model.layers.push_back(pool_layer(1, 8, 8));               // 2: 127x1
    model.layers.push_back(plain_layer(LayerKind::Flatten, {2}));  // 3

    DenseParams dense;
    dense.in_dim = 127;
    dense.out_dim = 1;
    dense.weights.assign(127, 4.0 / 127.0);
    dense.bias = {0.0};
    Layer dense_l;
    dense_l.kind = LayerKind::Dense;
    dense_l.inputs = {3};
    dense_l.params = std::move(dense);
    model.layers.push_back(std::move(dense_l));                // 4
    model.layers.push_back(output_layer(4, OutputMode::Sigmoid));  // 5
    return model;
}

std::filesystem::path write_synth_dataset(const std::filesystem::path& dir, int per_class, std::uint64_t seed) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "recordings");

    DatasetManifest manifest;
    const RhythmClass classes[] = {RhythmClass::Normal, RhythmClass::AF, RhythmClass::LBBB};
    int index = 0;
    for (RhythmClass cls : classes) {
        for (int i = 0; i < per_class; ++i, ++index) {
            SynthConfig config;
            config.mode = cls;
            config.seed = seed + static_cast<std::uint64_t>(index);
            Rng knobs(config.seed ^ 0x9e3779b97f4a7c15ULL);
            config.bpm = cls == RhythmClass::AF ? knobs.uniform(70.0, 130.0) : knobs.uniform(50.0, 95.0);
            config.noise_mv = knobs.uniform(0.01, 0.04);

            char id[32];
            std::snprintf(id, sizeof(id), "rec-%06d", index);
            const SynthEcg synth = synth_ecg(config);
            EcgRecording rec = synth.recording;
            rec.id = id;

            const fs::path rel = fs::path("recordings") / (std::string(id) + ".ecg");
            write_recording(rec, dir / rel);
            manifest.entries.push_back({id, rel, cls});
        }
    }
    const fs::path manifest_path = dir / "manifest.csv";
    write_manifest(manifest, manifest_path);
    return manifest_path;
}

}  // namespace relattr

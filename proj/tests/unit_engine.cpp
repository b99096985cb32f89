#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "relattr/engine.hpp"
#include "relattr/errors.hpp"
#include "relattr/fixtures.hpp"
#include "relattr/model_io.hpp"
#include "relattr/rng.hpp"
#include "test_models.hpp"

using namespace relattr;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "relattr_engine_tests";
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("tensor basics") {
    Tensor t({2, 3});
    CHECK(t.numel() == 6);
    t.at(1, 2) = 5.0;
    CHECK(t[5] == 5.0);
    CHECK(t.all_finite());
    CHECK_THROWS_AS(Tensor({0}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({2}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("tiny_linear forward gives the dot product") {
    const Model m = make_tiny_linear();
    const ForwardTrace trace = forward(m, Tensor({2}, {3.0, 4.0}));
    CHECK(trace.linear_scores[0] == doctest::Approx(11.0).epsilon(1e-15));

    // sigmoid of linear score 0 is exactly one half
    const ForwardTrace zero = forward(m, Tensor({2}, {2.0, -1.0}));
    CHECK(zero.linear_scores[0] == doctest::Approx(0.0));
    CHECK(zero.probabilities[0] == doctest::Approx(0.5));
}

TEST_CASE("forward rejects a wrong input shape") {
    const Model m = make_tiny_linear();
    CHECK_THROWS_AS(forward(m, Tensor({3}, {1.0, 2.0, 3.0})), ShapeError);
}

TEST_CASE("validation flags zero batchnorm variance with the layer index") {
    Model m = testmodels::micro("batchnorm");
    std::get<BatchNormParams>(m.layers[1].params).variance[0] = 0.0;
    CHECK_THROWS_WITH_AS(validate_model(m), doctest::Contains("layer 1"), ValidationError);
}

TEST_CASE("validation rejects forward references") {
    Model m = testmodels::micro("dense");
    m.layers[0].inputs = {2};
    CHECK_THROWS_AS(validate_model(m), ValidationError);
}

TEST_CASE("resnet_mini matches the straight-line forward oracle") {
    const Model m = make_resnet_mini();
    const Tensor x = testmodels::random_input(m, 101);
    const ForwardTrace trace = forward(m, x);
    const auto naive = oracle::naive_forward(m, x);
    REQUIRE(naive.size() == trace.outputs.size());
    for (std::size_t i = 0; i < naive.size(); ++i) {
        REQUIRE(naive[i].numel() == trace.outputs[i].numel());
        for (std::int64_t k = 0; k < naive[i].numel(); ++k) {
            CHECK(trace.outputs[i][k] == doctest::Approx(naive[i][k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward is deterministic bit for bit") {
    const Model m = make_resnet_mini();
    const Tensor x = testmodels::random_input(m, 7);
    const ForwardTrace a = forward(m, x);
    const ForwardTrace b = forward(m, x);
    for (std::size_t i = 0; i < a.outputs.size(); ++i) {
        CHECK(a.outputs[i].values() == b.outputs[i].values());
    }
}

TEST_CASE("sigmoid keeps the class ranking of the linear scores") {
    const Model m = make_resnet_mini();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ForwardTrace trace = forward(m, testmodels::random_input(m, 300 + seed));
        for (std::size_t a = 0; a < trace.linear_scores.size(); ++a) {
            for (std::size_t b = 0; b < trace.linear_scores.size(); ++b) {
                CHECK((trace.linear_scores[a] < trace.linear_scores[b]) ==
                      (trace.probabilities[a] < trace.probabilities[b]));
            }
        }
    }
}

TEST_CASE("gradient of tiny_linear is the weight vector for any input") {
    const Model m = make_tiny_linear();
    for (auto x : {Tensor({2}, {3.0, 4.0}), Tensor({2}, {-1.0, 0.25})}) {
        const Tensor g = gradient(m, x, 0);
        CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-15));
    }
}

TEST_CASE("dead relu network has zero gradient") {
    Model m;
    m.input_shape = {3};
    m.output_dim = 1;
    DenseParams d1;
    d1.in_dim = 3;
    d1.out_dim = 2;
    d1.weights = {1.0, 1.0, 1.0, 2.0, 2.0, 2.0};
    d1.bias = {-100.0, -100.0};  // all pre-activations negative for small inputs
    Layer l1;
    l1.kind = LayerKind::Dense;
    l1.inputs = {-1};
    l1.params = d1;
    m.layers.push_back(l1);
    m.layers.push_back(testmodels::plain(LayerKind::ReLU, {0}));
    DenseParams d2;
    d2.in_dim = 2;
    d2.out_dim = 1;
    d2.weights = {1.0, 1.0};
    d2.bias = {0.0};
    Layer l2;
    l2.kind = LayerKind::Dense;
    l2.inputs = {1};
    l2.params = d2;
    m.layers.push_back(l2);

    const Tensor g = gradient(m, Tensor({3}, {1.0, 2.0, 3.0}), 0);
    for (std::int64_t i = 0; i < 3; ++i) CHECK(g[i] == 0.0);
}

TEST_CASE("gradient rejects an invalid class index") {
    const Model m = make_tiny_linear();
    CHECK_THROWS_AS(gradient(m, Tensor({2}, {1.0, 1.0}), 3), ConfigError);
}

TEST_CASE("analytic gradient matches central finite differences per layer kind") {
    for (const char* kind : {"conv_same", "conv_valid", "dense", "batchnorm", "relu", "maxpool", "residual"}) {
        CAPTURE(kind);
        const Model m = testmodels::micro(kind);
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const Tensor x = testmodels::random_input(m, 50 + seed);
            const Tensor g = gradient(m, x, 1);
            const Tensor fd = oracle::finite_difference_gradient(m, x, 1);
            CHECK(oracle::max_rel_error(g, fd) < 1e-4);
        }
    }
}

TEST_CASE("sigmoid-mode gradient matches finite differences of the probability") {
    const Model m = testmodels::micro("output_sigmoid");
    const Tensor x = testmodels::random_input(m, 5);
    const Tensor g = gradient(m, x, 0, OutputMode::Sigmoid);
    const Tensor fd = oracle::finite_difference_gradient(m, x, 0, 1e-5, OutputMode::Sigmoid);
    CHECK(oracle::max_rel_error(g, fd) < 1e-4);
}

TEST_CASE("fold_batchnorm: identity parameters leave weights unchanged") {
    Model m = testmodels::micro("batchnorm");
    auto& bn = std::get<BatchNormParams>(m.layers[1].params);
    bn.scale = {1.0, 1.0, 1.0};
    bn.shift = {0.0, 0.0, 0.0};
    bn.mean = {0.0, 0.0, 0.0};
    bn.variance = {1.0, 1.0, 1.0};
    bn.epsilon = 0.0;
    const Model folded = fold_batchnorm(m);
    CHECK(folded.layers.size() == m.layers.size() - 1);
    CHECK(folded.layers[0].conv().weights == m.layers[0].conv().weights);
    CHECK(folded.layers[0].conv().bias == m.layers[0].conv().bias);
}

TEST_CASE("fold_batchnorm scales the kernel by gamma over sqrt(var+eps)") {
    Model m = testmodels::micro("batchnorm");
    const auto& bn = m.layers[1].bn();
    const Model folded = fold_batchnorm(m);
    const auto& w0 = m.layers[0].conv();
    const auto& wf = folded.layers[0].conv();
    for (std::int64_t oc = 0; oc < w0.out_channels; ++oc) {
        const double k = bn.scale[static_cast<std::size_t>(oc)] /
                         std::sqrt(bn.variance[static_cast<std::size_t>(oc)] + bn.epsilon);
        for (std::int64_t ic = 0; ic < w0.in_channels; ++ic) {
            for (std::int64_t t = 0; t < w0.kernel; ++t) {
                CHECK(wf.w(oc, ic, t) == doctest::Approx(w0.w(oc, ic, t) * k).epsilon(1e-15));
            }
        }
    }
}

TEST_CASE("fold_batchnorm preserves forward outputs to 1e-10 on resnet_mini") {
    const Model m = make_resnet_mini();
    const Model folded = fold_batchnorm(m);
    CHECK(!has_batchnorm(folded));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Tensor x = testmodels::random_input(m, 1000 + seed);
        const ForwardTrace a = forward(m, x);
        const ForwardTrace b = forward(folded, x);
        for (std::size_t c = 0; c < a.linear_scores.size(); ++c) {
            const double denom = std::max(1.0, std::abs(a.linear_scores[c]));
            CHECK(std::abs(a.linear_scores[c] - b.linear_scores[c]) / denom < 1e-10);
        }
    }
}

TEST_CASE("fold_batchnorm rejects BN without a foldable predecessor") {
    Model m = testmodels::micro("maxpool");
    Rng rng(1);
    Layer bn = testmodels::batchnorm(0, 2, rng);  // after the pool layer
    m.layers.insert(m.layers.begin() + 1, bn);
    m.layers[2].inputs = {1};
    CHECK_THROWS_AS(fold_batchnorm(m), ValidationError);
}

TEST_CASE("model save/load round trip preserves the forward pass") {
    const fs::path path = temp_dir() / "resnet_mini.json";
    const Model m = make_resnet_mini();
    save_model(m, path);
    const Model loaded = load_model(path);
    CHECK(loaded.name == m.name);
    CHECK(loaded.seed == m.seed);
    CHECK(loaded.layers.size() == m.layers.size());

    const Tensor x = testmodels::random_input(m, 77);
    const ForwardTrace a = forward(m, x);
    const ForwardTrace b = forward(loaded, x);
    for (std::size_t c = 0; c < a.linear_scores.size(); ++c) {
        CHECK(std::abs(a.linear_scores[c] - b.linear_scores[c]) <= 1e-12 * std::max(1.0, std::abs(a.linear_scores[c])));
    }
}

TEST_CASE("load_model reports parse and validation errors") {
    const fs::path dir = temp_dir();
    {
        std::ofstream out(dir / "garbage.json");
        out << "not json";
    }
    CHECK_THROWS_AS(load_model(dir / "garbage.json"), ParseError);

    // BN variance zero -> validation error naming the layer
    Model m = testmodels::micro("batchnorm");
    std::get<BatchNormParams>(m.layers[1].params).variance[1] = 0.0;
    const fs::path bad = dir / "bad_bn.json";
    save_model(m, bad);
    CHECK_THROWS_WITH_AS(load_model(bad), doctest::Contains("layer 1"), ValidationError);

    CHECK_THROWS_AS(load_model(dir / "does_not_exist.json"), IoError);
}

TEST_CASE("tiny_linear fixture file loads with one layer") {
    const fs::path path = temp_dir() / "tiny_linear.json";
    save_model(make_tiny_linear(), path);
    const Model m = load_model(path);
    CHECK(m.layers.size() == 1);
    CHECK(m.output_dim == 1);
}

TEST_CASE("resnet_mini fixture is reproducible from its seed") {
    const Model a = make_resnet_mini(kResnetMiniSeed);
    const Model b = make_resnet_mini(kResnetMiniSeed);
    CHECK(a.layers.size() == 21);
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
        if (a.layers[i].kind == LayerKind::Conv1D) {
            CHECK(a.layers[i].conv().weights == b.layers[i].conv().weights);
        }
    }
}

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "relattr/analysis.hpp"
#include "relattr/attribution.hpp"
#include "relattr/engine.hpp"
#include "relattr/fixtures.hpp"
#include "relattr/model_io.hpp"
#include "relattr/signal.hpp"

namespace py = pybind11;
using namespace relattr;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() < 1 || arr.ndim() > 3) throw std::invalid_argument("expected a 1-3 dimensional array");
    std::vector<std::int64_t> shape;
    for (py::ssize_t d = 0; d < arr.ndim(); ++d) shape.push_back(arr.shape(d));
    std::vector<double> data(arr.data(), arr.data() + arr.size());
    return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    py::array_t<double> arr(shape);
    std::copy(t.data(), t.data() + t.numel(), arr.mutable_data());
    return arr;
}

OutputMode mode_from_string(const std::string& mode) {
    if (mode == "linear") return OutputMode::Linear;
    if (mode == "sigmoid") return OutputMode::Sigmoid;
    throw std::invalid_argument("output mode must be 'linear' or 'sigmoid'");
}

AttributionConfig build_config(const std::string& method, int class_index, int ig_steps, double epsilon, double alpha,
                               double beta, const std::string& output_mode) {
    AttributionConfig config;
    config.method = method_from_name(method);
    config.class_index = class_index;
    config.ig_steps = ig_steps;
    config.epsilon = epsilon;
    config.alpha = alpha;
    config.beta = beta;
    config.output_mode = mode_from_string(output_mode);
    return config;
}

EcgRecording recording_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& samples) {
    return make_recording("py", tensor_from_array(samples), kRecordingRateHz, RhythmClass::Normal);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "relattr core: 1-D CNN inference, IG/LRP attribution and ECG relevance analysis";

    py::class_<Model>(m, "Model")
        .def_property_readonly("name", [](const Model& model) { return model.name; })
        .def_property_readonly("input_shape", [](const Model& model) { return model.input_shape; })
        .def_property_readonly("output_dim", [](const Model& model) { return model.output_dim; })
        .def_property_readonly("class_names", [](const Model& model) { return model.class_names; })
        .def_property_readonly("layer_count", [](const Model& model) { return model.layers.size(); });

    m.def("load_model", [](const std::string& path) { return load_model(path); }, py::arg("path"));
    m.def("save_model", [](const Model& model, const std::string& path) { save_model(model, path); },
          py::arg("model"), py::arg("path"));
    m.def("tiny_linear", &make_tiny_linear);
    m.def("resnet_mini", &make_resnet_mini, py::arg("seed") = kResnetMiniSeed);
    m.def("pwave_scorer", &make_pwave_scorer);
    m.def("fold_batchnorm", &fold_batchnorm, py::arg("model"));

    m.def(
        "forward",
        [](const Model& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& input) {
            const ForwardTrace trace = forward(model, tensor_from_array(input));
            py::dict out;
            out["probabilities"] = py::cast(trace.probabilities);
            out["linear_scores"] = py::cast(trace.linear_scores);
            return out;
        },
        py::arg("model"), py::arg("input"));

    m.def(
        "gradient",
        [](const Model& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& input,
           int class_index, const std::string& mode) {
            return array_from_tensor(gradient(model, tensor_from_array(input), class_index, mode_from_string(mode)));
        },
        py::arg("model"), py::arg("input"), py::arg("class_index") = 0, py::arg("output_mode") = "linear");

    m.def(
        "integrated_gradients",
        [](const Model& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& input,
           int class_index, int steps, const std::string& output_mode) {
            AttributionConfig config = build_config("IG", class_index, steps, 1e-7, 1.0, 0.0, output_mode);
            return array_from_tensor(integrated_gradients(model, tensor_from_array(input), config).values);
        },
        py::arg("model"), py::arg("input"), py::arg("class_index") = 0, py::arg("steps") = 64,
        py::arg("output_mode") = "linear");

    m.def(
        "lrp",
        [](const Model& model, const py::array_t<double, py::array::c_style | py::array::forcecast>& input,
           const std::string& method, int class_index, double epsilon, double alpha, double beta,
           const std::string& output_mode) {
            const AttributionConfig config =
                build_config(method, class_index, 64, epsilon, alpha, beta, output_mode);
            LrpResult result = lrp(model, tensor_from_array(input), config);
            py::dict out;
            out["relevance"] = array_from_tensor(result.relevance.values);
            out["layer_sums"] = py::cast(result.layer_sums);
            out["initial_relevance"] = result.initial_relevance;
            out["input_sum"] = result.input_sum;
            return out;
        },
        py::arg("model"), py::arg("input"), py::arg("method") = "LRP-eps", py::arg("class_index") = 0,
        py::arg("epsilon") = 1e-7, py::arg("alpha") = 1.0, py::arg("beta") = 0.0, py::arg("output_mode") = "linear");

    m.def(
        "synth_ecg",
        [](double bpm, double duration_s, double noise_mv, const std::string& mode, std::uint64_t seed) {
            SynthConfig config;
            config.bpm = bpm;
            config.duration_s = duration_s;
            config.noise_mv = noise_mv;
            config.mode = rhythm_class_from_name(mode);
            config.seed = seed;
            const SynthEcg synth = synth_ecg(config);
            py::dict out;
            out["samples"] = array_from_tensor(synth.recording.samples);
            out["r_samples"] = py::cast(synth.r_samples);
            out["r_times_s"] = py::cast(synth.r_times_s);
            return out;
        },
        py::arg("bpm") = 60.0, py::arg("duration_s") = 10.24, py::arg("noise_mv") = 0.0, py::arg("mode") = "Normal",
        py::arg("seed") = 1);

    m.def(
        "detect_r_peaks",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& samples, int lead) {
            return detect_r_peaks(recording_from_array(samples), lead);
        },
        py::arg("samples"), py::arg("lead") = kLeadII);

    m.def(
        "resample",
        [](const std::vector<double>& signal, double from_hz, double to_hz) {
            return resample(signal, from_hz, to_hz);
        },
        py::arg("signal"), py::arg("from_hz"), py::arg("to_hz"));

    m.def(
        "fit_length",
        [](const std::vector<double>& signal, std::int64_t target) { return fit_length(signal, target); },
        py::arg("signal"), py::arg("target") = kRecordingSamples);

    m.def(
        "mean_recording",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& relevance) {
            return mean_recording(tensor_from_array(relevance));
        },
        py::arg("relevance"));

    m.def(
        "mean_lead",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& relevance) {
            return mean_lead(tensor_from_array(relevance));
        },
        py::arg("relevance"));

    m.def(
        "wilcoxon_rank_sum",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const RankSumResult r = wilcoxon_rank_sum(a, b);
            py::dict out;
            out["rank_sum_a"] = r.rank_sum_a;
            out["u_a"] = r.u_a;
            out["p_value"] = r.p_value;
            out["exact"] = r.exact;
            return out;
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "classify_with_threshold",
        [](double c_n, const std::string& abnormality, double threshold_af, double threshold_lbbb) {
            return classify_with_threshold(c_n, abnormality, Thresholds{threshold_af, threshold_lbbb});
        },
        py::arg("c_n"), py::arg("abnormality"), py::arg("threshold_af") = 0.39, py::arg("threshold_lbbb") = 0.05);

    m.attr("RECORDING_SAMPLES") = kRecordingSamples;
    m.attr("RECORDING_LEADS") = kRecordingLeads;
    m.attr("RECORDING_RATE_HZ") = kRecordingRateHz;
    m.attr("LEAD_NAMES") = py::cast(std::vector<std::string>(kLeadNames.begin(), kLeadNames.end()));
    m.attr("__version__") = "0.1.0";
}

#include "relattr/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relattr/errors.hpp"

namespace relattr {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

namespace {

// weights transposed to [tap][in_channel][out_channel] so the hot loops
// below touch both operands contiguously
void transpose_weights(const Conv1DParams& p, std::vector<double>& w_t) {
    w_t.resize(p.weights.size());
    for (std::int64_t oc = 0; oc < p.out_channels; ++oc) {
        for (std::int64_t ic = 0; ic < p.in_channels; ++ic) {
            for (std::int64_t t = 0; t < p.kernel; ++t) {
                w_t[static_cast<std::size_t>((t * p.in_channels + ic) * p.out_channels + oc)] = p.w(oc, ic, t);
            }
        }
    }
}

void conv1d_forward(const Conv1DParams& p, const Tensor& in, Tensor& out) {
    const std::int64_t in_len = in.dim(0), ic_n = p.in_channels;
    const std::int64_t out_len = out.dim(0), oc_n = p.out_channels;
    const std::int64_t pad = conv_pad_left(in_len, out_len, p.kernel, p.stride, p.padding);
    const double* __restrict x = in.data();
    double* __restrict y = out.data();

    if (oc_n < 4) {
        // few output channels: scalar accumulator per (pos, oc)
        for (std::int64_t pos = 0; pos < out_len; ++pos) {
            const std::int64_t base = pos * p.stride - pad;
            const std::int64_t t0 = std::max<std::int64_t>(0, -base);
            const std::int64_t t1 = std::min(p.kernel, in_len - base);
            for (std::int64_t oc = 0; oc < oc_n; ++oc) {
                double acc = p.bias[static_cast<std::size_t>(oc)];
                for (std::int64_t ic = 0; ic < ic_n; ++ic) {
                    const double* __restrict wrow = &p.weights[static_cast<std::size_t>((oc * ic_n + ic) * p.kernel)];
                    for (std::int64_t t = t0; t < t1; ++t) acc += x[(base + t) * ic_n + ic] * wrow[t];
                }
                y[pos * oc_n + oc] = acc;
            }
        }
        return;
    }

    thread_local std::vector<double> w_scratch;
    transpose_weights(p, w_scratch);
    const double* __restrict w_t = w_scratch.data();
    for (std::int64_t pos = 0; pos < out_len; ++pos) {
        const std::int64_t base = pos * p.stride - pad;
        const std::int64_t t0 = std::max<std::int64_t>(0, -base);
        const std::int64_t t1 = std::min(p.kernel, in_len - base);
        double* __restrict acc = y + pos * oc_n;
        for (std::int64_t oc = 0; oc < oc_n; ++oc) acc[oc] = p.bias[static_cast<std::size_t>(oc)];
        for (std::int64_t t = t0; t < t1; ++t) {
            const double* __restrict xrow = x + (base + t) * ic_n;
            const double* __restrict wrow = w_t + t * ic_n * oc_n;
            for (std::int64_t ic = 0; ic < ic_n; ++ic) {
                const double xv = xrow[ic];
                const double* __restrict wcol = wrow + ic * oc_n;
                for (std::int64_t oc = 0; oc < oc_n; ++oc) acc[oc] += xv * wcol[oc];
            }
        }
    }
}

void conv1d_backward(const Conv1DParams& p, const Tensor& in, const Tensor& grad_out, Tensor& grad_in) {
    const std::int64_t in_len = in.dim(0), ic_n = p.in_channels;
    const std::int64_t out_len = grad_out.dim(0), oc_n = p.out_channels;
    const std::int64_t pad = conv_pad_left(in_len, out_len, p.kernel, p.stride, p.padding);
    const double* __restrict g = grad_out.data();
    double* __restrict gi = grad_in.data();

    if (oc_n < 4) {
        for (std::int64_t pos = 0; pos < out_len; ++pos) {
            const std::int64_t base = pos * p.stride - pad;
            const std::int64_t t0 = std::max<std::int64_t>(0, -base);
            const std::int64_t t1 = std::min(p.kernel, in_len - base);
            for (std::int64_t oc = 0; oc < oc_n; ++oc) {
                const double go = g[pos * oc_n + oc];
                if (go == 0.0) continue;
                for (std::int64_t ic = 0; ic < ic_n; ++ic) {
                    const double* __restrict wrow = &p.weights[static_cast<std::size_t>((oc * ic_n + ic) * p.kernel)];
                    for (std::int64_t t = t0; t < t1; ++t) gi[(base + t) * ic_n + ic] += go * wrow[t];
                }
            }
        }
        return;
    }

    thread_local std::vector<double> w_scratch;
    transpose_weights(p, w_scratch);
    const double* __restrict w_t = w_scratch.data();
    for (std::int64_t pos = 0; pos < out_len; ++pos) {
        const std::int64_t base = pos * p.stride - pad;
        const std::int64_t t0 = std::max<std::int64_t>(0, -base);
        const std::int64_t t1 = std::min(p.kernel, in_len - base);
        const double* __restrict grow = g + pos * oc_n;
        for (std::int64_t t = t0; t < t1; ++t) {
            double* __restrict girow = gi + (base + t) * ic_n;
            const double* __restrict wrow = w_t + t * ic_n * oc_n;
            for (std::int64_t ic = 0; ic < ic_n; ++ic) {
                const double* __restrict wcol = wrow + ic * oc_n;
                double sum = 0.0;
                for (std::int64_t oc = 0; oc < oc_n; ++oc) sum += grow[oc] * wcol[oc];
                girow[ic] += sum;
            }
        }
    }
}

}  // namespace

ForwardTrace forward(const Model& model, const Tensor& input) {
    if (input.shape() != model.input_shape) {
        throw ShapeError("forward: input shape does not match model input shape");
    }
    const auto shapes = infer_shapes(model);

    ForwardTrace trace;
    trace.outputs.reserve(model.layers.size());
    auto source = [&](int ref) -> const Tensor& {
        return ref == -1 ? input : trace.outputs[static_cast<std::size_t>(ref)];
    };

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        const Tensor& in = source(layer.inputs[0]);
        Tensor out(shapes[i]);

        switch (layer.kind) {
            case LayerKind::Conv1D: conv1d_forward(layer.conv(), in, out); break;
            case LayerKind::Dense: {
                const auto& p = layer.dense();
                for (std::int64_t o = 0; o < p.out_dim; ++o) {
                    double acc = p.bias[static_cast<std::size_t>(o)];
                    const double* wrow = &p.weights[static_cast<std::size_t>(o * p.in_dim)];
                    for (std::int64_t k = 0; k < p.in_dim; ++k) acc += in[k] * wrow[k];
                    out[o] = acc;
                }
                break;
            }
            case LayerKind::BatchNorm: {
                const auto& p = layer.bn();
                const std::int64_t channels = in.rank() == 2 ? in.dim(1) : in.dim(0);
                const std::int64_t rows = in.numel() / channels;
                for (std::int64_t r = 0; r < rows; ++r) {
                    for (std::int64_t c = 0; c < channels; ++c) {
                        const auto ci = static_cast<std::size_t>(c);
                        const double k = p.scale[ci] / std::sqrt(p.variance[ci] + p.epsilon);
                        out[r * channels + c] = (in[r * channels + c] - p.mean[ci]) * k + p.shift[ci];
                    }
                }
                break;
            }
            case LayerKind::ReLU:
                for (std::int64_t k = 0; k < in.numel(); ++k) out[k] = in[k] > 0.0 ? in[k] : 0.0;
                break;
            case LayerKind::MaxPool1D: {
                const auto& p = layer.pool();
                const std::int64_t channels = in.dim(1), out_len = out.dim(0), stride = p.effective_stride();
                for (std::int64_t pos = 0; pos < out_len; ++pos) {
                    for (std::int64_t c = 0; c < channels; ++c) {
                        double best = in[(pos * stride) * channels + c];
                        for (std::int64_t t = 1; t < p.width; ++t) {
                            best = std::max(best, in[(pos * stride + t) * channels + c]);
                        }
                        out[pos * channels + c] = best;
                    }
                }
                break;
            }
            case LayerKind::ResidualAdd: {
                const Tensor& rhs = source(layer.inputs[1]);
                for (std::int64_t k = 0; k < in.numel(); ++k) out[k] = in[k] + rhs[k];
                break;
            }
            case LayerKind::Flatten:
                out = Tensor(shapes[i], in.values());
                break;
            case LayerKind::OutputActivation: {
                const bool sig = layer.output_activation().mode == OutputMode::Sigmoid;
                for (std::int64_t k = 0; k < in.numel(); ++k) out[k] = sig ? sigmoid(in[k]) : in[k];
                break;
            }
        }
        trace.outputs.push_back(std::move(out));
    }

    const Layer& last = model.layers.back();
    const Tensor& linear = last.kind == LayerKind::OutputActivation ? source(last.inputs[0]) : trace.outputs.back();
    trace.linear_scores.assign(linear.data(), linear.data() + linear.numel());
    trace.probabilities.resize(trace.linear_scores.size());
    for (std::size_t k = 0; k < trace.linear_scores.size(); ++k) {
        trace.probabilities[k] = sigmoid(trace.linear_scores[k]);
    }
    return trace;
}

Tensor gradient_from_trace(const Model& model, const ForwardTrace& trace, const Tensor& input, int class_index,
                           OutputMode mode) {
    if (class_index < 0 || class_index >= static_cast<int>(model.output_dim)) {
        throw ConfigError("gradient: class index " + std::to_string(class_index) + " out of range");
    }
    if (input.shape() != model.input_shape) {
        throw ShapeError("gradient: input shape does not match model input shape");
    }

    // The score layer is the last layer, or the one feeding a final
    // OutputActivation when differentiating the linear score.
    int score_layer = static_cast<int>(model.layers.size()) - 1;
    if (model.layers.back().kind == LayerKind::OutputActivation) {
        score_layer = model.layers.back().inputs[0];
    }
    double seed = 1.0;
    if (mode == OutputMode::Sigmoid) {
        const double p = sigmoid(trace.linear_scores[static_cast<std::size_t>(class_index)]);
        seed = p * (1.0 - p);
    }

    Tensor grad_input(model.input_shape);
    if (score_layer == -1) {
        grad_input[class_index] = seed;
        return grad_input;
    }

    std::vector<Tensor> grads(model.layers.size());
    std::vector<bool> touched(model.layers.size(), false);
    auto source = [&](int ref) -> const Tensor& {
        return ref == -1 ? input : trace.outputs[static_cast<std::size_t>(ref)];
    };
    auto grad_at = [&](int ref) -> Tensor& {
        if (ref == -1) return grad_input;
        const auto r = static_cast<std::size_t>(ref);
        if (!touched[r]) {
            grads[r] = Tensor(trace.outputs[r].shape());
            touched[r] = true;
        }
        return grads[r];
    };

    grad_at(score_layer)[class_index] = seed;

    for (int i = score_layer; i >= 0; --i) {
        const auto idx = static_cast<std::size_t>(i);
        if (!touched[idx]) continue;
        const Layer& layer = model.layers[idx];
        const Tensor& g = grads[idx];
        const Tensor& in = source(layer.inputs[0]);
        Tensor& gi = grad_at(layer.inputs[0]);

        switch (layer.kind) {
            case LayerKind::Conv1D: conv1d_backward(layer.conv(), in, g, gi); break;
            case LayerKind::Dense: {
                const auto& p = layer.dense();
                for (std::int64_t o = 0; o < p.out_dim; ++o) {
                    const double go = g[o];
                    if (go == 0.0) continue;
                    const double* wrow = &p.weights[static_cast<std::size_t>(o * p.in_dim)];
                    for (std::int64_t k = 0; k < p.in_dim; ++k) gi[k] += go * wrow[k];
                }
                break;
            }
            case LayerKind::BatchNorm: {
                const auto& p = layer.bn();
                const std::int64_t channels = in.rank() == 2 ? in.dim(1) : in.dim(0);
                const std::int64_t rows = in.numel() / channels;
                for (std::int64_t r = 0; r < rows; ++r) {
                    for (std::int64_t c = 0; c < channels; ++c) {
                        const auto ci = static_cast<std::size_t>(c);
                        const double k = p.scale[ci] / std::sqrt(p.variance[ci] + p.epsilon);
                        gi[r * channels + c] += g[r * channels + c] * k;
                    }
                }
                break;
            }
            case LayerKind::ReLU:
                for (std::int64_t k = 0; k < in.numel(); ++k) {
                    if (in[k] > 0.0) gi[k] += g[k];
                }
                break;
            case LayerKind::MaxPool1D: {
                const auto& p = layer.pool();
                const std::int64_t channels = in.dim(1), out_len = g.dim(0), stride = p.effective_stride();
                for (std::int64_t pos = 0; pos < out_len; ++pos) {
                    for (std::int64_t c = 0; c < channels; ++c) {
                        std::int64_t arg = pos * stride;
                        double best = in[arg * channels + c];
                        for (std::int64_t t = 1; t < p.width; ++t) {
                            const double v = in[(pos * stride + t) * channels + c];
                            if (v > best) {
                                best = v;
                                arg = pos * stride + t;
                            }
                        }
                        gi[arg * channels + c] += g[pos * channels + c];
                    }
                }
                break;
            }
            case LayerKind::ResidualAdd: {
                Tensor& gi2 = grad_at(layer.inputs[1]);
                for (std::int64_t k = 0; k < g.numel(); ++k) {
                    gi[k] += g[k];
                    gi2[k] += g[k];
                }
                break;
            }
            case LayerKind::Flatten:
                for (std::int64_t k = 0; k < g.numel(); ++k) gi[k] += g[k];
                break;
            case LayerKind::OutputActivation: {
                const bool sig = layer.output_activation().mode == OutputMode::Sigmoid;
                for (std::int64_t k = 0; k < g.numel(); ++k) {
                    if (sig) {
                        const double s = sigmoid(in[k]);
                        gi[k] += g[k] * s * (1.0 - s);
                    } else {
                        gi[k] += g[k];
                    }
                }
                break;
            }
        }
    }
    return grad_input;
}

Tensor gradient(const Model& model, const Tensor& input, int class_index, OutputMode mode) {
    const ForwardTrace trace = forward(model, input);
    return gradient_from_trace(model, trace, input, class_index, mode);
}

bool has_batchnorm(const Model& model) {
    return std::any_of(model.layers.begin(), model.layers.end(),
                       [](const Layer& l) { return l.kind == LayerKind::BatchNorm; });
}

Model fold_batchnorm(const Model& model) {
    std::vector<int> consumers(model.layers.size(), 0);
    for (const Layer& layer : model.layers) {
        for (int ref : layer.inputs) {
            if (ref >= 0) consumers[static_cast<std::size_t>(ref)]++;
        }
    }

    Model folded = model;
    folded.layers.clear();
    std::vector<int> remap(model.layers.size(), -1);

    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const Layer& layer = model.layers[i];
        if (layer.kind == LayerKind::BatchNorm) {
            const int pred = layer.inputs[0];
            const LayerKind pred_kind = pred >= 0 ? model.layers[static_cast<std::size_t>(pred)].kind
                                                  : LayerKind::OutputActivation;
            if (pred < 0 || (pred_kind != LayerKind::Conv1D && pred_kind != LayerKind::Dense)) {
                throw ValidationError("fold_batchnorm: BatchNorm at layer " + std::to_string(i) +
                                      " is not preceded by a Conv1D or Dense layer");
            }
            if (consumers[static_cast<std::size_t>(pred)] > 1) {
                throw ValidationError("fold_batchnorm: layer " + std::to_string(pred) +
                                      " feeds both a BatchNorm and another consumer");
            }
            const auto& p = layer.bn();
            Layer& target = folded.layers[static_cast<std::size_t>(remap[static_cast<std::size_t>(pred)])];
            auto fold_channel = [&](std::int64_t c) {
                const auto ci = static_cast<std::size_t>(c);
                return p.scale[ci] / std::sqrt(p.variance[ci] + p.epsilon);
            };
            if (target.kind == LayerKind::Conv1D) {
                auto& cp = std::get<Conv1DParams>(target.params);
                for (std::int64_t oc = 0; oc < cp.out_channels; ++oc) {
                    const double k = fold_channel(oc);
                    for (std::int64_t ic = 0; ic < cp.in_channels; ++ic) {
                        for (std::int64_t t = 0; t < cp.kernel; ++t) cp.w(oc, ic, t) *= k;
                    }
                    const auto oci = static_cast<std::size_t>(oc);
                    cp.bias[oci] = (cp.bias[oci] - p.mean[oci]) * k + p.shift[oci];
                }
            } else {
                auto& dp = std::get<DenseParams>(target.params);
                for (std::int64_t o = 0; o < dp.out_dim; ++o) {
                    const double k = fold_channel(o);
                    for (std::int64_t j = 0; j < dp.in_dim; ++j) dp.w(o, j) *= k;
                    const auto oi = static_cast<std::size_t>(o);
                    dp.bias[oi] = (dp.bias[oi] - p.mean[oi]) * k + p.shift[oi];
                }
            }
            remap[i] = remap[static_cast<std::size_t>(pred)];
            continue;
        }

        Layer copy = layer;
        for (int& ref : copy.inputs) {
            if (ref >= 0) ref = remap[static_cast<std::size_t>(ref)];
        }
        remap[i] = static_cast<int>(folded.layers.size());
        folded.layers.push_back(std::move(copy));
    }
    return folded;
}

}  // namespace relattr

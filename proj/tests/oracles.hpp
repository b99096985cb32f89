// Test-side oracles: straight-line reimplementations kept independent of
// the library's engine/attribution code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "relattr/attribution.hpp"
#include "relattr/model.hpp"
#include "relattr/tensor.hpp"

namespace oracle {

using relattr::LayerKind;
using relattr::Model;
using relattr::PaddingMode;
using relattr::Tensor;

// forward pass as plain nested loops, layer by layer
inline std::vector<Tensor> naive_forward(const Model& model, const Tensor& input) {
    std::vector<Tensor> outs;
    auto get = [&](int ref) -> const Tensor& { return ref < 0 ? input : outs[static_cast<std::size_t>(ref)]; };

    for (const auto& layer : model.layers) {
        const Tensor& in = get(layer.inputs[0]);
        switch (layer.kind) {
            case LayerKind::Conv1D: {
                const auto& p = layer.conv();
                const std::int64_t in_len = in.dim(0);
                std::int64_t out_len, pad;
                if (p.padding == PaddingMode::Same) {
                    out_len = (in_len + p.stride - 1) / p.stride;
                    const std::int64_t total = std::max<std::int64_t>(0, (out_len - 1) * p.stride + p.kernel - in_len);
                    pad = total / 2;
                } else {
                    out_len = (in_len - p.kernel) / p.stride + 1;
                    pad = 0;
                }
                Tensor out({out_len, p.out_channels});
                for (std::int64_t pos = 0; pos < out_len; ++pos) {
                    for (std::int64_t oc = 0; oc < p.out_channels; ++oc) {
                        double acc = p.bias[static_cast<std::size_t>(oc)];
                        for (std::int64_t t = 0; t < p.kernel; ++t) {
                            const std::int64_t s = pos * p.stride - pad + t;
                            if (s < 0 || s >= in_len) continue;
                            for (std::int64_t ic = 0; ic < p.in_channels; ++ic) {
                                acc += in.at(s, ic) * p.w(oc, ic, t);
                            }
                        }
                        out.at(pos, oc) = acc;
                    }
                }
                outs.push_back(std::move(out));
                break;
            }
            case LayerKind::Dense: {
                const auto& p = layer.dense();
                Tensor out({p.out_dim});
                for (std::int64_t o = 0; o < p.out_dim; ++o) {
                    double acc = p.bias[static_cast<std::size_t>(o)];
                    for (std::int64_t i = 0; i < p.in_dim; ++i) acc += in[i] * p.w(o, i);
                    out[o] = acc;
                }
                outs.push_back(std::move(out));
                break;
            }
            case LayerKind::BatchNorm: {
                const auto& p = layer.bn();
                Tensor out(in.shape());
                const std::int64_t channels = in.rank() == 2 ? in.dim(1) : in.dim(0);
                for (std::int64_t i = 0; i < in.numel(); ++i) {
                    const auto c = static_cast<std::size_t>(i % channels);
                    out[i] = p.scale[c] * (in[i] - p.mean[c]) / std::sqrt(p.variance[c] + p.epsilon) + p.shift[c];
                }
                outs.push_back(std::move(out));
                break;
            }
            case LayerKind::ReLU: {
                Tensor out(in.shape());
                for (std::int64_t i = 0; i < in.numel(); ++i) out[i] = std::max(0.0, in[i]);
                outs.push_back(std::move(out));
                break;
            }
            case LayerKind::MaxPool1D: {
                const auto& p = layer.pool();
                const std::int64_t stride = p.effective_stride();
                const std::int64_t out_len = (in.dim(0) - p.width) / stride + 1;
                Tensor out({out_len, in.dim(1)});
                for (std::int64_t pos = 0; pos < out_len; ++pos) {
                    for (std::int64_t c = 0; c < in.dim(1); ++c) {
                        double best = in.at(pos * stride, c);
                        for (std::int64_t t = 1; t < p.width; ++t) best = std::max(best, in.at(pos * stride + t, c));
                        out.at(pos, c) = best;
                    }
                }
                outs.push_back(std::move(out));
                break;
            }
            case LayerKind::ResidualAdd: {
                const Tensor& rhs = get(layer.inputs[1]);
                Tensor out(in.shape());
                for (std::int64_t i = 0; i < in.numel(); ++i) out[i] = in[i] + rhs[i];
                outs.push_back(std::move(out));
                break;
            }
            case LayerKind::Flatten: {
                outs.push_back(Tensor({in.numel()}, in.values()));
                break;
            }
            case LayerKind::OutputActivation: {
                Tensor out(in.shape());
                const bool sig = layer.output_activation().mode == relattr::OutputMode::Sigmoid;
                for (std::int64_t i = 0; i < in.numel(); ++i) {
                    out[i] = sig ? 1.0 / (1.0 + std::exp(-in[i])) : in[i];
                }
                outs.push_back(std::move(out));
                break;
            }
        }
    }
    return outs;
}

inline double naive_score(const Model& model, const Tensor& input, int class_index,
                          relattr::OutputMode mode = relattr::OutputMode::Linear) {
    const auto outs = naive_forward(model, input);
    double z;
    // linear score: skip a trailing output activation
    if (model.layers.back().kind == LayerKind::OutputActivation) {
        const int ref = model.layers.back().inputs[0];
        z = ref < 0 ? input[class_index] : outs[static_cast<std::size_t>(ref)][class_index];
    } else {
        z = outs.back()[class_index];
    }
    return mode == relattr::OutputMode::Sigmoid ? 1.0 / (1.0 + std::exp(-z)) : z;
}

// central finite differences of the class score
inline Tensor finite_difference_gradient(const Model& model, const Tensor& input, int class_index, double h = 1e-5,
                                         relattr::OutputMode mode = relattr::OutputMode::Linear) {
    Tensor grad(input.shape());
    Tensor probe = input;
    for (std::int64_t i = 0; i < input.numel(); ++i) {
        probe[i] = input[i] + h;
        const double fp = naive_score(model, probe, class_index, mode);
        probe[i] = input[i] - h;
        const double fm = naive_score(model, probe, class_index, mode);
        probe[i] = input[i];
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// scaled max deviation between two gradients, gradcheck style
inline double max_rel_error(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Per-neuron LRP message-passing oracle. Every weight layer is unrolled
// into an explicit (out x in) matrix and messages are computed neuron by
// neuron, which keeps this path structurally different from the engine's
// fused traversal.

struct UnrolledLayer {
    std::vector<std::vector<double>> w;  // [out][in]
    std::vector<double> bias;
};

inline UnrolledLayer unroll_dense(const relattr::DenseParams& p) {
    UnrolledLayer u;
    u.w.assign(static_cast<std::size_t>(p.out_dim), std::vector<double>(static_cast<std::size_t>(p.in_dim), 0.0));
    for (std::int64_t o = 0; o < p.out_dim; ++o) {
        for (std::int64_t i = 0; i < p.in_dim; ++i) u.w[static_cast<std::size_t>(o)][static_cast<std::size_t>(i)] = p.w(o, i);
    }
    u.bias = p.bias;
    return u;
}

inline UnrolledLayer unroll_conv(const relattr::Conv1DParams& p, std::int64_t in_len, std::int64_t out_len) {
    std::int64_t pad = 0;
    if (p.padding == PaddingMode::Same) {
        const std::int64_t total = std::max<std::int64_t>(0, (out_len - 1) * p.stride + p.kernel - in_len);
        pad = total / 2;
    }
    UnrolledLayer u;
    u.w.assign(static_cast<std::size_t>(out_len * p.out_channels),
               std::vector<double>(static_cast<std::size_t>(in_len * p.in_channels), 0.0));
    u.bias.resize(static_cast<std::size_t>(out_len * p.out_channels));
    for (std::int64_t pos = 0; pos < out_len; ++pos) {
        for (std::int64_t oc = 0; oc < p.out_channels; ++oc) {
            const auto row = static_cast<std::size_t>(pos * p.out_channels + oc);
            u.bias[row] = p.bias[static_cast<std::size_t>(oc)];
            for (std::int64_t t = 0; t < p.kernel; ++t) {
                const std::int64_t s = pos * p.stride - pad + t;
                if (s < 0 || s >= in_len) continue;
                for (std::int64_t ic = 0; ic < p.in_channels; ++ic) {
                    u.w[row][static_cast<std::size_t>(s * p.in_channels + ic)] = p.w(oc, ic, t);
                }
            }
        }
    }
    return u;
}

struct OracleRule {
    enum Kind { Epsilon, AlphaBeta, WSquare } kind = Epsilon;
    double epsilon = 0.0;
    double alpha = 1.0;
    double beta = 0.0;
};

inline std::vector<double> oracle_messages(const UnrolledLayer& u, const std::vector<double>& x,
                                           const std::vector<double>& r_out, const OracleRule& rule) {
    std::vector<double> r_in(x.size(), 0.0);
    for (std::size_t j = 0; j < u.w.size(); ++j) {
        if (r_out[j] == 0.0) continue;
        switch (rule.kind) {
            case OracleRule::Epsilon: {
                double z = u.bias[j];
                for (std::size_t i = 0; i < x.size(); ++i) z += x[i] * u.w[j][i];
                const double denom = z >= 0.0 ? z + rule.epsilon : z - rule.epsilon;
                if (denom == 0.0) break;
                for (std::size_t i = 0; i < x.size(); ++i) r_in[i] += r_out[j] * x[i] * u.w[j][i] / denom;
                break;
            }
            case OracleRule::AlphaBeta: {
                double zp = std::max(u.bias[j], 0.0), zn = std::min(u.bias[j], 0.0);
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double c = x[i] * u.w[j][i];
                    if (c > 0.0) zp += c;
                    if (c < 0.0) zn += c;
                }
                for (std::size_t i = 0; i < x.size(); ++i) {
                    const double c = x[i] * u.w[j][i];
                    if (c > 0.0 && zp != 0.0) r_in[i] += r_out[j] * rule.alpha * c / zp;
                    if (c < 0.0 && zn != 0.0) r_in[i] += r_out[j] * rule.beta * c / zn;
                }
                break;
            }
            case OracleRule::WSquare: {
                double s = 0.0;
                for (std::size_t i = 0; i < x.size(); ++i) s += u.w[j][i] * u.w[j][i];
                if (s == 0.0) break;
                for (std::size_t i = 0; i < x.size(); ++i) r_in[i] += r_out[j] * u.w[j][i] * u.w[j][i] / s;
                break;
            }
        }
    }
    return r_in;
}

/// Full backward pass over a (possibly branching) model using the
/// unrolled per-neuron messages. Supports the same rule selection as the
/// library, with the composite preset mapping conv->alphabeta and
/// dense->epsilon(composite_dense_epsilon).
inline Tensor lrp_oracle(const Model& model, const Tensor& input, const relattr::AttributionConfig& config) {
    const auto outs = naive_forward(model, input);
    const std::size_t n_layers = model.layers.size();

    std::vector<std::vector<double>> rel(n_layers);
    for (std::size_t i = 0; i < n_layers; ++i) rel[i].assign(static_cast<std::size_t>(outs[i].numel()), 0.0);
    std::vector<double> rel_input(static_cast<std::size_t>(input.numel()), 0.0);

    const double initial = config.lrp_initial.value_or(
        naive_score(model, input, config.class_index, config.output_mode));
    rel.back()[static_cast<std::size_t>(config.class_index)] = initial;

    auto values_of = [&](int ref) {
        std::vector<double> v;
        const Tensor& t = ref < 0 ? input : outs[static_cast<std::size_t>(ref)];
        v.assign(t.data(), t.data() + t.numel());
        return v;
    };
    auto add_to = [&](int ref, const std::vector<double>& msgs) {
        auto& target = ref < 0 ? rel_input : rel[static_cast<std::size_t>(ref)];
        for (std::size_t i = 0; i < msgs.size(); ++i) target[i] += msgs[i];
    };

    auto rule_for = [&](LayerKind kind) {
        OracleRule rule;
        switch (config.method) {
            case relattr::Method::LrpEpsilon:
                rule.kind = OracleRule::Epsilon;
                rule.epsilon = config.epsilon;
                break;
            case relattr::Method::LrpAlphaBeta:
                rule.kind = OracleRule::AlphaBeta;
                rule.alpha = config.alpha;
                rule.beta = config.beta;
                break;
            case relattr::Method::LrpWSquare: rule.kind = OracleRule::WSquare; break;
            default:  // composite
                if (kind == LayerKind::Dense) {
                    rule.kind = OracleRule::Epsilon;
                    rule.epsilon = config.composite_dense_epsilon;
                } else {
                    rule.kind = OracleRule::AlphaBeta;
                    rule.alpha = config.alpha;
                    rule.beta = config.beta;
                }
        }
        return rule;
    };

    for (std::size_t step = n_layers; step-- > 0;) {
        const auto& layer = model.layers[step];
        const auto& r = rel[step];
        const std::vector<double> x = values_of(layer.inputs[0]);
        switch (layer.kind) {
            case LayerKind::Dense:
                add_to(layer.inputs[0], oracle_messages(unroll_dense(layer.dense()), x, r, rule_for(layer.kind)));
                break;
            case LayerKind::Conv1D: {
                const std::int64_t in_len =
                    layer.inputs[0] < 0 ? input.dim(0) : outs[static_cast<std::size_t>(layer.inputs[0])].dim(0);
                add_to(layer.inputs[0],
                       oracle_messages(unroll_conv(layer.conv(), in_len, outs[step].dim(0)), x, r,
                                       rule_for(layer.kind)));
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::Flatten:
            case LayerKind::OutputActivation:
                add_to(layer.inputs[0], r);
                break;
            case LayerKind::MaxPool1D: {
                const auto& p = layer.pool();
                const Tensor& in_t = layer.inputs[0] < 0 ? input : outs[static_cast<std::size_t>(layer.inputs[0])];
                std::vector<double> msgs(x.size(), 0.0);
                const std::int64_t channels = in_t.dim(1), stride = p.effective_stride();
                for (std::int64_t pos = 0; pos < outs[step].dim(0); ++pos) {
                    for (std::int64_t c = 0; c < channels; ++c) {
                        std::int64_t arg = pos * stride;
                        for (std::int64_t t = 1; t < p.width; ++t) {
                            if (in_t.at(pos * stride + t, c) > in_t.at(arg, c)) arg = pos * stride + t;
                        }
                        msgs[static_cast<std::size_t>(arg * channels + c)] +=
                            r[static_cast<std::size_t>(pos * channels + c)];
                    }
                }
                add_to(layer.inputs[0], msgs);
                break;
            }
            case LayerKind::ResidualAdd: {
                const std::vector<double> xa = values_of(layer.inputs[0]);
                const std::vector<double> xb = values_of(layer.inputs[1]);
                std::vector<double> ma(xa.size(), 0.0), mb(xb.size(), 0.0);
                for (std::size_t i = 0; i < xa.size(); ++i) {
                    const double total = xa[i] + xb[i];
                    if (config.method == relattr::Method::LrpWSquare || total == 0.0) {
                        ma[i] = 0.5 * r[i];
                        mb[i] = 0.5 * r[i];
                    } else {
                        const double denom = total >= 0.0 ? total + config.epsilon : total - config.epsilon;
                        ma[i] = r[i] * xa[i] / denom;
                        mb[i] = r[i] * xb[i] / denom;
                    }
                }
                add_to(layer.inputs[0], ma);
                add_to(layer.inputs[1], mb);
                break;
            }
            case LayerKind::BatchNorm: throw std::logic_error("lrp_oracle: fold batchnorm first");
        }
    }

    Tensor out(input.shape());
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] = rel_input[static_cast<std::size_t>(i)];
    return out;
}

}  // namespace oracle

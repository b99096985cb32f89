#include "relattr/attribution.hpp"

#include <cmath>
#include <json.hpp>

#include "relattr/errors.hpp"

namespace relattr {

const char* method_name(Method m) {
    switch (m) {
        case Method::IntegratedGradients: return "IG";
        case Method::LrpEpsilon: return "LRP-eps";
        case Method::LrpAlphaBeta: return "LRP-ab";
        case Method::LrpWSquare: return "LRP-w2";
        case Method::LrpComposite: return "LRP-composite";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "IG" || name == "ig") return Method::IntegratedGradients;
    if (name == "LRP-eps" || name == "lrp-eps") return Method::LrpEpsilon;
    if (name == "LRP-ab" || name == "lrp-ab") return Method::LrpAlphaBeta;
    if (name == "LRP-w2" || name == "lrp-w2") return Method::LrpWSquare;
    if (name == "LRP-composite" || name == "lrp-composite") return Method::LrpComposite;
    throw ConfigError("unknown attribution method: " + name);
}

void AttributionConfig::validate(const Model& model) const {
    if (class_index < 0 || class_index >= static_cast<int>(model.output_dim)) {
        throw ConfigError("attribution: class index out of range");
    }
    if (ig_steps < 1) throw ConfigError("attribution: ig_steps must be >= 1");
    if (epsilon < 0.0) throw ConfigError("attribution: epsilon must be >= 0");
    if (alpha + beta != 1.0) throw ConfigError("attribution: alpha + beta must equal 1");
    if (ig_baseline && ig_baseline->shape() != model.input_shape) {
        throw ShapeError("attribution: baseline shape does not match model input shape");
    }
}

std::string AttributionConfig::to_json() const {
    nlohmann::json j;
    j["method"] = method_name(method);
    j["class_index"] = class_index;
    j["ig_steps"] = ig_steps;
    j["ig_scheme"] = ig_scheme == IgScheme::RightEndpoint ? "right" : "trapezoid";
    j["ig_baseline"] = "zeros";
    j["epsilon"] = epsilon;
    j["alpha"] = alpha;
    j["beta"] = beta;
    j["composite_dense_epsilon"] = composite_dense_epsilon;
    j["output_mode"] = output_mode == OutputMode::Linear ? "linear" : "sigmoid";
    return j.dump();
}

AttributionConfig AttributionConfig::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    AttributionConfig c;
    c.method = method_from_name(j.value("method", std::string("IG")));
    c.class_index = j.value("class_index", 0);
    c.ig_steps = j.value("ig_steps", 64);
    c.ig_scheme = j.value("ig_scheme", std::string("right")) == "trapezoid" ? IgScheme::Trapezoid
                                                                            : IgScheme::RightEndpoint;
    c.epsilon = j.value("epsilon", 1e-7);
    c.alpha = j.value("alpha", 1.0);
    c.beta = j.value("beta", 0.0);
    c.composite_dense_epsilon = j.value("composite_dense_epsilon", 0.1);
    c.output_mode = j.value("output_mode", std::string("linear")) == "sigmoid" ? OutputMode::Sigmoid
                                                                               : OutputMode::Linear;
    return c;
}

RelevanceTensor integrated_gradients(const Model& model, const Tensor& input, const AttributionConfig& config) {
    config.validate(model);
    if (config.method != Method::IntegratedGradients) {
        throw ConfigError("integrated_gradients called with an LRP method");
    }
    if (input.shape() != model.input_shape) throw ShapeError("integrated_gradients: input shape mismatch");

    const Tensor baseline = config.ig_baseline ? *config.ig_baseline : Tensor::zeros(model.input_shape);
    const std::int64_t n = input.numel();
    Tensor diff(input.shape());
    for (std::int64_t i = 0; i < n; ++i) diff[i] = input[i] - baseline[i];

    const int m = config.ig_steps;
    Tensor grad_sum(input.shape());
    Tensor point(input.shape());
    const int k0 = config.ig_scheme == IgScheme::Trapezoid ? 0 : 1;
    for (int k = k0; k <= m; ++k) {
        const double t = static_cast<double>(k) / static_cast<double>(m);
        for (std::int64_t i = 0; i < n; ++i) point[i] = baseline[i] + t * diff[i];
        const Tensor g = gradient(model, point, config.class_index, config.output_mode);
        const double w = config.ig_scheme == IgScheme::Trapezoid && (k == 0 || k == m) ? 0.5 : 1.0;
        for (std::int64_t i = 0; i < n; ++i) grad_sum[i] += w * g[i];
    }

    RelevanceTensor rel;
    rel.values = Tensor(input.shape());
    for (std::int64_t i = 0; i < n; ++i) {
        rel.values[i] = diff[i] * grad_sum[i] / static_cast<double>(m);
    }
    rel.method = method_name(config.method);
    rel.class_index = config.class_index;
    rel.config_json = config.to_json();
    return rel;
}

namespace {

enum class Rule { Epsilon, AlphaBeta, WSquare };

struct RuleConfig {
    Rule rule = Rule::Epsilon;
    double epsilon = 0.0;
    double alpha = 1.0;
    double beta = 0.0;
};

RuleConfig rule_for_layer(const AttributionConfig& config, LayerKind kind) {
    RuleConfig rc;
    switch (config.method) {
        case Method::LrpEpsilon:
            rc.rule = Rule::Epsilon;
            rc.epsilon = config.epsilon;
            break;
        case Method::LrpAlphaBeta:
            rc.rule = Rule::AlphaBeta;
            rc.alpha = config.alpha;
            rc.beta = config.beta;
            break;
        case Method::LrpWSquare: rc.rule = Rule::WSquare; break;
        case Method::LrpComposite:
            if (kind == LayerKind::Dense) {
                rc.rule = Rule::Epsilon;
                rc.epsilon = config.composite_dense_epsilon;
            } else {
                rc.rule = Rule::AlphaBeta;
                rc.alpha = config.alpha;
                rc.beta = config.beta;
            }
            break;
        default: throw ConfigError("lrp called with a non-LRP method");
    }
    return rc;
}

double stabilized(double z, double epsilon) { return z >= 0.0 ? z + epsilon : z - epsilon; }

/// Distributes R_out over the contributions x_i*w_i (plus bias in the
/// denominator) of one output neuron according to the rule. `emit(i, v)`
/// receives each message; returns the total emitted.
template <typename Contrib, typename Emit>
double distribute(const RuleConfig& rc, double r_out, double z_with_bias, double bias, std::int64_t count,
                  Contrib&& contrib, Emit&& emit) {
    double sent = 0.0;
    switch (rc.rule) {
        case Rule::Epsilon: {
            const double denom = stabilized(z_with_bias, rc.epsilon);
            if (denom == 0.0) return 0.0;
            const double factor = r_out / denom;
            for (std::int64_t i = 0; i < count; ++i) {
                const double c = contrib(i);
                if (c != 0.0) {
                    const double msg = factor * c;
                    emit(i, msg);
                    sent += msg;
                }
            }
            break;
        }
        case Rule::AlphaBeta: {
            double z_pos = bias > 0.0 ? bias : 0.0;
            double z_neg = bias < 0.0 ? bias : 0.0;
            for (std::int64_t i = 0; i < count; ++i) {
                const double c = contrib(i);
                if (c > 0.0) z_pos += c;
                if (c < 0.0) z_neg += c;
            }
            const double fp = z_pos != 0.0 ? rc.alpha * r_out / z_pos : 0.0;
            const double fn = z_neg != 0.0 ? rc.beta * r_out / z_neg : 0.0;
            for (std::int64_t i = 0; i < count; ++i) {
                const double c = contrib(i);
                if (c == 0.0) continue;
                const double msg = c > 0.0 ? fp * c : fn * c;
                if (msg != 0.0) {
                    emit(i, msg);
                    sent += msg;
                }
            }
            break;
        }
        case Rule::WSquare: break;  // handled by the caller (weights, not contributions)
    }
    return sent;
}

}  // namespace

LrpResult lrp(const Model& model, const Tensor& input, const AttributionConfig& config) {
    config.validate(model);
    if (config.method == Method::IntegratedGradients) throw ConfigError("lrp called with method IG");
    if (input.shape() != model.input_shape) throw ShapeError("lrp: input shape mismatch");
    if (has_batchnorm(model)) {
        throw ValidationError("lrp: model contains an unfolded BatchNorm layer; fold_batchnorm first");
    }

    const ForwardTrace trace = forward(model, input);
    const std::size_t n_layers = model.layers.size();

    std::vector<Tensor> rel(n_layers);
    std::vector<bool> touched(n_layers, false);
    Tensor rel_input(model.input_shape);
    auto source = [&](int ref) -> const Tensor& {
        return ref == -1 ? input : trace.outputs[static_cast<std::size_t>(ref)];
    };
    auto rel_at = [&](int ref) -> Tensor& {
        if (ref == -1) return rel_input;
        const auto r = static_cast<std::size_t>(ref);
        if (!touched[r]) {
            rel[r] = Tensor(trace.outputs[r].shape());
            touched[r] = true;
        }
        return rel[r];
    };

    LrpResult result;
    const auto cls = static_cast<std::size_t>(config.class_index);
    result.initial_relevance = config.lrp_initial.value_or(
        config.output_mode == OutputMode::Linear ? trace.linear_scores[cls] : trace.probabilities[cls]);
    rel_at(static_cast<int>(n_layers) - 1)[config.class_index] = result.initial_relevance;

    result.layer_sums.assign(n_layers, 0.0);
    result.layer_leaks.assign(n_layers, 0.0);

    for (int li = static_cast<int>(n_layers) - 1; li >= 0; --li) {
        const auto idx = static_cast<std::size_t>(li);
        if (!touched[idx]) continue;
        const Layer& layer = model.layers[idx];
        const Tensor& r = rel[idx];
        const Tensor& in = source(layer.inputs[0]);
        result.layer_sums[idx] = r.sum();
        double sent = 0.0;

        switch (layer.kind) {
            case LayerKind::Dense: {
                const auto& p = layer.dense();
                const RuleConfig rc = rule_for_layer(config, layer.kind);
                Tensor& target = rel_at(layer.inputs[0]);
                for (std::int64_t o = 0; o < p.out_dim; ++o) {
                    const double r_out = r[o];
                    if (r_out == 0.0) continue;
                    const double* wrow = &p.weights[static_cast<std::size_t>(o * p.in_dim)];
                    if (rc.rule == Rule::WSquare) {
                        double wsum = 0.0;
                        for (std::int64_t i = 0; i < p.in_dim; ++i) wsum += wrow[i] * wrow[i];
                        if (wsum == 0.0) continue;
                        const double factor = r_out / wsum;
                        for (std::int64_t i = 0; i < p.in_dim; ++i) {
                            const double msg = factor * wrow[i] * wrow[i];
                            target[i] += msg;
                            sent += msg;
                        }
                    } else {
                        sent += distribute(
                            rc, r_out, trace.outputs[idx][o], p.bias[static_cast<std::size_t>(o)], p.in_dim,
                            [&](std::int64_t i) { return in[i] * wrow[i]; },
                            [&](std::int64_t i, double msg) { target[i] += msg; });
                    }
                }
                break;
            }
            case LayerKind::Conv1D: {
                const auto& p = layer.conv();
                const RuleConfig rc = rule_for_layer(config, layer.kind);
                Tensor& target = rel_at(layer.inputs[0]);
                const std::int64_t in_len = in.dim(0), out_len = r.dim(0);
                const std::int64_t pad = conv_pad_left(in_len, out_len, p.kernel, p.stride, p.padding);
                for (std::int64_t pos = 0; pos < out_len; ++pos) {
                    const std::int64_t base = pos * p.stride - pad;
                    const std::int64_t t0 = std::max<std::int64_t>(0, -base);
                    const std::int64_t t1 = std::min(p.kernel, in_len - base);
                    const std::int64_t taps = t1 - t0;
                    if (taps <= 0) continue;
                    for (std::int64_t oc = 0; oc < p.out_channels; ++oc) {
                        const double r_out = r[pos * p.out_channels + oc];
                        if (r_out == 0.0) continue;
                        const std::int64_t count = taps * p.in_channels;
                        auto tap_of = [&](std::int64_t i) { return t0 + i / p.in_channels; };
                        auto chan_of = [&](std::int64_t i) { return i % p.in_channels; };
                        if (rc.rule == Rule::WSquare) {
                            // in-range taps only, so borders stay conservative
                            double wsum = 0.0;
                            for (std::int64_t i = 0; i < count; ++i) {
                                const double w = p.w(oc, chan_of(i), tap_of(i));
                                wsum += w * w;
                            }
                            if (wsum == 0.0) continue;
                            const double factor = r_out / wsum;
                            for (std::int64_t i = 0; i < count; ++i) {
                                const double w = p.w(oc, chan_of(i), tap_of(i));
                                const double msg = factor * w * w;
                                target[(base + tap_of(i)) * p.in_channels + chan_of(i)] += msg;
                                sent += msg;
                            }
                        } else {
                            sent += distribute(
                                rc, r_out, trace.outputs[idx][pos * p.out_channels + oc],
                                p.bias[static_cast<std::size_t>(oc)], count,
                                [&](std::int64_t i) {
                                    return in[(base + tap_of(i)) * p.in_channels + chan_of(i)] *
                                           p.w(oc, chan_of(i), tap_of(i));
                                },
                                [&](std::int64_t i, double msg) {
                                    target[(base + tap_of(i)) * p.in_channels + chan_of(i)] += msg;
                                });
                        }
                    }
                }
                break;
            }
            case LayerKind::ReLU:
            case LayerKind::OutputActivation: {
                Tensor& target = rel_at(layer.inputs[0]);
                for (std::int64_t i = 0; i < r.numel(); ++i) {
                    target[i] += r[i];
                    sent += r[i];
                }
                break;
            }
            case LayerKind::Flatten: {
                Tensor& target = rel_at(layer.inputs[0]);
                for (std::int64_t i = 0; i < r.numel(); ++i) {
                    target[i] += r[i];
                    sent += r[i];
                }
                break;
            }
            case LayerKind::MaxPool1D: {
                const auto& p = layer.pool();
                Tensor& target = rel_at(layer.inputs[0]);
                const std::int64_t channels = in.dim(1), out_len = r.dim(0), stride = p.effective_stride();
                for (std::int64_t pos = 0; pos < out_len; ++pos) {
                    for (std::int64_t c = 0; c < channels; ++c) {
                        const double r_out = r[pos * channels + c];
                        if (r_out == 0.0) continue;
                        std::int64_t arg = pos * stride;
                        double best = in[arg * channels + c];
                        for (std::int64_t t = 1; t < p.width; ++t) {
                            const double v = in[(pos * stride + t) * channels + c];
                            if (v > best) {
                                best = v;
                                arg = pos * stride + t;
                            }
                        }
                        target[arg * channels + c] += r_out;
                        sent += r_out;
                    }
                }
                break;
            }
            case LayerKind::ResidualAdd: {
                Tensor& ta = rel_at(layer.inputs[0]);
                Tensor& tb = rel_at(layer.inputs[1]);
                const Tensor& a = source(layer.inputs[0]);
                const Tensor& b = source(layer.inputs[1]);
                for (std::int64_t i = 0; i < r.numel(); ++i) {
                    const double r_out = r[i];
                    if (r_out == 0.0) continue;
                    double share_a;
                    const double total = a[i] + b[i];
                    if (config.method == Method::LrpWSquare || total == 0.0) {
                        // 50/50 keeps the weight-square rule conservative
                        // and independent of the input.
                        ta[i] += 0.5 * r_out;
                        tb[i] += 0.5 * r_out;
                        sent += r_out;
                        continue;
                    }
                    const double denom = stabilized(total, config.epsilon);
                    share_a = a[i] / denom;
                    const double share_b = b[i] / denom;
                    ta[i] += r_out * share_a;
                    tb[i] += r_out * share_b;
                    sent += r_out * (share_a + share_b);
                }
                break;
            }
            case LayerKind::BatchNorm:
                throw ValidationError("lrp: unfolded BatchNorm encountered at layer " + std::to_string(idx));
        }
        result.layer_leaks[idx] = result.layer_sums[idx] - sent;
    }

    result.chain_link.assign(n_layers, false);
    std::vector<int> consumers(n_layers, 0);
    for (const Layer& layer : model.layers) {
        for (int ref : layer.inputs) {
            if (ref >= 0) consumers[static_cast<std::size_t>(ref)]++;
        }
    }
    for (std::size_t i = 1; i < n_layers; ++i) {
        result.chain_link[i] = model.layers[i].inputs.size() == 1 &&
                               model.layers[i].inputs[0] == static_cast<int>(i) - 1 && consumers[i - 1] == 1 &&
                               touched[i] && touched[i - 1];
    }

    result.input_sum = rel_input.sum();
    result.relevance.values = std::move(rel_input);
    result.relevance.method = method_name(config.method);
    result.relevance.class_index = config.class_index;
    result.relevance.config_json = config.to_json();
    return result;
}

double completeness_tolerance(int ig_steps) { return 0.64 / static_cast<double>(ig_steps); }

CompletenessReport check_completeness(const Model& model, const Tensor& input, const RelevanceTensor& relevance,
                                      const AttributionConfig& config) {
    const Tensor baseline = config.ig_baseline ? *config.ig_baseline : Tensor::zeros(model.input_shape);
    const ForwardTrace tx = forward(model, input);
    const ForwardTrace tb = forward(model, baseline);
    const auto cls = static_cast<std::size_t>(config.class_index);
    const double fx = config.output_mode == OutputMode::Linear ? tx.linear_scores[cls] : tx.probabilities[cls];
    const double fb = config.output_mode == OutputMode::Linear ? tb.linear_scores[cls] : tb.probabilities[cls];

    CompletenessReport report;
    report.relevance_sum = relevance.values.sum();
    report.delta_f = fx - fb;
    report.abs_gap = std::abs(report.relevance_sum - report.delta_f);
    report.rel_gap = report.abs_gap / std::max(1.0, std::abs(report.delta_f));
    report.tolerance = completeness_tolerance(config.ig_steps);
    report.pass = report.rel_gap < report.tolerance;
    return report;
}

ConservationReport check_conservation(const ForwardTrace& trace, const LrpResult& result) {
    if (trace.outputs.size() != result.layer_sums.size()) {
        throw ConfigError("check_conservation: trace and relevance sums disagree on layer count");
    }
    ConservationReport report;
    report.layer_sums = result.layer_sums;
    report.layer_leaks = result.layer_leaks;
    report.initial_relevance = result.initial_relevance;
    report.input_sum = result.input_sum;
    report.total_leak = result.initial_relevance - result.input_sum;
    const double denom = std::max(1.0, std::abs(result.initial_relevance));
    report.rel_leak = std::abs(report.total_leak) / denom;
    report.max_chain_gap = 0.0;
    for (std::size_t i = 1; i < result.layer_sums.size(); ++i) {
        if (i < result.chain_link.size() && !result.chain_link[i]) continue;
        const double gap = std::abs(result.layer_sums[i] - result.layer_sums[i - 1]) / denom;
        report.max_chain_gap = std::max(report.max_chain_gap, gap);
    }
    return report;
}

}  // namespace relattr

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "relattr/engine.hpp"
#include "relattr/model.hpp"
#include "relattr/tensor.hpp"

namespace relattr {

enum class Method { IntegratedGradients, LrpEpsilon, LrpAlphaBeta, LrpWSquare, LrpComposite };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

enum class IgScheme { RightEndpoint, Trapezoid };

struct AttributionConfig {
    Method method = Method::IntegratedGradients;
    int class_index = 0;
    int ig_steps = 64;
    IgScheme ig_scheme = IgScheme::RightEndpoint;
    std::optional<Tensor> ig_baseline;  // all-zeros when unset
    double epsilon = 1e-7;
    double alpha = 1.0;
    double beta = 0.0;
    double composite_dense_epsilon = 0.1;
    OutputMode output_mode = OutputMode::Linear;
    // LRP starts from the selected class's output score; override to study
    // the redistribution itself (e.g. the weight-square rule's
    // input-independence) with a fixed starting relevance.
    std::optional<double> lrp_initial;

    void validate(const Model& model) const;
    std::string to_json() const;
    static AttributionConfig from_json(const std::string& text);
};

struct RelevanceTensor {
    Tensor values;  // same shape as the attributed input
    std::string method;
    int class_index = 0;
    std::string recording_id;
    std::string config_json;  // config snapshot carried through persistence
};

/// Right-endpoint Riemann approximation of the path integral of gradients
/// from the baseline to the input, scaled by (x - baseline).
RelevanceTensor integrated_gradients(const Model& model, const Tensor& input, const AttributionConfig& config);

struct LrpResult {
    RelevanceTensor relevance;
    // Relevance each layer's output received during the backward pass,
    // and what the layer absorbed (bias share, stabilizer, dead ends).
    std::vector<double> layer_sums;
    std::vector<double> layer_leaks;
    // chain_link[i]: layer i's only input is i-1 and i is its only
    // consumer, so sums[i-1] and sums[i] cover the same wavefront and are
    // directly comparable.
    std::vector<bool> chain_link;
    double initial_relevance = 0.0;
    double input_sum = 0.0;
};

/// Layer-wise relevance propagation with the configured rule. The model
/// must be batch-norm-folded. ResidualAdd splits relevance in proportion
/// to each branch's activation (50/50 for the weight-square rule, which
/// keeps it conservative and input-independent); MaxPool routes to the
/// argmax position; ReLU passes relevance through unchanged.
LrpResult lrp(const Model& model, const Tensor& input, const AttributionConfig& config);

struct CompletenessReport {
    double relevance_sum = 0.0;
    double delta_f = 0.0;  // f(x) - f(baseline)
    double abs_gap = 0.0;
    double rel_gap = 0.0;  // abs_gap / max(1, |delta_f|)
    double tolerance = 0.0;
    bool pass = false;
};

/// Checks sum(IG) against f(x) - f(baseline). The default tolerance
/// scales with the step count as 0.64/m (1e-2 at m=64).
CompletenessReport check_completeness(const Model& model, const Tensor& input, const RelevanceTensor& relevance,
                                      const AttributionConfig& config);
double completeness_tolerance(int ig_steps);

struct ConservationReport {
    std::vector<double> layer_sums;
    std::vector<double> layer_leaks;
    double initial_relevance = 0.0;
    double input_sum = 0.0;
    double total_leak = 0.0;     // initial - input_sum
    double rel_leak = 0.0;       // |total_leak| / max(1, |initial|)
    double max_chain_gap = 0.0;  // max relative jump between consecutive single-consumer layers
};

ConservationReport check_conservation(const ForwardTrace& trace, const LrpResult& result);

}  // namespace relattr

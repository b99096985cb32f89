#pragma once

#include <cstdint>
#include <vector>

#include "relattr/model.hpp"
#include "relattr/tensor.hpp"

namespace relattr {

double sigmoid(double x);

/// Every layer output of one forward pass, in layer order, plus the final
/// pre-activation (linear) scores and sigmoid probabilities per class.
struct ForwardTrace {
    std::vector<Tensor> outputs;
    std::vector<double> linear_scores;
    std::vector<double> probabilities;

    const Tensor& output() const { return outputs.back(); }
};

ForwardTrace forward(const Model& model, const Tensor& input);

/// d(score_class)/d(input). In Linear mode (the default everywhere
/// downstream) the score is the pre-sigmoid output.
Tensor gradient(const Model& model, const Tensor& input, int class_index, OutputMode mode = OutputMode::Linear);

/// Same, reusing an existing trace of `input`.
Tensor gradient_from_trace(const Model& model, const ForwardTrace& trace, const Tensor& input, int class_index,
                           OutputMode mode = OutputMode::Linear);

/// Returns an equivalent model with every BatchNorm folded into the
/// preceding Conv1D/Dense. Throws ValidationError if a BatchNorm is not
/// directly fed by a foldable layer.
Model fold_batchnorm(const Model& model);

bool has_batchnorm(const Model& model);

}  // namespace relattr

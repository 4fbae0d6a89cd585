#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "svsl/common.hpp"

namespace svsl {

/// Fully connected network with tanh hidden activations and a linear head.
/// Parameters live in an external flat buffer; per layer the weight matrix
/// (out x in, column-major) is followed by the bias vector when present.
class Mlp {
public:
    Mlp() = default;
    Mlp(int input_dim, std::vector<int> hidden, int output_dim, bool output_bias);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    std::size_t num_params() const { return num_params_; }

    /// LeCun-normal weights, zero biases.
    void initialize(std::span<double> params, Rng& rng) const;

    struct Workspace {
        std::vector<Eigen::MatrixXd> activations;  // post-activation of each hidden layer
    };

    /// `inputs` has one column per sample. When `identity_input` is set the
    /// input is the identity matrix of size input_dim and is never materialized.
    Eigen::MatrixXd forward(std::span<const double> params, const Eigen::MatrixXd* inputs, Workspace* ws) const;

    /// Accumulates parameter gradients for upstream d(output) into `grad`.
    void backward(std::span<const double> params, const Eigen::MatrixXd* inputs, const Workspace& ws,
                  const Eigen::MatrixXd& d_output, std::span<double> grad) const;

private:
    struct Layer {
        int in = 0;
        int out = 0;
        bool bias = true;
        std::size_t offset = 0;
    };
    int input_dim_ = 0;
    int output_dim_ = 0;
    std::vector<Layer> layers_;
    std::size_t num_params_ = 0;
};

}  // namespace svsl

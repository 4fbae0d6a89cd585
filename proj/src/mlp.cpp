#include "svsl/mlp.hpp"

#include <cmath>

namespace svsl {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMatMap = Eigen::Map<const MatrixXd>;
using MatMap = Eigen::Map<MatrixXd>;
using ConstVecMap = Eigen::Map<const VectorXd>;
using VecMap = Eigen::Map<VectorXd>;

Mlp::Mlp(int input_dim, std::vector<int> hidden, int output_dim, bool output_bias)
    : input_dim_(input_dim), output_dim_(output_dim) {
    int in = input_dim;
    std::size_t offset = 0;
    auto add = [&](int out, bool bias) {
        layers_.push_back({in, out, bias, offset});
        offset += static_cast<std::size_t>(in) * out + (bias ? static_cast<std::size_t>(out) : 0);
        in = out;
    };
    for (int h : hidden) add(h, true);
    add(output_dim, output_bias);
    num_params_ = offset;
}

void Mlp::initialize(std::span<double> params, Rng& rng) const {
    for (const Layer& l : layers_) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(l.in));
        for (std::size_t k = 0; k < static_cast<std::size_t>(l.in) * l.out; ++k)
            params[l.offset + k] = scale * standard_normal(rng);
        if (l.bias)
            for (int k = 0; k < l.out; ++k) params[l.offset + static_cast<std::size_t>(l.in) * l.out + k] = 0.0;
    }
}

MatrixXd Mlp::forward(std::span<const double> params, const MatrixXd* inputs, Workspace* ws) const {
    if (ws) ws->activations.clear();
    MatrixXd h;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        ConstMatMap W(params.data() + l.offset, l.out, l.in);
        MatrixXd pre;
        if (li == 0)
            pre = inputs ? MatrixXd(W * (*inputs)) : MatrixXd(W);
        else
            pre = W * h;
        if (l.bias) {
            ConstVecMap b(params.data() + l.offset + static_cast<std::size_t>(l.in) * l.out, l.out);
            pre.colwise() += b;
        }
        if (li + 1 < layers_.size()) {
            h = pre.array().tanh().matrix();
            if (ws) ws->activations.push_back(h);
        } else {
            h = std::move(pre);
        }
    }
    return h;
}

void Mlp::backward(std::span<const double> params, const MatrixXd* inputs, const Workspace& ws,
                   const MatrixXd& d_output, std::span<double> grad) const {
    MatrixXd delta = d_output;  // gradient w.r.t. pre-activation of the current layer
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        MatMap dW(grad.data() + l.offset, l.out, l.in);
        if (li == 0) {
            if (inputs)
                dW.noalias() += delta * inputs->transpose();
            else
                dW += delta;
        } else {
            dW.noalias() += delta * ws.activations[li - 1].transpose();
        }
        if (l.bias) {
            VecMap db(grad.data() + l.offset + static_cast<std::size_t>(l.in) * l.out, l.out);
            db += delta.rowwise().sum();
        }
        if (li == 0) break;
        ConstMatMap W(params.data() + l.offset, l.out, l.in);
        const MatrixXd& a = ws.activations[li - 1];
        MatrixXd back = W.transpose() * delta;
        delta = (back.array() * (1.0 - a.array().square())).matrix();
    }
}

}  // namespace svsl

#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "offdrive/rng.hpp"

namespace offdrive::nn {

enum class Activation { Identity, Tanh, Relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

// Fully connected network over column batches (features x batch). All parameters live
// in one flat vector: for each layer, W (out x in, column-major) followed by b.
class Mlp {
public:
    struct Cache {
        std::vector<Eigen::MatrixXd> activations;  // [0] is the input, [l + 1] the output of layer l
    };

    Mlp() = default;
    Mlp(std::vector<int> sizes, Activation hidden, Activation output);

    // Uniform(+-1/sqrt(fan_in)) for hidden layers, Uniform(+-final_scale) for the last one.
    void initialize(Rng& rng, double final_scale = 3e-3);

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache& cache) const;

    // Gradient of sum(grad_out .* output) with respect to the parameters, and optionally the input.
    void backward(const Cache& cache, const Eigen::MatrixXd& grad_out, Eigen::VectorXd& grad_params,
                  Eigen::MatrixXd* grad_input = nullptr) const;

    int input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
    int output_dim() const { return sizes_.empty() ? 0 : sizes_.back(); }
    int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
    const std::vector<int>& sizes() const { return sizes_; }
    Activation hidden_activation() const { return hidden_; }
    Activation output_activation() const { return output_; }

    Eigen::Index parameter_count() const { return params_.size(); }
    Eigen::VectorXd& parameters() { return params_; }
    const Eigen::VectorXd& parameters() const { return params_; }

    Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
    Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
    Eigen::Map<Eigen::MatrixXd> weight(int layer);
    Eigen::Map<Eigen::VectorXd> bias(int layer);

    bool operator==(const Mlp& other) const;

private:
    Activation activation_of(int layer) const { return layer + 1 == layer_count() ? output_ : hidden_; }

    std::vector<int> sizes_;
    std::vector<Eigen::Index> offsets_;  // start of W for each layer
    Activation hidden_ = Activation::Tanh;
    Activation output_ = Activation::Identity;
    Eigen::VectorXd params_;
};

// target <- (1 - tau) target + tau source
void polyak_update(Mlp& target, const Mlp& source, double tau);

class Adam {
public:
    Adam() = default;
    Adam(Eigen::Index n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
    long long steps() const { return t_; }
    double learning_rate() const { return lr_; }

private:
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    Eigen::VectorXd m_, v_;
    long long t_ = 0;
};

}  // namespace offdrive::nn

#include "offdrive/mlp.hpp"

#include <cmath>

#include "offdrive/error.hpp"

namespace offdrive::nn {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::Identity: return "identity";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    return "identity";
}

Activation parse_activation(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw DataError("unknown activation '" + name + "'");
}

namespace {

void apply(Activation a, Eigen::MatrixXd& z) {
    switch (a) {
        case Activation::Identity: break;
        // 1 - 2 / (exp(2z) + 1): the vectorized exp is several times faster than scalar tanh.
        case Activation::Tanh: z = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0); break;
        case Activation::Relu: z = z.array().max(0.0); break;
    }
}

// delta *= act'(z), using the activation output y = act(z) where that is cheaper.
void chain(Activation a, const Eigen::MatrixXd& y, Eigen::MatrixXd& delta) {
    switch (a) {
        case Activation::Identity: break;
        case Activation::Tanh: delta.array() *= 1.0 - y.array().square(); break;
        case Activation::Relu: delta.array() *= (y.array() > 0.0).cast<double>(); break;
    }
}

}  // namespace

Mlp::Mlp(std::vector<int> sizes, Activation hidden, Activation output)
    : sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
    if (sizes_.size() < 2) throw ContractError("an MLP needs at least an input and an output size");
    Eigen::Index total = 0;
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw ContractError("MLP layer sizes must be positive");
        offsets_.push_back(total);
        total += static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1] + sizes_[l + 1];
    }
    params_ = Eigen::VectorXd::Zero(total);
}

void Mlp::initialize(Rng& rng, double final_scale) {
    for (int l = 0; l < layer_count(); ++l) {
        const double bound = (l + 1 == layer_count()) ? final_scale : 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        auto w = weight(l);
        auto b = bias(l);
        // Column-major fill order keeps the draw sequence independent of Eigen internals.
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = rng.uniform(-bound, bound);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-bound, bound);
    }
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int l) const {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
}
Eigen::Map<const Eigen::VectorXd> Mlp::bias(int l) const {
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}
Eigen::Map<Eigen::MatrixXd> Mlp::weight(int l) { return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]}; }
Eigen::Map<Eigen::VectorXd> Mlp::bias(int l) {
    return {params_.data() + offsets_[l] + static_cast<Eigen::Index>(sizes_[l]) * sizes_[l + 1], sizes_[l + 1]};
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    if (x.rows() != input_dim())
        throw ContractError("MLP input has " + std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(input_dim()));
    Eigen::MatrixXd a = x;
    for (int l = 0; l < layer_count(); ++l) {
        Eigen::MatrixXd z;
        z.noalias() = weight(l) * a;
        z.colwise() += bias(l);
        apply(activation_of(l), z);
        a = std::move(z);
    }
    return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache& cache) const {
    if (x.rows() != input_dim())
        throw ContractError("MLP input has " + std::to_string(x.rows()) + " rows, expected " +
                            std::to_string(input_dim()));
    cache.activations.resize(static_cast<std::size_t>(layer_count()) + 1);
    cache.activations[0] = x;
    for (int l = 0; l < layer_count(); ++l) {
        Eigen::MatrixXd& z = cache.activations[l + 1];
        z.noalias() = weight(l) * cache.activations[l];
        z.colwise() += bias(l);
        apply(activation_of(l), z);
    }
    return cache.activations.back();
}

void Mlp::backward(const Cache& cache, const Eigen::MatrixXd& grad_out, Eigen::VectorXd& grad_params,
                   Eigen::MatrixXd* grad_input) const {
    if (static_cast<int>(cache.activations.size()) != layer_count() + 1 || grad_out.rows() != output_dim() ||
        grad_out.cols() != cache.activations.back().cols())
        throw ContractError("MLP backward called with a mismatched cache or gradient");
    grad_params.resize(params_.size());
    Eigen::MatrixXd delta = grad_out;
    for (int l = layer_count() - 1; l >= 0; --l) {
        chain(activation_of(l), cache.activations[l + 1], delta);
        const Eigen::Index in = sizes_[l], out = sizes_[l + 1];
        Eigen::Map<Eigen::MatrixXd>(grad_params.data() + offsets_[l], out, in).noalias() =
            delta * cache.activations[l].transpose();
        Eigen::Map<Eigen::VectorXd>(grad_params.data() + offsets_[l] + in * out, out) = delta.rowwise().sum();
        if (l > 0 || grad_input) {
            Eigen::MatrixXd next = weight(l).transpose() * delta;
            delta = std::move(next);
        }
    }
    if (grad_input) *grad_input = std::move(delta);
}

bool Mlp::operator==(const Mlp& other) const {
    return sizes_ == other.sizes_ && hidden_ == other.hidden_ && output_ == other.output_ &&
           params_.size() == other.params_.size() && params_ == other.params_;
}

void polyak_update(Mlp& target, const Mlp& source, double tau) {
    if (target.parameter_count() != source.parameter_count())
        throw ContractError("Polyak update between networks of different shape");
    target.parameters() = (1.0 - tau) * target.parameters() + tau * source.parameters();
}

Adam::Adam(Eigen::Index n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (grad.size() != m_.size() || params.size() != m_.size())
        throw ContractError("Adam step with a gradient of the wrong size");
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

}  // namespace offdrive::nn

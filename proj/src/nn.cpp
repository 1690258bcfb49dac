#include "elbotune/nn.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace elbotune {

namespace {

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("net needs at least two layer sizes");
    for (int s : sizes)
        if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
}

double apply_one(Activation act, double z) {
    switch (act) {
        case Activation::Identity: return z;
        case Activation::Rectifier: return z > 0.0 ? z : 0.0;
        case Activation::Sigmoid:
            return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
        case Activation::Tanh: return std::tanh(z);
    }
    return z;
}

void apply_inplace(Activation act, Eigen::MatrixXd& z) {
    if (act == Activation::Identity) return;
    for (Eigen::Index j = 0; j < z.cols(); ++j)
        for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = apply_one(act, z(i, j));
}

// Derivative expressed through the post-activation value.
double deriv_from_value(Activation act, double a) {
    switch (act) {
        case Activation::Identity: return 1.0;
        case Activation::Rectifier: return a > 0.0 ? 1.0 : 0.0;
        case Activation::Sigmoid: return a * (1.0 - a);
        case Activation::Tanh: return 1.0 - a * a;
    }
    return 1.0;
}

}  // namespace

DenseNet make_net(const std::vector<int>& layer_sizes, Activation hidden, Activation output,
                  Rng& rng) {
    check_sizes(layer_sizes);
    DenseNet net;
    net.layer_sizes = layer_sizes;
    net.hidden_activation = hidden;
    net.output_activation = output;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const int in = layer_sizes[l];
        const int out = layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Eigen::MatrixXd w(out, in);
        for (int r = 0; r < out; ++r)
            for (int c = 0; c < in; ++c) w(r, c) = uniform(rng, -bound, bound);
        net.weights.push_back(std::move(w));
        net.biases.push_back(Eigen::VectorXd::Zero(out));
    }
    return net;
}

DenseNet zero_net(const std::vector<int>& layer_sizes, Activation hidden, Activation output) {
    check_sizes(layer_sizes);
    DenseNet net;
    net.layer_sizes = layer_sizes;
    net.hidden_activation = hidden;
    net.output_activation = output;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        net.weights.push_back(Eigen::MatrixXd::Zero(layer_sizes[l + 1], layer_sizes[l]));
        net.biases.push_back(Eigen::VectorXd::Zero(layer_sizes[l + 1]));
    }
    return net;
}

NetGrads zero_grads(const DenseNet& net) {
    NetGrads g;
    for (int l = 0; l < net.layer_count(); ++l) {
        g.weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
}

const Eigen::MatrixXd& forward_batch_cached(const DenseNet& net, const Eigen::MatrixXd& inputs,
                                            ForwardCache& cache) {
    if (inputs.rows() != net.input_size())
        throw std::invalid_argument("forward: input dimension mismatch");
    cache.activations.assign(1, inputs);
    const int layers = net.layer_count();
    for (int l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = net.weights[l] * cache.activations[l];
        z.colwise() += net.biases[l];
        apply_inplace(l + 1 == layers ? net.output_activation : net.hidden_activation, z);
        cache.activations.push_back(std::move(z));
    }
    return cache.activations.back();
}

Eigen::MatrixXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs) {
    ForwardCache cache;
    return forward_batch_cached(net, inputs, cache);
}

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input) {
    return forward_batch(net, input);
}

BatchBackwardResult backward_batch(const DenseNet& net, const ForwardCache& cache,
                                   const Eigen::MatrixXd& upstream_grads,
                                   bool upstream_on_preactivation) {
    const int layers = net.layer_count();
    if (static_cast<int>(cache.activations.size()) != layers + 1)
        throw std::invalid_argument("backward: stale forward cache");
    if (upstream_grads.rows() != net.output_size() ||
        upstream_grads.cols() != cache.activations[0].cols())
        throw std::invalid_argument("backward: upstream gradient shape mismatch");

    BatchBackwardResult result;
    result.grads.weights.resize(layers);
    result.grads.biases.resize(layers);

    Eigen::MatrixXd delta = upstream_grads;
    if (!upstream_on_preactivation && net.output_activation != Activation::Identity) {
        const Eigen::MatrixXd& out = cache.activations[layers];
        for (Eigen::Index j = 0; j < delta.cols(); ++j)
            for (Eigen::Index i = 0; i < delta.rows(); ++i)
                delta(i, j) *= deriv_from_value(net.output_activation, out(i, j));
    }
    for (int l = layers - 1; l >= 0; --l) {
        result.grads.weights[l].noalias() = delta * cache.activations[l].transpose();
        result.grads.biases[l] = delta.rowwise().sum();
        Eigen::MatrixXd prev = net.weights[l].transpose() * delta;
        if (l > 0) {
            const Eigen::MatrixXd& act = cache.activations[l];
            for (Eigen::Index j = 0; j < prev.cols(); ++j)
                for (Eigen::Index i = 0; i < prev.rows(); ++i)
                    prev(i, j) *= deriv_from_value(net.hidden_activation, act(i, j));
        }
        delta = std::move(prev);
    }
    result.input_grads = std::move(delta);
    return result;
}

BackwardResult backward(const DenseNet& net, const Eigen::VectorXd& input,
                        const Eigen::VectorXd& upstream_grad) {
    ForwardCache cache;
    forward_batch_cached(net, input, cache);
    BatchBackwardResult batch = backward_batch(net, cache, upstream_grad);
    return BackwardResult{std::move(batch.grads), batch.input_grads.col(0)};
}

AdamState make_adam(const DenseNet& net, double learning_rate, double beta1, double beta2,
                    double epsilon) {
    AdamState s;
    s.learning_rate = learning_rate;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.epsilon = epsilon;
    for (int l = 0; l < net.layer_count(); ++l) {
        s.m_weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.v_weights.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        s.m_biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        s.v_biases.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return s;
}

void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state) {
    if (static_cast<int>(grads.weights.size()) != net.layer_count())
        throw std::invalid_argument("adam_step: gradient layer count mismatch");
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    const double lr = state.learning_rate;
    for (int l = 0; l < net.layer_count(); ++l) {
        state.m_weights[l] = state.beta1 * state.m_weights[l] + (1.0 - state.beta1) * grads.weights[l];
        state.v_weights[l] =
            state.beta2 * state.v_weights[l] + (1.0 - state.beta2) * grads.weights[l].cwiseProduct(grads.weights[l]);
        net.weights[l].array() -= lr * (state.m_weights[l].array() / bc1) /
                                  ((state.v_weights[l].array() / bc2).sqrt() + state.epsilon);
        state.m_biases[l] = state.beta1 * state.m_biases[l] + (1.0 - state.beta1) * grads.biases[l];
        state.v_biases[l] =
            state.beta2 * state.v_biases[l] + (1.0 - state.beta2) * grads.biases[l].cwiseProduct(grads.biases[l]);
        net.biases[l].array() -= lr * (state.m_biases[l].array() / bc1) /
                                 ((state.v_biases[l].array() / bc2).sqrt() + state.epsilon);
    }
}

double grad_check(const DenseNet& net, const Eigen::VectorXd& input, const ScalarLossFn& loss_fn) {
    auto loss_value = [&](const DenseNet& n) { return loss_fn(forward(n, input)).first; };

    const Eigen::VectorXd output = forward(net, input);
    const Eigen::VectorXd upstream = loss_fn(output).second;
    const BackwardResult analytic = backward(net, input, upstream);

    const double h = 1e-5;
    double max_rel = 0.0;
    DenseNet probe = net;
    auto update_max = [&max_rel](double a, double n) {
        const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
        if (rel > max_rel) max_rel = rel;
    };
    for (int l = 0; l < net.layer_count(); ++l) {
        for (Eigen::Index c = 0; c < net.weights[l].cols(); ++c)
            for (Eigen::Index r = 0; r < net.weights[l].rows(); ++r) {
                const double orig = probe.weights[l](r, c);
                probe.weights[l](r, c) = orig + h;
                const double up = loss_value(probe);
                probe.weights[l](r, c) = orig - h;
                const double down = loss_value(probe);
                probe.weights[l](r, c) = orig;
                update_max(analytic.grads.weights[l](r, c), (up - down) / (2.0 * h));
            }
        for (Eigen::Index r = 0; r < net.biases[l].size(); ++r) {
            const double orig = probe.biases[l](r);
            probe.biases[l](r) = orig + h;
            const double up = loss_value(probe);
            probe.biases[l](r) = orig - h;
            const double down = loss_value(probe);
            probe.biases[l](r) = orig;
            update_max(analytic.grads.biases[l](r), (up - down) / (2.0 * h));
        }
    }
    return max_rel;
}

namespace {

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_net(const DenseNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out.write("NNC1", 4);
    write_u32(out, static_cast<std::uint32_t>(net.layer_sizes.size()));
    for (int s : net.layer_sizes) write_u32(out, static_cast<std::uint32_t>(s));
    for (int l = 0; l < net.layer_count(); ++l) {
        const Eigen::MatrixXd& w = net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                const double v = w(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        const Eigen::VectorXd& b = net.biases[l];
        out.write(reinterpret_cast<const char*>(b.data()),
                  static_cast<std::streamsize>(sizeof(double)) * b.size());
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

DenseNet load_net(const std::string& path, Activation hidden, Activation output) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "NNC1", 4) != 0)
        throw std::runtime_error("bad magic in " + path);
    const std::uint32_t count = read_u32(in);
    if (count < 2 || count > 64) throw std::runtime_error("bad layer count in " + path);
    std::vector<int> sizes(count);
    for (auto& s : sizes) s = static_cast<int>(read_u32(in));
    DenseNet net = zero_net(sizes, hidden, output);
    for (int l = 0; l < net.layer_count(); ++l) {
        Eigen::MatrixXd& w = net.weights[l];
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c)
                in.read(reinterpret_cast<char*>(&w(r, c)), sizeof(double));
        Eigen::VectorXd& b = net.biases[l];
        in.read(reinterpret_cast<char*>(b.data()),
                static_cast<std::streamsize>(sizeof(double)) * b.size());
    }
    if (!in) throw std::runtime_error("truncated net file: " + path);
    return net;
}

}  // namespace elbotune

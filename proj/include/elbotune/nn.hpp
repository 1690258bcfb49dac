#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "elbotune/rng.hpp"

namespace elbotune {

enum class Activation { Identity, Rectifier, Sigmoid, Tanh };

// Dense feed-forward net. Weights are (out x in); batched evaluation treats
// matrix columns as samples.
struct DenseNet {
    std::vector<int> layer_sizes;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Activation hidden_activation = Activation::Rectifier;
    Activation output_activation = Activation::Identity;

    int input_size() const { return layer_sizes.front(); }
    int output_size() const { return layer_sizes.back(); }
    int layer_count() const { return static_cast<int>(weights.size()); }
};

// Uniform fan-in initialization, bound 1/sqrt(fan_in).
DenseNet make_net(const std::vector<int>& layer_sizes, Activation hidden, Activation output,
                  Rng& rng);
DenseNet zero_net(const std::vector<int>& layer_sizes, Activation hidden, Activation output);

struct NetGrads {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};
NetGrads zero_grads(const DenseNet& net);

Eigen::VectorXd forward(const DenseNet& net, const Eigen::VectorXd& input);
Eigen::MatrixXd forward_batch(const DenseNet& net, const Eigen::MatrixXd& inputs);

// Post-activation values per layer; activations[0] is the input batch.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> activations;
};
const Eigen::MatrixXd& forward_batch_cached(const DenseNet& net, const Eigen::MatrixXd& inputs,
                                            ForwardCache& cache);

struct BackwardResult {
    NetGrads grads;
    Eigen::VectorXd input_grad;
};
// Gradients of L = upstream . output w.r.t. every parameter and the input.
BackwardResult backward(const DenseNet& net, const Eigen::VectorXd& input,
                        const Eigen::VectorXd& upstream_grad);

struct BatchBackwardResult {
    NetGrads grads;            // summed over the batch
    Eigen::MatrixXd input_grads;
};
// `upstream_on_preactivation` skips the output activation derivative; callers
// that differentiate a loss directly w.r.t. the output pre-activation (e.g.
// Bernoulli NLL against sigmoid logits) use it for numerical stability.
BatchBackwardResult backward_batch(const DenseNet& net, const ForwardCache& cache,
                                   const Eigen::MatrixXd& upstream_grads,
                                   bool upstream_on_preactivation = false);

struct AdamState {
    std::vector<Eigen::MatrixXd> m_weights, v_weights;
    std::vector<Eigen::VectorXd> m_biases, v_biases;
    long step_count = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};
AdamState make_adam(const DenseNet& net, double learning_rate, double beta1 = 0.9,
                    double beta2 = 0.999, double epsilon = 1e-8);
void adam_step(DenseNet& net, const NetGrads& grads, AdamState& state);

// loss_fn maps the net output to (loss value, dloss/doutput).
using ScalarLossFn =
    std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>;
// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// central differences with step 1e-5.
double grad_check(const DenseNet& net, const Eigen::VectorXd& input, const ScalarLossFn& loss_fn);

// Flat binary format: magic "NNC1", layer count and layer sizes as int32
// little-endian, then per layer row-major float64 weights followed by biases.
void save_net(const DenseNet& net, const std::string& path);
DenseNet load_net(const std::string& path, Activation hidden, Activation output);

}  // namespace elbotune

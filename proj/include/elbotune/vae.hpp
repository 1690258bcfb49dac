#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elbotune/image.hpp"
#include "elbotune/nn.hpp"
#include "elbotune/rng.hpp"

namespace elbotune {

inline constexpr double kDecoderMeanEps = 1e-6;
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct GaussianPosterior {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_variance;  // clamped to [kLogVarMin, kLogVarMax]
};

struct ElboReport {
    double neg_beta_elbo = 0.0;  // nats per sample
    double kl_term = 0.0;
    double recon_nll = 0.0;
    int n_samples = 0;
};

struct VaeModel {
    DenseNet encoder;  // image -> (mean, log-variance) stacked, identity output
    DenseNet decoder;  // latent -> per-pixel bernoulli mean, sigmoid output
    double beta = 1.0;
    int latent_dim = 0;
    ImageShape image_shape;
};

struct VaeGrads {
    NetGrads encoder;
    NetGrads decoder;
};

struct VaeOptimizer {
    AdamState encoder;
    AdamState decoder;
};

VaeModel make_vae(const ImageShape& shape, int latent_dim, double beta,
                  const std::vector<int>& encoder_hidden, const std::vector<int>& decoder_hidden,
                  Rng& rng);
VaeOptimizer make_vae_optimizer(const VaeModel& model, double learning_rate);

GaussianPosterior encode(const VaeModel& model, const Eigen::VectorXd& image);
// Columns are samples; returns (means, log_variances), both d_z x B.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_batch(const VaeModel& model,
                                                         const Eigen::MatrixXd& images);
Eigen::MatrixXd encode_means_batch(const VaeModel& model, const Eigen::MatrixXd& images);

Eigen::VectorXd reparameterize(const GaussianPosterior& posterior, const Eigen::VectorXd& noise);
double kl_to_unit_gaussian(const GaussianPosterior& posterior);

// Decoder means clamped to [eps, 1-eps].
Eigen::VectorXd decode_means(const VaeModel& model, const Eigen::VectorXd& latent);
Eigen::MatrixXd decode_means_batch(const VaeModel& model, const Eigen::MatrixXd& latents);

// Bernoulli log-likelihood sum over pixels; nonpositive.
double recon_log_prob(const Eigen::VectorXd& image, const Eigen::VectorXd& decoder_means);

// Single-sample Monte Carlo loss over a batch (columns are images). The noise
// overload freezes the reparameterization draws (d_z x B) for gradient tests.
std::pair<ElboReport, VaeGrads> beta_elbo_loss_and_grads(const VaeModel& model,
                                                         const Eigen::MatrixXd& images,
                                                         const Eigen::MatrixXd& noise);
std::pair<ElboReport, VaeGrads> beta_elbo_loss_and_grads(const VaeModel& model,
                                                         const Eigen::MatrixXd& images, Rng& rng);

std::vector<ElboReport> fit(VaeModel& model, const Eigen::MatrixXd& dataset, int steps,
                            int batch_size, VaeOptimizer& optimizer, Rng& rng);

ElboReport evaluate_elbo(const VaeModel& model, const Eigen::MatrixXd& eval_batch, int mc_samples,
                         Rng& rng);
// One frozen noise matrix (d_z x B) per Monte Carlo sample.
ElboReport evaluate_elbo_with_noise(const VaeModel& model, const Eigen::MatrixXd& eval_batch,
                                    const std::vector<Eigen::MatrixXd>& noises);

void save_vae(const VaeModel& model, const std::string& path_prefix);
VaeModel load_vae(const std::string& path_prefix);

}  // namespace elbotune

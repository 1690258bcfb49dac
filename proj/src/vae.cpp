#include "elbotune/vae.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace elbotune {

namespace {

void clamp_logvar(Eigen::MatrixXd& lv) {
    lv = lv.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
}

Eigen::MatrixXd clamp_means(Eigen::MatrixXd m) {
    return m.cwiseMax(kDecoderMeanEps).cwiseMin(1.0 - kDecoderMeanEps);
}

Eigen::MatrixXd standard_normal(int rows, int cols, Rng& rng) {
    Eigen::MatrixXd out(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) out(i, j) = gaussian(rng);
    return out;
}

}  // namespace

VaeModel make_vae(const ImageShape& shape, int latent_dim, double beta,
                  const std::vector<int>& encoder_hidden, const std::vector<int>& decoder_hidden,
                  Rng& rng) {
    if (latent_dim <= 0) throw std::invalid_argument("latent_dim must be positive");
    if (beta < 1.0) throw std::invalid_argument("beta must be >= 1");
    const int pixels = shape.size();
    std::vector<int> enc_sizes{pixels};
    enc_sizes.insert(enc_sizes.end(), encoder_hidden.begin(), encoder_hidden.end());
    enc_sizes.push_back(2 * latent_dim);
    std::vector<int> dec_sizes{latent_dim};
    dec_sizes.insert(dec_sizes.end(), decoder_hidden.begin(), decoder_hidden.end());
    dec_sizes.push_back(pixels);
    VaeModel model;
    model.encoder = make_net(enc_sizes, Activation::Rectifier, Activation::Identity, rng);
    model.decoder = make_net(dec_sizes, Activation::Rectifier, Activation::Sigmoid, rng);
    model.beta = beta;
    model.latent_dim = latent_dim;
    model.image_shape = shape;
    return model;
}

VaeOptimizer make_vae_optimizer(const VaeModel& model, double learning_rate) {
    return VaeOptimizer{make_adam(model.encoder, learning_rate),
                        make_adam(model.decoder, learning_rate)};
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> encode_batch(const VaeModel& model,
                                                         const Eigen::MatrixXd& images) {
    const Eigen::MatrixXd out = forward_batch(model.encoder, images);
    Eigen::MatrixXd means = out.topRows(model.latent_dim);
    Eigen::MatrixXd logvars = out.bottomRows(model.latent_dim);
    clamp_logvar(logvars);
    return {std::move(means), std::move(logvars)};
}

GaussianPosterior encode(const VaeModel& model, const Eigen::VectorXd& image) {
    auto [means, logvars] = encode_batch(model, image);
    return GaussianPosterior{means.col(0), logvars.col(0)};
}

Eigen::MatrixXd encode_means_batch(const VaeModel& model, const Eigen::MatrixXd& images) {
    return forward_batch(model.encoder, images).topRows(model.latent_dim);
}

Eigen::VectorXd reparameterize(const GaussianPosterior& posterior, const Eigen::VectorXd& noise) {
    if (noise.size() != posterior.mean.size())
        throw std::invalid_argument("reparameterize: noise length mismatch");
    return posterior.mean.array() + (posterior.log_variance.array() / 2.0).exp() * noise.array();
}

double kl_to_unit_gaussian(const GaussianPosterior& posterior) {
    const auto mu = posterior.mean.array();
    const auto lv = posterior.log_variance.array();
    return 0.5 * (mu.square() + lv.exp() - 1.0 - lv).sum();
}

Eigen::MatrixXd decode_means_batch(const VaeModel& model, const Eigen::MatrixXd& latents) {
    return clamp_means(forward_batch(model.decoder, latents));
}

Eigen::VectorXd decode_means(const VaeModel& model, const Eigen::VectorXd& latent) {
    return decode_means_batch(model, latent).col(0);
}

double recon_log_prob(const Eigen::VectorXd& image, const Eigen::VectorXd& decoder_means) {
    if (image.size() != decoder_means.size())
        throw std::invalid_argument("recon_log_prob: length mismatch");
    const auto x = image.array();
    const auto m = decoder_means.array();
    return (x * m.log() + (1.0 - x) * (1.0 - m).log()).sum();
}

namespace {

struct BatchElbo {
    double kl_sum = 0.0;        // summed over batch
    double recon_nll_sum = 0.0;
};

// Shared forward pass; caches filled so the caller can run backprop.
BatchElbo elbo_forward(const VaeModel& model, const Eigen::MatrixXd& images,
                       const Eigen::MatrixXd& noise, ForwardCache& enc_cache,
                       ForwardCache& dec_cache, Eigen::MatrixXd& means, Eigen::MatrixXd& logvars,
                       Eigen::MatrixXd& latents, Eigen::MatrixXd& dec_means) {
    if (images.cols() == 0) throw std::invalid_argument("empty batch");
    if (images.rows() != model.encoder.input_size())
        throw std::invalid_argument("image dimension mismatch");
    if (noise.rows() != model.latent_dim || noise.cols() != images.cols())
        throw std::invalid_argument("noise shape mismatch");
    const Eigen::MatrixXd& enc_out = forward_batch_cached(model.encoder, images, enc_cache);
    means = enc_out.topRows(model.latent_dim);
    logvars = enc_out.bottomRows(model.latent_dim);
    clamp_logvar(logvars);
    latents = (means.array() + (logvars.array() / 2.0).exp() * noise.array()).matrix();
    dec_means = clamp_means(forward_batch_cached(model.decoder, latents, dec_cache));

    BatchElbo acc;
    acc.kl_sum = 0.5 * (means.array().square() + logvars.array().exp() - 1.0 - logvars.array()).sum();
    const auto x = images.array();
    const auto m = dec_means.array();
    acc.recon_nll_sum = -(x * m.log() + (1.0 - x) * (1.0 - m).log()).sum();
    return acc;
}

ElboReport make_report(double beta, double kl_sum, double recon_nll_sum, int n) {
    ElboReport r;
    r.n_samples = n;
    r.kl_term = kl_sum / n;
    r.recon_nll = recon_nll_sum / n;
    r.neg_beta_elbo = beta * r.kl_term + r.recon_nll;
    return r;
}

}  // namespace

std::pair<ElboReport, VaeGrads> beta_elbo_loss_and_grads(const VaeModel& model,
                                                         const Eigen::MatrixXd& images,
                                                         const Eigen::MatrixXd& noise) {
    ForwardCache enc_cache, dec_cache;
    Eigen::MatrixXd means, logvars, latents, dec_means;
    const BatchElbo acc =
        elbo_forward(model, images, noise, enc_cache, dec_cache, means, logvars, latents, dec_means);
    const int batch = static_cast<int>(images.cols());
    const double inv_b = 1.0 / batch;

    // Bernoulli NLL through the sigmoid: gradient on the pre-activation is (m - x)/B.
    const Eigen::MatrixXd dec_upstream = (dec_means - images) * inv_b;
    BatchBackwardResult dec_back = backward_batch(model.decoder, dec_cache, dec_upstream, true);

    const Eigen::ArrayXXd sigma = (logvars.array() / 2.0).exp();
    // dL/dz from the decoder, plus closed-form KL pieces; zero where the
    // log-variance clamp is active.
    Eigen::MatrixXd enc_upstream(2 * model.latent_dim, batch);
    enc_upstream.topRows(model.latent_dim) =
        (model.beta * inv_b) * means + dec_back.input_grads;
    Eigen::ArrayXXd lv_grad = (model.beta * inv_b * 0.5) * (sigma.square() - 1.0) +
                              dec_back.input_grads.array() * 0.5 * sigma * noise.array();
    const Eigen::MatrixXd& raw_enc_out = enc_cache.activations.back();
    const Eigen::ArrayXXd raw_lv = raw_enc_out.bottomRows(model.latent_dim).array();
    lv_grad = (raw_lv <= kLogVarMin || raw_lv >= kLogVarMax).select(0.0, lv_grad);
    enc_upstream.bottomRows(model.latent_dim) = lv_grad.matrix();
    BatchBackwardResult enc_back = backward_batch(model.encoder, enc_cache, enc_upstream);

    return {make_report(model.beta, acc.kl_sum, acc.recon_nll_sum, batch),
            VaeGrads{std::move(enc_back.grads), std::move(dec_back.grads)}};
}

std::pair<ElboReport, VaeGrads> beta_elbo_loss_and_grads(const VaeModel& model,
                                                         const Eigen::MatrixXd& images, Rng& rng) {
    return beta_elbo_loss_and_grads(
        model, images, standard_normal(model.latent_dim, static_cast<int>(images.cols()), rng));
}

std::vector<ElboReport> fit(VaeModel& model, const Eigen::MatrixXd& dataset, int steps,
                            int batch_size, VaeOptimizer& optimizer, Rng& rng) {
    if (dataset.cols() == 0) throw std::invalid_argument("empty dataset");
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    const int n = static_cast<int>(dataset.cols());
    const int b = std::min(batch_size, n);
    std::vector<ElboReport> history;
    history.reserve(steps);
    Eigen::MatrixXd batch(dataset.rows(), b);
    for (int step = 0; step < steps; ++step) {
        for (int j = 0; j < b; ++j) batch.col(j) = dataset.col(uniform_int(rng, 0, n - 1));
        auto [report, grads] = beta_elbo_loss_and_grads(model, batch, rng);
        adam_step(model.encoder, grads.encoder, optimizer.encoder);
        adam_step(model.decoder, grads.decoder, optimizer.decoder);
        history.push_back(report);
    }
    return history;
}

ElboReport evaluate_elbo_with_noise(const VaeModel& model, const Eigen::MatrixXd& eval_batch,
                                    const std::vector<Eigen::MatrixXd>& noises) {
    if (eval_batch.cols() == 0) throw std::invalid_argument("empty batch");
    if (noises.empty()) throw std::invalid_argument("mc_samples must be >= 1");
    auto [means, logvars] = encode_batch(model, eval_batch);
    const int n = static_cast<int>(eval_batch.cols());
    const double kl_sum =
        0.5 * (means.array().square() + logvars.array().exp() - 1.0 - logvars.array()).sum();
    double recon_nll_acc = 0.0;
    for (const Eigen::MatrixXd& noise : noises) {
        const Eigen::MatrixXd latents =
            (means.array() + (logvars.array() / 2.0).exp() * noise.array()).matrix();
        const Eigen::MatrixXd dec_means = decode_means_batch(model, latents);
        const auto x = eval_batch.array();
        const auto m = dec_means.array();
        recon_nll_acc += -(x * m.log() + (1.0 - x) * (1.0 - m).log()).sum();
    }
    return make_report(model.beta, kl_sum, recon_nll_acc / static_cast<double>(noises.size()), n);
}

ElboReport evaluate_elbo(const VaeModel& model, const Eigen::MatrixXd& eval_batch, int mc_samples,
                         Rng& rng) {
    if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
    std::vector<Eigen::MatrixXd> noises;
    noises.reserve(mc_samples);
    for (int s = 0; s < mc_samples; ++s)
        noises.push_back(
            standard_normal(model.latent_dim, static_cast<int>(eval_batch.cols()), rng));
    return evaluate_elbo_with_noise(model, eval_batch, noises);
}

void save_vae(const VaeModel& model, const std::string& path_prefix) {
    save_net(model.encoder, path_prefix + ".enc.nnc");
    save_net(model.decoder, path_prefix + ".dec.nnc");
    nlohmann::json meta{{"latent_dim", model.latent_dim},
                        {"beta", model.beta},
                        {"channels", model.image_shape.channels},
                        {"height", model.image_shape.height},
                        {"width", model.image_shape.width}};
    std::ofstream out(path_prefix + ".json");
    if (!out) throw std::runtime_error("cannot write " + path_prefix + ".json");
    out << meta.dump() << "\n";
}

VaeModel load_vae(const std::string& path_prefix) {
    std::ifstream in(path_prefix + ".json");
    if (!in) throw std::runtime_error("cannot read " + path_prefix + ".json");
    nlohmann::json meta = nlohmann::json::parse(in);
    VaeModel model;
    model.encoder = load_net(path_prefix + ".enc.nnc", Activation::Rectifier, Activation::Identity);
    model.decoder = load_net(path_prefix + ".dec.nnc", Activation::Rectifier, Activation::Sigmoid);
    model.latent_dim = meta.at("latent_dim").get<int>();
    model.beta = meta.at("beta").get<double>();
    model.image_shape = ImageShape{meta.at("channels").get<int>(), meta.at("height").get<int>(),
                                   meta.at("width").get<int>()};
    return model;
}

}  // namespace elbotune

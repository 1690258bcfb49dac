#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elbotune/image.hpp"
#include "elbotune/vae.hpp"

namespace elbotune {

inline constexpr int kGlyphClassCount = 16;
inline constexpr int kGlyphCanvas = 16;

struct GlyphDataset {
    std::vector<Image> images;
    std::vector<int> labels;  // class index, -1 for blank padding
    ImageShape canvas{1, kGlyphCanvas, kGlyphCanvas};
    int class_count = 0;
};

struct DiversityStage {
    int start_epoch = 0;
    std::vector<int> class_set;
};

struct DiversitySchedule {
    std::vector<DiversityStage> stages;
};

struct DiversityLabConfig {
    int latent_dim = 4;
    double beta = 1.0;
    std::vector<int> encoder_hidden{128};
    std::vector<int> decoder_hidden{128};
    double learning_rate = 1e-3;
    int batch_size = 32;
    int steps_per_epoch = 60;
    int per_class = 4;
    double noise_prob = 0.0;
    int mc_samples = 4;
};

struct DiversityResult {
    int stage = 0;
    int class_count = 0;
    std::uint64_t seed = 0;
    double neg_beta_elbo = 0.0;
    double kl_term = 0.0;
    double recon_nll = 0.0;
};

double empirical_entropy_counts(const std::vector<std::int64_t>& counts);

template <typename T>
double empirical_entropy(const std::vector<T>& items) {
    std::map<T, std::int64_t> tally;
    for (const T& item : items) tally[item] += 1;
    std::vector<std::int64_t> counts;
    counts.reserve(tally.size());
    for (const auto& [key, n] : tally) counts.push_back(n);
    return empirical_entropy_counts(counts);
}

Image glyph_prototype(int class_index);
GlyphDataset make_glyph_dataset(const std::vector<int>& class_set, int per_class,
                                double noise_prob, std::uint64_t seed);
// Columns are flattened images.
Eigen::MatrixXd dataset_matrix(const GlyphDataset& dataset);

std::vector<DiversityResult> run_diversity_experiment(const DiversitySchedule& schedule,
                                                      const DiversityLabConfig& config,
                                                      int epochs_per_stage,
                                                      const std::vector<std::uint64_t>& seeds);
void write_diversity_csv(const std::vector<DiversityResult>& rows, const std::string& path);

double mi_upper_bound(const VaeModel& model, const Eigen::MatrixXd& dataset);

// IDX image files (big-endian magic 0x00000803), pixels scaled to [0,1].
std::vector<Image> load_idx_images(const std::string& path);

}  // namespace elbotune

#include "elbotune/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "elbotune/rng.hpp"

namespace elbotune {

double empirical_entropy_counts(const std::vector<std::int64_t>& counts) {
    std::int64_t total = 0;
    for (std::int64_t c : counts) {
        if (c < 0) throw std::invalid_argument("negative count");
        total += c;
    }
    if (total == 0) throw std::invalid_argument("empty multiset");
    double h = 0.0;
    for (std::int64_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log(p);
    }
    return h;
}

namespace {

void fill_rect(Image& img, int y0, int y1, int x0, int x1) {
    const int w = img.shape.width;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) img.pixels[y * w + x] = 1.0;
}

}  // namespace

Image glyph_prototype(int class_index) {
    if (class_index < 0 || class_index >= kGlyphClassCount)
        throw std::invalid_argument("glyph class out of range");
    Image img;
    img.shape = ImageShape{1, kGlyphCanvas, kGlyphCanvas};
    img.pixels = Eigen::VectorXd::Zero(img.shape.size());
    switch (class_index) {
        case 0: fill_rect(img, 3, 4, 2, 13); break;            // upper bar
        case 1: fill_rect(img, 11, 12, 2, 13); break;          // lower bar
        case 2: fill_rect(img, 2, 13, 3, 4); break;            // left bar
        case 3: fill_rect(img, 2, 13, 11, 12); break;          // right bar
        case 4:                                                // plus cross
            fill_rect(img, 7, 8, 2, 13);
            fill_rect(img, 2, 13, 7, 8);
            break;
        case 5:                                                // diagonal cross
            for (int i = 2; i <= 13; ++i) {
                img.pixels[i * kGlyphCanvas + i] = 1.0;
                img.pixels[i * kGlyphCanvas + (kGlyphCanvas - 1 - i)] = 1.0;
            }
            break;
        case 6:                                                // corners
            fill_rect(img, 2, 3, 2, 9);
            fill_rect(img, 2, 9, 2, 3);
            break;
        case 7:
            fill_rect(img, 2, 3, 6, 13);
            fill_rect(img, 2, 9, 12, 13);
            break;
        case 8:
            fill_rect(img, 12, 13, 2, 9);
            fill_rect(img, 6, 13, 2, 3);
            break;
        case 9:
            fill_rect(img, 12, 13, 6, 13);
            fill_rect(img, 6, 13, 12, 13);
            break;
        case 10: fill_rect(img, 2, 7, 2, 7); break;            // blocks
        case 11: fill_rect(img, 2, 7, 8, 13); break;
        case 12: fill_rect(img, 8, 13, 2, 7); break;
        case 13: fill_rect(img, 8, 13, 8, 13); break;
        case 14: fill_rect(img, 5, 10, 5, 10); break;          // center block
        case 15:                                               // frame
            fill_rect(img, 2, 3, 2, 13);
            fill_rect(img, 12, 13, 2, 13);
            fill_rect(img, 2, 13, 2, 3);
            fill_rect(img, 2, 13, 12, 13);
            break;
    }
    return img;
}

GlyphDataset make_glyph_dataset(const std::vector<int>& class_set, int per_class,
                                double noise_prob, std::uint64_t seed) {
    if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
    for (int c : class_set)
        if (c < 0 || c >= kGlyphClassCount) throw std::invalid_argument("glyph class out of range");
    GlyphDataset ds;
    ds.class_count = static_cast<int>(class_set.size());
    Rng rng = make_rng(seed);
    const int total = kGlyphClassCount * per_class;
    ds.images.reserve(total);
    ds.labels.reserve(total);
    for (int c : class_set) {
        for (int rep = 0; rep < per_class; ++rep) {
            Image img = glyph_prototype(c);
            if (noise_prob > 0.0)
                for (Eigen::Index i = 0; i < img.pixels.size(); ++i)
                    if (uniform01(rng) < noise_prob) img.pixels[i] = 1.0 - img.pixels[i];
            ds.images.push_back(std::move(img));
            ds.labels.push_back(c);
        }
    }
    Image blank;
    blank.shape = ds.canvas;
    blank.pixels = Eigen::VectorXd::Zero(blank.shape.size());
    while (static_cast<int>(ds.images.size()) < total) {
        ds.images.push_back(blank);
        ds.labels.push_back(-1);
    }
    return ds;
}

Eigen::MatrixXd dataset_matrix(const GlyphDataset& dataset) {
    if (dataset.images.empty()) throw std::invalid_argument("empty dataset");
    Eigen::MatrixXd m(dataset.images[0].pixels.size(), dataset.images.size());
    for (std::size_t i = 0; i < dataset.images.size(); ++i) m.col(i) = dataset.images[i].pixels;
    return m;
}

std::vector<DiversityResult> run_diversity_experiment(const DiversitySchedule& schedule,
                                                      const DiversityLabConfig& config,
                                                      int epochs_per_stage,
                                                      const std::vector<std::uint64_t>& seeds) {
    if (schedule.stages.empty()) throw std::invalid_argument("empty schedule");
    if (seeds.empty()) throw std::invalid_argument("need at least one seed");
    if (epochs_per_stage < 1) throw std::invalid_argument("epochs_per_stage must be >= 1");
    for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
        if (i == 0 && schedule.stages[0].start_epoch != 0)
            throw std::invalid_argument("first stage must start at epoch 0");
        if (i > 0 && schedule.stages[i].start_epoch <= schedule.stages[i - 1].start_epoch)
            throw std::invalid_argument("stage start epochs must be strictly increasing");
    }

    std::vector<DiversityResult> rows;
    const ImageShape canvas{1, kGlyphCanvas, kGlyphCanvas};
    for (std::uint64_t seed : seeds) {
        Rng init_rng = make_rng(derive_seed(seed, 0));
        Rng train_rng = make_rng(derive_seed(seed, 1));
        Rng eval_rng = make_rng(derive_seed(seed, 2));
        VaeModel model = make_vae(canvas, config.latent_dim, config.beta, config.encoder_hidden,
                                  config.decoder_hidden, init_rng);
        VaeOptimizer opt = make_vae_optimizer(model, config.learning_rate);
        for (std::size_t s = 0; s < schedule.stages.size(); ++s) {
            const DiversityStage& stage = schedule.stages[s];
            const int duration = s + 1 < schedule.stages.size()
                                     ? schedule.stages[s + 1].start_epoch - stage.start_epoch
                                     : epochs_per_stage;
            GlyphDataset ds = make_glyph_dataset(stage.class_set, config.per_class,
                                                 config.noise_prob, derive_seed(seed, 100 + s));
            const Eigen::MatrixXd data = dataset_matrix(ds);
            std::vector<ElboReport> evals;
            for (int epoch = 0; epoch < duration; ++epoch) {
                fit(model, data, config.steps_per_epoch, config.batch_size, opt, train_rng);
                evals.push_back(evaluate_elbo(model, data, config.mc_samples, eval_rng));
            }
            // converged value = mean over the final 10% of evaluation points
            const int tail = std::max<int>(1, static_cast<int>(evals.size() / 10));
            DiversityResult row;
            row.stage = static_cast<int>(s);
            row.class_count = static_cast<int>(stage.class_set.size());
            row.seed = seed;
            for (int i = static_cast<int>(evals.size()) - tail;
                 i < static_cast<int>(evals.size()); ++i) {
                row.neg_beta_elbo += evals[i].neg_beta_elbo / tail;
                row.kl_term += evals[i].kl_term / tail;
                row.recon_nll += evals[i].recon_nll / tail;
            }
            rows.push_back(row);
        }
    }
    return rows;
}

void write_diversity_csv(const std::vector<DiversityResult>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "stage,class_count,seed,neg_beta_elbo,kl_term,recon_nll\n";
    out << std::setprecision(17);
    for (const DiversityResult& r : rows)
        out << r.stage << ',' << r.class_count << ',' << r.seed << ',' << r.neg_beta_elbo << ','
            << r.kl_term << ',' << r.recon_nll << '\n';
}

double mi_upper_bound(const VaeModel& model, const Eigen::MatrixXd& dataset) {
    if (dataset.cols() == 0) throw std::invalid_argument("empty dataset");
    auto [means, logvars] = encode_batch(model, dataset);
    const double kl_sum =
        0.5 * (means.array().square() + logvars.array().exp() - 1.0 - logvars.array()).sum();
    return kl_sum / static_cast<double>(dataset.cols());
}

namespace {

std::uint32_t read_be32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
           std::uint32_t(b[3]);
}

}  // namespace

std::vector<Image> load_idx_images(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    const std::uint32_t magic = read_be32(in);
    if (magic != 0x00000803u) throw std::runtime_error("bad idx magic in " + path);
    const std::uint32_t count = read_be32(in);
    const std::uint32_t rows = read_be32(in);
    const std::uint32_t cols = read_be32(in);
    if (!in) throw std::runtime_error("truncated idx header in " + path);
    std::vector<Image> images;
    images.reserve(count);
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!in) throw std::runtime_error("truncated idx data in " + path);
        Image img;
        img.shape = ImageShape{1, static_cast<int>(rows), static_cast<int>(cols)};
        img.pixels.resize(img.shape.size());
        for (std::size_t j = 0; j < buf.size(); ++j)
            img.pixels[static_cast<Eigen::Index>(j)] = buf[j] / 255.0;
        images.push_back(std::move(img));
    }
    return images;
}

}  // namespace elbotune

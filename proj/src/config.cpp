#include "elbotune/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace elbotune {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_string = !in_string;
        if (line[i] == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

// raw key -> value text per section, consumed as typed getters run
using RawSection = std::map<std::string, std::string>;

std::int64_t to_int(const std::string& path, const std::string& text) {
    const std::string t = trim(text);
    if (t.empty() || t.find_first_of(".eE\"[") != std::string::npos)
        throw ConfigError(path + ": expected an integer, got '" + t + "'");
    try {
        std::size_t used = 0;
        const std::int64_t v = std::stoll(t, &used);
        if (used != t.size()) throw ConfigError(path + ": trailing characters in '" + t + "'");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        throw ConfigError(path + ": expected an integer, got '" + t + "'");
    }
}

double to_double(const std::string& path, const std::string& text) {
    const std::string t = trim(text);
    if (t.empty() || t.front() == '"' || t.front() == '[')
        throw ConfigError(path + ": expected a number, got '" + t + "'");
    try {
        std::size_t used = 0;
        const double v = std::stod(t, &used);
        if (used != t.size()) throw ConfigError(path + ": trailing characters in '" + t + "'");
        if (!std::isfinite(v)) throw ConfigError(path + ": value must be finite");
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (...) {
        throw ConfigError(path + ": expected a number, got '" + t + "'");
    }
}

std::string to_string_value(const std::string& path, const std::string& text) {
    const std::string t = trim(text);
    if (t.size() < 2 || t.front() != '"' || t.back() != '"')
        throw ConfigError(path + ": expected a quoted string, got '" + t + "'");
    return t.substr(1, t.size() - 2);
}

std::vector<std::string> split_array(const std::string& path, const std::string& text) {
    const std::string t = trim(text);
    if (t.size() < 2 || t.front() != '[' || t.back() != ']')
        throw ConfigError(path + ": expected an array, got '" + t + "'");
    std::vector<std::string> items;
    std::string body = t.substr(1, t.size() - 2);
    std::string current;
    bool in_string = false;
    for (char ch : body) {
        if (ch == '"') in_string = !in_string;
        if (ch == ',' && !in_string) {
            items.push_back(trim(current));
            current.clear();
        } else {
            current += ch;
        }
    }
    if (!trim(current).empty()) items.push_back(trim(current));
    return items;
}

struct SectionReader {
    std::string name;
    RawSection& raw;

    bool has(const std::string& key) const { return raw.count(key) > 0; }
    std::string take(const std::string& key) {
        auto it = raw.find(key);
        std::string v = it->second;
        raw.erase(it);
        return v;
    }
    void get(const std::string& key, std::int64_t& out) {
        if (has(key)) out = to_int(name + "." + key, take(key));
    }
    void get(const std::string& key, int& out) {
        if (!has(key)) return;
        const std::int64_t v = to_int(name + "." + key, take(key));
        out = static_cast<int>(v);
        if (out != v) throw ConfigError(name + "." + key + ": value out of range");
    }
    void get(const std::string& key, double& out) {
        if (has(key)) out = to_double(name + "." + key, take(key));
    }
    void get(const std::string& key, std::string& out) {
        if (has(key)) out = to_string_value(name + "." + key, take(key));
    }
    void get(const std::string& key, std::vector<std::int64_t>& out) {
        if (!has(key)) return;
        const std::string path = name + "." + key;
        out.clear();
        for (const std::string& item : split_array(path, take(key)))
            out.push_back(to_int(path, item));
    }
    void get(const std::string& key, std::vector<std::string>& out) {
        if (!has(key)) return;
        const std::string path = name + "." + key;
        out.clear();
        for (const std::string& item : split_array(path, take(key)))
            out.push_back(to_string_value(path, item));
    }
    void reject_leftovers() const {
        if (!raw.empty())
            throw ConfigError("unknown key " + name + "." + raw.begin()->first);
    }
};

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

void validate(const AppConfig& c) {
    const auto& e = c.env;
    require(e.variant == "no_wall" || e.variant == "multi_wall" || e.variant == "multi_color",
            "env.variant: must be no_wall, multi_wall, or multi_color");
    require(e.height >= 8 && e.width >= 8, "env.height/env.width: canvas must be at least 8x8");
    require(e.workspace_scale > 0.0 && e.workspace_scale <= 1.0,
            "env.workspace_scale: must lie in (0,1]");
    require(e.max_path_length >= 1, "env.max_path_length: must be >= 1");
    require(e.wall_set_size >= 1 && e.wall_set_size <= 15,
            "env.wall_set_size: must lie in [1,15]");
    require(e.action_scale > 0.0, "env.action_scale: must be positive");
    require(e.schedule_epochs.size() == e.schedule_variants.size(),
            "env.schedule_epochs: must pair one-to-one with env.schedule_variants");
    for (std::size_t i = 0; i < e.schedule_epochs.size(); ++i) {
        if (i == 0)
            require(e.schedule_epochs[0] == 0, "env.schedule_epochs: first entry must be 0");
        else
            require(e.schedule_epochs[i] > e.schedule_epochs[i - 1],
                    "env.schedule_epochs: must be strictly increasing");
        const std::string& v = e.schedule_variants[i];
        require(v == "no_wall" || v == "multi_wall" || v == "multi_color",
                "env.schedule_variants: unknown variant '" + v + "'");
    }

    const auto& v = c.vae;
    require(v.latent_dim >= 1, "vae.latent_dim: must be >= 1");
    require(v.beta >= 1.0, "vae.beta: must be >= 1");
    for (std::int64_t h : v.encoder_hidden)
        require(h >= 1, "vae.encoder_hidden: sizes must be >= 1");
    for (std::int64_t h : v.decoder_hidden)
        require(h >= 1, "vae.decoder_hidden: sizes must be >= 1");
    require(v.learning_rate > 0.0, "vae.learning_rate: must be positive");
    require(v.batch_size >= 1, "vae.batch_size: must be >= 1");
    require(v.mc_samples >= 1, "vae.mc_samples: must be >= 1");
    require(v.eval_batch >= 1, "vae.eval_batch: must be >= 1");
    require(v.per_class >= 1, "vae.per_class: must be >= 1");
    require(v.noise_prob >= 0.0 && v.noise_prob < 1.0, "vae.noise_prob: must lie in [0,1)");
    require(v.steps_per_epoch >= 1, "vae.steps_per_epoch: must be >= 1");
    require(v.epochs_per_stage >= 1, "vae.epochs_per_stage: must be >= 1");
    require(v.diversity_seeds >= 1, "vae.diversity_seeds: must be >= 1");

    const auto& a = c.agent;
    for (std::int64_t h : a.actor_hidden)
        require(h >= 1, "agent.actor_hidden: sizes must be >= 1");
    for (std::int64_t h : a.critic_hidden)
        require(h >= 1, "agent.critic_hidden: sizes must be >= 1");
    require(a.gamma >= 0.0 && a.gamma < 1.0, "agent.gamma: must lie in [0,1)");
    require(a.tau > 0.0 && a.tau <= 1.0, "agent.tau: must lie in (0,1]");
    require(a.alpha >= 0.0, "agent.alpha: must be >= 0");
    require(a.actor_lr > 0.0, "agent.actor_lr: must be positive");
    require(a.critic_lr > 0.0, "agent.critic_lr: must be positive");
    require(a.batch_size >= 1, "agent.batch_size: must be >= 1");
    require(a.f_future >= 0.0 && a.f_prior >= 0.0 && a.f_future + a.f_prior <= 1.0,
            "agent.f_future/agent.f_prior: must be nonnegative and sum to <= 1");

    const auto& t = c.autotune;
    require(t.mode == "auto" || t.mode == "fixed", "autotune.mode: must be auto or fixed");
    require(t.xi > 0.0, "autotune.xi: must be positive");
    require(t.n_e >= 1, "autotune.n_e: must be >= 1");
    require(t.n_b >= 1, "autotune.n_b: must be >= 1");
    require(t.n_theta >= 1, "autotune.n_theta: must be >= 1");
    require(t.cap_n_e >= 1, "autotune.cap_n_e: must be >= 1");
    require(t.cap_n_b >= 1, "autotune.cap_n_b: must be >= 1");
    require(t.cap_n_theta >= 1, "autotune.cap_n_theta: must be >= 1");

    const auto& r = c.run;
    require(r.epochs >= 1, "run.epochs: must be >= 1");
    require(r.pretrain_rollouts >= 1, "run.pretrain_rollouts: must be >= 1");
    require(r.pretrain_steps >= 1, "run.pretrain_steps: must be >= 1");
    require(r.finetune_steps >= 0, "run.finetune_steps: must be >= 0");
    require(r.finetune_interval >= 1, "run.finetune_interval: must be >= 1");
    require(r.eval_goals >= 1, "run.eval_goals: must be >= 1");
    require(r.checkpoint_interval >= 0, "run.checkpoint_interval: must be >= 0");

    const auto& s = c.search;
    require(s.trials >= 1, "search.trials: must be >= 1");
    require(s.mode == "auto" || s.mode == "fixed", "search.mode: must be auto or fixed");
    require(s.xi_min > 0.0, "search.xi_min: must be positive");
    require(s.xi_min <= s.xi_max, "search.xi_min: must not exceed search.xi_max");
    require(s.ne_min >= 1 && s.ne_min <= s.ne_max, "search.ne_min: must satisfy 1 <= min <= max");
    require(s.nb_min >= 1 && s.nb_min <= s.nb_max, "search.nb_min: must satisfy 1 <= min <= max");
    require(s.ntheta_min >= 1 && s.ntheta_min <= s.ntheta_max,
            "search.ntheta_min: must satisfy 1 <= min <= max");
    require(s.objective_window >= 1, "search.objective_window: must be >= 1");
    require(s.workers >= 1, "search.workers: must be >= 1");
}

}  // namespace

AppConfig parse_config_text(const std::string& text) {
    std::map<std::string, RawSection> sections;
    std::istringstream stream(text);
    std::string line;
    std::string current;
    int line_no = 0;
    while (std::getline(stream, line)) {
        ++line_no;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            current = trim(line.substr(1, line.size() - 2));
            if (current != "env" && current != "vae" && current != "agent" &&
                current != "autotune" && current != "run" && current != "search")
                throw ConfigError("unknown section [" + current + "]");
            sections[current];
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        if (current.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (sections[current].count(key))
            throw ConfigError("duplicate key " + current + "." + key);
        sections[current][key] = trim(line.substr(eq + 1));
    }

    AppConfig c;
    {
        SectionReader s{"env", sections["env"]};
        s.get("variant", c.env.variant);
        s.get("height", c.env.height);
        s.get("width", c.env.width);
        s.get("workspace_scale", c.env.workspace_scale);
        s.get("max_path_length", c.env.max_path_length);
        s.get("wall_set_size", c.env.wall_set_size);
        s.get("action_scale", c.env.action_scale);
        s.get("schedule_epochs", c.env.schedule_epochs);
        s.get("schedule_variants", c.env.schedule_variants);
        s.reject_leftovers();
    }
    {
        SectionReader s{"vae", sections["vae"]};
        s.get("latent_dim", c.vae.latent_dim);
        s.get("beta", c.vae.beta);
        s.get("encoder_hidden", c.vae.encoder_hidden);
        s.get("decoder_hidden", c.vae.decoder_hidden);
        s.get("learning_rate", c.vae.learning_rate);
        s.get("batch_size", c.vae.batch_size);
        s.get("mc_samples", c.vae.mc_samples);
        s.get("eval_batch", c.vae.eval_batch);
        s.get("per_class", c.vae.per_class);
        s.get("noise_prob", c.vae.noise_prob);
        s.get("steps_per_epoch", c.vae.steps_per_epoch);
        s.get("epochs_per_stage", c.vae.epochs_per_stage);
        s.get("diversity_seeds", c.vae.diversity_seeds);
        s.reject_leftovers();
    }
    {
        SectionReader s{"agent", sections["agent"]};
        s.get("actor_hidden", c.agent.actor_hidden);
        s.get("critic_hidden", c.agent.critic_hidden);
        s.get("gamma", c.agent.gamma);
        s.get("tau", c.agent.tau);
        s.get("alpha", c.agent.alpha);
        s.get("actor_lr", c.agent.actor_lr);
        s.get("critic_lr", c.agent.critic_lr);
        s.get("batch_size", c.agent.batch_size);
        s.get("f_future", c.agent.f_future);
        s.get("f_prior", c.agent.f_prior);
        s.reject_leftovers();
    }
    {
        SectionReader s{"autotune", sections["autotune"]};
        s.get("mode", c.autotune.mode);
        s.get("xi", c.autotune.xi);
        s.get("n_e", c.autotune.n_e);
        s.get("n_b", c.autotune.n_b);
        s.get("n_theta", c.autotune.n_theta);
        s.get("cap_n_e", c.autotune.cap_n_e);
        s.get("cap_n_b", c.autotune.cap_n_b);
        s.get("cap_n_theta", c.autotune.cap_n_theta);
        s.reject_leftovers();
    }
    {
        SectionReader s{"run", sections["run"]};
        s.get("epochs", c.run.epochs);
        s.get("seed", c.run.seed);
        s.get("pretrain_rollouts", c.run.pretrain_rollouts);
        s.get("pretrain_steps", c.run.pretrain_steps);
        s.get("finetune_steps", c.run.finetune_steps);
        s.get("finetune_interval", c.run.finetune_interval);
        s.get("eval_goals", c.run.eval_goals);
        s.get("checkpoint_interval", c.run.checkpoint_interval);
        s.get("out_dir", c.run.out_dir);
        s.reject_leftovers();
    }
    {
        SectionReader s{"search", sections["search"]};
        s.get("trials", c.search.trials);
        s.get("mode", c.search.mode);
        s.get("xi_min", c.search.xi_min);
        s.get("xi_max", c.search.xi_max);
        s.get("ne_min", c.search.ne_min);
        s.get("ne_max", c.search.ne_max);
        s.get("nb_min", c.search.nb_min);
        s.get("nb_max", c.search.nb_max);
        s.get("ntheta_min", c.search.ntheta_min);
        s.get("ntheta_max", c.search.ntheta_max);
        s.get("objective_window", c.search.objective_window);
        s.get("workers", c.search.workers);
        s.reject_leftovers();
    }
    validate(c);
    return c;
}

AppConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    std::string s(buf);
    // bare integers need a decimal point to stay floats on re-parse
    if (s.find_first_of(".eEnN") == std::string::npos) s += ".0";
    return s;
}

std::string fmt(const std::vector<std::int64_t>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + std::to_string(v[i]);
    return s + "]";
}

std::string fmt(const std::vector<std::string>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", \"" : "\"") + v[i] + "\"";
    return s + "]";
}

}  // namespace

std::string serialize_config(const AppConfig& c) {
    std::ostringstream o;
    o << "[env]\n";
    o << "variant = \"" << c.env.variant << "\"\n";
    o << "height = " << c.env.height << "\n";
    o << "width = " << c.env.width << "\n";
    o << "workspace_scale = " << fmt(c.env.workspace_scale) << "\n";
    o << "max_path_length = " << c.env.max_path_length << "\n";
    o << "wall_set_size = " << c.env.wall_set_size << "\n";
    o << "action_scale = " << fmt(c.env.action_scale) << "\n";
    o << "schedule_epochs = " << fmt(c.env.schedule_epochs) << "\n";
    o << "schedule_variants = " << fmt(c.env.schedule_variants) << "\n";
    o << "\n[vae]\n";
    o << "latent_dim = " << c.vae.latent_dim << "\n";
    o << "beta = " << fmt(c.vae.beta) << "\n";
    o << "encoder_hidden = " << fmt(c.vae.encoder_hidden) << "\n";
    o << "decoder_hidden = " << fmt(c.vae.decoder_hidden) << "\n";
    o << "learning_rate = " << fmt(c.vae.learning_rate) << "\n";
    o << "batch_size = " << c.vae.batch_size << "\n";
    o << "mc_samples = " << c.vae.mc_samples << "\n";
    o << "eval_batch = " << c.vae.eval_batch << "\n";
    o << "per_class = " << c.vae.per_class << "\n";
    o << "noise_prob = " << fmt(c.vae.noise_prob) << "\n";
    o << "steps_per_epoch = " << c.vae.steps_per_epoch << "\n";
    o << "epochs_per_stage = " << c.vae.epochs_per_stage << "\n";
    o << "diversity_seeds = " << c.vae.diversity_seeds << "\n";
    o << "\n[agent]\n";
    o << "actor_hidden = " << fmt(c.agent.actor_hidden) << "\n";
    o << "critic_hidden = " << fmt(c.agent.critic_hidden) << "\n";
    o << "gamma = " << fmt(c.agent.gamma) << "\n";
    o << "tau = " << fmt(c.agent.tau) << "\n";
    o << "alpha = " << fmt(c.agent.alpha) << "\n";
    o << "actor_lr = " << fmt(c.agent.actor_lr) << "\n";
    o << "critic_lr = " << fmt(c.agent.critic_lr) << "\n";
    o << "batch_size = " << c.agent.batch_size << "\n";
    o << "f_future = " << fmt(c.agent.f_future) << "\n";
    o << "f_prior = " << fmt(c.agent.f_prior) << "\n";
    o << "\n[autotune]\n";
    o << "mode = \"" << c.autotune.mode << "\"\n";
    o << "xi = " << fmt(c.autotune.xi) << "\n";
    o << "n_e = " << c.autotune.n_e << "\n";
    o << "n_b = " << c.autotune.n_b << "\n";
    o << "n_theta = " << c.autotune.n_theta << "\n";
    o << "cap_n_e = " << c.autotune.cap_n_e << "\n";
    o << "cap_n_b = " << c.autotune.cap_n_b << "\n";
    o << "cap_n_theta = " << c.autotune.cap_n_theta << "\n";
    o << "\n[run]\n";
    o << "epochs = " << c.run.epochs << "\n";
    o << "seed = " << c.run.seed << "\n";
    o << "pretrain_rollouts = " << c.run.pretrain_rollouts << "\n";
    o << "pretrain_steps = " << c.run.pretrain_steps << "\n";
    o << "finetune_steps = " << c.run.finetune_steps << "\n";
    o << "finetune_interval = " << c.run.finetune_interval << "\n";
    o << "eval_goals = " << c.run.eval_goals << "\n";
    o << "checkpoint_interval = " << c.run.checkpoint_interval << "\n";
    o << "out_dir = \"" << c.run.out_dir << "\"\n";
    o << "\n[search]\n";
    o << "trials = " << c.search.trials << "\n";
    o << "mode = \"" << c.search.mode << "\"\n";
    o << "xi_min = " << fmt(c.search.xi_min) << "\n";
    o << "xi_max = " << fmt(c.search.xi_max) << "\n";
    o << "ne_min = " << c.search.ne_min << "\n";
    o << "ne_max = " << c.search.ne_max << "\n";
    o << "nb_min = " << c.search.nb_min << "\n";
    o << "nb_max = " << c.search.nb_max << "\n";
    o << "ntheta_min = " << c.search.ntheta_min << "\n";
    o << "ntheta_max = " << c.search.ntheta_max << "\n";
    o << "objective_window = " << c.search.objective_window << "\n";
    o << "workers = " << c.search.workers << "\n";
    return o.str();
}

}  // namespace elbotune

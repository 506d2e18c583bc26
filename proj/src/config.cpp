#include "spot/config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "spot/errors.hpp"

namespace spot {

SelectionMode selection_mode_from_string(const std::string& s) {
    if (s == "policy") return SelectionMode::policy;
    if (s == "all-keep") return SelectionMode::all_keep;
    if (s == "bypass") return SelectionMode::bypass;
    if (s == "random") return SelectionMode::random_rate;
    if (s == "oracle") return SelectionMode::oracle;
    throw ConfigError("unknown selection mode '" + s + "'");
}

std::string to_string(SelectionMode mode) {
    switch (mode) {
        case SelectionMode::policy: return "policy";
        case SelectionMode::all_keep: return "all-keep";
        case SelectionMode::bypass: return "bypass";
        case SelectionMode::random_rate: return "random";
        case SelectionMode::oracle: return "oracle";
    }
    throw ConfigError("invalid selection mode value");
}

RlAlgorithm rl_algorithm_from_string(const std::string& s) {
    if (s == "ppo") return RlAlgorithm::ppo;
    if (s == "reinforce") return RlAlgorithm::reinforce;
    if (s == "none") return RlAlgorithm::none;
    throw ConfigError("unknown RL algorithm '" + s + "'");
}

std::string to_string(RlAlgorithm algo) {
    switch (algo) {
        case RlAlgorithm::ppo: return "ppo";
        case RlAlgorithm::reinforce: return "reinforce";
        case RlAlgorithm::none: return "none";
    }
    throw ConfigError("invalid RL algorithm value");
}

namespace {

std::size_t parse_size(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(value, &pos);
        if (pos != value.size() || v < 0) throw std::invalid_argument("range");
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a nonnegative integer, got '" + value + "'");
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("range");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an unsigned integer, got '" + value + "'");
    }
}

double parse_real(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("range");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (value.empty()) return out;
    std::istringstream is(value);
    std::string item;
    while (std::getline(is, item, ',')) {
        try {
            std::size_t pos = 0;
            out.push_back(std::stoi(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("range");
        } catch (const std::exception&) {
            throw ConfigError(key + ": expected comma-separated integers, got '" + value + "'");
        }
    }
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"benchmark.n_classes",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.benchmark.n_classes = parse_size(k, v);
         }},
        {"benchmark.samples_per_class",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.benchmark.samples_per_class = parse_size(k, v);
         }},
        {"benchmark.feature_dim",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.benchmark.feature_dim = parse_size(k, v);
         }},
        {"benchmark.d_attr",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.benchmark.d_attr = parse_size(k, v);
         }},
        {"benchmark.intra_class_noise",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.benchmark.intra_class_noise = parse_real(k, v);
         }},
        {"benchmark.inter_class_separation",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.benchmark.inter_class_separation = parse_real(k, v);
         }},
        {"benchmark.seed",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.benchmark.seed = parse_u64(k, v);
         }},
        {"generator.noise_scale",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.gen_noise_scale = parse_real(k, v);
         }},
        {"generator.corruption_rate",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.gen_corruption_rate = parse_real(k, v);
         }},
        {"generator.corruption_mode",
         [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.gen_corruption_mode = corruption_mode_from_string(v);
         }},
        {"generator.per_class",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.gen_per_class = parse_size(k, v);
         }},
        {"selector.layers",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.selector.layers = parse_size(k, v);
         }},
        {"selector.heads",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.selector.heads = parse_size(k, v);
         }},
        {"selector.d_model",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.selector.d_model = parse_size(k, v);
         }},
        {"selector.ff_hidden",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.selector.ff_hidden = parse_size(k, v);
         }},
        {"selector.ff_layers",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.selector.ff_layers = parse_size(k, v);
         }},
        {"ppo.epsilon",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.ppo.epsilon = parse_real(k, v);
         }},
        {"ppo.learning_rate",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.ppo.learning_rate = parse_real(k, v);
         }},
        {"ppo.update_epochs",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.ppo.update_epochs = parse_size(k, v);
         }},
        {"ppo.reward_window",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.ppo.reward_window = parse_size(k, v);
         }},
        {"ppo.alpha",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.ppo.alpha = parse_real(k, v);
         }},
        {"ppo.value_loss_weight",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.ppo.value_loss_weight = parse_real(k, v);
         }},
        {"classifier.epochs",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.classifier.epochs = parse_size(k, v);
         }},
        {"classifier.learning_rate",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.classifier.learning_rate = parse_real(k, v);
         }},
        {"split.unseen_fraction",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.unseen_fraction = parse_real(k, v);
         }},
        {"split.val_fraction",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.val_fraction = parse_real(k, v);
         }},
        {"split.exclude_classes",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.exclude_classes = parse_int_list(k, v);
         }},
        {"train.max_episodes",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.max_episodes = parse_size(k, v);
         }},
        {"train.patience",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.patience = parse_size(k, v);
         }},
        {"train.algorithm",
         [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.algorithm = rl_algorithm_from_string(v);
         }},
        {"train.selection",
         [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.selection = selection_mode_from_string(v);
         }},
        {"train.random_keep_rate",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.random_keep_rate = parse_real(k, v);
         }},
        {"train.checkpoint_every",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.checkpoint_every = parse_size(k, v);
         }},
        {"run.n_runs",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.n_runs = parse_size(k, v);
         }},
        {"run.seed",
         [](ExperimentConfig& c, const std::string& k, const std::string& v) {
             c.seed = parse_u64(k, v);
         }},
        {"io.out_dir",
         [](ExperimentConfig& c, const std::string&, const std::string& v) { c.out_dir = v; }},
        {"io.dataset",
         [](ExperimentConfig& c, const std::string&, const std::string& v) {
             c.dataset_path = v;
         }},
        {"io.format",
         [](ExperimentConfig& c, const std::string&, const std::string& v) {
             report_format_from_string(v);
             c.format = v;
         }},
    };
    return table;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    std::size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

}  // namespace

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second(cfg, key, value);
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + " line " + std::to_string(line_no) +
                              ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_override(cfg, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + " line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    validate(cfg);
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config file missing or unreadable: '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config_text(os.str(), path);
}

void validate(const ExperimentConfig& cfg) {
    if (cfg.benchmark.n_classes < 4)
        throw ConfigError("benchmark.n_classes: need at least 4 classes");
    if (cfg.benchmark.feature_dim < cfg.benchmark.d_attr)
        throw ConfigError("benchmark.feature_dim must be >= benchmark.d_attr");
    if (cfg.gen_corruption_rate < 0.0 || cfg.gen_corruption_rate > 1.0)
        throw ConfigError("generator.corruption_rate must lie in [0,1]");
    if (cfg.gen_noise_scale < 0.0) throw ConfigError("generator.noise_scale must be >= 0");
    if (cfg.gen_per_class == 0) throw ConfigError("generator.per_class must be positive");
    if (cfg.selector.d_model == 0 || cfg.selector.heads == 0 || cfg.selector.layers == 0)
        throw ConfigError("selector.{d_model,heads,layers} must be positive");
    if (cfg.selector.d_model % cfg.selector.heads != 0)
        throw ConfigError("selector.d_model must be divisible by selector.heads");
    if (cfg.selector.d_model % 2 != 0) throw ConfigError("selector.d_model must be even");
    if (cfg.selector.ff_layers == 0) throw ConfigError("selector.ff_layers must be positive");
    if (cfg.ppo.epsilon <= 0.0) throw ConfigError("ppo.epsilon must be positive");
    if (cfg.ppo.alpha < 0.0 || cfg.ppo.alpha > 1.0)
        throw ConfigError("ppo.alpha must lie in [0,1]");
    if (cfg.ppo.update_epochs == 0) throw ConfigError("ppo.update_epochs must be positive");
    if (cfg.ppo.reward_window == 0) throw ConfigError("ppo.reward_window must be positive");
    if (!(cfg.unseen_fraction > 0.0 && cfg.unseen_fraction < 1.0))
        throw ConfigError("split.unseen_fraction must lie in (0,1)");
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0))
        throw ConfigError("split.val_fraction must lie in (0,1)");
    if (cfg.max_episodes == 0) throw ConfigError("train.max_episodes must be positive");
    if (cfg.random_keep_rate < 0.0 || cfg.random_keep_rate > 1.0)
        throw ConfigError("train.random_keep_rate must lie in [0,1]");
    if (cfg.classifier.epochs == 0) throw ConfigError("classifier.epochs must be positive");
    if (cfg.n_runs == 0) throw ConfigError("run.n_runs must be positive");
    report_format_from_string(cfg.format);
}

std::string canonical_text(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "benchmark.d_attr = " << cfg.benchmark.d_attr << '\n';
    os << "benchmark.feature_dim = " << cfg.benchmark.feature_dim << '\n';
    os << "benchmark.inter_class_separation = " << format_double(cfg.benchmark.inter_class_separation)
       << '\n';
    os << "benchmark.intra_class_noise = " << format_double(cfg.benchmark.intra_class_noise)
       << '\n';
    os << "benchmark.n_classes = " << cfg.benchmark.n_classes << '\n';
    os << "benchmark.samples_per_class = " << cfg.benchmark.samples_per_class << '\n';
    os << "benchmark.seed = " << cfg.benchmark.seed << '\n';
    os << "classifier.epochs = " << cfg.classifier.epochs << '\n';
    os << "classifier.learning_rate = " << format_double(cfg.classifier.learning_rate) << '\n';
    os << "generator.corruption_mode = " << to_string(cfg.gen_corruption_mode) << '\n';
    os << "generator.corruption_rate = " << format_double(cfg.gen_corruption_rate) << '\n';
    os << "generator.noise_scale = " << format_double(cfg.gen_noise_scale) << '\n';
    os << "generator.per_class = " << cfg.gen_per_class << '\n';
    os << "io.dataset = " << cfg.dataset_path << '\n';
    os << "io.format = " << cfg.format << '\n';
    os << "io.out_dir = " << cfg.out_dir << '\n';
    os << "ppo.alpha = " << format_double(cfg.ppo.alpha) << '\n';
    os << "ppo.epsilon = " << format_double(cfg.ppo.epsilon) << '\n';
    os << "ppo.learning_rate = " << format_double(cfg.ppo.learning_rate) << '\n';
    os << "ppo.reward_window = " << cfg.ppo.reward_window << '\n';
    os << "ppo.update_epochs = " << cfg.ppo.update_epochs << '\n';
    os << "ppo.value_loss_weight = " << format_double(cfg.ppo.value_loss_weight) << '\n';
    os << "run.n_runs = " << cfg.n_runs << '\n';
    os << "run.seed = " << cfg.seed << '\n';
    os << "selector.d_model = " << cfg.selector.d_model << '\n';
    os << "selector.ff_hidden = " << cfg.selector.ff_hidden << '\n';
    os << "selector.ff_layers = " << cfg.selector.ff_layers << '\n';
    os << "selector.heads = " << cfg.selector.heads << '\n';
    os << "selector.layers = " << cfg.selector.layers << '\n';
    std::ostringstream excl;
    for (std::size_t i = 0; i < cfg.exclude_classes.size(); ++i) {
        if (i) excl << ',';
        excl << cfg.exclude_classes[i];
    }
    os << "split.exclude_classes = " << excl.str() << '\n';
    os << "split.unseen_fraction = " << format_double(cfg.unseen_fraction) << '\n';
    os << "split.val_fraction = " << format_double(cfg.val_fraction) << '\n';
    os << "train.algorithm = " << to_string(cfg.algorithm) << '\n';
    os << "train.checkpoint_every = " << cfg.checkpoint_every << '\n';
    os << "train.max_episodes = " << cfg.max_episodes << '\n';
    os << "train.patience = " << cfg.patience << '\n';
    os << "train.random_keep_rate = " << format_double(cfg.random_keep_rate) << '\n';
    os << "train.selection = " << to_string(cfg.selection) << '\n';
    return os.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    // Report destination and rendering format do not change the experiment,
    // so they stay out of the hash.
    std::istringstream lines(canonical_text(cfg));
    std::ostringstream hashed;
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("io.out_dir", 0) == 0 || line.rfind("io.format", 0) == 0) continue;
        hashed << line << '\n';
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(hashed.str())));
    return buf;
}

}  // namespace spot

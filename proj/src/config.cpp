#include "gradinv/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

#include "gradinv/io.hpp"

namespace gradinv {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct KeyEntry {
    std::string key;
    std::string doc;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <typename T>
T parse_number(const std::string& v, const std::string& key) {
    std::istringstream is(v);
    T out{};
    if (!(is >> out) || !(is >> std::ws).eof()) {
        throw ConfigError("key '" + key + "': cannot parse '" + v + "'");
    }
    return out;
}

const std::vector<KeyEntry>& key_table() {
    static const std::vector<KeyEntry> table = [] {
        std::vector<KeyEntry> t;
        auto num = [&t](const std::string& key, auto member, const std::string& doc) {
            t.push_back({key, doc,
                         [key, member](ExperimentConfig& c, const std::string& v) {
                             c.*member = parse_number<std::decay_t<decltype(c.*member)>>(v, key);
                         },
                         [member](const ExperimentConfig& c) {
                             using M = std::decay_t<decltype(c.*member)>;
                             if constexpr (std::is_floating_point_v<M>) return format_g17(c.*member);
                             else return std::to_string(c.*member);
                         }});
        };
        auto str = [&t](const std::string& key, const std::string& doc, std::string ExperimentConfig::* member) {
            t.push_back({key, doc, [member](ExperimentConfig& c, const std::string& v) { c.*member = v; },
                         [member](const ExperimentConfig& c) { return c.*member; }});
        };
        t.push_back({"seeds", "whitespace-separated seed list (default: 1 2 3 4 5)",
                     [](ExperimentConfig& c, const std::string& v) {
                         std::istringstream is(v);
                         std::vector<uint64_t> seeds;
                         uint64_t s;
                         while (is >> s) seeds.push_back(s);
                         if (!(is.eof()) || seeds.empty()) throw ConfigError("key 'seeds': cannot parse '" + v + "'");
                         c.seeds = std::move(seeds);
                     },
                     [](const ExperimentConfig& c) {
                         std::string s;
                         for (size_t i = 0; i < c.seeds.size(); ++i) {
                             if (i) s += ' ';
                             s += std::to_string(c.seeds[i]);
                         }
                         return s;
                     }});
        str("out", "output root directory (default: runs)", &ExperimentConfig::out);
        num("jobs", &ExperimentConfig::jobs, "max parallel runs (default: 1)");
        num("dataset_size", &ExperimentConfig::dataset_size, "procedural dataset size (default: 512)");
        num("image_side", &ExperimentConfig::image_side, "image side length (default: 8)");
        num("data_seed", &ExperimentConfig::data_seed, "dataset generation seed (default: 7)");
        str("model", "attacked model: linear-1|mlp-2|mlp-3|mlp-4|cnn-tiny (default: cnn-tiny)",
            &ExperimentConfig::model);
        num("input_dim", &ExperimentConfig::input_dim, "model input dimension (default: 64)");
        num("classes", &ExperimentConfig::classes, "model output classes (default: 4)");
        num("model_seed", &ExperimentConfig::model_seed, "model init seed (default: 11)");
        num("label", &ExperimentConfig::label, "fixed client label (default: 0)");
        str("client_loss", "softmax-cross-entropy|half-squared-error (default: softmax-cross-entropy)",
            &ExperimentConfig::client_loss);
        str("noise_kind", "defense noise: none|gaussian|laplacian (default: none)", &ExperimentConfig::noise_kind);
        num("noise_variance", &ExperimentConfig::noise_variance, "defense noise variance, >= 0 (default: 0)");
        num("batch_size", &ExperimentConfig::batch_size, "gradient acquisition batch size (default: 1)");
        num("T", &ExperimentConfig::T, "diffusion timesteps, in [10, 1000] (default: 50)");
        num("eta", &ExperimentConfig::eta, "DDIM stochasticity in [0, 1] (default: 0.5)");
        str("denoiser", "oracle|trained (default: oracle)", &ExperimentConfig::denoiser);
        str("denoiser_checkpoint", "checkpoint path for denoiser = trained (default: train in-process)",
            &ExperimentConfig::denoiser_checkpoint);
        num("mixture_components", &ExperimentConfig::mixture_components,
            "oracle mixture components; 1 = moment-matched Gaussian (default: 1)");
        num("mixture_variance", &ExperimentConfig::mixture_variance, "oracle mixture variance (default: 0.02)");
        str("posterior_mean_mode", "inversion|linear-coef (default: inversion)",
            &ExperimentConfig::posterior_mean_mode);
        num("epochs", &ExperimentConfig::epochs, "denoiser training epochs (default: 2000)");
        num("lr", &ExperimentConfig::lr, "denoiser training learning rate (default: 0.001)");
        num("hidden", &ExperimentConfig::hidden, "denoiser hidden width (default: 128)");
        num("train_seed", &ExperimentConfig::train_seed, "denoiser training seed (default: 3)");
        num("m_r", &ExperimentConfig::m_r, "guidance rate in [0, 1] (default: 0.2)");
        str("step_size", "guidance step size: auto or positive number (default: auto)",
            &ExperimentConfig::step_size);
        str("attack_loss", "attack loss kind, only euclidean (default: euclidean)",
            &ExperimentConfig::attack_loss_kind);
        num("max_snapshots", &ExperimentConfig::max_snapshots, "snapshots kept per run (default: 10)");
        num("dlg_iters", &ExperimentConfig::dlg_iters, "DLG baseline iterations (default: 50)");
        num("dlg_lr", &ExperimentConfig::dlg_lr, "DLG baseline base learning rate (default: 0.05)");
        num("rv_m", &ExperimentConfig::rv_m, "RV projection count M (default: 1000)");
        num("rv_n", &ExperimentConfig::rv_n, "RV sample count N (default: 310)");
        num("target_index", &ExperimentConfig::target_index,
            "dataset index of the private target; -1 derives it from the seed (default: -1)");
        return t;
    }();
    return table;
}

const KeyEntry* find_key(const std::string& key) {
    for (const auto& e : key_table()) {
        if (e.key == key) return &e;
    }
    return nullptr;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw ConfigError("seeds: list must be nonempty");
    if (jobs < 1) throw ConfigError("jobs: must be >= 1");
    if (dataset_size < 1) throw ConfigError("dataset_size: must be >= 1");
    if (image_side < 4) throw ConfigError("image_side: must be >= 4");
    if (model != "linear-1" && model != "mlp-2" && model != "mlp-3" && model != "mlp-4" && model != "cnn-tiny") {
        throw ConfigError("model: unknown spec '" + model + "'");
    }
    if (input_dim < 1 || classes < 1) throw ConfigError("input_dim/classes: must be >= 1");
    if (label < 0 || label >= classes) throw ConfigError("label: out of range for classes");
    if (client_loss != "softmax-cross-entropy" && client_loss != "half-squared-error") {
        throw ConfigError("client_loss: unknown kind '" + client_loss + "'");
    }
    if (noise_kind != "none" && noise_kind != "gaussian" && noise_kind != "laplacian") {
        throw ConfigError("noise_kind: unknown kind '" + noise_kind + "'");
    }
    if (noise_variance < 0.0) throw ConfigError("noise_variance: must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (T < 10 || T > 1000) throw ConfigError("T: must lie in [10, 1000]");
    if (eta < 0.0 || eta > 1.0) throw ConfigError("eta: must lie in [0, 1]");
    if (denoiser != "oracle" && denoiser != "trained") throw ConfigError("denoiser: unknown kind '" + denoiser + "'");
    if (mixture_components < 1) throw ConfigError("mixture_components: must be >= 1");
    if (mixture_variance <= 0.0) throw ConfigError("mixture_variance: must be > 0");
    if (posterior_mean_mode != "inversion" && posterior_mean_mode != "linear-coef") {
        throw ConfigError("posterior_mean_mode: unknown mode '" + posterior_mean_mode + "'");
    }
    if (epochs < 1) throw ConfigError("epochs: must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr: must be > 0");
    if (hidden < 1) throw ConfigError("hidden: must be >= 1");
    if (m_r < 0.0 || m_r > 1.0) throw ConfigError("m_r: must lie in [0, 1]");
    if (step_size != "auto") {
        double v = parse_number<double>(step_size, "step_size");
        if (!(v > 0.0)) throw ConfigError("step_size: must be positive or auto");
    }
    if (attack_loss_kind != "euclidean") throw ConfigError("attack_loss: only 'euclidean' is supported");
    if (max_snapshots < 0) throw ConfigError("max_snapshots: must be >= 0");
    if (dlg_iters < 1) throw ConfigError("dlg_iters: must be >= 1");
    if (!(dlg_lr > 0.0)) throw ConfigError("dlg_lr: must be > 0");
    if (rv_m < 1 || rv_n < 1) throw ConfigError("rv_m/rv_n: must be >= 1");
    if (target_index >= dataset_size) throw ConfigError("target_index: exceeds dataset_size");
    if (model == "cnn-tiny") {
        auto side = static_cast<int64_t>(std::llround(std::sqrt(static_cast<double>(input_dim))));
        if (side * side != input_dim) throw ConfigError("input_dim: cnn-tiny needs a square input");
    }
}

ClientLoss ExperimentConfig::client_loss_kind() const {
    return client_loss == "half-squared-error" ? ClientLoss::kHalfSquaredError : ClientLoss::kSoftmaxCrossEntropy;
}

PosteriorMeanMode ExperimentConfig::posterior_mode() const {
    return posterior_mean_mode == "linear-coef" ? PosteriorMeanMode::kLinearCoef : PosteriorMeanMode::kInversion;
}

std::optional<double> ExperimentConfig::step_size_value() const {
    if (step_size == "auto") return std::nullopt;
    return parse_number<double>(step_size, "step_size");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::as_kv() const {
    std::vector<std::pair<std::string, std::string>> kv;
    for (const auto& e : key_table()) kv.emplace_back(e.key, e.get(*this));
    return kv;
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    std::vector<std::string> unknown;
    while (std::getline(is, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value', got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        const KeyEntry* entry = find_key(key);
        if (!entry) {
            unknown.push_back(key + " (line " + std::to_string(lineno) + ")");
            continue;
        }
        try {
            entry->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!unknown.empty()) {
        std::string msg = origin + ": unknown keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    return parse_config_text(read_text_file(path), path);
}

std::string config_help() {
    std::string s = "Config keys (key = value, one per line, '#' starts a comment):\n";
    for (const auto& e : key_table()) {
        s += "  " + e.key;
        s.append(e.key.size() < 22 ? 22 - e.key.size() : 1, ' ');
        s += e.doc + "\n";
    }
    return s;
}

}  // namespace gradinv

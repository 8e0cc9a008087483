#include "cola/configfile.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cola {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    std::size_t b = s.find_last_not_of(" \t\r");
    if (a == std::string::npos) return "";
    return s.substr(a, b - a + 1);
}

long to_long(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const long out = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (...) {
        throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
    }
}

double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (...) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
    }
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: '" + key + "' expects a boolean, got '" + v + "'");
}

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        const std::string full = section.empty() ? key : section + "." + key;

        if (full == "run.name") cfg.name = val;
        else if (full == "run.seed") cfg.seed = static_cast<std::uint64_t>(to_long(val, full));
        else if (full == "run.precision") cfg.precision = val;
        else if (full == "run.timing") cfg.timing = to_bool(val, full);
        else if (full == "run.out_dir") cfg.out_dir = val;
        else if (full == "data.dataset") cfg.dataset = val;
        else if (full == "data.mnist_dir") cfg.mnist_dir = val;
        else if (full == "data.synth_classes") cfg.synth_classes = static_cast<int>(to_long(val, full));
        else if (full == "data.synth_per_class") cfg.synth_per_class = static_cast<int>(to_long(val, full));
        else if (full == "data.synth_test_per_class")
            cfg.synth_test_per_class = static_cast<int>(to_long(val, full));
        else if (full == "data.synth_dims") cfg.synth_dims = static_cast<int>(to_long(val, full));
        else if (full == "data.synth_sep") cfg.synth_sep = to_double(val, full);
        else if (full == "data.seed") cfg.data_seed = static_cast<std::uint64_t>(to_long(val, full));
        else if (full == "model.preset") cfg.preset = val;
        else if (full == "model.mlp_hidden") cfg.mlp_hidden = static_cast<int>(to_long(val, full));
        else if (full == "train.variant") cfg.variant = val;
        else if (full == "train.batch_size") cfg.batch_size = static_cast<int>(to_long(val, full));
        else if (full == "train.epochs") cfg.epochs = static_cast<int>(to_long(val, full));
        else if (full == "train.iterations") cfg.iterations = to_long(val, full);
        else if (full == "train.lr") cfg.lr = to_double(val, full);
        else if (full == "train.schedule") cfg.schedule = val;
        else if (full == "train.warmup_frac") cfg.warmup_frac = to_double(val, full);
        else if (full == "train.interval") cfg.interval = static_cast<int>(to_long(val, full));
        else if (full == "train.optimizer") cfg.optimizer = val;
        else if (full == "train.momentum") cfg.momentum = to_double(val, full);
        else if (full == "train.weight_decay") cfg.weight_decay = to_double(val, full);
        else if (full == "train.fit_optimizer") cfg.fit_optimizer = val;
        else if (full == "train.fit_weight_decay") cfg.fit_weight_decay = to_double(val, full);
        else if (full == "train.users") cfg.users = static_cast<int>(to_long(val, full));
        else if (full == "train.collab") cfg.collab = val;
        else if (full == "train.workers") cfg.workers = static_cast<int>(to_long(val, full));
        else if (full == "train.offload_mode") cfg.offload_mode = val;
        else if (full == "train.log_every") cfg.log_every = static_cast<int>(to_long(val, full));
        else if (full == "train.eval_each_epoch") cfg.eval_each_epoch = to_bool(val, full);
        else if (full == "train.message_log") cfg.message_log = val;
        else if (full == "adapter.kind") cfg.adapter = val;
        else if (full == "adapter.rank") cfg.rank = static_cast<int>(to_long(val, full));
        else if (full == "adapter.hidden") cfg.adapter_hidden = static_cast<int>(to_long(val, full));
        else if (full == "adapter.alpha") cfg.alpha = to_double(val, full);
        else
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + full + "'");
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

TrainOptions to_train_options(const RunConfig& cfg) {
    TrainOptions o;
    o.variant = variant_from_name(cfg.variant);
    o.batch_size = cfg.batch_size;
    o.epochs = cfg.epochs;
    o.iterations = cfg.iterations;
    o.lr = cfg.lr;
    o.schedule = schedule_from_name(cfg.schedule);
    o.warmup_frac = cfg.warmup_frac;
    o.interval = cfg.interval;
    o.seed = cfg.seed;
    o.precision = dtype_from_name(cfg.precision);

    auto make_opt = [&](const std::string& name, double wd) {
        if (name == "sgd") {
            OptimSpec s = sgd_spec(cfg.momentum);
            return s;
        }
        if (name == "adamw") return adamw_spec(wd);
        throw ConfigError("unknown optimizer '" + name + "'");
    };
    o.task_optim = make_opt(cfg.optimizer, cfg.weight_decay);
    o.fit_optim = make_opt(cfg.fit_optimizer, cfg.fit_weight_decay);

    if (cfg.adapter == "none") {
        o.use_adapters = false;
    } else {
        o.use_adapters = true;
        o.adapter_kind = adapter_kind_from_name(cfg.adapter);
        o.rank = cfg.rank;
        o.adapter_hidden = cfg.adapter_hidden;
        o.alpha = cfg.alpha;
    }

    o.users = cfg.users;
    o.collab = collab_from_name(cfg.collab);
    o.workers = cfg.workers;
    if (cfg.offload_mode == "sync" || cfg.offload_mode == "synchronous")
        o.offload_mode = OffloadMode::Synchronous;
    else if (cfg.offload_mode == "concurrent")
        o.offload_mode = OffloadMode::Concurrent;
    else
        throw ConfigError("unknown offload mode '" + cfg.offload_mode + "'");
    o.message_log_path = cfg.message_log;
    o.log_every = cfg.log_every;
    o.eval_each_epoch = cfg.eval_each_epoch;
    o.timing = cfg.timing;
    return o;
}

BaseModel build_from_config(const RunConfig& cfg) {
    const Dtype dt = dtype_from_name(cfg.precision);
    if (cfg.dataset == "mnist") return build_model(preset_from_name(cfg.preset), cfg.seed, dt, cfg.mlp_hidden);
    // Synthetic data: same preset topology sized to the dataset.
    const int in = cfg.synth_dims, out = cfg.synth_classes, h = cfg.mlp_hidden;
    if (preset_from_name(cfg.preset) == Preset::Linear)
        return build_model({{LayerKind::Affine, in, out, true}}, cfg.seed, dt);
    return build_model({{LayerKind::Affine, in, h, true},
                        {LayerKind::Relu, h, h, false},
                        {LayerKind::Affine, h, h, true},
                        {LayerKind::Relu, h, h, false},
                        {LayerKind::Affine, h, out, true}},
                       cfg.seed, dt);
}

std::string resolve_mnist_dir(const RunConfig& cfg) {
    if (!cfg.mnist_dir.empty()) return cfg.mnist_dir;
    if (const char* env = std::getenv("COLA_MNIST_DIR")) return env;
    return "data/mnist";
}

std::pair<DatasetHandle, DatasetHandle> load_data(const RunConfig& cfg) {
    if (cfg.dataset == "mnist") {
        const std::string dir = resolve_mnist_dir(cfg);
        DatasetHandle train = load_mnist_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
        train.split = "train";
        DatasetHandle test = load_mnist_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
        test.split = "test";
        return {std::move(train), std::move(test)};
    }
    if (cfg.dataset == "synth") {
        const int total = cfg.synth_per_class + cfg.synth_test_per_class;
        DatasetHandle all = synth_dataset(cfg.synth_classes, total, cfg.synth_dims, cfg.synth_sep,
                                          cfg.data_seed);
        return split_dataset(all, static_cast<double>(cfg.synth_per_class) / total);
    }
    throw ConfigError("unknown dataset '" + cfg.dataset + "'");
}

std::string run_metadata_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["artifact_version"] = kArtifactVersion;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["data_seed"] = cfg.data_seed;
    j["precision"] = cfg.precision;
    j["config"] = {
        {"dataset", cfg.dataset},
        {"preset", cfg.preset},
        {"mlp_hidden", cfg.mlp_hidden},
        {"variant", cfg.variant},
        {"batch_size", cfg.batch_size},
        {"epochs", cfg.epochs},
        {"iterations", cfg.iterations},
        {"lr", cfg.lr},
        {"schedule", cfg.schedule},
        {"interval", cfg.interval},
        {"optimizer", cfg.optimizer},
        {"fit_optimizer", cfg.fit_optimizer},
        {"users", cfg.users},
        {"collab", cfg.collab},
        {"workers", cfg.workers},
        {"offload_mode", cfg.offload_mode},
        {"adapter", cfg.adapter},
        {"rank", cfg.rank},
        {"adapter_hidden", cfg.adapter_hidden},
        {"alpha", cfg.alpha},
    };
    // Conventions the method leaves open; recorded so runs are self-describing.
    j["conventions"] = {
        {"lowrank_init", "A ~ gaussian(0, 1/rank), B = 0"},
        {"mlp_base_hidden", cfg.mlp_hidden},
        {"alpha_policy", "plain multiplier, no alpha/rank normalization"},
        {"aux_loss_reduction", "mean over buffered records"},
        {"post_hoc_merge_weighting", "equal, alpha per user as configured"},
    };
    return j.dump(2);
}

} // namespace cola

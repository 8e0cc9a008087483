#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "cola/checkpoint.hpp"
#include "cola/configfile.hpp"
#include "cola/costmodel.hpp"
#include "cola/metrics.hpp"
#include "cola/verify.hpp"

namespace fs = std::filesystem;
using namespace cola;

namespace {

int cmd_verify(std::uint64_t seed, const std::string& json_path) {
    VerifyReport report = run_verify(seed);
    std::cout << report.text();
    if (!json_path.empty()) {
        std::ofstream f(json_path);
        if (!f) throw ConfigError("cannot write " + json_path);
        f << report.json() << "\n";
    }
    return report.all_pass() ? 0 : 1;
}

int run_config(RunConfig cfg) {
    BaseModel model = build_from_config(cfg);
    auto [train, test] = load_data(cfg);
    TrainOptions options = to_train_options(cfg);

    fs::create_directories(cfg.out_dir);
    const std::string stem = cfg.out_dir + "/" + cfg.name;
    MetricsWriter metrics(stem + ".metrics.jsonl");
    {
        std::ofstream meta(stem + ".meta.json");
        meta << run_metadata_json(cfg) << "\n";
    }

    std::cout << "run " << cfg.name << ": variant=" << cfg.variant << " preset=" << cfg.preset
              << " dataset=" << cfg.dataset << " users=" << cfg.users << "\n";
    TrainResult result = run_training(std::move(model), options, train, &test,
                                      [&](const MetricPoint& p) { metrics.write(p); });
    metrics.flush();
    if (!result.adapters.empty()) save_checkpoint(stem + ".adapters.cola", result.adapters);

    for (auto it = result.history.rbegin(); it != result.history.rend(); ++it) {
        if (it->split == "test" && it->user < 0) {
            std::cout << "final test: loss=" << it->loss << " accuracy=" << it->accuracy << "\n";
            break;
        }
    }
    std::cout << "backwards=" << result.counters.backwards << " flushes=" << result.counters.flushes
              << " merges=" << result.counters.merges << "\n";
    std::cout << "metrics: " << stem << ".metrics.jsonl\n";
    return 0;
}

int cmd_cost(const RunConfig& cfg, const std::string& csv_path) {
    BaseModel model = build_from_config(cfg);
    std::vector<AdapterSpec> specs;
    for (int m = 0; m < model.num_tunable(); ++m) {
        AdapterSpec s;
        s.kind = cfg.adapter == "none" ? AdapterKind::Linear : adapter_kind_from_name(cfg.adapter);
        s.in_dim = model.tunable_in_dim(m);
        s.out_dim = model.tunable_out_dim(m);
        s.rank = cfg.rank;
        s.hidden = cfg.adapter_hidden;
        s.alpha = cfg.alpha;
        specs.push_back(s);
    }
    std::vector<CostReport> reports;
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::Ft, CostMode::Inference, cfg.batch_size));
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::Ft, CostMode::Learning, cfg.batch_size));
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::PeftUnmerged, CostMode::Inference, cfg.batch_size));
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::PeftUnmerged, CostMode::Learning, cfg.batch_size));
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::PeftMerged, CostMode::Inference, cfg.batch_size));
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::ColaUnmerged, CostMode::Inference, cfg.batch_size));
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::ColaUnmerged, CostMode::Learning, cfg.batch_size));
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::ColaMerged, CostMode::Inference, cfg.batch_size));
    reports.push_back(cost_report(model, specs, cfg.users, CostMethod::ColaMerged, CostMode::Learning, cfg.batch_size));
    std::cout << "model=" << cfg.preset << " adapter=" << cfg.adapter << " K=" << cfg.users
              << " B=" << cfg.batch_size << "\n";
    std::cout << format_cost_table(reports);
    if (!csv_path.empty()) {
        std::ofstream f(csv_path);
        if (!f) throw ConfigError("cannot write " + csv_path);
        f << format_cost_csv(reports);
    }
    return 0;
}

int cmd_plot(const std::string& metrics_path, const std::string& out_path) {
    std::ifstream f(metrics_path);
    if (!f) throw ConfigError("cannot open metrics file " + metrics_path);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw ConfigError("cannot write " + out_path);
        out = &file;
    }
    *out << "iter,epoch,split,user,loss,accuracy,wall_s\n";
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        *out << j.at("iter").get<long>() << "," << j.at("epoch").get<int>() << ","
             << j.at("split").get<std::string>() << "," << (j.contains("user") ? j.at("user").get<int>() : -1)
             << "," << j.at("loss").get<double>() << "," << j.at("accuracy").get<double>() << ","
             << j.at("wall_s").get<double>() << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ColA: decoupled fine-tuning with gradient offloading"};
    app.require_subcommand(1);

    auto* verify = app.add_subcommand("verify", "run the numerical verification suite");
    std::uint64_t seed = 0;
    std::string json_path;
    verify->add_option("--seed", seed, "base seed");
    verify->add_option("--json", json_path, "also write the report as JSON");

    auto* train = app.add_subcommand("train", "train per a config file");
    std::string config_path, out_dir, run_name;
    train->add_option("--config", config_path, "config file")->required();
    train->add_option("--out", out_dir, "override [run] out_dir");
    train->add_option("--name", run_name, "override [run] name");

    auto* ftaas = app.add_subcommand("ftaas", "multi-user fine-tuning service simulation");
    std::string ft_config, ft_mode = "collab", ft_out;
    int ft_users = 2;
    ftaas->add_option("--config", ft_config, "config file")->required();
    ftaas->add_option("--users", ft_users, "number of users K");
    ftaas->add_option("--mode", ft_mode, "joint | alone | collab");
    ftaas->add_option("--out", ft_out, "override [run] out_dir");

    auto* cost = app.add_subcommand("cost", "print the computation-space cost table");
    std::string cost_config, cost_csv;
    cost->add_option("--config", cost_config, "config file")->required();
    cost->add_option("--csv", cost_csv, "also write terms as CSV");

    auto* plot = app.add_subcommand("plot", "metrics JSON-lines -> CSV learning-curve data");
    std::string metrics_path, plot_out;
    plot->add_option("--metrics", metrics_path, "metrics .jsonl file")->required();
    plot->add_option("--out", plot_out, "output CSV (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (verify->parsed()) return cmd_verify(seed, json_path);
        if (train->parsed()) {
            RunConfig cfg = parse_config_file(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            if (!run_name.empty()) cfg.name = run_name;
            return run_config(std::move(cfg));
        }
        if (ftaas->parsed()) {
            RunConfig cfg = parse_config_file(ft_config);
            cfg.users = ft_users;
            cfg.collab = ft_mode == "collab" ? "collaboration" : ft_mode;
            if (ft_mode == "alone") cfg.variant = "unmerged";
            if (ft_mode == "collab" || ft_mode == "collaboration") cfg.variant = "merged";
            if (!ft_out.empty()) cfg.out_dir = ft_out;
            cfg.name += "_ftaas_" + ft_mode + "_k" + std::to_string(ft_users);
            return run_config(std::move(cfg));
        }
        if (cost->parsed()) return cmd_cost(parse_config_file(cost_config), cost_csv);
        if (plot->parsed()) return cmd_plot(metrics_path, plot_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        std::cerr << app.help() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

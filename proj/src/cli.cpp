#include "rrl/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rrl/bench.hpp"
#include "rrl/errors.hpp"
#include "rrl/format.hpp"
#include "rrl/rmdp.hpp"

namespace rrl {

namespace {

int env_default_threads() {
    const char* raw = std::getenv("ROBUST_LSPI_THREADS");
    if (!raw) return 1;
    char* end = nullptr;
    const long v = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || v < 1 || v > 4096) return 1;
    return static_cast<int>(v);
}

std::string read_text_file(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw invalid_input("cannot open \"" + path + "\"");
    std::ostringstream text;
    text << file.rdbuf();
    return text.str();
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<int> reps;
    std::optional<std::string> out_dir;
};

void apply(const Overrides& o, ExperimentConfig& cfg) {
    if (o.seed) cfg.base_seed = *o.seed;
    if (o.reps) cfg.replications = *o.reps;
    if (o.out_dir) cfg.output_dir = *o.out_dir;
}

void print_rows(std::ostream& out, const std::vector<CellResult>& rows) {
    out << "knob,value,seed,metric\n";
    for (const CellResult& row : rows) {
        out << row.knob << ',' << format_double(row.value) << ',' << row.seed << ','
            << format_double(row.metric) << '\n';
    }
}

int run_and_report(const ExperimentConfig& cfg, int threads) {
    run_experiment(cfg, threads);
    std::cout << "wrote " << cfg.output_dir << "/results.csv\n"
              << "wrote " << cfg.output_dir << "/aggregate.csv\n"
              << "wrote " << cfg.output_dir << "/resolved_config.json\n";
    return 0;
}

} // namespace

int cli_entry(int argc, char** argv) {
    CLI::App app{"robust least-squares policy iteration toolkit"};
    app.require_subcommand(1);

    std::string config_path, model_path, weights_path, env_path, knob;
    std::vector<double> values;
    Overrides over;
    int threads = env_default_threads();

    const auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", over.seed, "override base_seed");
        cmd->add_option("--reps", over.reps, "override replications");
        cmd->add_option("--out-dir", over.out_dir, "override output_dir");
        cmd->add_option("--threads", threads,
                        "worker threads for independent cells (env "
                        "ROBUST_LSPI_THREADS is the fallback)");
    };

    CLI::App* run = app.add_subcommand("run", "train and score one experiment config");
    run->add_option("config", config_path, "experiment config JSON")->required();
    add_common(run);

    CLI::App* sweep = app.add_subcommand("sweep", "run with the sweep given by flags");
    sweep->add_option("config", config_path, "experiment config JSON")->required();
    sweep->add_option("--knob", knob, "perturbation knob")->required();
    sweep->add_option("--values", values, "comma-separated knob values")
        ->required()
        ->delimiter(',');
    add_common(sweep);

    CLI::App* validate =
        app.add_subcommand("validate", "check a config and print resolved defaults");
    validate->add_option("config", config_path, "experiment config JSON")->required();

    CLI::App* oracle =
        app.add_subcommand("oracle", "exact robust value iteration on a model JSON");
    oracle->add_option("model", model_path, "tabular model JSON")->required();

    CLI::App* eval =
        app.add_subcommand("eval", "score stored weights across the config sweep");
    eval->add_option("--weights", weights_path, "weights CSV (iteration,index,value)")
        ->required();
    eval->add_option("--env", env_path, "experiment config JSON")->required();
    eval->add_option("--seed", over.seed, "evaluation seed (default: base_seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << '\n' << app.help();
        return 2;
    }

    try {
        if (validate->parsed()) {
            const ExperimentConfig cfg = load_experiment_config(config_path);
            std::cout << resolved_config_json(cfg);
            return 0;
        }
        if (run->parsed()) {
            ExperimentConfig cfg = load_experiment_config(config_path);
            apply(over, cfg);
            return run_and_report(cfg, threads);
        }
        if (sweep->parsed()) {
            ExperimentConfig cfg = load_experiment_config(config_path);
            apply(over, cfg);
            cfg.sweep.knob = knob;
            cfg.sweep.values = values;
            return run_and_report(cfg, threads);
        }
        if (oracle->parsed()) {
            const TabularRmdp m = rmdp_from_json(read_text_file(model_path));
            const FixedPointResult res = robust_value_iteration(m, 1e-10);
            std::cout << "state,value,greedy\n";
            for (int s = 0; s < m.n_states; ++s) {
                std::cout << s << ',' << format_double(res.value(s)) << ','
                          << (*res.greedy)[static_cast<std::size_t>(s)] << '\n';
            }
            return 0;
        }
        ExperimentConfig cfg = load_experiment_config(env_path);
        const Vec w = read_final_weights_csv(weights_path);
        const std::uint64_t seed = over.seed.value_or(cfg.base_seed);
        print_rows(std::cout, evaluate_weights(cfg, w, seed));
        return 0;
    } catch (const invalid_input& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

int cli_entry(const std::vector<std::string>& args) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("robust_lspi");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    argv.reserve(storage.size());
    for (std::string& s : storage) argv.push_back(s.data());
    return cli_entry(static_cast<int>(argv.size()), argv.data());
}

} // namespace rrl

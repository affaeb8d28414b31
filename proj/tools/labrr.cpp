// labrr: command-line front end for LAB RBF kernel ridgeless regression.
//
//   labrr synth     --fn f1 --n 750 --noise 0 --seed 1 --out f1.csv
//   labrr train     --data f1.csv --model f1.model.json [--trace f1.trace.jsonl]
//   labrr benchmark --data yacht.csv --trials 50 --results yacht.results.jsonl
//   labrr predict   --model f1.model.json --input features.csv [--out pred.csv]
//
// Exit codes: 0 success, 1 numerical failure, 2 bad arguments or input,
// 3 I/O failure. LABRR_LOG=quiet|info|debug controls stderr verbosity.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "labrr/labrr.hpp"

namespace {

using namespace labrr;

enum class LogLevel { quiet, info, debug };

LogLevel log_level() {
    const char *env = std::getenv("LABRR_LOG");
    if (!env) { return LogLevel::info; }
    const std::string v(env);
    if (v == "quiet") { return LogLevel::quiet; }
    if (v == "debug") { return LogLevel::debug; }
    return LogLevel::info;
}

struct TrainFlags {
    TrainConfig config;
    std::string selection = "y_uniform";
    std::string optimizer = "sgd";

    void add_to(CLI::App &cmd) {
        cmd.add_option("--B", config.B, "Squared-error tolerance (normalized labels)")->capture_default_str();
        cmd.add_option("--k", config.k, "Support points added per round")->capture_default_str();
        cmd.add_option("--eta", config.eta, "Learning rate")->capture_default_str();
        cmd.add_option("--L", config.L, "Gradient steps per round")->capture_default_str();
        cmd.add_option("--n0", config.n0, "Initial support size")->capture_default_str();
        cmd.add_option("--sigma0", config.sigma0, "Initial bandwidth")->capture_default_str();
        cmd.add_option("--batch", config.batch_size, "Mini-batch size")->capture_default_str();
        cmd.add_option("--seed", config.seed, "Training seed")->capture_default_str();
        cmd.add_option("--jitter", config.jitter, "Gram diagonal jitter")->capture_default_str();
        cmd.add_option("--theta-min", config.theta_bounds.min, "Lower bandwidth bound")->capture_default_str();
        cmd.add_option("--theta-max", config.theta_bounds.max, "Upper bandwidth bound")->capture_default_str();
        cmd.add_option("--max-outer", config.max_outer, "Cap on outer rounds")->capture_default_str();
        cmd.add_option("--max-support-ratio", config.max_support_ratio, "Cap on support size / data size")
            ->capture_default_str();
        cmd.add_option("--selection", selection, "y_uniform | x_kmeans | extreme_y")->capture_default_str();
        cmd.add_option("--optimizer", optimizer, "sgd | momentum | adam")->capture_default_str();
        cmd.add_option("--momentum", config.momentum, "Heavy-ball coefficient (momentum optimizer)")
            ->capture_default_str();
    }

    TrainConfig resolve() {
        config.selection = parse_support_selection(selection);
        config.optimizer = parse_optimizer(optimizer);
        config.validate();
        return config;
    }
};

RoundObserver round_logger(LogLevel level, LogLevel threshold) {
    if (level < threshold) { return {}; }
    return [level](const RoundRecord &r) {
        std::cerr << "round " << r.round << ": support=" << r.support_size << " max_err=" << r.max_error
                  << " mean_err=" << r.mean_error;
        if (level == LogLevel::debug && !r.inner_losses.empty()) {
            std::cerr << " loss " << r.inner_losses.front() << " -> " << r.inner_losses.back();
        }
        std::cerr << '\n';
    };
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
    std::string fn;
    Index n = 0;
    double noise = 0.0;
    std::uint64_t seed = 0;
    std::string out;
};

int cmd_synth(const SynthArgs &a) {
    const Dataset ds = synth(a.fn, a.n, a.noise, a.seed);
    write_csv(ds, a.out);
    const double var = (ds.y.array() - ds.y.mean()).square().mean();
    std::cout << "wrote " << a.out << ": n=" << ds.size() << " d=" << ds.dim() << " label_variance=" << var << '\n';
    return 0;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
    std::string data;
    std::string model;
    std::string trace;
    TrainFlags flags;
};

int cmd_train(TrainArgs &a) {
    const TrainConfig config = a.flags.resolve();
    const Dataset ds = normalize(load_csv(a.data));
    const auto result = train(ds, config, round_logger(log_level(), LogLevel::info));
    save_model(result.model, a.model);
    if (!a.trace.empty()) {
        std::ofstream out(a.trace);
        if (!out) { throw IoError("cannot write '" + a.trace + "'"); }
        write_trace(out, result.trace);
    }
    std::cout << "support=" << result.model.n_support() << " max_train_sq_error=" << result.trace.final_max_sq_error
              << " r0=" << sparsity_r0(result.model) << " rounds=" << result.trace.rounds.size()
              << " stop=" << to_string(result.trace.stop) << '\n';
    if (!result.trace.converged()) {
        std::cout << "warning: no convergence (" << to_string(result.trace.stop) << "); max error above B=" << config.B
                  << '\n';
    }
    return 0;
}

// --- benchmark -------------------------------------------------------------

struct BenchmarkArgs {
    std::string data;
    std::string test_csv;
    std::string synth_fn;
    Index synth_n = 750;
    double synth_noise = 0.0;
    std::uint64_t synth_seed = 0;
    bool clean_test = false;
    Index trials = 50;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 0;
    std::optional<double> clip;
    std::string results;
    std::string table;
    TrainFlags flags;
};

int cmd_benchmark(BenchmarkArgs &a) {
    ExperimentConfig config;
    if (!a.data.empty()) { config.source.csv_path = a.data; }
    if (!a.test_csv.empty()) { config.source.test_csv = a.test_csv; }
    if (!a.synth_fn.empty()) {
        config.source.synth = SynthSpec{parse_synth_function(a.synth_fn), a.synth_n, a.synth_noise, a.synth_seed};
    }
    config.source.clean_test_labels = a.clean_test;
    config.train = a.flags.resolve();
    config.split.train_fraction = a.train_fraction;
    config.split.seed = a.split_seed;
    config.trials = a.trials;
    config.clip_bound = a.clip;

    const LogLevel level = log_level();
    const auto results = run_benchmark(
        config,
        [level](const TrialRecord &t) {
            if (level == LogLevel::quiet) { return; }
            if (t.ok) {
                std::cerr << "trial " << t.trial << ": R2=" << t.report.r_squared << " support=" << t.report.n_support
                          << " stop=" << t.stop << '\n';
            } else {
                std::cerr << "trial " << t.trial << " failed: " << t.error << '\n';
            }
        },
        round_logger(level, LogLevel::debug));

    std::ofstream out(a.results);
    if (!out) { throw IoError("cannot write '" + a.results + "'"); }
    write_results(out, results);
    if (!a.table.empty()) {
        std::ofstream table(a.table);
        if (!table) { throw IoError("cannot write '" + a.table + "'"); }
        write_table(table, results);
    }
    write_table(std::cout, results);
    return results.aggregate.n_ok == 0 ? 1 : 0;
}

// --- predict ---------------------------------------------------------------

struct PredictArgs {
    std::string model;
    std::string input;
    std::string out;
    std::optional<double> clip;
};

int cmd_predict(const PredictArgs &a) {
    const LabModel model = load_model(a.model);
    RealMatrix features = load_feature_csv(a.input);
    if (features.cols() == model.dim() + 1) {
        features.conservativeResize(Eigen::NoChange, model.dim());
    } else if (features.cols() != model.dim()) {
        throw DimensionMismatch("input has " + std::to_string(features.cols()) + " columns, model expects " +
                                std::to_string(model.dim()));
    }
    RealVector pred = predict(model, model.norm_meta.normalize_features(features));
    if (a.clip) { pred = project(pred, *a.clip); }
    pred = model.norm_meta.denormalize_labels(pred);

    std::ofstream file;
    if (!a.out.empty()) {
        file.open(a.out);
        if (!file) { throw IoError("cannot write '" + a.out + "'"); }
    }
    std::ostream &out = a.out.empty() ? std::cout : file;
    for (Eigen::Index i = 0; i < pred.size(); ++i) { out << detail::format_real(pred(i)) << '\n'; }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Kernel ridgeless regression with locally-adaptive-bandwidth RBF kernels"};
    app.set_config("--config", "", "TOML/INI file with default flag values (command-line flags win)");
    app.require_subcommand(1);

    SynthArgs synth_args;
    auto *synth_cmd = app.add_subcommand("synth", "Generate a synthetic regression dataset as CSV");
    synth_cmd->add_option("--fn", synth_args.fn, "f1 | f2 | f3")->required();
    synth_cmd->add_option("--n", synth_args.n, "Number of samples")->required()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--noise", synth_args.noise, "Noise variance / label variance")->capture_default_str();
    synth_cmd->add_option("--seed", synth_args.seed, "Sampling seed")->capture_default_str();
    synth_cmd->add_option("--out", synth_args.out, "Output CSV path")->required();

    TrainArgs train_args;
    auto *train_cmd = app.add_subcommand("train", "Train a LAB model on a whole CSV dataset");
    train_cmd->add_option("--data", train_args.data, "Labelled CSV (last column is the label)")->required();
    train_cmd->add_option("--model", train_args.model, "Output model path (JSON)")->required();
    train_cmd->add_option("--trace", train_args.trace, "Output per-round trace (JSON lines)");
    train_args.flags.add_to(*train_cmd);

    BenchmarkArgs bench;
    auto *bench_cmd = app.add_subcommand("benchmark", "Repeated split/train/evaluate trials");
    auto *data_opt = bench_cmd->add_option("--data", bench.data, "Labelled CSV");
    auto *synth_opt = bench_cmd->add_option("--synth", bench.synth_fn, "Synthetic source f1 | f2 | f3");
    data_opt->excludes(synth_opt);
    bench_cmd->add_option("--synth-n", bench.synth_n, "Synthetic sample count")->capture_default_str();
    bench_cmd->add_option("--synth-noise", bench.synth_noise, "Synthetic noise ratio")->capture_default_str();
    bench_cmd->add_option("--synth-seed", bench.synth_seed, "Synthetic sampling seed")->capture_default_str();
    bench_cmd->add_flag("--clean-test", bench.clean_test, "Score synthetic runs against noise-free test labels");
    bench_cmd->add_option("--test-csv", bench.test_csv, "Fixed test set instead of random splits")->needs(data_opt);
    bench_cmd->add_option("--trials", bench.trials, "Number of trials")->capture_default_str();
    bench_cmd->add_option("--train-fraction", bench.train_fraction, "Training fraction per split")
        ->capture_default_str();
    bench_cmd->add_option("--split-seed", bench.split_seed, "Base seed of the split permutations")
        ->capture_default_str();
    bench_cmd->add_option("--clip", bench.clip, "Clamp normalized predictions to [-M, M]");
    bench_cmd->add_option("--results", bench.results, "Output results file (JSON lines)")->required();
    bench_cmd->add_option("--table", bench.table, "Output human-readable table");
    bench.flags.add_to(*bench_cmd);

    PredictArgs pred;
    auto *pred_cmd = app.add_subcommand("predict", "Predict labels for a feature CSV");
    pred_cmd->add_option("--model", pred.model, "Model file")->required();
    pred_cmd->add_option("--input", pred.input, "Feature CSV (an extra trailing label column is ignored)")
        ->required();
    pred_cmd->add_option("--out", pred.out, "Output path (default: stdout)");
    pred_cmd->add_option("--clip", pred.clip, "Clamp normalized predictions to [-M, M]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*synth_cmd) { return cmd_synth(synth_args); }
        if (*train_cmd) { return cmd_train(train_args); }
        if (*bench_cmd) {
            if (bench.data.empty() == bench.synth_fn.empty()) {
                throw InvalidArgument("benchmark needs exactly one of --data or --synth");
            }
            return cmd_benchmark(bench);
        }
        if (*pred_cmd) { return cmd_predict(pred); }
    } catch (const UnknownFunction &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const InsufficientData &e) {
        std::cerr << "error: insufficient data: " << e.what() << '\n';
        return 2;
    } catch (const IoError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const SingularSystem &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}

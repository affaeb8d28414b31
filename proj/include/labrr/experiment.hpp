#pragma once

// Repeated-trial benchmark pipeline and its line-oriented results records.
//
// Results file layout (one JSON object per line):
//   {"record":"config", ...effective configuration...}
//   {"record":"trial","trial":t,"status":"ok"|"error", ...EvalReport fields...}
//   {"record":"aggregate","n_ok":..,"n_failed":..,"r2_mean":..,"r2_std":..,
//    "support_mean":..}
// r2_std is the population standard deviation over successful trials.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "labrr/data.hpp"
#include "labrr/eval.hpp"
#include "labrr/trainer.hpp"

namespace labrr {

struct SynthSpec {
    SynthFunction function = SynthFunction::f1;
    Index n = 750;
    double noise_ratio = 0.0;
    std::uint64_t seed = 0;
};

/// Exactly one of csv_path / synth is set. test_csv supplies a fixed test set
/// instead of random splitting.
struct DataSource {
    std::optional<std::string> csv_path;
    std::optional<std::string> test_csv;
    std::optional<SynthSpec> synth;
    /// Synthetic sources only: score against noise-free test labels.
    bool clean_test_labels = false;
};

struct ExperimentConfig {
    DataSource source;
    TrainConfig train;
    SplitSpec split;  // trial_index is overwritten per trial
    Index trials = 50;
    std::optional<double> clip_bound;

    void validate() const {
        if (trials < 1) { throw InvalidArgument("trials must be >= 1"); }
        if (source.csv_path.has_value() == source.synth.has_value()) {
            throw InvalidArgument("exactly one of a CSV path or a synth spec is required");
        }
        if (source.test_csv && !source.csv_path) { throw InvalidArgument("a test CSV requires a training CSV"); }
        if (clip_bound && !(*clip_bound > 0.0)) { throw InvalidArgument("clip bound must be > 0"); }
        split.validate();
        train.validate();
    }
};

struct TrialRecord {
    Index trial = 0;
    bool ok = false;
    std::string error;
    EvalReport report;
    std::string stop;
    bool converged = false;
};

struct Aggregate {
    Index n_ok = 0;
    Index n_failed = 0;
    double r2_mean = 0.0;
    double r2_std = 0.0;
    double support_mean = 0.0;
};

struct ResultsRecord {
    nlohmann::ordered_json config;
    std::vector<TrialRecord> trials;
    Aggregate aggregate;
};

inline Aggregate aggregate_trials(const std::vector<TrialRecord> &trials) {
    Aggregate a;
    double sum = 0.0;
    double support = 0.0;
    for (const auto &t : trials) {
        if (!t.ok) {
            ++a.n_failed;
            continue;
        }
        ++a.n_ok;
        sum += t.report.r_squared;
        support += static_cast<double>(t.report.n_support);
    }
    if (a.n_ok == 0) { return a; }
    a.r2_mean = sum / static_cast<double>(a.n_ok);
    a.support_mean = support / static_cast<double>(a.n_ok);
    double ss = 0.0;
    for (const auto &t : trials) {
        if (t.ok) { ss += (t.report.r_squared - a.r2_mean) * (t.report.r_squared - a.r2_mean); }
    }
    a.r2_std = std::sqrt(ss / static_cast<double>(a.n_ok));
    return a;
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig &c) {
    nlohmann::ordered_json j;
    j["record"] = "config";
    if (c.source.csv_path) { j["csv"] = *c.source.csv_path; }
    if (c.source.test_csv) { j["test_csv"] = *c.source.test_csv; }
    if (c.source.synth) {
        j["synth"] = {{"fn", to_string(c.source.synth->function)},
                      {"n", c.source.synth->n},
                      {"noise", c.source.synth->noise_ratio},
                      {"seed", c.source.synth->seed}};
        j["clean_test_labels"] = c.source.clean_test_labels;
    }
    const auto &t = c.train;
    j["train"] = {{"B", t.B},
                  {"k", t.k},
                  {"eta", t.eta},
                  {"L", t.L},
                  {"n0", t.n0},
                  {"sigma0", t.sigma0},
                  {"batch", t.batch_size},
                  {"theta_min", t.theta_bounds.min},
                  {"theta_max", t.theta_bounds.max},
                  {"max_outer", t.max_outer},
                  {"max_support_ratio", t.max_support_ratio},
                  {"selection", to_string(t.selection)},
                  {"optimizer", to_string(t.optimizer)},
                  {"momentum", t.momentum},
                  {"seed", t.seed},
                  {"jitter", t.jitter}};
    j["split"] = {{"train_fraction", c.split.train_fraction}, {"seed", c.split.seed}};
    j["trials"] = c.trials;
    if (c.clip_bound) { j["clip"] = *c.clip_bound; }
    return j;
}

inline nlohmann::ordered_json trial_to_json(const TrialRecord &t) {
    nlohmann::ordered_json j;
    j["record"] = "trial";
    j["trial"] = t.trial;
    j["status"] = t.ok ? "ok" : "error";
    if (!t.ok) {
        j["error"] = t.error;
        return j;
    }
    j["r2"] = t.report.r_squared;
    j["mse"] = t.report.mse;
    j["n_test"] = t.report.n_test;
    j["n_support"] = t.report.n_support;
    j["r0"] = t.report.r0;
    j["max_train_sq_error"] = t.report.max_train_sq_error;
    j["converged"] = t.converged;
    j["stop"] = t.stop;
    j["wall_clock_seconds"] = t.report.wall_clock_seconds;
    return j;
}

inline nlohmann::ordered_json aggregate_to_json(const Aggregate &a) {
    nlohmann::ordered_json j;
    j["record"] = "aggregate";
    j["n_ok"] = a.n_ok;
    j["n_failed"] = a.n_failed;
    j["r2_mean"] = a.r2_mean;
    j["r2_std"] = a.r2_std;
    j["support_mean"] = a.support_mean;
    return j;
}

inline void write_results(std::ostream &out, const ResultsRecord &r) {
    out << r.config.dump() << '\n';
    for (const auto &t : r.trials) { out << trial_to_json(t).dump() << '\n'; }
    out << aggregate_to_json(r.aggregate).dump() << '\n';
}

/// Parses a results file and checks that the aggregate line matches the
/// per-trial rows to 1e-12.
inline ResultsRecord read_results(std::istream &in) {
    ResultsRecord r;
    std::string line;
    bool have_aggregate = false;
    Aggregate stored;
    while (std::getline(in, line)) {
        if (line.empty()) { continue; }
        const auto j = nlohmann::ordered_json::parse(line);
        const auto kind = j.at("record").get<std::string>();
        if (kind == "config") {
            r.config = j;
        } else if (kind == "trial") {
            TrialRecord t;
            t.trial = j.at("trial").get<Index>();
            t.ok = j.at("status").get<std::string>() == "ok";
            if (t.ok) {
                t.report.r_squared = j.at("r2").get<double>();
                t.report.mse = j.at("mse").get<double>();
                t.report.n_test = j.at("n_test").get<Index>();
                t.report.n_support = j.at("n_support").get<Index>();
                t.report.r0 = j.at("r0").get<Index>();
                t.report.max_train_sq_error = j.at("max_train_sq_error").get<double>();
                t.report.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
                t.converged = j.at("converged").get<bool>();
                t.stop = j.at("stop").get<std::string>();
            } else {
                t.error = j.value("error", "");
            }
            r.trials.push_back(std::move(t));
        } else if (kind == "aggregate") {
            have_aggregate = true;
            stored.n_ok = j.at("n_ok").get<Index>();
            stored.n_failed = j.at("n_failed").get<Index>();
            stored.r2_mean = j.at("r2_mean").get<double>();
            stored.r2_std = j.at("r2_std").get<double>();
            stored.support_mean = j.at("support_mean").get<double>();
        }
    }
    if (!have_aggregate) { throw InvalidArgument("results: missing aggregate record"); }
    r.aggregate = aggregate_trials(r.trials);
    const auto &a = r.aggregate;
    if (a.n_ok != stored.n_ok || a.n_failed != stored.n_failed || std::abs(a.r2_mean - stored.r2_mean) > 1e-12 ||
        std::abs(a.r2_std - stored.r2_std) > 1e-12 || std::abs(a.support_mean - stored.support_mean) > 1e-12) {
        throw InvalidArgument("results: aggregate does not match per-trial rows");
    }
    return r;
}

inline void write_table(std::ostream &out, const ResultsRecord &r) {
    out << "trial  status        R2       MSE   n_sv    R0  max_train_sq_err  stop\n";
    for (const auto &t : r.trials) {
        if (!t.ok) {
            out << std::setw(5) << t.trial << "  error   " << t.error << '\n';
            continue;
        }
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%5lld  ok      %9.6f %9.3e %6lld %5lld  %16.3e  %s\n",
                      static_cast<long long>(t.trial), t.report.r_squared, t.report.mse,
                      static_cast<long long>(t.report.n_support), static_cast<long long>(t.report.r0),
                      t.report.max_train_sq_error, t.stop.c_str());
        out << buf;
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "R2 = %.4f +/- %.4f over %lld trial(s), mean support %.1f, %lld failed\n",
                  r.aggregate.r2_mean, r.aggregate.r2_std, static_cast<long long>(r.aggregate.n_ok),
                  r.aggregate.support_mean, static_cast<long long>(r.aggregate.n_failed));
    out << buf;
}

/// Normalized train/test pair for one trial.
struct TrialData {
    Dataset train;
    Dataset test;
};

/// Loads or generates the full dataset once; trials share it.
class TrialSource {
public:
    explicit TrialSource(const ExperimentConfig &config) : config_(config) {
        const auto &src = config.source;
        if (src.synth) {
            auto s = synth_with_clean(src.synth->function, src.synth->n, src.synth->noise_ratio, src.synth->seed);
            full_ = normalize(s.noisy);
            clean_ = full_.norm_meta->normalize_labels(s.clean);
        } else if (src.test_csv) {
            const Dataset train = load_csv(*src.csv_path);
            const Dataset test = load_csv(*src.test_csv);
            require_same(test.dim(), train.dim(), "test CSV feature count");
            Dataset both;
            both.x.resize(train.size() + test.size(), train.dim());
            both.x << train.x, test.x;
            both.y.resize(train.size() + test.size());
            both.y << train.y, test.y;
            both.name = train.name;
            full_ = normalize(both);
            n_fixed_train_ = train.size();
        } else {
            full_ = normalize(load_csv(*src.csv_path));
        }
    }

    [[nodiscard]] const Dataset &full() const { return full_; }

    [[nodiscard]] TrialData trial(Index t) const {
        std::vector<Index> train_rows;
        std::vector<Index> test_rows;
        if (n_fixed_train_) {
            for (Index i = 0; i < full_.size(); ++i) { (i < *n_fixed_train_ ? train_rows : test_rows).push_back(i); }
        } else {
            SplitSpec spec = config_.split;
            spec.trial_index = static_cast<std::uint64_t>(t);
            const auto perm = split_permutation(full_.size(), spec);
            const auto n_train =
                static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(full_.size())));
            train_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
            test_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
        }
        TrialData d{full_.subset(train_rows), full_.subset(test_rows)};
        if (clean_ && config_.source.clean_test_labels) {
            for (std::size_t r = 0; r < test_rows.size(); ++r) {
                d.test.y(static_cast<Index>(r)) = (*clean_)(test_rows[r]);
            }
        }
        return d;
    }

private:
    ExperimentConfig config_;
    Dataset full_;
    std::optional<RealVector> clean_;
    std::optional<Index> n_fixed_train_;
};

using TrialObserver = std::function<void(const TrialRecord &)>;

/// Runs every trial: split, train, evaluate on the held-out rows. A failing
/// trial is recorded with its error and left out of the aggregate.
inline ResultsRecord run_benchmark(const ExperimentConfig &config, const TrialObserver &observer = {},
                                   const RoundObserver &round_observer = {}) {
    config.validate();
    const TrialSource source(config);
    ResultsRecord results;
    results.config = config_to_json(config);
    for (Index t = 0; t < config.trials; ++t) {
        TrialRecord rec;
        rec.trial = t;
        const auto start = std::chrono::steady_clock::now();
        try {
            const TrialData data = source.trial(t);
            TrainConfig tc = config.train;
            tc.seed = config.train.seed + static_cast<std::uint64_t>(t);
            const TrainResult trained = train(data.train, tc, round_observer);
            rec.report = evaluate(trained.model, data.test.x, data.test.y, config.clip_bound);
            rec.report.max_train_sq_error = trained.trace.final_max_sq_error;
            rec.converged = trained.trace.converged();
            rec.stop = std::string(to_string(trained.trace.stop));
            rec.ok = true;
        } catch (const std::exception &e) {
            rec.ok = false;
            rec.error = e.what();
        }
        rec.report.wall_clock_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (observer) { observer(rec); }
        results.trials.push_back(std::move(rec));
    }
    results.aggregate = aggregate_trials(results.trials);
    return results;
}

}  // namespace labrr

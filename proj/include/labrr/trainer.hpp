#pragma once

// Bandwidth learning for LAB kernels with a dynamically growing support set.
//
// Each outer round runs L SGD steps on the bandwidths, where the loss is the
// squared error of the support interpolant on mini-batches drawn from the
// non-support data. The interpolant is then refit and the k non-support
// points with the largest squared error join the support set. Training stops
// once every non-support squared error is at most B.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "labrr/data.hpp"
#include "labrr/eval.hpp"
#include "labrr/kernels.hpp"
#include "labrr/ridgeless.hpp"

namespace labrr {

using Index = Eigen::Index;

enum class SupportSelection { y_uniform, x_kmeans, extreme_y };

/// Update rule for the bandwidths. sgd is plain clipped gradient descent;
/// momentum adds a heavy-ball term; adam rescales each coordinate by running
/// gradient moments, which keeps step sizes bounded when the interpolant is
/// ill-conditioned and the raw gradient is huge.
enum class Optimizer { sgd, momentum, adam };

inline Optimizer parse_optimizer(std::string_view s) {
    if (s == "sgd") { return Optimizer::sgd; }
    if (s == "momentum") { return Optimizer::momentum; }
    if (s == "adam") { return Optimizer::adam; }
    throw InvalidArgument("unknown optimizer '" + std::string(s) + "'");
}

inline std::string_view to_string(Optimizer o) {
    switch (o) {
        case Optimizer::sgd: return "sgd";
        case Optimizer::momentum: return "momentum";
        case Optimizer::adam: return "adam";
    }
    return "?";
}

inline SupportSelection parse_support_selection(std::string_view s) {
    if (s == "y_uniform") { return SupportSelection::y_uniform; }
    if (s == "x_kmeans") { return SupportSelection::x_kmeans; }
    if (s == "extreme_y") { return SupportSelection::extreme_y; }
    throw InvalidArgument("unknown selection strategy '" + std::string(s) + "'");
}

inline std::string_view to_string(SupportSelection s) {
    switch (s) {
        case SupportSelection::y_uniform: return "y_uniform";
        case SupportSelection::x_kmeans: return "x_kmeans";
        case SupportSelection::extreme_y: return "extreme_y";
    }
    return "?";
}

struct TrainConfig {
    double B = 1e-3;          // squared-error tolerance, normalized label units
    Index k = 10;             // support points added per outer round
    double eta = 0.01;        // learning rate
    Index L = 20;             // SGD steps per outer round
    Index n0 = 20;            // initial support size
    double sigma0 = 1.0;      // initial bandwidth
    Index batch_size = 128;
    BandwidthBounds theta_bounds{};
    Index max_outer = 1000;
    double max_support_ratio = 0.8;
    SupportSelection selection = SupportSelection::y_uniform;
    std::uint64_t seed = 0;
    double jitter = kDefaultJitter;
    Optimizer optimizer = Optimizer::sgd;
    double momentum = 0.9;  // heavy-ball coefficient, used by Optimizer::momentum only

    void validate() const {
        if (!(B > 0.0)) { throw InvalidArgument("B must be > 0"); }
        if (k < 1) { throw InvalidArgument("k must be >= 1"); }
        if (!(eta >= 0.0)) { throw InvalidArgument("eta must be >= 0"); }
        if (L < 0) { throw InvalidArgument("L must be >= 0"); }
        if (n0 < 1) { throw InvalidArgument("n0 must be >= 1"); }
        if (batch_size < 1) { throw InvalidArgument("batch size must be >= 1"); }
        if (max_outer < 1) { throw InvalidArgument("max_outer must be >= 1"); }
        if (!(max_support_ratio > 0.0 && max_support_ratio <= 1.0)) {
            throw InvalidArgument("max_support_ratio must be in (0, 1]");
        }
        if (!(jitter >= 0.0)) { throw InvalidArgument("jitter must be >= 0"); }
        if (!(momentum >= 0.0 && momentum < 1.0)) { throw InvalidArgument("momentum must be in [0, 1)"); }
        theta_bounds.validate();
        if (sigma0 < theta_bounds.min || sigma0 > theta_bounds.max) {
            throw InvalidArgument("sigma0 must lie within the bandwidth bounds");
        }
    }
};

// ---------------------------------------------------------------------------
// Initial support selection

namespace detail {

// Indices sorted by ascending label; ties keep index order.
inline std::vector<Index> label_order(const RealVector &y) {
    std::vector<Index> order(static_cast<std::size_t>(y.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&y](Index a, Index b) { return y(a) < y(b); });
    return order;
}

inline std::vector<Index> rank_spaced(const std::vector<Index> &order, Index n0) {
    const auto n = static_cast<Index>(order.size());
    std::vector<Index> picked;
    picked.reserve(static_cast<std::size_t>(n0));
    for (Index i = 0; i < n0; ++i) {
        const Index rank = n0 == 1 ? 0 : (i * (n - 1)) / (n0 - 1);
        picked.push_back(order[static_cast<std::size_t>(rank)]);
    }
    return picked;
}

inline std::vector<Index> kmeans_nearest(const RealMatrix &x, Index n0, std::uint64_t seed, int iterations) {
    const Index n = x.rows();
    std::mt19937_64 rng(seed);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    RealMatrix centers(n0, x.cols());
    for (Index c = 0; c < n0; ++c) { centers.row(c) = x.row(perm[static_cast<std::size_t>(c)]); }

    std::vector<Index> assign(static_cast<std::size_t>(n), 0);
    for (int it = 0; it < iterations; ++it) {
        for (Index i = 0; i < n; ++i) {
            Index best = 0;
            (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
            assign[static_cast<std::size_t>(i)] = best;
        }
        RealMatrix sums = RealMatrix::Zero(n0, x.cols());
        std::vector<Index> counts(static_cast<std::size_t>(n0), 0);
        for (Index i = 0; i < n; ++i) {
            sums.row(assign[static_cast<std::size_t>(i)]) += x.row(i);
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        for (Index c = 0; c < n0; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centers.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
            }
        }
    }

    std::vector<Index> picked;
    std::vector<bool> taken(static_cast<std::size_t>(n), false);
    for (Index c = 0; c < n0; ++c) {
        Index nearest = 0;
        (x.rowwise() - centers.row(c)).rowwise().squaredNorm().minCoeff(&nearest);
        if (!taken[static_cast<std::size_t>(nearest)]) {
            taken[static_cast<std::size_t>(nearest)] = true;
            picked.push_back(nearest);
        }
    }
    return picked;
}

}  // namespace detail

/// Chooses the initial support indices.
///
/// y_uniform takes labels at evenly spaced ranks floor(i (N-1) / (n0-1));
/// x_kmeans takes the data point nearest to each of n0 k-means centers, then
/// tops up duplicates from the y_uniform ranking; extreme_y takes the n0
/// largest labels.
inline std::vector<Index> select_initial_support(const Dataset &data, Index n0, SupportSelection strategy,
                                                 std::uint64_t seed) {
    const Index n = data.size();
    if (n0 < 1) { throw InvalidArgument("n0 must be >= 1"); }
    if (n0 > n) {
        throw InsufficientData("insufficient data: n0 = " + std::to_string(n0) + " exceeds dataset size " +
                               std::to_string(n));
    }
    const auto order = detail::label_order(data.y);
    switch (strategy) {
        case SupportSelection::y_uniform: return detail::rank_spaced(order, n0);
        case SupportSelection::extreme_y: return {order.end() - n0, order.end()};
        case SupportSelection::x_kmeans: {
            auto picked = detail::kmeans_nearest(data.x, n0, seed, 50);
            std::vector<bool> taken(static_cast<std::size_t>(n), false);
            for (Index i : picked) { taken[static_cast<std::size_t>(i)] = true; }
            auto top_up = [&](const std::vector<Index> &candidates) {
                for (Index i : candidates) {
                    if (static_cast<Index>(picked.size()) >= n0) { return; }
                    if (!taken[static_cast<std::size_t>(i)]) {
                        taken[static_cast<std::size_t>(i)] = true;
                        picked.push_back(i);
                    }
                }
            };
            top_up(detail::rank_spaced(order, n0));
            top_up(order);
            return picked;
        }
    }
    throw InvalidArgument("unknown selection strategy");
}

// ---------------------------------------------------------------------------
// Loss and exact gradient

struct LossAndGrad {
    double loss = 0.0;
    RealMatrix grad;  // n_sv x dim, aligned with the bandwidth set
};

/// Squared batch error of the support interpolant and its exact gradient
/// with respect to every bandwidth, including the dependence of alpha on Theta.
///
/// With A = K + jitter I, alpha = A^-1 Y_sv, residuals r = K_b alpha - y_b and
/// u = A^-T (2 K_b^T r):
///
///   dloss/dtheta_jm = -4 theta_jm alpha_j sum_b r_b K_bj (x_bm - x_jm)^2
///                     +2 theta_jm alpha_j sum_i u_i K_ij (x_im - x_jm)^2
inline LossAndGrad batch_loss_and_grad(const RealMatrix &support_x, const RealVector &support_y,
                                       const BandwidthSet &theta, double jitter, const RealMatrix &batch_x,
                                       const RealVector &batch_y) {
    require_same(support_y.size(), support_x.rows(), "batch_loss_and_grad: support labels");
    require_same(batch_y.size(), batch_x.rows(), "batch_loss_and_grad: batch labels");
    require_same(batch_x.cols(), support_x.cols(), "batch_loss_and_grad: batch dim");

    const RealMatrix k = lab_matrix(support_x, support_x, theta);
    const RegularizedLU lu(k, jitter);
    const RealVector alpha = lu.solve(support_y);
    const RealMatrix kb = lab_matrix(batch_x, support_x, theta);
    const RealVector r = kb * alpha - batch_y;
    const RealVector u = lu.solve_transpose(2.0 * (kb.transpose() * r));

    const RealMatrix w_batch = r.asDiagonal() * kb;
    const RealMatrix w_support = u.asDiagonal() * k;

    LossAndGrad out;
    out.loss = r.squaredNorm();
    out.grad.resize(support_x.rows(), support_x.cols());
    for (Index m = 0; m < support_x.cols(); ++m) {
        const auto centers = support_x.col(m).transpose().array();
        const RealVector direct =
            (w_batch.array() * (batch_x.col(m).array().replicate(1, centers.size()).rowwise() - centers).square())
                .colwise()
                .sum()
                .transpose();
        const RealVector through_alpha =
            (w_support.array() * (support_x.col(m).array().replicate(1, centers.size()).rowwise() - centers).square())
                .colwise()
                .sum()
                .transpose();
        out.grad.col(m) = (theta.values().col(m).array() * alpha.array() *
                           (-4.0 * direct.array() + 2.0 * through_alpha.array()))
                              .matrix();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training state machine

/// Per-coordinate optimizer buffers, row-aligned with the bandwidth set.
struct OptimizerState {
    RealMatrix first;   // velocity (momentum) or first moment (adam)
    RealMatrix second;  // second moment (adam)
    long long steps = 0;

    static OptimizerState zeros(Index n_sv, Index dim) {
        return {RealMatrix::Zero(n_sv, dim), RealMatrix::Zero(n_sv, dim), 0};
    }

    /// Zero-initialized rows for newly added support points.
    void grow(Index rows) {
        auto pad = [rows](RealMatrix &m) {
            RealMatrix g = RealMatrix::Zero(m.rows() + rows, m.cols());
            g.topRows(m.rows()) = m;
            m = std::move(g);
        };
        pad(first);
        pad(second);
    }

    /// Bandwidth increment for one step given the gradient.
    RealMatrix step(const RealMatrix &grad, const TrainConfig &config) {
        ++steps;
        switch (config.optimizer) {
            case Optimizer::sgd: return -config.eta * grad;
            case Optimizer::momentum:
                first = config.momentum * first - config.eta * grad;
                return first;
            case Optimizer::adam: {
                constexpr double beta1 = 0.9;
                constexpr double beta2 = 0.999;
                constexpr double eps = 1e-8;
                first = beta1 * first + (1.0 - beta1) * grad;
                second = beta2 * second + (1.0 - beta2) * grad.cwiseAbs2();
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
                return (-config.eta * (first.array() / c1) / ((second.array() / c2).sqrt() + eps)).matrix();
            }
        }
        return RealMatrix::Zero(grad.rows(), grad.cols());
    }
};

struct TrainState {
    RealMatrix support_x;
    RealVector support_y;
    BandwidthSet theta;
    OptimizerState optimizer;
    RealMatrix pool_x;  // non-support data
    RealVector pool_y;
};

struct SgdRoundResult {
    BandwidthSet theta;
    OptimizerState optimizer;
    std::vector<double> losses;  // one batch loss per step, before the update
};

/// L clipped gradient steps on the bandwidths, each on a fresh batch drawn
/// uniformly without replacement from the non-support pool.
inline SgdRoundResult sgd_round(const TrainState &state, const TrainConfig &config, std::mt19937_64 &rng) {
    SgdRoundResult out{state.theta, state.optimizer, {}};
    if (out.optimizer.first.rows() != state.theta.n_sv()) {
        out.optimizer = OptimizerState::zeros(state.theta.n_sv(), state.theta.dim());
    }
    const Index pool = state.pool_x.rows();
    if (pool == 0 || config.L == 0) { return out; }

    const Index b = std::min(config.batch_size, pool);
    std::vector<Index> order(static_cast<std::size_t>(pool));
    RealMatrix batch_x(b, state.pool_x.cols());
    RealVector batch_y(b);
    out.losses.reserve(static_cast<std::size_t>(config.L));
    for (Index step = 0; step < config.L; ++step) {
        std::iota(order.begin(), order.end(), Index{0});
        for (Index i = 0; i < b; ++i) {
            std::uniform_int_distribution<Index> pick(i, pool - 1);
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
            batch_x.row(i) = state.pool_x.row(order[static_cast<std::size_t>(i)]);
            batch_y(i) = state.pool_y(order[static_cast<std::size_t>(i)]);
        }
        const auto lg =
            batch_loss_and_grad(state.support_x, state.support_y, out.theta, config.jitter, batch_x, batch_y);
        out.losses.push_back(lg.loss);
        out.theta.add_clipped(out.optimizer.step(lg.grad, config));
    }
    return out;
}

/// Positions of the k largest errors, ordered by descending error then
/// ascending position. Returns every position when k covers them all.
inline std::vector<Index> grow_support(const RealVector &errors, Index k) {
    if (k < 1) { throw InvalidArgument("grow_support: k must be >= 1"); }
    std::vector<Index> order(static_cast<std::size_t>(errors.size()));
    std::iota(order.begin(), order.end(), Index{0});
    const auto take = static_cast<std::size_t>(std::min<Index>(k, errors.size()));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&errors](Index a, Index b) { return errors(a) > errors(b) || (errors(a) == errors(b) && a < b); });
    order.resize(take);
    return order;
}

enum class StopReason { converged, support_cap, outer_cap };

inline std::string_view to_string(StopReason r) {
    switch (r) {
        case StopReason::converged: return "converged";
        case StopReason::support_cap: return "support_cap";
        case StopReason::outer_cap: return "outer_cap";
    }
    return "?";
}

struct RoundRecord {
    Index round = 0;
    Index support_size = 0;
    double max_error = 0.0;   // over the non-support data after the round's refit
    double mean_error = 0.0;
    std::vector<double> inner_losses;
};

struct TrainTrace {
    std::vector<RoundRecord> rounds;
    StopReason stop = StopReason::outer_cap;
    /// Max squared error of the final model over all training data (support included).
    double final_max_sq_error = 0.0;

    /// False when a cap was hit before every error fell below B.
    [[nodiscard]] bool converged() const { return stop == StopReason::converged; }
};

struct TrainResult {
    LabModel model;
    TrainTrace trace;
    std::vector<Index> support_indices;  // dataset rows, in the order they joined
};

using RoundObserver = std::function<void(const RoundRecord &)>;

inline TrainResult train(const Dataset &data, const TrainConfig &config, const RoundObserver &observer = {}) {
    config.validate();
    const Index n = data.size();
    if (n == 0) { throw EmptyDataset("train: empty dataset"); }
    const NormMeta meta = data.norm_meta.value_or(NormMeta::identity(data.dim()));

    std::vector<Index> support = select_initial_support(data, config.n0, config.selection, config.seed);
    std::vector<bool> in_support(static_cast<std::size_t>(n), false);
    for (Index i : support) { in_support[static_cast<std::size_t>(i)] = true; }
    const Index cap = std::max<Index>(
        config.n0, static_cast<Index>(std::floor(config.max_support_ratio * static_cast<double>(n))));

    std::mt19937_64 rng(config.seed);
    TrainState state;
    state.theta = BandwidthSet::constant(config.n0, data.dim(), config.sigma0, config.theta_bounds);
    state.optimizer = OptimizerState::zeros(config.n0, data.dim());

    TrainResult result;
    std::vector<Index> pool;
    for (Index round = 0;; ++round) {
        const Dataset sv = data.subset(support);
        state.support_x = sv.x;
        state.support_y = sv.y;
        pool.clear();
        for (Index i = 0; i < n; ++i) {
            if (!in_support[static_cast<std::size_t>(i)]) { pool.push_back(i); }
        }
        const Dataset rest = data.subset(pool);
        state.pool_x = rest.x;
        state.pool_y = rest.y;

        auto sgd = sgd_round(state, config, rng);
        state.theta = std::move(sgd.theta);
        state.optimizer = std::move(sgd.optimizer);

        result.model = fit_lab(state.support_x, state.support_y, state.theta, config.jitter, meta);
        const RealVector errors = pool.empty() ? RealVector() : RealVector((predict(result.model, state.pool_x) - state.pool_y).array().square());

        RoundRecord rec;
        rec.round = round;
        rec.support_size = static_cast<Index>(support.size());
        rec.max_error = errors.size() ? errors.maxCoeff() : 0.0;
        rec.mean_error = errors.size() ? errors.mean() : 0.0;
        rec.inner_losses = std::move(sgd.losses);
        if (observer) { observer(rec); }
        result.trace.rounds.push_back(std::move(rec));

        const double worst = result.trace.rounds.back().max_error;
        if (worst <= config.B) {
            result.trace.stop = StopReason::converged;
            break;
        }
        if (static_cast<Index>(support.size()) >= cap) {
            result.trace.stop = StopReason::support_cap;
            break;
        }
        if (round + 1 >= config.max_outer) {
            result.trace.stop = StopReason::outer_cap;
            break;
        }

        const auto added = grow_support(errors, std::min(config.k, cap - static_cast<Index>(support.size())));
        for (Index pos : added) {
            const Index idx = pool[static_cast<std::size_t>(pos)];
            support.push_back(idx);
            in_support[static_cast<std::size_t>(idx)] = true;
        }
        const RealMatrix mean_row = state.theta.values().colwise().mean();
        state.theta.append(mean_row.replicate(static_cast<Index>(added.size()), 1));
        state.optimizer.grow(static_cast<Index>(added.size()));
    }

    result.trace.final_max_sq_error = (predict(result.model, data.x) - data.y).array().square().maxCoeff();
    result.support_indices = std::move(support);
    return result;
}

/// One JSON object per outer round, newline-terminated.
inline void write_trace(std::ostream &out, const TrainTrace &trace) {
    for (const auto &r : trace.rounds) {
        nlohmann::ordered_json j;
        j["record"] = "round";
        j["round"] = r.round;
        j["support_size"] = r.support_size;
        j["max_error"] = r.max_error;
        j["mean_error"] = r.mean_error;
        j["inner_losses"] = r.inner_losses;
        out << j.dump() << '\n';
    }
    nlohmann::ordered_json end;
    end["record"] = "end";
    end["stop"] = to_string(trace.stop);
    end["converged"] = trace.converged();
    end["final_max_sq_error"] = trace.final_max_sq_error;
    out << end.dump() << '\n';
}

}  // namespace labrr

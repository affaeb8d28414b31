#pragma once

#include <algorithm>
#include <optional>

#include "labrr/ridgeless.hpp"

namespace labrr {

/// |alpha_i| at or below this counts as a zero coefficient.
inline constexpr double kZeroCoefficient = 1e-12;

struct EvalReport {
    double r_squared = 0.0;
    double mse = 0.0;
    Eigen::Index n_test = 0;
    Eigen::Index n_support = 0;
    Eigen::Index r0 = 0;
    double max_train_sq_error = 0.0;
    double wall_clock_seconds = 0.0;
};

/// Coefficient of determination 1 - SS_res / SS_tot.
inline double r_squared(const RealVector &y_true, const RealVector &y_pred) {
    require_same(y_pred.size(), y_true.size(), "r_squared: lengths");
    if (y_true.size() < 2) { throw InvalidArgument("r_squared: need at least 2 samples"); }
    const double ss_tot = (y_true.array() - y_true.mean()).square().sum();
    if (!(ss_tot > 0.0)) { throw DegenerateLabels("r_squared: all labels are equal"); }
    return 1.0 - (y_true - y_pred).squaredNorm() / ss_tot;
}

inline double mse(const RealVector &y_true, const RealVector &y_pred) {
    require_same(y_pred.size(), y_true.size(), "mse: lengths");
    if (y_true.size() == 0) { throw InvalidArgument("mse: empty input"); }
    return (y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size());
}

/// Clamp to [-bound, bound].
inline double project(double v, double bound) {
    if (!(bound > 0.0)) { throw InvalidArgument("project: bound must be > 0"); }
    return std::clamp(v, -bound, bound);
}

inline RealVector project(const RealVector &v, double bound) {
    if (!(bound > 0.0)) { throw InvalidArgument("project: bound must be > 0"); }
    return v.cwiseMax(-bound).cwiseMin(bound);
}

/// Number of kernel sections with a nonzero coefficient.
inline Eigen::Index sparsity_r0(const LabModel &model) {
    return (model.alpha.array().abs() > kZeroCoefficient).count();
}

/// Test-set metrics in normalized units. clip_bound applies project() to the
/// predictions first when set.
inline EvalReport evaluate(const LabModel &model, const RealMatrix &test_x, const RealVector &test_y,
                           std::optional<double> clip_bound = std::nullopt) {
    RealVector pred = predict(model, test_x);
    if (clip_bound) { pred = project(pred, *clip_bound); }
    EvalReport r;
    r.r_squared = r_squared(test_y, pred);
    r.mse = mse(test_y, pred);
    r.n_test = test_y.size();
    r.n_support = model.n_support();
    r.r0 = sparsity_r0(model);
    return r;
}

}  // namespace labrr

#pragma once

// Closed-form ridgeless / asymmetric kernel ridge regression solvers.

#include <utility>

#include "labrr/data.hpp"
#include "labrr/kernels.hpp"
#include "labrr/numerics.hpp"

namespace labrr {

/// Default diagonal jitter added to the Gram matrix before solving.
inline constexpr double kDefaultJitter = 1e-5;

/// Deployable LAB estimator f(t) = sum_i alpha_i exp(-||theta_i .* (t - x_i)||^2).
///
/// Inputs and outputs of predict() are in normalized units; norm_meta maps
/// them back to the units of the data the model was trained on.
struct LabModel {
    RealMatrix support_x;
    BandwidthSet theta;
    RealVector alpha;
    double jitter = kDefaultJitter;
    NormMeta norm_meta;

    [[nodiscard]] Eigen::Index dim() const { return support_x.cols(); }
    [[nodiscard]] Eigen::Index n_support() const { return support_x.rows(); }
};

/// Solves (K_Theta(X_sv, X_sv) + jitter I) alpha = Y_sv.
inline LabModel fit_lab(const RealMatrix &support_x, const RealVector &support_y, const BandwidthSet &theta,
                        double jitter, NormMeta norm_meta) {
    require_same(support_y.size(), support_x.rows(), "fit_lab: labels vs support rows");
    require_finite(support_x, "support inputs");
    require_finite(support_y, "support labels");
    LabModel model;
    model.alpha = solve_regularized(lab_matrix(support_x, support_x, theta), support_y, jitter);
    model.support_x = support_x;
    model.theta = theta;
    model.jitter = jitter;
    model.norm_meta = std::move(norm_meta);
    return model;
}

inline LabModel fit_lab(const RealMatrix &support_x, const RealVector &support_y, const BandwidthSet &theta,
                        double jitter = kDefaultJitter) {
    return fit_lab(support_x, support_y, theta, jitter, NormMeta::identity(support_x.cols()));
}

/// Batch prediction k_Theta(T, X_sv) alpha, one value per row of T.
inline RealVector predict(const LabModel &model, const RealMatrix &t) {
    require_same(t.cols(), model.dim(), "predict: input dim");
    return lab_matrix(t, model.support_x, model.theta) * model.alpha;
}

inline double predict(const LabModel &model, const RealVector &t) {
    require_same(t.size(), model.dim(), "predict: input dim");
    return predict(model, RealMatrix(t.transpose()))(0);
}

/// Symmetric RBF kernel ridge regression with a shared bandwidth, expressed
/// as a LAB model whose bandwidths are all equal.
inline LabModel fit_rbf_krr(const RealMatrix &x, const RealVector &y, double sigma, double lambda) {
    const BandwidthBounds bounds{std::min(sigma, 1e-4), std::max(sigma, 1e4)};
    return fit_lab(x, y, BandwidthSet::constant(x.rows(), x.cols(), sigma, bounds), lambda);
}

// ---------------------------------------------------------------------------
// General asymmetric KRR: the two stationary-point regressors
//
//   f1(t) = K(t, X)   (K(X, X)   + lambda I)^-1 Y
//   f2(t) = K(X, t)^T (K(X, X)^T + lambda I)^-1 Y
//
// and their LS-SVM duals alpha = lambda (K + lambda I)^-1 Y,
// beta = lambda (K^T + lambda I)^-1 Y, which equal the training residuals
// Y - f1(X) and Y - f2(X) respectively.

struct AsymDualSolution {
    RealVector alpha;
    RealVector beta;
    double lambda = 0.0;
};

inline AsymDualSolution fit_asym_duals(const RealMatrix &k, const RealVector &y, double lambda) {
    if (!(lambda > 0.0)) { throw InvalidArgument("fit_asym_duals: lambda must be > 0"); }
    require_same(y.size(), k.rows(), "fit_asym_duals: labels vs kernel rows");
    require_finite(y, "labels");
    const RegularizedLU lu(k, lambda);
    AsymDualSolution s;
    s.alpha = lambda * lu.solve(y);
    s.beta = lambda * lu.solve_transpose(y);
    s.lambda = lambda;
    return s;
}

/// f1 at test points from K(T, X) (rows: test points, cols: training points).
inline RealVector predict_f1(const RealMatrix &k_test_train, const AsymDualSolution &duals) {
    require_same(k_test_train.cols(), duals.alpha.size(), "predict_f1: kernel cols vs duals");
    return k_test_train * (duals.alpha / duals.lambda);
}

/// f2 at test points from K(X, T) (rows: training points, cols: test points).
inline RealVector predict_f2(const RealMatrix &k_train_test, const AsymDualSolution &duals) {
    require_same(k_train_test.rows(), duals.beta.size(), "predict_f2: kernel rows vs duals");
    return k_train_test.transpose() * (duals.beta / duals.lambda);
}

}  // namespace labrr

#pragma once

// Symmetric RBF and locally-adaptive-bandwidth (LAB) RBF kernels.
//
// A LAB kernel attaches a per-dimension bandwidth vector theta_j to every
// support point x_j:
//
//     K(t, x_j) = exp(-|| theta_j .* (t - x_j) ||^2)
//
// There is no factor 1/2, and the bandwidth multiplies the difference, so a
// larger theta means a narrower kernel.

#include <cmath>
#include <string>
#include <string_view>
#include <utility>

#include "labrr/numerics.hpp"

namespace labrr {

/// Orientation convention of every kernel matrix in this library: entry
/// (i, j) of K(Xr, Xc) uses the bandwidth of the column argument Xc_j.
/// Test rows therefore never need bandwidths of their own.
struct KernelOrientation {
    static constexpr std::string_view rule =
        "entry (i,j) uses the bandwidth of the SECOND (column/support) argument";
};

struct BandwidthBounds {
    double min = 1e-4;
    double max = 1e4;

    void validate() const {
        if (!(min > 0.0) || !(min <= max) || !std::isfinite(max)) {
            throw InvalidArgument("bandwidth bounds must satisfy 0 < min <= max < inf");
        }
    }
};

/// One positive bandwidth vector per support sample, stored as the rows of an
/// n_sv x dim matrix aligned with the support inputs.
class BandwidthSet {
public:
    BandwidthSet() = default;

    explicit BandwidthSet(RealMatrix theta, BandwidthBounds bounds = {}) : theta_(std::move(theta)), bounds_(bounds) {
        bounds_.validate();
        require_finite(theta_, "bandwidths");
        for (Eigen::Index j = 0; j < theta_.rows(); ++j) {
            for (Eigen::Index m = 0; m < theta_.cols(); ++m) {
                const double v = theta_(j, m);
                if (v < bounds_.min || v > bounds_.max) {
                    throw InvalidArgument("bandwidth " + std::to_string(v) + " outside [" +
                                          std::to_string(bounds_.min) + ", " + std::to_string(bounds_.max) + "]");
                }
            }
        }
    }

    static BandwidthSet constant(Eigen::Index n_sv, Eigen::Index dim, double value, BandwidthBounds bounds = {}) {
        return BandwidthSet(RealMatrix::Constant(n_sv, dim, value), bounds);
    }

    /// Scalar-bandwidth mode: one value per support point, replicated across dimensions.
    static BandwidthSet isotropic(const RealVector &per_support, Eigen::Index dim, BandwidthBounds bounds = {}) {
        return BandwidthSet(per_support.replicate(1, dim), bounds);
    }

    [[nodiscard]] Eigen::Index n_sv() const { return theta_.rows(); }
    [[nodiscard]] Eigen::Index dim() const { return theta_.cols(); }
    [[nodiscard]] const RealMatrix &values() const { return theta_; }
    [[nodiscard]] const BandwidthBounds &bounds() const { return bounds_; }
    [[nodiscard]] double operator()(Eigen::Index j, Eigen::Index m) const { return theta_(j, m); }
    [[nodiscard]] RealVector row(Eigen::Index j) const { return theta_.row(j).transpose(); }

    /// theta <- clip(theta + delta) elementwise into the bounds.
    void add_clipped(const RealMatrix &delta) {
        require_same(delta.rows(), n_sv(), "bandwidth update rows");
        require_same(delta.cols(), dim(), "bandwidth update cols");
        theta_ = (theta_ + delta).cwiseMax(bounds_.min).cwiseMin(bounds_.max);
    }

    /// Appends bandwidth rows for newly added support points (clipped into bounds).
    void append(const RealMatrix &rows) {
        require_same(rows.cols(), dim(), "appended bandwidth dim");
        RealMatrix grown(n_sv() + rows.rows(), dim());
        grown << theta_, rows.cwiseMax(bounds_.min).cwiseMin(bounds_.max);
        theta_ = std::move(grown);
    }

    friend bool operator==(const BandwidthSet &a, const BandwidthSet &b) {
        return a.theta_.rows() == b.theta_.rows() && a.theta_.cols() == b.theta_.cols() && a.theta_ == b.theta_;
    }

private:
    RealMatrix theta_;
    BandwidthBounds bounds_{};
};

namespace detail {

// Fills K(i, j) = exp(-sum_m (w(j, m) * (rows(i, m) - cols(j, m)))^2) column by column.
template<typename BandwidthOf>
RealMatrix weighted_gaussian(const RealMatrix &rows, const RealMatrix &cols, BandwidthOf &&bandwidth) {
    const Eigen::Index nr = rows.rows();
    const Eigen::Index nc = cols.rows();
    const Eigen::Index d = rows.cols();
    RealMatrix k(nr, nc);
    for (Eigen::Index j = 0; j < nc; ++j) {
        auto col = k.col(j).array();
        col.setZero();
        for (Eigen::Index m = 0; m < d; ++m) {
            const double w = bandwidth(j, m);
            col += (w * (rows.col(m).array() - cols(j, m))).square();
        }
        col = (-col).exp();
    }
    return k;
}

}  // namespace detail

inline double lab_entry(const RealVector &t, const RealVector &x, const RealVector &theta) {
    require_same(t.size(), x.size(), "lab_entry: point dims");
    require_same(theta.size(), x.size(), "lab_entry: bandwidth dim");
    return std::exp(-(theta.array() * (t - x).array()).square().sum());
}

/// K(Xr, Xc) with entry (i, j) = lab_entry(Xr_i, Xc_j, theta_j).
inline RealMatrix lab_matrix(const RealMatrix &xr, const RealMatrix &xc, const BandwidthSet &theta) {
    require_same(xr.cols(), xc.cols(), "lab_matrix: feature dims");
    require_same(theta.n_sv(), xc.rows(), "lab_matrix: bandwidth count vs support rows");
    require_same(theta.dim(), xc.cols(), "lab_matrix: bandwidth dim");
    const RealMatrix &th = theta.values();
    return detail::weighted_gaussian(xr, xc, [&th](Eigen::Index j, Eigen::Index m) { return th(j, m); });
}

/// Single-row kernel section k(t, Xc).
inline RealVector lab_row(const RealVector &t, const RealMatrix &xc, const BandwidthSet &theta) {
    require_same(t.size(), xc.cols(), "lab_row: point dim");
    return lab_matrix(t.transpose(), xc, theta).row(0).transpose();
}

/// Symmetric RBF kernel with a shared per-dimension bandwidth sigma.
inline RealMatrix rbf_matrix(const RealMatrix &x1, const RealMatrix &x2, const RealVector &sigma) {
    require_same(x1.cols(), x2.cols(), "rbf_matrix: feature dims");
    require_same(sigma.size(), x1.cols(), "rbf_matrix: bandwidth dim");
    if ((sigma.array() <= 0.0).any()) { throw InvalidArgument("rbf_matrix: sigma must be positive"); }
    return detail::weighted_gaussian(x1, x2, [&sigma](Eigen::Index, Eigen::Index m) { return sigma(m); });
}

inline RealMatrix rbf_matrix(const RealMatrix &x1, const RealMatrix &x2, double sigma) {
    return rbf_matrix(x1, x2, RealVector::Constant(x1.cols(), sigma));
}

/// d lab_entry / d theta, component m = K * (-2 theta_m (t_m - x_m)^2).
inline RealVector lab_entry_grad_theta(const RealVector &t, const RealVector &x, const RealVector &theta) {
    const double k = lab_entry(t, x, theta);
    return (-2.0 * k) * (theta.array() * (t - x).array().square()).matrix();
}

}  // namespace labrr

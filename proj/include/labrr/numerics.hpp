#pragma once

// Dense linear-algebra substrate shared by every other module.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "labrr/errors.hpp"

namespace labrr {

using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Relative pivot floor used by RegularizedLU, scaled by the max absolute row sum.
inline constexpr double kSingularPivotRatio = 1e-14;

template<typename Derived>
void require_finite(const Eigen::DenseBase<Derived> &m, const char *what) {
    if (!m.allFinite()) { throw InvalidArgument(std::string(what) + " contains non-finite entries"); }
}

inline void require_same(Eigen::Index a, Eigen::Index b, const char *what) {
    if (a != b) {
        throw DimensionMismatch(std::string(what) + ": " + std::to_string(a) + " != " + std::to_string(b));
    }
}

/// LU factorization of (A + jitter*I) with partial pivoting.
///
/// Gram matrices of locally-adaptive kernels are asymmetric, so a symmetric
/// factorization would be wrong here. The factorization is kept so that both
/// (A + jitter*I) x = b and its transpose system can be solved repeatedly.
class RegularizedLU {
public:
    RegularizedLU(const RealMatrix &a, double jitter) {
        if (a.rows() != a.cols()) {
            throw DimensionMismatch("solve_regularized: matrix is " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + ", expected square");
        }
        if (!(jitter >= 0.0) || !std::isfinite(jitter)) { throw InvalidArgument("jitter must be finite and >= 0"); }
        require_finite(a, "matrix");

        RealMatrix shifted = a;
        shifted.diagonal().array() += jitter;
        const double max_row_norm = a.rows() == 0 ? 0.0 : shifted.cwiseAbs().rowwise().sum().maxCoeff();
        lu_.compute(shifted);
        if (a.rows() > 0) {
            const double min_pivot = lu_.matrixLU().diagonal().cwiseAbs().minCoeff();
            if (!(min_pivot >= kSingularPivotRatio * max_row_norm) || max_row_norm == 0.0) {
                throw SingularSystem("singular system: pivot " + std::to_string(min_pivot) +
                                     " below threshold (max row norm " + std::to_string(max_row_norm) + ")");
            }
        }
    }

    [[nodiscard]] Eigen::Index size() const { return lu_.rows(); }

    [[nodiscard]] RealVector solve(const RealVector &b) const {
        require_same(b.size(), size(), "solve: rhs length");
        return lu_.solve(b);
    }

    /// Solves (A + jitter*I)^T x = b.
    [[nodiscard]] RealVector solve_transpose(const RealVector &b) const {
        require_same(b.size(), size(), "solve_transpose: rhs length");
        return lu_.transpose().solve(b);
    }

    [[nodiscard]] RealMatrix solve(const RealMatrix &b) const {
        require_same(b.rows(), size(), "solve: rhs rows");
        return lu_.solve(b);
    }

private:
    Eigen::PartialPivLU<RealMatrix> lu_;
};

/// Returns x with (A + jitter*I) x = b.
inline RealVector solve_regularized(const RealMatrix &a, const RealVector &b, double jitter) {
    require_same(b.size(), a.rows(), "solve_regularized: rhs length");
    require_finite(b, "rhs");
    return RegularizedLU(a, jitter).solve(b);
}

inline RealVector matvec(const RealMatrix &a, const RealVector &x) {
    require_same(a.cols(), x.size(), "matvec: cols vs vector length");
    return a * x;
}

}  // namespace labrr

#pragma once

// Shared scalar / window / small linear-algebra helpers used across dispec.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace dispec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Step = std::int64_t;

/// Inclusive integer window [lo, hi] on which a sequence is evaluated.
struct Window {
    Step lo = 0;
    Step hi = 0;

    Step span() const { return hi - lo; }
    bool contains(Step n) const { return n >= lo && n <= hi; }
    bool empty() const { return hi < lo; }

    static Window symmetric(Step n) { return Window{-n, n}; }

    Window intersect(const Window& other) const {
        return Window{std::max(lo, other.lo), std::min(hi, other.hi)};
    }

    bool operator==(const Window&) const = default;
};

/// Row-sum norm, the matrix norm used throughout.
inline double inf_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return m.cwiseAbs().rowwise().sum().maxCoeff();
}

/// Reciprocal 2-norm condition number, 0 for singular input.
inline double rcond(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const double smax = svd.singularValues()(0);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    if (smax <= 0.0) return 0.0;
    return smin / smax;
}

namespace detail {

/// QR factorization with the sign convention R_ii > 0, making it unique.
inline void qr_positive(const Matrix& m, Matrix& q, Matrix& r) {
    Eigen::HouseholderQR<Matrix> qr(m);
    q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
    r = qr.matrixQR().topRows(m.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
        if (r(i, i) < 0.0) {
            r.row(i) = -r.row(i);
            q.col(i) = -q.col(i);
        }
    }
}

/// A matrix held as value * exp(log_scale); keeps long cocycle products
/// representable far outside double range. Rescaling only kicks in once the
/// plain value drifts toward the limits of double range, so short products
/// stay bit-exact.
struct ScaledMatrix {
    Matrix value;
    double log_scale = 0.0;

    void normalize() {
        const double norm = inf_norm(value);
        if ((norm > 1e100 || norm < 1e-100) && norm > 0.0 && std::isfinite(norm)) {
            value /= norm;
            log_scale += std::log(norm);
        }
    }

    double log_inf_norm() const {
        const double norm = inf_norm(value);
        if (norm <= 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(norm) + log_scale;
    }

    /// Plain matrix; may overflow to inf for extreme exponents, by contract.
    Matrix materialize() const {
        if (log_scale == 0.0) return value;
        return value * std::exp(log_scale);
    }
};

inline ScaledMatrix scaled_identity(Eigen::Index d) {
    return ScaledMatrix{Matrix::Identity(d, d), 0.0};
}

inline ScaledMatrix scaled_product(const ScaledMatrix& a, const ScaledMatrix& b) {
    ScaledMatrix out{a.value * b.value, a.log_scale + b.log_scale};
    out.normalize();
    return out;
}

/// Simple ordinary least squares of y against x.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    if (x.size() == 1) return LineFit{0.0, y[0]};
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double denom = n * sxx - sx * sx;
    LineFit fit;
    fit.slope = denom != 0.0 ? (n * sxy - sx * sy) / denom : 0.0;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

}  // namespace detail

/// Closed interval [lo, hi] of positive reals (a spectral interval).
struct ClosedInterval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double x, double tol = 0.0) const { return x >= lo - tol && x <= hi + tol; }
    bool operator==(const ClosedInterval&) const = default;
};

}  // namespace dispec

#pragma once

// Shared fixtures and independent oracle helpers for the test suites. The
// oracles deliberately reimplement the definitions as plain loops so they
// stay independent of the library's computation paths.

#include "dispec/dispec.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace testsupport {

using dispec::Matrix;
using dispec::MatrixSequence;
using dispec::Step;
using dispec::Window;

inline MatrixSequence scalar_constant(double a) {
    Matrix m(1, 1);
    m(0, 0) = a;
    return MatrixSequence::constant(m);
}

/// The two-branch scalar system: a for n <= -1, b for n >= 0.
inline MatrixSequence baby1(double a = 0.5, double b = 2.0) {
    Matrix ma(1, 1), mb(1, 1);
    ma(0, 0) = a;
    mb(0, 0) = b;
    return MatrixSequence::piecewise(ma, {{0, mb}});
}

inline Matrix diag2(double a, double b) {
    Matrix m = Matrix::Zero(2, 2);
    m(0, 0) = a;
    m(1, 1) = b;
    return m;
}

inline Matrix diag3(double a, double b, double c) {
    Matrix m = Matrix::Zero(3, 3);
    m(0, 0) = a;
    m(1, 1) = b;
    m(2, 2) = c;
    return m;
}

inline Matrix rotation2(double theta) {
    Matrix r(2, 2);
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    return r;
}

inline Matrix random_orthogonal(Eigen::Index d, std::mt19937& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Matrix g(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) g(i, j) = gauss(rng);
    Matrix q, r;
    dispec::detail::qr_positive(g, q, r);
    return q;
}

/// Random invertible matrix with a reciprocal condition number floor.
inline Matrix random_invertible(Eigen::Index d, std::mt19937& rng, double rc_floor = 1e-2) {
    for (;;) {
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        Matrix m(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) m(i, j) = unif(rng);
        if (dispec::rcond(m) >= rc_floor) return m;
    }
}

/// Constant system with prescribed eigenvalue moduli: S diag(moduli) S^-1
/// with a controlled-conditioning similarity S.
inline MatrixSequence conjugated_diagonal(const std::vector<double>& moduli, std::mt19937& rng) {
    const auto d = Eigen::Index(moduli.size());
    Matrix diag = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) diag(i, i) = moduli[std::size_t(i)];
    const Matrix q1 = random_orthogonal(d, rng);
    const Matrix q2 = random_orthogonal(d, rng);
    std::uniform_real_distribution<double> stretch(0.7, 1.4);
    Matrix s_diag = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) s_diag(i, i) = stretch(rng);
    const Matrix s = q1 * s_diag * q2;
    return MatrixSequence::constant(s * diag * s.inverse());
}

/// Bounded random transform family F(n) with controlled sup norms, for
/// similarity-invariance tests.
inline dispec::SimilarityTransform random_bounded_transform(Eigen::Index d, Window w,
                                                            std::mt19937& rng) {
    std::uniform_real_distribution<double> stretch(0.7, 1.4);
    dispec::WindowedMatrices values;
    values.lo = w.lo;
    values.values.reserve(std::size_t(w.span() + 1));
    for (Step n = w.lo; n <= w.hi; ++n) {
        Matrix s_diag = Matrix::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) s_diag(i, i) = stretch(rng);
        values.values.push_back(random_orthogonal(d, rng) * s_diag *
                                random_orthogonal(d, rng));
    }
    return dispec::SimilarityTransform::make(std::move(values));
}

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Direct product oracle for the transition matrix definition.
inline Matrix oracle_transition(const MatrixSequence& seq, Step n, Step k) {
    const Eigen::Index d = seq.dimension();
    Matrix x = Matrix::Identity(d, d);
    if (n > k) {
        for (Step j = k; j < n; ++j) x = seq.evaluate(j) * x;
    } else if (n < k) {
        for (Step j = n; j < k; ++j) x = x * seq.evaluate(j).inverse();
    }
    return x;
}

/// Brute-force windowed geometric means of |c| over [-N, N).
inline dispec::ClosedInterval oracle_bohl(const MatrixSequence& c, Step n, Step w) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (Step k = -n; k + w <= n; ++k) {
        double prod = 1.0;
        double log_acc = 0.0;
        for (Step j = k; j < k + w; ++j) log_acc += std::log(std::abs(c.evaluate(j)(0, 0)));
        prod = std::exp(log_acc / double(w));
        lo = std::min(lo, prod);
        hi = std::max(hi, prod);
    }
    return {lo, hi};
}

inline std::vector<std::pair<Step, Step>> dense_pairs(Step n, Step stride) {
    std::vector<std::pair<Step, Step>> pairs;
    for (Step k = -n; k <= n; k += stride)
        for (Step m = k; m <= n; m += stride) pairs.emplace_back(m, k);
    return pairs;
}

}  // namespace testsupport

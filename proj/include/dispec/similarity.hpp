#pragma once

// Kinematic similarity transforms: conjugation, discrete QR triangularization,
// the beta-transformation, and scalar system weighting.

#include "dispec/common.hpp"
#include "dispec/errors.hpp"
#include "dispec/system.hpp"

#include <optional>
#include <utility>

namespace dispec {

/// A bounded invertible change of coordinates y(n) = F(n)^-1 x(n) on a
/// window, with its recorded sup bounds.
struct SimilarityTransform {
    WindowedMatrices values;
    double f_sup = 0.0;
    double finv_sup = 0.0;
    std::optional<double> delta_tag;

    Window window() const { return values.window(); }
    const Matrix& at(Step n) const { return values.at(n); }

    static SimilarityTransform make(WindowedMatrices values,
                                    std::optional<double> delta_tag = std::nullopt,
                                    double sing_tol = kDefaultSingTol) {
        SimilarityTransform f;
        f.delta_tag = delta_tag;
        for (std::size_t i = 0; i < values.values.size(); ++i) {
            const Matrix& m = values.values[i];
            if (rcond(m) < sing_tol) throw SingularTransform(values.lo + Step(i));
            f.f_sup = std::max(f.f_sup, inf_norm(m));
            f.finv_sup = std::max(f.finv_sup, inf_norm(m.inverse()));
        }
        f.values = std::move(values);
        return f;
    }

    static SimilarityTransform identity(Eigen::Index dim, Window w) {
        WindowedMatrices values;
        values.lo = w.lo;
        values.values.assign(std::size_t(w.span() + 1), Matrix::Identity(dim, dim));
        return SimilarityTransform{std::move(values), 1.0, 1.0, std::nullopt};
    }

    /// Pointwise product (this->at(n) * other.at(n)) on the common window.
    SimilarityTransform compose(const SimilarityTransform& other) const {
        const Window w = window().intersect(other.window());
        if (w.empty()) throw WindowMismatch("compose: disjoint transform windows");
        WindowedMatrices out;
        out.lo = w.lo;
        out.values.reserve(std::size_t(w.span() + 1));
        for (Step n = w.lo; n <= w.hi; ++n) out.values.push_back(at(n) * other.at(n));
        return make(std::move(out), delta_tag ? delta_tag : other.delta_tag);
    }
};

/// B(n) = F(n+1)^-1 A(n) F(n) on every step where both are defined.
inline WindowedMatrices conjugate(const WindowedMatrices& a, const SimilarityTransform& f) {
    const Window aw = a.window();
    const Window fw = f.window();
    const Window w{std::max(aw.lo, fw.lo), std::min(aw.hi, fw.hi - 1)};
    if (w.empty())
        throw WindowMismatch("conjugate: transform must cover n and n+1 for some step");
    WindowedMatrices b;
    b.lo = w.lo;
    b.values.reserve(std::size_t(w.span() + 1));
    for (Step n = w.lo; n <= w.hi; ++n)
        b.values.push_back(f.at(n + 1).partialPivLu().solve(a.at(n) * f.at(n)));
    return b;
}

inline WindowedMatrices conjugate(const MatrixSequence& seq, const SimilarityTransform& f) {
    const Window fw = f.window();
    return conjugate(WindowedMatrices::from_sequence(seq, Window{fw.lo, fw.hi - 1}), f);
}

/// Discrete QR triangularization: Q(lo) = I and A(n) Q(n) = Q(n+1) C(n) with
/// Q orthogonal and C upper triangular with positive diagonal, which makes
/// the factorization unique. Q is a kinematic similarity with
/// f_sup = finv_sup = 1 up to the norm equivalence of orthogonal matrices.
inline std::pair<SimilarityTransform, WindowedMatrices> qr_triangularize(
    const WindowedMatrices& a) {
    const Window w = a.window();
    const Eigen::Index d = a.dimension();
    WindowedMatrices qs, cs;
    qs.lo = w.lo;
    cs.lo = w.lo;
    qs.values.reserve(std::size_t(w.span() + 2));
    cs.values.reserve(std::size_t(w.span() + 1));
    Matrix q = Matrix::Identity(d, d);
    qs.values.push_back(q);
    for (Step n = w.lo; n <= w.hi; ++n) {
        Matrix qn, cn;
        detail::qr_positive(a.at(n) * q, qn, cn);
        for (Eigen::Index i = 0; i < d; ++i)
            if (!(cn(i, i) > 0.0)) throw SingularCoefficient(n, 0.0);
        qs.values.push_back(qn);
        cs.values.push_back(std::move(cn));
        q = std::move(qn);
    }
    return {SimilarityTransform::make(std::move(qs)), std::move(cs)};
}

inline std::pair<SimilarityTransform, WindowedMatrices> qr_triangularize(
    const MatrixSequence& seq, Window window) {
    return qr_triangularize(WindowedMatrices::from_sequence(seq, window));
}

/// Conjugation by diag(1, beta, ..., beta^{d-1}): the diagonal is unchanged
/// and entry (r, s) with r < s picks up a factor beta^{s-r}.
inline WindowedMatrices beta_transform(const WindowedMatrices& c, double beta) {
    if (!(beta > 0.0 && beta < 1.0))
        throw Error("InvalidArgument", "beta must lie in (0,1)");
    const Eigen::Index d = c.dimension();
    WindowedMatrices out;
    out.lo = c.lo;
    out.values.reserve(c.values.size());
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        const Matrix& m = c.values[i];
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index s = 0; s < r; ++s)
                if (m(r, s) != 0.0)
                    throw NotTriangular("entry (" + std::to_string(r) + "," + std::to_string(s) +
                                        ") below the diagonal is nonzero at n=" +
                                        std::to_string(c.lo + Step(i)));
        Matrix t = m;
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index s = r + 1; s < d; ++s)
                t(r, s) *= std::pow(beta, double(s - r));
        out.values.push_back(std::move(t));
    }
    return out;
}

/// n -> mu * A(n); moves between A and lambda^-1 A preserving similarity.
inline MatrixSequence scale_system(const MatrixSequence& seq, double mu) {
    return seq.scaled(mu);
}

inline WindowedMatrices scale_system(const WindowedMatrices& values, double mu) {
    if (mu <= 0.0) throw NonpositiveMu(mu);
    WindowedMatrices out = values;
    for (auto& m : out.values) m *= mu;
    return out;
}

/// Residual check of the similarity equation F(n+1) B(n) = A(n) F(n).
struct SimilarityReport {
    bool holds = true;
    double max_relative_residual = 0.0;
    Step worst_n = 0;
    double f_sup = 0.0;
    double finv_sup = 0.0;
    std::optional<double> delta_tag;
};

inline SimilarityReport check_similarity(const SimilarityTransform& f, const WindowedMatrices& a,
                                         const WindowedMatrices& b, double tol) {
    const Window w = a.window().intersect(b.window());
    if (w.empty() || f.window().lo > w.lo || f.window().hi < w.hi + 1)
        throw WindowMismatch("check_similarity: incompatible windows");
    SimilarityReport report;
    report.f_sup = f.f_sup;
    report.finv_sup = f.finv_sup;
    report.delta_tag = f.delta_tag;
    for (Step n = w.lo; n <= w.hi; ++n) {
        const double resid = inf_norm(f.at(n + 1) * b.at(n) - a.at(n) * f.at(n)) /
                             (1.0 + inf_norm(a.at(n)));
        if (resid > report.max_relative_residual) {
            report.max_relative_residual = resid;
            report.worst_n = n;
        }
    }
    report.holds = report.max_relative_residual <= tol && std::isfinite(f.f_sup) &&
                   std::isfinite(f.finv_sup);
    return report;
}

inline SimilarityReport check_similarity(const SimilarityTransform& f, const MatrixSequence& a,
                                         const WindowedMatrices& b, double tol) {
    return check_similarity(f, WindowedMatrices::from_sequence(a, b.window()), b, tol);
}

}  // namespace dispec

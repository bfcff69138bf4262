#pragma once

// Spectral-gap block diagonalization: recursive splitting along the
// propagated stable/unstable frames, top interval first, and the full-
// spectrum diagonalization shortcut.

#include "dispec/common.hpp"
#include "dispec/dichotomy.hpp"
#include "dispec/errors.hpp"
#include "dispec/propagator.hpp"
#include "dispec/similarity.hpp"
#include "dispec/spectrum.hpp"
#include "dispec/system.hpp"

#include <utility>
#include <vector>

namespace dispec {

constexpr double kDefaultCouplingTol = 1e-8;

struct BlockDecomposition {
    SimilarityTransform transform;
    std::vector<WindowedMatrices> blocks;  // ascending spectral order
    double max_coupling = 0.0;             // measured off-block norm of F^-1 A F
    SimilarityReport similarity;
};

namespace detail {

struct SplitResult {
    WindowedMatrices f;  // on [lo, hi], one past the block step window
    std::vector<WindowedMatrices> blocks;
};

inline SplitResult block_split_recursive(const WindowedMatrices& steps,
                                         const std::vector<ClosedInterval>& intervals,
                                         int gap_hint) {
    SplitResult out;
    if (intervals.size() <= 1) {
        const Window w = steps.window();
        out.f.lo = w.lo;
        out.f.values.assign(std::size_t(w.span() + 2),
                            Matrix::Identity(steps.dimension(), steps.dimension()));
        out.blocks.push_back(steps);
        return out;
    }

    const std::size_t ell = intervals.size();
    const double gap_lo = intervals[ell - 2].hi;
    const double gap_hi = intervals[ell - 1].lo;
    const double lambda = std::sqrt(gap_lo * gap_hi);

    TransitionOperator op(steps);
    int m = 0;
    try {
        m = splitting_dimension(op, lambda, op.max_horizon(), kDefaultGapTol);
    } catch (const AmbiguousSplitting&) {
        throw GapUnresolvable(int(ell) - 1);
    }
    const int d = int(steps.dimension());
    if (m <= 0 || m >= d) throw GapUnresolvable(int(ell) - 1);

    const SplitFrames& frames = op.split_frames(m);
    const Window w = op.window();

    WindowedMatrices f_top;
    f_top.lo = w.lo;
    f_top.values.reserve(std::size_t(w.span() + 1));
    for (Step t = w.lo; t <= w.hi; ++t) {
        Matrix f(d, d);
        f.leftCols(m) = frames.q_stable[frames.idx(t)];
        f.rightCols(d - m) = frames.q_unstable[frames.idx(t)];
        f_top.values.push_back(std::move(f));
    }

    WindowedMatrices stable_steps{w.lo, frames.r_stable};
    WindowedMatrices unstable_steps{w.lo, frames.r_unstable};

    std::vector<ClosedInterval> lower(intervals.begin(), intervals.end() - 1);
    SplitResult sub = block_split_recursive(stable_steps, lower, gap_hint - 1);

    // F(n) = F_top(n) * blockdiag(F_sub(n), I)
    const Window fw = Window{w.lo, w.hi}.intersect(sub.f.window());
    out.f.lo = fw.lo;
    out.f.values.reserve(std::size_t(fw.span() + 1));
    for (Step t = fw.lo; t <= fw.hi; ++t) {
        Matrix combine = Matrix::Identity(d, d);
        combine.topLeftCorner(m, m) = sub.f.at(t);
        out.f.values.push_back(f_top.at(t) * combine);
    }
    out.blocks = std::move(sub.blocks);
    out.blocks.push_back(std::move(unstable_steps));
    return out;
}

}  // namespace detail

/// Kinematic similarity to diag(B_1, ..., B_ell), splitting the top spectral
/// interval off first and recursing on the leading block. Each B_i carries
/// the spectrum of [a_i, b_i]; the off-block coupling of the conjugated
/// system is measured and must stay below the tolerance.
inline BlockDecomposition block_diagonalize(const WindowedMatrices& steps,
                                            const SpectrumEstimate& sigma,
                                            double coupling_tol = kDefaultCouplingTol,
                                            double spectrum_tol = 0.1) {
    if (sigma.ell < 1) throw Error("InvalidArgument", "block_diagonalize needs ell >= 1");
    detail::SplitResult split =
        detail::block_split_recursive(steps, sigma.intervals, sigma.ell - 1);

    // trim everything to the common step window
    Window common = steps.window();
    for (const auto& b : split.blocks) common = common.intersect(b.window());
    common = common.intersect(Window{split.f.lo, split.f.window().hi - 1});

    BlockDecomposition out;
    WindowedMatrices f_trim;
    f_trim.lo = common.lo;
    for (Step t = common.lo; t <= common.hi + 1; ++t) f_trim.values.push_back(split.f.at(t));
    out.transform = SimilarityTransform::make(std::move(f_trim));

    for (auto& b : split.blocks) {
        WindowedMatrices trimmed;
        trimmed.lo = common.lo;
        for (Step t = common.lo; t <= common.hi; ++t) trimmed.values.push_back(b.at(t));
        out.blocks.push_back(std::move(trimmed));
    }

    // measured coupling of the actual conjugation
    WindowedMatrices conj = conjugate(steps, out.transform);
    double a_sup = 0.0;
    for (Step t = common.lo; t <= common.hi; ++t) a_sup = std::max(a_sup, inf_norm(steps.at(t)));
    for (Step t = conj.lo; t <= conj.window().hi; ++t) {
        Matrix off = conj.at(t);
        Eigen::Index offset = 0;
        for (const auto& b : out.blocks) {
            const Eigen::Index bd = b.dimension();
            off.block(offset, offset, bd, bd).setZero();
            offset += bd;
        }
        out.max_coupling = std::max(out.max_coupling, inf_norm(off));
    }
    if (out.max_coupling > coupling_tol * (1.0 + a_sup))
        throw CouplingResidual(0, out.max_coupling);

    // each block must carry its own interval's spectrum
    for (std::size_t i = 0; i < out.blocks.size(); ++i) {
        const Window bw = out.blocks[i].window();
        const SpectrumEstimate block_sigma =
            spectrum_via_triangular(out.blocks[i], std::max<Step>(1, bw.span() / 2));
        const ClosedInterval& expect = sigma.intervals[i];
        for (const auto& iv : block_sigma.intervals) {
            if (iv.lo < expect.lo * (1.0 - spectrum_tol) ||
                iv.hi > expect.hi * (1.0 + spectrum_tol))
                throw GapUnresolvable(int(i));
        }
    }

    // reassembled block diagonal must conjugate back to the input
    WindowedMatrices reassembled;
    reassembled.lo = common.lo;
    const Eigen::Index d = steps.dimension();
    for (Step t = common.lo; t <= common.hi; ++t) {
        Matrix m = Matrix::Zero(d, d);
        Eigen::Index offset = 0;
        for (const auto& b : out.blocks) {
            const Eigen::Index bd = b.dimension();
            m.block(offset, offset, bd, bd) = b.at(t);
            offset += bd;
        }
        reassembled.values.push_back(std::move(m));
    }
    WindowedMatrices input_trim;
    input_trim.lo = common.lo;
    for (Step t = common.lo; t <= common.hi; ++t) input_trim.values.push_back(steps.at(t));
    out.similarity = check_similarity(out.transform, input_trim, reassembled, coupling_tol);
    return out;
}

inline BlockDecomposition block_diagonalize(const MatrixSequence& seq,
                                            const SpectrumEstimate& sigma, Step n,
                                            double coupling_tol = kDefaultCouplingTol) {
    return block_diagonalize(WindowedMatrices::from_sequence(seq, Window{-n, n - 1}), sigma,
                             coupling_tol);
}

struct DiagonalizationResult {
    SimilarityTransform transform;
    WindowedMatrices diagonal;  // diagonal part of the conjugated system
    double max_offdiag = 0.0;   // measured coupling left outside the diagonal
    SpectrumEstimate sigma;
};

/// Under the full spectrum condition every block is 1x1, so the block
/// decomposition is already a diagonalization.
inline DiagonalizationResult diagonalize_full_spectrum(const MatrixSequence& seq, Step n,
                                                       const SpectrumEstimate& sigma,
                                                       double coupling_tol = kDefaultCouplingTol) {
    if (!full_spectrum_condition(sigma, int(seq.dimension())))
        throw NotFullSpectrum(sigma.ell, int(seq.dimension()));
    BlockDecomposition decomp = block_diagonalize(seq, sigma, n, coupling_tol);

    DiagonalizationResult out;
    out.sigma = sigma;
    out.max_offdiag = decomp.max_coupling;
    WindowedMatrices conj = conjugate(seq, decomp.transform);
    out.diagonal.lo = conj.lo;
    for (const auto& m : conj.values)
        out.diagonal.values.push_back(Matrix(m.diagonal().asDiagonal()));
    out.transform = std::move(decomp.transform);
    return out;
}

inline DiagonalizationResult diagonalize_full_spectrum(const MatrixSequence& seq, Step n) {
    TransitionOperator op(seq, Window::symmetric(n));
    const SpectrumEstimate sigma = spectrum_scan(op, 1e-3, 1e3, 64, 1e-3, n);
    return diagonalize_full_spectrum(seq, n, sigma);
}

}  // namespace dispec

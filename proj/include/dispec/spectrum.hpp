#pragma once

// Sacker-Sell spectrum assembly: lambda scan over dichotomy verdicts with
// geometric bisection, the triangular + scalar-Bohl shortcut, the spectral
// scaling law, and the projector rank profile across gaps.

#include "dispec/common.hpp"
#include "dispec/dichotomy.hpp"
#include "dispec/errors.hpp"
#include "dispec/propagator.hpp"
#include "dispec/similarity.hpp"
#include "dispec/system.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace dispec {

/// Ordered disjoint closed spectral intervals, at most d of them.
struct SpectrumEstimate {
    std::vector<ClosedInterval> intervals;
    int ell = 0;
    double resolution = 0.0;
    Step horizon = 0;

    void validate(int dimension) const {
        if (int(intervals.size()) != ell) throw Error("SpectrumInvariant", "ell mismatch");
        if (ell > dimension)
            throw Error("SpectrumInvariant",
                        "more spectral intervals than the dimension allows");
        double prev = 0.0;
        for (const auto& iv : intervals) {
            if (!(iv.lo > prev && iv.lo <= iv.hi))
                throw Error("SpectrumInvariant", "intervals must be positive, sorted, disjoint");
            prev = iv.hi;
        }
    }

    bool contains(double x, double tol = 0.0) const {
        for (const auto& iv : intervals)
            if (iv.contains(x, tol)) return true;
        return false;
    }
};

namespace detail {

struct LambdaVerdict {
    bool in_spectrum = false;
    int rank = 0;

    bool operator==(const LambdaVerdict&) const = default;
};

inline LambdaVerdict lambda_verdict(const TransitionOperator& op, double lambda, Step n) {
    const DichotomyResult r = test_dichotomy(op, lambda, n);
    if (const auto* w = std::get_if<DichotomyWitness>(&r))
        return LambdaVerdict{false, w->projector.rank};
    return LambdaVerdict{true, -1};
}

}  // namespace detail

/// Localizes the spectrum on [lambda_lo, lambda_hi] by a geometric grid of
/// dichotomy verdicts plus bisection of every verdict or rank change down to
/// eps_lambda (relative). Adjacent detections closer than eps_lambda merge.
inline SpectrumEstimate spectrum_scan(const TransitionOperator& op, double lambda_lo,
                                      double lambda_hi, int grid, double eps_lambda, Step n) {
    if (!(0.0 < lambda_lo && lambda_lo < lambda_hi))
        throw Error("InvalidArgument", "need 0 < lambda_lo < lambda_hi");
    if (grid < 8) throw Error("InvalidArgument", "grid must be at least 8");
    if (!(eps_lambda > 0.0)) throw Error("InvalidArgument", "eps_lambda must be positive");

    auto verdict = [&](double lambda) { return detail::lambda_verdict(op, lambda, n); };

    const auto grid_size = static_cast<std::size_t>(grid);
    std::vector<double> lambdas(grid_size, 0.0);
    const double log_lo = std::log(lambda_lo);
    const double log_hi = std::log(lambda_hi);
    for (int j = 0; j < grid; ++j)
        lambdas[std::size_t(j)] = std::exp(log_lo + (log_hi - log_lo) * double(j) / (grid - 1));
    std::vector<detail::LambdaVerdict> verdicts(grid_size);
    for (int j = 0; j < grid; ++j) verdicts[std::size_t(j)] = verdict(lambdas[std::size_t(j)]);

    if (verdicts.front().in_spectrum) throw RangeTooNarrow(lambda_lo);
    if (verdicts.back().in_spectrum) throw RangeTooNarrow(lambda_hi);

    // geometric bisection until the bracket is narrower than eps_lambda;
    // returns the point where the state first stops matching `match`.
    auto refine = [&](double la, double lb, const detail::LambdaVerdict& match,
                      bool from_left) {
        while (std::log(lb / la) > eps_lambda) {
            const double mid = std::sqrt(la * lb);
            const bool same = verdict(mid) == match;
            if (from_left ? same : !same)
                la = mid;
            else
                lb = mid;
        }
        return std::sqrt(la * lb);
    };

    std::vector<ClosedInterval> found;
    for (int j = 0; j + 1 < grid; ++j) {
        const auto& vl = verdicts[std::size_t(j)];
        const auto& vr = verdicts[std::size_t(j + 1)];
        const double la = lambdas[std::size_t(j)];
        const double lb = lambdas[std::size_t(j + 1)];
        if (vl == vr) continue;
        if (!vl.in_spectrum && vr.in_spectrum) {
            // interval opens here; the matching close is handled at the run end
            const double open = refine(la, lb, vl, true);
            // find the end of the refusing run
            int j2 = j + 1;
            while (j2 + 1 < grid && verdicts[std::size_t(j2 + 1)].in_spectrum) ++j2;
            const double close = refine(lambdas[std::size_t(j2)], lambdas[std::size_t(j2 + 1)],
                                        verdicts[std::size_t(j2 + 1)], false);
            found.push_back({open, close});
        } else if (!vl.in_spectrum && !vr.in_spectrum) {
            // rank jump between two accepted verdicts: spectrum hides between
            const double open = refine(la, lb, vl, true);
            const double close = refine(la, lb, vr, false);
            found.push_back({open, std::max(open, close)});
        }
    }

    std::sort(found.begin(), found.end(),
              [](const ClosedInterval& a, const ClosedInterval& b) { return a.lo < b.lo; });
    std::vector<ClosedInterval> merged;
    for (const auto& iv : found) {
        if (!merged.empty() && std::log(iv.lo / merged.back().hi) <= eps_lambda)
            merged.back().hi = std::max(merged.back().hi, iv.hi);
        else
            merged.push_back(iv);
    }

    SpectrumEstimate estimate;
    estimate.intervals = std::move(merged);
    estimate.ell = int(estimate.intervals.size());
    estimate.resolution = eps_lambda;
    estimate.horizon = n;
    estimate.validate(int(op.dimension()));
    return estimate;
}

/// QR-triangularizes the window, runs the scalar Bohl estimate on each
/// diagonal entry, and unions the intervals. A short burn-in at the left end
/// of the window is excluded from the Bohl sweep so the transient of the QR
/// frames does not pollute the windowed means.
inline SpectrumEstimate spectrum_via_triangular(const WindowedMatrices& steps, Step w) {
    const auto [q, c] = qr_triangularize(steps);
    const Window cw = c.window();
    const Step burn = std::min<Step>(cw.span() / 5, 200);
    const Step lo = cw.lo + burn;
    const Eigen::Index d = c.dimension();

    std::vector<ClosedInterval> per_diag;
    for (Eigen::Index r = 0; r < d; ++r) {
        std::vector<double> log_abs;
        log_abs.reserve(std::size_t(cw.hi - lo + 1));
        for (Step j = lo; j <= cw.hi; ++j) {
            const double v = c.at(j)(r, r);
            if (v == 0.0) throw ZeroCoefficient(j);
            log_abs.push_back(std::log(std::abs(v)));
        }
        const Step w_eff = std::clamp<Step>(w, 1, Step(log_abs.size()));
        per_diag.push_back(detail::bohl_sweeps_core(log_abs, lo, {w_eff}).front().interval);
    }

    std::sort(per_diag.begin(), per_diag.end(),
              [](const ClosedInterval& a, const ClosedInterval& b) { return a.lo < b.lo; });
    std::vector<ClosedInterval> merged;
    for (const auto& iv : per_diag) {
        if (!merged.empty() && iv.lo <= merged.back().hi)
            merged.back().hi = std::max(merged.back().hi, iv.hi);
        else
            merged.push_back(iv);
    }

    SpectrumEstimate estimate;
    estimate.intervals = std::move(merged);
    estimate.ell = int(estimate.intervals.size());
    estimate.resolution = 1.0 / double(std::max<Step>(1, w));
    estimate.horizon = (cw.hi + 1 - cw.lo) / 2;
    estimate.validate(int(d));
    return estimate;
}

inline SpectrumEstimate spectrum_via_triangular(const MatrixSequence& seq, Step n, Step w) {
    return spectrum_via_triangular(WindowedMatrices::from_sequence(seq, Window{-n, n - 1}), w);
}

/// [a_i, b_i] -> [a_i / lambda, b_i / lambda]; ordering and disjointness are
/// preserved by the monotone map.
inline SpectrumEstimate scale_spectrum(const SpectrumEstimate& sigma, double lambda) {
    if (lambda <= 0.0) throw NonpositiveLambda(lambda);
    SpectrumEstimate out = sigma;
    for (auto& iv : out.intervals) {
        iv.lo /= lambda;
        iv.hi /= lambda;
    }
    return out;
}

/// Projector ranks below, between, and above the spectral intervals.
/// Entry g has gap index g: 0 below a_1, i between b_i and a_{i+1}, ell
/// above b_ell. Ranks must run 0 .. d with strict increases across gaps.
inline std::vector<std::pair<int, int>> rank_profile(const TransitionOperator& op,
                                                     const SpectrumEstimate& sigma, Step n) {
    if (sigma.ell < 1) throw Error("InvalidArgument", "rank_profile needs a nonempty spectrum");
    std::vector<std::pair<int, int>> profile;
    auto rank_at = [&](double lambda) {
        const DichotomyResult r = test_dichotomy(op, lambda, n);
        if (const auto* w = std::get_if<DichotomyWitness>(&r)) return w->projector.rank;
        throw AmbiguousSplitting(lambda, 0.0);
    };
    profile.emplace_back(0, rank_at(sigma.intervals.front().lo / 2.0));
    for (int i = 0; i + 1 < sigma.ell; ++i) {
        const double mid = std::sqrt(sigma.intervals[std::size_t(i)].hi *
                                     sigma.intervals[std::size_t(i) + 1].lo);
        profile.emplace_back(i + 1, rank_at(mid));
    }
    profile.emplace_back(sigma.ell, rank_at(sigma.intervals.back().hi * 2.0));

    if (profile.front().second != 0 || profile.back().second != int(op.dimension()))
        throw BoundViolation("rank profile does not run from 0 to d");
    for (std::size_t i = 0; i + 1 < profile.size(); ++i)
        if (profile[i].second >= profile[i + 1].second)
            throw BoundViolation("rank profile must increase strictly across gaps");
    return profile;
}

/// True iff the spectrum consists of exactly d intervals.
inline bool full_spectrum_condition(const SpectrumEstimate& sigma, int dimension) {
    return sigma.ell == dimension;
}

}  // namespace dispec

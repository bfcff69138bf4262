#pragma once

// Constructive almost reducibility: the switching schedule that keeps all
// diagonal partial products inside [1/mu, mu], the diagonal scaling L_i, the
// beta-shrunk residual Gamma_i = h_i I + R_i, and the assembled contraction
// diag(H)(I + R) with its certificate.

#include "dispec/blockdiag.hpp"
#include "dispec/common.hpp"
#include "dispec/dichotomy.hpp"
#include "dispec/errors.hpp"
#include "dispec/propagator.hpp"
#include "dispec/similarity.hpp"
#include "dispec/spectrum.hpp"
#include "dispec/system.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace dispec {

/// Alternating phase times: even phases run at denominator a - delta/2 with
/// h = a, odd phases at b + delta/2 with h = b, on both half axes.
struct SwitchingSchedule {
    double mu = 2.0;
    std::vector<Step> switch_times;      // 0 = N_0 < N_1 < ... (positive axis)
    std::vector<Step> switch_times_neg;  // 0 = M_0 > M_1 > ... (phase starts, negative axis)
};

/// h(n) in {a, b} and Delta(n) = -+ delta/2 per phase, on the window.
struct StepPair {
    Step lo = 0;
    std::vector<double> h;
    std::vector<double> delta_seq;

    double h_at(Step n) const { return h[std::size_t(n - lo)]; }
    double delta_at(Step n) const { return delta_seq[std::size_t(n - lo)]; }
    Window window() const { return Window{lo, lo + Step(h.size()) - 1}; }
};

/// Diagonal scaling entries mu_r(n) for one r, with their extreme magnitudes.
struct ScalingSequence {
    Step lo = 0;
    std::vector<double> values;  // on [lo, hi+1]
    double m1 = 1.0;             // max |mu_r|
    double m2 = 1.0;             // min |mu_r|

    double at(Step n) const { return values[std::size_t(n - lo)]; }
};

namespace detail {

inline double phase_denominator(int phase, double a, double b, double delta) {
    return phase % 2 == 0 ? a - delta / 2.0 : b + delta / 2.0;
}

}  // namespace detail

/// Greedy realization of the switching times: extend the current phase while
/// the worst-case partial product over all rows stays strictly inside
/// (1/mu, mu), switch at the last safe index. One shared schedule serves all
/// rows of the block. The negative half axis uses the mirrored construction
/// on the inverse products.
inline std::pair<StepPair, SwitchingSchedule> build_schedule(
    const std::vector<std::vector<double>>& c_diag, Step lo, double a, double b, double delta,
    double mu) {
    if (!(delta > 0.0 && delta < 2.0 * a))
        throw Error("InvalidArgument", "delta must lie in (0, 2a)");
    if (!(mu > 1.0)) throw Error("InvalidArgument", "mu must exceed 1");
    if (c_diag.empty() || c_diag.front().empty())
        throw Error("InvalidArgument", "build_schedule needs at least one diagonal sequence");
    const std::size_t rows = c_diag.size();
    const std::size_t steps = c_diag.front().size();
    const Step hi = lo + Step(steps) - 1;
    if (lo > 0 || hi < 0) throw WindowMismatch("schedule window must contain 0");

    StepPair pair;
    pair.lo = lo;
    pair.h.assign(steps, a);
    pair.delta_seq.assign(steps, -delta / 2.0);
    SwitchingSchedule schedule;
    schedule.mu = mu;
    schedule.switch_times.push_back(0);
    schedule.switch_times_neg.push_back(0);

    auto assign = [&](Step j, int phase) {
        pair.h[std::size_t(j - lo)] = phase % 2 == 0 ? a : b;
        pair.delta_seq[std::size_t(j - lo)] = phase % 2 == 0 ? -delta / 2.0 : delta / 2.0;
    };

    // positive axis: partial products prod_{j=0}^{n-1} |c_r(j)| / den(phase(j))
    {
        std::vector<double> products(rows, 1.0);
        int phase = 0;
        for (Step j = 0; j <= hi; ++j) {
            auto fits = [&](int ph) {
                const double den = detail::phase_denominator(ph, a, b, delta);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double cand =
                        products[r] * std::abs(c_diag[r][std::size_t(j - lo)]) / den;
                    if (!(cand > 1.0 / mu && cand < mu)) return false;
                }
                return true;
            };
            if (!fits(phase)) {
                if (!schedule.switch_times.empty() && schedule.switch_times.back() == j)
                    throw InfeasibleMu(mu);
                ++phase;
                schedule.switch_times.push_back(j);
                if (!fits(phase)) throw InfeasibleMu(mu);
            }
            const double den = detail::phase_denominator(phase, a, b, delta);
            for (std::size_t r = 0; r < rows; ++r)
                products[r] *= std::abs(c_diag[r][std::size_t(j - lo)]) / den;
            assign(j, phase);
        }
    }

    // negative axis: inverse products prod_{j=n}^{-1} (|c_r(j)| / den(phase(j)))^-1
    {
        std::vector<double> products(rows, 1.0);
        int phase = 0;
        for (Step j = -1; j >= lo; --j) {
            auto fits = [&](int ph) {
                const double den = detail::phase_denominator(ph, a, b, delta);
                for (std::size_t r = 0; r < rows; ++r) {
                    const double cand =
                        products[r] * den / std::abs(c_diag[r][std::size_t(j - lo)]);
                    if (!(cand > 1.0 / mu && cand < mu)) return false;
                }
                return true;
            };
            if (!fits(phase)) {
                if (!schedule.switch_times_neg.empty() &&
                    schedule.switch_times_neg.back() == j + 1)
                    throw InfeasibleMu(mu);
                ++phase;
                schedule.switch_times_neg.push_back(j + 1);
                if (!fits(phase)) throw InfeasibleMu(mu);
            }
            const double den = detail::phase_denominator(phase, a, b, delta);
            for (std::size_t r = 0; r < rows; ++r)
                products[r] *= den / std::abs(c_diag[r][std::size_t(j - lo)]);
            assign(j, phase);
        }
    }
    return {std::move(pair), std::move(schedule)};
}

/// mu_r(n) by the two-sided product formula: forward products of
/// c_rr(j) / (h(j) + Delta(j)) for n >= 0 and inverse products for n <= -1,
/// so the recurrence mu_r(n+1) = mu_r(n) c_rr(n) / (h(n) + Delta(n)) holds
/// across the whole window with mu_r(0) = 1.
inline ScalingSequence build_scaling(const StepPair& pair, const std::vector<double>& c_rr,
                                     double mu_bound) {
    const Step lo = pair.lo;
    const std::size_t steps = c_rr.size();
    ScalingSequence scaling;
    scaling.lo = lo;
    scaling.values.assign(steps + 1, 1.0);
    const auto zero = std::size_t(-lo);
    for (std::size_t i = zero; i < steps; ++i)
        scaling.values[i + 1] =
            scaling.values[i] * c_rr[i] / (pair.h[i] + pair.delta_seq[i]);
    for (std::size_t i = zero; i-- > 0;)
        scaling.values[i] =
            scaling.values[i + 1] * (pair.h[i] + pair.delta_seq[i]) / c_rr[i];

    scaling.m1 = 0.0;
    scaling.m2 = std::numeric_limits<double>::infinity();
    for (double v : scaling.values) {
        scaling.m1 = std::max(scaling.m1, std::abs(v));
        scaling.m2 = std::min(scaling.m2, std::abs(v));
    }
    if (!(scaling.m2 > 0.0)) throw BoundViolation("scaling sequence touches zero");
    if (scaling.m1 / scaling.m2 > mu_bound * mu_bound * (1.0 + 1e-9))
        throw BoundViolation("scaling spread " + std::to_string(scaling.m1 / scaling.m2) +
                             " exceeds mu^2; schedule inconsistent with this row");
    return scaling;
}

/// Everything contract_block certifies about one spectral block.
struct BlockContraction {
    ClosedInterval interval;
    int dim = 0;
    double delta = 0.0;
    double mu = 0.0;
    double beta = 0.0;
    double m1 = 1.0;
    double m2 = 1.0;
    double c_plus = 0.0;
    double analytic_residual_bound = 0.0;  // delta/2 + (M1 C+ / M2) beta/(1-beta)
    double r_sup = 0.0;                    // measured sup ||R_i(n)||
    std::vector<std::vector<double>> c_diag;  // diagonal of the triangular block
    StepPair pair;
    SwitchingSchedule schedule;
    WindowedMatrices gamma;     // h I + R on the block window
    WindowedMatrices residual;  // R_i
    SimilarityTransform transform;  // L_i(n) * D_beta
};

inline double default_mu(const ClosedInterval& interval, double delta) {
    return std::max(2.0, (interval.hi + delta / 2.0) / (interval.lo - delta / 2.0));
}

/// Steps 2-4 for one upper triangular block with spectrum ~ [a, b]: build the
/// schedule and diagonal scaling, conjugate, pick beta below the admissible
/// bound, and split Gamma = h I + R with the verified residual bound
/// ||R(n)|| < delta.
inline BlockContraction contract_block(const WindowedMatrices& c, ClosedInterval interval,
                                       double delta, std::optional<double> mu_opt = std::nullopt,
                                       std::optional<double> beta_opt = std::nullopt) {
    const double a = interval.lo;
    const double b = interval.hi;
    if (!(delta > 0.0 && delta < 2.0 * a))
        throw Error("InvalidArgument", "delta must lie in (0, 2 a_i)");
    const Window w = c.window();
    const Eigen::Index d = c.dimension();
    const double mu = mu_opt.value_or(default_mu(interval, delta));
    if (mu <= 1.0) throw Error("InvalidArgument", "mu must exceed 1");

    std::vector<std::vector<double>> c_diag(static_cast<std::size_t>(d));
    for (Eigen::Index r = 0; r < d; ++r) {
        auto& row = c_diag[std::size_t(r)];
        row.reserve(std::size_t(w.span() + 1));
        for (Step n = w.lo; n <= w.hi; ++n) row.push_back(c.at(n)(r, r));
    }

    BlockContraction out;
    out.interval = interval;
    out.dim = int(d);
    out.delta = delta;
    out.mu = mu;

    auto [pair, schedule] = build_schedule(c_diag, w.lo, a, b, delta, mu);
    out.c_diag = c_diag;
    out.pair = std::move(pair);
    out.schedule = std::move(schedule);

    std::vector<ScalingSequence> scalings;
    out.m1 = 0.0;
    out.m2 = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < d; ++r) {
        scalings.push_back(build_scaling(out.pair, c_diag[std::size_t(r)], mu));
        out.m1 = std::max(out.m1, scalings.back().m1);
        out.m2 = std::min(out.m2, scalings.back().m2);
    }

    out.c_plus = 0.0;
    for (Step n = w.lo; n <= w.hi; ++n) out.c_plus = std::max(out.c_plus, inf_norm(c.at(n)));

    const double beta_bound = delta / (delta + 2.0 * out.c_plus * out.m1 / out.m2);
    if (beta_bound < 1e-14) throw BetaUnderflow(beta_bound);
    out.beta = beta_opt.value_or(beta_bound / 2.0);
    if (!(out.beta > 0.0 && out.beta < 1.0))
        throw Error("InvalidArgument", "beta must lie in (0,1)");

    // Lambda(n) = L^-1(n+1) C(n) L(n), then the beta transform
    WindowedMatrices lambda_vals;
    lambda_vals.lo = w.lo;
    lambda_vals.values.reserve(std::size_t(w.span() + 1));
    for (Step n = w.lo; n <= w.hi; ++n) {
        Matrix m = c.at(n);
        for (Eigen::Index r = 0; r < d; ++r)
            for (Eigen::Index s = 0; s < d; ++s)
                m(r, s) *= scalings[std::size_t(s)].at(n) / scalings[std::size_t(r)].at(n + 1);
        lambda_vals.values.push_back(std::move(m));
    }
    out.gamma = beta_transform(lambda_vals, out.beta);

    out.residual.lo = w.lo;
    out.residual.values.reserve(std::size_t(w.span() + 1));
    out.r_sup = 0.0;
    for (Step n = w.lo; n <= w.hi; ++n) {
        Matrix r = out.gamma.at(n);
        r.diagonal().array() -= out.pair.h_at(n);
        out.r_sup = std::max(out.r_sup, inf_norm(r));
        out.residual.values.push_back(std::move(r));
    }
    out.analytic_residual_bound =
        delta / 2.0 + (out.m1 * out.c_plus / out.m2) * out.beta / (1.0 - out.beta);
    if (!(out.r_sup < delta))
        throw BoundViolation("block residual " + std::to_string(out.r_sup) +
                             " does not stay below delta");

    // composed transform L_i(n) D_beta on [lo, hi+1]
    Matrix d_beta = Matrix::Identity(d, d);
    for (Eigen::Index r = 1; r < d; ++r) d_beta(r, r) = d_beta(r - 1, r - 1) * out.beta;
    WindowedMatrices t_vals;
    t_vals.lo = w.lo;
    t_vals.values.reserve(std::size_t(w.span() + 2));
    for (Step n = w.lo; n <= w.hi + 1; ++n) {
        Matrix l = Matrix::Zero(d, d);
        for (Eigen::Index r = 0; r < d; ++r) l(r, r) = scalings[std::size_t(r)].at(n);
        t_vals.values.push_back(l * d_beta);
    }
    out.transform = SimilarityTransform::make(std::move(t_vals), delta);
    return out;
}

/// The full contraction certificate for diag(H)(I + R).
struct ContractionResult {
    Window window;               // steps of the assembled system
    std::vector<Vector> h;       // H(n) diagonal entries per n
    std::vector<Matrix> residual;  // R(n) = blockdiag(h_i^-1 R_i)
    std::vector<double> r_norms;   // ||R(n)|| per n
    double delta = 0.0;
    double delta_tilde = 0.0;  // delta / a_1; the certified residual bound
    SimilarityTransform transform;
    SpectrumEstimate sigma;
    std::vector<BlockContraction> blocks;

    Vector h_at(Step n) const { return h[std::size_t(n - window.lo)]; }
    const Matrix& residual_at(Step n) const { return residual[std::size_t(n - window.lo)]; }

    /// The contracted system U(n) = diag(H(n)) (I + R(n)).
    WindowedMatrices contracted_values() const {
        WindowedMatrices out;
        out.lo = window.lo;
        out.values.reserve(h.size());
        const Eigen::Index d = h.front().size();
        for (std::size_t i = 0; i < h.size(); ++i) {
            Matrix u = Matrix::Identity(d, d) + residual[i];
            for (Eigen::Index r = 0; r < d; ++r) u.row(r) *= h[i](r);
            out.values.push_back(std::move(u));
        }
        return out;
    }
};

struct ContractionOptions {
    double lambda_lo = 1e-3;
    double lambda_hi = 1e3;
    int grid = 64;
    double eps_lambda = 1e-3;
    std::optional<double> mu;
    std::optional<double> beta;
    double coupling_tol = kDefaultCouplingTol;
};

/// Theorem-1 pipeline: spectrum estimate, block diagonalization, per-block QR
/// triangularization and contraction, then assembly of H and R with the
/// composed transform. The certified bound is ||R(n)|| < delta / a_1.
inline ContractionResult contract_system(const MatrixSequence& seq, double delta, Step n,
                                         ContractionOptions options = {}) {
    TransitionOperator op(seq, Window::symmetric(n));
    SpectrumEstimate sigma;
    try {
        sigma = spectrum_scan(op, options.lambda_lo, options.lambda_hi, options.grid,
                              options.eps_lambda, n);
    } catch (const RangeTooNarrow&) {
        throw UnboundedSpectrum();
    }
    if (sigma.ell < 1) throw Error("EmptySpectrum", "no spectral interval detected");
    const double a1 = sigma.intervals.front().lo;
    if (!(delta > 0.0 && delta < 2.0 * a1))
        throw Error("InvalidArgument", "delta must lie in (0, 2 a_1)");

    BlockDecomposition decomp =
        block_diagonalize(seq, sigma, n, options.coupling_tol);

    std::vector<BlockContraction> blocks;
    std::vector<SimilarityTransform> q_transforms;
    Window common = decomp.blocks.front().window();
    for (std::size_t i = 0; i < decomp.blocks.size(); ++i) {
        auto [q, c] = qr_triangularize(decomp.blocks[i]);
        BlockContraction blk = contract_block(c, sigma.intervals[i], delta, options.mu,
                                              options.beta);
        common = common.intersect(blk.gamma.window());
        q_transforms.push_back(std::move(q));
        blocks.push_back(std::move(blk));
    }

    ContractionResult result;
    result.window = common;
    result.delta = delta;
    result.delta_tilde = delta / a1;
    result.sigma = sigma;

    const Eigen::Index d = seq.dimension();
    const auto count = std::size_t(common.span() + 1);
    result.h.reserve(count);
    result.residual.reserve(count);
    result.r_norms.reserve(count);
    for (Step t = common.lo; t <= common.hi; ++t) {
        Vector h(d);
        Matrix r = Matrix::Zero(d, d);
        Eigen::Index offset = 0;
        for (const auto& blk : blocks) {
            const Eigen::Index bd = blk.dim;
            const double h_val = blk.pair.h_at(t);
            h.segment(offset, bd).setConstant(h_val);
            r.block(offset, offset, bd, bd) = blk.residual.at(t) / h_val;
            offset += bd;
        }
        result.h.push_back(std::move(h));
        result.r_norms.push_back(inf_norm(r));
        result.residual.push_back(std::move(r));
    }

    // composed transform F_bd(n) * blockdiag(Q_i(n) L_i(n) D_beta_i)
    WindowedMatrices f_vals;
    f_vals.lo = common.lo;
    f_vals.values.reserve(count + 1);
    for (Step t = common.lo; t <= common.hi + 1; ++t) {
        Matrix inner = Matrix::Zero(d, d);
        Eigen::Index offset = 0;
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const Eigen::Index bd = blocks[i].dim;
            inner.block(offset, offset, bd, bd) =
                q_transforms[i].at(t) * blocks[i].transform.at(t);
            offset += bd;
        }
        f_vals.values.push_back(decomp.transform.at(t) * inner);
    }
    result.transform = SimilarityTransform::make(std::move(f_vals), delta);
    result.blocks = std::move(blocks);
    return result;
}

/// Independent re-check of a contraction certificate.
struct ContractionVerification {
    bool similarity = false;    // transform carries seq to diag(H)(I+R)
    bool h_membership = false;  // every H entry within tol of sigma
    bool residual_bound = false;  // ||R(n)|| < delta_tilde
    bool minimality = false;      // hull of achieved H covers sigma within tol
    double max_similarity_residual = 0.0;
    double worst_h_distance = 0.0;
    double worst_r_norm = 0.0;
    double worst_hull_defect = 0.0;

    bool all() const { return similarity && h_membership && residual_bound && minimality; }
};

inline ContractionVerification verify_contraction(const ContractionResult& result,
                                                  const MatrixSequence& seq,
                                                  const SpectrumEstimate& sigma, double tol,
                                                  double similarity_tol = 1e-6) {
    ContractionVerification v;

    const WindowedMatrices contracted = result.contracted_values();
    const SimilarityReport sim = check_similarity(result.transform, seq, contracted,
                                                  similarity_tol);
    v.similarity = sim.holds;
    v.max_similarity_residual = sim.max_relative_residual;

    v.worst_h_distance = 0.0;
    for (const auto& h : result.h) {
        for (Eigen::Index i = 0; i < h.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& iv : sigma.intervals) {
                const double dist =
                    h(i) < iv.lo ? iv.lo - h(i) : (h(i) > iv.hi ? h(i) - iv.hi : 0.0);
                best = std::min(best, dist);
            }
            v.worst_h_distance = std::max(v.worst_h_distance, best);
        }
    }
    v.h_membership = v.worst_h_distance <= tol;

    v.worst_r_norm = 0.0;
    for (double r : result.r_norms) v.worst_r_norm = std::max(v.worst_r_norm, r);
    v.residual_bound = v.worst_r_norm < result.delta_tilde;

    // minimality probe: the hull of achieved H values per block must cover
    // the matching spectral interval
    v.worst_hull_defect = 0.0;
    if (result.blocks.size() == sigma.intervals.size()) {
        Eigen::Index offset = 0;
        for (std::size_t i = 0; i < result.blocks.size(); ++i) {
            double h_min = std::numeric_limits<double>::infinity();
            double h_max = -std::numeric_limits<double>::infinity();
            for (const auto& h : result.h) {
                h_min = std::min(h_min, h(offset));
                h_max = std::max(h_max, h(offset));
            }
            const auto& iv = sigma.intervals[i];
            v.worst_hull_defect = std::max(v.worst_hull_defect, h_min - iv.lo);
            v.worst_hull_defect = std::max(v.worst_hull_defect, iv.hi - h_max);
            offset += result.blocks[i].dim;
        }
        v.minimality = v.worst_hull_defect <= tol;
    } else {
        v.minimality = false;
        v.worst_hull_defect = std::numeric_limits<double>::infinity();
    }
    return v;
}

}  // namespace dispec

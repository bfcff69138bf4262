#pragma once

// Fundamental and transition matrices of x(n+1) = A(n) x(n) over a window,
// with log-scaled product accumulation so growth rates far outside double
// range stay representable, plus the propagated stable/unstable frame
// machinery that backs the dichotomy tests.

#include "dispec/common.hpp"
#include "dispec/errors.hpp"
#include "dispec/system.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <variant>

namespace dispec {

namespace detail {

/// Dyadic range-product table over per-step factors F(lo..hi-1).
/// forward mode : query(i, len) = F(i+len-1) * ... * F(i)
/// inverse mode : query(i, len) = F(i)^-1 * F(i+1)^-1 * ... * F(i+len-1)^-1
/// All entries are kept scaled, so arbitrarily long decaying or growing
/// products keep full relative accuracy in their dominant directions.
class RangeProductTable {
public:
    RangeProductTable() = default;

    static RangeProductTable forward(const std::vector<Matrix>& factors) {
        return RangeProductTable(factors, false);
    }

    static RangeProductTable inverse(const std::vector<Matrix>& factors) {
        return RangeProductTable(factors, true);
    }

    ScaledMatrix query(std::size_t start, std::size_t len) const {
        const Eigen::Index d = dim_;
        ScaledMatrix acc = scaled_identity(d);
        std::size_t pos = start;
        for (std::size_t level = 0; len != 0; ++level, len >>= 1) {
            if (len & 1) {
                const ScaledMatrix& blockp = levels_[level][pos];
                if (inverse_) {
                    acc.value = acc.value * blockp.value;
                } else {
                    acc.value = blockp.value * acc.value;
                }
                acc.log_scale += blockp.log_scale;
                acc.normalize();
                pos += std::size_t(1) << level;
            }
        }
        return acc;
    }

private:
    RangeProductTable(const std::vector<Matrix>& factors, bool inverse) : inverse_(inverse) {
        dim_ = factors.empty() ? 0 : factors.front().rows();
        if (factors.empty()) return;
        const Matrix id = Matrix::Identity(dim_, dim_);
        levels_.emplace_back();
        levels_[0].reserve(factors.size());
        for (const auto& f : factors) {
            ScaledMatrix s{inverse ? f.triangularView<Eigen::Upper>().solve(id).eval() : f, 0.0};
            s.normalize();
            levels_[0].push_back(std::move(s));
        }
        for (std::size_t level = 1; (std::size_t(1) << level) <= factors.size(); ++level) {
            const std::size_t half = std::size_t(1) << (level - 1);
            const auto& prev = levels_[level - 1];
            std::vector<ScaledMatrix> cur;
            cur.reserve(prev.size() - half);
            for (std::size_t i = 0; i + 2 * half <= factors.size(); ++i) {
                cur.push_back(inverse ? scaled_product(prev[i], prev[i + half])
                                      : scaled_product(prev[i + half], prev[i]));
            }
            levels_.push_back(std::move(cur));
        }
    }

    bool inverse_ = false;
    Eigen::Index dim_ = 0;
    std::vector<std::vector<ScaledMatrix>> levels_;
};

/// One lambda-independent sample of a dichotomy bound family:
/// stable family  : log ||X(base+sep) P X(base)^-1||      at lambda = 1
/// unstable family: log ||X(base) (I-P) X(base+sep)^-1||  at lambda = 1
struct PairSample {
    Step base;
    Step sep;
    double log_norm;
};

/// Propagated orthonormal stable/unstable frames for a fixed splitting
/// dimension m, with everything the bound evaluation needs precomputed.
struct SplitFrames {
    int stable_dim = 0;
    Step lo = 0;
    std::vector<Matrix> q_stable;    // [lo..hi], d x m
    std::vector<Matrix> q_unstable;  // [lo..hi], d x (d-m)
    std::vector<Matrix> r_stable;    // [lo..hi-1], m x m, positive diagonal
    std::vector<Matrix> r_unstable;  // [lo..hi-1]
    std::vector<Matrix> ginv_top;    // [lo..hi], m x d rows of [Qs Qu]^-1
    std::vector<Matrix> ginv_bot;    // [lo..hi], (d-m) x d
    RangeProductTable stable_products;
    RangeProductTable unstable_inverse_products;
    std::vector<PairSample> stable_pairs;
    std::vector<PairSample> unstable_pairs;

    std::size_t idx(Step n) const { return std::size_t(n - lo); }

    /// log ||X(n) P X(k)^-1|| for n >= k (lambda = 1 weighting).
    double stable_log_norm(Step n, Step k) const {
        ScaledMatrix prod = stable_products.query(idx(k), std::size_t(n - k));
        const Matrix t = q_stable[idx(n)] * (prod.value * ginv_top[idx(k)]);
        const double norm = inf_norm(t);
        if (norm <= 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(norm) + prod.log_scale;
    }

    /// log ||X(n) (I-P) X(k)^-1|| for n <= k (lambda = 1 weighting).
    double unstable_log_norm(Step n, Step k) const {
        ScaledMatrix prod = unstable_inverse_products.query(idx(n), std::size_t(k - n));
        const Matrix t = q_unstable[idx(n)] * (prod.value * ginv_bot[idx(k)]);
        const double norm = inf_norm(t);
        if (norm <= 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(norm) + prod.log_scale;
    }
};

}  // namespace detail

/// Transition machinery of a coefficient sequence restricted to a window
/// containing 0. Immutable after construction; lazy caches are mutex-guarded
/// so concurrent reads are safe.
class TransitionOperator {
public:
    TransitionOperator(MatrixSequence seq, Window window)
        : window_(window), source_(std::move(seq)) {
        init();
    }

    /// Window is implied: steps on [values.lo, values.lo + count - 1] give
    /// fundamental matrices on [values.lo, values.lo + count].
    explicit TransitionOperator(WindowedMatrices values)
        : window_{values.lo, values.lo + Step(values.values.size())}, source_(std::move(values)) {
        init();
    }

    Window window() const { return window_; }
    Eigen::Index dimension() const { return dim_; }

    /// Largest symmetric horizon [-N, N] inside the window.
    Step max_horizon() const { return std::min(-window_.lo, window_.hi); }

    const Matrix& coefficient(Step n) const {
        if (n < window_.lo || n >= window_.hi) throw OutOfWindow(n);
        if (const auto* seq = std::get_if<MatrixSequence>(&source_)) return seq->evaluate(n);
        return std::get<WindowedMatrices>(source_).at(n);
    }

    const MatrixSequence* sequence() const { return std::get_if<MatrixSequence>(&source_); }

    // -- fundamental / transition matrices --------------------------------

    Matrix fundamental(Step n) const {
        if (!window_.contains(n)) throw OutOfWindow(n);
        return xcache_[std::size_t(n - window_.lo)].materialize();
    }

    /// X(n,k) by direct left-to-right product accumulation (default path;
    /// immune to the conditioning of X(k) itself).
    Matrix transition(Step n, Step k) const { return scaled_transition(n, k).materialize(); }

    /// X(n,k) as X(n) X(k)^-1 from the cached fundamental matrices. Loses
    /// accuracy when the window carries strong growth; kept as the cross-check
    /// route.
    Matrix transition_via_cache(Step n, Step k) const {
        if (!window_.contains(n)) throw OutOfWindow(n);
        if (!window_.contains(k)) throw OutOfWindow(k);
        const auto& xn = xcache_[std::size_t(n - window_.lo)];
        const auto& xk = xcache_[std::size_t(k - window_.lo)];
        detail::ScaledMatrix out{xn.value * xk.value.inverse(), xn.log_scale - xk.log_scale};
        return out.materialize();
    }

    /// lambda^{k-n} X(n,k): the transition of x(n+1) = lambda^-1 A(n) x(n).
    Matrix weighted_transition(double lambda, Step n, Step k) const {
        if (lambda <= 0.0) throw NonpositiveLambda(lambda);
        detail::ScaledMatrix t = scaled_transition(n, k);
        t.log_scale += double(k - n) * std::log(lambda);
        return t.materialize();
    }

    // -- QR rate and frame caches ------------------------------------------

    /// Per-direction mean of log R_ii over steps [n1, n2) of the forward QR
    /// triangularization (finite-window growth-rate estimates).
    std::vector<double> qr_rates(Step n1, Step n2) const {
        if (n1 < window_.lo || n2 > window_.hi || n1 >= n2) throw OutOfWindow(n1);
        std::vector<double> rates(static_cast<std::size_t>(dim_), 0.0);
        const auto i1 = std::size_t(n1 - window_.lo);
        const auto i2 = std::size_t(n2 - window_.lo);
        for (std::size_t i = 0; i < std::size_t(dim_); ++i)
            rates[i] = (logdiag_prefix_[i][i2] - logdiag_prefix_[i][i1]) / double(n2 - n1);
        return rates;
    }

    /// Frames for a given stable dimension, built lazily and cached.
    const detail::SplitFrames& split_frames(int stable_dim) const {
        if (stable_dim < 0 || stable_dim > int(dim_))
            throw Error("InvalidArgument", "stable dimension out of range");
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto it = split_cache_.find(stable_dim);
        if (it == split_cache_.end())
            it = split_cache_.emplace(stable_dim, build_split_frames(stable_dim)).first;
        return *it->second;
    }

private:
    void init() {
        if (window_.span() < 1) throw WindowMismatch("operator window needs at least one step");
        if (!window_.contains(0)) throw WindowMismatch("operator window must contain 0");
        if (const auto* w = std::get_if<WindowedMatrices>(&source_)) {
            dim_ = w->dimension();
        } else {
            dim_ = std::get<MatrixSequence>(source_).dimension();
        }
        build_x_cache();
        build_qr_cache();
    }

    void build_x_cache() {
        const auto count = std::size_t(window_.span() + 1);
        xcache_.assign(count, detail::scaled_identity(dim_));
        const auto zero_idx = std::size_t(-window_.lo);
        for (Step n = 0; n < window_.hi; ++n) {
            auto& next = xcache_[zero_idx + std::size_t(n) + 1];
            next.value = coefficient(n) * xcache_[zero_idx + std::size_t(n)].value;
            next.log_scale = xcache_[zero_idx + std::size_t(n)].log_scale;
            next.normalize();
        }
        for (Step n = -1; n >= window_.lo; --n) {
            const auto i = std::size_t(n - window_.lo);
            xcache_[i].value = coefficient(n).partialPivLu().solve(xcache_[i + 1].value);
            xcache_[i].log_scale = xcache_[i + 1].log_scale;
            xcache_[i].normalize();
        }
    }

    void build_qr_cache() {
        const auto steps = std::size_t(window_.span());
        qr_r_.reserve(steps);
        Matrix q = Matrix::Identity(dim_, dim_);
        logdiag_prefix_.assign(std::size_t(dim_), std::vector<double>(steps + 1, 0.0));
        for (Step n = window_.lo; n < window_.hi; ++n) {
            Matrix qn, rn;
            detail::qr_positive(coefficient(n) * q, qn, rn);
            const auto i = std::size_t(n - window_.lo);
            for (std::size_t r = 0; r < std::size_t(dim_); ++r) {
                const double diag = rn(Eigen::Index(r), Eigen::Index(r));
                if (!(diag > 0.0)) throw SingularCoefficient(n, 0.0);
                logdiag_prefix_[r][i + 1] = logdiag_prefix_[r][i] + std::log(diag);
            }
            qr_r_.push_back(std::move(rn));
            q = std::move(qn);
        }
    }

    detail::ScaledMatrix scaled_transition(Step n, Step k) const {
        if (!window_.contains(n)) throw OutOfWindow(n);
        if (!window_.contains(k)) throw OutOfWindow(k);
        detail::ScaledMatrix acc = detail::scaled_identity(dim_);
        if (n > k) {
            for (Step j = k; j < n; ++j) {
                acc.value = coefficient(j) * acc.value;
                acc.normalize();
            }
        } else if (n < k) {
            for (Step j = n; j < k; ++j) {
                acc.value = acc.value * coefficient(j).inverse();
                acc.normalize();
            }
        }
        return acc;
    }

    /// Stable-space seed at the window start: backward subspace iteration of
    /// the inverse cocycle with per-step orthonormalization. Converges at the
    /// spectral-gap rate, so a full window sweep pins the subspace to machine
    /// precision whenever a genuine gap exists.
    Matrix stable_seed(int m) const {
        std::vector<double> rates = qr_rates(window_.lo, window_.hi);
        std::vector<std::size_t> order(rates.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return rates[a] < rates[b]; });
        Matrix z = Matrix::Zero(dim_, m);
        for (int c = 0; c < m; ++c) z(Eigen::Index(order[std::size_t(c)]), c) = 1.0;
        Matrix q, r;
        for (Step t = window_.hi - 1; t >= window_.lo; --t) {
            z = coefficient(t).partialPivLu().solve(z);
            detail::qr_positive(z, q, r);
            z = q;
        }
        return z;
    }

    std::shared_ptr<const detail::SplitFrames> build_split_frames(int m) const {
        auto frames = std::make_shared<detail::SplitFrames>();
        frames->stable_dim = m;
        frames->lo = window_.lo;
        const auto count = std::size_t(window_.span() + 1);
        const int mu = int(dim_) - m;

        Matrix seed_s(dim_, m), seed_u(dim_, mu);
        if (m == 0) {
            seed_u = Matrix::Identity(dim_, dim_);
        } else if (mu == 0) {
            seed_s = Matrix::Identity(dim_, dim_);
        } else {
            seed_s = stable_seed(m);
            Eigen::HouseholderQR<Matrix> qr(seed_s);
            const Matrix full = qr.householderQ() * Matrix::Identity(dim_, dim_);
            seed_u = full.rightCols(mu);
        }

        frames->q_stable.reserve(count);
        frames->q_unstable.reserve(count);
        frames->r_stable.reserve(count - 1);
        frames->r_unstable.reserve(count - 1);
        frames->ginv_top.reserve(count);
        frames->ginv_bot.reserve(count);

        frames->q_stable.push_back(seed_s);
        frames->q_unstable.push_back(seed_u);
        Matrix q, r;
        for (Step t = window_.lo; t < window_.hi; ++t) {
            if (m > 0) {
                detail::qr_positive(coefficient(t) * frames->q_stable.back(), q, r);
                frames->q_stable.push_back(q);
                frames->r_stable.push_back(r);
            } else {
                frames->q_stable.push_back(seed_s);
                frames->r_stable.push_back(Matrix::Zero(0, 0));
            }
            if (mu > 0) {
                detail::qr_positive(coefficient(t) * frames->q_unstable.back(), q, r);
                frames->q_unstable.push_back(q);
                frames->r_unstable.push_back(r);
            } else {
                frames->q_unstable.push_back(seed_u);
                frames->r_unstable.push_back(Matrix::Zero(0, 0));
            }
        }

        for (std::size_t i = 0; i < count; ++i) {
            Matrix g(dim_, dim_);
            if (m > 0) g.leftCols(m) = frames->q_stable[i];
            if (mu > 0) g.rightCols(mu) = frames->q_unstable[i];
            const Matrix ginv = g.partialPivLu().inverse();
            frames->ginv_top.push_back(ginv.topRows(m));
            frames->ginv_bot.push_back(ginv.bottomRows(mu));
        }

        if (m > 0)
            frames->stable_products = detail::RangeProductTable::forward(frames->r_stable);
        if (mu > 0)
            frames->unstable_inverse_products =
                detail::RangeProductTable::inverse(frames->r_unstable);

        build_pair_grid(*frames);
        return frames;
    }

    /// Decimated pair grid: every separation up to 16, then geometrically
    /// spaced separations up to half the window span, with strided base
    /// points. Stored log-norms are lambda-independent; weighting shifts them
    /// by -(n-k) log lambda at query time.
    void build_pair_grid(detail::SplitFrames& frames) const {
        const Step span = window_.span();
        std::vector<Step> seps;
        for (Step s = 1; s <= std::min<Step>(16, span); ++s) seps.push_back(s);
        const Step smax = std::max<Step>(1, span / 2);
        for (Step s = 20; s <= smax; s = std::max(s + 1, s * 5 / 4)) seps.push_back(s);
        for (Step s : seps) {
            const Step stride = std::max<Step>(1, (span - s) / 64);
            for (Step base = window_.lo; base + s <= window_.hi; base += stride) {
                if (frames.stable_dim > 0)
                    frames.stable_pairs.push_back(
                        {base, s, frames.stable_log_norm(base + s, base)});
                if (frames.stable_dim < int(dim_))
                    frames.unstable_pairs.push_back(
                        {base, s, frames.unstable_log_norm(base, base + s)});
            }
        }
    }

    Window window_;
    std::variant<MatrixSequence, WindowedMatrices> source_;
    Eigen::Index dim_ = 0;
    std::vector<detail::ScaledMatrix> xcache_;
    std::vector<Matrix> qr_r_;
    std::vector<std::vector<double>> logdiag_prefix_;
    mutable std::mutex cache_mutex_;
    mutable std::map<int, std::shared_ptr<const detail::SplitFrames>> split_cache_;
};

}  // namespace dispec

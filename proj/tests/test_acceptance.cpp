// Acceptance suite: one test case per criterion, each printing a PASS line
// once its assertions clear. Oracle values are produced by plain replay
// loops, never by the code paths under test.

#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

#include <chrono>
#include <iostream>
#include <random>

using namespace dispec;
using namespace testsupport;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void pass(int criterion, const std::string& what) {
    std::cout << "[ACCEPTANCE] criterion " << criterion << " PASS: " << what << "\n";
}

MatrixSequence periodic_swap(double a, double b) {
    Matrix m(2, 2);
    m << 0.0, a, b, 0.0;
    Matrix m2(2, 2);
    m2 << 0.0, b, a, 0.0;
    return MatrixSequence::periodic({m, m2});
}

struct ContractionFixture {
    std::string name;
    MatrixSequence seq;
    Step horizon;
};

std::vector<ContractionFixture> contraction_fixtures() {
    std::mt19937 rng(2026);
    std::vector<ContractionFixture> out;
    out.push_back({"baby1", baby1(), 500});
    out.push_back({"diag123", MatrixSequence::constant(diag3(1.0, 2.0, 3.0)), 300});
    out.push_back({"rotated", conjugated_diagonal({0.5, 3.0}, rng), 400});
    out.push_back({"periodic2x2", periodic_swap(2.0, 0.5), 400});
    return out;
}

const std::vector<std::pair<ContractionFixture, ContractionResult>>& contractions() {
    static const auto results = [] {
        std::vector<std::pair<ContractionFixture, ContractionResult>> out;
        for (const auto& fixture : contraction_fixtures())
            out.emplace_back(fixture, contract_system(fixture.seq, 0.1, fixture.horizon));
        return out;
    }();
    return results;
}

}  // namespace

TEST_CASE("criterion 1: two branch spectrum by both routes") {
    const auto start = std::chrono::steady_clock::now();
    TransitionOperator op(baby1(), Window::symmetric(1000));
    const SpectrumEstimate scanned = spectrum_scan(op, 0.1, 10.0, 32, 1e-3, 1000);
    REQUIRE(scanned.ell == 1);
    REQUIRE(scanned.intervals[0].lo == Catch::Approx(0.5).margin(0.05));
    REQUIRE(scanned.intervals[0].hi == Catch::Approx(2.0).margin(0.05));

    const SpectrumEstimate triangular = spectrum_via_triangular(baby1(), 1000, 500);
    REQUIRE(triangular.ell == 1);
    REQUIRE(std::abs(triangular.intervals[0].lo - scanned.intervals[0].lo) <= 0.05);
    REQUIRE(std::abs(triangular.intervals[0].hi - scanned.intervals[0].hi) <= 0.05);

    const double elapsed = seconds_since(start);
    REQUIRE(elapsed < 10.0);
    pass(1, "spectrum [0.5, 2] within 0.05 by scan and triangular routes");
}

TEST_CASE("criterion 2: spectral scaling law on random fixtures") {
    const auto start = std::chrono::steady_clock::now();
    std::mt19937 rng(424242);
    std::uniform_real_distribution<double> logmod(std::log(0.3), std::log(3.0));
    std::uniform_int_distribution<int> dims(1, 4);

    int fixtures_done = 0;
    while (fixtures_done < 20) {
        const int d = dims(rng);
        std::vector<double> moduli;
        double prev = 0.0;
        for (int i = 0; i < d; ++i) {
            double m = std::exp(logmod(rng));
            // keep moduli separated so the scan resolves them
            if (prev > 0.0 && std::abs(std::log(m / prev)) < 0.3) {
                m = prev * 1.5;
            }
            moduli.push_back(m);
            prev = m;
        }
        const MatrixSequence seq = conjugated_diagonal(moduli, rng);
        const Step n = 300;
        TransitionOperator op(seq, Window::symmetric(n));
        const SpectrumEstimate sigma = spectrum_scan(op, 1e-2, 1e2, 24, 1e-3, n);

        for (double lambda : {0.5, 2.0, std::exp(1.0)}) {
            TransitionOperator weighted(scale_system(seq, 1.0 / lambda), Window::symmetric(n));
            const SpectrumEstimate direct = spectrum_scan(weighted, 1e-2, 1e2, 24, 1e-3, n);
            const SpectrumEstimate scaled = scale_spectrum(sigma, lambda);
            REQUIRE(direct.ell == scaled.ell);
            for (int i = 0; i < direct.ell; ++i) {
                const auto& dv = direct.intervals[std::size_t(i)];
                const auto& sv = scaled.intervals[std::size_t(i)];
                REQUIRE(std::abs(std::log(dv.lo / sv.lo)) <= 2e-3);
                REQUIRE(std::abs(std::log(dv.hi / sv.hi)) <= 2e-3);
            }
        }
        ++fixtures_done;
    }
    const double elapsed = seconds_since(start);
    REQUIRE(elapsed < 60.0);
    pass(2, "20 fixtures obey the scaling law within 2 eps_lambda");
}

TEST_CASE("criterion 3: spectrum invariance under bounded conjugation") {
    std::mt19937 rng(777);
    const double eps_lambda = 0.01;
    int checked = 0;
    for (int trial = 0; trial < 20; ++trial) {
        MatrixSequence seq = [&]() -> MatrixSequence {
            if (trial % 5 == 4) return baby1(0.45, 1.8);
            const int d = 1 + trial % 3;
            std::vector<double> moduli;
            for (int i = 0; i < d; ++i) moduli.push_back(0.5 * std::pow(2.4, i));
            return conjugated_diagonal(moduli, rng);
        }();
        const Step n = 400;
        const Eigen::Index dim = seq.dimension();

        TransitionOperator op(seq, Window::symmetric(n));
        const SpectrumEstimate base = spectrum_scan(op, 1e-2, 1e2, 24, eps_lambda, n);

        const SimilarityTransform f =
            random_bounded_transform(dim, Window{-n, n + 1}, rng);
        REQUIRE(f.f_sup <= 4.0);
        REQUIRE(f.finv_sup <= 4.0);
        TransitionOperator conj_op(conjugate(seq, f));
        const SpectrumEstimate moved =
            spectrum_scan(conj_op, 1e-2, 1e2, 24, eps_lambda, conj_op.max_horizon());

        REQUIRE(base.ell == moved.ell);
        for (int i = 0; i < base.ell; ++i) {
            REQUIRE(std::abs(std::log(moved.intervals[std::size_t(i)].lo /
                                      base.intervals[std::size_t(i)].lo)) <= 2 * eps_lambda);
            REQUIRE(std::abs(std::log(moved.intervals[std::size_t(i)].hi /
                                      base.intervals[std::size_t(i)].hi)) <= 2 * eps_lambda);
        }
        ++checked;
    }
    REQUIRE(checked == 20);
    pass(3, "bounded conjugation moves no endpoint by more than 2 eps_lambda");
}

TEST_CASE("criterion 4: rank profile counts stable directions") {
    const std::vector<std::vector<double>> fixtures = {
        {0.5, 3.0}, {0.5, 2.0, 5.0}, {0.4, 1.1, 2.6, 6.0}};
    for (const auto& moduli : fixtures) {
        const auto d = Eigen::Index(moduli.size());
        Matrix m = Matrix::Zero(d, d);
        for (Eigen::Index i = 0; i < d; ++i) m(i, i) = moduli[std::size_t(i)];
        TransitionOperator op(MatrixSequence::constant(m), Window::symmetric(150));
        const SpectrumEstimate sigma = spectrum_scan(op, 0.05, 20.0, 24, 1e-3, 150);
        REQUIRE(sigma.ell == int(d));
        const auto profile = rank_profile(op, sigma, 150);
        REQUIRE(profile.size() == std::size_t(d) + 1);
        for (std::size_t g = 0; g < profile.size(); ++g) {
            REQUIRE(profile[g].first == int(g));
            REQUIRE(profile[g].second == int(g));
        }
    }
    pass(4, "ranks run 0..d across the gaps of constant diagonal fixtures");
}

TEST_CASE("criterion 5: discrete QR correctness on random fixtures") {
    std::mt19937 rng(515151);
    for (int trial = 0; trial < 50; ++trial) {
        const MatrixSequence seq = MatrixSequence::periodic(
            {random_invertible(3, rng), random_invertible(3, rng), random_invertible(3, rng),
             random_invertible(3, rng), random_invertible(3, rng)});
        const Window w{-200, 200};
        const auto [q, c] = qr_triangularize(seq, w);
        for (Step n = w.lo; n <= w.hi; ++n) {
            REQUIRE(inf_norm(q.at(n).transpose() * q.at(n) - Matrix::Identity(3, 3)) <= 1e-12);
            REQUIRE(inf_norm(seq.evaluate(n) * q.at(n) - q.at(n + 1) * c.at(n)) <= 1e-10);
            for (Eigen::Index i = 0; i < 3; ++i) REQUIRE(c.at(n)(i, i) > 0.0);
        }
    }
    pass(5, "50 random 3x3 fixtures triangularize within the residual bounds");
}

TEST_CASE("criterion 6: switching schedules keep products inside [1/mu, mu]") {
    for (const auto& [fixture, result] : contractions()) {
        for (const auto& blk : result.blocks) {
            REQUIRE(blk.schedule.switch_times.front() == 0);
            for (std::size_t i = 0; i + 1 < blk.schedule.switch_times.size(); ++i)
                REQUIRE(blk.schedule.switch_times[i] < blk.schedule.switch_times[i + 1]);
            REQUIRE(blk.schedule.switch_times_neg.front() == 0);
            for (std::size_t i = 0; i + 1 < blk.schedule.switch_times_neg.size(); ++i)
                REQUIRE(blk.schedule.switch_times_neg[i] > blk.schedule.switch_times_neg[i + 1]);

            const Window w = blk.pair.window();
            for (int r = 0; r < blk.dim; ++r) {
                const auto& c = blk.c_diag[std::size_t(r)];
                double p = 1.0;
                for (Step j = 0; j <= w.hi; ++j) {
                    p *= std::abs(c[std::size_t(j - w.lo)]) /
                         (blk.pair.h_at(j) + blk.pair.delta_at(j));
                    REQUIRE(p >= 1.0 / blk.mu);
                    REQUIRE(p <= blk.mu);
                }
                double q = 1.0;
                for (Step j = -1; j >= w.lo; --j) {
                    q *= (blk.pair.h_at(j) + blk.pair.delta_at(j)) /
                         std::abs(c[std::size_t(j - w.lo)]);
                    REQUIRE(q >= 1.0 / blk.mu);
                    REQUIRE(q <= blk.mu);
                }
            }
        }
    }
    pass(6, "every block, row, and index satisfies the band bound exactly");
}

TEST_CASE("criterion 7: contraction certificates on the fixture families") {
    const auto start = std::chrono::steady_clock::now();
    for (const auto& [fixture, result] : contractions()) {
        INFO(fixture.name);
        const ContractionVerification v =
            verify_contraction(result, fixture.seq, result.sigma, 0.05);
        REQUIRE(v.similarity);
        REQUIRE(v.h_membership);
        REQUIRE(v.residual_bound);
        REQUIRE(v.max_similarity_residual < 1e-6);
        for (double r : result.r_norms) REQUIRE(r < result.delta_tilde);
        REQUIRE(v.worst_h_distance <= 0.05);
    }
    const double elapsed = seconds_since(start);
    REQUIRE(elapsed < 60.0);
    pass(7, "delta = 0.1 certificates verify end to end on all four fixtures");
}

TEST_CASE("criterion 8: analytic residual estimate dominates measurements") {
    for (const auto& [fixture, result] : contractions()) {
        INFO(fixture.name);
        for (const auto& blk : result.blocks) {
            const double bound = blk.delta / 2.0 +
                                 (blk.m1 * blk.c_plus / blk.m2) * blk.beta / (1.0 - blk.beta);
            REQUIRE(bound == Catch::Approx(blk.analytic_residual_bound).epsilon(1e-12));
            REQUIRE(blk.r_sup <= bound);
            REQUIRE(bound < blk.delta);
            const Window w = blk.residual.window();
            for (Step n = w.lo; n <= w.hi; ++n)
                REQUIRE(inf_norm(blk.residual.at(n)) <= bound);
        }
    }
    pass(8, "delta/2 + (M1 C+/M2) beta/(1-beta) bounds every block residual");
}

TEST_CASE("criterion 9: full spectrum systems diagonalize") {
    std::mt19937 rng(99);
    std::vector<std::pair<MatrixSequence, std::vector<double>>> fixtures;
    fixtures.emplace_back(conjugated_diagonal({0.5, 3.0}, rng), std::vector<double>{0.5, 3.0});
    fixtures.emplace_back(conjugated_diagonal({0.6, 1.5, 4.0}, rng),
                          std::vector<double>{0.6, 1.5, 4.0});
    for (const auto& [seq, moduli] : fixtures) {
        const Step n = 400;
        const DiagonalizationResult r = diagonalize_full_spectrum(seq, n);
        REQUIRE(r.max_offdiag < 1e-8);

        // per-entry Bohl intervals against the known spectrum
        const Window dw = r.diagonal.window();
        const Step burn = dw.span() / 5;
        for (Eigen::Index i = 0; i < seq.dimension(); ++i) {
            std::vector<Matrix> entries;
            for (Step t = dw.lo + burn; t <= dw.hi; ++t) {
                Matrix e(1, 1);
                e(0, 0) = r.diagonal.at(t)(i, i);
                entries.push_back(e);
            }
            const MatrixSequence scalar_seq =
                MatrixSequence::table(dw.lo + burn, std::move(entries));
            const Step inner = (dw.hi - (dw.lo + burn)) / 2 - 1;
            const ClosedInterval bohl =
                scalar_bohl_interval(scalar_seq, inner, {inner});
            bool matched = false;
            for (double m : moduli)
                if (std::abs(bohl.lo - m) <= 0.05 && std::abs(bohl.hi - m) <= 0.05)
                    matched = true;
            REQUIRE(matched);
        }
    }
    pass(9, "diagonal couplings below 1e-8 and Bohl intervals match the spectrum");
}

TEST_CASE("criterion 10: explicit constants for scalar systems outside the spectrum") {
    for (double a : {0.5, 2.0, 3.7}) {
        const MatrixSequence seq = scalar_constant(a);
        TransitionOperator op(seq, Window::symmetric(200));
        const double l_bound = std::abs(a - 1.0);

        for (double lambda : {a * 2.5, a * 1.3}) {  // above the spectrum
            const DichotomyResult res = test_dichotomy(op, lambda, 200);
            REQUIRE(has_dichotomy(res));
            const auto& w = std::get<DichotomyWitness>(res);
            REQUIRE(w.k_const <= (1.0 + kDefaultFitMargin) * (1.0 + 1e-9));
            REQUIRE(w.projector.rank == 1);

            // Gronwall-style bound at the weight h = max(L+2, lambda)
            const double h = std::max(l_bound + 2.0, lambda);
            const double theta = (1.0 + l_bound) / h;
            REQUIRE(theta < 1.0);
            for (Step k = -40; k <= 40; k += 8)
                for (Step n = k; n <= k + 60; n += 6) {
                    const double measured = inf_norm(op.weighted_transition(h, n, k));
                    REQUIRE(measured <= std::pow(theta, double(n - k)) * (1.0 + 1e-12));
                }
        }

        for (double lambda : {a / 2.5, a / 1.3}) {  // below the spectrum
            const DichotomyResult res = test_dichotomy(op, lambda, 200);
            REQUIRE(has_dichotomy(res));
            const auto& w = std::get<DichotomyWitness>(res);
            REQUIRE(w.k_const <= (1.0 + kDefaultFitMargin) * (1.0 + 1e-9));
            REQUIRE(w.projector.rank == 0);

            // mirrored bound through the inverse system
            const MatrixSequence inv_seq = scalar_constant(1.0 / a);
            TransitionOperator inv_op(inv_seq, Window::symmetric(200));
            const double l_inv = std::abs(1.0 / a - 1.0);
            const double h = std::max(l_inv + 2.0, 1.0 / lambda);
            const double theta = (1.0 + l_inv) / h;
            REQUIRE(theta < 1.0);
            for (Step k = -40; k <= 40; k += 8)
                for (Step n = k; n <= k + 60; n += 6) {
                    const double measured = inf_norm(inv_op.weighted_transition(h, n, k));
                    REQUIRE(measured <= std::pow(theta, double(n - k)) * (1.0 + 1e-12));
                }
        }
    }
    pass(10, "fitted K stays within 1 + fit_margin and the (1+L)/h envelope holds");
}

TEST_CASE("criterion 11: minimality probe covers the spectrum") {
    for (const auto& [fixture, result] : contractions()) {
        INFO(fixture.name);
        const ContractionVerification v =
            verify_contraction(result, fixture.seq, result.sigma, 0.05);
        REQUIRE(v.minimality);

        // direct hull check, block by block
        Eigen::Index offset = 0;
        for (std::size_t i = 0; i < result.blocks.size(); ++i) {
            double h_min = std::numeric_limits<double>::infinity();
            double h_max = -std::numeric_limits<double>::infinity();
            for (const auto& h : result.h) {
                h_min = std::min(h_min, h(offset));
                h_max = std::max(h_max, h(offset));
            }
            REQUIRE(h_min <= result.sigma.intervals[i].lo + 0.05);
            REQUIRE(h_max >= result.sigma.intervals[i].hi - 0.05);
            offset += result.blocks[i].dim;
        }
    }
    pass(11, "achieved H hulls contain the estimated spectrum within tolerance");
}

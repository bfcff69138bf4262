#pragma once

// Report builders and the canonical JSON emitter: sorted keys and fixed
// 17-significant-digit float formatting, so identical runs produce
// byte-identical, diffable files.

#include "dispec/blockdiag.hpp"
#include "dispec/contraction.hpp"
#include "dispec/dichotomy.hpp"
#include "dispec/errors.hpp"
#include "dispec/similarity.hpp"
#include "dispec/spectrum.hpp"
#include "dispec/system.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <string>

namespace dispec {

namespace detail {

inline void canonical_emit(const nlohmann::json& j, std::string& out) {
    switch (j.type()) {
        case nlohmann::json::value_t::object: {
            out += '{';
            // nlohmann objects iterate in sorted key order already
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ',';
                first = false;
                out += nlohmann::json(it.key()).dump();
                out += ':';
                canonical_emit(it.value(), out);
            }
            out += '}';
            break;
        }
        case nlohmann::json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < j.size(); ++i) {
                if (i != 0) out += ',';
                canonical_emit(j[i], out);
            }
            out += ']';
            break;
        }
        case nlohmann::json::value_t::number_float: {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.17g", j.get<double>());
            out += buf;
            break;
        }
        default:
            out += j.dump();
    }
}

}  // namespace detail

/// Canonical text form of a report document.
inline std::string canonical_json(const nlohmann::json& j) {
    std::string out;
    detail::canonical_emit(j, out);
    out += '\n';
    return out;
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << content;
    if (!f) throw IoError("failed writing " + path);
}

// ---------------------------------------------------------------------------
// Report builders
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const SpectrumEstimate& sigma, const std::string& method) {
    nlohmann::json j;
    nlohmann::json intervals = nlohmann::json::array();
    for (const auto& iv : sigma.intervals) intervals.push_back({iv.lo, iv.hi});
    j["intervals"] = std::move(intervals);
    j["ell"] = sigma.ell;
    j["horizon"] = sigma.horizon;
    j["resolution"] = sigma.resolution;
    j["method"] = method;
    return j;
}

inline nlohmann::json to_json(const SimilarityTransform& f) {
    nlohmann::json j;
    const Window w = f.window();
    j["n_lo"] = w.lo;
    nlohmann::json values = nlohmann::json::array();
    for (const auto& m : f.values.values) values.push_back(detail::matrix_to_json(m));
    j["values"] = std::move(values);
    j["f_sup"] = f.f_sup;
    j["finv_sup"] = f.finv_sup;
    if (f.delta_tag) j["delta_tag"] = *f.delta_tag;
    return j;
}

inline nlohmann::json to_json(const ContractionVerification& v) {
    nlohmann::json j;
    j["similarity"] = v.similarity;
    j["h_membership"] = v.h_membership;
    j["residual_bound"] = v.residual_bound;
    j["minimality"] = v.minimality;
    j["max_similarity_residual"] = v.max_similarity_residual;
    j["worst_h_distance"] = v.worst_h_distance;
    j["worst_r_norm"] = v.worst_r_norm;
    j["worst_hull_defect"] = v.worst_hull_defect;
    return j;
}

inline nlohmann::json contraction_report(const ContractionResult& result,
                                         const ContractionVerification& verification) {
    nlohmann::json j;
    j["delta"] = result.delta;
    j["delta_tilde"] = result.delta_tilde;
    j["window"] = {result.window.lo, result.window.hi};
    j["sigma"] = to_json(result.sigma, "scan");

    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& blk : result.blocks) {
        nlohmann::json b;
        b["interval"] = {blk.interval.lo, blk.interval.hi};
        b["dim"] = blk.dim;
        b["mu"] = blk.mu;
        b["beta"] = blk.beta;
        b["m1"] = blk.m1;
        b["m2"] = blk.m2;
        b["c_plus"] = blk.c_plus;
        b["analytic_residual_bound"] = blk.analytic_residual_bound;
        b["r_sup"] = blk.r_sup;
        b["switch_times"] = blk.schedule.switch_times;
        b["switch_times_neg"] = blk.schedule.switch_times_neg;
        blocks.push_back(std::move(b));
    }
    j["blocks"] = std::move(blocks);

    nlohmann::json h = nlohmann::json::array();
    nlohmann::json r_norm = nlohmann::json::array();
    for (std::size_t i = 0; i < result.h.size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < result.h[i].size(); ++k) row.push_back(result.h[i](k));
        h.push_back(std::move(row));
        r_norm.push_back(result.r_norms[i]);
    }
    j["H"] = std::move(h);
    j["R_norm"] = std::move(r_norm);
    j["transform"] = {{"f_sup", result.transform.f_sup},
                      {"finv_sup", result.transform.finv_sup},
                      {"delta_tag", result.transform.delta_tag.value_or(result.delta)}};
    j["verdicts"] = to_json(verification);
    return j;
}

/// Re-derives the contract-report verdicts that are checkable from the stored
/// numbers alone (membership, residual bound, hull minimality) and compares
/// them with the claimed ones. Used by the `verify` command on existing
/// certificate files.
struct CertificateAudit {
    bool h_membership = false;
    bool residual_bound = false;
    bool minimality = false;
    bool verdicts_match = false;

    bool all() const { return h_membership && residual_bound && minimality && verdicts_match; }
};

inline CertificateAudit audit_certificate(const nlohmann::json& cert, double tol) {
    CertificateAudit audit;
    const double delta_tilde = cert.at("delta_tilde").get<double>();

    std::vector<ClosedInterval> intervals;
    for (const auto& iv : cert.at("sigma").at("intervals"))
        intervals.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});

    double worst_h = 0.0;
    std::vector<double> h_min, h_max;
    const auto& h_rows = cert.at("H");
    const std::size_t d = h_rows.empty() ? 0 : h_rows.front().size();
    h_min.assign(d, std::numeric_limits<double>::infinity());
    h_max.assign(d, -std::numeric_limits<double>::infinity());
    for (const auto& row : h_rows) {
        for (std::size_t i = 0; i < d; ++i) {
            const double v = row.at(i).get<double>();
            h_min[i] = std::min(h_min[i], v);
            h_max[i] = std::max(h_max[i], v);
            double best = std::numeric_limits<double>::infinity();
            for (const auto& iv : intervals)
                best = std::min(best, v < iv.lo ? iv.lo - v : (v > iv.hi ? v - iv.hi : 0.0));
            worst_h = std::max(worst_h, best);
        }
    }
    audit.h_membership = worst_h <= tol;

    audit.residual_bound = true;
    for (const auto& r : cert.at("R_norm"))
        audit.residual_bound = audit.residual_bound && r.get<double>() < delta_tilde;

    // hull coverage: per interval there must be diagonal entries whose
    // achieved range covers it
    audit.minimality = true;
    for (const auto& iv : intervals) {
        bool covered = false;
        for (std::size_t i = 0; i < d; ++i) {
            if (h_min[i] <= iv.lo + tol && h_max[i] >= iv.hi - tol) {
                covered = true;
                break;
            }
        }
        audit.minimality = audit.minimality && covered;
    }

    const auto& verdicts = cert.at("verdicts");
    audit.verdicts_match = verdicts.at("h_membership").get<bool>() == audit.h_membership &&
                           verdicts.at("residual_bound").get<bool>() == audit.residual_bound &&
                           verdicts.at("minimality").get<bool>() == audit.minimality;
    return audit;
}

}  // namespace dispec

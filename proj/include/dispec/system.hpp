#pragma once

// Coefficient sequences n -> A(n) over the integers, given by finitely
// describable kinds so sup-norms over any window are computed exactly.

#include "dispec/common.hpp"
#include "dispec/errors.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dispec {

enum class SequenceKind { Constant, Piecewise, Periodic, Table };

inline const char* to_string(SequenceKind k) {
    switch (k) {
        case SequenceKind::Constant: return "constant";
        case SequenceKind::Piecewise: return "piecewise";
        case SequenceKind::Periodic: return "periodic";
        case SequenceKind::Table: return "table";
    }
    return "?";
}

/// Sup-norm data of a coefficient sequence over a window.
struct GrowthBounds {
    double a_sup = 0.0;     // sup ||A(n)||_inf
    double ainv_sup = 0.0;  // sup ||A(n)^-1||_inf
    double l_bound = 0.0;   // sup ||A(n) - I||_inf
    double c_plus = 0.0;    // sup ||C(n)||_inf when the sequence is triangular
    Window window;
};

constexpr double kDefaultSingTol = 1e-12;

/// The coefficient map n -> A(n). Immutable after construction; all
/// operations on it are pure.
class MatrixSequence {
public:
    struct Piece {
        Step from;
        Matrix matrix;
    };

    static MatrixSequence constant(Matrix m, std::string label = {},
                                   double sing_tol = kDefaultSingTol) {
        MatrixSequence seq(SequenceKind::Constant, m.rows(), std::move(label));
        seq.payload_.push_back(std::move(m));
        seq.check_invariants(sing_tol);
        return seq;
    }

    /// base applies below the first threshold; pieces[i] from its `from` on.
    static MatrixSequence piecewise(Matrix base, std::vector<Piece> pieces,
                                    std::string label = {}, double sing_tol = kDefaultSingTol) {
        MatrixSequence seq(SequenceKind::Piecewise, base.rows(), std::move(label));
        seq.payload_.push_back(std::move(base));
        for (auto& p : pieces) {
            if (!seq.thresholds_.empty() && p.from <= seq.thresholds_.back())
                throw ParseError(0, "piecewise thresholds must be strictly increasing");
            seq.thresholds_.push_back(p.from);
            seq.payload_.push_back(std::move(p.matrix));
        }
        seq.check_invariants(sing_tol);
        return seq;
    }

    static MatrixSequence periodic(std::vector<Matrix> matrices, std::string label = {},
                                   double sing_tol = kDefaultSingTol) {
        if (matrices.empty()) throw ParseError(0, "periodic kind needs at least one matrix");
        MatrixSequence seq(SequenceKind::Periodic, matrices.front().rows(), std::move(label));
        seq.payload_ = std::move(matrices);
        seq.check_invariants(sing_tol);
        return seq;
    }

    /// Explicit values on [n_min, n_min + count - 1], extended constantly by
    /// the end matrices outside.
    static MatrixSequence table(Step n_min, std::vector<Matrix> matrices, std::string label = {},
                                double sing_tol = kDefaultSingTol) {
        if (matrices.empty()) throw ParseError(0, "table kind needs at least one matrix");
        MatrixSequence seq(SequenceKind::Table, matrices.front().rows(), std::move(label));
        seq.payload_ = std::move(matrices);
        seq.n_min_ = n_min;
        seq.check_invariants(sing_tol);
        return seq;
    }

    SequenceKind kind() const { return kind_; }
    Eigen::Index dimension() const { return dim_; }
    const std::string& label() const { return label_; }
    Step period() const { return kind_ == SequenceKind::Periodic ? Step(payload_.size()) : 1; }
    const std::vector<Matrix>& payload() const { return payload_; }
    const std::vector<Step>& thresholds() const { return thresholds_; }
    Step table_min() const { return n_min_; }
    Step table_max() const { return n_min_ + Step(payload_.size()) - 1; }

    const Matrix& evaluate(Step n) const {
        switch (kind_) {
            case SequenceKind::Constant:
                return payload_[0];
            case SequenceKind::Piecewise: {
                std::size_t idx = 0;  // base
                for (std::size_t i = 0; i < thresholds_.size(); ++i)
                    if (n >= thresholds_[i]) idx = i + 1;
                return payload_[idx];
            }
            case SequenceKind::Periodic: {
                const Step p = Step(payload_.size());
                Step r = n % p;
                if (r < 0) r += p;
                return payload_[std::size_t(r)];
            }
            case SequenceKind::Table: {
                const Step clamped = std::clamp(n, table_min(), table_max());
                return payload_[std::size_t(clamped - n_min_)];
            }
        }
        return payload_[0];
    }

    /// Sup-norms over the window; throws SingularCoefficient when (P1) fails
    /// numerically at the given threshold.
    GrowthBounds validate(Window window, double sing_tol = kDefaultSingTol) const {
        if (window.empty()) throw WindowMismatch("validate: empty window");
        if (sing_tol <= 0.0) throw Error("InvalidArgument", "sing_tol must be positive");
        GrowthBounds b;
        b.window = window;
        const Matrix id = Matrix::Identity(dim_, dim_);
        for (Step n = window.lo; n <= window.hi; ++n) {
            const Matrix& a = evaluate(n);
            const double rc = rcond(a);
            if (rc < sing_tol) throw SingularCoefficient(n, rc);
            b.a_sup = std::max(b.a_sup, inf_norm(a));
            b.ainv_sup = std::max(b.ainv_sup, inf_norm(a.inverse()));
            b.l_bound = std::max(b.l_bound, inf_norm(a - id));
        }
        b.c_plus = b.a_sup;
        return b;
    }

    /// Pointwise scaling n -> mu * A(n); kind is preserved.
    MatrixSequence scaled(double mu) const {
        if (mu <= 0.0) throw NonpositiveMu(mu);
        MatrixSequence out = *this;
        for (auto& m : out.payload_) m *= mu;
        return out;
    }

private:
    MatrixSequence(SequenceKind kind, Eigen::Index dim, std::string label)
        : kind_(kind), dim_(dim), label_(std::move(label)) {}

    void check_invariants(double sing_tol) const {
        if (dim_ <= 0) throw DimensionMismatch("dimension must be positive");
        for (std::size_t i = 0; i < payload_.size(); ++i) {
            const Matrix& m = payload_[i];
            if (m.rows() != dim_ || m.cols() != dim_)
                throw DimensionMismatch("payload matrix " + std::to_string(i) + " is " +
                                        std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
                                        ", expected " + std::to_string(dim_) + "x" +
                                        std::to_string(dim_));
            const double rc = rcond(m);
            if (rc < sing_tol) throw SingularCoefficient(Step(i), rc);
        }
    }

    SequenceKind kind_;
    Eigen::Index dim_;
    std::string label_;
    std::vector<Matrix> payload_;
    std::vector<Step> thresholds_;  // piecewise only
    Step n_min_ = 0;                // table only
};

// ---------------------------------------------------------------------------
// JSON system files
// ---------------------------------------------------------------------------

namespace detail {

inline Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index dim) {
    if (!j.is_array()) throw DimensionMismatch("matrix must be an array of rows");
    if (Eigen::Index(j.size()) != dim)
        throw DimensionMismatch("matrix has " + std::to_string(j.size()) + " rows, expected " +
                                std::to_string(dim));
    Matrix m(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        const auto& row = j[std::size_t(r)];
        if (!row.is_array() || Eigen::Index(row.size()) != dim)
            throw DimensionMismatch("matrix row " + std::to_string(r) + " has wrong length");
        for (Eigen::Index c = 0; c < dim; ++c) {
            const auto& v = row[std::size_t(c)];
            if (!v.is_number()) throw ParseError(0, "matrix entries must be numbers");
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

/// Parses a UTF-8 JSON system document; lossless for round-trip serialization.
inline MatrixSequence parse_system(const std::string& text, double sing_tol = kDefaultSingTol) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(e.byte, e.what());
    }
    if (!doc.is_object()) throw ParseError(0, "top-level document must be an object");
    if (!doc.contains("dimension") || !doc["dimension"].is_number_integer())
        throw ParseError(0, "missing integer key \"dimension\"");
    if (!doc.contains("kind") || !doc["kind"].is_string())
        throw ParseError(0, "missing string key \"kind\"");

    const auto dim = Eigen::Index(doc["dimension"].get<std::int64_t>());
    if (dim <= 0) throw DimensionMismatch("dimension must be positive");
    const std::string kind = doc["kind"].get<std::string>();
    const std::string label = doc.value("label", std::string{});

    if (kind == "constant") {
        if (!doc.contains("matrix")) throw ParseError(0, "constant kind requires \"matrix\"");
        return MatrixSequence::constant(detail::matrix_from_json(doc["matrix"], dim), label,
                                        sing_tol);
    }
    if (kind == "piecewise") {
        if (!doc.contains("base") || !doc.contains("pieces"))
            throw ParseError(0, "piecewise kind requires \"base\" and \"pieces\"");
        std::vector<MatrixSequence::Piece> pieces;
        for (const auto& pj : doc["pieces"]) {
            if (!pj.contains("from") || !pj["from"].is_number_integer() || !pj.contains("matrix"))
                throw ParseError(0, "each piece requires integer \"from\" and \"matrix\"");
            pieces.push_back({pj["from"].get<Step>(), detail::matrix_from_json(pj["matrix"], dim)});
        }
        return MatrixSequence::piecewise(detail::matrix_from_json(doc["base"], dim),
                                         std::move(pieces), label, sing_tol);
    }
    if (kind == "periodic") {
        if (!doc.contains("matrices")) throw ParseError(0, "periodic kind requires \"matrices\"");
        std::vector<Matrix> ms;
        for (const auto& mj : doc["matrices"]) ms.push_back(detail::matrix_from_json(mj, dim));
        return MatrixSequence::periodic(std::move(ms), label, sing_tol);
    }
    if (kind == "table") {
        if (!doc.contains("n_min") || !doc["n_min"].is_number_integer() ||
            !doc.contains("matrices"))
            throw ParseError(0, "table kind requires \"n_min\" and \"matrices\"");
        std::vector<Matrix> ms;
        for (const auto& mj : doc["matrices"]) ms.push_back(detail::matrix_from_json(mj, dim));
        return MatrixSequence::table(doc["n_min"].get<Step>(), std::move(ms), label, sing_tol);
    }
    throw ParseError(0, "unknown kind \"" + kind + "\"");
}

inline nlohmann::json system_to_json(const MatrixSequence& seq) {
    nlohmann::json doc;
    doc["dimension"] = seq.dimension();
    doc["kind"] = to_string(seq.kind());
    if (!seq.label().empty()) doc["label"] = seq.label();
    switch (seq.kind()) {
        case SequenceKind::Constant:
            doc["matrix"] = detail::matrix_to_json(seq.payload()[0]);
            break;
        case SequenceKind::Piecewise: {
            doc["base"] = detail::matrix_to_json(seq.payload()[0]);
            nlohmann::json pieces = nlohmann::json::array();
            for (std::size_t i = 0; i < seq.thresholds().size(); ++i) {
                nlohmann::json p;
                p["from"] = seq.thresholds()[i];
                p["matrix"] = detail::matrix_to_json(seq.payload()[i + 1]);
                pieces.push_back(std::move(p));
            }
            doc["pieces"] = std::move(pieces);
            break;
        }
        case SequenceKind::Periodic: {
            nlohmann::json ms = nlohmann::json::array();
            for (const auto& m : seq.payload()) ms.push_back(detail::matrix_to_json(m));
            doc["matrices"] = std::move(ms);
            break;
        }
        case SequenceKind::Table: {
            doc["n_min"] = seq.table_min();
            nlohmann::json ms = nlohmann::json::array();
            for (const auto& m : seq.payload()) ms.push_back(detail::matrix_to_json(m));
            doc["matrices"] = std::move(ms);
            break;
        }
    }
    return doc;
}

inline std::string serialize_system(const MatrixSequence& seq) {
    return system_to_json(seq).dump();
}

// ---------------------------------------------------------------------------
// Windowed concrete values (outputs of transforms and block splits)
// ---------------------------------------------------------------------------

/// Concrete matrices on an inclusive window; the non-symbolic counterpart of
/// MatrixSequence produced by conjugations and block extraction.
struct WindowedMatrices {
    Step lo = 0;
    std::vector<Matrix> values;

    Window window() const { return Window{lo, lo + Step(values.size()) - 1}; }

    const Matrix& at(Step n) const {
        if (n < lo || n >= lo + Step(values.size())) throw OutOfWindow(n);
        return values[std::size_t(n - lo)];
    }

    Matrix& at(Step n) {
        if (n < lo || n >= lo + Step(values.size())) throw OutOfWindow(n);
        return values[std::size_t(n - lo)];
    }

    Eigen::Index dimension() const { return values.empty() ? 0 : values.front().rows(); }

    static WindowedMatrices from_sequence(const MatrixSequence& seq, Window w) {
        WindowedMatrices out;
        out.lo = w.lo;
        out.values.reserve(std::size_t(w.span() + 1));
        for (Step n = w.lo; n <= w.hi; ++n) out.values.push_back(seq.evaluate(n));
        return out;
    }
};

}  // namespace dispec

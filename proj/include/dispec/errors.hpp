#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dispec {

/// Base class for all dispec failures; carries a stable machine-readable name
/// used by the CLI diagnostics.
class Error : public std::runtime_error {
public:
    Error(std::string name, const std::string& message)
        : std::runtime_error(message), name_(std::move(name)) {}

    const std::string& name() const { return name_; }

private:
    std::string name_;
};

struct SingularCoefficient : Error {
    explicit SingularCoefficient(std::int64_t n, double rc)
        : Error("SingularCoefficient",
                "coefficient matrix at n=" + std::to_string(n) +
                    " is numerically singular (rcond=" + std::to_string(rc) + ")"),
          n(n) {}
    std::int64_t n;
};

struct ParseError : Error {
    ParseError(std::size_t position, const std::string& reason)
        : Error("ParseError", "parse error at byte " + std::to_string(position) + ": " + reason),
          position(position) {}
    std::size_t position;
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what)
        : Error("DimensionMismatch", what) {}
};

struct OutOfWindow : Error {
    explicit OutOfWindow(std::int64_t n)
        : Error("OutOfWindow", "index n=" + std::to_string(n) + " outside the operator window"),
          n(n) {}
    std::int64_t n;
};

struct NonpositiveLambda : Error {
    explicit NonpositiveLambda(double lambda)
        : Error("NonpositiveLambda", "lambda must be positive, got " + std::to_string(lambda)) {}
};

struct NonpositiveMu : Error {
    explicit NonpositiveMu(double mu)
        : Error("NonpositiveMu", "mu must be positive, got " + std::to_string(mu)) {}
};

struct AmbiguousSplitting : Error {
    AmbiguousSplitting(double lambda, double sigma_log)
        : Error("AmbiguousSplitting",
                "lambda=" + std::to_string(lambda) +
                    " lies inside the numerical spectrum (|log sigma|=" +
                    std::to_string(sigma_log) + " within gap tolerance)"),
          lambda(lambda) {}
    double lambda;
};

struct ZeroCoefficient : Error {
    explicit ZeroCoefficient(std::int64_t n)
        : Error("ZeroCoefficient", "scalar coefficient vanishes at n=" + std::to_string(n)), n(n) {}
    std::int64_t n;
};

struct RangeTooNarrow : Error {
    explicit RangeTooNarrow(double lambda)
        : Error("RangeTooNarrow",
                "spectrum touches the scan range boundary at lambda=" + std::to_string(lambda)) {}
};

struct WindowMismatch : Error {
    explicit WindowMismatch(const std::string& what) : Error("WindowMismatch", what) {}
};

struct SingularTransform : Error {
    explicit SingularTransform(std::int64_t n)
        : Error("SingularTransform", "transform matrix at n=" + std::to_string(n) + " is singular"),
          n(n) {}
    std::int64_t n;
};

struct NotTriangular : Error {
    explicit NotTriangular(const std::string& what) : Error("NotTriangular", what) {}
};

struct GapUnresolvable : Error {
    explicit GapUnresolvable(int index)
        : Error("GapUnresolvable", "spectral gap " + std::to_string(index) +
                                       " cannot be resolved by the dichotomy test"),
          index(index) {}
    int index;
};

struct CouplingResidual : Error {
    CouplingResidual(int index, double value)
        : Error("CouplingResidual", "off-block coupling " + std::to_string(value) +
                                        " exceeds tolerance at block " + std::to_string(index)),
          index(index), value(value) {}
    int index;
    double value;
};

struct InfeasibleMu : Error {
    explicit InfeasibleMu(double mu)
        : Error("InfeasibleMu",
                "a single step ratio exceeds mu=" + std::to_string(mu) + "; enlarge mu") {}
};

struct BoundViolation : Error {
    explicit BoundViolation(const std::string& what) : Error("BoundViolation", what) {}
};

struct BetaUnderflow : Error {
    explicit BetaUnderflow(double bound)
        : Error("BetaUnderflow",
                "admissible beta bound " + std::to_string(bound) + " is below 1e-14") {}
};

struct UnboundedSpectrum : Error {
    UnboundedSpectrum() : Error("UnboundedSpectrum", "spectrum escapes the scan range") {}
};

struct NotFullSpectrum : Error {
    NotFullSpectrum(int ell, int d)
        : Error("NotFullSpectrum", "full spectrum condition fails: ell=" + std::to_string(ell) +
                                       " < d=" + std::to_string(d)) {}
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error("IoError", what) {}
};

}  // namespace dispec

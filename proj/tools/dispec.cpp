// dispec command line front end: loads a system file, dispatches one
// pipeline, writes the JSON report and a plain-text summary.
//
// Exit codes: 0 success, 1 input/configuration error, 2 verification failure.

#include "dispec/dispec.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace {

struct CommonOptions {
    std::string input_path;
    std::string output_path;
    dispec::Step horizon = 1000;
    double lambda_min = 1e-3;
    double lambda_max = 1e3;
    int grid = 64;
    double eps_lambda = 1e-3;
    double delta = 0.1;
    double mu = 0.0;    // 0 = auto
    double beta = 0.0;  // 0 = auto
    double tol = 0.05;
    long seed = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--input", opt.input_path, "system or certificate JSON file")->required();
    cmd->add_option("--horizon", opt.horizon, "half width N of the window [-N, N]");
    cmd->add_option("--lambda-min", opt.lambda_min, "lower end of the lambda scan range");
    cmd->add_option("--lambda-max", opt.lambda_max, "upper end of the lambda scan range");
    cmd->add_option("--grid", opt.grid, "lambda grid points before bisection");
    cmd->add_option("--eps-lambda", opt.eps_lambda, "relative endpoint resolution");
    cmd->add_option("--delta", opt.delta, "target residual bound for contraction");
    cmd->add_option("--mu", opt.mu, "schedule band parameter (0 = auto)");
    cmd->add_option("--beta", opt.beta, "beta transform parameter (0 = auto)");
    cmd->add_option("--tol", opt.tol, "verification tolerance");
    cmd->add_option("--output", opt.output_path, "write the JSON report here");
    cmd->add_option("--seed", opt.seed, "recorded in the report for reproducibility");
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw dispec::IoError("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void emit(const CommonOptions& opt, nlohmann::json report, const std::string& summary) {
    report["seed"] = opt.seed;
    const std::string text = dispec::canonical_json(report);
    if (!opt.output_path.empty()) {
        dispec::write_file(opt.output_path, text);
        std::cout << summary;
    } else {
        std::cerr << summary;
        std::cout << text;
    }
}

std::string describe(const dispec::SpectrumEstimate& sigma) {
    std::ostringstream ss;
    ss << sigma.ell << " interval(s):";
    for (const auto& iv : sigma.intervals) ss << " [" << iv.lo << ", " << iv.hi << "]";
    return ss.str();
}

int run_spectrum(const CommonOptions& opt) {
    const dispec::MatrixSequence seq = dispec::parse_system(read_file(opt.input_path));
    dispec::TransitionOperator op(seq, dispec::Window::symmetric(opt.horizon));
    const dispec::SpectrumEstimate sigma = dispec::spectrum_scan(
        op, opt.lambda_min, opt.lambda_max, opt.grid, opt.eps_lambda, opt.horizon);
    emit(opt, dispec::to_json(sigma, "scan"), "spectrum: " + describe(sigma) + "\n");
    return 0;
}

int run_triangularize(const CommonOptions& opt) {
    const dispec::MatrixSequence seq = dispec::parse_system(read_file(opt.input_path));
    const auto steps = dispec::WindowedMatrices::from_sequence(
        seq, dispec::Window{-opt.horizon, opt.horizon - 1});
    const auto [q, c] = dispec::qr_triangularize(steps);
    const dispec::SpectrumEstimate sigma =
        dispec::spectrum_via_triangular(seq, opt.horizon, opt.horizon / 2);
    nlohmann::json report;
    report["transform"] = dispec::to_json(q);
    report["spectrum"] = dispec::to_json(sigma, "triangular");
    emit(opt, std::move(report),
         "triangularized on [" + std::to_string(-opt.horizon) + ", " +
             std::to_string(opt.horizon) + "]; diagonal spectrum: " + describe(sigma) + "\n");
    return 0;
}

int run_blockdiag(const CommonOptions& opt) {
    const dispec::MatrixSequence seq = dispec::parse_system(read_file(opt.input_path));
    dispec::TransitionOperator op(seq, dispec::Window::symmetric(opt.horizon));
    const dispec::SpectrumEstimate sigma = dispec::spectrum_scan(
        op, opt.lambda_min, opt.lambda_max, opt.grid, opt.eps_lambda, opt.horizon);
    const dispec::BlockDecomposition decomp =
        dispec::block_diagonalize(seq, sigma, opt.horizon);
    nlohmann::json report;
    report["sigma"] = dispec::to_json(sigma, "scan");
    nlohmann::json blocks = nlohmann::json::array();
    for (std::size_t i = 0; i < decomp.blocks.size(); ++i) {
        const dispec::Window w = decomp.blocks[i].window();
        blocks.push_back({{"dim", decomp.blocks[i].dimension()},
                          {"interval", {sigma.intervals[i].lo, sigma.intervals[i].hi}},
                          {"window", {w.lo, w.hi}}});
    }
    report["blocks"] = std::move(blocks);
    report["max_coupling"] = decomp.max_coupling;
    report["similarity_residual"] = decomp.similarity.max_relative_residual;
    report["transform"] = {{"f_sup", decomp.transform.f_sup},
                           {"finv_sup", decomp.transform.finv_sup}};
    std::ostringstream summary;
    summary << "block diagonalization: " << decomp.blocks.size()
            << " block(s), coupling " << decomp.max_coupling << "\n";
    emit(opt, std::move(report), summary.str());
    return decomp.similarity.holds ? 0 : 2;
}

int run_contract(const CommonOptions& opt) {
    const dispec::MatrixSequence seq = dispec::parse_system(read_file(opt.input_path));
    dispec::ContractionOptions copt;
    copt.lambda_lo = opt.lambda_min;
    copt.lambda_hi = opt.lambda_max;
    copt.grid = opt.grid;
    copt.eps_lambda = opt.eps_lambda;
    if (opt.mu > 0.0) copt.mu = opt.mu;
    if (opt.beta > 0.0) copt.beta = opt.beta;
    const dispec::ContractionResult result =
        dispec::contract_system(seq, opt.delta, opt.horizon, copt);
    const dispec::ContractionVerification verification =
        dispec::verify_contraction(result, seq, result.sigma, opt.tol);
    std::ostringstream summary;
    summary << "contraction: delta=" << result.delta << " delta_tilde=" << result.delta_tilde
            << " spectrum " << describe(result.sigma) << "\n"
            << "verdicts: similarity=" << (verification.similarity ? "ok" : "FAIL")
            << " h_membership=" << (verification.h_membership ? "ok" : "FAIL")
            << " residual_bound=" << (verification.residual_bound ? "ok" : "FAIL")
            << " minimality=" << (verification.minimality ? "ok" : "FAIL") << "\n";
    emit(opt, dispec::contraction_report(result, verification), summary.str());
    return verification.all() ? 0 : 2;
}

int run_diagonalize(const CommonOptions& opt) {
    const dispec::MatrixSequence seq = dispec::parse_system(read_file(opt.input_path));
    dispec::TransitionOperator op(seq, dispec::Window::symmetric(opt.horizon));
    const dispec::SpectrumEstimate sigma = dispec::spectrum_scan(
        op, opt.lambda_min, opt.lambda_max, opt.grid, opt.eps_lambda, opt.horizon);
    const dispec::DiagonalizationResult result =
        dispec::diagonalize_full_spectrum(seq, opt.horizon, sigma);
    nlohmann::json report;
    report["sigma"] = dispec::to_json(sigma, "scan");
    report["max_offdiag"] = result.max_offdiag;
    report["transform"] = {{"f_sup", result.transform.f_sup},
                           {"finv_sup", result.transform.finv_sup}};
    nlohmann::json diag = nlohmann::json::array();
    for (const auto& m : result.diagonal.values) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) row.push_back(m(i, i));
        diag.push_back(std::move(row));
    }
    report["diagonal"] = std::move(diag);
    report["window"] = {result.diagonal.lo, result.diagonal.window().hi};
    const bool ok = result.max_offdiag < opt.tol;
    std::ostringstream summary;
    summary << "diagonalization: off-diagonal coupling " << result.max_offdiag
            << (ok ? " (ok)" : " (FAIL)") << "\n";
    emit(opt, std::move(report), summary.str());
    return ok ? 0 : 2;
}

int run_verify(const CommonOptions& opt) {
    nlohmann::json cert;
    try {
        cert = nlohmann::json::parse(read_file(opt.input_path));
    } catch (const nlohmann::json::parse_error& e) {
        throw dispec::ParseError(e.byte, e.what());
    }
    const dispec::CertificateAudit audit = dispec::audit_certificate(cert, opt.tol);
    nlohmann::json report;
    report["h_membership"] = audit.h_membership;
    report["residual_bound"] = audit.residual_bound;
    report["minimality"] = audit.minimality;
    report["verdicts_match"] = audit.verdicts_match;
    std::ostringstream summary;
    summary << "certificate audit: h_membership=" << (audit.h_membership ? "ok" : "FAIL")
            << " residual_bound=" << (audit.residual_bound ? "ok" : "FAIL")
            << " minimality=" << (audit.minimality ? "ok" : "FAIL")
            << " verdicts_match=" << (audit.verdicts_match ? "ok" : "FAIL") << "\n";
    emit(opt, std::move(report), summary.str());
    return audit.all() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dichotomy spectrum and almost reducibility of linear difference systems"};
    app.require_subcommand(1);

    CommonOptions opt;
    int (*runner)(const CommonOptions&) = nullptr;
    for (const auto& [name, fn] : {
             std::pair<const char*, int (*)(const CommonOptions&)>{"spectrum", run_spectrum},
             {"triangularize", run_triangularize},
             {"blockdiag", run_blockdiag},
             {"contract", run_contract},
             {"diagonalize", run_diagonalize},
             {"verify", run_verify},
         }) {
        CLI::App* cmd = app.add_subcommand(name);
        add_common(cmd, opt);
        cmd->callback([&runner, fn = fn]() { runner = fn; });
    }

    CLI11_PARSE(app, argc, argv);
    try {
        return runner(opt);
    } catch (const dispec::Error& e) {
        std::cerr << nlohmann::json{{"error", e.name()}, {"detail", e.what()}}.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json{{"error", "Unexpected"}, {"detail", e.what()}}.dump() << "\n";
        return 1;
    }
}

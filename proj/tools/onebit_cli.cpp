#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "onebit/onebit.hpp"

namespace fs = std::filesystem;
using namespace onebit;

namespace {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kMissingFile = 2,
    kBadConfig = 3,
    kBadDimensions = 4,
    kBadFormat = 5,
};

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<double> sinr_db;
    std::optional<double> inr_db;
    std::optional<long> kmax;
};

ExperimentConfig resolve(const Common& c)
{
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig::desk() : load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.sinr_db) {
        cfg.sinr_db = *c.sinr_db;
        cfg.a1.reset();
    }
    if (c.inr_db) cfg.inr_db = *c.inr_db;
    if (c.kmax) cfg.k_max = *c.kmax;
    cfg.validate();
    return cfg;
}

fs::path out_dir(const Common& c)
{
    fs::path p(c.out);
    fs::create_directories(p);
    return p;
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write: " + p.string());
    os << text;
}

MatrixXd column(const VectorXd& v) { return v; }

void add_common(CLI::App* app, Common& c, bool scenario_flags)
{
    app->add_option("--config", c.config, "flat key=value config file");
    app->add_option("--seed", c.seed, "RNG seed");
    app->add_option("--out", c.out, "output directory");
    if (scenario_flags) {
        app->add_option("--sinr-db", c.sinr_db, "target SINR in dB");
        app->add_option("--inr-db", c.inr_db, "target INR in dB");
    }
}

int cmd_simulate(const Common& c)
{
    const auto cfg = resolve(c);
    const auto d = simulate(cfg);
    const auto dir = out_dir(c);
    write_obm(dir / "echo.obm", column(d.echo));
    write_obm(dir / "rfi.obm", d.rfi);
    write_obm(dir / "noise.obm", d.noise);
    write_obm(dir / "received.obm", d.received());
    write_obm(dir / "y.obm", d.y);
    write_obm(dir / "dictionary.obm", d.dict.atoms);
    std::printf("sinr_db=%.6f inr_db=%.6f a1=%.17g noise_std=%.17g\n", d.sinr_db, d.inr_db, d.a1, d.noise_std);
    return kOk;
}

int cmd_sample(const Common& c, const std::string& input)
{
    const auto cfg = resolve(c);
    const MatrixXd x = read_obm_real(input);
    if (x.cols() < 2) throw DimensionError("sample: need at least 2 columns");
    const auto y = sign_sample(x, ThresholdMatrix(cfg.h, x.rows(), x.cols()));
    write_obm(out_dir(c) / "y.obm", y);
    return kOk;
}

int cmd_di(const Common& c, const std::string& input)
{
    const auto cfg = resolve(c);
    const auto y = read_obm_signed(input);
    const auto s = digital_integration(y, ThresholdMatrix(cfg.h, y.n_fast(), y.m_slow()));
    write_obm(out_dir(c) / "s_di.obm", column(s));
    return kOk;
}

int cmd_rfi_est(const Common& c, const std::string& input)
{
    const auto cfg = resolve(c);
    const auto y = read_obm_signed(input);
    const MatrixXd h = ThresholdMatrix(cfg.h, y.n_fast(), y.m_slow()).dense();
    const auto fi = fast_freq_init(y, h, cfg.fi, cfg.k_max);
    OrderSelection sel;
    if (fi.freqs.empty()) {
        sel.params.lambda = fit_noise_only_lambda(y, h);
        sel.scores.push_back(bic_score(y, h, sel.params, 0));
    } else {
        const Index k_fit = std::min<Index>(cfg.k_max, static_cast<Index>(fi.freqs.size()));
        sel = select_order(y, h, k_fit, fi.freqs, cfg.mm, cfg.lambda_from_fi ? fi.lambda : 1.0 / cfg.h);
    }
    const auto dir = out_dir(c);
    std::string csv = "k_hat,lambda,omegas,bic_totals\n" + std::to_string(sel.k_hat) + ',' +
                      detail::fmt_double(sel.params.lambda) + ',';
    for (std::size_t i = 0; i < sel.params.components.size(); ++i)
        csv += (i ? ";" : "") + detail::fmt_double(sel.params.components[i].omega);
    csv += ',';
    for (std::size_t i = 0; i < sel.scores.size(); ++i)
        csv += (i ? ";" : "") + detail::fmt_double(sel.scores[i].total);
    write_text(dir / "rfi_est.csv", csv + '\n');
    MatrixXd r_hat = MatrixXd::Zero(y.n_fast(), y.m_slow());
    if (sel.k_hat > 0 && sel.params.lambda > 0.0)
        r_hat = sel.params.rfi_matrix(y.n_fast(), y.m_slow()) / sel.params.lambda;
    write_obm(dir / "r_hat.obm", r_hat);
    return kOk;
}

int cmd_recover(const Common& c, const std::string& input, const std::string& rfi, std::optional<double> lambda)
{
    const auto cfg = resolve(c);
    const auto y = read_obm_signed(input);
    const Index n = y.n_fast();
    const Index m = y.m_slow();
    const MatrixXd r_hat = rfi.empty() ? MatrixXd::Zero(n, m) : read_obm_real(rfi);
    if (r_hat.rows() != n || r_hat.cols() != m) throw DimensionError("recover: RFI estimate shape differs from Y");
    if (n != cfg.n_fast) throw DimensionError("recover: Y rows differ from configured N");
    const auto pulse = make_pulse(cfg.fs, cfg.pulse_length, cfg.band_lo, cfg.band_hi);
    const auto dict = build_dictionary(pulse, n);
    const auto er = recover_echo(y, ThresholdMatrix(cfg.h, n, m), r_hat, dict, cfg.er, lambda.value_or(1.0 / cfg.h));
    write_obm(out_dir(c) / "s_hat.obm", column(er.s_hat));
    return kOk;
}

int cmd_pipeline(const Common& c)
{
    const auto cfg = resolve(c);
    const auto res = run_pipeline(cfg);
    const auto dir = out_dir(c);
    write_text(dir / "report.csv", report_csv({res.report}));
    write_text(dir / "timings.csv", timings_csv({res.report}));
    write_obm(dir / "s_hat.obm", column(res.s_hat));
    write_obm(dir / "s_di.obm", column(res.s_di));
    write_obm(dir / "echo.obm", column(res.data.echo));
    std::printf("k_hat=%ld nre_proposed_db=%.3f nre_di_db=%.3f\n", static_cast<long>(res.report.k_hat),
                res.report.nre_proposed_db, res.report.nre_di_db);
    return kOk;
}

int cmd_sweep(const Common& c, const std::string& sinr_list, const std::string& inr_list, unsigned workers)
{
    Common cc = c;
    cc.sinr_db.reset();
    cc.inr_db.reset();
    auto cfg = resolve(cc);
    if (!sinr_list.empty()) cfg.sweep_sinr_db = detail::parse_list("sweep_sinr_db", sinr_list);
    if (!inr_list.empty()) cfg.sweep_inr_db = detail::parse_list("sweep_inr_db", inr_list);
    cfg.validate();
    const auto pts = run_sweep(cfg, workers);
    std::vector<RunReport> reps;
    for (const auto& p : pts) reps.push_back(p.report);
    const auto dir = out_dir(c);
    write_text(dir / "sweep.csv", sweep_csv(pts));
    write_text(dir / "report.csv", report_csv(reps));
    write_text(dir / "timings.csv", timings_csv(reps));
    for (const auto& p : pts)
        std::printf("inr=%g sinr=%g nre_proposed=%.3f nre_di=%.3f k_hat=%ld\n", p.inr_db, p.sinr_db,
                    p.report.nre_proposed_db, p.report.nre_di_db, static_cast<long>(p.report.k_hat));
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"One-bit radar RFI mitigation and echo recovery"};
    app.require_subcommand(1);
    Common common;
    std::string input;
    std::string rfi;
    std::optional<double> lambda;
    std::string sinr_list;
    std::string inr_list;
    unsigned workers = 0;

    auto* sim = app.add_subcommand("simulate", "synthesise echo, RFI, noise and signed data");
    add_common(sim, common, true);
    auto* smp = app.add_subcommand("sample", "one-bit sample a real OBM1 matrix against the threshold ramp");
    add_common(smp, common, false);
    smp->add_option("--input", input, "real OBM1 matrix")->required();
    auto* di = app.add_subcommand("di", "digital integration baseline");
    add_common(di, common, false);
    di->add_option("--input", input, "signed OBM1 matrix")->required();
    auto* est = app.add_subcommand("rfi-est", "frequency init, MM fit and order selection");
    add_common(est, common, false);
    est->add_option("--input", input, "signed OBM1 matrix")->required();
    est->add_option("--kmax", common.kmax, "largest model order tried");
    auto* rec = app.add_subcommand("recover", "sparse echo recovery");
    add_common(rec, common, false);
    rec->add_option("--input", input, "signed OBM1 matrix")->required();
    rec->add_option("--rfi", rfi, "estimated RFI (real OBM1, signal units)");
    rec->add_option("--lambda", lambda, "initial scale 1/sigma");
    auto* pipe = app.add_subcommand("pipeline", "simulate, estimate, recover and report");
    add_common(pipe, common, true);
    pipe->add_option("--kmax", common.kmax, "largest model order tried");
    auto* sw = app.add_subcommand("sweep", "NRE against SINR for both methods");
    add_common(sw, common, false);
    sw->add_option("--kmax", common.kmax, "largest model order tried");
    sw->add_option("--sinr-db", sinr_list, "comma-separated SINR values");
    sw->add_option("--inr-db", inr_list, "comma-separated INR values");
    sw->add_option("--workers", workers, "worker threads (0 = hardware)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(common);
        if (smp->parsed()) return cmd_sample(common, input);
        if (di->parsed()) return cmd_di(common, input);
        if (est->parsed()) return cmd_rfi_est(common, input);
        if (rec->parsed()) return cmd_recover(common, input, rfi, lambda);
        if (pipe->parsed()) return cmd_pipeline(common);
        if (sw->parsed()) return cmd_sweep(common, sinr_list, inr_list, workers);
    } catch (const MissingFile& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kMissingFile;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kBadConfig;
    } catch (const DimensionError& e) {
        std::cerr << "dimension error: " << e.what() << '\n';
        return kBadDimensions;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << '\n';
        return kBadFormat;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kFailure;
}

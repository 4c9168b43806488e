#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "baseline_di.hpp"
#include "bic.hpp"
#include "config.hpp"
#include "echo_recovery.hpp"
#include "freq_init.hpp"
#include "mmrelax.hpp"
#include "obm_io.hpp"
#include "rng.hpp"
#include "signal_model.hpp"

namespace onebit {

/// One synthesised experiment: every matrix that feeds the quantiser.
struct SimulatedData {
    Pulse pulse;
    Dictionary dict;
    VectorXd echo;        ///< s, length N
    MatrixXd rfi;         ///< R, N x M
    MatrixXd noise;       ///< E, N x M
    std::optional<RfiParams> rfi_params; ///< table5 mode only, in signal units
    double a1 = 0.0;
    double noise_std = 0.0;
    double sinr_db = 0.0; ///< realised
    double inr_db = 0.0;  ///< realised
    ThresholdMatrix thresholds{1.0, 1, 2};
    SignedMatrix y;

    MatrixXd received() const { return echo * Eigen::RowVectorXd::Ones(rfi.cols()) + rfi + noise; }
};

namespace detail {

inline double db_ratio_or_inf(double num, double den)
{
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    if (num == 0.0) return -std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(num / den);
}

} // namespace detail

/**
 * Builds echo, interference and noise for a config. Interference and noise
 * both scale linearly with A1 once the phases and the unit noise draw are
 * fixed, so the A1 hitting the requested SINR (at the requested INR) has a
 * closed form; no iterative search is needed.
 */
inline SimulatedData simulate(const ExperimentConfig& cfg)
{
    cfg.validate();
    const Index n = cfg.n_fast;
    const Index m = cfg.m_slow;
    SimulatedData d;
    d.pulse = make_pulse(cfg.fs, cfg.pulse_length, cfg.band_lo, cfg.band_hi);
    d.dict = build_dictionary(d.pulse, n);
    d.echo = synthesize_echo(d.dict, cfg.resolved_targets());
    const double s_norm = std::sqrt(static_cast<double>(m)) * d.echo.norm();
    d.thresholds = ThresholdMatrix(cfg.h, n, m);

    switch (cfg.rfi_mode) {
    case RfiMode::table5: {
        const RfiParams unit = simulate_table5_rfi(1.0, m, n, cfg.seed, cfg.fs);
        const MatrixXd r1 = synthesize_rfi(unit, n, m);
        const MatrixXd e1 = unit_noise(n, m, cfg.seed);
        // Noise std per unit A1 that makes ||R|| / ||E|| hit the INR exactly.
        const double c_e = r1.norm() / (e1.norm() * std::pow(10.0, cfg.inr_db / 20.0));
        if (cfg.a1) {
            d.a1 = *cfg.a1;
        } else {
            const double den = (r1 + c_e * e1).norm();
            d.a1 = s_norm / (den * std::pow(10.0, cfg.sinr_db / 20.0));
        }
        RfiParams p = simulate_table5_rfi(d.a1, m, n, cfg.seed, cfg.fs);
        d.noise_std = d.a1 * c_e;
        p.sigma = d.noise_std;
        d.rfi = synthesize_rfi(p, n, m);
        d.noise = d.noise_std * e1;
        d.rfi_params = std::move(p);
        break;
    }
    case RfiMode::file: {
        const MatrixXd r = read_obm_real(cfg.rfi_file, n, m);
        const double scale = cfg.a1 ? *cfg.a1 : s_norm / (r.norm() * std::pow(10.0, cfg.sinr_db / 20.0));
        d.a1 = scale;
        d.rfi = scale * r;
        d.noise = MatrixXd::Zero(n, m);
        break;
    }
    case RfiMode::none:
        d.rfi = MatrixXd::Zero(n, m);
        d.noise_std = cfg.noise_std;
        d.noise = cfg.noise_std > 0.0 ? MatrixXd(cfg.noise_std * unit_noise(n, m, cfg.seed)) : MatrixXd::Zero(n, m);
        break;
    }
    d.sinr_db = detail::db_ratio_or_inf(s_norm, (d.rfi + d.noise).norm());
    d.inr_db = detail::db_ratio_or_inf(d.rfi.norm(), d.noise.norm());
    d.y = sign_sample(d.received(), d.thresholds);
    return d;
}

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

/// Everything a pipeline run reports. Timings are kept apart from the
/// deterministic fields so that reruns compare byte for byte.
struct RunReport {
    std::uint64_t seed = 0;
    Index n_fast = 0;
    Index m_slow = 0;
    double sinr_target_db = 0.0;
    double inr_target_db = 0.0;
    double sinr_db = 0.0;
    double inr_db = 0.0;
    double a1 = 0.0;
    Index k_hat = 0;
    std::vector<double> omegas;
    double lambda_fi = 0.0;
    double lambda_mm = 0.0;
    double lambda_er = 0.0;
    double nre_proposed_db = 0.0;
    double nre_di_db = 0.0;
    int fi_mm_iterations = 0;
    int fi_admm_iterations = 0;
    int fi_rejected_steps = 0;
    int mm_iterations = 0;
    int mm_inner_iterations = 0;
    int er_mm_iterations = 0;
    int er_admm_iterations = 0;
    int er_rejected_steps = 0;
    std::vector<double> bic_totals;
    std::vector<StageTiming> timings;
};

struct PipelineOutput {
    RunReport report;
    SimulatedData data;
    VectorXd s_di;
    VectorXd s_hat;
    MatrixXd r_hat;
};

inline PipelineOutput run_pipeline(const ExperimentConfig& cfg)
{
    using clock = std::chrono::steady_clock;
    PipelineOutput out;
    RunReport& rep = out.report;
    auto t0 = clock::now();
    auto lap = [&](const char* name) {
        const auto t1 = clock::now();
        rep.timings.push_back({name, std::chrono::duration<double>(t1 - t0).count()});
        t0 = t1;
    };

    out.data = simulate(cfg);
    const SimulatedData& d = out.data;
    const Index n = cfg.n_fast;
    const Index m = cfg.m_slow;
    const MatrixXd h = d.thresholds.dense();
    rep.seed = cfg.seed;
    rep.n_fast = n;
    rep.m_slow = m;
    rep.sinr_target_db = cfg.sinr_db;
    rep.inr_target_db = cfg.inr_db;
    rep.sinr_db = d.sinr_db;
    rep.inr_db = d.inr_db;
    rep.a1 = d.a1;
    lap("simulate");

    out.s_di = digital_integration(d.y, d.thresholds);
    rep.nre_di_db = nre_db(d.echo, out.s_di);
    lap("di");

    const Index k_max = std::min<Index>(cfg.k_max, (cfg.fi.grid_size == 0 ? n : cfg.fi.grid_size) - 1);
    const FiResult fi = fast_freq_init(d.y, h, cfg.fi, k_max);
    rep.lambda_fi = fi.lambda;
    rep.fi_mm_iterations = fi.diagnostics.mm_iterations;
    for (int j : fi.diagnostics.admm_iterations) rep.fi_admm_iterations += j;
    rep.fi_rejected_steps = fi.diagnostics.rejected_steps;
    lap("freq_init");

    OrderSelection sel;
    if (fi.freqs.empty()) {
        sel.params.lambda = fit_noise_only_lambda(d.y, h);
        sel.scores.push_back(bic_score(d.y, h, sel.params, 0));
    } else {
        const double lambda0 = cfg.lambda_from_fi ? fi.lambda : 1.0 / cfg.h;
        const Index k_fit = std::min<Index>(k_max, static_cast<Index>(fi.freqs.size()));
        const MmrelaxResult stages = mmrelax_full(d.y, h, k_fit, fi.freqs, cfg.mm, lambda0);
        for (const auto& st : stages.stages) {
            rep.mm_iterations += st.mm_iterations;
            rep.mm_inner_iterations += st.inner_iterations;
        }
        sel = select_order(d.y, h, stages);
    }
    rep.k_hat = sel.k_hat;
    rep.lambda_mm = sel.params.lambda;
    for (const auto& c : sel.params.components) rep.omegas.push_back(c.omega);
    for (const auto& s : sel.scores) rep.bic_totals.push_back(s.total);
    lap("rfi_estimation");

    if (sel.k_hat > 0 && sel.params.lambda > 0.0)
        out.r_hat = sel.params.rfi_matrix(n, m) / sel.params.lambda;
    else
        out.r_hat = MatrixXd::Zero(n, m);
    const double lambda_init = sel.params.lambda > 0.0 ? sel.params.lambda : 1.0 / cfg.h;
    const ErResult er = recover_echo(d.y, h, out.r_hat, d.dict.atoms, cfg.er, lambda_init);
    out.s_hat = er.s_hat;
    rep.lambda_er = er.lambda;
    rep.er_mm_iterations = er.diagnostics.mm_iterations;
    for (int j : er.diagnostics.admm_iterations) rep.er_admm_iterations += j;
    rep.er_rejected_steps = er.diagnostics.rejected_steps;
    rep.nre_proposed_db = nre_db(d.echo, out.s_hat);
    lap("echo_recovery");
    return out;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline const char* kReportHeader =
    "seed,N,M,rng,sinr_target_db,inr_target_db,sinr_db,inr_db,a1,k_hat,omegas,lambda_fi,lambda_mm,lambda_er,"
    "nre_proposed_db,nre_di_db,fi_mm_iterations,fi_admm_iterations,fi_rejected_steps,mm_iterations,"
    "mm_inner_iterations,er_mm_iterations,er_admm_iterations,er_rejected_steps,bic_totals";

namespace detail {

inline std::string join_doubles(const std::vector<double>& v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + fmt_double(v[i]);
    return s;
}

} // namespace detail

inline std::string report_row(const RunReport& r)
{
    using detail::fmt_double;
    std::ostringstream os;
    os << r.seed << ',' << r.n_fast << ',' << r.m_slow << ',' << Philox4x32::name << ','
       << fmt_double(r.sinr_target_db) << ',' << fmt_double(r.inr_target_db) << ',' << fmt_double(r.sinr_db) << ','
       << fmt_double(r.inr_db) << ',' << fmt_double(r.a1) << ',' << r.k_hat << ',' << detail::join_doubles(r.omegas)
       << ',' << fmt_double(r.lambda_fi) << ',' << fmt_double(r.lambda_mm) << ',' << fmt_double(r.lambda_er) << ','
       << fmt_double(r.nre_proposed_db) << ',' << fmt_double(r.nre_di_db) << ',' << r.fi_mm_iterations << ','
       << r.fi_admm_iterations << ',' << r.fi_rejected_steps << ',' << r.mm_iterations << ','
       << r.mm_inner_iterations << ',' << r.er_mm_iterations << ',' << r.er_admm_iterations << ','
       << r.er_rejected_steps << ',' << detail::join_doubles(r.bic_totals);
    return os.str();
}

inline std::string report_csv(const std::vector<RunReport>& reports)
{
    std::string s = std::string(kReportHeader) + '\n';
    for (const auto& r : reports) s += report_row(r) + '\n';
    return s;
}

inline std::string timings_csv(const std::vector<RunReport>& reports)
{
    std::string s = "run,stage,seconds\n";
    for (std::size_t i = 0; i < reports.size(); ++i)
        for (const auto& t : reports[i].timings)
            s += std::to_string(i) + ',' + t.stage + ',' + detail::fmt_double(t.seconds) + '\n';
    return s;
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

/// Per-point seed: one Philox block keyed by the base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index)
{
    const auto lo = static_cast<std::uint32_t>(base);
    const auto hi = static_cast<std::uint32_t>(base >> 32);
    const auto out = Philox4x32::encrypt({static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                                          0u, 0x5eedu},
                                         {lo, hi});
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

struct SweepPoint {
    double inr_db = 0.0;
    double sinr_db = 0.0;
    RunReport report;
};

/// NRE of both methods over the INR x SINR grid. Each point owns its seed, so
/// the worker count never changes the output.
inline std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, unsigned workers = 0)
{
    std::vector<SweepPoint> out;
    for (double inr : cfg.sweep_inr_db)
        for (double sinr : cfg.sweep_sinr_db) out.push_back({inr, sinr, {}});
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(out.size()));

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(out.size());
    auto work = [&] {
        for (std::size_t i = next++; i < out.size(); i = next++) {
            try {
                ExperimentConfig c = cfg;
                c.inr_db = out[i].inr_db;
                c.sinr_db = out[i].sinr_db;
                c.a1.reset();
                c.seed = derive_seed(cfg.seed, i);
                out[i].report = run_pipeline(c).report;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& pts)
{
    using detail::fmt_double;
    std::string s = "inr_db,sinr_db,nre_proposed_db,nre_di_db,k_hat\n";
    for (const auto& p : pts)
        s += fmt_double(p.inr_db) + ',' + fmt_double(p.sinr_db) + ',' + fmt_double(p.report.nre_proposed_db) + ',' +
             fmt_double(p.report.nre_di_db) + ',' + std::to_string(p.report.k_hat) + '\n';
    return s;
}

} // namespace onebit

// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "onebit/onebit.hpp"

using namespace onebit;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void criterion(int id, const char* name, double limit_s, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < limit_s;
    const bool ok = o.pass && in_time;
    if (!ok) ++g_failures;
    std::printf("[%s] %d %s: %s; %.1f s (limit %.0f s%s)\n", ok ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs,
                limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
}

std::string fmt(const char* f, double a)
{
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

/// Sum of tones with uniform phases per PRI plus Gaussian noise.
struct ToneData {
    RfiParams truth;
    SignedMatrix y;
    MatrixXd h;
};

ToneData tone_data(Index n, Index m, const std::vector<std::pair<double, double>>& amp_freq, double sigma,
                   double h_level, Philox4x32& g)
{
    RfiParams p;
    const auto k = static_cast<Index>(amp_freq.size());
    p.freqs.resize(k);
    p.amps_a.resize(k, m);
    p.amps_b.resize(k, m);
    p.sigma = sigma;
    for (Index i = 0; i < k; ++i) {
        p.freqs[i] = amp_freq[static_cast<std::size_t>(i)].second;
        for (Index j = 0; j < m; ++j) {
            const double phi = 2.0 * pi * g.uniform();
            p.amps_a(i, j) = amp_freq[static_cast<std::size_t>(i)].first * std::cos(phi);
            p.amps_b(i, j) = -amp_freq[static_cast<std::size_t>(i)].first * std::sin(phi);
        }
    }
    MatrixXd x = synthesize_rfi(p, n, m);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) x(i, j) += sigma * g.normal();
    const ThresholdMatrix th(h_level, n, m);
    return {std::move(p), sign_sample(x, th), th.dense()};
}

/// Frequency init followed by the K-stage MM fit, as in the pipeline.
MmrelaxResult estimate(const SignedMatrix& y, const MatrixXd& h, Index k, const MmConfig& mm = {})
{
    const auto fi = fast_freq_init(y, h, FiConfig{}, k);
    std::vector<double> inits = fi.freqs;
    const double fallback[] = {0.9, 1.9};
    for (std::size_t i = inits.size(); i < static_cast<std::size_t>(k); ++i) inits.push_back(fallback[i % 2]);
    return mmrelax_full(y, h, k, inits, mm, fi.lambda > 0.0 ? fi.lambda : 1.0 / h.cwiseAbs().maxCoeff());
}

// ---------------------------------------------------------------------------
// Independent ML oracle: for fixed omega the negative log-likelihood is convex
// in (a, b, lambda); minimise it by damped Newton and scan omega on a grid.
// ---------------------------------------------------------------------------

double nll_at(const MatrixXd& yv, const MatrixXd& h, const VectorXd& c, const VectorXd& s, const VectorXd& a,
              const VectorXd& b, double lam)
{
    double acc = 0.0;
    for (Index j = 0; j < yv.cols(); ++j)
        for (Index i = 0; i < yv.rows(); ++i) acc -= log_Phi(yv(i, j) * (c[i] * a[j] + s[i] * b[j] - lam * h(i, j)));
    return acc;
}

double profile_nll(const MatrixXd& yv, const MatrixXd& h, double w)
{
    const Index n = yv.rows();
    const Index m = yv.cols();
    VectorXd c(n), s(n);
    for (Index i = 0; i < n; ++i) {
        c[i] = std::cos(w * static_cast<double>(i));
        s[i] = std::sin(w * static_cast<double>(i));
    }
    const Index p = 2 * m + 1;
    VectorXd a = VectorXd::Zero(m), b = VectorXd::Zero(m);
    double lam = 1.0 / h.cwiseAbs().maxCoeff();
    double val = nll_at(yv, h, c, s, a, b, lam);
    for (int it = 0; it < 300; ++it) {
        VectorXd grad = VectorXd::Zero(p);
        MatrixXd hess = MatrixXd::Zero(p, p);
        for (Index j = 0; j < m; ++j)
            for (Index i = 0; i < n; ++i) {
                const double y = yv(i, j);
                const double x = y * (c[i] * a[j] + s[i] * b[j] - lam * h(i, j));
                const double d1 = f_prime(x);
                const double d2 = std::max(d1 * (d1 - x), 0.0);
                const double g[3] = {y * c[i], y * s[i], -y * h(i, j)};
                const Index idx[3] = {j, m + j, p - 1};
                for (int u = 0; u < 3; ++u) {
                    grad[idx[u]] += d1 * g[u];
                    for (int v = 0; v < 3; ++v) hess(idx[u], idx[v]) += d2 * g[u] * g[v];
                }
            }
        hess.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().maxCoeff());
        const VectorXd step = hess.ldlt().solve(-grad);
        const double slope = grad.dot(step);
        if (!step.allFinite() || slope > -1e-13 * (1.0 + val)) break;
        double t = 1.0;
        bool moved = false;
        for (int ls = 0; ls < 50; ++ls, t *= 0.5) {
            const VectorXd a2 = a + t * step.head(m);
            const VectorXd b2 = b + t * step.segment(m, m);
            const double l2 = std::max(0.0, lam + t * step[p - 1]);
            const double v2 = nll_at(yv, h, c, s, a2, b2, l2);
            if (v2 <= val + 1e-4 * t * slope) {
                a = a2;
                b = b2;
                lam = l2;
                moved = val - v2 > 1e-13 * val;
                val = v2;
                break;
            }
        }
        if (!moved) break;
    }
    return val;
}

double grid_ml(const SignedMatrix& y, const MatrixXd& h, Index grid)
{
    double best = std::numeric_limits<double>::infinity();
    for (Index q = 1; q < grid; ++q)
        best = std::min(best, profile_nll(y.values(), h, pi * static_cast<double>(q) / static_cast<double>(grid)));
    return best;
}

// ---------------------------------------------------------------------------

Outcome mm_monotonicity()
{
    Philox4x32 g(101, 0);
    int violations = 0;
    int iterations = 0;
    for (int inst = 0; inst < 20; ++inst) {
        const Index k = 1 + static_cast<Index>(g.uniform() < 0.5);
        std::vector<std::pair<double, double>> tones;
        for (Index i = 0; i < k; ++i) tones.push_back({2.0 + 6.0 * g.uniform(), 0.3 + 2.5 * g.uniform()});
        const double h_level = 2.0 + 6.0 * g.uniform();
        const auto d = tone_data(64, 8, tones, 1.0, h_level, g);
        const auto res = estimate(d.y, d.h, k);
        for (const auto& st : res.stages)
            for (std::size_t i = 1; i < st.nll_history.size(); ++i) {
                ++iterations;
                if (st.nll_history[i] > st.nll_history[i - 1] + 1e-12 * std::abs(st.nll_history[i - 1])) ++violations;
            }
    }
    return {violations == 0, std::to_string(violations) + " increases over " + std::to_string(iterations) +
                                 " MM iterations on 20 instances"};
}

Outcome ml_oracle()
{
    const Index n = 64, m = 4;
    int within = 0;
    double worst = 0.0;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Philox4x32 g(seed, 202);
        const double w = 0.5 + 2.1 * g.uniform();
        RfiParams p;
        p.freqs = VectorXd::Constant(1, w);
        p.amps_a.resize(1, m);
        p.amps_b.resize(1, m);
        for (Index j = 0; j < m; ++j) {
            const double phi = 2.0 * pi * g.uniform();
            p.amps_a(0, j) = std::cos(phi);
            p.amps_b(0, j) = -std::sin(phi);
        }
        const MatrixXd r = synthesize_rfi(p, n, m);
        MatrixXd e(n, m);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < m; ++j) e(i, j) = g.normal();
        e *= r.norm() / (10.0 * e.norm()); // INR 20 dB
        const ThresholdMatrix th(1.0, n, m);
        const SignedMatrix y = sign_sample(r + e, th);
        const MatrixXd h = th.dense();

        const double mm = estimate(y, h, 1).stages[0].nll();
        const double ml = grid_ml(y, h, 4096);
        const double rel = std::abs(mm - ml) / std::abs(ml);
        worst = std::max(worst, rel);
        if (rel <= 1e-3) ++within;
        per_seed += (seed > 1 ? " " : "") + fmt("%.3g", mm) + "/" + fmt("%.3g", ml);
    }
    return {within == 10, std::to_string(within) + "/10 seeds within 1e-3, worst relative gap " + fmt("%.3g", worst) +
                              " (MM/grid-ML nll: " + per_seed + ")"};
}

Outcome frequency_accuracy()
{
    int hits = 0;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Philox4x32 g(seed, 303);
        const double w = 0.4 + 2.3 * g.uniform();
        const auto d = tone_data(256, 8, {{10.0, w}}, 1.0, 10.0, g);
        const double err = std::abs(estimate(d.y, d.h, 1).stages[0].params.components[0].omega - w);
        worst = std::max(worst, err);
        if (err < 1e-3) ++hits;
    }
    return {hits >= 9, std::to_string(hits) + "/10 seeds with error < 1e-3 rad (worst " + fmt("%.3g", worst) + ")"};
}

Index select_k(const SignedMatrix& y, const MatrixXd& h, Index k_max)
{
    const auto fi = fast_freq_init(y, h, FiConfig{}, k_max);
    if (fi.freqs.empty()) return 0;
    const auto k = std::min<Index>(k_max, static_cast<Index>(fi.freqs.size()));
    return select_order(y, h, k, fi.freqs, MmConfig{}, fi.lambda).k_hat;
}

Outcome order_selection()
{
    int five = 0;
    int zero = 0;
    std::string ks0, ks5;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        ExperimentConfig cfg = ExperimentConfig::desk();
        cfg.m_slow = 64;
        cfg.inr_db = 10.0;
        cfg.seed = seed;
        const auto d = simulate(cfg);
        const MatrixXd h = d.thresholds.dense();
        const Index k5 = select_k(d.y, h, cfg.k_max);
        if (k5 == 5) ++five;
        // Same noise level, no interference and no echo.
        const SignedMatrix y0 = sign_sample(d.noise, d.thresholds);
        const Index k0 = select_k(y0, h, cfg.k_max);
        if (k0 == 0) ++zero;
        ks5 += std::to_string(k5);
        ks0 += std::to_string(k0);
    }
    return {five >= 8 && zero >= 8, "5-tone K_hat=5 on " + std::to_string(five) + "/10 (" + ks5 +
                                        "), pure noise K_hat=0 on " + std::to_string(zero) + "/10 (" + ks0 + ")"};
}

Outcome sweep()
{
    const auto cfg = load_config(std::string(ONEBIT_SOURCE_DIR) + "/configs/desk.cfg");
    const auto pts = run_sweep(cfg);
    bool better = true;
    bool gap = true;
    std::string table;
    for (const auto& p : pts) {
        const double prop = p.report.nre_proposed_db;
        const double di = p.report.nre_di_db;
        if (!(prop < di)) better = false;
        if (p.sinr_db == -35.0 && !(di - prop >= 3.0)) gap = false;
        table += " [" + fmt("%g", p.inr_db) + "," + fmt("%g", p.sinr_db) + "] " + fmt("%.2f", prop) + "/" +
                 fmt("%.2f", di);
    }
    return {better && gap, std::string(better ? "proposed below DI everywhere" : "proposed not below DI everywhere") +
                               (gap ? ", gap >= 3 dB at -35 dB" : ", gap < 3 dB at -35 dB") +
                               "; NRE proposed/DI dB per [INR,SINR]:" + table};
}

Outcome di_bound()
{
    ExperimentConfig cfg = ExperimentConfig::desk();
    cfg.rfi_mode = RfiMode::none;
    cfg.noise_std = 0.0;
    const auto d = simulate(cfg);
    const double h = d.thresholds.h();
    if (d.echo.cwiseAbs().maxCoeff() > h) return {false, "echo exceeds h"};
    const VectorXd s_di = digital_integration(d.y, d.thresholds);
    const double err = (s_di - d.echo).cwiseAbs().maxCoeff();
    const double dh = d.thresholds.step();
    return {err <= dh, "max error " + fmt("%.6g", err) + " vs step " + fmt("%.6g", dh)};
}

Outcome fim_limits()
{
    RfiParams p;
    p.freqs = VectorXd::Constant(1, 0.7);
    p.amps_a = MatrixXd::Zero(1, 1);
    p.amps_b = MatrixXd::Ones(1, 1);
    p.sigma = 1.0;
    const auto table = fim_limit_check(p, VectorXd::Constant(1, -1.0), {512, 2048, 8192});
    auto err = [&](const std::string& e, Index n) {
        for (const auto& row : table)
            if (row.entry == e && row.n_fast == n) return row.rel_error;
        throw std::runtime_error("missing entry " + e);
    };
    bool ok = true;
    std::string detail;
    for (const char* e : {"omega_omega[0]", "A_A[0,0]", "phi_phi[0,0]", "sigma_sigma"}) {
        const double e1 = err(e, 512), e2 = err(e, 2048), e3 = err(e, 8192);
        const bool this_ok = e3 <= 0.01 && e2 < e1 && e3 < e2;
        ok = ok && this_ok;
        detail += std::string(detail.empty() ? "" : ", ") + e + " " + fmt("%.2e", e1) + ">" + fmt("%.2e", e2) + ">" +
                  fmt("%.2e", e3) + (this_ok ? "" : " (!)");
    }
    return {ok, detail};
}

Outcome admm_contracts()
{
    Philox4x32 g(808, 0);
    int fi_bad = 0, er_bad = 0, fi_mono = 0, er_mono = 0, fi_steps = 0, er_steps = 0;
    const auto pulse = make_pulse(8e9, 21, 300e6, 1100e6);
    const auto dict = build_dictionary(pulse, 64);
    for (int inst = 0; inst < 20; ++inst) {
        std::vector<std::pair<double, double>> tones;
        const int k = 1 + static_cast<int>(3.0 * g.uniform());
        for (int i = 0; i < k; ++i) tones.push_back({1.0 + 5.0 * g.uniform(), 0.3 + 2.5 * g.uniform()});
        const auto d = tone_data(64, 8, tones, 1.0, 2.0 + 4.0 * g.uniform(), g);
        const auto fi = fast_freq_init(d.y, d.h, FiConfig{}, 3);
        const auto& fd = fi.diagnostics;
        for (std::size_t i = 0; i < fd.final_residuals.size(); ++i) {
            ++fi_steps;
            if (!fd.final_residuals[i].converged && !fd.admm_cap_hit[i]) ++fi_bad;
        }
        for (std::size_t i = 1; i < fd.objective_history.size(); ++i)
            if (fd.objective_history[i] > fd.objective_history[i - 1] + 1e-10 * std::abs(fd.objective_history[i - 1]))
                ++fi_mono;

        std::vector<Target> targets;
        const int nt = 1 + static_cast<int>(3.0 * g.uniform());
        for (int i = 0; i < nt; ++i)
            targets.push_back({static_cast<Index>(8 + 48 * g.uniform()), (g.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + g.uniform())});
        const VectorXd s = synthesize_echo(dict, targets);
        MatrixXd x = s * Eigen::RowVectorXd::Ones(8);
        for (Index i = 0; i < 64; ++i)
            for (Index j = 0; j < 8; ++j) x(i, j) += 0.3 * g.normal();
        const ThresholdMatrix th(1.0 + g.uniform(), 64, 8);
        const auto er = recover_echo(sign_sample(x, th), th, MatrixXd::Zero(64, 8), dict, ErConfig{}, 1.0 / th.h());
        const auto& ed = er.diagnostics;
        for (std::size_t i = 0; i < ed.final_residuals.size(); ++i) {
            ++er_steps;
            const bool consensus = ed.consensus_gap[i] <= ed.final_residuals[i].eps_pri;
            if (!(ed.final_residuals[i].converged && consensus) && !ed.admm_cap_hit[i]) ++er_bad;
        }
        for (std::size_t i = 1; i < ed.objective_history.size(); ++i)
            if (ed.objective_history[i] > ed.objective_history[i - 1] + 1e-10 * std::abs(ed.objective_history[i - 1]))
                ++er_mono;
    }
    const bool ok = fi_bad == 0 && er_bad == 0 && fi_mono == 0 && er_mono == 0;
    return {ok, "freq-init: " + std::to_string(fi_bad) + " bad exits of " + std::to_string(fi_steps) + ", " +
                    std::to_string(fi_mono) + " objective increases; echo recovery: " + std::to_string(er_bad) +
                    " bad exits of " + std::to_string(er_steps) + ", " + std::to_string(er_mono) + " objective increases"};
}

Outcome determinism()
{
    const auto cfg = load_config(std::string(ONEBIT_SOURCE_DIR) + "/configs/desk.cfg");
    const auto a = run_pipeline(cfg);
    const auto b = run_pipeline(cfg);
    const bool same = report_csv({a.report}) == report_csv({b.report}) && a.s_hat == b.s_hat;
    return {same, same ? "reports and recovered echoes identical" : "reports differ"};
}

} // namespace

int main()
{
    criterion(1, "MM monotonicity", 30.0, mm_monotonicity);
    criterion(2, "ML oracle equivalence", 300.0, ml_oracle);
    criterion(3, "frequency accuracy", 60.0, frequency_accuracy);
    criterion(4, "order selection", 600.0, order_selection);
    criterion(5, "end-to-end sweep vs DI", 1200.0, sweep);
    criterion(6, "DI quantisation bound", 1.0, di_bound);
    criterion(7, "Fisher information limits", 10.0, fim_limits);
    criterion(8, "ADMM contracts", 120.0, admm_contracts);
    criterion(9, "determinism", 60.0, determinism);
    std::printf("%d of 9 criteria failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}

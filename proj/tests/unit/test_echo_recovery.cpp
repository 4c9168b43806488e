#include <catch_amalgamated.hpp>

#include <cmath>

#include "onebit/baseline_di.hpp"
#include "onebit/echo_recovery.hpp"
#include "onebit/rng.hpp"

using namespace onebit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MatrixXd gaussian(Index n, Index m, Philox4x32& g, double scale = 1.0)
{
    MatrixXd v(n, m);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) v(i, j) = scale * g.normal();
    return v;
}

Dictionary dictionary(Index n)
{
    return build_dictionary(make_pulse(8e9, 21, 300e6, 1100e6), n);
}

struct Case {
    Dictionary dict;
    VectorXd s;
    SignedMatrix y;
    MatrixXd h;
};

Case make_case(Index n, Index m, const std::vector<Target>& targets, double sigma, double h_level, std::uint64_t seed)
{
    Dictionary dict = dictionary(n);
    VectorXd s = synthesize_echo(dict, targets);
    Philox4x32 g(seed, 0);
    MatrixXd x = s * Eigen::RowVectorXd::Ones(m);
    if (sigma > 0.0) x += gaussian(n, m, g, sigma);
    ThresholdMatrix th(h_level, n, m);
    SignedMatrix y = sign_sample(x, th);
    return {std::move(dict), std::move(s), std::move(y), th.dense()};
}

/// The echo-recovery loop written with the exported single-step updates and a
/// direct Cholesky solve for B.
struct NaiveEr {
    VectorXd gamma;
    double lambda;
    std::vector<double> objective;
};

NaiveEr naive_er(const SignedMatrix& y, const MatrixXd& h, const MatrixXd& r_hat, const MatrixXd& d, const ErConfig& cfg,
                 double lambda_init)
{
    const Index n = y.n_fast();
    const Index m = y.m_slow();
    const MatrixXd u = h - r_hat;
    VectorXd gamma = VectorXd::Zero(n);
    double lambda = lambda_init;
    MatrixXd b = MatrixXd::Zero(n, m);
    MatrixXd ups = MatrixXd::Zero(n, m);
    NaiveEr out{gamma, lambda, {er_objective(y, u, d, gamma, lambda, cfg.zeta2)}};
    for (int it = 0; it < cfg.mm_cap; ++it) {
        const MatrixXd dg = (d * gamma) * Eigen::RowVectorXd::Ones(m);
        const MatrixXd z = majorizer_aux(y, u, dg, lambda);
        auto sur = [&](const VectorXd& g, double lam) {
            return cfg.zeta2 * m * g.lpNorm<1>() + 0.5 * ((d * g) * Eigen::RowVectorXd::Ones(m) - lam * u - z).squaredNorm();
        };
        double rho = cfg.rho0;
        VectorXd g_new = gamma;
        double lam_new = lambda;
        for (int j = 0; j < cfg.admm_cap; ++j) {
            g_new = update_gamma(b, ups, rho, cfg.zeta2, m);
            const double lam_prev = lam_new;
            lam_new = update_lambda_er(u, d * b, z);
            const MatrixXd b_next = update_B_er(d, u, z, ups, g_new, lam_new, rho);
            const MatrixXd gap = g_new * Eigen::RowVectorXd::Ones(m) - b_next;
            ups += rho * gap;
            const auto res = admm_residuals(gap.norm(), rho * (b_next - b).norm(), lam_prev, lam_new,
                                            std::sqrt(static_cast<double>(n * m)), std::sqrt(static_cast<double>(m)) * g_new.norm(),
                                            b_next.norm(), ups.norm(), rho, cfg.tol);
            b = b_next;
            if (res.converged) break;
            rho = res.rho_next;
        }
        if (sur(g_new, lam_new) > sur(gamma, lambda)) break;
        gamma = g_new;
        lambda = lam_new;
        const double obj = er_objective(y, u, d, gamma, lambda, cfg.zeta2);
        const bool done = std::abs(out.objective.back() - obj) <= cfg.mm_tol * std::abs(out.objective.back());
        out.objective.push_back(obj);
        if (done) break;
    }
    out.gamma = gamma;
    out.lambda = lambda;
    return out;
}

} // namespace

TEST_CASE("soft threshold")
{
    CHECK(soft_threshold(0.5, 1.0) == 0.0);
    CHECK(soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(soft_threshold(3.0, 1.0) == 2.0);
    CHECK(soft_threshold(0.7, 0.7) == 0.0);
    CHECK_THAT(soft_threshold(0.7 + 1e-9, 0.7), WithinAbs(1e-9, 1e-15));
    CHECK(soft_threshold(-0.7, 0.7) == 0.0);
    CHECK_THROWS(soft_threshold(1.0, -0.1));
}

TEST_CASE("update_gamma")
{
    const MatrixXd zero = MatrixXd::Zero(4, 3);
    CHECK(update_gamma(zero, zero, 1.0, 0.04, 3).isZero(0.0));

    Philox4x32 g(1, 0);
    const MatrixXd b = gaussian(4, 3, g), u = gaussian(4, 3, g);
    const VectorXd avg = (b - u / 2.0).rowwise().mean();
    CHECK((update_gamma(b, u, 2.0, 0.0, 3) - avg).norm() < 1e-15);

    const double zeta = 0.04, rho = 2.0;
    MatrixXd b1 = MatrixXd::Zero(4, 3);
    b1.row(2).setConstant(3.0 * zeta / rho);
    const VectorXd out = update_gamma(b1, zero, rho, zeta, 3);
    CHECK_THAT(out[2], WithinAbs(2.0 * zeta / rho, 1e-15));
    CHECK(out[0] == 0.0);
    CHECK_THROWS(update_gamma(b, u, 0.0, zeta, 3));
}

TEST_CASE("update_lambda_er closed cases")
{
    Philox4x32 g(2, 0);
    const MatrixXd u = gaussian(5, 3, g), z = gaussian(5, 3, g);
    CHECK(update_lambda_er(u, z, z) == 0.0);
    CHECK_THAT(update_lambda_er(u, z + u, z), WithinAbs(1.0, 1e-14));
    CHECK(update_lambda_er(u, z - u, z) == 0.0);
    CHECK_THROWS(update_lambda_er(MatrixXd::Zero(5, 3), z, z));
}

TEST_CASE("update_B_er limits and optimality")
{
    Philox4x32 g(3, 0);
    const Index n = 32, m = 4;
    const MatrixXd d = dictionary(n).atoms;
    const MatrixXd u = gaussian(n, m, g), z = gaussian(n, m, g), ups = gaussian(n, m, g);
    const VectorXd gamma = gaussian(n, 1, g);
    const double lam = 0.6;

    const MatrixXd far = update_B_er(d, u, z, ups, gamma, lam, 1e8);
    for (Index j = 0; j < m; ++j) CHECK((far.col(j) - gamma).cwiseAbs().maxCoeff() < 1e-6);

    for (double rho : {0.05, 1.0, 20.0}) {
        const MatrixXd b = update_B_er(d, u, z, ups, gamma, lam, rho);
        const MatrixXd grad = d.transpose() * (d * b - lam * u - z) - ups + rho * (b.colwise() - gamma);
        CHECK(grad.norm() < 1e-8 * (1.0 + (d.transpose() * z).norm()));
    }

    const MatrixXd eye = MatrixXd::Identity(n, n);
    const MatrixXd b0 = update_B_er(eye, u, z, MatrixXd::Zero(n, m), gamma, lam, 1e-10);
    CHECK((b0 - (lam * u + z)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("echo recovery matches the step-by-step loop")
{
    const auto c = make_case(48, 8, {{14, 1.0}, {30, -0.6}}, 0.3, 1.0, 4);
    const MatrixXd r_hat = MatrixXd::Zero(48, 8);
    const ErConfig cfg;
    const auto fast = recover_echo(c.y, c.h, r_hat, c.dict.atoms, cfg, 2.0);
    const auto slow = naive_er(c.y, c.h, r_hat, c.dict.atoms, cfg, 2.0);
    CHECK((fast.gamma_tilde - slow.gamma).norm() <= 1e-7 * (1.0 + slow.gamma.norm()));
    CHECK_THAT(fast.lambda, WithinRel(slow.lambda, 1e-7));
    REQUIRE(fast.diagnostics.objective_history.size() == slow.objective.size());
    for (std::size_t i = 0; i < slow.objective.size(); ++i)
        CHECK_THAT(fast.diagnostics.objective_history[i], WithinRel(slow.objective[i], 1e-9));
}

TEST_CASE("echo recovery objective and consensus contracts")
{
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto c = make_case(64, 10, {{20, 1.0}, {41, 0.7}}, 0.5, 1.5, seed);
        const auto r = recover_echo(c.y, c.h, MatrixXd::Zero(64, 10), c.dict.atoms, ErConfig{}, 1.0);
        const auto& d = r.diagnostics;
        for (std::size_t i = 1; i < d.objective_history.size(); ++i)
            CHECK(d.objective_history[i] <= d.objective_history[i - 1] * (1.0 + 1e-10));
        REQUIRE(d.consensus_gap.size() == d.final_residuals.size());
        for (std::size_t i = 0; i < d.consensus_gap.size(); ++i)
            CHECK((d.admm_cap_hit[i] || d.consensus_gap[i] <= d.final_residuals[i].eps_pri));
        CHECK_FALSE(d.low_information);
    }
}

TEST_CASE("sparsity does not grow with zeta2")
{
    const auto c = make_case(64, 10, {{18, 1.0}, {40, -0.8}}, 0.4, 1.5, 9);
    Index prev = 64;
    for (double zeta : {0.01, 0.02, 0.04, 0.08, 0.16, 0.32}) {
        ErConfig cfg;
        cfg.zeta2 = zeta;
        const auto r = recover_echo(c.y, c.h, MatrixXd::Zero(64, 10), c.dict.atoms, cfg, 1.0);
        const Index nnz = (r.gamma_tilde.array() != 0.0).count();
        CHECK(nnz <= prev);
        prev = nnz;
    }
}

TEST_CASE("noise-free single target is recovered")
{
    const Index n = 128, m = 32;
    const Index pos = 57;
    const auto c = make_case(n, m, {{pos, 1.0}}, 0.0, 1.0, 1);
    const double hmax = c.s.cwiseAbs().maxCoeff();
    const auto th = ThresholdMatrix(1.1 * hmax, n, m);
    const SignedMatrix y = sign_sample(c.s * Eigen::RowVectorXd::Ones(m), th);
    const auto r = recover_echo(y, th, MatrixXd::Zero(n, m), c.dict, ErConfig{}, 1.0);
    Index peak = 0;
    r.gamma_tilde.cwiseAbs().maxCoeff(&peak);
    CHECK(std::abs(peak - pos) <= 1);
    CHECK(nre_db(c.s, r.s_hat) < -15.0);
}

TEST_CASE("sign symmetry of the data flips the echo")
{
    const auto c = make_case(64, 10, {{25, 1.0}}, 0.3, 1.2, 3);
    const auto a = recover_echo(c.y, c.h, MatrixXd::Zero(64, 10), c.dict.atoms, ErConfig{}, 1.0);
    // Levels are symmetric, so negating Y and reversing the level order maps -x onto the same problem.
    const SignedMatrix y_neg(-c.y.values().rowwise().reverse().eval());
    const auto b = recover_echo(y_neg, c.h, MatrixXd::Zero(64, 10), c.dict.atoms, ErConfig{}, 1.0);
    CHECK((a.s_hat + b.s_hat).norm() < 1e-6 * a.s_hat.norm());
}

TEST_CASE("all-positive data is flagged as low information")
{
    const Index n = 32, m = 6;
    const SignedMatrix y(MatrixXd::Ones(n, m));
    const ThresholdMatrix th(1.0, n, m);
    const auto r = recover_echo(y, th, MatrixXd::Zero(n, m), dictionary(n), ErConfig{}, 1.0);
    CHECK(r.diagnostics.low_information);
    CHECK(r.gamma_tilde.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("echo recovery argument checks")
{
    const auto c = make_case(32, 4, {{10, 1.0}}, 0.2, 1.0, 2);
    CHECK_THROWS_AS(recover_echo(c.y, c.h, MatrixXd::Zero(31, 4), c.dict.atoms, ErConfig{}, 1.0), DimensionError);
    CHECK_THROWS(recover_echo(c.y, c.h, MatrixXd::Zero(32, 4), c.dict.atoms, ErConfig{}, -1.0));
    CHECK_THROWS(recover_echo(c.y, c.h, c.h, c.dict.atoms, ErConfig{}, 1.0));
    ErConfig bad;
    bad.zeta2 = -1.0;
    CHECK_THROWS(recover_echo(c.y, c.h, MatrixXd::Zero(32, 4), c.dict.atoms, bad, 1.0));
}

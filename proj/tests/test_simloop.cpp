#include <random>

#include <gtest/gtest.h>

#include <freepc/config.hpp>
#include <freepc/simloop.hpp>

#include "support.hpp"

using namespace freepc;

namespace {

config::RunConfig case_config() { return config::load(FREEPC_CONFIG_DIR "/case_study.json"); }

simloop::MonteCarloConfig quick_mc(std::size_t sim_length) {
    auto c       = case_config();
    c.sim_length = sim_length;
    return config::monte_carlo(c);
}

simloop::RhcConfig exact_freepc(const simloop::LoopSettings& loop) {
    const auto w   = fixtures::case_study_frequencies();
    const auto G   = fixtures::case_study_plant();
    ComplexVector frf(static_cast<Eigen::Index>(w.size()));
    for (std::size_t m = 0; m < w.size(); ++m) frf(static_cast<Eigen::Index>(m)) = lti::freq_response(G, w[m])(0, 0);
    const auto eqs = freqdomain::freq_data_equations(freqdomain::frf_to_freq_data(w, frf), loop.ocp.T + loop.ocp.T_bar);
    return {eqs, loop};
}

}  // namespace

TEST(Config, CaseStudyFileLoads) {
    const auto c = case_config();
    EXPECT_EQ(c.ocp.T, 10u);
    EXPECT_EQ(c.ocp.T_bar, 6u);
    EXPECT_EQ(c.bins.size(), 16u);
    EXPECT_DOUBLE_EQ(c.ocp.lambda_sigma, 1e5);
    EXPECT_EQ(c.mc_runs, 100u);
}

TEST(Config, UnknownKeysAreRejected) {
    auto j = config::Json::parse(R"({
        "plant": {"num": [1], "den": [1, -0.5]},
        "controller": {"num": [0], "den": [1]},
        "excitation": {"bins": [1, 2], "period_length": 8, "periods": 2},
        "ocp": {"T": 2, "T_bar": 1, "lamda_g": 1}
    })");
    EXPECT_THROW(config::from_json(j), InvalidInput);
    j["ocp"].erase("lamda_g");
    EXPECT_NO_THROW(config::from_json(j));
    j["extra"] = 1;
    EXPECT_THROW(config::from_json(j), InvalidInput);
}

TEST(Config, InvariantsCheckedOnLoad) {
    auto j = config::Json::parse(R"({
        "plant": {"num": [1], "den": [1, -0.5]},
        "controller": {"num": [0], "den": [1]},
        "excitation": {"bins": [1, 5], "period_length": 8, "periods": 2},
        "ocp": {"T": 2, "T_bar": 1}
    })");
    EXPECT_THROW(config::from_json(j), InvalidInput);  // bin 5 is above Nyquist for 8 samples
    j["excitation"]["bins"]   = {1, 2};
    j["ocp"]["u_box"]         = {{1.0, -1.0}};
    EXPECT_THROW(config::from_json(j), InvalidInput);
}

TEST(Loop, PureDelayAtRestCostsNothing) {
    const auto     delay = lti::tf_to_ss({{1.0}, {1.0, 0.0}});
    simloop::LoopSettings s;
    s.ocp.T      = 3;
    s.ocp.T_bar  = 2;
    s.sim_length = 10;
    s.warmup     = TimeSeries::scalar(std::vector<double>(2, 0.0));
    const auto mpc = simloop::run_mpc_benchmark(delay, s);
    EXPECT_LT(mpc.cost_J, 1e-12);

    s.ocp.nominal = true;
    std::mt19937_64 rng(4);
    const auto      w = fixtures::random_frequencies(rng, 6);
    ComplexVector frf(6);
    for (Eigen::Index m = 0; m < 6; ++m) frf(m) = std::polar(1.0, -w[static_cast<std::size_t>(m)]);
    const auto eqs = freqdomain::freq_data_equations(freqdomain::frf_to_freq_data(w, frf), 5);
    EXPECT_LT(simloop::run_rhc(delay, {eqs, s}).cost_J, 1e-12);
}

TEST(Loop, WarmupShorterThanPastWindowIsRejected) {
    auto s   = config::loop(case_config());
    s.warmup = TimeSeries::scalar(std::vector<double>(3, 0.0));
    EXPECT_THROW(simloop::run_mpc_benchmark(fixtures::case_study_plant(), s), InvalidInput);
}

TEST(Loop, RecordedWindowsFollowTheHistory) {
    auto s           = config::loop(case_config());
    s.sim_length     = 12;
    s.record_windows = true;
    const auto r     = simloop::run_rhc(fixtures::case_study_plant(), exact_freepc(s));
    ASSERT_EQ(r.u_windows.size(), 12u);
    // Applied inputs, warmup first.
    std::vector<double> applied(s.warmup.samples().data(), s.warmup.samples().data() + s.warmup.length());
    for (std::size_t k = 0; k < 12; ++k) applied.push_back(r.u(k, 0));
    for (std::size_t k = 0; k < 12; ++k) {
        for (std::size_t i = 0; i < 6; ++i) {
            EXPECT_EQ(r.u_windows[k](static_cast<Eigen::Index>(i)), applied[k + i]);
        }
        if (k >= 6) {
            for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(r.y_windows[k](static_cast<Eigen::Index>(i)), r.y(k - 6 + i, 0));
        }
    }
}

TEST(Loop, CostIsTheStageSumOverMeasuredSignals) {
    auto s       = config::loop(case_config());
    s.sim_length = 15;
    s.noise_std  = 0.01;
    const auto r = simloop::run_rhc(fixtures::case_study_plant(), exact_freepc(s));
    double     J = 0.0;
    for (std::size_t k = 0; k < 15; ++k) J += 0.01 * r.u(k, 0) * r.u(k, 0) + r.y(k, 0) * r.y(k, 0);
    EXPECT_NEAR(r.cost_J, J, 1e-12);
}

TEST(Loop, InputsRespectTheBox) {
    auto s       = config::loop(case_config());
    s.sim_length = 30;
    const auto r = simloop::run_rhc(fixtures::case_study_plant(), exact_freepc(s));
    EXPECT_LE(r.u.samples().maxCoeff(), 0.5 + 1e-8);
    EXPECT_GE(r.u.samples().minCoeff(), -3.0 - 1e-8);
}

TEST(Loop, NominalSchemesCoincide) {
    // Exact frequency data, noiseless time data and the true model give the same closed loop.
    auto s        = config::loop(case_config());
    s.sim_length  = 20;
    s.ocp.nominal = true;
    const auto G  = fixtures::case_study_plant();

    auto exp    = config::experiment(case_config());
    exp.noise_std         = 0.0;
    exp.excitation.periods = 2;
    const auto data = frf::run_experiment(exp);
    const auto hank = freqdomain::hankel_data_equations(data.u, data.y, 16);

    const auto freepc = simloop::run_rhc(G, exact_freepc(s));
    const auto deepc  = simloop::run_rhc(G, {hank, s});
    const auto mpc    = simloop::run_mpc_benchmark(G, s);
    EXPECT_LT((freepc.u.samples() - deepc.u.samples()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((freepc.u.samples() - mpc.u.samples()).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(freepc.cost_J, mpc.cost_J, 1e-6);
}

TEST(Loop, InfeasibleBoxesReportTheStep) {
    auto s          = config::loop(case_config());
    s.warmup        = TimeSeries::scalar(std::vector<double>(6, 0.0));
    s.ocp.u_box     = {{0.0, 0.0}};
    s.ocp.y_box     = {{5.0, 6.0}};
    try {
        simloop::run_mpc_benchmark(fixtures::case_study_plant(), s);
        FAIL() << "expected RhcFailure";
    } catch (const simloop::RhcFailure& e) {
        EXPECT_EQ(e.step(), 0u);
        EXPECT_EQ(e.status(), qp::QpStatus::infeasible);
    }
}

TEST(Loop, BenchmarkMatchesPublishedCostLevel) {
    // Calibrated warmup; the published model-based figure is 3.1801.
    const auto r = simloop::run_mpc_benchmark(fixtures::case_study_plant(), config::loop(case_config()));
    EXPECT_NEAR(r.cost_J, 3.1801, 0.01);
}

TEST(MonteCarlo, SeedsAreDistinctAcrossStreams) {
    EXPECT_NE(simloop::derive_seed(1, 5, 0, 0), simloop::derive_seed(1, 5, 0, 1));
    EXPECT_NE(simloop::derive_seed(1, 5, 0, 0), simloop::derive_seed(1, 5, 1, 0));
    EXPECT_NE(simloop::derive_seed(1, 5, 0, 0), simloop::derive_seed(2, 5, 0, 0));
    EXPECT_EQ(simloop::derive_seed(1, 5, 0, 0), simloop::derive_seed(1, 5, 0, 0));
}

TEST(MonteCarlo, RunIsReproducible) {
    const auto cfg = quick_mc(15);
    const auto a   = simloop::freepc_run(cfg, 5, 3);
    const auto b   = simloop::freepc_run(cfg, 5, 3);
    EXPECT_EQ(a.u.samples(), b.u.samples());
    EXPECT_EQ(a.cost_J, b.cost_J);
    EXPECT_NE(simloop::freepc_run(cfg, 5, 4).cost_J, a.cost_J);
}

TEST(MonteCarlo, NeedsTwoRuns) {
    auto cfg         = quick_mc(5);
    cfg.runs         = 1;
    cfg.periods_list = {2};
    EXPECT_THROW(simloop::monte_carlo(cfg), InvalidInput);
}

TEST(MonteCarlo, NoiselessRunsHaveZeroVariance) {
    auto cfg                 = quick_mc(10);
    cfg.experiment.noise_std = 0.0;
    cfg.runs                 = 3;
    cfg.periods_list         = {2};
    const auto rows          = simloop::monte_carlo(cfg);
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].failures, 0u);
    EXPECT_LE(rows[0].var_J, 1e-20);
}

TEST(MonteCarlo, WorkerCountDoesNotChangeResults) {
    auto cfg         = quick_mc(10);
    cfg.runs         = 3;
    cfg.periods_list = {2, 3};
    cfg.workers      = 1;
    const auto a     = simloop::monte_carlo(cfg);
    cfg.workers      = 3;
    const auto b     = simloop::monte_carlo(cfg);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].periods, b[i].periods);
        EXPECT_EQ(a[i].mean_J, b[i].mean_J);
        EXPECT_EQ(a[i].var_J, b[i].var_J);
    }
}

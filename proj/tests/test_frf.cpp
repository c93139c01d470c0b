#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include <freepc/frf.hpp>

#include "support.hpp"

using namespace freepc;
using freepc::fixtures::case_study_bins;
using freepc::fixtures::case_study_controller;
using freepc::fixtures::case_study_plant;

namespace {

frf::ClosedLoopExperiment case_experiment(std::size_t periods, double noise, std::size_t discard, std::uint64_t seed) {
    frf::ClosedLoopExperiment e;
    e.plant           = case_study_plant();
    e.controller      = case_study_controller();
    e.excitation      = signals::MultisineSpec::on_grid(case_study_bins(), 80, periods, 1.0, 7);
    e.noise_std       = noise;
    e.discard_periods = discard;
    e.rng_seed        = seed;
    return e;
}

frf::FrfEstimate estimate(const frf::ClosedLoopExperiment& e) {
    const auto data = frf::run_experiment(e);
    return frf::estimate_frf(data.d, data.u, data.y, e.excitation.period_length, e.excitation.frequencies);
}

Complex true_frf(double w) { return lti::freq_response(case_study_plant(), w)(0, 0); }

}  // namespace

TEST(Experiment, ShapesAndDeterminism) {
    const auto e = case_experiment(2, 0.1, 0, 5);
    const auto a = frf::run_experiment(e);
    const auto b = frf::run_experiment(e);
    EXPECT_EQ(a.d.length(), 160u);
    EXPECT_EQ(a.u.length(), 160u);
    EXPECT_EQ(a.y.length(), 160u);
    EXPECT_EQ(a.y.samples(), b.y.samples());
    auto e2     = e;
    e2.rng_seed = 6;
    EXPECT_NE(frf::run_experiment(e2).y.samples(), a.y.samples());
}

TEST(Experiment, NoiselessSteadyStateIsPeriodic) {
    const auto data = frf::run_experiment(case_experiment(3, 0.0, 5, 0));
    for (std::size_t k = 0; k < 160; ++k) {
        EXPECT_NEAR(data.u(k, 0), data.u(k + 80, 0), 1e-10);
        EXPECT_NEAR(data.y(k, 0), data.y(k + 80, 0), 1e-10);
    }
}

TEST(Experiment, NoiseEntersOnlyTheMeasuredOutput) {
    // The excitation d is never corrupted.
    const auto clean = frf::run_experiment(case_experiment(2, 0.0, 0, 3));
    const auto noisy = frf::run_experiment(case_experiment(2, 0.1, 0, 3));
    EXPECT_EQ(clean.d.samples(), noisy.d.samples());
    EXPECT_GT((clean.y.samples() - noisy.y.samples()).norm(), 0.1);
}

TEST(Estimator, ExactOnNoiselessSteadyState) {
    const auto est = estimate(case_experiment(4, 0.0, 5, 0));
    ASSERT_EQ(est.g_hat.size(), 16);
    for (std::size_t m = 0; m < 16; ++m) {
        EXPECT_LT(std::abs(est.g_hat(static_cast<Eigen::Index>(m)) - true_frf(est.frequencies[m])), 1e-8);
        EXPECT_LE(est.variance(static_cast<Eigen::Index>(m)), 1e-16);
    }
}

TEST(Estimator, PointValueAtLowestFrequency) {
    // G(e^{j 2 pi / 80}) evaluated from the polynomial coefficients directly.
    const Complex z   = std::polar(1.0, 2.0 * std::numbers::pi / 80.0);
    const Complex ref = (0.1164 * z + 0.1071) / (z * z - 1.891 * z + 0.7788);
    const auto    est = estimate(case_experiment(3, 0.0, 5, 0));
    EXPECT_LT(std::abs(est.g_hat(0) - ref), 1e-8);
}

TEST(Estimator, NeedsTwoPeriods) {
    const auto data = frf::run_experiment(case_experiment(1, 0.0, 0, 0));
    EXPECT_THROW(frf::estimate_frf(data.d, data.u, data.y, 80, case_experiment(1, 0, 0, 0).excitation.frequencies),
                 InvalidInput);
}

TEST(Estimator, RejectsBadShapes) {
    const auto data  = frf::run_experiment(case_experiment(2, 0.0, 0, 0));
    const auto freqs = case_experiment(2, 0, 0, 0).excitation.frequencies;
    EXPECT_THROW(frf::estimate_frf(data.d, data.u, data.y, 70, freqs), InvalidInput);
    EXPECT_THROW(frf::estimate_frf(data.d, data.u.slice(0, 80), data.y, 80, freqs), InvalidInput);
}

TEST(Estimator, InvariantToCommonScaling) {
    const auto e    = case_experiment(5, 0.1, 0, 11);
    const auto data = frf::run_experiment(e);
    const auto a    = frf::estimate_frf(data.d, data.u, data.y, 80, e.excitation.frequencies);
    const auto b    = frf::estimate_frf(TimeSeries(7.3 * data.d.samples()), TimeSeries(7.3 * data.u.samples()),
                                        TimeSeries(7.3 * data.y.samples()), 80, e.excitation.frequencies);
    EXPECT_LT((a.g_hat - b.g_hat).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((a.variance - b.variance).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + a.variance.maxCoeff()));
}

TEST(Estimator, ConfidenceRadiusFormula) {
    const auto est = estimate(case_experiment(5, 0.1, 0, 2));
    for (Eigen::Index m = 0; m < est.variance.size(); ++m) {
        EXPECT_NEAR(est.confidence_radius_99(m), std::sqrt(est.variance(m) * std::log(100.0)), 1e-15);
    }
}

TEST(Estimator, TransientShowsUpAsSpreadWithoutDiscard) {
    // Noise-free but starting from rest: the two periods differ, so the variance is not zero.
    const auto est = estimate(case_experiment(2, 0.0, 0, 0));
    EXPECT_GT(est.variance.maxCoeff(), 1e-8);
}

TEST(Estimator, MorePeriodsShrinkTheError) {
    std::vector<double> err5, err50;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (auto [P, out] : {std::pair{std::size_t{5}, &err5}, std::pair{std::size_t{50}, &err50}}) {
            const auto est = estimate(case_experiment(P, 0.1, 0, seed));
            double     e   = 0.0;
            for (std::size_t m = 0; m < 16; ++m) {
                e = std::max(e, std::abs(est.g_hat(static_cast<Eigen::Index>(m)) - true_frf(est.frequencies[m])));
            }
            out->push_back(e);
        }
    }
    std::sort(err5.begin(), err5.end());
    std::sort(err50.begin(), err50.end());
    EXPECT_LT(err50[10], 0.5 * err5[10]);
}

TEST(Estimator, RadiusCoversTheTruthMostOfTheTime) {
    std::size_t inside = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto est = estimate(case_experiment(20, 0.1, 5, 100 + seed));
        for (std::size_t m = 0; m < 16; ++m) {
            const auto i = static_cast<Eigen::Index>(m);
            inside += std::abs(est.g_hat(i) - true_frf(est.frequencies[m])) <= est.confidence_radius_99(i);
            ++total;
        }
    }
    EXPECT_GE(static_cast<double>(inside) / static_cast<double>(total), 0.9);
}

TEST(Sensitivity, PredictsSteadyStateInputSpectrum) {
    const auto e    = case_experiment(3, 0.0, 5, 0);
    const auto data = frf::run_experiment(e);
    const auto D    = signals::period_dft_values(data.d, 80, e.excitation.frequencies);
    const auto U    = signals::period_dft_values(data.u, 80, e.excitation.frequencies);
    std::vector<ComplexVector> d_periods;
    for (const auto& m : D) d_periods.push_back(m.col(0));
    const auto predicted = frf::sensitivity_check(e.plant, e.controller, e.excitation.frequencies, d_periods);
    for (std::size_t p = 0; p < 3; ++p) {
        EXPECT_LT((predicted[p] - U[p].col(0)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Sensitivity, ZeroControllerPassesExcitationThrough) {
    const auto zero = lti::tf_to_ss({{0.0}, {1.0}});
    const auto w    = fixtures::case_study_frequencies();
    ComplexVector D = ComplexVector::Constant(16, Complex(0.3, -1.2));
    const auto out  = frf::sensitivity_check(case_study_plant(), zero, w, {D});
    EXPECT_LT((out[0] - D).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Sensitivity, LengthMismatchIsRejected) {
    EXPECT_THROW(frf::sensitivity_check(case_study_plant(), case_study_controller(), fixtures::case_study_frequencies(),
                                        {ComplexVector::Ones(3)}),
                 InvalidInput);
}

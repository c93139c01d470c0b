#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lti.hpp"
#include "numcore.hpp"
#include "signals.hpp"
#include "time_series.hpp"

namespace freepc::frf {

struct ClosedLoopExperiment {
    lti::StateSpace        plant;
    lti::StateSpace        controller;
    signals::MultisineSpec excitation;
    double                 noise_std       = 0.0;
    std::uint64_t          rng_seed        = 0;
    std::size_t            discard_periods = 0;
};

struct ExperimentData {
    TimeSeries d;
    TimeSeries u;
    TimeSeries y;
};

/// Simulates the loop u = d - K y_meas from rest and keeps the last `excitation.periods` periods.
inline ExperimentData run_experiment(const ClosedLoopExperiment& exp) {
    if (!(exp.noise_std >= 0.0) || !std::isfinite(exp.noise_std)) {
        throw InvalidInput("run_experiment: noise_std must be finite and >= 0");
    }
    if (exp.plant.nu() != 1 || exp.plant.ny() != 1) {
        throw InvalidInput("run_experiment: the multisine experiment is single-input single-output");
    }
    const lti::StateSpace loop = lti::closed_loop(exp.plant, exp.controller);
    if (!lti::is_stable(loop)) {
        throw InvalidInput("run_experiment: closed loop is not internally stable");
    }

    signals::MultisineSpec full = exp.excitation;
    full.periods += exp.discard_periods;
    const TimeSeries d = signals::synth_multisine(full);

    const auto      N = static_cast<Eigen::Index>(d.length());
    std::mt19937_64 rng(exp.rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    RealMatrix w(N, 2);
    w.col(0) = d.samples().col(0);
    for (Eigen::Index k = 0; k < N; ++k) {
        w(k, 1) = exp.noise_std > 0.0 ? exp.noise_std * gauss(rng) : 0.0;
    }
    const auto sim = lti::simulate(loop, RealVector::Zero(static_cast<Eigen::Index>(loop.nx())), TimeSeries(w));

    const auto keep  = static_cast<Eigen::Index>(exp.excitation.length());
    const auto first = N - keep;
    return {TimeSeries(d.samples().bottomRows(keep), {"d"}),
            TimeSeries(sim.y.samples().block(first, 0, keep, 1), {"u"}),
            TimeSeries(sim.y.samples().block(first, 1, keep, 1), {"y"})};
}

struct FrfEstimate {
    std::vector<double> frequencies;
    ComplexVector       g_hat;
    RealVector          variance;
    RealVector          confidence_radius_99;
    std::size_t         periods_used = 0;
};

// Circular complex Gaussian: P(|e| > r) = exp(-r^2 / var)  =>  r_99 = sqrt(var * ln 100).
inline double confidence_radius_99(double variance) { return std::sqrt(variance * std::log(100.0)); }

/**
 * Per-period ratio G_p = Y_p D_p^* / (U_p D_p^*), averaged over periods, with the sample
 * variance of the mean 1/(P(P-1)) sum |G_p - G|^2.
 */
inline FrfEstimate estimate_frf(const TimeSeries&          d,
                                const TimeSeries&          u,
                                const TimeSeries&          y,
                                std::size_t                period_length,
                                const std::vector<double>& frequencies) {
    if (d.length() != u.length() || d.length() != y.length()) {
        throw InvalidInput("estimate_frf: d, u, y must have equal length");
    }
    if (d.channels() != 1 || u.channels() != 1 || y.channels() != 1) {
        throw InvalidInput("estimate_frf: single-channel signals required");
    }
    if (period_length == 0 || d.length() % period_length != 0) {
        throw InvalidInput("estimate_frf: length must be a multiple of the period length");
    }
    const std::size_t P = d.length() / period_length;
    if (P < 2) {
        throw InvalidInput("estimate_frf: at least two periods are required for the variance");
    }
    const auto D = signals::period_dft_values(d, period_length, frequencies);
    const auto U = signals::period_dft_values(u, period_length, frequencies);
    const auto Y = signals::period_dft_values(y, period_length, frequencies);

    const auto    M = static_cast<Eigen::Index>(frequencies.size());
    ComplexMatrix Gp(static_cast<Eigen::Index>(P), M);
    for (std::size_t p = 0; p < P; ++p) {
        for (Eigen::Index m = 0; m < M; ++m) {
            const Complex dc  = std::conj(D[p](m, 0));
            const Complex den = U[p](m, 0) * dc;
            if (std::abs(den) == 0.0 || !std::isfinite(std::abs(den))) {
                throw SingularityError("estimate_frf: zero denominator at w = " +
                                       std::to_string(frequencies[static_cast<std::size_t>(m)]) + ", period " +
                                       std::to_string(p));
            }
            Gp(static_cast<Eigen::Index>(p), m) = Y[p](m, 0) * dc / den;
        }
    }

    FrfEstimate est;
    est.frequencies  = frequencies;
    est.periods_used = P;
    est.g_hat        = Gp.colwise().mean().transpose();
    est.variance.resize(M);
    est.confidence_radius_99.resize(M);
    const double scale = 1.0 / (static_cast<double>(P) * static_cast<double>(P - 1));
    for (Eigen::Index m = 0; m < M; ++m) {
        est.variance(m)             = scale * (Gp.col(m).array() - est.g_hat(m)).abs2().sum();
        est.confidence_radius_99(m) = confidence_radius_99(est.variance(m));
    }
    return est;
}

/// Steady-state, noise-free prediction of the input spectrum: U = (1 + K G)^{-1} D for the loop u = d - K y.
inline std::vector<ComplexVector> sensitivity_check(const lti::StateSpace&            plant,
                                                    const lti::StateSpace&            controller,
                                                    const std::vector<double>&        frequencies,
                                                    const std::vector<ComplexVector>& d_per_period) {
    if (plant.nu() != 1 || plant.ny() != 1 || controller.nu() != 1 || controller.ny() != 1) {
        throw InvalidInput("sensitivity_check: SISO plant and controller required");
    }
    const auto M = static_cast<Eigen::Index>(frequencies.size());
    ComplexVector sens(M);
    for (Eigen::Index m = 0; m < M; ++m) {
        const double  w = frequencies[static_cast<std::size_t>(m)];
        const Complex g = lti::freq_response(plant, w)(0, 0);
        const Complex k = lti::freq_response(controller, w)(0, 0);
        sens(m)         = 1.0 / (1.0 + k * g);
    }
    std::vector<ComplexVector> out;
    for (const auto& Dp : d_per_period) {
        if (Dp.size() != M) {
            throw InvalidInput("sensitivity_check: spectrum length does not match frequency count");
        }
        out.push_back(sens.cwiseProduct(Dp));
    }
    return out;
}

}  // namespace freepc::frf

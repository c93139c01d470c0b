#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "numcore.hpp"
#include "spectrum.hpp"
#include "time_series.hpp"

namespace freepc::signals {

/// Depth-L block Hankel matrix: column i is x_[i, i+L-1] stacked time-major (n_v*L rows, N-L+1 columns).
inline RealMatrix hankel(const TimeSeries& x, std::size_t L) {
    const std::size_t N = x.length();
    if (L < 1 || L > N) {
        throw InvalidInput("hankel: depth must satisfy 1 <= L <= N");
    }
    const auto n_v  = static_cast<Eigen::Index>(x.channels());
    const auto cols = static_cast<Eigen::Index>(N - L + 1);
    RealMatrix H(n_v * static_cast<Eigen::Index>(L), cols);
    for (Eigen::Index i = 0; i < cols; ++i) {
        for (Eigen::Index l = 0; l < static_cast<Eigen::Index>(L); ++l) {
            H.block(l * n_v, i, n_v, 1) = x.samples().row(i + l).transpose();
        }
    }
    return H;
}

struct PeReport {
    bool        persistently_exciting = false;
    std::size_t rank                  = 0;
    std::size_t required              = 0;
};

inline PeReport is_pe_time(const TimeSeries& x, std::size_t L, double tol = kDefaultRankTol) {
    const RealMatrix  H        = hankel(x, L);
    const std::size_t required = x.channels() * L;
    const std::size_t rank     = numerical_rank(H, tol);
    return {rank == required, rank, required};
}

// Sum of cosines, exactly periodic over period_length samples.
struct MultisineSpec {
    std::vector<double> frequencies;
    std::vector<double> amplitudes;
    std::vector<double> phases;
    std::size_t         period_length = 0;
    std::size_t         periods       = 1;

    /// Frequencies 2*pi*k/period_length for each k in `bins`, equal amplitudes, phases uniform in [0, 2pi).
    static MultisineSpec on_grid(const std::vector<std::size_t>& bins,
                                 std::size_t                     period_length,
                                 std::size_t                     periods,
                                 double                          amplitude,
                                 std::uint64_t                   phase_seed) {
        MultisineSpec spec;
        spec.period_length = period_length;
        spec.periods       = periods;
        std::mt19937_64                        rng(phase_seed);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        for (std::size_t k : bins) {
            spec.frequencies.push_back(2.0 * std::numbers::pi * static_cast<double>(k) /
                                       static_cast<double>(period_length));
            spec.amplitudes.push_back(amplitude);
            spec.phases.push_back(phase(rng));
        }
        return spec;
    }

    std::size_t length() const { return period_length * periods; }
};

// Returns the integer bin k with w = 2*pi*k/period_length, or throws.
inline long grid_bin(double w, std::size_t period_length) {
    const double k = w * static_cast<double>(period_length) / (2.0 * std::numbers::pi);
    const double r = std::round(k);
    if (!std::isfinite(k) || std::abs(k - r) > 1e-9) {
        throw InvalidInput("frequency " + std::to_string(w) + " is not on the grid 2*pi*k/" +
                           std::to_string(period_length));
    }
    return static_cast<long>(r);
}

inline void validate(const MultisineSpec& spec) {
    const auto M = spec.frequencies.size();
    if (spec.period_length == 0 || spec.periods == 0) {
        throw InvalidInput("MultisineSpec: period_length and periods must be positive");
    }
    if (spec.amplitudes.size() != M || spec.phases.size() != M) {
        throw InvalidInput("MultisineSpec: frequencies, amplitudes and phases must have equal length");
    }
    for (std::size_t m = 0; m < M; ++m) {
        const double w = spec.frequencies[m];
        if (!(w >= 0.0 && w < std::numbers::pi)) {
            throw InvalidInput("MultisineSpec: frequency outside [0, pi)");
        }
        if (m > 0 && !(w > spec.frequencies[m - 1])) {
            throw InvalidInput("MultisineSpec: frequencies must be strictly increasing");
        }
        if (!(spec.amplitudes[m] > 0.0) || !std::isfinite(spec.amplitudes[m]) || !std::isfinite(spec.phases[m])) {
            throw InvalidInput("MultisineSpec: amplitudes must be positive and finite");
        }
        grid_bin(w, spec.period_length);
    }
}

/// d_k = sum_m a_m cos(w_m k + phi_m), k = 0 .. periods*period_length - 1.
inline TimeSeries synth_multisine(const MultisineSpec& spec) {
    validate(spec);
    const std::size_t N = spec.length();
    RealMatrix        d = RealMatrix::Zero(static_cast<Eigen::Index>(N), 1);
    for (std::size_t k = 0; k < N; ++k) {
        // Reduce k modulo the period so every period is bit-identical.
        const double kl  = static_cast<double>(k % spec.period_length);
        double       acc = 0.0;
        for (std::size_t m = 0; m < spec.frequencies.size(); ++m) {
            acc += spec.amplitudes[m] * std::cos(spec.frequencies[m] * kl + spec.phases[m]);
        }
        d(static_cast<Eigen::Index>(k), 0) = acc;
    }
    return TimeSeries(std::move(d), {"d"});
}

/**
 * Unnormalized DFT of each period at arbitrary grid frequencies (any sign, any branch).
 * Entry [p](m, c) = sum_{k=0}^{P_len-1} x_{p*P_len + k, c} e^{-j w_m k}.
 */
inline std::vector<ComplexMatrix> period_dft_values(const TimeSeries&         x,
                                                    std::size_t                period_length,
                                                    const std::vector<double>& frequencies) {
    if (period_length == 0 || x.length() % period_length != 0 || x.empty()) {
        throw InvalidInput("per_period_dft: series length must be a positive multiple of the period length");
    }
    std::vector<long> bins;
    for (double w : frequencies) {
        bins.push_back(grid_bin(w, period_length));
    }
    const std::size_t P   = x.length() / period_length;
    const auto        n_v = static_cast<Eigen::Index>(x.channels());
    const auto        len = static_cast<long>(period_length);

    // Twiddles from the integer bin keep e^{-jwk} exact up to rounding of cos/sin on the grid.
    std::vector<ComplexVector> twiddle;
    for (long b : bins) {
        ComplexVector t(static_cast<Eigen::Index>(period_length));
        for (long k = 0; k < len; ++k) {
            const long   idx = ((b * k) % len + len) % len;
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(idx) / static_cast<double>(len);
            t(k)             = Complex(std::cos(ang), std::sin(ang));
        }
        twiddle.push_back(std::move(t));
    }

    std::vector<ComplexMatrix> out;
    out.reserve(P);
    for (std::size_t p = 0; p < P; ++p) {
        const auto    block = x.samples().middleRows(static_cast<Eigen::Index>(p * period_length),
                                                     static_cast<Eigen::Index>(period_length));
        ComplexMatrix V(static_cast<Eigen::Index>(frequencies.size()), n_v);
        for (std::size_t m = 0; m < frequencies.size(); ++m) {
            V.row(static_cast<Eigen::Index>(m)) = (twiddle[m].transpose() * block.cast<Complex>());
        }
        out.push_back(std::move(V));
    }
    return out;
}

/// Per-period DFT at frequencies in [0, pi); one SpectrumSamples per period.
inline std::vector<SpectrumSamples> per_period_dft(const TimeSeries&         x,
                                                   std::size_t                period_length,
                                                   const std::vector<double>& frequencies) {
    std::vector<SpectrumSamples> out;
    for (auto& V : period_dft_values(x, period_length, frequencies)) {
        out.emplace_back(frequencies, std::move(V));
    }
    return out;
}

}  // namespace freepc::signals

#pragma once

#include <cmath>
#include <vector>

#include "numcore.hpp"
#include "signals.hpp"
#include "spectrum.hpp"
#include "time_series.hpp"

namespace freepc::freqdomain {

struct FreqData {
    SpectrumSamples input;
    SpectrumSamples output;

    FreqData(SpectrumSamples in, SpectrumSamples out) : input(std::move(in)), output(std::move(out)) {
        if (input.frequencies() != output.frequencies()) {
            throw InvalidInput("FreqData: input and output frequency lists differ");
        }
    }

    std::size_t size() const { return input.size(); }
    std::size_t nu() const { return input.channels(); }
    std::size_t ny() const { return output.channels(); }
};

enum class DataForm { hankel, frequency };

/**
 * Right-hand side of the data-based trajectory equation (u_[0,L-1]; y_[0,L-1]) = matrix * g.
 * Rows are the input block (L samples of n_u channels, time-major) followed by the output block.
 */
struct DataEquations {
    RealMatrix  matrix;
    std::size_t n_u   = 0;
    std::size_t n_y   = 0;
    std::size_t depth = 0;
    DataForm    form  = DataForm::hankel;

    std::size_t lhs_dim() const { return (n_u + n_y) * depth; }
    std::size_t width() const { return static_cast<std::size_t>(matrix.cols()); }

    auto input_rows() const { return matrix.topRows(static_cast<Eigen::Index>(n_u * depth)); }
    auto output_rows() const { return matrix.bottomRows(static_cast<Eigen::Index>(n_y * depth)); }
};

inline ComplexVector w_vector(double omega, std::size_t L) {
    if (L < 1) {
        throw InvalidInput("w_vector: L must be >= 1");
    }
    ComplexVector w(static_cast<Eigen::Index>(L));
    for (std::size_t l = 0; l < L; ++l) {
        w(static_cast<Eigen::Index>(l)) = std::polar(1.0, omega * static_cast<double>(l));
    }
    return w;
}

/// Column m is W_L(w_m) (x) V_m; shape n_v*L x M.
inline ComplexMatrix f_matrix(const SpectrumSamples& v, std::size_t L) {
    if (L < 1) {
        throw InvalidInput("f_matrix: L must be >= 1");
    }
    const auto    n_v = static_cast<Eigen::Index>(v.channels());
    ComplexMatrix F(n_v * static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(v.size()));
    for (std::size_t m = 0; m < v.size(); ++m) {
        F.col(static_cast<Eigen::Index>(m)) = kron(w_vector(v.frequencies()[m], L), v.value(m));
    }
    return F;
}

/// Rank test on [F_L(V), conj(F_L(V))] against n_v * L.
inline signals::PeReport is_pe_freq(const SpectrumSamples& v, std::size_t L, double tol = kDefaultRankTol) {
    const ComplexMatrix F = f_matrix(v, L);
    ComplexMatrix       both(F.rows(), 2 * F.cols());
    both << F, F.conjugate();
    const std::size_t required = v.channels() * L;
    const std::size_t rank     = numerical_rank(both, tol);
    return {rank == required, rank, required};
}

/// [Re F_L(U) Im F_L(U); Re F_L(Y) Im F_L(Y)], real, width 2M.
inline DataEquations freq_data_equations(const FreqData& data, std::size_t L) {
    const ComplexMatrix Fu = f_matrix(data.input, L);
    const ComplexMatrix Fy = f_matrix(data.output, L);
    const auto          M  = static_cast<Eigen::Index>(data.size());
    RealMatrix          m(Fu.rows() + Fy.rows(), 2 * M);
    m.topLeftCorner(Fu.rows(), M)     = Fu.real();
    m.topRightCorner(Fu.rows(), M)    = Fu.imag();
    m.bottomLeftCorner(Fy.rows(), M)  = Fy.real();
    m.bottomRightCorner(Fy.rows(), M) = Fy.imag();
    return {std::move(m), data.nu(), data.ny(), L, DataForm::frequency};
}

/// [H_L(u); H_L(y)], width N-L+1.
inline DataEquations hankel_data_equations(const TimeSeries& u, const TimeSeries& y, std::size_t L) {
    if (u.length() != y.length()) {
        throw InvalidInput("hankel_data_equations: u and y lengths differ");
    }
    const RealMatrix Hu = signals::hankel(u, L);
    const RealMatrix Hy = signals::hankel(y, L);
    RealMatrix       m(Hu.rows() + Hy.rows(), Hu.cols());
    m << Hu, Hy;
    return {std::move(m), u.channels(), y.channels(), L, DataForm::hankel};
}

/**
 * Sampled FRF in one input direction per frequency: U_m = r_m, Y_m = G(e^{j w_m}) r_m.
 * frf_values[m] is n_y x n_u, directions[m] has n_u entries.
 */
inline FreqData frf_to_freq_data(const std::vector<double>&        frequencies,
                                 const std::vector<ComplexMatrix>& frf_values,
                                 const std::vector<ComplexVector>& directions) {
    const std::size_t M = frequencies.size();
    if (frf_values.size() != M || directions.size() != M || M == 0) {
        throw InvalidInput("frf_to_freq_data: need exactly one FRF value and one direction per frequency");
    }
    const auto    n_y = frf_values[0].rows();
    const auto    n_u = frf_values[0].cols();
    ComplexMatrix U(static_cast<Eigen::Index>(M), n_u);
    ComplexMatrix Y(static_cast<Eigen::Index>(M), n_y);
    for (std::size_t m = 0; m < M; ++m) {
        const auto& G = frf_values[m];
        const auto& r = directions[m];
        if (G.rows() != n_y || G.cols() != n_u || r.size() != n_u) {
            throw InvalidInput("frf_to_freq_data: inconsistent FRF/direction dimensions");
        }
        if (r.norm() == 0.0) {
            throw InvalidInput("frf_to_freq_data: zero input direction at frequency index " + std::to_string(m));
        }
        U.row(static_cast<Eigen::Index>(m)) = r.transpose();
        Y.row(static_cast<Eigen::Index>(m)) = (G * r).transpose();
    }
    return FreqData(SpectrumSamples(frequencies, std::move(U)), SpectrumSamples(frequencies, std::move(Y)));
}

/// SISO convenience: unit directions, Y_m = G_m.
inline FreqData frf_to_freq_data(const std::vector<double>& frequencies, const ComplexVector& frf) {
    std::vector<ComplexMatrix> values;
    std::vector<ComplexVector> dirs;
    for (Eigen::Index m = 0; m < frf.size(); ++m) {
        values.push_back(ComplexMatrix::Constant(1, 1, frf(m)));
        dirs.push_back(ComplexVector::Ones(1));
    }
    return frf_to_freq_data(frequencies, values, dirs);
}

struct ConsistencyReport {
    bool       consistent = false;
    double     residual   = 0.0;
    RealVector g;
};

/// Least-squares feasibility of (u; y) = matrix * g; consistent iff residual <= tol * (1 + |rhs|).
inline ConsistencyReport is_trajectory_consistent(const DataEquations& eqs,
                                                  const TimeSeries&    u,
                                                  const TimeSeries&    y,
                                                  double               tol = 1e-8) {
    if (u.length() != eqs.depth || y.length() != eqs.depth || u.channels() != eqs.n_u || y.channels() != eqs.n_y) {
        throw InvalidInput("is_trajectory_consistent: trajectory does not match equation depth/channels");
    }
    RealVector rhs(static_cast<Eigen::Index>(eqs.lhs_dim()));
    rhs << u.stacked(0, eqs.depth), y.stacked(0, eqs.depth);
    ConsistencyReport rep;
    rep.g          = least_squares(eqs.matrix, rhs);
    rep.residual   = (eqs.matrix * rep.g - rhs).norm();
    rep.consistent = rep.residual <= tol * (1.0 + rhs.norm());
    return rep;
}

}  // namespace freepc::freqdomain

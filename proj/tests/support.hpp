#pragma once

#include <algorithm>
#include <numbers>
#include <random>
#include <vector>

#include <freepc/freqdomain.hpp>
#include <freepc/frf.hpp>
#include <freepc/lti.hpp>
#include <freepc/ocp.hpp>
#include <freepc/qp.hpp>
#include <freepc/signals.hpp>

namespace freepc::fixtures {

inline lti::StateSpace case_study_plant() { return lti::tf_to_ss({{0.1164, 0.1071}, {1.0, -1.891, 0.7788}}); }
inline lti::StateSpace case_study_controller() { return lti::tf_to_ss({{6.0, -5.135}, {1.0, -0.1353}}); }

inline const std::vector<std::size_t>& case_study_bins();

// Noiseless closed-loop record of the case-study plant (two excitation periods).
inline lti::Trajectory case_study_record() {
    frf::ClosedLoopExperiment e;
    e.plant      = case_study_plant();
    e.controller = case_study_controller();
    e.excitation = signals::MultisineSpec::on_grid(case_study_bins(), 80, 2, 1.0, 7);
    const auto d = frf::run_experiment(e);
    return {d.u, d.y};
}

inline const std::vector<std::size_t>& case_study_bins() {
    static const std::vector<std::size_t> bins{1, 4, 6, 9, 11, 14, 16, 19, 21, 24, 26, 29, 31, 34, 36, 39};
    return bins;
}

inline std::vector<double> case_study_frequencies() {
    std::vector<double> w;
    for (auto k : case_study_bins()) w.push_back(2.0 * std::numbers::pi * static_cast<double>(k) / 80.0);
    return w;
}

inline RealMatrix gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> n(0.0, 1.0);
    RealMatrix                       m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

// Random stable, controllable system; the spectral radius lands in [0.3, 0.95].
inline lti::StateSpace random_system(std::mt19937_64& rng, Eigen::Index nx, Eigen::Index nu, Eigen::Index ny) {
    std::uniform_real_distribution<double> radius(0.3, 0.95);
    for (;;) {
        RealMatrix   A   = gaussian(rng, nx, nx);
        const double rho = spectral_radius(A);
        if (rho < 1e-6) continue;
        A *= radius(rng) / rho;
        lti::StateSpace sys(A, gaussian(rng, nx, nu), gaussian(rng, ny, nx), 0.5 * gaussian(rng, ny, nu));
        if (lti::is_controllable(sys)) return sys;
    }
}

inline std::vector<double> random_frequencies(std::mt19937_64& rng, std::size_t M) {
    std::uniform_real_distribution<double> w(0.05, std::numbers::pi - 0.05);
    std::vector<double>                    f;
    while (f.size() < M) {
        const double c = w(rng);
        if (std::none_of(f.begin(), f.end(), [&](double x) { return std::abs(x - c) < 1e-3; })) f.push_back(c);
    }
    std::sort(f.begin(), f.end());
    return f;
}

// Exact input-output spectrum samples: random complex direction r_m, output G(e^{jw_m}) r_m.
inline freqdomain::FreqData exact_freq_data(const lti::StateSpace& sys, const std::vector<double>& freqs,
                                            std::mt19937_64& rng) {
    std::vector<ComplexMatrix> G;
    std::vector<ComplexVector> dirs;
    for (double w : freqs) {
        G.push_back(lti::freq_response(sys, w));
        const RealMatrix re = gaussian(rng, static_cast<Eigen::Index>(sys.nu()), 1);
        const RealMatrix im = gaussian(rng, static_cast<Eigen::Index>(sys.nu()), 1);
        ComplexVector    r(static_cast<Eigen::Index>(sys.nu()));
        for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = {re(i, 0), im(i, 0)};
        dirs.push_back(r);
    }
    return freqdomain::frf_to_freq_data(freqs, G, dirs);
}

inline TimeSeries random_signal(std::mt19937_64& rng, std::size_t N, std::size_t channels) {
    return TimeSeries(gaussian(rng, static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(channels)));
}

// min over x0 of |y - O x0 - T u|: zero iff (u, y) is a trajectory of sys.
inline double model_fit_residual(const lti::StateSpace& sys, const RealVector& u, const RealVector& y, std::size_t L) {
    const RealMatrix O  = lti::observability_matrix(sys, L);
    const RealMatrix Tm = lti::toeplitz_matrix(sys, L);
    const RealVector r  = y - Tm * u;
    const RealVector x0 = least_squares(O, r);
    return (O * x0 - r).norm();
}

// Random past window of length T_bar taken from a genuine trajectory.
inline lti::Trajectory random_trajectory(std::mt19937_64& rng, const lti::StateSpace& sys, std::size_t len) {
    const RealVector x0 = gaussian(rng, static_cast<Eigen::Index>(sys.nx()), 1);
    TimeSeries       u  = random_signal(rng, len, sys.nu());
    TimeSeries       y  = lti::simulate(sys, x0, u).y;
    return {std::move(u), std::move(y)};
}

struct NominalPair {
    ocp::OcpSolution deepc;
    ocp::OcpSolution freepc;
};

// Same open-loop problem posed on noiseless time data and on exact frequency data. Unstable
// plants should pass their own (closed-loop) time record; open-loop random data would diverge.
inline NominalPair nominal_pair(std::mt19937_64& rng, const lti::StateSpace& sys, std::size_t T, std::size_t T_bar,
                               const lti::Trajectory* time_data = nullptr) {
    const std::size_t L  = T + T_bar;
    const std::size_t nu = sys.nu(), ny = sys.ny(), nx = sys.nx();

    const std::size_t N    = 3 * (nu + 1) * (L + nx) + L;
    const auto        data = time_data ? *time_data : random_trajectory(rng, sys, N);
    const auto        hank = freqdomain::hankel_data_equations(data.u, data.y, L);

    const std::size_t M    = nu * L + nx + 2;
    const auto        fd   = exact_freq_data(sys, random_frequencies(rng, M), rng);
    const auto        freq = freqdomain::freq_data_equations(fd, L);

    const auto past = random_trajectory(rng, sys, T_bar);

    ocp::OcpConfig c;
    c.T       = T;
    c.T_bar   = T_bar;
    c.Q       = RealMatrix::Identity(static_cast<Eigen::Index>(ny), static_cast<Eigen::Index>(ny));
    c.R       = 0.1 * RealMatrix::Identity(static_cast<Eigen::Index>(nu), static_cast<Eigen::Index>(nu));
    c.u_box   = std::vector<ocp::Box>(nu, {-0.5, 0.5});
    c.nominal = true;

    const RealVector up = past.u.stacked(0, T_bar), yp = past.y.stacked(0, T_bar);
    return {ocp::solve_ocp(ocp::build_ocp(hank, up, yp, c)), ocp::solve_ocp(ocp::build_ocp(freq, up, yp, c))};
}

inline qp::QpProblem unconstrained(RealMatrix H, RealVector c) {
    qp::QpProblem q;
    const auto    n = c.size();
    q.hessian       = std::move(H);
    q.linear        = std::move(c);
    q.eq_matrix     = RealMatrix::Zero(0, n);
    q.eq_rhs        = RealVector::Zero(0);
    q.ineq_matrix   = RealMatrix::Zero(0, n);
    q.ineq_lo       = RealVector::Zero(0);
    q.ineq_hi       = RealVector::Zero(0);
    return q;
}

inline double objective(const qp::QpProblem& q, const RealVector& z) { return 0.5 * z.dot(q.hessian * z) + q.linear.dot(z); }

// Random convex instance with a known strictly feasible point.
inline qp::QpProblem random_instance(std::mt19937_64& rng, RealVector& feasible) {
    std::uniform_int_distribution<int> dim(2, 9);
    const Eigen::Index                 n   = dim(rng);
    const Eigen::Index                 neq = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    const Eigen::Index                 nin = std::uniform_int_distribution<Eigen::Index>(1, 2 * n)(rng);
    // Rank-deficient Hessians are allowed; the boxes below keep the problem bounded.
    const RealMatrix F = gaussian(rng, std::uniform_int_distribution<Eigen::Index>(1, n)(rng), n);
    auto             q = unconstrained(F.transpose() * F, gaussian(rng, n, 1));
    feasible           = gaussian(rng, n, 1);
    q.eq_matrix        = gaussian(rng, neq, n);
    q.eq_rhs           = q.eq_matrix * feasible;
    q.ineq_matrix.resize(nin + n, n);
    q.ineq_matrix << gaussian(rng, nin, n), RealMatrix::Identity(n, n);
    const RealVector gz = q.ineq_matrix * feasible;
    std::uniform_real_distribution<double> slack(0.1, 2.0);
    q.ineq_lo.resize(nin + n);
    q.ineq_hi.resize(nin + n);
    for (Eigen::Index i = 0; i < nin + n; ++i) {
        q.ineq_lo(i) = gz(i) - slack(rng);
        q.ineq_hi(i) = (i % 3 == 0) ? qp::kInf : gz(i) + slack(rng);
    }
    return q;
}

inline ocp::OcpProblem random_regularized_ocp(std::mt19937_64& rng) {
    const auto sys  = random_system(rng, 2, 1, 1);
    const auto fd   = exact_freq_data(sys, random_frequencies(rng, 8), rng);
    const auto eqs  = freqdomain::freq_data_equations(fd, 7);
    const auto past = random_trajectory(rng, sys, 3);
    ocp::OcpConfig c;
    c.T            = 4;
    c.T_bar        = 3;
    c.Q            = RealMatrix::Identity(1, 1);
    c.R            = 0.01 * RealMatrix::Identity(1, 1);
    c.lambda_g     = std::uniform_real_distribution<double>(0.01, 2.0)(rng);
    c.lambda_sigma = std::pow(10.0, std::uniform_real_distribution<double>(0.0, 5.0)(rng));
    c.u_box        = {{-1.0, 1.0}};
    // Noisy past outputs force a nonzero slack.
    const RealVector yp = past.y.stacked(0, 3) + 0.05 * gaussian(rng, 3, 1);
    return ocp::build_ocp(eqs, past.u.stacked(0, 3), yp, c);
}

}  // namespace freepc::fixtures

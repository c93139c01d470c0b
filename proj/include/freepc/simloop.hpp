#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <mutex>
#include <numbers>
#include <tuple>
#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "freqdomain.hpp"
#include "frf.hpp"
#include "lti.hpp"
#include "ocp.hpp"
#include "qp.hpp"

namespace freepc::simloop {

// Everything a receding-horizon run needs except the prediction model.
struct LoopSettings {
    ocp::OcpConfig ocp;
    std::size_t    sim_length = 50;
    TimeSeries     warmup;       // open-loop inputs applied before control starts, length >= T_bar
    RealVector     x0;           // initial plant state (empty = zero)
    double         noise_std = 0.0;
    std::uint64_t  rng_seed  = 0;
    bool           record_windows = false;
    qp::QpSettings qp;
};

struct RhcConfig {
    freqdomain::DataEquations eqs;
    LoopSettings              loop;
};

struct RhcResult {
    TimeSeries                u;  // controlled phase only, sim_length samples
    TimeSeries                y;
    std::vector<qp::QpStatus> per_step_status;
    double                    cost_J = 0.0;
    // Past windows handed to the optimizer at each step (only when record_windows is set).
    std::vector<RealVector> u_windows;
    std::vector<RealVector> y_windows;
};

class RhcFailure : public std::runtime_error {
  public:
    RhcFailure(std::size_t step, qp::QpStatus status)
        : std::runtime_error("receding-horizon step " + std::to_string(step) + ": solver returned " +
                             std::string(qp::to_string(status))),
          step_(step),
          status_(status) {}

    std::size_t  step() const { return step_; }
    qp::QpStatus status() const { return status_; }

  private:
    std::size_t  step_;
    qp::QpStatus status_;
};

namespace detail {

// Plant with measurement noise and a sliding (u, y) history.
class PlantHarness {
  public:
    PlantHarness(const lti::StateSpace& plant, const LoopSettings& s)
        : plant_(plant), rng_(s.rng_seed), noise_std_(s.noise_std) {
        x_ = s.x0.size() == 0 ? RealVector(RealVector::Zero(static_cast<Eigen::Index>(plant.nx()))) : s.x0;
        if (static_cast<std::size_t>(x_.size()) != plant.nx()) {
            throw InvalidInput("receding horizon: x0 has wrong dimension");
        }
        if (!(noise_std_ >= 0.0) || !std::isfinite(noise_std_)) {
            throw InvalidInput("receding horizon: noise_std must be finite and >= 0");
        }
    }

    // Applies u, returns the measured output.
    RealVector step(const RealVector& u) {
        RealVector y = plant_.C() * x_ + plant_.D() * u;
        if (noise_std_ > 0.0) {
            for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += noise_std_ * gauss_(rng_);
        }
        x_ = plant_.A() * x_ + plant_.B() * u;
        u_hist_.push_back(u);
        y_hist_.push_back(y);
        return y;
    }

    RealVector window(const std::deque<RealVector>& hist, std::size_t len) const {
        const auto ch = hist.back().size();
        RealVector w(static_cast<Eigen::Index>(len) * ch);
        const std::size_t first = hist.size() - len;
        for (std::size_t i = 0; i < len; ++i) {
            w.segment(static_cast<Eigen::Index>(i) * ch, ch) = hist[first + i];
        }
        return w;
    }

    RealVector u_window(std::size_t len) const { return window(u_hist_, len); }
    RealVector y_window(std::size_t len) const { return window(y_hist_, len); }

  private:
    const lti::StateSpace&           plant_;
    RealVector                       x_;
    std::mt19937_64                  rng_;
    std::normal_distribution<double> gauss_{0.0, 1.0};
    double                           noise_std_;
    std::deque<RealVector>           u_hist_;
    std::deque<RealVector>           y_hist_;
};

template <class Solver>
RhcResult receding_horizon(const lti::StateSpace& plant, const LoopSettings& s, Solver&& solve_first_input) {
    const std::size_t Tb = s.ocp.T_bar;
    if (s.sim_length < 1) {
        throw InvalidInput("receding horizon: sim_length must be >= 1");
    }
    if (s.warmup.length() < Tb || s.warmup.channels() != plant.nu()) {
        throw InvalidInput("receding horizon: warmup must provide at least T_bar samples of every input");
    }
    PlantHarness h(plant, s);
    for (std::size_t k = 0; k < s.warmup.length(); ++k) {
        h.step(s.warmup.sample(k));
    }

    const auto nu = static_cast<Eigen::Index>(plant.nu());
    const auto ny = static_cast<Eigen::Index>(plant.ny());
    RhcResult  r;
    RealMatrix U(static_cast<Eigen::Index>(s.sim_length), nu);
    RealMatrix Y(static_cast<Eigen::Index>(s.sim_length), ny);
    for (std::size_t k = 0; k < s.sim_length; ++k) {
        const RealVector u_past = h.u_window(Tb);
        const RealVector y_past = h.y_window(Tb);
        if (s.record_windows) {
            r.u_windows.push_back(u_past);
            r.y_windows.push_back(y_past);
        }
        RealVector   u0;
        qp::QpStatus status = solve_first_input(u_past, y_past, u0);
        r.per_step_status.push_back(status);
        if (status != qp::QpStatus::optimal) {
            throw RhcFailure(k, status);
        }
        const RealVector y = h.step(u0);
        U.row(static_cast<Eigen::Index>(k)) = u0.transpose();
        Y.row(static_cast<Eigen::Index>(k)) = y.transpose();
        r.cost_J += u0.dot(s.ocp.R * u0) + y.dot(s.ocp.Q * y);
    }
    r.u = TimeSeries(std::move(U));
    r.y = TimeSeries(std::move(Y));
    return r;
}

}  // namespace detail

/**
 * Data-driven receding-horizon control (DeePC for Hankel equations, FreePC for frequency
 * equations): solve the OCP on the current past window, apply the first input, measure, slide.
 * Throws RhcFailure on the first step whose solve is not optimal.
 */
inline RhcResult run_rhc(const lti::StateSpace& plant, const RhcConfig& cfg) {
    if (cfg.eqs.n_u != plant.nu() || cfg.eqs.n_y != plant.ny()) {
        throw InvalidInput("run_rhc: data equations do not match plant channel counts");
    }
    const auto& s = cfg.loop;
    return detail::receding_horizon(plant, s, [&](const RealVector& up, const RealVector& yp, RealVector& u0) {
        const auto prob = ocp::build_ocp(cfg.eqs, up, yp, s.ocp);
        const auto sol  = ocp::solve_ocp(prob, s.qp);
        u0              = sol.u_future.row(0).transpose();
        return sol.solver_status;
    });
}

/// Least-squares estimate of the current state from the past window using the true model.
inline RealVector estimate_state(const lti::StateSpace& plant, const RealVector& u_past, const RealVector& y_past,
                                 std::size_t T_bar) {
    const RealMatrix O  = lti::observability_matrix(plant, T_bar);
    const RealMatrix Tm = lti::toeplitz_matrix(plant, T_bar);
    const RealVector x_first = least_squares(O, y_past - Tm * u_past);
    RealVector       x       = x_first;
    const auto       nu      = static_cast<Eigen::Index>(plant.nu());
    for (std::size_t i = 0; i < T_bar; ++i) {
        x = plant.A() * x + plant.B() * u_past.segment(static_cast<Eigen::Index>(i) * nu, nu);
    }
    return x;
}

/// Model-based MPC over the same horizon, weights and boxes: y = O_T x + T_T u with x from estimate_state.
inline qp::QpProblem mpc_qp(const lti::StateSpace& plant, const ocp::OcpConfig& c, const RealVector& x) {
    const auto nu = static_cast<Eigen::Index>(plant.nu());
    const auto ny = static_cast<Eigen::Index>(plant.ny());
    const auto T  = static_cast<Eigen::Index>(c.T);
    const Eigen::Index nz = T * (nu + ny);

    qp::QpProblem q;
    q.hessian = RealMatrix::Zero(nz, nz);
    q.linear  = RealVector::Zero(nz);
    for (Eigen::Index i = 0; i < T; ++i) {
        q.hessian.block(i * nu, i * nu, nu, nu)                   = 2.0 * c.R;
        q.hessian.block(T * nu + i * ny, T * nu + i * ny, ny, ny) = 2.0 * c.Q;
    }
    q.eq_matrix = RealMatrix::Zero(T * ny, nz);
    q.eq_matrix.leftCols(T * nu)  = -lti::toeplitz_matrix(plant, c.T);
    q.eq_matrix.rightCols(T * ny) = RealMatrix::Identity(T * ny, T * ny);
    q.eq_rhs                      = lti::observability_matrix(plant, c.T) * x;

    std::vector<std::tuple<Eigen::Index, double, double>> rows;
    for (Eigen::Index i = 0; i < T; ++i) {
        for (Eigen::Index ch = 0; ch < nu && !c.u_box.empty(); ++ch) {
            const auto& b = c.u_box[static_cast<std::size_t>(ch)];
            rows.emplace_back(i * nu + ch, b.lo, b.hi);
        }
        for (Eigen::Index ch = 0; ch < ny && !c.y_box.empty(); ++ch) {
            const auto& b = c.y_box[static_cast<std::size_t>(ch)];
            rows.emplace_back(T * nu + i * ny + ch, b.lo, b.hi);
        }
    }
    const auto nin = static_cast<Eigen::Index>(rows.size());
    q.ineq_matrix  = RealMatrix::Zero(nin, nz);
    q.ineq_lo.resize(nin);
    q.ineq_hi.resize(nin);
    for (Eigen::Index r = 0; r < nin; ++r) {
        const auto& [idx, lo, hi] = rows[static_cast<std::size_t>(r)];
        q.ineq_matrix(r, idx)     = 1.0;
        q.ineq_lo(r)              = lo;
        q.ineq_hi(r)              = hi;
    }
    return q;
}

inline RhcResult run_mpc_benchmark(const lti::StateSpace& plant, const LoopSettings& s) {
    ocp::validate(s.ocp, plant.nu(), plant.ny());
    return detail::receding_horizon(plant, s, [&](const RealVector& up, const RealVector& yp, RealVector& u0) {
        const RealVector x   = estimate_state(plant, up, yp, s.ocp.T_bar);
        const auto       res = qp::solve_qp(mpc_qp(plant, s.ocp, x), s.qp);
        u0                   = res.z.head(static_cast<Eigen::Index>(plant.nu()));
        return res.status;
    });
}

struct MonteCarloConfig {
    frf::ClosedLoopExperiment experiment;  // excitation.periods is replaced by each P
    LoopSettings              loop;
    std::vector<std::size_t>  periods_list;
    std::size_t               runs    = 2;
    std::uint64_t             seed    = 0;
    std::size_t               workers = 1;
    bool                      regenerate_phases = false;
};

struct MonteCarloRow {
    std::size_t periods  = 0;
    std::size_t runs     = 0;
    std::size_t failures = 0;
    double      mean_J   = 0.0;
    double      var_J    = 0.0;  // unbiased
};

// Independent per-run seed derived from (master, P, run, stream).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t P, std::uint64_t run, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                      static_cast<std::uint32_t>(P), static_cast<std::uint32_t>(run),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

/// One FreePC run: closed-loop experiment with P periods -> FRF -> frequency data -> receding horizon.
inline RhcResult freepc_run(const MonteCarloConfig& cfg, std::size_t P, std::size_t run) {
    frf::ClosedLoopExperiment exp = cfg.experiment;
    exp.excitation.periods        = P;
    exp.rng_seed                  = derive_seed(cfg.seed, P, run, 0);
    if (cfg.regenerate_phases) {
        std::mt19937_64                        rng(derive_seed(cfg.seed, P, run, 2));
        std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
        for (auto& ph : exp.excitation.phases) ph = phase(rng);
    }
    const auto data = frf::run_experiment(exp);
    const auto est  = frf::estimate_frf(data.d, data.u, data.y, exp.excitation.period_length,
                                        exp.excitation.frequencies);
    const auto fd   = freqdomain::frf_to_freq_data(est.frequencies, est.g_hat);

    RhcConfig rc{freqdomain::freq_data_equations(fd, cfg.loop.ocp.T_bar + cfg.loop.ocp.T), cfg.loop};
    rc.loop.rng_seed = derive_seed(cfg.seed, P, run, 1);
    return run_rhc(exp.plant, rc);
}

inline std::vector<MonteCarloRow> monte_carlo(const MonteCarloConfig& cfg) {
    if (cfg.runs < 2) {
        throw InvalidInput("monte_carlo: at least two runs are required");
    }
    const std::size_t   nP    = cfg.periods_list.size();
    const std::size_t   total = nP * cfg.runs;
    std::vector<double> J(total, std::nan(""));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t task = next++; task < total; task = next++) {
            const std::size_t ip  = task / cfg.runs;
            const std::size_t run = task % cfg.runs;
            try {
                J[task] = freepc_run(cfg, cfg.periods_list[ip], run).cost_J;
            } catch (const RhcFailure&) {
                // recorded as a failure below
            } catch (const SingularityError&) {
            }
        }
    };
    const std::size_t        nw = std::max<std::size_t>(1, std::min(cfg.workers, total));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < nw; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::vector<MonteCarloRow> rows;
    for (std::size_t ip = 0; ip < nP; ++ip) {
        MonteCarloRow row;
        row.periods = cfg.periods_list[ip];
        row.runs    = cfg.runs;
        std::vector<double> ok;
        for (std::size_t r = 0; r < cfg.runs; ++r) {
            const double j = J[ip * cfg.runs + r];
            if (std::isnan(j)) {
                ++row.failures;
            } else {
                ok.push_back(j);
            }
        }
        if (!ok.empty()) {
            double sum = 0.0;
            for (double j : ok) sum += j;
            row.mean_J = sum / static_cast<double>(ok.size());
        } else {
            row.mean_J = std::nan("");
        }
        if (ok.size() >= 2) {
            double ss = 0.0;
            for (double j : ok) ss += (j - row.mean_J) * (j - row.mean_J);
            row.var_J = ss / static_cast<double>(ok.size() - 1);
        } else {
            row.var_J = std::nan("");
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace freepc::simloop

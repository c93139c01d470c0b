#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include "numcore.hpp"

namespace freepc::qp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/**
 * minimize    0.5 z' H z + c' z
 * subject to  E z = e
 *             lo <= G z <= hi      (entries of lo/hi may be -inf/+inf)
 */
struct QpProblem {
    RealMatrix hessian;
    RealVector linear;
    RealMatrix eq_matrix;
    RealVector eq_rhs;
    RealMatrix ineq_matrix;
    RealVector ineq_lo;
    RealVector ineq_hi;
    // Optional positive column scaling: the solver works in w with z = diag(scaling) w.
    // Useful when some variables carry very large cost weights.
    RealVector scaling;

    Eigen::Index size() const { return linear.size(); }

    double objective(const RealVector& z) const { return 0.5 * z.dot(hessian * z) + linear.dot(z); }
};

enum class QpStatus { optimal, max_iter, infeasible, unbounded };

inline std::string_view to_string(QpStatus s) {
    switch (s) {
        case QpStatus::optimal: return "optimal";
        case QpStatus::max_iter: return "max_iter";
        case QpStatus::infeasible: return "infeasible";
        case QpStatus::unbounded: return "unbounded";
    }
    return "unknown";
}

struct QpSettings {
    double      tol      = 1e-9;
    std::size_t max_iter = 200;
    // Relative singular-value cutoff used to drop redundant equality rows and cost-free directions.
    double rank_tol = 1e-10;
    // Equalities are declared inconsistent when the least-squares residual exceeds eq_tol * (1 + |e|).
    double eq_tol = 1e-8;
    // Static diagonal shift on the reduced KKT matrix.
    double kkt_shift = 1e-12;
};

struct QpResult {
    RealVector  z;
    QpStatus    status     = QpStatus::max_iter;
    double      objective  = 0.0;
    double      eq_residual   = 0.0;  // |E z - e|_inf
    double      ineq_violation = 0.0;  // max(lo - G z, G z - hi, 0)
    double      dual_residual  = 0.0;  // reduced-space stationarity, inf-norm
    double      gap            = 0.0;  // mean complementarity s'lambda / m
    std::size_t iterations     = 0;
};

namespace detail {

// min 0.5 v'Pv + q'v  s.t.  Gv >= h, with P + G'G positive definite on the whole space.
struct InequalityQp {
    RealMatrix P;
    RealVector q;
    RealMatrix G;
    RealVector h;
};

struct IpmOutcome {
    RealVector  v;
    RealVector  s;
    RealVector  lambda;
    bool        converged  = false;
    double      dual_res   = 0.0;
    double      primal_res = 0.0;
    double      mu         = 0.0;
    std::size_t iterations = 0;
};

inline double max_step(const RealVector& x, const RealVector& dx) {
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (dx(i) < 0.0) {
            alpha = std::min(alpha, -x(i) / dx(i));
        }
    }
    return alpha;
}

inline double inf_norm(const RealVector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Mehrotra predictor-corrector primal-dual interior point method.
inline IpmOutcome interior_point(const InequalityQp& qp, const QpSettings& cfg) {
    const Eigen::Index n = qp.q.size();
    const Eigen::Index m = qp.h.size();
    IpmOutcome         out;

    const RealMatrix shift = cfg.kkt_shift * RealMatrix::Identity(n, n);
    if (m == 0) {
        Eigen::LDLT<RealMatrix> ldlt(qp.P + shift);
        out.v         = ldlt.solve(-qp.q);
        out.s         = RealVector{};
        out.lambda    = RealVector{};
        out.dual_res  = inf_norm(qp.P * out.v + qp.q);
        out.converged = out.dual_res <= cfg.tol * (1.0 + inf_norm(qp.q));
        return out;
    }

    // Starting point: v minimizes 0.5 v'Pv + q'v + 0.5 |Gv - h|^2, which makes lambda = h - Gv dual
    // feasible; s and lambda are then shifted into the positive orthant.
    RealVector v;
    {
        Eigen::LDLT<RealMatrix> ldlt(qp.P + qp.G.transpose() * qp.G + shift);
        v = ldlt.solve(-qp.q + qp.G.transpose() * qp.h);
    }
    RealVector s      = qp.G * v - qp.h;
    RealVector lambda = -s;
    auto shift_positive = [](RealVector& x) {
        const double a = -x.minCoeff();
        if (a >= -1e-8) {
            x.array() += 1.0 + std::max(a, 0.0);
        }
    };
    shift_positive(s);
    shift_positive(lambda);

    const double q_scale = 1.0 + inf_norm(qp.q);
    const double h_scale = 1.0 + inf_norm(qp.h);

    for (std::size_t it = 0; it < cfg.max_iter; ++it) {
        const RealVector Gt_lambda = qp.G.transpose() * lambda;
        const RealVector Pv        = qp.P * v;
        const RealVector rd        = Pv + qp.q - Gt_lambda;
        const RealVector rp        = qp.G * v - s - qp.h;
        const double     mu        = s.dot(lambda) / static_cast<double>(m);

        out.iterations = it;
        out.dual_res   = inf_norm(rd);
        out.primal_res = inf_norm(rp);
        out.mu         = mu;
        const double d_scale = std::max({q_scale, inf_norm(Pv), inf_norm(Gt_lambda)});
        if (out.dual_res <= cfg.tol * d_scale && out.primal_res <= cfg.tol * h_scale && mu <= 1e-2 * cfg.tol) {
            out.converged = true;
            break;
        }
        if (!std::isfinite(mu) || !std::isfinite(out.dual_res) || !std::isfinite(out.primal_res)) {
            break;
        }
        // Diverging multipliers signal an empty feasible set; let phase one decide.
        if (inf_norm(lambda) > 1e13 * q_scale) {
            break;
        }

        const RealVector        ratio = lambda.cwiseQuotient(s);
        const RealMatrix        K     = qp.P + qp.G.transpose() * ratio.asDiagonal() * qp.G + shift;
        Eigen::LDLT<RealMatrix> ldlt(K);
        if (ldlt.info() != Eigen::Success) {
            break;
        }

        auto solve_direction = [&](const RealVector& rc, RealVector& dv, RealVector& ds, RealVector& dl) {
            const RealVector tmp = (rc - lambda.cwiseProduct(rp)).cwiseQuotient(s);
            dv                   = ldlt.solve(-rd + qp.G.transpose() * tmp);
            ds                   = qp.G * dv + rp;
            dl                   = (rc - lambda.cwiseProduct(ds)).cwiseQuotient(s);
            // Iterative refinement of the stationarity row; K is badly conditioned near the solution.
            for (int pass = 0; pass < 3; ++pass) {
                const RealVector err = qp.P * dv - qp.G.transpose() * dl + rd;
                if (inf_norm(err) <= 1e-15 * (1.0 + inf_norm(rd))) break;
                const RealVector delta = ldlt.solve(-err);
                dv += delta;
                ds = qp.G * dv + rp;
                dl = (rc - lambda.cwiseProduct(ds)).cwiseQuotient(s);
            }
        };

        RealVector dv, ds, dl;
        const RealVector rc_aff = -s.cwiseProduct(lambda);
        solve_direction(rc_aff, dv, ds, dl);
        const double a_aff  = std::min(max_step(s, ds), max_step(lambda, dl));
        const double mu_aff = (s + a_aff * ds).dot(lambda + a_aff * dl) / static_cast<double>(m);
        const double sigma  = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

        const RealVector rc = rc_aff - ds.cwiseProduct(dl) + RealVector::Constant(m, sigma * mu);
        solve_direction(rc, dv, ds, dl);
        double a_max = std::min(max_step(s, ds), max_step(lambda, dl));
        double alpha = std::min(1.0, 0.995 * a_max);
        // The second-order correction can make Mehrotra's method cycle; fall back to a plain
        // centered step whenever the combined step does not reduce complementarity.
        if ((s + alpha * ds).dot(lambda + alpha * dl) / static_cast<double>(m) > (1.0 - 0.1 * alpha) * mu) {
            const RealVector rc_centered = rc_aff + RealVector::Constant(m, 0.1 * mu);
            solve_direction(rc_centered, dv, ds, dl);
            a_max = std::min(max_step(s, ds), max_step(lambda, dl));
            alpha = std::min(1.0, 0.995 * a_max);
        }

        v += alpha * dv;
        s += alpha * ds;
        lambda += alpha * dl;
        out.iterations = it + 1;
    }
    out.v      = std::move(v);
    out.s      = std::move(s);
    out.lambda = std::move(lambda);
    return out;
}

// Orthonormal basis of the row space of `m` (right singular vectors above the cutoff) and its complement.
struct RowSpaceSplit {
    RealMatrix range;
    RealMatrix null;
    RealVector singular_values;
    RealMatrix U;
};

inline RowSpaceSplit split_row_space(const RealMatrix& m, Eigen::Index n, double rank_tol) {
    RowSpaceSplit out;
    if (m.rows() == 0 || n == 0) {
        out.range = RealMatrix(n, 0);
        out.null  = RealMatrix::Identity(n, n);
        return out;
    }
    Eigen::JacobiSVD<RealMatrix> svd(m, Eigen::ComputeFullV | Eigen::ComputeThinU);
    const RealVector& sv   = svd.singularValues();
    Eigen::Index      rank = 0;
    const double      cut  = sv.size() > 0 ? rank_tol * sv(0) : 0.0;
    while (rank < sv.size() && sv(rank) > cut) {
        ++rank;
    }
    out.range           = svd.matrixV().leftCols(rank);
    out.null            = svd.matrixV().rightCols(n - rank);
    out.singular_values = sv.head(rank);
    out.U               = svd.matrixU().leftCols(rank);
    return out;
}

}  // namespace detail

/**
 * Dense convex QP solver.
 *
 * Equalities are removed by a null-space parametrization z = z0 + N w (redundant rows are
 * dropped, inconsistent ones reported as infeasible); directions that neither the Hessian
 * nor any inequality sees are then dropped, so the returned minimizer has minimum norm
 * along them. The remaining inequality QP is solved with a Mehrotra interior-point method.
 * When that does not converge, a phase-one problem decides between `infeasible` and `max_iter`.
 */
inline QpResult solve_qp(const QpProblem& qp, const QpSettings& cfg = {}) {
    const Eigen::Index n = qp.size();
    if (qp.hessian.rows() != n || qp.hessian.cols() != n || qp.eq_matrix.cols() != n ||
        qp.eq_matrix.rows() != qp.eq_rhs.size() || qp.ineq_matrix.cols() != n ||
        qp.ineq_matrix.rows() != qp.ineq_lo.size() || qp.ineq_matrix.rows() != qp.ineq_hi.size()) {
        throw InvalidInput("solve_qp: inconsistent problem dimensions");
    }
    require_finite(qp.hessian, "solve_qp hessian");
    require_finite(qp.linear, "solve_qp linear");
    require_finite(qp.eq_matrix, "solve_qp eq_matrix");
    require_finite(qp.eq_rhs, "solve_qp eq_rhs");
    require_finite(qp.ineq_matrix, "solve_qp ineq_matrix");

    if (qp.scaling.size() > 0) {
        if (qp.scaling.size() != n || !all_finite(qp.scaling) || qp.scaling.minCoeff() <= 0.0) {
            throw InvalidInput("solve_qp: scaling must be finite, positive and match the variable count");
        }
        const auto D = qp.scaling.asDiagonal();
        QpProblem  scaled{D * qp.hessian * D, D * qp.linear, qp.eq_matrix * D, qp.eq_rhs,
                         qp.ineq_matrix * D, qp.ineq_lo, qp.ineq_hi, RealVector{}};
        QpResult out = solve_qp(scaled, cfg);
        out.z        = qp.scaling.cwiseProduct(out.z);
        out.objective = qp.objective(out.z);
        return out;
    }

    QpResult result;
    result.z = RealVector::Zero(n);

    // One-sided form G1 z >= h1.
    std::vector<Eigen::Index> lo_rows, hi_rows;
    for (Eigen::Index i = 0; i < qp.ineq_lo.size(); ++i) {
        const double lo = qp.ineq_lo(i), hi = qp.ineq_hi(i);
        if (std::isnan(lo) || std::isnan(hi) || lo == kInf || hi == -kInf) {
            throw InvalidInput("solve_qp: invalid inequality bounds");
        }
        if (lo > hi) {
            result.status = QpStatus::infeasible;
            return result;
        }
        if (lo > -kInf) lo_rows.push_back(i);
        if (hi < kInf) hi_rows.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(lo_rows.size() + hi_rows.size());
    RealMatrix G(m, n);
    RealVector h(m);
    {
        Eigen::Index r = 0;
        for (auto i : lo_rows) {
            G.row(r) = qp.ineq_matrix.row(i);
            h(r++)   = qp.ineq_lo(i);
        }
        for (auto i : hi_rows) {
            G.row(r) = -qp.ineq_matrix.row(i);
            h(r++)   = -qp.ineq_hi(i);
        }
        // Unit row norms keep slack and multiplier magnitudes comparable across rows.
        for (Eigen::Index i = 0; i < m; ++i) {
            const double norm = G.row(i).cwiseAbs().maxCoeff();
            if (norm > 0.0) {
                G.row(i) /= norm;
                h(i) /= norm;
            }
        }
    }

    // Null-space parametrization of the equalities.
    RealVector z0 = RealVector::Zero(n);
    RealMatrix N  = RealMatrix::Identity(n, n);
    if (qp.eq_matrix.rows() > 0) {
        const auto split = detail::split_row_space(qp.eq_matrix, n, cfg.rank_tol);
        if (split.range.cols() > 0) {
            z0 = split.range *
                 (split.U.transpose() * qp.eq_rhs).cwiseQuotient(split.singular_values);
        }
        N = split.null;
        const double res = detail::inf_norm(qp.eq_matrix * z0 - qp.eq_rhs);
        if (res > cfg.eq_tol * (1.0 + detail::inf_norm(qp.eq_rhs))) {
            result.status      = QpStatus::infeasible;
            result.z           = z0;
            result.eq_residual = res;
            return result;
        }
    }

    RealMatrix P  = N.transpose() * qp.hessian * N;
    P             = 0.5 * (P + P.transpose());
    RealVector q  = N.transpose() * (qp.hessian * z0 + qp.linear);
    RealMatrix Gr = G * N;
    RealVector hr = h - G * z0;

    // Drop directions with no curvature and no constraint.
    RealMatrix R;
    {
        RealMatrix stacked(P.rows() + Gr.rows(), N.cols());
        stacked << P, Gr;
        const auto split = detail::split_row_space(stacked, N.cols(), cfg.rank_tol);
        R                = split.range;
        if (split.null.cols() > 0) {
            const double leak = detail::inf_norm(split.null.transpose() * q);
            if (leak > cfg.tol * (1.0 + detail::inf_norm(q)) * 1e3) {
                result.status = QpStatus::unbounded;
                result.z      = z0;
                return result;
            }
        }
    }

    detail::InequalityQp reduced{R.transpose() * P * R, R.transpose() * q, Gr * R, hr};
    const auto           ipm = detail::interior_point(reduced, cfg);

    result.iterations    = ipm.iterations;
    result.dual_residual = ipm.dual_res;
    result.gap           = ipm.mu;
    result.z             = z0 + N * (R * ipm.v);
    result.objective     = qp.objective(result.z);
    result.eq_residual   = qp.eq_matrix.rows() > 0 ? detail::inf_norm(qp.eq_matrix * result.z - qp.eq_rhs) : 0.0;
    if (qp.ineq_matrix.rows() > 0) {
        const RealVector Gz  = qp.ineq_matrix * result.z;
        const RealVector lov = qp.ineq_lo - Gz;
        const RealVector hiv = Gz - qp.ineq_hi;
        result.ineq_violation = std::max({0.0, lov.maxCoeff(), hiv.maxCoeff()});
    }

    if (ipm.converged) {
        result.status = QpStatus::optimal;
        return result;
    }

    // Phase one: min t + eps/2 |v|^2  s.t.  G v + t >= h,  t >= 0.
    const Eigen::Index   k  = reduced.q.size();
    const Eigen::Index   mm = reduced.h.size();
    detail::InequalityQp phase1;
    phase1.P = RealMatrix::Zero(k + 1, k + 1);
    phase1.P.topLeftCorner(k, k) = 1e-8 * RealMatrix::Identity(k, k);
    phase1.q = RealVector::Zero(k + 1);
    phase1.q(k) = 1.0;
    phase1.G = RealMatrix::Zero(mm + 1, k + 1);
    phase1.G.topLeftCorner(mm, k) = reduced.G;
    phase1.G.col(k).head(mm).setOnes();
    phase1.G(mm, k) = 1.0;
    phase1.h = RealVector::Zero(mm + 1);
    phase1.h.head(mm) = reduced.h;
    QpSettings p1cfg = cfg;
    p1cfg.tol        = 1e-10;
    const auto p1    = detail::interior_point(phase1, p1cfg);
    const double t   = p1.v.size() > 0 ? p1.v(k) : 0.0;
    if (t > 1e-7 * (1.0 + detail::inf_norm(reduced.h))) {
        result.status = QpStatus::infeasible;
    } else {
        result.status = QpStatus::max_iter;
    }
    return result;
}

}  // namespace freepc::qp

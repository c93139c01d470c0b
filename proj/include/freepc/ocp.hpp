#pragma once

#include <cmath>
#include <vector>

#include "freqdomain.hpp"
#include "numcore.hpp"
#include "qp.hpp"

namespace freepc::ocp {

struct Box {
    double lo = -qp::kInf;
    double hi = qp::kInf;
};

struct OcpConfig {
    std::size_t      T      = 1;  // prediction horizon
    std::size_t      T_bar  = 1;  // past window
    RealMatrix       Q      = RealMatrix::Identity(1, 1);
    RealMatrix       R      = RealMatrix::Identity(1, 1);
    double           lambda_g     = 0.0;
    double           lambda_sigma = 0.0;
    std::vector<Box> u_box;  // per input channel; empty = unconstrained
    std::vector<Box> y_box;  // per output channel
    bool             nominal = false;  // lambda_g = 0 and sigma = 0
};

inline void validate(const OcpConfig& c, std::size_t n_u, std::size_t n_y) {
    if (c.T < 1 || c.T_bar < 1) {
        throw InvalidInput("OcpConfig: T and T_bar must be >= 1");
    }
    auto check_weight = [](const RealMatrix& W, std::size_t n, const char* name) {
        if (W.rows() != static_cast<Eigen::Index>(n) || W.cols() != static_cast<Eigen::Index>(n)) {
            throw InvalidInput(std::string("OcpConfig: ") + name + " has wrong dimensions");
        }
        require_finite(W, name);
        if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + W.cwiseAbs().maxCoeff())) {
            throw InvalidInput(std::string("OcpConfig: ") + name + " is not symmetric");
        }
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(W);
        if (es.eigenvalues().minCoeff() < -1e-12 * (1.0 + es.eigenvalues().cwiseAbs().maxCoeff())) {
            throw InvalidInput(std::string("OcpConfig: ") + name + " is not positive semidefinite");
        }
    };
    check_weight(c.Q, n_y, "Q");
    check_weight(c.R, n_u, "R");
    if (!(c.lambda_g >= 0.0) || !(c.lambda_sigma >= 0.0) || !std::isfinite(c.lambda_g) ||
        !std::isfinite(c.lambda_sigma)) {
        throw InvalidInput("OcpConfig: regularization weights must be finite and >= 0");
    }
    auto check_box = [](const std::vector<Box>& b, std::size_t n, const char* name) {
        if (!b.empty() && b.size() != n) {
            throw InvalidInput(std::string("OcpConfig: ") + name + " needs one interval per channel");
        }
        for (const auto& iv : b) {
            if (std::isnan(iv.lo) || std::isnan(iv.hi) || iv.lo > iv.hi) {
                throw InvalidInput(std::string("OcpConfig: ") + name + " has lo > hi");
            }
        }
    };
    check_box(c.u_box, n_u, "u_box");
    check_box(c.y_box, n_y, "y_box");
}

struct OcpProblem {
    freqdomain::DataEquations eqs;
    RealVector                u_past;
    RealVector                y_past;
    OcpConfig                 config;

    std::size_t n_u() const { return eqs.n_u; }
    std::size_t n_y() const { return eqs.n_y; }
};

inline OcpProblem build_ocp(freqdomain::DataEquations eqs, RealVector u_past, RealVector y_past, OcpConfig config) {
    const std::size_t n_u = eqs.n_u, n_y = eqs.n_y;
    validate(config, n_u, n_y);
    if (eqs.depth != config.T + config.T_bar) {
        throw InvalidInput("build_ocp: data equation depth must equal T_bar + T");
    }
    if (eqs.matrix.rows() != static_cast<Eigen::Index>(eqs.lhs_dim())) {
        throw InvalidInput("build_ocp: data matrix row count does not match (n_u + n_y) * depth");
    }
    if (u_past.size() != static_cast<Eigen::Index>(config.T_bar * n_u) ||
        y_past.size() != static_cast<Eigen::Index>(config.T_bar * n_y)) {
        throw InvalidInput("build_ocp: past window has wrong length");
    }
    require_finite(eqs.matrix, "build_ocp data matrix");
    require_finite(u_past, "build_ocp u_past");
    require_finite(y_past, "build_ocp y_past");
    if (config.nominal) {
        config.lambda_g     = 0.0;
        config.lambda_sigma = 0.0;
    }
    return {std::move(eqs), std::move(u_past), std::move(y_past), std::move(config)};
}

// Offsets of each block in the stacked QP variable z = (u, y, g, sigma, t_g, t_sigma).
struct VariableLayout {
    struct Block {
        Eigen::Index offset = 0;
        Eigen::Index size   = 0;
    };
    Block u, y, g, sigma, t_g, t_sigma;

    Eigen::Index total() const { return t_sigma.offset + t_sigma.size; }
};

struct QpFormulation {
    qp::QpProblem  qp;
    VariableLayout layout;
};

/**
 * Equalities (rows of the data matrix split in four blocks):
 *   past u   : M_up g            = u_past
 *   future u : M_uf g - u        = 0
 *   past y   : M_yp g - sigma    = y_past
 *   future y : M_yf g - y        = 0
 * The l1 terms use epigraph variables t >= |.| (two linear inequalities each). Epigraph
 * variables are omitted in nominal mode and whenever their weight is zero.
 */
inline QpFormulation to_qp(const OcpProblem& p) {
    const auto& c   = p.config;
    const auto  n_u = static_cast<Eigen::Index>(p.n_u());
    const auto  n_y = static_cast<Eigen::Index>(p.n_y());
    const auto  T   = static_cast<Eigen::Index>(c.T);
    const auto  Tb  = static_cast<Eigen::Index>(c.T_bar);
    const auto  w   = static_cast<Eigen::Index>(p.eqs.width());

    const bool use_sigma = !c.nominal;
    const bool use_tg    = !c.nominal && c.lambda_g > 0.0;
    const bool use_ts    = use_sigma && c.lambda_sigma > 0.0;

    VariableLayout L;
    L.u       = {0, T * n_u};
    L.y       = {L.u.offset + L.u.size, T * n_y};
    L.g       = {L.y.offset + L.y.size, w};
    L.sigma   = {L.g.offset + L.g.size, use_sigma ? Tb * n_y : 0};
    L.t_g     = {L.sigma.offset + L.sigma.size, use_tg ? w : 0};
    L.t_sigma = {L.t_g.offset + L.t_g.size, use_ts ? Tb * n_y : 0};
    const Eigen::Index nz = L.total();

    qp::QpProblem q;
    q.hessian = RealMatrix::Zero(nz, nz);
    q.linear  = RealVector::Zero(nz);
    for (Eigen::Index i = 0; i < T; ++i) {
        q.hessian.block(L.u.offset + i * n_u, L.u.offset + i * n_u, n_u, n_u) = 2.0 * c.R;
        q.hessian.block(L.y.offset + i * n_y, L.y.offset + i * n_y, n_y, n_y) = 2.0 * c.Q;
    }
    if (use_tg) q.linear.segment(L.t_g.offset, L.t_g.size).setConstant(c.lambda_g);
    if (use_ts) q.linear.segment(L.t_sigma.offset, L.t_sigma.size).setConstant(c.lambda_sigma);

    const auto& M   = p.eqs.matrix;
    const auto  ru  = (Tb + T) * n_u;
    const auto  neq = M.rows();
    q.eq_matrix     = RealMatrix::Zero(neq, nz);
    q.eq_rhs        = RealVector::Zero(neq);
    q.eq_matrix.middleCols(L.g.offset, w) = M;
    q.eq_rhs.head(Tb * n_u)               = p.u_past;
    q.eq_matrix.block(Tb * n_u, L.u.offset, T * n_u, T * n_u) -= RealMatrix::Identity(T * n_u, T * n_u);
    q.eq_rhs.segment(ru, Tb * n_y) = p.y_past;
    if (use_sigma) {
        q.eq_matrix.block(ru, L.sigma.offset, Tb * n_y, Tb * n_y) -= RealMatrix::Identity(Tb * n_y, Tb * n_y);
    }
    q.eq_matrix.block(ru + Tb * n_y, L.y.offset, T * n_y, T * n_y) -= RealMatrix::Identity(T * n_y, T * n_y);

    // Inequalities: boxes, then epigraphs.
    std::vector<std::pair<Eigen::Index, Box>> boxes;
    for (Eigen::Index i = 0; i < T; ++i) {
        for (Eigen::Index ch = 0; ch < n_u && !c.u_box.empty(); ++ch) {
            const auto& b = c.u_box[static_cast<std::size_t>(ch)];
            if (b.lo > -qp::kInf || b.hi < qp::kInf) boxes.emplace_back(L.u.offset + i * n_u + ch, b);
        }
        for (Eigen::Index ch = 0; ch < n_y && !c.y_box.empty(); ++ch) {
            const auto& b = c.y_box[static_cast<std::size_t>(ch)];
            if (b.lo > -qp::kInf || b.hi < qp::kInf) boxes.emplace_back(L.y.offset + i * n_y + ch, b);
        }
    }
    const Eigen::Index nin = static_cast<Eigen::Index>(boxes.size()) + 2 * L.t_g.size + 2 * L.t_sigma.size;
    q.ineq_matrix          = RealMatrix::Zero(nin, nz);
    q.ineq_lo              = RealVector::Constant(nin, 0.0);
    q.ineq_hi              = RealVector::Constant(nin, qp::kInf);
    Eigen::Index row       = 0;
    for (const auto& [idx, b] : boxes) {
        q.ineq_matrix(row, idx) = 1.0;
        q.ineq_lo(row)          = b.lo;
        q.ineq_hi(row)          = b.hi;
        ++row;
    }
    auto add_epigraph = [&](const VariableLayout::Block& var, const VariableLayout::Block& t) {
        for (Eigen::Index i = 0; i < t.size; ++i) {
            q.ineq_matrix(row, t.offset + i)   = 1.0;  // t - x >= 0
            q.ineq_matrix(row, var.offset + i) = -1.0;
            ++row;
            q.ineq_matrix(row, t.offset + i)   = 1.0;  // t + x >= 0
            q.ineq_matrix(row, var.offset + i) = 1.0;
            ++row;
        }
    };
    add_epigraph(L.g, L.t_g);
    add_epigraph(L.sigma, L.t_sigma);

    // A large l1 weight makes the epigraph multipliers huge; measuring the variable and its
    // bound in units of 1/weight keeps the interior-point iterates well scaled.
    q.scaling = RealVector::Ones(nz);
    if (use_tg && c.lambda_g > 1.0) {
        q.scaling.segment(L.g.offset, L.g.size).setConstant(1.0 / c.lambda_g);
        q.scaling.segment(L.t_g.offset, L.t_g.size).setConstant(1.0 / c.lambda_g);
    }
    if (use_ts && c.lambda_sigma > 1.0) {
        q.scaling.segment(L.sigma.offset, L.sigma.size).setConstant(1.0 / c.lambda_sigma);
        q.scaling.segment(L.t_sigma.offset, L.t_sigma.size).setConstant(1.0 / c.lambda_sigma);
    }
    return {std::move(q), L};
}

struct OcpSolution {
    RealMatrix   u_future;  // T x n_u
    RealMatrix   y_future;  // T x n_y
    RealVector   g;
    RealVector   sigma;     // T_bar * n_y (zeros in nominal mode)
    double       objective = 0.0;
    qp::QpStatus solver_status = qp::QpStatus::max_iter;
    qp::QpResult qp_result;
};

inline RealMatrix reshape_rows(const RealVector& v, Eigen::Index rows, Eigen::Index cols) {
    RealMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        m.row(r) = v.segment(r * cols, cols).transpose();
    }
    return m;
}

/// Stage cost sum plus the l1 regularizers evaluated at (u, y, g, sigma).
inline double ocp_objective(const OcpConfig& c, const RealMatrix& u, const RealMatrix& y, const RealVector& g,
                            const RealVector& sigma) {
    double J = 0.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
        J += u.row(i) * c.R * u.row(i).transpose();
        J += y.row(i) * c.Q * y.row(i).transpose();
    }
    if (!c.nominal) {
        J += c.lambda_g * g.lpNorm<1>() + c.lambda_sigma * sigma.lpNorm<1>();
    }
    return J;
}

inline OcpSolution solve_ocp(const OcpProblem& p, const qp::QpSettings& settings = {}) {
    const auto f   = to_qp(p);
    const auto res = qp::solve_qp(f.qp, settings);
    const auto& L  = f.layout;
    const auto  T  = static_cast<Eigen::Index>(p.config.T);

    OcpSolution sol;
    sol.qp_result     = res;
    sol.solver_status = res.status;
    sol.u_future      = reshape_rows(res.z.segment(L.u.offset, L.u.size), T, static_cast<Eigen::Index>(p.n_u()));
    sol.y_future      = reshape_rows(res.z.segment(L.y.offset, L.y.size), T, static_cast<Eigen::Index>(p.n_y()));
    sol.g             = res.z.segment(L.g.offset, L.g.size);
    sol.sigma         = L.sigma.size > 0 ? RealVector(res.z.segment(L.sigma.offset, L.sigma.size))
                                         : RealVector(RealVector::Zero(static_cast<Eigen::Index>(p.config.T_bar * p.n_y())));
    sol.objective     = ocp_objective(p.config, sol.u_future, sol.y_future, sol.g, sol.sigma);
    return sol;
}

}  // namespace freepc::ocp

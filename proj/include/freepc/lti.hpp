#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "numcore.hpp"
#include "time_series.hpp"

namespace freepc::lti {

/**
 * Discrete-time LTI system
 *   x_{k+1} = A x_k + B u_k
 *   y_k     = C x_k + D u_k
 * n_x may be zero (static gain).
 */
class StateSpace {
  public:
    StateSpace() = default;

    StateSpace(RealMatrix A, RealMatrix B, RealMatrix C, RealMatrix D)
        : A_(std::move(A)), B_(std::move(B)), C_(std::move(C)), D_(std::move(D)) {
        const auto nx = A_.rows();
        if (A_.cols() != nx || B_.rows() != nx || C_.cols() != nx || D_.rows() != C_.rows() ||
            D_.cols() != B_.cols()) {
            throw InvalidInput("StateSpace: inconsistent matrix dimensions");
        }
        require_finite(A_, "StateSpace A");
        require_finite(B_, "StateSpace B");
        require_finite(C_, "StateSpace C");
        require_finite(D_, "StateSpace D");
    }

    static StateSpace static_gain(const RealMatrix& D) {
        return StateSpace(RealMatrix(0, 0), RealMatrix(0, D.cols()), RealMatrix(D.rows(), 0), D);
    }

    const RealMatrix& A() const { return A_; }
    const RealMatrix& B() const { return B_; }
    const RealMatrix& C() const { return C_; }
    const RealMatrix& D() const { return D_; }

    std::size_t nx() const { return static_cast<std::size_t>(A_.rows()); }
    std::size_t nu() const { return static_cast<std::size_t>(B_.cols()); }
    std::size_t ny() const { return static_cast<std::size_t>(C_.rows()); }

  private:
    RealMatrix A_{0, 0};
    RealMatrix B_{0, 1};
    RealMatrix C_{1, 0};
    RealMatrix D_{RealMatrix::Zero(1, 1)};
};

// Coefficients in descending powers of z.
class SisoTransferFunction {
  public:
    SisoTransferFunction(std::vector<double> num, std::vector<double> den) : num_(std::move(num)), den_(std::move(den)) {
        trim(num_);
        trim(den_);
        if (den_.empty()) {
            throw InvalidInput("SisoTransferFunction: zero denominator");
        }
        if (num_.empty()) {
            num_ = {0.0};
        }
        for (double c : num_) {
            if (!std::isfinite(c)) throw InvalidInput("SisoTransferFunction: non-finite numerator");
        }
        for (double c : den_) {
            if (!std::isfinite(c)) throw InvalidInput("SisoTransferFunction: non-finite denominator");
        }
        if (num_.size() > den_.size()) {
            throw InvalidInput("SisoTransferFunction: improper (deg num > deg den)");
        }
    }

    const std::vector<double>& num() const { return num_; }
    const std::vector<double>& den() const { return den_; }
    std::size_t                order() const { return den_.size() - 1; }

    Complex evaluate(Complex z) const { return horner(num_, z) / horner(den_, z); }

  private:
    static void trim(std::vector<double>& c) {
        std::size_t lead = 0;
        while (lead < c.size() && c[lead] == 0.0) {
            ++lead;
        }
        c.erase(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(lead));
    }

    static Complex horner(const std::vector<double>& c, Complex z) {
        Complex acc{0.0, 0.0};
        for (double ci : c) {
            acc = acc * z + ci;
        }
        return acc;
    }

    std::vector<double> num_;
    std::vector<double> den_;
};

struct Trajectory {
    TimeSeries u;
    TimeSeries y;
};

struct SimulationResult {
    TimeSeries y;
    RealVector final_state;
};

/// Simulates from x0; the optional noise sequence is added to the output (y_k = C x_k + D u_k + n_k).
inline SimulationResult simulate(const StateSpace&               sys,
                                 const RealVector&               x0,
                                 const TimeSeries&               u,
                                 const std::optional<TimeSeries>& noise = std::nullopt) {
    if (u.empty()) {
        throw InvalidInput("simulate: empty input sequence");
    }
    if (u.channels() != sys.nu() || static_cast<std::size_t>(x0.size()) != sys.nx()) {
        throw InvalidInput("simulate: dimension mismatch");
    }
    if (noise && (noise->length() != u.length() || noise->channels() != sys.ny())) {
        throw InvalidInput("simulate: noise sequence dimension mismatch");
    }
    const auto N = static_cast<Eigen::Index>(u.length());
    RealMatrix y(N, static_cast<Eigen::Index>(sys.ny()));
    RealVector x = x0;
    for (Eigen::Index k = 0; k < N; ++k) {
        const RealVector uk = u.samples().row(k).transpose();
        RealVector       yk = sys.C() * x + sys.D() * uk;
        if (noise) {
            yk += noise->samples().row(k).transpose();
        }
        y.row(k) = yk.transpose();
        x        = sys.A() * x + sys.B() * uk;
    }
    return {TimeSeries(std::move(y)), std::move(x)};
}

/// Controllable canonical realization (companion form, first-row coefficients).
inline StateSpace tf_to_ss(const SisoTransferFunction& g) {
    const auto&  den = g.den();
    const double a0  = den.front();
    const auto   n   = static_cast<Eigen::Index>(g.order());

    std::vector<double> b(static_cast<std::size_t>(n) + 1, 0.0);
    const auto          offset = b.size() - g.num().size();
    for (std::size_t i = 0; i < g.num().size(); ++i) {
        b[offset + i] = g.num()[i] / a0;
    }
    const double d = b[0];

    RealMatrix A = RealMatrix::Zero(n, n);
    RealMatrix B = RealMatrix::Zero(n, 1);
    RealMatrix C = RealMatrix::Zero(1, n);
    RealMatrix D = RealMatrix::Constant(1, 1, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ai = den[static_cast<std::size_t>(i) + 1] / a0;
        A(0, i)         = -ai;
        C(0, i)         = b[static_cast<std::size_t>(i) + 1] - d * ai;
        if (i + 1 < n) {
            A(i + 1, i) = 1.0;
        }
    }
    if (n > 0) {
        B(0, 0) = 1.0;
    }
    return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D));
}

/// C (e^{jw} I - A)^{-1} B + D. Throws SingularityError when e^{jw} is (numerically) an eigenvalue of A.
inline ComplexMatrix freq_response(const StateSpace& sys, double omega) {
    const Complex       z = std::polar(1.0, omega);
    const ComplexMatrix D = sys.D().cast<Complex>();
    if (sys.nx() == 0) {
        return D;
    }
    const auto          n         = static_cast<Eigen::Index>(sys.nx());
    const ComplexMatrix resolvent = z * ComplexMatrix::Identity(n, n) - sys.A().cast<Complex>();
    Eigen::PartialPivLU<ComplexMatrix> lu(resolvent);
    if (lu.rcond() < 1e-13) {
        throw SingularityError("freq_response: e^{jw} is a pole of the system at w = " + std::to_string(omega));
    }
    return sys.C().cast<Complex>() * lu.solve(sys.B().cast<Complex>()) + D;
}

inline std::size_t controllability_rank(const StateSpace& sys, double tol = kDefaultRankTol) {
    const auto n = static_cast<Eigen::Index>(sys.nx());
    if (n == 0) {
        return 0;
    }
    const auto m = static_cast<Eigen::Index>(sys.nu());
    RealMatrix ctrb(n, n * m);
    RealMatrix block = sys.B();
    for (Eigen::Index i = 0; i < n; ++i) {
        ctrb.middleCols(i * m, m) = block;
        block                     = sys.A() * block;
    }
    return numerical_rank(ctrb, tol);
}

inline bool is_controllable(const StateSpace& sys) { return controllability_rank(sys) == sys.nx(); }

/**
 * Closed-loop measurement setup: the plant input is u = d + K(-y), where K is the
 * controller and y the measured (noisy) plant output y = C_p x_p + D_p u + n.
 *
 * Returns the map from [d; n] to [u; y] with state [x_p; x_c]. With this sign convention
 * the d-to-u map is the sensitivity (I + K G)^{-1}.
 */
inline StateSpace closed_loop(const StateSpace& plant, const StateSpace& controller) {
    const auto nu = static_cast<Eigen::Index>(plant.nu());
    const auto ny = static_cast<Eigen::Index>(plant.ny());
    if (controller.nu() != plant.ny() || controller.ny() != plant.nu()) {
        throw InvalidInput("closed_loop: controller dimensions do not match plant");
    }
    const auto np = static_cast<Eigen::Index>(plant.nx());
    const auto nc = static_cast<Eigen::Index>(controller.nx());

    const RealMatrix loop = RealMatrix::Identity(nu, nu) + controller.D() * plant.D();
    Eigen::FullPivLU<RealMatrix> lu(loop);
    if (!lu.isInvertible() || lu.rcond() < 1e-12) {
        throw InvalidInput("closed_loop: ill-posed algebraic loop (I + Dc Dp singular)");
    }
    const RealMatrix M = lu.inverse();

    // u = M (d + Cc xc - Dc Cp xp - Dc n)
    RealMatrix Ux(nu, np + nc);
    Ux << -M * controller.D() * plant.C(), M * controller.C();
    RealMatrix Uw(nu, nu + ny);
    Uw << M, -M * controller.D();

    // y = Cp xp + Dp u + n
    RealMatrix Yx = plant.D() * Ux;
    Yx.leftCols(np) += plant.C();
    RealMatrix Yw = plant.D() * Uw;
    Yw.rightCols(ny) += RealMatrix::Identity(ny, ny);

    // xp+ = Ap xp + Bp u ; xc+ = Ac xc - Bc y
    RealMatrix A(np + nc, np + nc);
    A.topRows(np) = plant.B() * Ux;
    A.topLeftCorner(np, np) += plant.A();
    A.bottomRows(nc) = -controller.B() * Yx;
    A.bottomRightCorner(nc, nc) += controller.A();

    RealMatrix B(np + nc, nu + ny);
    B.topRows(np)    = plant.B() * Uw;
    B.bottomRows(nc) = -controller.B() * Yw;

    RealMatrix C(nu + ny, np + nc);
    C << Ux, Yx;
    RealMatrix D(nu + ny, nu + ny);
    D << Uw, Yw;
    return StateSpace(std::move(A), std::move(B), std::move(C), std::move(D));
}

inline bool is_stable(const StateSpace& sys) { return spectral_radius(sys.A()) < 1.0; }

// Extended observability matrix [C; CA; ...; CA^{L-1}] and the block-Toeplitz input map of depth L.
inline RealMatrix observability_matrix(const StateSpace& sys, std::size_t L) {
    const auto ny = static_cast<Eigen::Index>(sys.ny());
    RealMatrix O(static_cast<Eigen::Index>(L) * ny, static_cast<Eigen::Index>(sys.nx()));
    RealMatrix blk = sys.C();
    for (std::size_t i = 0; i < L; ++i) {
        O.middleRows(static_cast<Eigen::Index>(i) * ny, ny) = blk;
        blk                                                  = blk * sys.A();
    }
    return O;
}

inline RealMatrix toeplitz_matrix(const StateSpace& sys, std::size_t L) {
    const auto ny = static_cast<Eigen::Index>(sys.ny());
    const auto nu = static_cast<Eigen::Index>(sys.nu());
    const auto n  = static_cast<Eigen::Index>(L);
    RealMatrix T  = RealMatrix::Zero(n * ny, n * nu);
    std::vector<RealMatrix> markov;
    markov.push_back(sys.D());
    RealMatrix AkB = sys.B();
    for (Eigen::Index i = 1; i < n; ++i) {
        markov.push_back(sys.C() * AkB);
        AkB = sys.A() * AkB;
    }
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c <= r; ++c) {
            T.block(r * ny, c * nu, ny, nu) = markov[static_cast<std::size_t>(r - c)];
        }
    }
    return T;
}

}  // namespace freepc::lti

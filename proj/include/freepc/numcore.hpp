#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace freepc {

using RealMatrix    = Eigen::MatrixXd;
using RealVector    = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using Complex       = std::complex<double>;

// Malformed arguments: wrong dimensions, non-finite values, out-of-range parameters.
class InvalidInput : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

// A linear map that had to be inverted was singular (resolvent at a pole, zero FRF denominator).
class SingularityError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultRankTol = 1e-9;

template <class Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    if constexpr (Eigen::NumTraits<typename Derived::Scalar>::IsComplex) {
        return m.real().allFinite() && m.imag().allFinite();
    } else {
        return m.allFinite();
    }
}

template <class Derived>
void require_finite(const Eigen::MatrixBase<Derived>& m, const std::string& what) {
    if (!all_finite(m)) {
        throw InvalidInput(what + ": non-finite entry");
    }
}

// Singular values in decreasing order.
template <class Derived>
RealVector singular_values(const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    using Mat    = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (m.size() == 0) {
        return RealVector{};
    }
    Eigen::JacobiSVD<Mat> svd(m.eval());
    return svd.singularValues();
}

/// Number of singular values strictly above tol * sigma_max. Zero for the zero (or empty) matrix.
template <class Derived>
std::size_t numerical_rank(const Eigen::MatrixBase<Derived>& m, double tol = kDefaultRankTol) {
    if (!(tol > 0.0)) {
        throw InvalidInput("numerical_rank: tol must be positive");
    }
    require_finite(m, "numerical_rank");
    const RealVector sv = singular_values(m);
    if (sv.size() == 0 || sv(0) == 0.0) {
        return 0;
    }
    const double cut  = tol * sv(0);
    std::size_t  rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > cut) {
            ++rank;
        }
    }
    return rank;
}

/// Minimum-norm least-squares solution of a * x = b.
inline RealVector least_squares(const RealMatrix& a, const RealVector& b) {
    if (a.rows() != b.size()) {
        throw InvalidInput("least_squares: a.rows() != b.size()");
    }
    require_finite(a, "least_squares(a)");
    require_finite(b, "least_squares(b)");
    if (a.cols() == 0) {
        return RealVector{};
    }
    if (a.rows() == 0) {
        return RealVector::Zero(a.cols());
    }
    Eigen::CompleteOrthogonalDecomposition<RealMatrix> cod(a);
    const double max_pivot = cod.matrixQTZ().diagonal().cwiseAbs().maxCoeff();
    if (max_pivot == 0.0) {
        return RealVector::Zero(a.cols());
    }
    cod.setThreshold(1e-13);
    return cod.solve(b);
}

inline double spectral_radius(const RealMatrix& a) {
    if (a.size() == 0) {
        return 0.0;
    }
    Eigen::EigenSolver<RealMatrix> es(a, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Kronecker product of a column vector with a column vector: blocks of `inner` scaled by outer(i).
inline ComplexVector kron(const ComplexVector& outer, const ComplexVector& inner) {
    ComplexVector out(outer.size() * inner.size());
    for (Eigen::Index i = 0; i < outer.size(); ++i) {
        out.segment(i * inner.size(), inner.size()) = outer(i) * inner;
    }
    return out;
}

}  // namespace freepc

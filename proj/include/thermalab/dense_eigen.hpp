#pragma once

// Dense Hermitian eigensystems.

#include "thermalab/errors.hpp"
#include "thermalab/sector_vector.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>
#include <string>

namespace thermalab {

struct DenseEigensystem {
    Eigen::VectorXd values;  // ascending
    MatrixXc vectors;        // columns
};

namespace detail {

// ||H v - lambda v|| on a handful of columns.
template <class M, class V>
void check_eigenpairs(const M& H, const V& vecs, const Eigen::VectorXd& vals)
{
    const auto n = H.rows();
    if (n == 0) return;
    std::mt19937_64 rng(0x5eed);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    const double scale = std::max(1.0, vals.cwiseAbs().maxCoeff());
    for (int s = 0; s < 8; ++s) {
        const auto k = s == 0 ? Eigen::Index{0} : s == 1 ? n - 1 : pick(rng);
        const double r = (H * vecs.col(k) - vals[k] * vecs.col(k)).norm();
        if (!(r < 1e-9 * scale))
            throw NumericalError("dense eigensolver residual " + std::to_string(r) + " at column " + std::to_string(k));
    }
}

} // namespace detail

inline DenseEigensystem hermitian_eigensystem(const MatrixXc& H)
{
    if (H.rows() != H.cols()) throw UsageError("eigensystem needs a square matrix");
    Eigen::SelfAdjointEigenSolver<MatrixXc> es(H);
    if (es.info() != Eigen::Success) throw NumericalError("Hermitian eigensolver did not converge");
    DenseEigensystem out{es.eigenvalues(), es.eigenvectors()};
    detail::check_eigenpairs(H, out.vectors, out.values);
    return out;
}

// Real symmetric input; vectors are returned with zero imaginary part.
inline DenseEigensystem symmetric_eigensystem(const Eigen::MatrixXd& H)
{
    if (H.rows() != H.cols()) throw UsageError("eigensystem needs a square matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw NumericalError("symmetric eigensolver did not converge");
    detail::check_eigenpairs(H, es.eigenvectors(), es.eigenvalues());
    return {es.eigenvalues(), es.eigenvectors().cast<Complex>()};
}

} // namespace thermalab

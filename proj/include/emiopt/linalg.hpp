// SPDX-License-Identifier: Apache-2.0
//
// emiopt: transmit covariance optimization for frequency-selective MIMO channels
// Copyright (C) 2026 The emiopt authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef EMIOPT_LINALG_HPP
#define EMIOPT_LINALG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>

#include "emiopt/errors.hpp"

namespace emiopt
{

using cplx = std::complex<double>;
using cmat = Eigen::MatrixXcd;
using cvec = Eigen::VectorXcd;
using dvec = Eigen::VectorXd;
using dmat = Eigen::MatrixXd;

namespace linalg
{

inline cmat hermitian_part(const cmat &a)
{
    return (a + a.adjoint()) * 0.5;
}

inline bool all_finite(const cmat &a)
{
    return a.allFinite();
}

inline bool all_finite(const dvec &v)
{
    return v.allFinite();
}

// Hermitian PSD square root, eigenvalues below zero clipped to 0.
inline cmat psd_sqrt(const cmat &a)
{
    Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(a));
    if (es.info() != Eigen::Success)
        throw non_finite("psd_sqrt: eigendecomposition failed");
    dvec s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}

// log|A| for Hermitian positive definite A (natural log).
inline double logdet_hpd(const cmat &a)
{
    Eigen::LLT<cmat> llt(a);
    if (llt.info() != Eigen::Success)
        throw non_finite("logdet_hpd: matrix is not positive definite");
    const auto &l = llt.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i)
        s += std::log(l(i, i).real());
    return 2.0 * s;
}

// Inverse of a Hermitian positive definite matrix. Throws ill_conditioned when
// the 2-norm condition number exceeds max_cond.
inline cmat inverse_hpd(const cmat &a, double max_cond = 1e14)
{
    Eigen::SelfAdjointEigenSolver<cmat> es(hermitian_part(a));
    if (es.info() != Eigen::Success || !es.eigenvalues().allFinite())
        throw non_finite("inverse_hpd: eigendecomposition failed");
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > max_cond)
        throw ill_conditioned("inverse_hpd: condition number exceeds limit");
    dvec inv = es.eigenvalues().cwiseInverse();
    cmat r = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().adjoint();
    return hermitian_part(r);
}

inline double min_eigenvalue(const cmat &a)
{
    return Eigen::SelfAdjointEigenSolver<cmat>(hermitian_part(a), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

inline double max_eigenvalue(const cmat &a)
{
    return Eigen::SelfAdjointEigenSolver<cmat>(hermitian_part(a), Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

// Real part of Tr(A B) without forming the product.
inline double trace_product_real(const cmat &a, const cmat &b)
{
    return (a.transpose().cwiseProduct(b)).sum().real();
}

inline double spectral_radius(const dmat &m)
{
    if (m.size() == 0)
        return 0.0;
    Eigen::EigenSolver<dmat> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace linalg
} // namespace emiopt

#endif

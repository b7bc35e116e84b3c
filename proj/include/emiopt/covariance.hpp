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

#ifndef EMIOPT_COVARIANCE_HPP
#define EMIOPT_COVARIANCE_HPP

#include <cmath>
#include <cstddef>
#include <random>

#include "emiopt/errors.hpp"
#include "emiopt/linalg.hpp"
#include "emiopt/random.hpp"

namespace emiopt
{

// Hermitian PSD transmit covariance. Eigenvalues that are negative at machine
// scale are clipped to zero on construction; larger negative parts are
// rejected. Carries its PSD square root.
class covariance
{
public:
    covariance() = default;

    explicit covariance(const cmat &q)
    {
        if (q.rows() != q.cols() || q.rows() == 0)
            throw invalid_input("covariance: matrix must be square and non-empty");
        if (!q.allFinite())
            throw invalid_input("covariance: non-finite entry");
        Eigen::SelfAdjointEigenSolver<cmat> es(linalg::hermitian_part(q));
        if (es.info() != Eigen::Success)
            throw non_finite("covariance: eigendecomposition failed");
        const dvec &ev = es.eigenvalues();
        const double scale = std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
        if (ev.minCoeff() < -1e-10 * scale)
            throw invalid_input("covariance: matrix is not positive semidefinite");
        dvec clipped = ev.cwiseMax(0.0);
        const cmat &u = es.eigenvectors();
        // Keep the caller's entries unless clipping actually changed the spectrum.
        q_ = ev.minCoeff() < 0.0 ? linalg::hermitian_part(u * clipped.asDiagonal() * u.adjoint())
                                 : linalg::hermitian_part(q);
        sqrt_ = linalg::hermitian_part(u * clipped.cwiseSqrt().asDiagonal() * u.adjoint());
    }

    static covariance identity(std::size_t t)
    {
        const auto n = static_cast<Eigen::Index>(t);
        return covariance(cmat::Identity(n, n));
    }

    static covariance zero(std::size_t t)
    {
        const auto n = static_cast<Eigen::Index>(t);
        return covariance(cmat::Zero(n, n));
    }

    // Wishart-type draw G G^H scaled into C1.
    static covariance random_c1(std::size_t t, rng_engine &rng)
    {
        const auto n = static_cast<Eigen::Index>(t);
        std::normal_distribution<double> gauss(0.0, 1.0);
        cmat g(n, n);
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
            {
                const double re = gauss(rng);
                const double im = gauss(rng);
                g(i, j) = cplx(re, im);
            }
        return covariance(g * g.adjoint()).normalized();
    }

    const cmat &matrix() const noexcept { return q_; }
    const cmat &sqrt() const noexcept { return sqrt_; }
    std::size_t side() const noexcept { return static_cast<std::size_t>(q_.rows()); }

    // (1/t) Tr(Q)
    double normalized_trace() const { return q_.trace().real() / static_cast<double>(q_.rows()); }

    bool in_c1(double tol = 1e-12) const { return std::abs(normalized_trace() - 1.0) <= tol; }

    covariance normalized() const
    {
        const double nt = normalized_trace();
        if (!(nt > 0.0))
            throw invalid_input("covariance: cannot normalize a zero matrix");
        return covariance(q_ / nt);
    }

    // lambda * a + (1 - lambda) * b
    static covariance mix(const covariance &a, const covariance &b, double lambda)
    {
        return covariance(lambda * a.matrix() + (1.0 - lambda) * b.matrix());
    }

private:
    cmat q_;
    cmat sqrt_;
};

} // namespace emiopt

#endif

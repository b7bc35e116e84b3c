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

#ifndef EMIOPT_CANONICAL_SOLVER_HPP
#define EMIOPT_CANONICAL_SOLVER_HPP

// Deterministic-equivalent parameters (delta, delta_tilde) of the ergodic
// mutual information. They are the positive solution of
//
//   delta_l       = f_l(delta_tilde)      = (1/t) Tr[ cr_l T(delta_tilde) ]
//   delta_tilde_l = ft_l(delta, Q)        = (1/t) Tr[ Q^1/2 ct_l Q^1/2 Tt(delta, Q) ]
//
//   T^-1  = sigma2 (I_r + sum_j delta_tilde_j cr_j)
//   Tt^-1 = sigma2 (I_t + sum_j delta_j Q^1/2 ct_j Q^1/2)
//
// solved by Jacobi fixed-point iteration. Uniqueness is certified at the
// solution by rho(sigma^4 At(Tt) A(T)) < 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "emiopt/channel_model.hpp"
#include "emiopt/covariance.hpp"
#include "emiopt/errors.hpp"
#include "emiopt/linalg.hpp"

namespace emiopt
{

struct solver_options
{
    double tol = 1e-10;
    int max_iter = 10000;
    // Common starting value of every delta_l and delta_tilde_l; must be > 0.
    double init = 1.0;
};

struct delta_solution
{
    dvec delta;
    dvec delta_tilde;
    cmat T;       // r x r
    cmat T_tilde; // t x t
    double residual = 0.0; // max(|delta - f|_inf, |delta_tilde - ft|_inf)
    int iterations = 0;
    double rho_m = 0.0;
    // Sup-norm step of every iteration, for convergence diagnostics.
    std::vector<double> steps;
};

namespace detail
{

// Q^1/2 ct_l Q^1/2 for every path.
inline std::vector<cmat> conjugated_transmit(const channel_stats &stats, const covariance &q)
{
    if (q.side() != stats.t())
        throw invalid_input("covariance size does not match transmit antenna count");
    std::vector<cmat> out;
    out.reserve(stats.paths());
    for (const auto &c : stats.ct())
        out.push_back(linalg::hermitian_part(q.sqrt() * c * q.sqrt()));
    return out;
}

inline cmat resolvent(const std::vector<cmat> &mats, const dvec &weights, double sigma2, Eigen::Index n)
{
    if (static_cast<std::size_t>(weights.size()) != mats.size())
        throw invalid_input("resolvent: weight vector length does not match path count");
    if ((weights.array() < 0.0).any() || !weights.allFinite())
        throw invalid_input("resolvent: weights must be finite and >= 0");
    cmat m = cmat::Identity(n, n);
    for (std::size_t j = 0; j < mats.size(); ++j)
        m += weights(static_cast<Eigen::Index>(j)) * mats[j];
    return linalg::inverse_hpd(sigma2 * m);
}

inline dvec trace_map(const std::vector<cmat> &mats, const cmat &res, double t)
{
    dvec out(static_cast<Eigen::Index>(mats.size()));
    for (std::size_t l = 0; l < mats.size(); ++l)
        out(static_cast<Eigen::Index>(l)) = linalg::trace_product_real(mats[l], res) / t;
    return out;
}

// (1/t) Re Tr(C_k R C_l R) for all k, l.
inline dmat coupling_matrix(const std::vector<cmat> &mats, const cmat &res, double t)
{
    const auto n = static_cast<Eigen::Index>(mats.size());
    std::vector<cmat> prod;
    prod.reserve(mats.size());
    for (const auto &c : mats)
        prod.push_back(c * res);
    dmat a(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
        for (Eigen::Index l = 0; l < n; ++l)
            a(k, l) = linalg::trace_product_real(prod[static_cast<std::size_t>(k)], prod[static_cast<std::size_t>(l)]) / t;
    return a;
}

inline double certificate(const std::vector<cmat> &cr, const cmat &T, const std::vector<cmat> &ctq,
                          const cmat &T_tilde, double sigma2, double t)
{
    const dmat a = coupling_matrix(cr, T, t);
    const dmat at = coupling_matrix(ctq, T_tilde, t);
    return linalg::spectral_radius(sigma2 * sigma2 * at * a);
}

} // namespace detail

// T(delta_tilde) = [sigma2 (I + sum_j delta_tilde_j cr_j)]^-1
inline cmat resolvent_T(const channel_stats &stats, const dvec &delta_tilde)
{
    return detail::resolvent(stats.cr(), delta_tilde, stats.sigma2(), static_cast<Eigen::Index>(stats.r()));
}

// Tt(delta, Q) = [sigma2 (I + sum_j delta_j Q^1/2 ct_j Q^1/2)]^-1
inline cmat resolvent_T_tilde(const channel_stats &stats, const dvec &delta, const covariance &q)
{
    return detail::resolvent(detail::conjugated_transmit(stats, q), delta, stats.sigma2(),
                             static_cast<Eigen::Index>(stats.t()));
}

struct f_values
{
    dvec f;       // f_l(delta_tilde)
    dvec f_tilde; // ft_l(delta, Q)
};

inline f_values f_maps(const channel_stats &stats, const covariance &q, const dvec &delta, const dvec &delta_tilde)
{
    const double t = static_cast<double>(stats.t());
    const auto ctq = detail::conjugated_transmit(stats, q);
    const cmat T = resolvent_T(stats, delta_tilde);
    const cmat Tt = detail::resolvent(ctq, delta, stats.sigma2(), static_cast<Eigen::Index>(stats.t()));
    return {detail::trace_map(stats.cr(), T, t), detail::trace_map(ctq, Tt, t)};
}

inline double uniqueness_certificate(const channel_stats &stats, const covariance &q, const delta_solution &sol)
{
    return detail::certificate(stats.cr(), sol.T, detail::conjugated_transmit(stats, q), sol.T_tilde,
                               stats.sigma2(), static_cast<double>(stats.t()));
}

inline delta_solution solve_canonical(const channel_stats &stats, const covariance &q, const solver_options &opts = {})
{
    if (!(opts.tol > 0.0))
        throw invalid_input("solve_canonical: tol must be > 0");
    if (!(opts.init > 0.0))
        throw invalid_input("solve_canonical: initial value must be > 0");
    if (opts.max_iter < 1)
        throw invalid_input("solve_canonical: max_iter must be >= 1");

    const double t = static_cast<double>(stats.t());
    const double sigma2 = stats.sigma2();
    const auto n_paths = static_cast<Eigen::Index>(stats.paths());
    const auto ti = static_cast<Eigen::Index>(stats.t());
    const auto ri = static_cast<Eigen::Index>(stats.r());
    const auto ctq = detail::conjugated_transmit(stats, q);

    delta_solution sol;
    dvec delta = dvec::Constant(n_paths, opts.init);
    dvec delta_tilde = dvec::Constant(n_paths, opts.init);
    double step = 0.0;
    int it = 0;
    for (; it < opts.max_iter; ++it)
    {
        const cmat T = detail::resolvent(stats.cr(), delta_tilde, sigma2, ri);
        const cmat Tt = detail::resolvent(ctq, delta, sigma2, ti);
        dvec next = detail::trace_map(stats.cr(), T, t);
        dvec next_tilde = detail::trace_map(ctq, Tt, t);
        if (!next.allFinite() || !next_tilde.allFinite())
            throw non_finite("solve_canonical: iterate overflowed after " + std::to_string(it + 1) + " iterations");
        step = std::max((next - delta).cwiseAbs().maxCoeff(), (next_tilde - delta_tilde).cwiseAbs().maxCoeff());
        sol.steps.push_back(step);
        delta = std::move(next);
        delta_tilde = std::move(next_tilde);
        if (step <= opts.tol)
        {
            ++it;
            break;
        }
    }
    if (step > opts.tol)
        throw max_iterations_exceeded("solve_canonical: no convergence after " + std::to_string(opts.max_iter) +
                                          " iterations (last step " + std::to_string(step) + ")",
                                      step);

    sol.delta = delta;
    sol.delta_tilde = delta_tilde;
    sol.T = detail::resolvent(stats.cr(), delta_tilde, sigma2, ri);
    sol.T_tilde = detail::resolvent(ctq, delta, sigma2, ti);
    const dvec f = detail::trace_map(stats.cr(), sol.T, t);
    const dvec ft = detail::trace_map(ctq, sol.T_tilde, t);
    sol.residual = std::max((delta - f).cwiseAbs().maxCoeff(), (delta_tilde - ft).cwiseAbs().maxCoeff());
    sol.iterations = it;
    sol.rho_m = detail::certificate(stats.cr(), sol.T, ctq, sol.T_tilde, sigma2, t);
    return sol;
}

} // namespace emiopt

#endif

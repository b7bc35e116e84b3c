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

#ifndef EMIOPT_EMI_HPP
#define EMIOPT_EMI_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <thread>
#include <utility>
#include <vector>

#include "emiopt/canonical_solver.hpp"
#include "emiopt/channel_model.hpp"
#include "emiopt/covariance.hpp"
#include "emiopt/errors.hpp"
#include "emiopt/linalg.hpp"
#include "emiopt/random.hpp"

namespace emiopt
{

namespace detail
{

inline cmat weighted_sum(const std::vector<cmat> &mats, const dvec &w)
{
    if (static_cast<std::size_t>(w.size()) != mats.size())
        throw invalid_input("weight vector length does not match path count");
    cmat s = cmat::Zero(mats.front().rows(), mats.front().cols());
    for (std::size_t l = 0; l < mats.size(); ++l)
        s += w(static_cast<Eigen::Index>(l)) * mats[l];
    return s;
}

// log|I + Q C| evaluated through the Hermitian form log|I + Q^1/2 C Q^1/2|.
inline double logdet_transmit(const covariance &q, const cmat &c)
{
    const auto n = static_cast<Eigen::Index>(q.side());
    return linalg::logdet_hpd(cmat::Identity(n, n) + linalg::hermitian_part(q.sqrt() * c * q.sqrt()));
}

} // namespace detail

// Sum_l kappa_l ct_l
inline cmat transmit_combination(const channel_stats &stats, const dvec &kappa)
{
    return detail::weighted_sum(stats.ct(), kappa);
}

// Sum_l kappa_tilde_l cr_l
inline cmat receive_combination(const channel_stats &stats, const dvec &kappa_tilde)
{
    return detail::weighted_sum(stats.cr(), kappa_tilde);
}

// V(Q, kappa, kappa_tilde) = log|I + C(kappa_tilde)| + log|I + Q Ct(kappa)| - sigma2 t sum kappa_l kappa_tilde_l.
// Equals the large-system EMI when evaluated at the canonical solution.
inline double v_function(const channel_stats &stats, const covariance &q, const dvec &kappa, const dvec &kappa_tilde)
{
    if ((kappa.array() < 0.0).any() || (kappa_tilde.array() < 0.0).any())
        throw invalid_input("v_function: kappa entries must be >= 0");
    const auto r = static_cast<Eigen::Index>(stats.r());
    const double recv = linalg::logdet_hpd(cmat::Identity(r, r) + receive_combination(stats, kappa_tilde));
    const double trans = detail::logdet_transmit(q, transmit_combination(stats, kappa));
    return recv + trans - stats.sigma2() * static_cast<double>(stats.t()) * kappa.dot(kappa_tilde);
}

// Largest canonical defect accepted by emi_approx.
inline constexpr double default_solution_tolerance = 1e-8;

// Large-system approximation of the ergodic mutual information, in nats.
inline double emi_approx(const channel_stats &stats, const covariance &q, const delta_solution &sol,
                         double max_residual = default_solution_tolerance)
{
    if (!(sol.residual <= max_residual))
        throw invalid_input("emi_approx: canonical solution not converged (residual " + std::to_string(sol.residual) +
                            ")");
    return v_function(stats, q, sol.delta, sol.delta_tilde);
}

// Solve the canonical system at q and return the approximation.
inline double emi_approx(const channel_stats &stats, const covariance &q, const solver_options &opts = {})
{
    return emi_approx(stats, q, solve_canonical(stats, q, opts), std::max(10.0 * opts.tol, default_solution_tolerance));
}

struct v_gradient
{
    dvec d_kappa;       // dV/dkappa_l       = sigma2 t (ft_l(kappa, Q) - kappa_tilde_l)
    dvec d_kappa_tilde; // dV/dkappa_tilde_l = sigma2 t (f_l(kappa_tilde) - kappa_l)
};

// Analytic partial derivatives of V in (kappa, kappa_tilde) at an arbitrary point.
inline v_gradient v_partials(const channel_stats &stats, const covariance &q, const dvec &kappa,
                             const dvec &kappa_tilde)
{
    const auto fv = f_maps(stats, q, kappa, kappa_tilde);
    const double s = stats.sigma2() * static_cast<double>(stats.t());
    return {s * (fv.f_tilde - kappa_tilde), s * (fv.f - kappa)};
}

// Partial derivatives of V at the canonical solution; both vanish there.
inline v_gradient stationarity_defect(const channel_stats &stats, const covariance &q, const delta_solution &sol)
{
    return v_partials(stats, q, sol.delta, sol.delta_tilde);
}

struct emi_estimate
{
    double mean = 0.0;      // nats
    double std_error = 0.0; // nats
    std::size_t trials = 0;
    std::uint64_t seed = 0;
};

// log|I_r + H Q H^H / sigma2| for one realization.
inline double mutual_information(const cmat &h, const covariance &q, double sigma2)
{
    const cmat g = h * q.sqrt();
    const auto r = h.rows();
    cmat m = cmat::Identity(r, r);
    m.noalias() += (g * g.adjoint()) / sigma2;
    return linalg::logdet_hpd(linalg::hermitian_part(m));
}

// Monte-Carlo estimate of E log|I + H Q H^H / sigma2|. Trial i uses
// substream(seed, i); the reduction runs in trial order, so the result does
// not depend on the thread count.
inline emi_estimate emi_monte_carlo(const channel_stats &stats, const covariance &q, std::size_t trials,
                                    std::uint64_t seed, unsigned threads = 1)
{
    if (trials < 1)
        throw invalid_input("emi_monte_carlo: trials must be >= 1");
    if (q.side() != stats.t())
        throw invalid_input("emi_monte_carlo: covariance size does not match transmit antenna count");

    std::vector<double> values(trials);
    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
        {
            auto rng = substream(seed, i);
            values[i] = mutual_information(draw_channel(stats, rng).h, q, stats.sigma2());
        }
    };
    if (threads == 0)
        threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, trials));
    if (threads <= 1)
        work(0, trials);
    else
    {
        std::vector<std::thread> pool;
        const std::size_t chunk = (trials + threads - 1) / threads;
        for (unsigned k = 0; k < threads; ++k)
        {
            const std::size_t b = k * chunk, e = std::min(trials, b + chunk);
            if (b < e)
                pool.emplace_back(work, b, e);
        }
        for (auto &th : pool)
            th.join();
    }

    // Neumaier summation, fixed order.
    auto ordered_sum = [](const std::vector<double> &v, auto &&f) {
        double s = 0.0, c = 0.0;
        for (double x : v)
        {
            const double y = f(x);
            const double tmp = s + y;
            c += std::abs(s) >= std::abs(y) ? (s - tmp) + y : (y - tmp) + s;
            s = tmp;
        }
        return s + c;
    };
    const double n = static_cast<double>(trials);
    const double mean = ordered_sum(values, [](double x) { return x; }) / n;
    double se = 0.0;
    if (trials > 1)
    {
        const double ss = ordered_sum(values, [mean](double x) { return (x - mean) * (x - mean); });
        se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return {mean, se, trials, seed};
}

// Forward difference [Ibar(Q + h(P - Q)) - Ibar(Q)] / h with fresh canonical
// solves. Only meant as a test oracle for optimality.
inline double directional_derivative(const channel_stats &stats, const covariance &q, const covariance &p, double h,
                                     const solver_options &opts = {1e-12, 20000, 1.0})
{
    if (!(h > 0.0 && h < 1.0))
        throw invalid_input("directional_derivative: step must lie in (0, 1)");
    if ((p.matrix() - q.matrix()).cwiseAbs().maxCoeff() == 0.0)
        return 0.0;
    const double base = emi_approx(stats, q, opts);
    const double moved = emi_approx(stats, covariance::mix(p, q, h), opts);
    return (moved - base) / h;
}

} // namespace emiopt

#endif

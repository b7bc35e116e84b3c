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

#ifndef EMIOPT_OPTIMIZER_HPP
#define EMIOPT_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "emiopt/canonical_solver.hpp"
#include "emiopt/channel_model.hpp"
#include "emiopt/covariance.hpp"
#include "emiopt/emi.hpp"
#include "emiopt/errors.hpp"
#include "emiopt/linalg.hpp"
#include "emiopt/random.hpp"

namespace emiopt
{

struct waterfill_solution
{
    covariance q;
    double water_level = 0.0;
    // Indices into the eigenvalues sorted in descending order.
    std::vector<std::size_t> active_set;
    dvec eigenvalues; // descending
    dvec powers;      // aligned with eigenvalues
    // Set when the input was the zero matrix; q is then the identity.
    bool all_zero = false;
};

// Eigenvalues at or below this fraction of the largest are treated as zero.
inline constexpr double waterfill_zero_threshold = 1e-14;

// argmax of log|I + Q C| over Hermitian PSD Q with Tr(Q) = t.
inline waterfill_solution waterfill(const cmat &c_tilde)
{
    if (c_tilde.rows() != c_tilde.cols() || c_tilde.rows() == 0)
        throw invalid_input("waterfill: matrix must be square and non-empty");
    if (!c_tilde.allFinite())
        throw invalid_input("waterfill: non-finite entry");
    const auto n = c_tilde.rows();
    const double budget = static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<cmat> es(linalg::hermitian_part(c_tilde));
    if (es.info() != Eigen::Success)
        throw non_finite("waterfill: eigendecomposition failed");
    // Eigen sorts ascending; flip to descending.
    const dvec lam = es.eigenvalues().reverse();
    const cmat u = es.eigenvectors().rowwise().reverse();

    waterfill_solution out;
    out.eigenvalues = lam;
    const double lmax = lam(0);
    if (!(lmax > 0.0))
    {
        out.q = covariance::identity(static_cast<std::size_t>(n));
        out.all_zero = true;
        out.powers = dvec::Ones(n);
        out.water_level = std::numeric_limits<double>::infinity();
        out.active_set.resize(static_cast<std::size_t>(n));
        std::iota(out.active_set.begin(), out.active_set.end(), std::size_t{0});
        return out;
    }

    Eigen::Index usable = 0;
    while (usable < n && lam(usable) > waterfill_zero_threshold * lmax)
        ++usable;

    // Largest k whose water level clears the k-th activation threshold 1/lam_k.
    double inv_sum = 0.0;
    Eigen::Index active = 1;
    double mu = budget + 1.0 / lam(0);
    for (Eigen::Index k = 1; k <= usable; ++k)
    {
        inv_sum += 1.0 / lam(k - 1);
        const double mu_k = (budget + inv_sum) / static_cast<double>(k);
        if (mu_k > 1.0 / lam(k - 1))
        {
            active = k;
            mu = mu_k;
        }
    }

    out.water_level = mu;
    out.powers = dvec::Zero(n);
    for (Eigen::Index i = 0; i < active; ++i)
    {
        out.powers(i) = mu - 1.0 / lam(i);
        out.active_set.push_back(static_cast<std::size_t>(i));
    }
    out.q = covariance(u * out.powers.cast<cplx>().asDiagonal() * u.adjoint());
    return out;
}

enum class stop_reason
{
    converged,
    max_iterations,
    restart_exhausted
};

inline std::string to_string(stop_reason s)
{
    switch (s)
    {
    case stop_reason::converged:
        return "converged";
    case stop_reason::max_iterations:
        return "max_iterations";
    case stop_reason::restart_exhausted:
        return "restart_exhausted";
    }
    return "unknown";
}

inline stop_reason stop_reason_from_string(const std::string &s)
{
    if (s == "converged")
        return stop_reason::converged;
    if (s == "max_iterations")
        return stop_reason::max_iterations;
    if (s == "restart_exhausted")
        return stop_reason::restart_exhausted;
    throw invalid_input("unknown stop reason: " + s);
}

struct trajectory_point
{
    int iteration = 0;
    double emi = 0.0;        // Ibar(Q_{k-1}), nats
    double q_step = 0.0;     // |Q_k - Q_{k-1}|_F
    double delta_step = 0.0; // max of sup-norm changes in delta and delta_tilde; inf on the first step
};

struct optimizer_options
{
    double tol_delta = 1e-8;
    double tol_q = 1e-8;
    int max_iterations = 200;
    int max_restarts = 5;
    // Restart when the delta step has not decreased for this many iterations.
    int stall_window = 20;
    std::uint64_t seed = 0;
    // Starting point; identity when empty.
    std::optional<covariance> initial;
    // Inner tolerance; 0 selects min(tol_delta / 100, 1e-10).
    double solver_tol = 0.0;
    int solver_max_iter = 10000;
};

struct optimization_result
{
    covariance q_star;
    dvec delta_star;
    dvec delta_tilde_star;
    std::vector<trajectory_point> trajectory;
    stop_reason reason = stop_reason::max_iterations;
    int restarts = 0;
    int iterations = 0;
    double emi = 0.0; // Ibar(q_star), nats
    double rho_m = 0.0;
    // Soft check: Ibar never decreased along the trajectory.
    bool monotone = true;
};

inline double inner_tolerance(const optimizer_options &opts)
{
    return opts.solver_tol > 0.0 ? opts.solver_tol : std::min(opts.tol_delta / 100.0, 1e-10);
}

// Alternate canonical solves with waterfilling on Ct(delta) until both the
// delta sequence and the covariance sequence settle.
inline optimization_result optimize_covariance(const channel_stats &stats, const optimizer_options &opts = {})
{
    if (opts.max_iterations < 1 || opts.max_restarts < 0 || opts.stall_window < 1)
        throw invalid_input("optimize_covariance: invalid iteration limits");
    const solver_options inner{inner_tolerance(opts), opts.solver_max_iter, 1.0};
    auto restart_rng = substream(opts.seed, 0x5245535452ull);

    optimization_result res;
    covariance q0 = opts.initial ? *opts.initial : covariance::identity(stats.t());
    if (q0.side() != stats.t())
        throw invalid_input("optimize_covariance: initial covariance has wrong size");
    if (!q0.in_c1(1e-10))
        q0 = q0.normalized();

    int total = 0;
    double best_emi = -std::numeric_limits<double>::infinity();

    auto finish = [&](const covariance &q, stop_reason why) {
        const auto sol = solve_canonical(stats, q, inner);
        res.q_star = q;
        res.delta_star = sol.delta;
        res.delta_tilde_star = sol.delta_tilde;
        res.rho_m = sol.rho_m;
        res.emi = v_function(stats, q, sol.delta, sol.delta_tilde);
        res.reason = why;
        res.iterations = total;
        return res;
    };

    while (true)
    {
        covariance q_prev = q0;
        std::optional<dvec> prev_delta, prev_delta_tilde;
        double last_step = std::numeric_limits<double>::infinity();
        int stalled = 0;
        bool restart = false;

        for (int k = 1; k <= opts.max_iterations; ++k)
        {
            ++total;
            delta_solution sol;
            try
            {
                sol = solve_canonical(stats, q_prev, inner);
            }
            catch (const error &e)
            {
                throw error(std::string(e.what()) + " (outer iteration " + std::to_string(total) + ")");
            }
            const double emi = v_function(stats, q_prev, sol.delta, sol.delta_tilde);
            if (emi < best_emi - 1e-12 * std::max(1.0, std::abs(best_emi)))
                res.monotone = false;
            best_emi = std::max(best_emi, emi);

            const auto wf = waterfill(transmit_combination(stats, sol.delta));
            const double q_step = (wf.q.matrix() - q_prev.matrix()).norm();
            double d_step = std::numeric_limits<double>::infinity();
            if (prev_delta)
                d_step = std::max((sol.delta - *prev_delta).cwiseAbs().maxCoeff(),
                                  (sol.delta_tilde - *prev_delta_tilde).cwiseAbs().maxCoeff());
            res.trajectory.push_back({total, emi, q_step, d_step});

            if (d_step <= opts.tol_delta && q_step <= opts.tol_q)
                return finish(wf.q, stop_reason::converged);

            if (prev_delta)
            {
                stalled = d_step >= last_step ? stalled + 1 : 0;
                last_step = d_step;
                if (stalled >= opts.stall_window)
                {
                    restart = true;
                    break;
                }
            }
            prev_delta = sol.delta;
            prev_delta_tilde = sol.delta_tilde;
            q_prev = wf.q;
        }
        if (!restart)
            return finish(q_prev, stop_reason::max_iterations);

        if (res.restarts >= opts.max_restarts)
            return finish(q_prev, stop_reason::restart_exhausted);
        ++res.restarts;
        q0 = covariance::mix(q0, covariance::random_c1(stats.t(), restart_rng), 0.9).normalized();
        best_emi = -std::numeric_limits<double>::infinity();
    }
}

// Vertex t v v^H of C1 maximizing the linearization of Ibar at q, with v the
// top eigenvector of the gradient Ct (I + q Ct)^-1, Ct = Ct(delta(q)).
inline covariance steepest_vertex(const channel_stats &stats, const covariance &q, const delta_solution &sol)
{
    const auto t = static_cast<Eigen::Index>(stats.t());
    const cmat c = transmit_combination(stats, sol.delta);
    const cmat grad = linalg::hermitian_part(c * (cmat::Identity(t, t) + q.matrix() * c).inverse());
    Eigen::SelfAdjointEigenSolver<cmat> es(grad);
    const cvec v = es.eigenvectors().col(t - 1);
    return covariance(static_cast<double>(t) * v * v.adjoint());
}

// Worst forward-difference directional derivative of Ibar at q_star over the
// vertices t e_i e_i^H, the steepest vertex, and n_probe random elements of
// C1. Non-positive (up to finite-difference error) exactly when q_star
// maximizes Ibar over C1.
inline double optimality_check(const channel_stats &stats, const covariance &q_star, int n_probe, double h = 1e-4,
                               std::uint64_t seed = 0)
{
    const auto t = static_cast<Eigen::Index>(stats.t());
    const solver_options fine{1e-12, 20000, 1.0};
    const auto sol = solve_canonical(stats, q_star, fine);
    const double base = emi_approx(stats, q_star, sol, 10.0 * fine.tol);
    auto slope = [&](const covariance &p) {
        return (emi_approx(stats, covariance::mix(p, q_star, h), fine) - base) / h;
    };
    double worst = 0.0; // P = q_star
    worst = std::max(worst, slope(steepest_vertex(stats, q_star, sol)));
    for (Eigen::Index i = 0; i < t; ++i)
    {
        cmat v = cmat::Zero(t, t);
        v(i, i) = static_cast<double>(t);
        worst = std::max(worst, slope(covariance(v)));
    }
    auto rng = substream(seed, 0x4b4b54ull);
    for (int k = 0; k < n_probe; ++k)
        worst = std::max(worst, slope(covariance::random_c1(stats.t(), rng)));
    return worst;
}

inline double optimality_check(const channel_stats &stats, const optimization_result &result, int n_probe,
                               double h = 1e-4, std::uint64_t seed = 0)
{
    return optimality_check(stats, result.q_star, n_probe, h, seed);
}

} // namespace emiopt

#endif

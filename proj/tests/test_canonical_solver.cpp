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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "emiopt/canonical_solver.hpp"
#include "test_support.hpp"

using namespace emiopt;
using Catch::Approx;

namespace
{

// i.i.d. channel with t = r: delta = delta_tilde solves sigma2 d (1 + d) = 1.
double iid_delta(double sigma2)
{
    return (-1.0 + std::sqrt(1.0 + 4.0 / sigma2)) / 2.0;
}

double defect(const channel_stats &s, const covariance &q, const delta_solution &sol)
{
    const auto f = f_maps(s, q, sol.delta, sol.delta_tilde);
    return (sol.delta - f.f).cwiseAbs().maxCoeff() + (sol.delta_tilde - f.f_tilde).cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("resolvent_T - closed forms")
{
    const double sigma2 = 0.7;
    const auto s = test::iid_stats(3, 5, sigma2);
    CHECK(resolvent_T(s, dvec::Ones(1)).isApprox(cmat::Identity(5, 5) / (2.0 * sigma2), 1e-14));
    CHECK(resolvent_T(s, dvec::Zero(1)).isApprox(cmat::Identity(5, 5) / sigma2, 1e-14));
    CHECK_THROWS_AS(resolvent_T(s, dvec::Constant(1, -0.1)), invalid_input);
    CHECK_THROWS_AS(resolvent_T(s, dvec::Ones(2)), invalid_input);
}

TEST_CASE("resolvent_T_tilde - closed forms")
{
    const double sigma2 = 2.5;
    const auto s = test::iid_stats(4, 2, sigma2);
    const auto eye = covariance::identity(4);
    CHECK(resolvent_T_tilde(s, dvec::Ones(1), eye).isApprox(cmat::Identity(4, 4) / (2.0 * sigma2), 1e-14));
    CHECK(resolvent_T_tilde(s, dvec::Constant(1, 3.0), covariance::zero(4))
              .isApprox(cmat::Identity(4, 4) / sigma2, 1e-14));
}

TEST_CASE("resolvents - multiply-back on random instances")
{
    auto rng = substream(1, 1);
    for (int k = 0; k < 20; ++k)
    {
        const auto s = test::random_stats(4, 6, 3, 0.3, rng);
        std::uniform_real_distribution<double> u(0.0, 3.0);
        dvec w(3);
        for (int i = 0; i < 3; ++i)
            w(i) = u(rng);
        const cmat T = resolvent_T(s, w);
        cmat inv = cmat::Identity(6, 6);
        for (int j = 0; j < 3; ++j)
            inv += w(j) * s.cr()[static_cast<std::size_t>(j)];
        CHECK((T * s.sigma2() * inv - cmat::Identity(6, 6)).norm() <= 1e-12);

        const auto q = covariance::random_c1(4, rng);
        const cmat Tt = resolvent_T_tilde(s, w, q);
        cmat inv_t = cmat::Identity(4, 4);
        for (int j = 0; j < 3; ++j)
            inv_t += w(j) * q.sqrt() * s.ct()[static_cast<std::size_t>(j)] * q.sqrt();
        CHECK((Tt * s.sigma2() * inv_t - cmat::Identity(4, 4)).norm() <= 1e-12);
    }
}

TEST_CASE("f_maps - scalar reduction in the i.i.d. case")
{
    const double sigma2 = 1.3;
    const auto s = test::iid_stats(4, 4, sigma2);
    const auto q = covariance::identity(4);
    for (double d : {0.0, 0.2, 1.0, 5.0})
    {
        const auto f = f_maps(s, q, dvec::Constant(1, d), dvec::Constant(1, 2.0 * d));
        CHECK(f.f(0) == Approx(1.0 / (sigma2 * (1.0 + 2.0 * d))).epsilon(1e-14));
        CHECK(f.f_tilde(0) == Approx(1.0 / (sigma2 * (1.0 + d))).epsilon(1e-14));
    }
}

TEST_CASE("f_maps - zero arguments reduce to scaled traces and outputs stay positive")
{
    auto rng = substream(2, 0);
    const auto s = test::random_stats(3, 5, 4, 0.5, rng);
    const auto q = covariance::random_c1(3, rng);
    const auto f0 = f_maps(s, q, dvec::Zero(4), dvec::Zero(4));
    for (std::size_t l = 0; l < 4; ++l)
    {
        const auto li = static_cast<Eigen::Index>(l);
        CHECK(f0.f(li) == Approx(s.cr()[l].trace().real() / 3.0 / 0.5).epsilon(1e-13));
        const cmat qcq = q.sqrt() * s.ct()[l] * q.sqrt();
        CHECK(f0.f_tilde(li) == Approx(qcq.trace().real() / 3.0 / 0.5).epsilon(1e-13));
    }
    for (int k = 0; k < 10; ++k)
    {
        std::uniform_real_distribution<double> u(0.0, 10.0);
        dvec a(4), b(4);
        for (int i = 0; i < 4; ++i)
        {
            a(i) = u(rng);
            b(i) = u(rng);
        }
        const auto f = f_maps(s, q, a, b);
        CHECK((f.f.array() > 0.0).all());
        CHECK((f.f_tilde.array() > 0.0).all());
    }
}

TEST_CASE("solve_canonical - i.i.d. closed form")
{
    const auto s = test::iid_stats(4, 4, 1.0);
    const auto sol = solve_canonical(s, covariance::identity(4));
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    CHECK(std::abs(sol.delta(0) - golden) <= 1e-9);
    CHECK(std::abs(sol.delta_tilde(0) - golden) <= 1e-9);
    CHECK(sol.residual <= 1e-10);
    CHECK(sol.rho_m == Approx(1.0 / std::pow(1.0 + golden, 4)).epsilon(1e-8));
    CHECK(sol.rho_m == Approx(0.1459).margin(1e-3));

    for (double sigma2 : {0.01, 0.1, 3.0, 50.0})
    {
        const auto si = test::iid_stats(6, 6, sigma2);
        const auto so = solve_canonical(si, covariance::identity(6));
        CHECK(so.delta(0) == Approx(iid_delta(sigma2)).epsilon(1e-9));
    }
}

TEST_CASE("solve_canonical - high-noise first-order limit")
{
    auto rng = substream(3, 0);
    const double sigma2 = 1e6;
    for (auto s : {test::table1_stats(sigma2), test::random_stats(3, 5, 2, sigma2, rng)})
    {
        const auto sol = solve_canonical(s, covariance::identity(s.t()));
        for (std::size_t l = 0; l < s.paths(); ++l)
        {
            const double first = s.cr()[l].trace().real() / static_cast<double>(s.t()) / sigma2;
            CHECK(sol.delta(static_cast<Eigen::Index>(l)) / first == Approx(1.0).epsilon(0.01));
        }
        CHECK(sol.rho_m < 1e-10);
    }
}

TEST_CASE("solve_canonical - Table I scenario certificates")
{
    const auto s = test::table1_stats(0.1);
    const auto q = covariance::identity(4);
    const auto sol = solve_canonical(s, q);
    CHECK(sol.residual <= 1e-10);
    CHECK(sol.rho_m < 1.0);
    CHECK((sol.delta.array() > 0.0).all());
    CHECK((sol.delta_tilde.array() > 0.0).all());
    CHECK(uniqueness_certificate(s, q, sol) == sol.rho_m);

    // The stored resolvents match their definitions at the solution.
    CHECK((sol.T - resolvent_T(s, sol.delta_tilde)).norm() <= 1e-10);
    CHECK((sol.T_tilde - resolvent_T_tilde(s, sol.delta, q)).norm() <= 1e-10);
}

TEST_CASE("solve_canonical - invariants on random instances")
{
    auto rng = substream(4, 0);
    std::uniform_real_distribution<double> logs(-2.0, 2.0);
    const std::size_t sizes[] = {2, 4, 8};
    for (int k = 0; k < 30; ++k)
    {
        const std::size_t t = sizes[k % 3], r = sizes[(k / 3) % 3], L = 1 + static_cast<std::size_t>(k % 4);
        const double sigma2 = std::pow(10.0, logs(rng));
        const auto s = test::random_stats(t, r, L, sigma2, rng);
        const auto q = covariance::random_c1(t, rng);
        CAPTURE(t, r, L, sigma2);

        const solver_options opts{1e-10, 10000, 1.0};
        const auto sol = solve_canonical(s, q, opts);
        CHECK(defect(s, q, sol) <= 10.0 * opts.tol);
        CHECK(sol.rho_m < 1.0);
        CHECK((sol.delta.array() > 0.0).all());

        const auto other = solve_canonical(s, q, {1e-10, 10000, 0.1});
        CHECK((sol.delta - other.delta).cwiseAbs().maxCoeff() <= 100.0 * opts.tol);

        // Jacobi interleaves two chains; each chain's steps shrink after burn-in.
        for (std::size_t i = 12; i < sol.steps.size(); ++i)
            CHECK(sol.steps[i] <= sol.steps[i - 2] * (1.0 + 1e-9) + 1e-15);

        // Conjugating Q and every ct by the same unitary leaves the traces unchanged.
        const cmat u = test::random_unitary(t, rng);
        std::vector<cmat> ct;
        for (const auto &c : s.ct())
            ct.push_back(linalg::hermitian_part(u * c * u.adjoint()));
        const channel_stats rotated(t, r, ct, s.cr(), sigma2);
        const auto rsol = solve_canonical(rotated, covariance(u * q.matrix() * u.adjoint()), opts);
        CHECK((rsol.delta - sol.delta).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((rsol.delta_tilde - sol.delta_tilde).cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("solve_canonical - rank-deficient covariance is accepted")
{
    const auto s = test::table1_stats(0.5);
    cmat q = cmat::Zero(4, 4);
    q(0, 0) = 3.0;
    q(1, 1) = 1.0;
    const covariance cq(q);
    const auto sol = solve_canonical(s, cq);
    CHECK(sol.residual <= 1e-10);
    CHECK((sol.delta_tilde.array() > 0.0).all());
    CHECK(sol.rho_m < 1.0);
}

TEST_CASE("solve_canonical - error paths")
{
    const auto s = test::table1_stats(0.01);
    const auto q = covariance::identity(4);
    try
    {
        solve_canonical(s, q, {1e-15, 2, 1.0});
        FAIL("expected max_iterations_exceeded");
    }
    catch (const max_iterations_exceeded &e)
    {
        CHECK(e.last_residual() > 1e-15);
    }
    CHECK_THROWS_AS(solve_canonical(s, q, {0.0, 10, 1.0}), invalid_input);
    CHECK_THROWS_AS(solve_canonical(s, q, {1e-10, 10, -1.0}), invalid_input);
    CHECK_THROWS_AS(solve_canonical(s, covariance::identity(3)), invalid_input);
}

TEST_CASE("uniqueness_certificate - vanishes as noise grows")
{
    const auto q = covariance::identity(4);
    double prev = 1.0;
    for (double sigma2 : {0.1, 1.0, 10.0, 100.0, 1e4})
    {
        const auto s = test::table1_stats(sigma2);
        const double rho = solve_canonical(s, q).rho_m;
        CHECK(rho < prev);
        prev = rho;
    }
    CHECK(prev < 1e-6);
}

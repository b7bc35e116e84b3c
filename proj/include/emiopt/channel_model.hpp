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

#ifndef EMIOPT_CHANNEL_MODEL_HPP
#define EMIOPT_CHANNEL_MODEL_HPP

#include <boost/math/quadrature/gauss.hpp>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "emiopt/errors.hpp"
#include "emiopt/linalg.hpp"
#include "emiopt/random.hpp"

namespace emiopt
{

// Angular description of one scatterer cluster. Angles in radians.
struct path_angular_spec
{
    double mean_departure_angle = 0.0;
    double departure_spread = 0.0;
    double mean_arrival_angle = 0.0;
    double arrival_spread = 0.0;
    double relative_power = 1.0;

    void validate() const
    {
        if (!std::isfinite(mean_departure_angle) || !std::isfinite(departure_spread) ||
            !std::isfinite(mean_arrival_angle) || !std::isfinite(arrival_spread) || !std::isfinite(relative_power))
            throw invalid_input("path_angular_spec: non-finite field");
        if (departure_spread < 0.0 || arrival_spread < 0.0)
            throw invalid_input("path_angular_spec: negative angle spread");
        if (!(relative_power > 0.0))
            throw invalid_input("path_angular_spec: relative_power must be > 0");
    }
};

enum class angular_density
{
    gaussian, // truncated at +-4 std around the mean angle
    uniform   // flat over [-pi, pi], mean and spread ignored
};

inline constexpr double psd_floor = 1e-9;

// Spatial correlation matrix of a uniform linear array: Hermitian, unit
// diagonal, positive definite after regularization.
class correlation_matrix
{
public:
    correlation_matrix() = default;
    explicit correlation_matrix(cmat entries) : entries_(std::move(entries))
    {
        if (entries_.rows() != entries_.cols() || entries_.rows() == 0)
            throw invalid_input("correlation_matrix: must be square and non-empty");
        if (!entries_.allFinite())
            throw invalid_input("correlation_matrix: non-finite entry");
    }

    const cmat &matrix() const noexcept { return entries_; }
    std::size_t side() const noexcept { return static_cast<std::size_t>(entries_.rows()); }

private:
    cmat entries_;
};

namespace detail
{

// Lift the spectrum to at least psd_floor, then restore the unit diagonal.
// The diagonal is constant (Toeplitz input), so a scalar rescale suffices.
inline cmat regularize_unit_diagonal(cmat c)
{
    c = linalg::hermitian_part(c);
    const double lmin = linalg::min_eigenvalue(c);
    if (lmin < psd_floor)
    {
        const double shift = psd_floor - lmin;
        c.diagonal().array() += shift;
        c /= (1.0 + shift);
        c.diagonal().setOnes();
    }
    return c;
}

} // namespace detail

inline correlation_matrix build_ula_correlation(double mean_angle, double spread, std::size_t n,
                                                double spacing_wavelengths = 0.5,
                                                angular_density density = angular_density::gaussian)
{
    if (n == 0)
        throw invalid_input("build_ula_correlation: antenna count must be >= 1");
    if (!std::isfinite(mean_angle) || !std::isfinite(spread) || !std::isfinite(spacing_wavelengths))
        throw invalid_input("build_ula_correlation: non-finite input");
    if (spread < 0.0)
        throw invalid_input("build_ula_correlation: negative spread");

    constexpr double two_pi = 2.0 * std::numbers::pi;
    const auto ni = static_cast<Eigen::Index>(n);

    // lag[m] = E exp(i 2 pi d m sin(theta)), m = 0..n-1
    cvec lag(ni);
    if (density == angular_density::gaussian && spread == 0.0)
    {
        cvec a(ni);
        for (Eigen::Index p = 0; p < ni; ++p)
            a(p) = std::polar(1.0, two_pi * spacing_wavelengths * static_cast<double>(p) * std::sin(mean_angle));
        cmat c = a * a.adjoint();
        c.diagonal().setOnes();
        return correlation_matrix(detail::regularize_unit_diagonal(std::move(c)));
    }

    using rule = boost::math::quadrature::gauss<double, 64>;
    double lo = -std::numbers::pi, hi = std::numbers::pi;
    if (density == angular_density::gaussian)
    {
        lo = mean_angle - 4.0 * spread;
        hi = mean_angle + 4.0 * spread;
    }
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);

    // Boost stores the non-negative abscissae only; mirror them.
    std::vector<double> nodes, weights;
    const auto &x = rule::abscissa();
    const auto &w = rule::weights();
    for (std::size_t k = 0; k < x.size(); ++k)
    {
        nodes.push_back(mid + half * x[k]);
        weights.push_back(w[k]);
        if (x[k] != 0.0)
        {
            nodes.push_back(mid - half * x[k]);
            weights.push_back(w[k]);
        }
    }
    double wsum = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k)
    {
        if (density == angular_density::gaussian)
        {
            const double z = (nodes[k] - mean_angle) / spread;
            weights[k] *= std::exp(-0.5 * z * z);
        }
        wsum += weights[k];
    }

    for (Eigen::Index m = 0; m < ni; ++m)
    {
        cplx acc = 0.0;
        for (std::size_t k = 0; k < nodes.size(); ++k)
            acc += weights[k] * std::polar(1.0, two_pi * spacing_wavelengths * static_cast<double>(m) * std::sin(nodes[k]));
        lag(m) = acc / wsum;
    }

    cmat c(ni, ni);
    for (Eigen::Index p = 0; p < ni; ++p)
        for (Eigen::Index q = 0; q < ni; ++q)
            c(p, q) = p >= q ? lag(p - q) : std::conj(lag(q - p));
    c.diagonal().setOnes();
    return correlation_matrix(detail::regularize_unit_diagonal(std::move(c)));
}

// Second-order statistics of the multipath channel: per-path transmit and
// receive correlations plus noise power. Immutable once built.
class channel_stats
{
public:
    channel_stats(std::size_t t, std::size_t r, std::vector<cmat> ct, std::vector<cmat> cr, double sigma2)
        : t_(t), r_(r), ct_(std::move(ct)), cr_(std::move(cr)), sigma2_(sigma2)
    {
        if (t_ == 0 || r_ == 0)
            throw invalid_input("channel_stats: antenna counts must be >= 1");
        if (ct_.empty() || ct_.size() != cr_.size())
            throw invalid_input("channel_stats: need L >= 1 matching transmit/receive correlations");
        if (!(sigma2_ > 0.0) || !std::isfinite(sigma2_))
            throw invalid_input("channel_stats: sigma2 must be finite and > 0");
        for (std::size_t l = 0; l < ct_.size(); ++l)
        {
            check_pd(ct_[l], t_, "transmit");
            check_pd(cr_[l], r_, "receive");
            ct_[l] = linalg::hermitian_part(ct_[l]);
            cr_[l] = linalg::hermitian_part(cr_[l]);
            ct_sqrt_.push_back(linalg::psd_sqrt(ct_[l]));
            cr_sqrt_.push_back(linalg::psd_sqrt(cr_[l]));
        }
    }

    std::size_t t() const noexcept { return t_; }
    std::size_t r() const noexcept { return r_; }
    std::size_t paths() const noexcept { return ct_.size(); }
    double sigma2() const noexcept { return sigma2_; }
    const std::vector<cmat> &ct() const noexcept { return ct_; }
    const std::vector<cmat> &cr() const noexcept { return cr_; }
    const std::vector<cmat> &ct_sqrt() const noexcept { return ct_sqrt_; }
    const std::vector<cmat> &cr_sqrt() const noexcept { return cr_sqrt_; }

    channel_stats with_sigma2(double sigma2) const
    {
        if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
            throw invalid_input("channel_stats: sigma2 must be finite and > 0");
        channel_stats s = *this;
        s.sigma2_ = sigma2;
        return s;
    }

private:
    static void check_pd(const cmat &c, std::size_t n, const char *what)
    {
        if (static_cast<std::size_t>(c.rows()) != n || static_cast<std::size_t>(c.cols()) != n)
            throw invalid_input(std::string("channel_stats: ") + what + " correlation has wrong size");
        if (!c.allFinite())
            throw invalid_input(std::string("channel_stats: ") + what + " correlation not finite");
        if ((c - c.adjoint()).norm() > 1e-12 * std::max(1.0, c.norm()))
            throw invalid_input(std::string("channel_stats: ") + what + " correlation not Hermitian");
        if (!(linalg::min_eigenvalue(c) > 0.0))
            throw invalid_input(std::string("channel_stats: ") + what + " correlation not positive definite");
    }

    std::size_t t_, r_;
    std::vector<cmat> ct_, cr_;
    std::vector<cmat> ct_sqrt_, cr_sqrt_;
    double sigma2_;
};

struct channel_build_options
{
    double spacing_wavelengths = 0.5;
    // Replace every angular correlation by the identity (i.i.d. channel).
    bool identity_override = false;
};

// Transmit correlations are scaled to Tr(ct[l]) = p_l t L / sum(p); receive
// correlations keep a unit diagonal.
inline channel_stats build_channel_stats(const std::vector<path_angular_spec> &specs, std::size_t t, std::size_t r,
                                         double sigma2, const channel_build_options &opts = {})
{
    if (specs.empty())
        throw invalid_input("build_channel_stats: at least one path is required");
    if (t == 0 || r == 0)
        throw invalid_input("build_channel_stats: antenna counts must be >= 1");
    double total_power = 0.0;
    for (const auto &s : specs)
    {
        s.validate();
        total_power += s.relative_power;
    }
    const double n_paths = static_cast<double>(specs.size());
    std::vector<cmat> ct, cr;
    for (const auto &s : specs)
    {
        cmat tx, rx;
        if (opts.identity_override)
        {
            tx = cmat::Identity(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
            rx = cmat::Identity(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
        }
        else
        {
            tx = build_ula_correlation(s.mean_departure_angle, s.departure_spread, t, opts.spacing_wavelengths).matrix();
            rx = build_ula_correlation(s.mean_arrival_angle, s.arrival_spread, r, opts.spacing_wavelengths).matrix();
        }
        tx *= s.relative_power * n_paths / total_power;
        ct.push_back(std::move(tx));
        cr.push_back(std::move(rx));
    }
    return channel_stats(t, r, std::move(ct), std::move(cr), sigma2);
}

// One draw of the frequency-flat channel H = sum_l H_l.
struct channel_realization
{
    cmat h;
};

inline channel_realization draw_channel(const channel_stats &stats, rng_engine &rng)
{
    const auto t = static_cast<Eigen::Index>(stats.t());
    const auto r = static_cast<Eigen::Index>(stats.r());
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5));
    const double scale = 1.0 / std::sqrt(static_cast<double>(stats.t()));
    cmat h = cmat::Zero(r, t);
    cmat w(r, t);
    for (std::size_t l = 0; l < stats.paths(); ++l)
    {
        for (Eigen::Index j = 0; j < t; ++j)
            for (Eigen::Index i = 0; i < r; ++i)
            {
                const double re = gauss(rng);
                const double im = gauss(rng);
                w(i, j) = cplx(re, im);
            }
        h.noalias() += stats.cr_sqrt()[l] * w * stats.ct_sqrt()[l];
    }
    h *= scale;
    return {std::move(h)};
}

} // namespace emiopt

#endif

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

#ifndef EMIOPT_EXPERIMENT_HPP
#define EMIOPT_EXPERIMENT_HPP

// SNR sweep runner: optimize the transmit covariance at every SNR point,
// validate against Monte-Carlo, and serialize rows (CSV/JSON) and optimizer
// results (JSON).

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <future>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "emiopt/channel_model.hpp"
#include "emiopt/covariance.hpp"
#include "emiopt/emi.hpp"
#include "emiopt/errors.hpp"
#include "emiopt/optimizer.hpp"
#include "emiopt/random.hpp"

namespace emiopt
{

enum class report_base
{
    nats,
    bits
};

struct experiment_config
{
    std::size_t t = 4;
    std::size_t r = 4;
    std::vector<path_angular_spec> paths;
    std::vector<double> snr_db;
    std::size_t trials = 10000;
    std::uint64_t seed = 1;
    double spacing_wavelengths = 0.5;
    // Kept for provenance; with spacing given in wavelengths it has no numerical effect.
    double carrier_frequency_hz = 2e9;
    bool identity_override = false;
    optimizer_options optimizer;
    int kkt_probes = 8;
    double kkt_tolerance = 1e-3;
    std::string output_path;
    report_base base = report_base::bits;

    void validate() const
    {
        if (t < 1 || r < 1)
            throw config_error("config: t and r must be >= 1");
        if (paths.empty())
            throw config_error("config: at least one path is required");
        if (snr_db.empty())
            throw config_error("config: snr_db must not be empty");
        if (trials < 1)
            throw config_error("config: trials must be >= 1");
        for (double s : snr_db)
            if (!std::isfinite(s))
                throw config_error("config: snr_db entries must be finite");
        if (!(spacing_wavelengths > 0.0) || !std::isfinite(spacing_wavelengths))
            throw config_error("config: spacing_wavelengths must be > 0");
        if (kkt_probes < 0 || !(kkt_tolerance > 0.0))
            throw config_error("config: invalid optimality-check settings");
        try
        {
            for (const auto &p : paths)
                p.validate();
        }
        catch (const invalid_input &e)
        {
            throw config_error(std::string("config: ") + e.what());
        }
    }
};

namespace detail
{

template <class T>
T get_or(const nlohmann::json &j, const char *key, T fallback)
{
    if (!j.contains(key))
        return fallback;
    return j.at(key).get<T>();
}

} // namespace detail

inline experiment_config parse_config(const nlohmann::json &j)
{
    experiment_config c;
    try
    {
        if (!j.is_object())
            throw config_error("config: top level must be an object");
        c.t = j.at("t").get<std::size_t>();
        c.r = j.at("r").get<std::size_t>();
        for (const auto &p : j.at("paths"))
        {
            path_angular_spec s;
            s.mean_departure_angle = p.at("mean_departure_angle").get<double>();
            s.departure_spread = p.at("departure_spread").get<double>();
            s.mean_arrival_angle = p.at("mean_arrival_angle").get<double>();
            s.arrival_spread = p.at("arrival_spread").get<double>();
            s.relative_power = detail::get_or(p, "relative_power", 1.0);
            c.paths.push_back(s);
        }
        c.snr_db = j.at("snr_db").get<std::vector<double>>();
        c.trials = detail::get_or<std::size_t>(j, "trials", c.trials);
        c.seed = detail::get_or<std::uint64_t>(j, "seed", c.seed);
        c.spacing_wavelengths = detail::get_or(j, "spacing_wavelengths", c.spacing_wavelengths);
        c.carrier_frequency_hz = detail::get_or(j, "carrier_frequency_hz", c.carrier_frequency_hz);
        c.identity_override = detail::get_or(j, "identity_override", false);
        c.output_path = detail::get_or<std::string>(j, "output_path", "");
        c.kkt_probes = detail::get_or(j, "kkt_probes", c.kkt_probes);
        c.kkt_tolerance = detail::get_or(j, "kkt_tolerance", c.kkt_tolerance);
        const auto base = detail::get_or<std::string>(j, "report_base", "bits");
        if (base == "bits")
            c.base = report_base::bits;
        else if (base == "nats")
            c.base = report_base::nats;
        else
            throw config_error("config: report_base must be 'nats' or 'bits'");
        if (j.contains("tolerances"))
        {
            const auto &tol = j.at("tolerances");
            auto &o = c.optimizer;
            o.tol_delta = detail::get_or(tol, "tol_delta", o.tol_delta);
            o.tol_q = detail::get_or(tol, "tol_q", o.tol_q);
            o.max_iterations = detail::get_or(tol, "max_iterations", o.max_iterations);
            o.max_restarts = detail::get_or(tol, "max_restarts", o.max_restarts);
            o.stall_window = detail::get_or(tol, "stall_window", o.stall_window);
            o.solver_tol = detail::get_or(tol, "solver_tol", o.solver_tol);
            o.solver_max_iter = detail::get_or(tol, "solver_max_iter", o.solver_max_iter);
        }
    }
    catch (const nlohmann::json::exception &e)
    {
        throw config_error(std::string("config: ") + e.what());
    }
    c.optimizer.seed = c.seed;
    c.validate();
    return c;
}

inline experiment_config load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("config: cannot open " + path);
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(in);
    }
    catch (const nlohmann::json::exception &e)
    {
        throw config_error("config: " + path + ": " + e.what());
    }
    return parse_config(j);
}

// sigma2 = 10^(-snr/10), i.e. 0 dB <=> sigma2 = 1.
inline double sigma2_from_snr_db(double snr_db)
{
    return std::pow(10.0, -snr_db / 10.0);
}

inline channel_stats build_stats(const experiment_config &c, double sigma2)
{
    channel_build_options o;
    o.spacing_wavelengths = c.spacing_wavelengths;
    o.identity_override = c.identity_override;
    return build_channel_stats(c.paths, c.t, c.r, sigma2, o);
}

// One SNR point. EMI fields are in nats; conversion happens on output.
struct experiment_row
{
    double snr_db = 0.0;
    emi_estimate emi_identity_mc;
    emi_estimate emi_opt_mc;
    double emi_identity_approx = 0.0;
    double emi_opt_approx = 0.0;
    int optimizer_iterations = 0;
    double optimize_time_seconds = 0.0;
    double rho_m = 0.0;

    // Soft-check outcomes; not part of the CSV.
    bool converged = false;
    bool monotone = true;
    double kkt_worst = 0.0;
    std::string error;

    bool ok(double kkt_tolerance) const
    {
        return error.empty() && converged && monotone && rho_m < 1.0 && kkt_worst <= kkt_tolerance;
    }
};

struct experiment_point
{
    experiment_row row;
    std::optional<optimization_result> result;
    double sigma2 = 0.0;
};

struct run_options
{
    // Record optimizer wall time; disable for byte-reproducible output.
    bool timing = true;
    // SNR points processed concurrently.
    unsigned threads = 1;
};

inline experiment_point run_point(const experiment_config &c, std::size_t index, const run_options &opts)
{
    experiment_point out;
    auto &row = out.row;
    row.snr_db = c.snr_db[index];
    out.sigma2 = sigma2_from_snr_db(row.snr_db);
    try
    {
        const auto stats = build_stats(c, out.sigma2);
        const auto t0 = std::chrono::steady_clock::now();
        auto res = optimize_covariance(stats, c.optimizer);
        const auto t1 = std::chrono::steady_clock::now();
        row.optimize_time_seconds = opts.timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
        row.optimizer_iterations = res.iterations;
        row.rho_m = res.rho_m;
        row.converged = res.reason == stop_reason::converged;
        row.monotone = res.monotone;
        row.emi_opt_approx = res.emi;

        const auto ident = covariance::identity(c.t);
        row.emi_identity_approx = emi_approx(stats, ident, solver_options{inner_tolerance(c.optimizer)});
        // Both covariances share the channel draws of this point.
        auto point_rng = substream(c.seed, index);
        const std::uint64_t mc_seed = point_rng();
        row.emi_identity_mc = emi_monte_carlo(stats, ident, c.trials, mc_seed);
        row.emi_opt_mc = emi_monte_carlo(stats, res.q_star, c.trials, mc_seed);
        row.kkt_worst = optimality_check(stats, res, c.kkt_probes, 1e-4, c.seed);
        if (!row.converged)
            row.error = "optimizer stopped: " + to_string(res.reason);
        out.result = std::move(res);
    }
    catch (const std::exception &e)
    {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.error = e.what();
        row.emi_identity_mc.mean = row.emi_opt_mc.mean = nan;
        row.emi_identity_mc.std_error = row.emi_opt_mc.std_error = nan;
        row.emi_identity_approx = row.emi_opt_approx = row.rho_m = nan;
    }
    return out;
}

// Rows come back in config order regardless of completion order.
inline std::vector<experiment_point> run_experiment(const experiment_config &c, const run_options &opts = {})
{
    c.validate();
    const std::size_t n = c.snr_db.size();
    std::vector<experiment_point> out(n);
    const unsigned threads = std::max(1u, opts.threads);
    for (std::size_t begin = 0; begin < n; begin += threads)
    {
        const std::size_t end = std::min(n, begin + threads);
        if (threads == 1)
        {
            out[begin] = run_point(c, begin, opts);
            continue;
        }
        std::vector<std::future<experiment_point>> jobs;
        for (std::size_t i = begin; i < end; ++i)
            jobs.push_back(std::async(std::launch::async, run_point, std::cref(c), i, std::cref(opts)));
        for (std::size_t i = begin; i < end; ++i)
            out[i] = jobs[i - begin].get();
    }
    return out;
}

inline constexpr const char *csv_header =
    "snr_db,emi_identity_mc,emi_identity_stderr,emi_opt_mc,emi_opt_stderr,emi_identity_approx,emi_opt_approx,"
    "iterations,time_s,rho_m";

inline std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double base_scale(report_base base)
{
    return base == report_base::bits ? 1.0 / std::numbers::ln2 : 1.0;
}

inline std::string csv_line(const experiment_row &row, report_base base)
{
    const double k = base_scale(base);
    std::string s;
    s += format_double(row.snr_db) + ',';
    s += format_double(row.emi_identity_mc.mean * k) + ',';
    s += format_double(row.emi_identity_mc.std_error * k) + ',';
    s += format_double(row.emi_opt_mc.mean * k) + ',';
    s += format_double(row.emi_opt_mc.std_error * k) + ',';
    s += format_double(row.emi_identity_approx * k) + ',';
    s += format_double(row.emi_opt_approx * k) + ',';
    s += std::to_string(row.optimizer_iterations) + ',';
    s += format_double(row.optimize_time_seconds) + ',';
    s += format_double(row.rho_m);
    return s;
}

inline void emit_csv(const std::vector<experiment_row> &rows, const std::string &path, report_base base)
{
    if (rows.empty())
        throw invalid_input("emit_csv: no rows");
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error("emit_csv: cannot open " + path);
    out << csv_header << '\n';
    for (const auto &r : rows)
        out << csv_line(r, base) << '\n';
    if (!out)
        throw io_error("emit_csv: write failed for " + path);
}

// Reads a file written by emit_csv. Values stay in the file's units; trial
// counts and seeds are not part of the CSV.
inline std::vector<experiment_row> parse_csv(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw io_error("parse_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != csv_header)
        throw io_error("parse_csv: unexpected header in " + path);
    std::vector<experiment_row> rows;
    while (std::getline(in, line))
    {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ','))
            f.push_back(cell);
        if (f.size() != 10)
            throw io_error("parse_csv: expected 10 columns in " + path);
        auto num = [](const std::string &s) { return std::strtod(s.c_str(), nullptr); };
        experiment_row r;
        r.snr_db = num(f[0]);
        r.emi_identity_mc.mean = num(f[1]);
        r.emi_identity_mc.std_error = num(f[2]);
        r.emi_opt_mc.mean = num(f[3]);
        r.emi_opt_mc.std_error = num(f[4]);
        r.emi_identity_approx = num(f[5]);
        r.emi_opt_approx = num(f[6]);
        r.optimizer_iterations = std::stoi(f[7]);
        r.optimize_time_seconds = num(f[8]);
        r.rho_m = num(f[9]);
        rows.push_back(r);
    }
    return rows;
}

namespace detail
{

inline nlohmann::json finite_or_null(double v)
{
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline nlohmann::json vec_to_json(const dvec &v)
{
    return std::vector<double>(v.data(), v.data() + v.size());
}

inline dvec vec_from_json(const nlohmann::json &j)
{
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const dvec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

} // namespace detail

inline nlohmann::json qstar_to_json(const optimization_result &res, double sigma2)
{
    const cmat &q = res.q_star.matrix();
    nlohmann::json re = nlohmann::json::array(), im = nlohmann::json::array();
    for (Eigen::Index i = 0; i < q.rows(); ++i)
    {
        std::vector<double> rr, ii;
        for (Eigen::Index k = 0; k < q.cols(); ++k)
        {
            rr.push_back(q(i, k).real());
            ii.push_back(q(i, k).imag());
        }
        re.push_back(rr);
        im.push_back(ii);
    }
    nlohmann::json traj = nlohmann::json::array();
    for (const auto &p : res.trajectory)
        traj.push_back({{"iteration", p.iteration},
                        {"emi", p.emi},
                        {"q_step", detail::finite_or_null(p.q_step)},
                        {"delta_step", detail::finite_or_null(p.delta_step)}});
    return {{"t", q.rows()},
            {"sigma2", sigma2},
            {"q_star", {{"real", re}, {"imag", im}}},
            {"delta_star", detail::vec_to_json(res.delta_star)},
            {"delta_tilde_star", detail::vec_to_json(res.delta_tilde_star)},
            {"emi", res.emi},
            {"rho_m", res.rho_m},
            {"iterations", res.iterations},
            {"restarts", res.restarts},
            {"monotone", res.monotone},
            {"stop_reason", to_string(res.reason)},
            {"trajectory", traj}};
}

struct loaded_qstar
{
    optimization_result result;
    double sigma2 = 0.0;
};

inline loaded_qstar qstar_from_json(const nlohmann::json &j)
{
    try
    {
        loaded_qstar out;
        auto &res = out.result;
        const auto t = j.at("t").get<Eigen::Index>();
        const auto &re = j.at("q_star").at("real");
        const auto &im = j.at("q_star").at("imag");
        cmat q(t, t);
        for (Eigen::Index i = 0; i < t; ++i)
            for (Eigen::Index k = 0; k < t; ++k)
                q(i, k) = cplx(re.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>(),
                               im.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(k)).get<double>());
        res.q_star = covariance(q);
        out.sigma2 = j.at("sigma2").get<double>();
        res.delta_star = detail::vec_from_json(j.at("delta_star"));
        res.delta_tilde_star = detail::vec_from_json(j.at("delta_tilde_star"));
        res.emi = j.at("emi").get<double>();
        res.rho_m = j.at("rho_m").get<double>();
        res.iterations = j.at("iterations").get<int>();
        res.restarts = j.at("restarts").get<int>();
        res.monotone = j.at("monotone").get<bool>();
        res.reason = stop_reason_from_string(j.at("stop_reason").get<std::string>());
        const double inf = std::numeric_limits<double>::infinity();
        for (const auto &p : j.at("trajectory"))
            res.trajectory.push_back({p.at("iteration").get<int>(), p.at("emi").get<double>(),
                                      p.at("q_step").is_null() ? inf : p.at("q_step").get<double>(),
                                      p.at("delta_step").is_null() ? inf : p.at("delta_step").get<double>()});
        return out;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw io_error(std::string("qstar: malformed document: ") + e.what());
    }
}

inline void write_json_file(const nlohmann::json &j, const std::string &path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error("cannot open " + path + " for writing");
    out << j.dump(2) << '\n';
    if (!out)
        throw io_error("write failed for " + path);
}

inline void emit_qstar(const optimization_result &res, double sigma2, const std::string &path)
{
    write_json_file(qstar_to_json(res, sigma2), path);
}

inline loaded_qstar load_qstar(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw io_error("load_qstar: cannot open " + path);
    try
    {
        return qstar_from_json(nlohmann::json::parse(in));
    }
    catch (const nlohmann::json::parse_error &e)
    {
        throw io_error("load_qstar: " + path + ": " + e.what());
    }
}

inline nlohmann::json rows_to_json(const std::vector<experiment_point> &points, report_base base)
{
    const double k = base_scale(base);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto &p : points)
    {
        const auto &r = p.row;
        nlohmann::json j{{"snr_db", r.snr_db},
                         {"emi_identity_mc", detail::finite_or_null(r.emi_identity_mc.mean * k)},
                         {"emi_identity_stderr", detail::finite_or_null(r.emi_identity_mc.std_error * k)},
                         {"emi_opt_mc", detail::finite_or_null(r.emi_opt_mc.mean * k)},
                         {"emi_opt_stderr", detail::finite_or_null(r.emi_opt_mc.std_error * k)},
                         {"emi_identity_approx", detail::finite_or_null(r.emi_identity_approx * k)},
                         {"emi_opt_approx", detail::finite_or_null(r.emi_opt_approx * k)},
                         {"iterations", r.optimizer_iterations},
                         {"time_s", r.optimize_time_seconds},
                         {"rho_m", detail::finite_or_null(r.rho_m)},
                         {"kkt_worst", detail::finite_or_null(r.kkt_worst)}};
        if (!r.error.empty())
            j["error"] = r.error;
        if (p.result)
            j["qstar"] = qstar_to_json(*p.result, p.sigma2);
        rows.push_back(std::move(j));
    }
    return {{"report_base", base == report_base::bits ? "bits" : "nats"}, {"rows", rows}};
}

} // namespace emiopt

#endif

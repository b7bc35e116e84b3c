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

// Command-line experiment runner.
//
//   emiopt run <config.json> [--output PATH] [--seed N] [--trials N]
//              [--snr a,b,c] [--format csv|json] [--threads N]
//              [--no-timing] [--qstar-dir DIR]
//   emiopt verify <config.json> <qstar.json> [--probes N] [--step H]
//
// Exit codes: 0 success, 1 convergence or soft-check failure, 2 config/IO error.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "emiopt/experiment.hpp"

namespace
{

constexpr int exit_ok = 0;
constexpr int exit_convergence = 1;
constexpr int exit_config = 2;

std::vector<double> parse_snr_list(const std::string &s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        std::size_t used = 0;
        double v = 0.0;
        try
        {
            v = std::stod(item, &used);
        }
        catch (const std::exception &)
        {
            throw emiopt::config_error("--snr: cannot parse '" + item + "'");
        }
        if (used != item.size())
            throw emiopt::config_error("--snr: cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty())
        throw emiopt::config_error("--snr: empty list");
    return out;
}

std::string snr_tag(double snr)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", snr);
    return buf;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Transmit covariance optimization for frequency-selective MIMO channels"};
    app.require_subcommand(1);

    std::string config_path, output, snr, format = "csv", qstar_dir;
    std::uint64_t seed = 0;
    std::size_t trials = 0;
    unsigned threads = 1;
    bool no_timing = false;

    auto *run = app.add_subcommand("run", "Sweep SNR, optimize, and validate by Monte-Carlo");
    run->add_option("config", config_path, "Scenario config (JSON)")->required();
    auto *o_output = run->add_option("--output", output, "Output file (defaults to config output_path, else stdout)");
    auto *o_seed = run->add_option("--seed", seed, "Random seed (overrides config)");
    auto *o_trials = run->add_option("--trials", trials, "Monte-Carlo trials (overrides config)");
    auto *o_snr = run->add_option("--snr", snr, "Comma-separated SNR list in dB (overrides config)");
    run->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    run->add_option("--threads", threads, "SNR points processed concurrently")->check(CLI::Range(1u, 1024u));
    run->add_flag("--no-timing", no_timing, "Write 0 in the time column (byte-reproducible output)");
    run->add_option("--qstar-dir", qstar_dir, "Directory for per-SNR optimizer results (JSON)");

    std::string qstar_path;
    int probes = 50;
    double step = 1e-4;
    auto *verify = app.add_subcommand("verify", "Re-check optimality of a saved covariance");
    verify->add_option("config", config_path, "Scenario config (JSON)")->required();
    verify->add_option("qstar", qstar_path, "Optimizer result written by run --qstar-dir")->required();
    verify->add_option("--probes", probes, "Random feasible directions to probe")->check(CLI::NonNegativeNumber);
    verify->add_option("--step", step, "Finite-difference step")->check(CLI::Range(1e-12, 0.5));

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    emiopt::experiment_config cfg;
    try
    {
        cfg = emiopt::load_config(config_path);
        if (*o_seed)
        {
            cfg.seed = seed;
            cfg.optimizer.seed = seed;
        }
        if (*o_trials)
            cfg.trials = trials;
        if (*o_snr)
            cfg.snr_db = parse_snr_list(snr);
        cfg.validate();
    }
    catch (const emiopt::error &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }

    if (*verify)
    {
        try
        {
            const auto saved = emiopt::load_qstar(qstar_path);
            const auto stats = emiopt::build_stats(cfg, saved.sigma2);
            const double worst = emiopt::optimality_check(stats, saved.result, probes, step, cfg.seed);
            const bool pass = worst <= cfg.kkt_tolerance;
            std::cout << "worst_directional_derivative " << emiopt::format_double(worst) << '\n'
                      << "tolerance " << emiopt::format_double(cfg.kkt_tolerance) << '\n'
                      << (pass ? "optimal" : "not optimal") << '\n';
            return pass ? exit_ok : exit_convergence;
        }
        catch (const emiopt::error &e)
        {
            std::cerr << "error: " << e.what() << '\n';
            return exit_config;
        }
    }

    if (output.empty() && !*o_output)
        output = cfg.output_path;

    const auto points = emiopt::run_experiment(cfg, {!no_timing, threads});
    std::vector<emiopt::experiment_row> rows;
    bool all_ok = true;
    for (const auto &p : points)
    {
        rows.push_back(p.row);
        if (!p.row.ok(cfg.kkt_tolerance))
        {
            all_ok = false;
            std::cerr << "snr " << snr_tag(p.row.snr_db) << " dB: "
                      << (p.row.error.empty() ? "soft check failed" : p.row.error) << " (rho_m "
                      << p.row.rho_m << ", kkt " << p.row.kkt_worst << ", monotone " << p.row.monotone << ")\n";
        }
    }

    try
    {
        if (format == "csv")
        {
            if (output.empty())
            {
                std::cout << emiopt::csv_header << '\n';
                for (const auto &r : rows)
                    std::cout << emiopt::csv_line(r, cfg.base) << '\n';
            }
            else
                emiopt::emit_csv(rows, output, cfg.base);
        }
        else
        {
            const auto doc = emiopt::rows_to_json(points, cfg.base);
            if (output.empty())
                std::cout << doc.dump(2) << '\n';
            else
                emiopt::write_json_file(doc, output);
        }
        if (!qstar_dir.empty())
        {
            std::filesystem::create_directories(qstar_dir);
            for (const auto &p : points)
                if (p.result)
                    emiopt::emit_qstar(*p.result, p.sigma2,
                                       (std::filesystem::path(qstar_dir) / ("qstar_snr_" + snr_tag(p.row.snr_db) + ".json")).string());
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return exit_config;
    }
    return all_ok ? exit_ok : exit_convergence;
}

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
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

#include "emiopt/experiment.hpp"
#include "test_support.hpp"

using namespace emiopt;
namespace fs = std::filesystem;

namespace
{

nlohmann::json table1_json()
{
    nlohmann::json paths = nlohmann::json::array();
    for (const auto &p : test::table1_paths())
        paths.push_back({{"mean_departure_angle", p.mean_departure_angle},
                         {"departure_spread", p.departure_spread},
                         {"mean_arrival_angle", p.mean_arrival_angle},
                         {"arrival_spread", p.arrival_spread}});
    return {{"t", 4}, {"r", 4}, {"paths", paths}, {"snr_db", {0.0, 10.0}}, {"trials", 50}, {"seed", 7}};
}

fs::path scratch(const std::string &name)
{
    const auto dir = fs::temp_directory_path() / "emiopt_tests";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("parse_config - defaults and overrides")
{
    auto j = table1_json();
    j["tolerances"] = {{"tol_delta", 1e-9}, {"max_iterations", 50}};
    j["report_base"] = "nats";
    const auto c = parse_config(j);
    CHECK(c.t == 4);
    CHECK(c.paths.size() == 5);
    CHECK(c.paths[0].relative_power == 1.0);
    CHECK(c.snr_db == std::vector<double>{0.0, 10.0});
    CHECK(c.optimizer.tol_delta == 1e-9);
    CHECK(c.optimizer.tol_q == 1e-8);
    CHECK(c.optimizer.max_iterations == 50);
    CHECK(c.optimizer.seed == 7);
    CHECK(c.base == report_base::nats);
    CHECK(c.spacing_wavelengths == 0.5);
}

TEST_CASE("parse_config - invalid documents")
{
    auto missing = table1_json();
    missing.erase("paths");
    CHECK_THROWS_AS(parse_config(missing), config_error);

    auto empty_snr = table1_json();
    empty_snr["snr_db"] = nlohmann::json::array();
    CHECK_THROWS_AS(parse_config(empty_snr), config_error);

    auto zero_trials = table1_json();
    zero_trials["trials"] = 0;
    CHECK_THROWS_AS(parse_config(zero_trials), config_error);

    auto bad_base = table1_json();
    bad_base["report_base"] = "decibels";
    CHECK_THROWS_AS(parse_config(bad_base), config_error);

    auto bad_spread = table1_json();
    bad_spread["paths"][0]["departure_spread"] = -1.0;
    CHECK_THROWS_AS(parse_config(bad_spread), config_error);

    auto wrong_type = table1_json();
    wrong_type["t"] = "four";
    CHECK_THROWS_AS(parse_config(wrong_type), config_error);

    CHECK_THROWS_AS(load_config("/nonexistent/emiopt.json"), config_error);
}

TEST_CASE("bundled Table I config loads")
{
    const auto c = load_config(EMIOPT_SOURCE_DIR "/configs/table1.json");
    CHECK(c.paths.size() == 5);
    CHECK(c.snr_db.size() == 6);
    CHECK(c.trials == 100000);
    CHECK(c.base == report_base::bits);
}

TEST_CASE("sigma2_from_snr_db")
{
    CHECK(sigma2_from_snr_db(0.0) == 1.0);
    CHECK(sigma2_from_snr_db(10.0) == Catch::Approx(0.1));
    CHECK(sigma2_from_snr_db(-5.0) == Catch::Approx(std::sqrt(10.0)));
}

TEST_CASE("emit_csv - layout, units and parse-back")
{
    std::vector<experiment_row> rows;
    for (int i = 0; i < 6; ++i)
    {
        experiment_row r;
        r.snr_db = -5.0 + 5.0 * i;
        r.emi_identity_mc = {1.0 / 3.0 + i, 0.01 / 7.0, 10, 1};
        r.emi_opt_mc = {std::numbers::pi + i, 0.02 / 3.0, 10, 1};
        r.emi_identity_approx = 0.1 * i + 1e-17;
        r.emi_opt_approx = std::exp(0.3 * i);
        r.optimizer_iterations = 10 + i;
        r.optimize_time_seconds = 1.0 / 9.0;
        r.rho_m = 0.123456789012345678;
        rows.push_back(r);
    }
    const auto nats = scratch("rows_nats.csv");
    const auto bits = scratch("rows_bits.csv");
    emit_csv(rows, nats.string(), report_base::nats);
    emit_csv(rows, bits.string(), report_base::bits);

    const std::string text = slurp(nats);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
    CHECK(text.substr(0, text.find('\n')) == csv_header);

    const auto back = parse_csv(nats.string());
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        CHECK(back[i].snr_db == rows[i].snr_db);
        CHECK(back[i].emi_identity_mc.mean == rows[i].emi_identity_mc.mean);
        CHECK(back[i].emi_identity_mc.std_error == rows[i].emi_identity_mc.std_error);
        CHECK(back[i].emi_opt_mc.mean == rows[i].emi_opt_mc.mean);
        CHECK(back[i].emi_opt_mc.std_error == rows[i].emi_opt_mc.std_error);
        CHECK(back[i].emi_identity_approx == rows[i].emi_identity_approx);
        CHECK(back[i].emi_opt_approx == rows[i].emi_opt_approx);
        CHECK(back[i].optimizer_iterations == rows[i].optimizer_iterations);
        CHECK(back[i].optimize_time_seconds == rows[i].optimize_time_seconds);
        CHECK(back[i].rho_m == rows[i].rho_m);
    }

    const auto in_bits = parse_csv(bits.string());
    for (std::size_t i = 0; i < rows.size(); ++i)
    {
        CHECK(in_bits[i].emi_opt_mc.mean == Catch::Approx(rows[i].emi_opt_mc.mean / std::numbers::ln2).epsilon(1e-15));
        CHECK(in_bits[i].emi_identity_mc.std_error ==
              Catch::Approx(rows[i].emi_identity_mc.std_error / std::numbers::ln2).epsilon(1e-15));
        CHECK(in_bits[i].emi_opt_approx == Catch::Approx(rows[i].emi_opt_approx / std::numbers::ln2).epsilon(1e-15));
        CHECK(in_bits[i].rho_m == rows[i].rho_m);
        CHECK(in_bits[i].snr_db == rows[i].snr_db);
    }

    CHECK_THROWS_AS(emit_csv({}, nats.string(), report_base::nats), invalid_input);
    CHECK_THROWS_AS(emit_csv(rows, "/nonexistent/dir/out.csv", report_base::nats), io_error);
}

TEST_CASE("emit_qstar - lossless round trip")
{
    const auto s = test::table1_stats(0.2);
    const auto res = optimize_covariance(s);
    const auto path = scratch("qstar.json");
    emit_qstar(res, 0.2, path.string());
    const auto back = load_qstar(path.string());
    CHECK(back.sigma2 == 0.2);
    CHECK((back.result.q_star.matrix() - res.q_star.matrix()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(back.result.delta_star == res.delta_star);
    CHECK(back.result.delta_tilde_star == res.delta_tilde_star);
    CHECK(back.result.reason == res.reason);
    REQUIRE(back.result.trajectory.size() == res.trajectory.size());
    CHECK(std::isinf(back.result.trajectory.front().delta_step));
    CHECK(back.result.trajectory.back().emi == res.trajectory.back().emi);

    REQUIRE(back.result.delta_star.size() == 5);
    CHECK((back.result.delta_star.array() > 0.0).all());

    // The reloaded matrix re-verifies offline.
    CHECK(optimality_check(s, back.result, 5) <= 1e-3);
    CHECK_THROWS_AS(load_qstar("/nonexistent/q.json"), io_error);
    CHECK_THROWS_AS(qstar_from_json(nlohmann::json{{"t", 2}}), io_error);
}

TEST_CASE("emit_qstar - identity optimum is written exactly")
{
    const channel_stats s(3, 2, {cmat::Identity(3, 3)}, {cmat::Identity(2, 2)}, 1.0);
    const auto res = optimize_covariance(s);
    const auto path = scratch("qstar_identity.json");
    emit_qstar(res, 1.0, path.string());
    const auto j = nlohmann::json::parse(slurp(path));
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k)
        {
            CHECK(j["q_star"]["real"][i][k].get<double>() == (i == k ? 1.0 : 0.0));
            CHECK(j["q_star"]["imag"][i][k].get<double>() == 0.0);
        }
    CHECK(j["stop_reason"] == "converged");
}

TEST_CASE("run_experiment - deterministic and ordered")
{
    auto c = parse_config(table1_json());
    c.snr_db = {10.0, -5.0, 20.0};
    c.trials = 200;
    c.kkt_probes = 2;
    const auto a = run_experiment(c, {false, 1});
    const auto b = run_experiment(c, {false, 3});
    REQUIRE(a.size() == 3);
    for (std::size_t i = 0; i < 3; ++i)
    {
        CHECK(a[i].row.snr_db == c.snr_db[i]);
        CHECK(csv_line(a[i].row, report_base::bits) == csv_line(b[i].row, report_base::bits));
        CHECK(a[i].row.ok(c.kkt_tolerance));
        CHECK(a[i].row.optimize_time_seconds == 0.0);
        CHECK(a[i].row.emi_opt_mc.mean >= 0.0);
        CHECK(a[i].row.emi_identity_approx >= 0.0);
    }
    const auto fa = scratch("det_a.csv"), fb = scratch("det_b.csv");
    std::vector<experiment_row> ra, rb;
    for (std::size_t i = 0; i < 3; ++i)
    {
        ra.push_back(a[i].row);
        rb.push_back(b[i].row);
    }
    emit_csv(ra, fa.string(), report_base::bits);
    emit_csv(rb, fb.string(), report_base::bits);
    CHECK(slurp(fa) == slurp(fb));
}

TEST_CASE("run_experiment - failures are recorded per row")
{
    auto c = parse_config(table1_json());
    c.snr_db = {0.0};
    c.optimizer.solver_max_iter = 1;
    const auto out = run_experiment(c);
    REQUIRE(out.size() == 1);
    CHECK_FALSE(out[0].row.error.empty());
    CHECK_FALSE(out[0].row.ok(c.kkt_tolerance));
    CHECK_FALSE(out[0].result.has_value());
    CHECK(std::isnan(out[0].row.emi_opt_mc.mean));
}

TEST_CASE("rows_to_json - carries rows and optimizer results")
{
    auto c = parse_config(table1_json());
    c.snr_db = {5.0};
    c.trials = 20;
    const auto out = run_experiment(c, {false, 1});
    const auto j = rows_to_json(out, report_base::nats);
    CHECK(j["report_base"] == "nats");
    REQUIRE(j["rows"].size() == 1);
    CHECK(j["rows"][0]["emi_opt_mc"].get<double>() == out[0].row.emi_opt_mc.mean);
    const auto q = qstar_from_json(j["rows"][0]["qstar"]);
    CHECK(q.result.q_star.matrix() == out[0].result->q_star.matrix());
}

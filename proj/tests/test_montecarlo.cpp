// SPDX-License-Identifier: Apache-2.0
//
// nrdpe - simulator and estimator library for 5G NR downlink positioning
// Copyright (C) 2026 the nrdpe contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software distributed
// under the License is distributed on an "AS IS" BASIS, WITHOUT WARRANTIES OR
// CONDITIONS OF ANY KIND, either express or implied. See the License for the
// specific language governing permissions and limitations under the License.

#include <catch2/catch_amalgamated.hpp>

#include <nrdpe/montecarlo.hpp>

using namespace nrdpe;

namespace
{
    // Small numerology, four stations, kept well inside the CP window.
    SimConfig tiny_cfg()
    {
        SimConfig c;
        c.bss = {{1, {15.0, 15.0, 10.0}},
                 {2, {65.0, 15.0, 10.0}},
                 {3, {15.0, 65.0, 10.0}},
                 {4, {65.0, 65.0, 10.0}}};
        c.region = {0.0, 80.0, 0.0, 80.0};
        c.ue.height_m = 2.0;
        c.ue.inset_frac = 0.2;
        c.ofdm.n_subcarriers = 256;
        c.ofdm.scs_hz = 480e3; // fs = 122.88 MHz
        c.ofdm.cp_samples = 64;
        c.channel.delay_spread_ns = 20.0;
        c.exp.n_bs = 3;
        c.exp.n_trials = 6;
        c.exp.snr_mode = "fixed";
        c.exp.snr_db = 20.0;
        c.exp.clock_bias_sigma_ns = 5.0;
        c.exp.otdoa_enabled = true;
        c.dpe.extent_m = 40.0;
        c.dpe.resolution_m = 2.0;
        c.dpe.refine_stages = 1;
        c.dpe.shrink_factor = 5.0;
        c.dpe.bias_axis = true;
        c.dpe.bias_range_ns = 15.0;
        c.dpe.bias_step_ns = 3.0;
        c.dpe.upsample = 32;
        return c;
    }

    bool same_record(const TrialRecord &a, const TrialRecord &b)
    {
        return a.trial_id == b.trial_id && a.seed == b.seed && a.truth_x == b.truth_x &&
               a.truth_y == b.truth_y && a.clock_bias_ns == b.clock_bias_ns &&
               a.los_count == b.los_count && a.dpe_ok == b.dpe_ok && a.dpe_x == b.dpe_x &&
               a.dpe_y == b.dpe_y && a.dpe_err_m == b.dpe_err_m &&
               a.otdoa_ok == b.otdoa_ok && a.otdoa_x == b.otdoa_x && a.otdoa_y == b.otdoa_y &&
               a.failed == b.failed;
    }
} // namespace

TEST_CASE("experiments are reproducible and worker-count independent")
{
    SimConfig cfg = tiny_cfg();
    ExperimentResult a = run_experiment(cfg, 42, 1);
    ExperimentResult b = run_experiment(cfg, 42, 1);
    ExperimentResult c = run_experiment(cfg, 42, 3);

    REQUIRE(a.records.size() == 6);
    for (std::size_t t = 0; t < a.records.size(); t++)
    {
        REQUIRE(same_record(a.records[t], b.records[t]));
        REQUIRE(same_record(a.records[t], c.records[t]));
        REQUIRE(a.records[t].trial_id == t);
        REQUIRE(a.records[t].n_links == 3);
    }
    REQUIRE(a.dpe.rmse_m == c.dpe.rmse_m);
    REQUIRE(a.config_digest == c.config_digest);

    ExperimentResult d = run_experiment(cfg, 43, 1);
    bool any_diff = false;
    for (std::size_t t = 0; t < a.records.size(); t++)
        any_diff = any_diff || !same_record(a.records[t], d.records[t]);
    REQUIRE(any_diff);
}

TEST_CASE("a trial does not depend on how many trials run")
{
    SimConfig cfg = tiny_cfg();
    SimConfig smaller = cfg;
    smaller.exp.n_trials = 3;
    ExperimentResult big = run_experiment(cfg, 7, 1);
    ExperimentResult small = run_experiment(smaller, 7, 1);
    for (std::size_t t = 0; t < 3; t++)
        REQUIRE(same_record(big.records[t], small.records[t]));
}

TEST_CASE("scene synthesis is deterministic")
{
    SimConfig cfg = tiny_cfg();
    ExperimentContext ctx(cfg);
    TrialSignals s1 = synthesize_trial(ctx, 42, 2);
    TrialSignals s2 = synthesize_trial(ctx, 42, 2);
    REQUIRE(s1.scene.ue.x == s2.scene.ue.x);
    REQUIRE(s1.scene.clock_bias_s == s2.scene.clock_bias_s);
    REQUIRE(s1.scene.selected == s2.scene.selected);
    REQUIRE(s1.scene.snr_db == s2.scene.snr_db);
    REQUIRE(s1.rx.size() == 3);
    for (std::size_t j = 0; j < s1.rx.size(); j++)
    {
        REQUIRE(s1.rx[j].bs_id == s2.rx[j].bs_id);
        REQUIRE(s1.rx[j].samples[0] == s2.rx[j].samples[0]);
        REQUIRE(s1.rx[j].samples.back() == s2.rx[j].samples.back());
    }

    // UE stays inside the inset region, stations are sorted nearest first
    REQUIRE(s1.scene.ue.x >= 16.0);
    REQUIRE(s1.scene.ue.x <= 64.0);
    REQUIRE(std::abs(s1.scene.clock_bias_s) <= 15e-9);
    for (std::size_t j = 1; j < s1.scene.selected.size(); j++)
        REQUIRE(dist3(cfg.bss[s1.scene.selected[j - 1]].pos, s1.scene.ue) <=
                dist3(cfg.bss[s1.scene.selected[j]].pos, s1.scene.ue));
}

TEST_CASE("forced link conditions pin the fraction of direct paths")
{
    SimConfig cfg = tiny_cfg();
    cfg.channel.delay_spread_ns = 10.0;
    cfg.exp.n_trials = 4;
    cfg.exp.force_los_pattern = {true, true, true};
    ExperimentResult all_los = run_experiment(cfg, 9, 1);
    REQUIRE(all_los.dpe.los_fraction == Catch::Approx(1.0));
    for (const auto &r : all_los.records)
        REQUIRE(r.los_count == 3);

    cfg.exp.force_los_pattern = {false, false, false};
    ExperimentResult none = run_experiment(cfg, 9, 1);
    REQUIRE(none.dpe.los_fraction == Catch::Approx(0.0));

    // mixed pattern applies to the proximity order
    cfg.exp.force_los_pattern = {true, false, false};
    ExperimentResult mixed = run_experiment(cfg, 9, 1);
    for (const auto &r : mixed.records)
        REQUIRE(r.los_count == 1);
}

TEST_CASE("fixed snr is recorded per link, budget snr varies")
{
    SimConfig cfg = tiny_cfg();
    cfg.exp.n_trials = 2;
    ExperimentResult fixed = run_experiment(cfg, 4, 1);
    for (const auto &r : fixed.records)
    {
        REQUIRE(r.mean_snr_db == Catch::Approx(20.0));
        REQUIRE(r.min_snr_db == Catch::Approx(20.0));
    }

    cfg.exp.snr_mode = "budget";
    ExperimentResult budget = run_experiment(cfg, 4, 1);
    for (const auto &r : budget.records)
        REQUIRE(r.max_snr_db > r.min_snr_db);
}

TEST_CASE("overly long channels are accounted as failed trials")
{
    SimConfig cfg = tiny_cfg();
    cfg.channel.delay_spread_ns = 35.0;
    cfg.exp.n_trials = 10;
    cfg.exp.force_los_pattern = {true, false, false};
    ExperimentResult res = run_experiment(cfg, 11, 1);

    std::size_t failed = 0;
    for (const auto &r : res.records)
        if (r.failed)
        {
            failed++;
            REQUIRE(!r.dpe_ok);
            REQUIRE(!r.otdoa_ok);
            REQUIRE(!r.error_msg.empty());
        }
    REQUIRE(failed > 0);
    REQUIRE(failed < res.records.size());
    REQUIRE(res.dpe.failed_trials == failed);
    REQUIRE(res.dpe.sorted_errors_m.size() == res.records.size() - failed);

    // a spread whose scaled profile exceeds the whole CP fails unconditionally
    cfg.channel.delay_spread_ns = 45.0;
    cfg.exp.force_los_pattern = {true, true, true};
    REQUIRE_THROWS_AS(run_experiment(cfg, 11, 1), empty_statistics_error);
}

TEST_CASE("a failing baseline does not poison the experiment")
{
    SimConfig cfg = tiny_cfg();
    cfg.bss = {{1, {15.0, 15.0, 10.0}}, {2, {40.0, 15.0, 10.0}}, {3, {65.0, 15.0, 10.0}}};
    cfg.channel.delay_spread_ns = 10.0;
    cfg.ue.fixed = true;
    cfg.ue.fixed_x = 30.0;
    cfg.ue.fixed_y = 40.0;
    cfg.exp.n_trials = 4;
    cfg.exp.force_los_pattern = {false, false, false};
    ExperimentResult res = run_experiment(cfg, 3, 1);

    for (const auto &r : res.records)
    {
        REQUIRE(!r.failed);
        REQUIRE(r.dpe_ok);
        REQUIRE(!r.otdoa_ok); // collinear stations cannot be inverted
        REQUIRE(r.truth_x == 30.0);
    }
    REQUIRE(res.otdoa.n_trials == 0);
    bool warned = false;
    for (const auto &w : res.warnings)
        warned = warned || w.find("baseline") != std::string::npos;
    REQUIRE(warned);
}

TEST_CASE("summaries compute the advertised statistics")
{
    std::vector<TrialRecord> recs(3);
    recs[0].dpe_ok = true;
    recs[0].dpe_err_m = 3.0;
    recs[0].los_count = 1;
    recs[0].n_links = 2;
    recs[1].dpe_ok = true;
    recs[1].dpe_err_m = 4.0;
    recs[1].los_count = 2;
    recs[1].n_links = 2;
    recs[2].failed = true;
    recs[2].n_links = 2;

    ExperimentSummary s = summarize_dpe(recs);
    REQUIRE(s.n_trials == 3);
    REQUIRE(s.failed_trials == 1);
    REQUIRE(s.rmse_m == Catch::Approx(3.53553391).epsilon(1e-8));
    REQUIRE(s.pct.p50 == Catch::Approx(3.0));
    REQUIRE(s.pct.p90 == Catch::Approx(4.0));
    REQUIRE(s.los_fraction == Catch::Approx(0.5));

    std::vector<double> sorted(100);
    for (std::size_t i = 0; i < 100; i++)
        sorted[i] = static_cast<double>(i + 1);
    REQUIRE(percentile(sorted, 0.50) == Catch::Approx(50.0));
    REQUIRE(percentile(sorted, 0.90) == Catch::Approx(90.0));
    REQUIRE(percentile(sorted, 0.99) == Catch::Approx(99.0));
    REQUIRE(percentile(sorted, 1.0) == Catch::Approx(100.0));
    REQUIRE(percentile(sorted, 0.001) == Catch::Approx(1.0));
    REQUIRE_THROWS_AS(percentile(sorted, 0.0), domain_error);
    REQUIRE_THROWS_AS(percentile(sorted, 1.5), domain_error);
    REQUIRE_THROWS_AS(percentile({}, 0.5), empty_statistics_error);
    REQUIRE_THROWS_AS(summarize_dpe({}), empty_statistics_error);
}

TEST_CASE("sweeps share per-trial randomness across points")
{
    SimConfig cfg = tiny_cfg();
    cfg.exp.n_trials = 4;

    SimConfig lo = cfg, hi = cfg;
    lo.exp.snr_db = 5.0;
    hi.exp.snr_db = 25.0;
    ExperimentResult rl = run_experiment(lo, 21, 1);
    ExperimentResult rh = run_experiment(hi, 21, 1);
    for (std::size_t t = 0; t < 4; t++)
    {
        REQUIRE(rl.records[t].truth_x == rh.records[t].truth_x);
        REQUIRE(rl.records[t].truth_y == rh.records[t].truth_y);
        REQUIRE(rl.records[t].clock_bias_ns == rh.records[t].clock_bias_ns);
    }

    auto points = sweep_axis(cfg, "snr_db", {5.0, 25.0}, 21, 1);
    REQUIRE(points.size() == 2);
    REQUIRE(points[0].axis_value == 5.0);
    REQUIRE(points[0].dpe.rmse_m == rl.dpe.rmse_m);
    REQUIRE(points[1].dpe.rmse_m == rh.dpe.rmse_m);

    auto by_m = sweep_axis(cfg, "n_bs", {2.0, 3.0}, 21, 1);
    REQUIRE(by_m.size() == 2);

    REQUIRE_THROWS_AS(sweep_axis(cfg, "n_bs", {2.5}, 21, 1), config_error);
    REQUIRE_THROWS_AS(sweep_axis(cfg, "delay", {1.0}, 21, 1), config_error);
    REQUIRE_THROWS_AS(sweep_axis(cfg, "snr_db", {}, 21, 1), config_error);
}

TEST_CASE("tap window derives from the configured profiles")
{
    SimConfig cfg = tiny_cfg();
    ExperimentContext ctx(cfg);
    double ds = cfg.channel.delay_spread_ns * 1e-9;
    auto expected = [&](const TdlProfile &p) {
        std::vector<double> power;
        for (const auto &t : p.taps)
            power.push_back(db_to_lin(t.power_db));
        return capture_tap_count(scale_delays(p, ds), power, cfg.ofdm);
    };
    REQUIRE(ctx.los_n_taps == expected(ctx.los_profile));
    REQUIRE(ctx.nlos_n_taps == expected(ctx.nlos_profile));
    REQUIRE(ctx.n_taps == std::max(ctx.los_n_taps, ctx.nlos_n_taps));
    REQUIRE(ctx.link_n_taps(true) == ctx.los_n_taps);
    REQUIRE(ctx.link_n_taps(false) == ctx.nlos_n_taps);

    cfg.dpe.n_taps = 9;
    ExperimentContext fixed(cfg);
    REQUIRE(fixed.n_taps == 9);
    REQUIRE(fixed.link_n_taps(true) == 9);
    REQUIRE(fixed.link_n_taps(false) == 9);
}

TEST_CASE("narrow bias search is flagged")
{
    SimConfig cfg = tiny_cfg();
    cfg.exp.n_trials = 1;
    cfg.dpe.bias_range_ns = 5.0; // sigma is 5 ns, +/-3 sigma needs 15
    ExperimentResult res = run_experiment(cfg, 2, 1);
    bool warned = false;
    for (const auto &w : res.warnings)
        warned = warned || w.find("bias") != std::string::npos;
    REQUIRE(warned);
}

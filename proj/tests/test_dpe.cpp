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

#include <nrdpe/dpe.hpp>

using namespace nrdpe;

namespace
{
    OfdmConfig small_cfg()
    {
        OfdmConfig cfg;
        cfg.n_subcarriers = 1024;
        cfg.scs_hz = 120e3; // fs = 122.88 MHz
        cfg.cp_samples = 72;
        return cfg;
    }

    // Single-tap unit channel at the given bulk delay.
    ReceivedSignal rx_single_tap(const PrsWaveform &prs, const OfdmConfig &cfg, double delay_s)
    {
        ChannelRealization h;
        h.tap_delay_s = {0.0};
        h.tap_gain = {cdbl(1.0, 0.0)};
        return apply_channel(ofdm_modulate(prs.symbols, cfg), h, cfg, delay_s);
    }

    double energy(const cvec &v)
    {
        double e = 0.0;
        for (const auto &x : v)
            e += std::norm(x);
        return e;
    }
} // namespace

TEST_CASE("objective at the true delay equals the received energy")
{
    OfdmConfig cfg = small_cfg();
    double fs = sample_rate(cfg);
    PrsWaveform prs = generate_prs(1, cfg, 99);

    ChannelRealization h;
    h.tap_delay_s = {0.0, 2.0 / fs, 5.0 / fs};
    h.tap_gain = {cdbl(0.6, 0.3), cdbl(-0.2, 0.9), cdbl(0.4, -0.5)};
    double bulk = 12.0 / fs;
    ReceivedSignal y = apply_channel(ofdm_modulate(prs.symbols, cfg), h, cfg, bulk);

    double obj = objective_single_bs(y, prs, cfg, bulk, 7);
    double e = energy(y.samples);
    REQUIRE(obj == Catch::Approx(e).epsilon(1e-8));

    // displacing the window by far more than the tap span loses nearly everything
    double far = objective_single_bs(y, prs, cfg, bulk + 40.0 / fs, 7);
    REQUIRE(far < 0.05 * e);
}

TEST_CASE("projection identity on a tiny transform")
{
    OfdmConfig cfg;
    cfg.n_subcarriers = 64;
    cfg.scs_hz = 1.92e6; // fs = 122.88 MHz
    cfg.cp_samples = 16;
    double fs = sample_rate(cfg);
    PrsWaveform prs = generate_prs(2, cfg, 17);

    ChannelRealization h;
    h.tap_delay_s = {0.0, 1.0 / fs, 3.0 / fs};
    h.tap_gain = {cdbl(0.9, 0.1), cdbl(0.3, -0.4), cdbl(-0.2, 0.2)};
    double bulk = 6.0 / fs;
    ReceivedSignal y = apply_channel(ofdm_modulate(prs.symbols, cfg), h, cfg, bulk);

    // recover the projected tap vector by hand (window bins 0..n_taps-1
    // from the hypothesized arrival) and compare energies
    std::size_t n = cfg.n_subcarriers, n_taps = 5;
    cvec spec = ofdm_demodulate(y.samples, cfg);
    double acc = 0.0;
    for (std::size_t l = 0; l < n_taps; l++)
    {
        cdbl hl(0.0, 0.0);
        for (std::size_t k = 0; k < n; k++)
        {
            double a = 2.0 * PI * static_cast<double>(k) *
                       (bulk * fs + static_cast<double>(l)) / static_cast<double>(n);
            hl += spec[k] * std::conj(prs.symbols[k]) * cdbl(std::cos(a), std::sin(a));
        }
        acc += std::norm(hl) / static_cast<double>(n);
    }
    double obj = objective_single_bs(y, prs, cfg, bulk, n_taps);
    REQUIRE(obj == Catch::Approx(acc).epsilon(1e-10));

    // the projected taps reproduce the realized gains at integer alignment
    cdbl h0(0.0, 0.0);
    for (std::size_t k = 0; k < n; k++)
    {
        double a = 2.0 * PI * static_cast<double>(k) * bulk * fs / static_cast<double>(n);
        h0 += spec[k] * std::conj(prs.symbols[k]) * cdbl(std::cos(a), std::sin(a));
    }
    h0 /= static_cast<double>(n);
    REQUIRE(std::abs(h0 - h.tap_gain[0]) < 1e-10);
}

TEST_CASE("delay table matches the direct objective")
{
    OfdmConfig cfg = small_cfg();
    double fs = sample_rate(cfg);
    double cp_s = cfg.cp_samples / fs;
    PrsWaveform prs = generate_prs(7, cfg, 5);

    ChannelRealization h;
    h.tap_delay_s = {0.0, 7.3 / fs, 19.6 / fs};
    h.tap_gain = {cdbl(0.8, -0.1), cdbl(0.25, 0.55), cdbl(-0.35, 0.2)};
    ReceivedSignal y = apply_channel(ofdm_modulate(prs.symbols, cfg), h, cfg, 11.4 / fs);
    add_awgn(y, 15.0, 333);

    std::size_t n_taps = 23, upsample = 32;
    FftPlan plan_n(cfg.n_subcarriers), plan_up(cfg.n_subcarriers * upsample);
    DelayObjectiveTable table(y, prs, cfg, n_taps, upsample, plan_n, plan_up);

    Stream st(88);
    double worst = 0.0;
    for (int i = 0; i < 200; i++)
    {
        double tau = st.uniform(0.0, cp_s);
        double exact = objective_single_bs(y, prs, cfg, tau, n_taps);
        double fast = table(tau);
        worst = std::max(worst, std::abs(fast - exact) / exact);
    }
    REQUIRE(worst < 1e-3);
}

TEST_CASE("delay table is exact on its own lattice")
{
    OfdmConfig cfg = small_cfg();
    double fs = sample_rate(cfg);
    PrsWaveform prs = generate_prs(3, cfg, 21);
    ReceivedSignal y = rx_single_tap(prs, cfg, 9.0 / fs);
    add_awgn(y, 20.0, 44);

    std::size_t n_taps = 5, upsample = 32;
    FftPlan plan_n(cfg.n_subcarriers), plan_up(cfg.n_subcarriers * upsample);
    DelayObjectiveTable table(y, prs, cfg, n_taps, upsample, plan_n, plan_up);

    double du = 1.0 / (fs * static_cast<double>(upsample));
    for (std::size_t j : {0ul, 1ul, 17ul, 96ul, 288ul, 2000ul})
    {
        double tau = static_cast<double>(j) * du;
        double exact = objective_single_bs(y, prs, cfg, tau, n_taps);
        REQUIRE(table(tau) == Catch::Approx(exact).epsilon(1e-9));
    }
}

TEST_CASE("grid axes, shrinking and validation")
{
    auto ax = CandidateGrid::axis(10.0, 50.0, 2.0, true);
    REQUIRE(ax.size() == 51);
    REQUIRE(ax.front() == Catch::Approx(-40.0));
    REQUIRE(ax.back() == Catch::Approx(60.0));
    REQUIRE(CandidateGrid::axis(5.0, 15.0, 3.0, true).size() == 11);
    REQUIRE(CandidateGrid::axis(5.0, 0.0, 3.0, true).size() == 1);
    REQUIRE(CandidateGrid::axis(5.0, 15.0, 3.0, false).size() == 1);

    CandidateGrid g;
    g.center = {1.0, 2.0, 3.0, 0.0};
    g.extent_x_m = g.extent_y_m = 100.0;
    g.resolution_m = 2.0;
    g.bias_axis = true;
    g.clock_bias_range_s = 15e-9;
    g.clock_bias_step_s = 3e-9;
    REQUIRE(g.xs().size() == 51);
    REQUIRE(g.biases().size() == 11);
    REQUIRE(g.zs().size() == 1);

    CandidateGrid fine = g.shrunk({4.0, 5.0, 3.0, 1e-9}, 5.0);
    REQUIRE(fine.resolution_m == Catch::Approx(0.4));
    REQUIRE(fine.extent_x_m == Catch::Approx(20.0));
    REQUIRE(fine.clock_bias_step_s == Catch::Approx(0.6e-9));
    REQUIRE(fine.center.x == Catch::Approx(4.0));
    REQUIRE(fine.xs().size() == 51);

    REQUIRE_THROWS_AS(g.shrunk(g.center, 1.0), config_error);
    CandidateGrid bad = g;
    bad.resolution_m = 0.0;
    REQUIRE_THROWS_AS(bad.validate(), config_error);
    CandidateGrid none;
    none.x_axis = none.y_axis = none.z_axis = none.bias_axis = false;
    REQUIRE_THROWS_AS(none.validate(), config_error);
}

TEST_CASE("correlogram layout and tie handling")
{
    CandidateGrid g;
    g.center = {0.0, 0.0, 0.0, 0.0};
    g.extent_x_m = g.extent_y_m = 4.0;
    g.resolution_m = 2.0;
    std::vector<Vec3> bs = {{100.0, 0.0, 10.0}};

    // constant evaluator: every node ties, the lowest linear index wins
    Correlogram flat = build_correlogram_with(bs, g, [](std::size_t, double) { return 1.0; });
    REQUIRE(flat.values.size() == 9);
    REQUIRE(flat.argmax == 0);
    REQUIRE(flat.max_value == Catch::Approx(1.0));

    // index round trip
    REQUIRE(flat.index(2, 1, 0, 0) == 5);
    PositionHypothesis h = flat.hypothesis_at(5);
    REQUIRE(h.x == Catch::Approx(2.0));
    REQUIRE(h.y == Catch::Approx(0.0));

    REQUIRE_THROWS_AS(
        build_correlogram_with({}, g, [](std::size_t, double) { return 1.0; }),
        dimension_error);
}

TEST_CASE("three stations pin the position on the grid")
{
    OfdmConfig cfg;
    cfg.n_subcarriers = 256;
    cfg.scs_hz = 480e3;
    cfg.cp_samples = 32;
    std::vector<Vec3> bs = {{0.0, 0.0, 10.0}, {60.0, 0.0, 10.0}, {0.0, 60.0, 10.0}};
    Vec3 ue{22.0, 16.0, 2.0}; // on a 2 m lattice node

    FftPlan plan_n(cfg.n_subcarriers), plan_up(cfg.n_subcarriers * 32);
    std::vector<DelayObjectiveTable> tables;
    std::vector<Vec3> pos;
    for (std::size_t m = 0; m < bs.size(); m++)
    {
        PrsWaveform prs = generate_prs(static_cast<std::uint32_t>(m + 1), cfg, 11);
        ReceivedSignal y = rx_single_tap(prs, cfg, dist3(bs[m], ue) / SPEED_OF_LIGHT);
        tables.emplace_back(y, prs, cfg, 3, 32, plan_n, plan_up);
        pos.push_back(bs[m]);
    }

    CandidateGrid g;
    g.center = {20.0, 20.0, 2.0, 0.0};
    g.extent_x_m = g.extent_y_m = 40.0;
    g.resolution_m = 2.0;

    Correlogram c = build_correlogram(tables, pos, g);
    PositionHypothesis best = c.argmax_hypothesis();
    REQUIRE(best.x == Catch::Approx(ue.x).margin(1e-9));
    REQUIRE(best.y == Catch::Approx(ue.y).margin(1e-9));

    PositionEstimate est = estimate_position(tables, pos, g, 2, 5.0, true);
    REQUIRE(est.stage_argmax.size() == 3);
    REQUIRE(est.stage_grids.size() == 3);
    for (std::size_t s = 1; s < est.stage_objective.size(); s++)
        REQUIRE(est.stage_objective[s] >= est.stage_objective[s - 1] * (1.0 - 1e-9));
    double err = std::sqrt(sq(est.estimate.x - ue.x) + sq(est.estimate.y - ue.y));
    REQUIRE(err < 0.12);

    // without refinement the answer is the coarse argmax
    PositionEstimate coarse = estimate_position(tables, pos, g, 0, 5.0);
    REQUIRE(coarse.estimate.x == Catch::Approx(best.x).margin(1e-9));
    REQUIRE(coarse.stage_argmax.size() == 1);
    REQUIRE_THROWS_AS(estimate_position(tables, pos, g, -1, 5.0), config_error);
}

TEST_CASE("one station constrains only the range")
{
    OfdmConfig cfg;
    cfg.n_subcarriers = 256;
    cfg.scs_hz = 480e3;
    cfg.cp_samples = 32;
    std::vector<Vec3> bs = {{0.0, 0.0, 10.0}};
    Vec3 ue{22.0, 16.0, 2.0};

    FftPlan plan_n(cfg.n_subcarriers), plan_up(cfg.n_subcarriers * 32);
    PrsWaveform prs = generate_prs(1, cfg, 11);
    ReceivedSignal y = rx_single_tap(prs, cfg, dist3(bs[0], ue) / SPEED_OF_LIGHT);
    std::vector<DelayObjectiveTable> tables;
    tables.emplace_back(y, prs, cfg, 3, 32, plan_n, plan_up);

    CandidateGrid g;
    g.center = {20.0, 20.0, 2.0, 0.0};
    g.extent_x_m = g.extent_y_m = 40.0;
    g.resolution_m = 2.0;
    Correlogram c = build_correlogram(tables, bs, g);
    PositionHypothesis best = c.argmax_hypothesis();
    double r_true = dist3(bs[0], ue);
    double r_best = dist3(bs[0], best.pos());
    REQUIRE(std::abs(r_best - r_true) < 1.5 * g.resolution_m);
}

TEST_CASE("clock bias axis recovers a transmitted offset")
{
    OfdmConfig cfg;
    cfg.n_subcarriers = 256;
    cfg.scs_hz = 480e3;
    cfg.cp_samples = 32;
    std::vector<Vec3> bs = {{0.0, 0.0, 10.0}, {60.0, 0.0, 10.0}, {0.0, 60.0, 10.0}};
    Vec3 ue{22.0, 16.0, 2.0};
    double bias_s = 6e-9; // a node of the 3 ns bias lattice

    FftPlan plan_n(cfg.n_subcarriers), plan_up(cfg.n_subcarriers * 32);
    std::vector<DelayObjectiveTable> tables;
    for (std::size_t m = 0; m < bs.size(); m++)
    {
        PrsWaveform prs = generate_prs(static_cast<std::uint32_t>(m + 1), cfg, 11);
        ChannelRealization h;
        h.tap_delay_s = {0.0};
        h.tap_gain = {cdbl(1.0, 0.0)};
        ReceivedSignal y = apply_channel(ofdm_modulate(prs.symbols, cfg), h, cfg,
                                         dist3(bs[m], ue) / SPEED_OF_LIGHT, bias_s);
        tables.emplace_back(y, prs, cfg, 3, 32, plan_n, plan_up);
    }

    CandidateGrid g;
    g.center = {22.0, 16.0, 2.0, 0.0};
    g.extent_x_m = g.extent_y_m = 40.0;
    g.resolution_m = 2.0;
    g.bias_axis = true;
    g.clock_bias_range_s = 15e-9;
    g.clock_bias_step_s = 3e-9;

    PositionEstimate est = estimate_position(tables, bs, g, 2, 5.0);
    REQUIRE(std::abs(est.estimate.clock_bias_s - bias_s) < 0.3e-9);
    double err = std::sqrt(sq(est.estimate.x - ue.x) + sq(est.estimate.y - ue.y));
    REQUIRE(err < 0.12);

    // with the bias axis disabled the unmodeled offset bounds the fix quality
    CandidateGrid g2 = g;
    g2.bias_axis = false;
    PositionEstimate est2 = estimate_position(tables, bs, g2, 2, 5.0);
    double err2 = std::sqrt(sq(est2.estimate.x - ue.x) + sq(est2.estimate.y - ue.y));
    REQUIRE(err2 < 3.0);
}

TEST_CASE("objective rejects delays outside the cyclic prefix")
{
    OfdmConfig cfg = small_cfg();
    double fs = sample_rate(cfg);
    PrsWaveform prs = generate_prs(1, cfg, 1);
    ReceivedSignal y = rx_single_tap(prs, cfg, 5.0 / fs);
    REQUIRE_THROWS_AS(objective_single_bs(y, prs, cfg, -1.0 / fs, 3), excess_delay_error);
    REQUIRE_THROWS_AS(objective_single_bs(y, prs, cfg, 73.0 / fs, 3), excess_delay_error);
    REQUIRE_THROWS_AS(objective_single_bs(y, prs, cfg, 5.0 / fs, 0), dimension_error);

    FftPlan plan_n(cfg.n_subcarriers), plan_up(cfg.n_subcarriers * 32);
    REQUIRE_THROWS_AS(DelayObjectiveTable(y, prs, cfg, 0, 32, plan_n, plan_up), dimension_error);
    REQUIRE_THROWS_AS(DelayObjectiveTable(y, prs, cfg, 3, 1, plan_n, plan_up), dimension_error);
    FftPlan wrong(cfg.n_subcarriers * 2);
    REQUIRE_THROWS_AS(DelayObjectiveTable(y, prs, cfg, 3, 32, wrong, plan_up), dimension_error);
}

TEST_CASE("tap window holds the requested share of profile power")
{
    OfdmConfig cfg; // fs = 122.88 MHz
    double fs = sample_rate(cfg);

    REQUIRE(capture_tap_count({0.0}, {1.0}, cfg) == 1);

    std::vector<double> d = {0.0, 2.5 / fs};
    std::vector<double> p = {0.8, 0.2};
    REQUIRE(capture_tap_count(d, p, cfg, 0.8) == 1);
    REQUIRE(capture_tap_count(d, p, cfg) == 4); // full extent: ceil(2.5) + 1

    auto window = [&](const char *name) {
        TdlProfile prof = builtin_tdl(name);
        std::vector<double> pw;
        for (const auto &t : prof.taps)
            pw.push_back(db_to_lin(t.power_db));
        return capture_tap_count(scale_delays(prof, 65e-9), pw, cfg);
    };
    REQUIRE(window("TDL-D") == 1);
    REQUIRE(window("TDL-C") == 11);

    REQUIRE_THROWS_AS(capture_tap_count({}, {}, cfg), dimension_error);
    REQUIRE_THROWS_AS(capture_tap_count({0.0}, {1.0, 2.0}, cfg), dimension_error);
    REQUIRE_THROWS_AS(capture_tap_count({0.0}, {1.0}, cfg, 0.0), domain_error);
    REQUIRE_THROWS_AS(capture_tap_count({0.0}, {1.0}, cfg, 1.5), domain_error);
    REQUIRE_THROWS_AS(capture_tap_count({-1e-9}, {1.0}, cfg), domain_error);
    REQUIRE_THROWS_AS(capture_tap_count({0.0}, {0.0}, cfg), domain_error);
}

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

#include <nrdpe/fft.hpp>
#include <nrdpe/waveform.hpp>

using namespace nrdpe;

TEST_CASE("fft is unitary and matches the forward DFT definition")
{
    FftPlan plan(8);
    cvec x(8, cdbl(0.0));
    x[1] = 1.0;
    cvec f = x;
    plan.forward_unitary(f);
    double s = 1.0 / std::sqrt(8.0);
    for (std::size_t k = 0; k < 8; k++)
    {
        cdbl expect = std::polar(s, -2.0 * PI * static_cast<double>(k) / 8.0);
        CHECK(std::abs(f[k] - expect) < 1e-14);
    }

    Stream st(11);
    cvec big(4096);
    for (auto &v : big)
        v = st.cgauss();
    cvec rt = ifft_unitary(fft_unitary(big));
    double worst = 0.0;
    for (std::size_t i = 0; i < big.size(); i++)
        worst = std::max(worst, std::abs(rt[i] - big[i]));
    CHECK(worst < 1e-12);

    CHECK_THROWS_AS(FftPlan(0), dimension_error);
    CHECK_THROWS_AS(FftPlan(48), dimension_error);
    cvec wrong(16);
    CHECK_THROWS_AS(plan.transform_raw(wrong, false), dimension_error);
}

TEST_CASE("fft preserves energy")
{
    Stream st(3);
    cvec x(1024);
    for (auto &v : x)
        v = st.cgauss();
    double pt = 0.0;
    for (const auto &v : x)
        pt += std::norm(v);
    cvec f = fft_unitary(x);
    double pf = 0.0;
    for (const auto &v : f)
        pf += std::norm(v);
    CHECK(std::abs(pt - pf) / pt < 1e-13);
}

TEST_CASE("pilot generation is deterministic per (bs_id, seed) and unit modulus")
{
    OfdmConfig cfg;
    PrsWaveform a = generate_prs(3, cfg, 42);
    PrsWaveform b = generate_prs(3, cfg, 42);
    REQUIRE(a.symbols.size() == cfg.n_subcarriers);
    CHECK(a.bs_id == 3);
    bool same = true;
    for (std::size_t i = 0; i < a.symbols.size(); i++)
        same = same && a.symbols[i] == b.symbols[i];
    CHECK(same);

    PrsWaveform c = generate_prs(4, cfg, 42);
    PrsWaveform d = generate_prs(3, cfg, 43);
    std::size_t diff_c = 0, diff_d = 0;
    for (std::size_t i = 0; i < a.symbols.size(); i++)
    {
        diff_c += a.symbols[i] != c.symbols[i];
        diff_d += a.symbols[i] != d.symbols[i];
    }
    CHECK(diff_c > cfg.n_subcarriers / 2);
    CHECK(diff_d > cfg.n_subcarriers / 2);

    for (const auto &s : a.symbols)
        CHECK(std::abs(std::abs(s) - 1.0) < 1e-15);
}

TEST_CASE("ofdm modulate/demodulate round trip")
{
    OfdmConfig cfg;
    PrsWaveform prs = generate_prs(1, cfg, 7);
    cvec tx = ofdm_modulate(prs.symbols, cfg);
    REQUIRE(tx.size() == cfg.n_subcarriers + cfg.cp_samples);

    // prefix replicates the symbol tail
    for (std::size_t i = 0; i < cfg.cp_samples; i++)
        CHECK(tx[i] == tx[cfg.n_subcarriers + i]);

    cvec rec = ofdm_demodulate(strip_cp(tx, cfg), cfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < rec.size(); i++)
        worst = std::max(worst, std::abs(rec[i] - prs.symbols[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("sample rate and range bin size")
{
    OfdmConfig cfg;
    CHECK(sample_rate(cfg) == 4096.0 * 30e3);
    CHECK(std::abs(meters_per_sample(cfg) - 2.4397) < 5e-4);
}

TEST_CASE("waveform input validation")
{
    OfdmConfig cfg;
    cfg.cp_samples = 5000;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = OfdmConfig{};
    cfg.n_subcarriers = 1000;
    CHECK_THROWS_AS(cfg.validate(), config_error);
    cfg = OfdmConfig{};
    cfg.scs_hz = -1.0;
    CHECK_THROWS_AS(cfg.validate(), config_error);

    cfg = OfdmConfig{};
    cvec short_vec(16);
    CHECK_THROWS_AS(ofdm_modulate(short_vec, cfg), dimension_error);
    CHECK_THROWS_AS(ofdm_demodulate(short_vec, cfg), dimension_error);
    CHECK_THROWS_AS(strip_cp(short_vec, cfg), dimension_error);
}

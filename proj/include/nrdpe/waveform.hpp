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

#ifndef NRDPE_WAVEFORM_HPP
#define NRDPE_WAVEFORM_HPP

#include <cstdint>

#include "common.hpp"
#include "fft.hpp"
#include "rng.hpp"

namespace nrdpe
{
    struct OfdmConfig
    {
        std::size_t n_subcarriers = 4096;
        double scs_hz = 30e3;
        std::size_t cp_samples = 288;
        double center_freq_hz = 3.0e9;

        void validate() const
        {
            if (n_subcarriers == 0 || (n_subcarriers & (n_subcarriers - 1)) != 0)
                throw config_error("OfdmConfig: n_subcarriers must be a power of two");
            if (scs_hz <= 0.0)
                throw config_error("OfdmConfig: scs_hz must be positive");
            if (cp_samples >= n_subcarriers)
                throw config_error("OfdmConfig: cp_samples must be smaller than n_subcarriers");
            if (center_freq_hz <= 0.0)
                throw config_error("OfdmConfig: center_freq_hz must be positive");
        }
    };

    inline double sample_rate(const OfdmConfig &cfg)
    {
        return cfg.scs_hz * static_cast<double>(cfg.n_subcarriers);
    }

    inline double meters_per_sample(const OfdmConfig &cfg)
    {
        return SPEED_OF_LIGHT / sample_rate(cfg);
    }

    // One positioning pilot symbol: unit-modulus QPSK on every subcarrier.
    struct PrsWaveform
    {
        std::uint32_t bs_id = 0;
        cvec symbols; // frequency domain, length n_subcarriers
    };

    // Pilot sequence is a pure function of (bs_id, seed): the bs_id is folded into
    // the stream seed so distinct stations get distinct sequences even under a
    // shared experiment seed.
    inline PrsWaveform generate_prs(std::uint32_t bs_id, const OfdmConfig &cfg, std::uint64_t seed)
    {
        cfg.validate();
        Stream st(mix64(seed ^ mix64(0x5052530000000000ULL ^ bs_id)));
        PrsWaveform w;
        w.bs_id = bs_id;
        w.symbols.resize(cfg.n_subcarriers);
        const double a = 0.7071067811865476;
        for (auto &s : w.symbols)
        {
            std::uint64_t bits = st.raw();
            double re = (bits & 1) ? a : -a;
            double im = (bits & 2) ? a : -a;
            s = {re, im};
        }
        return w;
    }

    // Unitary IDFT of the pilot symbols, cyclic prefix prepended.
    inline cvec ofdm_modulate(const cvec &symbols, const OfdmConfig &cfg)
    {
        cfg.validate();
        if (symbols.size() != cfg.n_subcarriers)
            throw dimension_error("ofdm_modulate: expected " + std::to_string(cfg.n_subcarriers) +
                                  " symbols, got " + std::to_string(symbols.size()));
        cvec t = symbols;
        FftPlan(cfg.n_subcarriers).inverse_unitary(t);
        cvec out(cfg.cp_samples + cfg.n_subcarriers);
        for (std::size_t i = 0; i < cfg.cp_samples; i++)
            out[i] = t[cfg.n_subcarriers - cfg.cp_samples + i];
        for (std::size_t i = 0; i < cfg.n_subcarriers; i++)
            out[cfg.cp_samples + i] = t[i];
        return out;
    }

    inline cvec strip_cp(const cvec &with_cp, const OfdmConfig &cfg)
    {
        cfg.validate();
        if (with_cp.size() != cfg.cp_samples + cfg.n_subcarriers)
            throw dimension_error("strip_cp: expected " +
                                  std::to_string(cfg.cp_samples + cfg.n_subcarriers) +
                                  " samples, got " + std::to_string(with_cp.size()));
        return cvec(with_cp.begin() + static_cast<std::ptrdiff_t>(cfg.cp_samples), with_cp.end());
    }

    // Unitary DFT of one useful-part symbol (cyclic prefix already removed).
    inline cvec ofdm_demodulate(const cvec &useful, const OfdmConfig &cfg)
    {
        cfg.validate();
        if (useful.size() != cfg.n_subcarriers)
            throw dimension_error("ofdm_demodulate: expected " + std::to_string(cfg.n_subcarriers) +
                                  " samples, got " + std::to_string(useful.size()));
        cvec f = useful;
        FftPlan(cfg.n_subcarriers).forward_unitary(f);
        return f;
    }

} // namespace nrdpe

#endif

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

#ifndef NRDPE_CHANNEL_HPP
#define NRDPE_CHANNEL_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "common.hpp"
#include "fft.hpp"
#include "rng.hpp"
#include "waveform.hpp"

namespace nrdpe
{
    enum class FadingType
    {
        rayleigh,
        rician
    };

    struct TdlTap
    {
        double delay_norm = 0.0; // units of RMS delay spread
        double power_db = 0.0;   // relative to strongest tap
        FadingType fading = FadingType::rayleigh;
    };

    struct TdlProfile
    {
        std::string name;
        double rician_k_db = 0.0; // unused when no rician tap present
        std::vector<TdlTap> taps;

        bool has_rician() const
        {
            for (const auto &t : taps)
                if (t.fading == FadingType::rician)
                    return true;
            return false;
        }

        double total_linear_power() const
        {
            double s = 0.0;
            for (const auto &t : taps)
                s += db_to_lin(t.power_db);
            return s;
        }

        // Power-weighted RMS width of the normalized delays.
        double rms_delay_norm() const
        {
            double pw = 0.0, m1 = 0.0, m2 = 0.0;
            for (const auto &t : taps)
            {
                double p = db_to_lin(t.power_db);
                pw += p;
                m1 += p * t.delay_norm;
                m2 += p * t.delay_norm * t.delay_norm;
            }
            m1 /= pw;
            m2 /= pw;
            return std::sqrt(std::max(0.0, m2 - m1 * m1));
        }

        double max_delay_norm() const
        {
            double m = 0.0;
            for (const auto &t : taps)
                m = std::max(m, t.delay_norm);
            return m;
        }

        void validate() const
        {
            if (taps.empty())
                throw config_error("TdlProfile '" + name + "': no taps");
            for (const auto &t : taps)
                if (t.delay_norm < 0.0)
                    throw config_error("TdlProfile '" + name + "': negative tap delay");
            if (has_rician() && !std::isfinite(rician_k_db))
                throw config_error("TdlProfile '" + name + "': rician tap without finite K");
            double r = rms_delay_norm();
            if (std::abs(r - 1.0) > 1e-3)
                throw config_error("TdlProfile '" + name + "': normalized delays have RMS " +
                                   std::to_string(r) + ", expected 1");
        }
    };

    namespace detail
    {
        // TR 38.901 tables 7.7.2-1..5. Powers as published; the published delay
        // columns are only approximately unit-RMS (TDL-D is 0.6% off), so the
        // delays are rescaled to exact unit power-weighted RMS at construction.
        // D/E first taps carry the combined deterministic+diffuse power.
        inline TdlProfile raw_tdl(const std::string &name)
        {
            auto mk = [](std::string nm, double k_db, std::vector<TdlTap> tp) {
                TdlProfile p;
                p.name = std::move(nm);
                p.rician_k_db = k_db;
                p.taps = std::move(tp);
                return p;
            };
            using F = FadingType;
            if (name == "TDL-A")
                return mk("TDL-A", 0.0,
                          {{0.0000, -13.4, F::rayleigh}, {0.3819, 0.0, F::rayleigh},
                           {0.4025, -2.2, F::rayleigh},  {0.5868, -4.0, F::rayleigh},
                           {0.4610, -6.0, F::rayleigh},  {0.5375, -8.2, F::rayleigh},
                           {0.6708, -9.9, F::rayleigh},  {0.5750, -10.5, F::rayleigh},
                           {0.7618, -7.5, F::rayleigh},  {1.5375, -15.9, F::rayleigh},
                           {1.8978, -6.6, F::rayleigh},  {2.2242, -16.7, F::rayleigh},
                           {2.1718, -12.4, F::rayleigh}, {2.4942, -15.2, F::rayleigh},
                           {2.5119, -10.8, F::rayleigh}, {3.0582, -11.3, F::rayleigh},
                           {4.0810, -12.7, F::rayleigh}, {4.4579, -16.2, F::rayleigh},
                           {4.5695, -18.3, F::rayleigh}, {4.7966, -18.9, F::rayleigh},
                           {5.0066, -16.6, F::rayleigh}, {5.3043, -19.9, F::rayleigh},
                           {9.6586, -29.7, F::rayleigh}});
            if (name == "TDL-B")
                return mk("TDL-B", 0.0,
                          {{0.0000, 0.0, F::rayleigh},   {0.1072, -2.2, F::rayleigh},
                           {0.2155, -4.0, F::rayleigh},  {0.2095, -3.2, F::rayleigh},
                           {0.2870, -9.8, F::rayleigh},  {0.2986, -1.2, F::rayleigh},
                           {0.3752, -3.4, F::rayleigh},  {0.5055, -5.2, F::rayleigh},
                           {0.3681, -7.6, F::rayleigh},  {0.3697, -3.0, F::rayleigh},
                           {0.5700, -8.9, F::rayleigh},  {0.5283, -9.0, F::rayleigh},
                           {1.1021, -4.8, F::rayleigh},  {1.2756, -5.7, F::rayleigh},
                           {1.5474, -7.5, F::rayleigh},  {1.7842, -1.9, F::rayleigh},
                           {2.0169, -7.6, F::rayleigh},  {2.8294, -12.2, F::rayleigh},
                           {3.0219, -9.8, F::rayleigh},  {3.6187, -11.4, F::rayleigh},
                           {4.1067, -14.9, F::rayleigh}, {4.2790, -9.2, F::rayleigh},
                           {4.7834, -11.3, F::rayleigh}});
            if (name == "TDL-C")
                return mk("TDL-C", 0.0,
                          {{0.0000, -4.4, F::rayleigh},  {0.2099, -1.2, F::rayleigh},
                           {0.2219, -3.5, F::rayleigh},  {0.2329, -5.2, F::rayleigh},
                           {0.2176, -2.5, F::rayleigh},  {0.6366, 0.0, F::rayleigh},
                           {0.6448, -2.2, F::rayleigh},  {0.6560, -3.9, F::rayleigh},
                           {0.6584, -7.4, F::rayleigh},  {0.7935, -7.1, F::rayleigh},
                           {0.8213, -10.7, F::rayleigh}, {0.9336, -11.1, F::rayleigh},
                           {1.2285, -5.1, F::rayleigh},  {1.3083, -6.8, F::rayleigh},
                           {2.1704, -8.7, F::rayleigh},  {2.7105, -13.2, F::rayleigh},
                           {4.2589, -13.9, F::rayleigh}, {4.6003, -13.9, F::rayleigh},
                           {5.4902, -15.8, F::rayleigh}, {5.6077, -17.1, F::rayleigh},
                           {6.3065, -16.0, F::rayleigh}, {6.6374, -15.7, F::rayleigh},
                           {7.0427, -21.6, F::rayleigh}, {8.6523, -22.8, F::rayleigh}});
            if (name == "TDL-D")
            {
                double p0 = lin_to_db(db_to_lin(-0.2) + db_to_lin(-13.5));
                return mk("TDL-D", 13.3,
                          {{0.0000, p0, F::rician},      {0.0350, -18.8, F::rayleigh},
                           {0.6120, -21.0, F::rayleigh}, {1.3630, -22.8, F::rayleigh},
                           {1.4050, -17.9, F::rayleigh}, {1.8040, -20.1, F::rayleigh},
                           {2.5960, -21.9, F::rayleigh}, {1.7750, -22.9, F::rayleigh},
                           {4.0420, -27.8, F::rayleigh}, {7.9370, -23.6, F::rayleigh},
                           {9.4240, -24.8, F::rayleigh}, {9.7080, -30.0, F::rayleigh},
                           {12.5250, -27.7, F::rayleigh}});
            }
            if (name == "TDL-E")
            {
                double p0 = lin_to_db(db_to_lin(-0.03) + db_to_lin(-22.03));
                return mk("TDL-E", 22.0,
                          {{0.0000, p0, F::rician},       {0.5133, -15.8, F::rayleigh},
                           {0.5440, -18.1, F::rayleigh},  {0.5630, -19.8, F::rayleigh},
                           {0.5440, -22.9, F::rayleigh},  {0.7112, -22.4, F::rayleigh},
                           {1.9092, -18.6, F::rayleigh},  {1.9293, -20.8, F::rayleigh},
                           {1.9589, -22.6, F::rayleigh},  {2.6426, -22.3, F::rayleigh},
                           {3.7136, -25.6, F::rayleigh},  {5.4524, -20.2, F::rayleigh},
                           {12.0034, -29.8, F::rayleigh}, {20.6519, -29.2, F::rayleigh}});
            }
            throw config_error("unknown TDL profile '" + name + "'");
        }
    } // namespace detail

    inline TdlProfile builtin_tdl(const std::string &name)
    {
        TdlProfile p = detail::raw_tdl(name);
        double scale = 1.0 / p.rms_delay_norm();
        for (auto &t : p.taps)
            t.delay_norm *= scale;
        p.validate();
        return p;
    }

    // Loader for the shipped profile CSVs. Format:
    //   # profile: <name>
    //   # rician_k_db: <value>
    //   normalized_delay,power_db,fading_type
    //   0,-0.00147,rician
    inline TdlProfile load_tdl_csv(const std::string &path)
    {
        std::ifstream f(path);
        if (!f)
            throw config_error("load_tdl_csv: cannot open '" + path + "'");
        TdlProfile p;
        std::string line;
        bool header_seen = false;
        while (std::getline(f, line))
        {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            if (line[0] == '#')
            {
                auto pos = line.find(':');
                if (pos == std::string::npos)
                    continue;
                std::string key = line.substr(1, pos - 1);
                std::string val = line.substr(pos + 1);
                auto trim = [](std::string s) {
                    s.erase(0, s.find_first_not_of(" \t"));
                    s.erase(s.find_last_not_of(" \t") + 1);
                    return s;
                };
                key = trim(key);
                val = trim(val);
                if (key == "profile")
                    p.name = val;
                else if (key == "rician_k_db")
                    p.rician_k_db = std::stod(val);
                continue;
            }
            if (!header_seen)
            {
                if (line != "normalized_delay,power_db,fading_type")
                    throw config_error("load_tdl_csv: unexpected header '" + line + "' in " + path);
                header_seen = true;
                continue;
            }
            std::stringstream ss(line);
            std::string a, b, c;
            if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c))
                throw config_error("load_tdl_csv: malformed row '" + line + "' in " + path);
            TdlTap t;
            t.delay_norm = std::stod(a);
            t.power_db = std::stod(b);
            if (c == "rayleigh")
                t.fading = FadingType::rayleigh;
            else if (c == "rician")
                t.fading = FadingType::rician;
            else
                throw config_error("load_tdl_csv: unknown fading type '" + c + "' in " + path);
            p.taps.push_back(t);
        }
        p.validate();
        return p;
    }

    inline void save_tdl_csv(const TdlProfile &p, const std::string &path);

    // One fading draw of a profile at a given delay spread. Expected total tap
    // power is 1 (table powers are normalized by their sum).
    struct ChannelRealization
    {
        std::string profile_name;
        double delay_spread_s = 0.0;
        bool los = false;                 // profile carried a deterministic component
        std::vector<double> tap_delay_s;  // absolute excess delays
        cvec tap_gain;                    // realized complex gains
        cvec los_component;               // deterministic part of each gain (0 for rayleigh)

        double max_delay_s() const
        {
            double m = 0.0;
            for (double d : tap_delay_s)
                m = std::max(m, d);
            return m;
        }
    };

    inline std::vector<double> scale_delays(const TdlProfile &p, double delay_spread_s)
    {
        if (delay_spread_s <= 0.0)
            throw domain_error("scale_delays: delay spread must be positive");
        std::vector<double> out;
        out.reserve(p.taps.size());
        for (const auto &t : p.taps)
            out.push_back(t.delay_norm * delay_spread_s);
        return out;
    }

    // Draw order per tap: rician phase first (when applicable), then the complex
    // diffuse sample. deterministic_only zeroes the diffuse parts, leaving the
    // rician mean paths.
    inline ChannelRealization realize_channel(const TdlProfile &p, double delay_spread_s,
                                              Stream &st, bool deterministic_only = false)
    {
        p.validate();
        ChannelRealization r;
        r.profile_name = p.name;
        r.delay_spread_s = delay_spread_s;
        r.los = p.has_rician();
        r.tap_delay_s = scale_delays(p, delay_spread_s);
        r.tap_gain.resize(p.taps.size());
        r.los_component.resize(p.taps.size());
        double total = p.total_linear_power();
        double k_lin = db_to_lin(p.rician_k_db);
        for (std::size_t i = 0; i < p.taps.size(); i++)
        {
            double plin = db_to_lin(p.taps[i].power_db) / total;
            if (p.taps[i].fading == FadingType::rician)
            {
                double phase = st.uniform(0.0, 2.0 * PI);
                cdbl det = std::polar(std::sqrt(plin * k_lin / (k_lin + 1.0)), phase);
                cdbl dif = st.cgauss() * std::sqrt(plin / (k_lin + 1.0));
                r.los_component[i] = det;
                r.tap_gain[i] = deterministic_only ? det : det + dif;
            }
            else
            {
                cdbl dif = st.cgauss() * std::sqrt(plin);
                r.los_component[i] = 0.0;
                r.tap_gain[i] = deterministic_only ? cdbl(0.0) : dif;
            }
        }
        return r;
    }

    struct ReceivedSignal
    {
        std::uint32_t bs_id = 0;
        cvec samples; // useful part, cyclic prefix removed, length n_subcarriers
    };

    // Applies the multipath channel plus a bulk delay (geometric propagation +
    // receiver clock bias) as per-subcarrier phase ramps, then returns the
    // CP-stripped time signal. Exact for any fractional delay as long as every
    // total tap delay stays inside [0, cp]; outside that window the circular
    // model no longer matches a linear channel and the call refuses.
    inline ReceivedSignal apply_channel(const cvec &tx_with_cp, const ChannelRealization &chan,
                                        const OfdmConfig &cfg, double geometric_delay_s,
                                        double clock_bias_s = 0.0)
    {
        cfg.validate();
        if (chan.tap_gain.size() != chan.tap_delay_s.size() || chan.tap_gain.empty())
            throw dimension_error("apply_channel: empty or inconsistent realization");
        double fs = sample_rate(cfg);
        double bulk = geometric_delay_s + clock_bias_s;
        double cp_s = static_cast<double>(cfg.cp_samples) / fs;
        if (bulk < 0.0 || bulk + chan.max_delay_s() > cp_s)
            throw excess_delay_error("apply_channel: total delay " +
                                     std::to_string((bulk + chan.max_delay_s()) * 1e9) +
                                     " ns outside the CP window of " + std::to_string(cp_s * 1e9) + " ns");

        cvec spec = ofdm_demodulate(strip_cp(tx_with_cp, cfg), cfg);
        std::size_t n = cfg.n_subcarriers;
        cvec h(n, cdbl(0.0));
        for (std::size_t l = 0; l < chan.tap_gain.size(); l++)
        {
            double tau_samp = (bulk + chan.tap_delay_s[l]) * fs;
            for (std::size_t k = 0; k < n; k++)
            {
                double cyc = std::fmod(static_cast<double>(k) * tau_samp, static_cast<double>(n));
                double a = -2.0 * PI * cyc / static_cast<double>(n);
                h[k] += chan.tap_gain[l] * cdbl(std::cos(a), std::sin(a));
            }
        }
        for (std::size_t k = 0; k < n; k++)
            spec[k] *= h[k];
        FftPlan(n).inverse_unitary(spec);
        ReceivedSignal out;
        out.samples = std::move(spec);
        return out;
    }

    // Adds complex white noise scaled against the measured mean sample power.
    // Infinity is the documented "noiseless" sentinel.
    inline void add_awgn(ReceivedSignal &sig, double snr_db, std::uint64_t seed)
    {
        if (std::isinf(snr_db) && snr_db > 0)
            return;
        if (!std::isfinite(snr_db))
            throw domain_error("add_awgn: bad SNR");
        if (sig.samples.empty())
            throw dimension_error("add_awgn: empty signal");
        double p = 0.0;
        for (const auto &v : sig.samples)
            p += std::norm(v);
        p /= static_cast<double>(sig.samples.size());
        if (p <= 0.0)
            throw domain_error("add_awgn: zero-power signal");
        double sigma = std::sqrt(p * db_to_lin(-snr_db));
        Stream st(seed);
        for (auto &v : sig.samples)
            v += st.cgauss() * sigma;
    }

    struct PdpEntry
    {
        double delay_s = 0.0;
        double power_db = 0.0; // strongest tap at 0 dB
    };

    inline std::vector<PdpEntry> power_delay_profile(const TdlProfile &p, double delay_spread_s)
    {
        p.validate();
        double peak = -1e30;
        for (const auto &t : p.taps)
            peak = std::max(peak, t.power_db);
        std::vector<PdpEntry> out;
        out.reserve(p.taps.size());
        for (const auto &t : p.taps)
            out.push_back({t.delay_norm * delay_spread_s, t.power_db - peak});
        return out;
    }

    inline void save_tdl_csv(const TdlProfile &p, const std::string &path)
    {
        p.validate();
        std::ofstream f(path);
        if (!f)
            throw config_error("save_tdl_csv: cannot write '" + path + "'");
        char buf[256];
        f << "# profile: " << p.name << "\n";
        std::snprintf(buf, sizeof(buf), "# rician_k_db: %.9g\n", p.rician_k_db);
        f << buf;
        f << "normalized_delay,power_db,fading_type\n";
        for (const auto &t : p.taps)
        {
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%s\n", t.delay_norm, t.power_db,
                          t.fading == FadingType::rician ? "rician" : "rayleigh");
            f << buf;
        }
    }

} // namespace nrdpe

#endif

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

#ifndef NRDPE_SCENARIO_HPP
#define NRDPE_SCENARIO_HPP

#include <algorithm>
#include <cstdint>
#include <numeric>

#include "common.hpp"
#include "rng.hpp"

namespace nrdpe
{
    struct Vec3
    {
        double x = 0.0, y = 0.0, z = 0.0;
    };

    inline double dist3(const Vec3 &a, const Vec3 &b)
    {
        return std::sqrt(sq(a.x - b.x) + sq(a.y - b.y) + sq(a.z - b.z));
    }

    inline double dist2(const Vec3 &a, const Vec3 &b)
    {
        return std::sqrt(sq(a.x - b.x) + sq(a.y - b.y));
    }

    struct BaseStation
    {
        std::uint32_t id = 0;
        Vec3 pos;
    };

    struct Region
    {
        double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;

        void validate() const
        {
            if (!(x_max > x_min) || !(y_max > y_min))
                throw config_error("Region: empty extent");
        }
    };

    // Outdoor LoS probability as a function of 2D distance: certain up to 18 m,
    // then decays as 18/D + (1 - 18/D) exp(-D/36). Continuous and strictly
    // decreasing past the knee.
    inline double los_probability(double d2d_m)
    {
        if (d2d_m < 0.0 || !std::isfinite(d2d_m))
            throw domain_error("los_probability: bad distance");
        if (d2d_m <= 18.0)
            return 1.0;
        double r = 18.0 / d2d_m;
        return r + (1.0 - r) * std::exp(-d2d_m / 36.0);
    }

    enum class PathlossModel
    {
        umi_street_canyon,
        log_distance
    };

    struct LinkBudget
    {
        double tx_power_dbm = 24.0;
        double noise_figure_db = 9.0;
        double bandwidth_hz = 100e6;
        double center_freq_hz = 3.0e9;
        PathlossModel model = PathlossModel::umi_street_canyon;
        double log_distance_exponent = 2.0; // log-distance model only
        double log_distance_nlos_extra_db = 20.0;

        void validate() const
        {
            if (bandwidth_hz <= 0.0 || center_freq_hz <= 0.0)
                throw config_error("LinkBudget: bandwidth and carrier must be positive");
            if (log_distance_exponent <= 0.0)
                throw config_error("LinkBudget: pathloss exponent must be positive");
        }
    };

    inline double noise_floor_dbm(const LinkBudget &b)
    {
        return -174.0 + 10.0 * std::log10(b.bandwidth_hz) + b.noise_figure_db;
    }

    // Street-canyon micro-cell pathloss, effective environment height 1 m.
    inline double pathloss_umi_db(double d2d_m, double h_bs, double h_ut, double fc_hz, bool los)
    {
        if (d2d_m < 0.0 || h_bs <= 1.0 || h_ut < 1.0)
            throw domain_error("pathloss_umi_db: bad geometry");
        double fc_ghz = fc_hz / 1e9;
        double d3d = std::sqrt(sq(d2d_m) + sq(h_bs - h_ut));
        d3d = std::max(d3d, 1.0);
        double d_bp = 4.0 * (h_bs - 1.0) * (h_ut - 1.0) * fc_hz / SPEED_OF_LIGHT;
        double pl_los;
        if (d2d_m <= d_bp)
            pl_los = 32.4 + 21.0 * std::log10(d3d) + 20.0 * std::log10(fc_ghz);
        else
            pl_los = 32.4 + 40.0 * std::log10(d3d) + 20.0 * std::log10(fc_ghz) -
                     9.5 * std::log10(sq(d_bp) + sq(h_bs - h_ut));
        if (los)
            return pl_los;
        double pl_nlos = 22.4 + 35.3 * std::log10(d3d) + 21.3 * std::log10(fc_ghz) -
                         0.3 * (h_ut - 1.5);
        return std::max(pl_los, pl_nlos);
    }

    inline double pathloss_log_distance_db(double d3d_m, const LinkBudget &b, bool los)
    {
        double d = std::max(d3d_m, 1.0);
        double pl = 32.4 + 20.0 * std::log10(b.center_freq_hz / 1e9) +
                    10.0 * b.log_distance_exponent * std::log10(d);
        if (!los)
            pl += b.log_distance_nlos_extra_db;
        return pl;
    }

    // Post-processing SNR of one link: tx power minus pathloss minus noise floor.
    inline double link_snr_db(const BaseStation &bs, const Vec3 &ue, bool los, const LinkBudget &b)
    {
        b.validate();
        double pl;
        if (b.model == PathlossModel::umi_street_canyon)
            pl = pathloss_umi_db(dist2(bs.pos, ue), bs.pos.z, ue.z, b.center_freq_hz, los);
        else
            pl = pathloss_log_distance_db(dist3(bs.pos, ue), b, los);
        return b.tx_power_dbm - pl - noise_floor_dbm(b);
    }

    struct LinkCondition
    {
        std::uint32_t bs_id = 0;
        double d2d_m = 0.0;
        double d3d_m = 0.0;
        double p_los = 0.0;
        bool los = false;
    };

    // One Bernoulli LoS draw per station, in list order.
    inline std::vector<LinkCondition> draw_link_conditions(const std::vector<BaseStation> &bss,
                                                           const Vec3 &ue, Stream &st)
    {
        if (bss.empty())
            throw dimension_error("draw_link_conditions: no base stations");
        std::vector<LinkCondition> out;
        out.reserve(bss.size());
        for (const auto &bs : bss)
        {
            LinkCondition lc;
            lc.bs_id = bs.id;
            lc.d2d_m = dist2(bs.pos, ue);
            lc.d3d_m = dist3(bs.pos, ue);
            lc.p_los = los_probability(lc.d2d_m);
            lc.los = st.uniform() < lc.p_los;
            out.push_back(lc);
        }
        return out;
    }

    // Indices of the m stations closest to the UE (3D range), nearest first.
    // Ties broken by list order.
    inline std::vector<std::size_t> select_nearest(const std::vector<BaseStation> &bss,
                                                   const Vec3 &ue, std::size_t m)
    {
        if (m == 0 || m > bss.size())
            throw dimension_error("select_nearest: need 1 <= m <= " + std::to_string(bss.size()) +
                                  ", got " + std::to_string(m));
        std::vector<std::size_t> idx(bss.size());
        std::iota(idx.begin(), idx.end(), std::size_t(0));
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            return dist3(bss[a].pos, ue) < dist3(bss[b].pos, ue);
        });
        idx.resize(m);
        return idx;
    }

} // namespace nrdpe

#endif

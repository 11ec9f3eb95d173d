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

#ifndef NRDPE_OTDOA_HPP
#define NRDPE_OTDOA_HPP

#include <cstdint>

#include "channel.hpp"
#include "common.hpp"
#include "fft.hpp"
#include "scenario.hpp"
#include "waveform.hpp"

namespace nrdpe
{
    enum class ToaMode
    {
        global_peak,
        leading_edge
    };

    struct ToaMeasurement
    {
        std::uint32_t bs_id = 0;
        double toa_s = 0.0;      // refined arrival time
        long peak_lag = 0;       // integer correlator lag of the detected peak
        double frac_offset = 0.0;
        double peak_metric = 0.0; // |c| at the peak, used for reference selection
    };

    // Classical two-step front end: frequency-domain matched filter against the
    // pilot, magnitude peak over all integer lags, three-point parabolic
    // refinement. leading_edge instead takes the first lag whose magnitude
    // clears threshold * max before refining, which is more robust to strong
    // late multipath but noisier.
    inline ToaMeasurement estimate_toa(const ReceivedSignal &y, const PrsWaveform &prs,
                                       const OfdmConfig &cfg, ToaMode mode = ToaMode::global_peak,
                                       double leading_edge_threshold = 0.5)
    {
        cfg.validate();
        std::size_t n = cfg.n_subcarriers;
        if (y.samples.size() != n || prs.symbols.size() != n)
            throw dimension_error("estimate_toa: length mismatch");
        if (mode == ToaMode::leading_edge &&
            (leading_edge_threshold <= 0.0 || leading_edge_threshold > 1.0))
            throw domain_error("estimate_toa: leading edge threshold must be in (0, 1]");

        cvec z = ofdm_demodulate(y.samples, cfg);
        for (std::size_t k = 0; k < n; k++)
            z[k] *= std::conj(prs.symbols[k]);
        FftPlan plan(n);
        plan.transform_raw(z, true); // c[j] = sum_k z_k e^{+j2pi kj/n}, no scaling

        std::vector<double> mag(n);
        double peak = 0.0;
        std::size_t kmax = 0;
        for (std::size_t j = 0; j < n; j++)
        {
            mag[j] = std::abs(z[j]);
            if (mag[j] > peak)
            {
                peak = mag[j];
                kmax = j;
            }
        }
        if (peak <= 0.0)
            throw no_peak_error("estimate_toa: correlator output is identically zero");

        std::size_t pick = kmax;
        if (mode == ToaMode::leading_edge)
        {
            double thr = leading_edge_threshold * peak;
            for (std::size_t j = 0; j < n; j++)
                if (mag[j] >= thr)
                {
                    pick = j;
                    break;
                }
        }

        double m0 = mag[(pick + n - 1) % n];
        double m1 = mag[pick];
        double m2 = mag[(pick + 1) % n];
        double denom = m0 - 2.0 * m1 + m2;
        double frac = 0.0;
        if (denom < 0.0)
            frac = 0.5 * (m0 - m2) / denom;
        if (frac > 0.5)
            frac = 0.5;
        if (frac < -0.5)
            frac = -0.5;

        ToaMeasurement t;
        t.bs_id = y.bs_id;
        t.peak_lag = static_cast<long>(pick);
        t.frac_offset = frac;
        t.peak_metric = m1;
        t.toa_s = (static_cast<double>(pick) + frac) / sample_rate(cfg);
        return t;
    }

    struct Tdoa
    {
        std::uint32_t bs_id = 0;
        std::uint32_t ref_bs_id = 0;
        double tdoa_s = 0.0;
    };

    // Reference = strongest correlator peak.
    inline std::size_t pick_reference(const std::vector<ToaMeasurement> &toas)
    {
        if (toas.empty())
            throw dimension_error("pick_reference: no measurements");
        std::size_t best = 0;
        for (std::size_t i = 1; i < toas.size(); i++)
            if (toas[i].peak_metric > toas[best].peak_metric)
                best = i;
        return best;
    }

    inline std::vector<Tdoa> form_tdoa(const std::vector<ToaMeasurement> &toas, std::size_t ref_index)
    {
        if (ref_index >= toas.size())
            throw dimension_error("form_tdoa: reference index out of range");
        if (toas.size() < 2)
            throw dimension_error("form_tdoa: need at least two measurements");
        std::vector<Tdoa> out;
        out.reserve(toas.size() - 1);
        for (std::size_t i = 0; i < toas.size(); i++)
        {
            if (i == ref_index)
                continue;
            out.push_back({toas[i].bs_id, toas[ref_index].bs_id,
                           toas[i].toa_s - toas[ref_index].toa_s});
        }
        return out;
    }

    struct TdoaFix
    {
        Vec3 position;
        bool converged = false;
        int iterations = 0;
        double residual_rms_m = 0.0;
    };

    // Gauss-Newton on range-difference residuals, horizontal coordinates only
    // (receiver height taken from the initial guess). Requires at least two
    // range differences; throws on rank-deficient geometry.
    inline TdoaFix solve_tdoa(const std::vector<Tdoa> &tdoas, const std::vector<Vec3> &bs_pos,
                              const Vec3 &ref_pos, Vec3 initial, int max_iterations = 50,
                              double step_tol_m = 1e-4)
    {
        if (tdoas.size() != bs_pos.size())
            throw dimension_error("solve_tdoa: tdoa/station count mismatch");
        if (tdoas.size() < 2)
            throw dimension_error("solve_tdoa: need at least two range differences");

        TdoaFix fix;
        fix.position = initial;
        for (int it = 0; it < max_iterations; it++)
        {
            double a11 = 0.0, a12 = 0.0, a22 = 0.0, b1 = 0.0, b2 = 0.0;
            double rss = 0.0;
            double dref = dist3(fix.position, ref_pos);
            if (dref <= 0.0)
                throw degenerate_geometry_error("solve_tdoa: iterate collapsed onto the reference");
            double urx = (fix.position.x - ref_pos.x) / dref;
            double ury = (fix.position.y - ref_pos.y) / dref;
            for (std::size_t i = 0; i < tdoas.size(); i++)
            {
                double di = dist3(fix.position, bs_pos[i]);
                if (di <= 0.0)
                    throw degenerate_geometry_error("solve_tdoa: iterate collapsed onto a station");
                double model = di - dref;
                double meas = tdoas[i].tdoa_s * SPEED_OF_LIGHT;
                double r = meas - model;
                double jx = (fix.position.x - bs_pos[i].x) / di - urx;
                double jy = (fix.position.y - bs_pos[i].y) / di - ury;
                a11 += jx * jx;
                a12 += jx * jy;
                a22 += jy * jy;
                b1 += jx * r;
                b2 += jy * r;
                rss += r * r;
            }
            double det = a11 * a22 - a12 * a12;
            double scale = std::max(1e-30, sq(a11 + a22));
            if (std::abs(det) < 1e-12 * scale)
                throw degenerate_geometry_error("solve_tdoa: normal matrix is singular "
                                                "(collinear geometry)");
            double dx = (a22 * b1 - a12 * b2) / det;
            double dy = (a11 * b2 - a12 * b1) / det;
            fix.position.x += dx;
            fix.position.y += dy;
            fix.iterations = it + 1;
            fix.residual_rms_m = std::sqrt(rss / static_cast<double>(tdoas.size()));
            if (std::sqrt(dx * dx + dy * dy) < step_tol_m)
            {
                fix.converged = true;
                break;
            }
        }
        return fix;
    }

} // namespace nrdpe

#endif

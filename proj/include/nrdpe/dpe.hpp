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

#ifndef NRDPE_DPE_HPP
#define NRDPE_DPE_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <functional>

#include "channel.hpp"
#include "common.hpp"
#include "fft.hpp"
#include "scenario.hpp"
#include "waveform.hpp"

namespace nrdpe
{
    struct PositionHypothesis
    {
        double x = 0.0, y = 0.0, z = 0.0;
        double clock_bias_s = 0.0;

        Vec3 pos() const { return {x, y, z}; }
    };

    // Direct-positioning objective for one station, evaluated the long way:
    // demodulate, wipe pilots, remove the hypothesized delay ramp, project onto
    // n_taps impulse-response bins starting at the hypothesized arrival,
    // accumulate energy. This is the reference route; the table below
    // reproduces it to ~1e-4 relative.
    inline double objective_single_bs(const ReceivedSignal &y, const PrsWaveform &prs,
                                      const OfdmConfig &cfg, double hyp_delay_s,
                                      std::size_t n_taps)
    {
        cfg.validate();
        std::size_t n = cfg.n_subcarriers;
        if (y.samples.size() != n)
            throw dimension_error("objective_single_bs: signal length mismatch");
        if (prs.symbols.size() != n)
            throw dimension_error("objective_single_bs: pilot length mismatch");
        if (n_taps == 0 || n_taps > n)
            throw dimension_error("objective_single_bs: bad tap count");
        double fs = sample_rate(cfg);
        double cp_s = static_cast<double>(cfg.cp_samples) / fs;
        if (hyp_delay_s < 0.0 || hyp_delay_s > cp_s)
            throw excess_delay_error("objective_single_bs: hypothesized delay " +
                                     std::to_string(hyp_delay_s * 1e9) + " ns outside CP window");

        cvec spec = ofdm_demodulate(y.samples, cfg);
        cvec z(n);
        for (std::size_t k = 0; k < n; k++)
            z[k] = spec[k] * std::conj(prs.symbols[k]);

        double tau_samp = hyp_delay_s * fs;
        double nn = static_cast<double>(n);
        double acc = 0.0;
        for (std::size_t l = 0; l < n_taps; l++)
        {
            cdbl h(0.0, 0.0);
            double shift = tau_samp + static_cast<double>(l);
            for (std::size_t k = 0; k < n; k++)
            {
                double cyc = std::fmod(static_cast<double>(k) * shift, nn);
                double a = 2.0 * PI * cyc / nn;
                h += z[k] * cdbl(std::cos(a), std::sin(a));
            }
            acc += std::norm(h) / nn;
        }
        return acc;
    }

    // Per-station objective as a function of delay, tabulated once per received
    // signal: the pilot-wiped spectrum is zero-padded by `upsample`, inverse
    // transformed, and the tap-window energies are accumulated with a circular
    // running sum. Queries interpolate the table with a Catmull-Rom cubic.
    // This makes one grid-node evaluation O(1) instead of O(N log N).
    class DelayObjectiveTable
    {
      public:
        DelayObjectiveTable(const ReceivedSignal &y, const PrsWaveform &prs, const OfdmConfig &cfg,
                            std::size_t n_taps, std::size_t upsample, const FftPlan &plan_n,
                            const FftPlan &plan_up)
            : n(cfg.n_subcarriers), u(upsample), fs(sample_rate(cfg))
        {
            cfg.validate();
            if (upsample < 2)
                throw dimension_error("DelayObjectiveTable: upsample must be >= 2");
            if (n_taps == 0 || n_taps > n)
                throw dimension_error("DelayObjectiveTable: bad tap count");
            if (y.samples.size() != n || prs.symbols.size() != n)
                throw dimension_error("DelayObjectiveTable: length mismatch");
            if (plan_n.size() != n || plan_up.size() != n * u)
                throw dimension_error("DelayObjectiveTable: plan size mismatch");

            std::size_t nu = n * u;
            cvec z(y.samples);
            plan_n.forward_unitary(z);
            for (std::size_t k = 0; k < n; k++)
                z[k] *= std::conj(prs.symbols[k]);
            z.resize(nu, cdbl(0.0));
            plan_up.transform_raw(z, true);

            std::vector<double> e(nu);
            double inv_n = 1.0 / static_cast<double>(n);
            for (std::size_t j = 0; j < nu; j++)
                e[j] = std::norm(z[j]) * inv_n;

            // S[j] = sum of e at j, j+u, ..., j+(L-1)u (circular). Per residue
            // class mod u this is a length-L sliding window over a length-n ring.
            table.assign(nu, 0.0);
            for (std::size_t r = 0; r < u; r++)
            {
                double acc = 0.0;
                for (std::size_t l = 0; l < n_taps; l++)
                    acc += e[r + l * u];
                for (std::size_t t = 0; t < n; t++)
                {
                    table[r + t * u] = acc;
                    acc -= e[r + t * u];
                    acc += e[r + ((t + n_taps) % n) * u];
                }
            }
        }

        // Objective at an arbitrary delay (seconds).
        double operator()(double delay_s) const
        {
            double x = delay_s * fs * static_cast<double>(u);
            double nu = static_cast<double>(table.size());
            x = std::fmod(x, nu);
            if (x < 0.0)
                x += nu;
            std::size_t j1 = static_cast<std::size_t>(x);
            if (j1 >= table.size())
                j1 = 0, x = 0.0;
            double f = x - static_cast<double>(j1);
            std::size_t m = table.size();
            double p0 = table[(j1 + m - 1) % m];
            double p1 = table[j1];
            double p2 = table[(j1 + 1) % m];
            double p3 = table[(j1 + 2) % m];
            return p1 + 0.5 * f * (p2 - p0 +
                                   f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 +
                                        f * (3.0 * (p1 - p2) + p3 - p0)));
        }

      private:
        std::size_t n, u;
        double fs;
        std::vector<double> table;
    };

    struct CandidateGrid
    {
        PositionHypothesis center;
        double extent_x_m = 100.0; // full width
        double extent_y_m = 100.0;
        double extent_z_m = 0.0;
        double resolution_m = 2.0;
        double clock_bias_range_s = 15e-9; // half range
        double clock_bias_step_s = 3e-9;
        bool x_axis = true;
        bool y_axis = true;
        bool z_axis = false;
        bool bias_axis = false;

        void validate() const
        {
            if (resolution_m <= 0.0)
                throw config_error("CandidateGrid: resolution must be positive");
            if (bias_axis && (clock_bias_step_s <= 0.0 || clock_bias_range_s < 0.0))
                throw config_error("CandidateGrid: bad clock bias axis");
            if (!x_axis && !y_axis && !z_axis && !bias_axis)
                throw config_error("CandidateGrid: every axis disabled");
        }

        static std::vector<double> axis(double center, double half_extent, double step, bool enabled)
        {
            if (!enabled || half_extent <= 0.0)
                return {center};
            auto k = static_cast<long>(std::floor(half_extent / step + 1e-9));
            std::vector<double> v;
            v.reserve(static_cast<std::size_t>(2 * k + 1));
            for (long i = -k; i <= k; i++)
                v.push_back(center + static_cast<double>(i) * step);
            return v;
        }

        std::vector<double> xs() const { return axis(center.x, extent_x_m / 2, resolution_m, x_axis); }
        std::vector<double> ys() const { return axis(center.y, extent_y_m / 2, resolution_m, y_axis); }
        std::vector<double> zs() const { return axis(center.z, extent_z_m / 2, resolution_m, z_axis); }
        std::vector<double> biases() const
        {
            return axis(center.clock_bias_s, clock_bias_range_s, clock_bias_step_s, bias_axis);
        }

        CandidateGrid shrunk(const PositionHypothesis &new_center, double factor) const
        {
            if (factor <= 1.0)
                throw config_error("CandidateGrid: shrink factor must exceed 1");
            CandidateGrid g = *this;
            g.center = new_center;
            g.extent_x_m /= factor;
            g.extent_y_m /= factor;
            g.extent_z_m /= factor;
            g.resolution_m /= factor;
            g.clock_bias_range_s /= factor;
            g.clock_bias_step_s /= factor;
            return g;
        }
    };

    // Aggregated objective over a candidate grid. Linear index runs x fastest,
    // then y, z, clock bias. Ties go to the lowest linear index.
    struct Correlogram
    {
        std::vector<double> xs, ys, zs, biases;
        std::vector<double> values;
        std::size_t argmax = 0;
        double max_value = 0.0;

        std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz, std::size_t ib) const
        {
            return ((ib * zs.size() + iz) * ys.size() + iy) * xs.size() + ix;
        }

        PositionHypothesis hypothesis_at(std::size_t lin) const
        {
            std::size_t nx = xs.size(), ny = ys.size(), nz = zs.size();
            std::size_t ix = lin % nx;
            std::size_t iy = (lin / nx) % ny;
            std::size_t iz = (lin / (nx * ny)) % nz;
            std::size_t ib = lin / (nx * ny * nz);
            return {xs[ix], ys[iy], zs[iz], biases[ib]};
        }

        PositionHypothesis argmax_hypothesis() const { return hypothesis_at(argmax); }
    };

    // evaluator(bs_index, hypothesized_total_delay_s) -> per-station objective.
    template <class Evaluator>
    Correlogram build_correlogram_with(const std::vector<Vec3> &bs_pos, const CandidateGrid &grid,
                                       Evaluator &&eval)
    {
        grid.validate();
        if (bs_pos.empty())
            throw dimension_error("build_correlogram: no stations");
        Correlogram c;
        c.xs = grid.xs();
        c.ys = grid.ys();
        c.zs = grid.zs();
        c.biases = grid.biases();
        c.values.assign(c.xs.size() * c.ys.size() * c.zs.size() * c.biases.size(), 0.0);

        std::size_t lin = 0;
        double best = -1.0;
        std::size_t best_lin = 0;
        for (std::size_t ib = 0; ib < c.biases.size(); ib++)
            for (std::size_t iz = 0; iz < c.zs.size(); iz++)
                for (std::size_t iy = 0; iy < c.ys.size(); iy++)
                    for (std::size_t ix = 0; ix < c.xs.size(); ix++, lin++)
                    {
                        Vec3 p{c.xs[ix], c.ys[iy], c.zs[iz]};
                        double v = 0.0;
                        for (std::size_t m = 0; m < bs_pos.size(); m++)
                        {
                            double tau = dist3(p, bs_pos[m]) / SPEED_OF_LIGHT + c.biases[ib];
                            v += eval(m, tau);
                        }
                        c.values[lin] = v;
                        if (v > best)
                        {
                            best = v;
                            best_lin = lin;
                        }
                    }
        c.argmax = best_lin;
        c.max_value = best;
        return c;
    }

    inline Correlogram build_correlogram(const std::vector<DelayObjectiveTable> &tables,
                                         const std::vector<Vec3> &bs_pos, const CandidateGrid &grid)
    {
        if (tables.size() != bs_pos.size())
            throw dimension_error("build_correlogram: table/station count mismatch");
        return build_correlogram_with(bs_pos, grid,
                                      [&](std::size_t m, double tau) { return tables[m](tau); });
    }

    struct PositionEstimate
    {
        PositionHypothesis estimate;
        double objective = 0.0;
        std::vector<PositionHypothesis> stage_argmax;
        std::vector<double> stage_objective;
        std::vector<Correlogram> stage_grids; // filled only when requested
        std::vector<std::string> warnings;
    };

    namespace detail
    {
        // Local maxima of the first-stage grid, best first, at most `count`.
        // A cell adjacent to an already picked one along every axis sits in the
        // same basin and is skipped; anything further apart is a distinct seed.
        inline std::vector<std::size_t> top_seed_cells(const Correlogram &c, std::size_t count)
        {
            std::size_t nx = c.xs.size(), ny = c.ys.size(), nz = c.zs.size();
            std::vector<std::size_t> order(c.values.size());
            for (std::size_t i = 0; i < order.size(); i++)
                order[i] = i;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                if (c.values[a] != c.values[b])
                    return c.values[a] > c.values[b];
                return a < b;
            });
            auto coords = [&](std::size_t lin) {
                std::array<std::size_t, 4> q{};
                q[0] = lin % nx;
                q[1] = (lin / nx) % ny;
                q[2] = (lin / (nx * ny)) % nz;
                q[3] = lin / (nx * ny * nz);
                return q;
            };
            std::vector<std::size_t> seeds;
            for (std::size_t lin : order)
            {
                if (seeds.size() >= count)
                    break;
                auto qa = coords(lin);
                bool same_basin = false;
                for (std::size_t s : seeds)
                {
                    auto qb = coords(s);
                    bool adjacent = true;
                    for (std::size_t d = 0; d < 4 && adjacent; d++)
                        adjacent = (qa[d] > qb[d] ? qa[d] - qb[d] : qb[d] - qa[d]) <= 1;
                    if (adjacent)
                    {
                        same_basin = true;
                        break;
                    }
                }
                if (!same_basin)
                    seeds.push_back(lin);
            }
            return seeds;
        }

        // Shrink-and-recenter kept inside the first-stage search volume: the
        // refinement reads the surface at finer steps, it does not extend it.
        inline CandidateGrid shrunk_within(const CandidateGrid &outer, const CandidateGrid &cur,
                                           const PositionHypothesis &at, double factor)
        {
            CandidateGrid g = cur.shrunk(at, factor);
            auto clamp_center = [](double v, double c, double outer_half, double inner_half) {
                double lo = c - outer_half + inner_half, hi = c + outer_half - inner_half;
                return lo > hi ? c : std::min(std::max(v, lo), hi);
            };
            if (g.x_axis)
                g.center.x = clamp_center(g.center.x, outer.center.x, outer.extent_x_m / 2,
                                          g.extent_x_m / 2);
            if (g.y_axis)
                g.center.y = clamp_center(g.center.y, outer.center.y, outer.extent_y_m / 2,
                                          g.extent_y_m / 2);
            if (g.z_axis)
                g.center.z = clamp_center(g.center.z, outer.center.z, outer.extent_z_m / 2,
                                          g.extent_z_m / 2);
            if (g.bias_axis)
                g.center.clock_bias_s =
                    clamp_center(g.center.clock_bias_s, outer.center.clock_bias_s,
                                 outer.clock_bias_range_s, g.clock_bias_range_s);
            return g;
        }
    } // namespace detail

    // Multi-stage refinement: evaluate the full grid once, then run the shrink
    // and re-center loop independently from the best few distinct first-stage
    // cells, keeping whichever branch ends highest. Near-tie basins are common
    // when several window alignments capture similar energy, and the coarse
    // first stage can rank them in the wrong order.
    template <class Evaluator>
    PositionEstimate estimate_position_with(const std::vector<Vec3> &bs_pos, CandidateGrid grid,
                                            int refine_stages, double shrink_factor,
                                            Evaluator &&eval, bool keep_grids = false)
    {
        if (refine_stages < 0)
            throw config_error("estimate_position: negative refinement count");
        PositionEstimate est;
        Correlogram first = build_correlogram_with(bs_pos, grid, eval);
        est.estimate = first.argmax_hypothesis();
        est.objective = first.max_value;
        est.stage_argmax.push_back(est.estimate);
        est.stage_objective.push_back(first.max_value);
        if (refine_stages == 0)
        {
            if (keep_grids)
                est.stage_grids.push_back(std::move(first));
            return est;
        }

        constexpr std::size_t max_seeds = 4;
        std::vector<std::size_t> seeds = detail::top_seed_cells(first, max_seeds);
        std::vector<PositionHypothesis> best_argmax;
        std::vector<double> best_objective;
        std::vector<Correlogram> best_grids;
        double best = -1.0;
        for (std::size_t seed : seeds)
        {
            CandidateGrid g = detail::shrunk_within(grid, grid, first.hypothesis_at(seed),
                                                    shrink_factor);
            std::vector<PositionHypothesis> argmaxes;
            std::vector<double> objectives;
            std::vector<Correlogram> grids;
            PositionHypothesis h{};
            double obj = 0.0;
            for (int s = 1;; s++)
            {
                Correlogram c = build_correlogram_with(bs_pos, g, eval);
                h = c.argmax_hypothesis();
                obj = c.max_value;
                argmaxes.push_back(h);
                objectives.push_back(obj);
                if (keep_grids)
                    grids.push_back(std::move(c));
                if (s == refine_stages)
                    break;
                g = detail::shrunk_within(grid, g, h, shrink_factor);
            }
            if (obj > best)
            {
                best = obj;
                est.estimate = h;
                est.objective = obj;
                best_argmax = std::move(argmaxes);
                best_objective = std::move(objectives);
                best_grids = std::move(grids);
            }
        }
        est.stage_argmax.insert(est.stage_argmax.end(), best_argmax.begin(), best_argmax.end());
        est.stage_objective.insert(est.stage_objective.end(), best_objective.begin(),
                                   best_objective.end());
        if (keep_grids)
        {
            est.stage_grids.push_back(std::move(first));
            for (auto &g : best_grids)
                est.stage_grids.push_back(std::move(g));
        }
        return est;
    }

    inline PositionEstimate estimate_position(const std::vector<DelayObjectiveTable> &tables,
                                              const std::vector<Vec3> &bs_pos, CandidateGrid grid,
                                              int refine_stages, double shrink_factor,
                                              bool keep_grids = false)
    {
        if (tables.size() != bs_pos.size())
            throw dimension_error("estimate_position: table/station count mismatch");
        return estimate_position_with(
            bs_pos, grid, refine_stages, shrink_factor,
            [&](std::size_t m, double tau) { return tables[m](tau); }, keep_grids);
    }

    // Receiver tap window: the smallest bin count whose window holds the given
    // fraction of the mean power profile. A window stretched to the full excess
    // delay spread is mostly empty bins, and empty edge bins anchor nothing, so
    // the search can slide the window at almost no cost; a window that holds
    // most of the power keeps strong paths at both edges, which is what pins
    // the arrival time, and leaves outside only a tail too small and too far
    // to reward a shifted alignment.
    inline std::size_t capture_tap_count(const std::vector<double> &delay_s,
                                         const std::vector<double> &power_lin,
                                         const OfdmConfig &cfg, double fraction = 0.9)
    {
        if (delay_s.empty() || delay_s.size() != power_lin.size())
            throw dimension_error("capture_tap_count: bad profile");
        if (fraction <= 0.0 || fraction > 1.0)
            throw domain_error("capture_tap_count: fraction outside (0, 1]");
        double fs = sample_rate(cfg);
        double total = 0.0, latest = 0.0;
        for (std::size_t i = 0; i < delay_s.size(); i++)
        {
            if (delay_s[i] < 0.0 || power_lin[i] < 0.0)
                throw domain_error("capture_tap_count: negative delay or power");
            total += power_lin[i];
            latest = std::max(latest, delay_s[i]);
        }
        if (total <= 0.0)
            throw domain_error("capture_tap_count: zero-power profile");
        std::size_t max_l = static_cast<std::size_t>(std::ceil(latest * fs)) + 1;
        for (std::size_t l = 1; l < max_l; l++)
        {
            double captured = 0.0;
            for (std::size_t i = 0; i < delay_s.size(); i++)
                if (delay_s[i] * fs <= static_cast<double>(l - 1))
                    captured += power_lin[i];
            if (captured >= fraction * total)
                return l;
        }
        return max_l;
    }

} // namespace nrdpe

#endif

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

#ifndef NRDPE_MONTECARLO_HPP
#define NRDPE_MONTECARLO_HPP

#include <atomic>
#include <cstdint>
#include <mutex>
#include <thread>

#include "config.hpp"
#include "dpe.hpp"
#include "otdoa.hpp"

namespace nrdpe
{
    struct TrialRecord
    {
        std::uint64_t trial_id = 0;
        std::uint64_t seed = 0; // derived per-trial seed, for standalone replay
        double truth_x = 0.0, truth_y = 0.0;
        double clock_bias_ns = 0.0;
        int los_count = 0;
        int n_links = 0;
        double mean_snr_db = 0.0;
        double min_snr_db = 0.0;
        double max_snr_db = 0.0;
        bool dpe_ok = false;
        double dpe_x = 0.0, dpe_y = 0.0;
        double dpe_err_m = 0.0;
        double dpe_bias_est_ns = 0.0;
        bool otdoa_ok = false;
        double otdoa_x = 0.0, otdoa_y = 0.0;
        double otdoa_err_m = 0.0;
        bool failed = false;
        std::string error_msg;
    };

    struct Percentiles
    {
        double p50 = 0.0, p90 = 0.0, p95 = 0.0, p99 = 0.0;
    };

    struct ExperimentSummary
    {
        std::string method;
        std::size_t n_trials = 0;
        std::size_t failed_trials = 0; // trials without a usable error for this method
        double rmse_m = 0.0;
        Percentiles pct;
        double los_fraction = 0.0;
        std::vector<double> sorted_errors_m; // empirical CDF support
        std::string config_digest;
    };

    // Empirical percentile: smallest sorted value whose CDF reaches q.
    inline double percentile(const std::vector<double> &sorted, double q)
    {
        if (sorted.empty())
            throw empty_statistics_error("percentile: no samples");
        if (q <= 0.0 || q > 1.0)
            throw domain_error("percentile: q must be in (0, 1]");
        double idx = std::ceil(q * static_cast<double>(sorted.size()));
        auto i = static_cast<std::size_t>(idx);
        if (i == 0)
            i = 1;
        return sorted[std::min(i, sorted.size()) - 1];
    }

    template <class ErrGetter>
    ExperimentSummary summarize(const std::vector<TrialRecord> &records, const std::string &method,
                                ErrGetter &&err_of)
    {
        if (records.empty())
            throw empty_statistics_error("summarize: no trial records");
        ExperimentSummary s;
        s.method = method;
        s.n_trials = records.size();
        double se = 0.0;
        double los_acc = 0.0;
        std::size_t los_n = 0;
        for (const auto &r : records)
        {
            if (r.n_links > 0)
            {
                los_acc += static_cast<double>(r.los_count) / r.n_links;
                los_n++;
            }
            double e = err_of(r);
            if (std::isnan(e))
            {
                s.failed_trials++;
                continue;
            }
            s.sorted_errors_m.push_back(e);
            se += e * e;
        }
        if (s.sorted_errors_m.empty())
            throw empty_statistics_error("summarize: every trial failed for method " + method);
        std::sort(s.sorted_errors_m.begin(), s.sorted_errors_m.end());
        s.rmse_m = std::sqrt(se / static_cast<double>(s.sorted_errors_m.size()));
        s.pct.p50 = percentile(s.sorted_errors_m, 0.50);
        s.pct.p90 = percentile(s.sorted_errors_m, 0.90);
        s.pct.p95 = percentile(s.sorted_errors_m, 0.95);
        s.pct.p99 = percentile(s.sorted_errors_m, 0.99);
        s.los_fraction = los_n ? los_acc / static_cast<double>(los_n) : 0.0;
        return s;
    }

    inline ExperimentSummary summarize_dpe(const std::vector<TrialRecord> &records)
    {
        return summarize(records, "dpe", [](const TrialRecord &r) {
            return (r.failed || !r.dpe_ok) ? std::nan("") : r.dpe_err_m;
        });
    }

    inline ExperimentSummary summarize_otdoa(const std::vector<TrialRecord> &records)
    {
        return summarize(records, "otdoa", [](const TrialRecord &r) {
            return (r.failed || !r.otdoa_ok) ? std::nan("") : r.otdoa_err_m;
        });
    }

    // Immutable per-experiment context shared by the workers.
    struct ExperimentContext
    {
        SimConfig cfg;
        TdlProfile los_profile;
        TdlProfile nlos_profile;
        std::size_t n_taps = 0;      // widest window across the two profiles
        std::size_t los_n_taps = 0;  // window sized to the LoS profile extent
        std::size_t nlos_n_taps = 0; // window sized to the NLoS profile extent

        explicit ExperimentContext(const SimConfig &c)
            : cfg(c), los_profile(builtin_tdl(c.channel.los_profile)),
              nlos_profile(builtin_tdl(c.channel.nlos_profile))
        {
            cfg.validate();
            if (cfg.dpe.n_taps)
                n_taps = los_n_taps = nlos_n_taps = cfg.dpe.n_taps;
            else
            {
                double ds = cfg.channel.delay_spread_ns * 1e-9;
                los_n_taps = profile_window(los_profile, ds);
                nlos_n_taps = profile_window(nlos_profile, ds);
                n_taps = std::max(los_n_taps, nlos_n_taps);
            }
        }

        std::size_t link_n_taps(bool los) const { return los ? los_n_taps : nlos_n_taps; }

    private:
        std::size_t profile_window(const TdlProfile &p, double delay_spread_s) const
        {
            std::vector<double> power;
            power.reserve(p.taps.size());
            for (const auto &t : p.taps)
                power.push_back(db_to_lin(t.power_db));
            return capture_tap_count(scale_delays(p, delay_spread_s), power, cfg.ofdm);
        }
    };

    namespace detail
    {
        struct TrialScene
        {
            Vec3 ue;
            double clock_bias_s = 0.0;
            std::vector<std::size_t> selected;       // indices into cfg.bss, nearest first
            std::vector<LinkCondition> conditions;   // for the selected stations
            std::vector<double> snr_db;              // per selected link
        };

        // Geometry substream draw order: ue.x, ue.y, clock bias, then one LoS
        // uniform per station in deployment order.
        inline TrialScene draw_scene(const ExperimentContext &ctx, std::uint64_t base_seed,
                                     std::uint64_t trial)
        {
            const SimConfig &c = ctx.cfg;
            Stream geo(derive_seed(base_seed, trial, stream_tag::geometry));
            TrialScene s;
            if (c.ue.fixed)
                s.ue = {c.ue.fixed_x, c.ue.fixed_y, c.ue.height_m};
            else
            {
                double wx = (c.region.x_max - c.region.x_min) * c.ue.inset_frac;
                double wy = (c.region.y_max - c.region.y_min) * c.ue.inset_frac;
                s.ue.x = geo.uniform(c.region.x_min + wx, c.region.x_max - wx);
                s.ue.y = geo.uniform(c.region.y_min + wy, c.region.y_max - wy);
                s.ue.z = c.ue.height_m;
            }
            s.clock_bias_s = geo.gauss_truncated(c.exp.clock_bias_sigma_ns * 1e-9, 3.0);

            auto all = draw_link_conditions(c.bss, s.ue, geo);
            s.selected = select_nearest(c.bss, s.ue, c.exp.n_bs);
            for (std::size_t j = 0; j < s.selected.size(); j++)
            {
                LinkCondition lc = all[s.selected[j]];
                if (j < c.exp.force_los_pattern.size())
                    lc.los = c.exp.force_los_pattern[j];
                s.conditions.push_back(lc);
            }
            for (std::size_t j = 0; j < s.selected.size(); j++)
            {
                const auto &bs = c.bss[s.selected[j]];
                double snr = c.exp.snr_mode == "fixed"
                                 ? c.exp.snr_db
                                 : link_snr_db(bs, s.ue, s.conditions[j].los, c.budget);
                s.snr_db.push_back(snr);
            }
            return s;
        }
    } // namespace detail

    // Everything a receiver sees in one snapshot, plus the scene that produced it.
    struct TrialSignals
    {
        detail::TrialScene scene;
        std::vector<PrsWaveform> prss;
        std::vector<ReceivedSignal> rx;
        std::vector<Vec3> bs_pos;
    };

    inline TrialSignals synthesize_trial(const ExperimentContext &ctx, std::uint64_t base_seed,
                                         std::uint64_t trial)
    {
        const SimConfig &c = ctx.cfg;
        TrialSignals ts;
        ts.scene = detail::draw_scene(ctx, base_seed, trial);
        for (std::size_t j = 0; j < ts.scene.selected.size(); j++)
        {
            const auto &bs = c.bss[ts.scene.selected[j]];
            const auto &lc = ts.scene.conditions[j];
            PrsWaveform prs =
                generate_prs(bs.id, c.ofdm, derive_seed(base_seed, trial, stream_tag::pilots, bs.id));
            Stream ch(derive_seed(base_seed, trial, stream_tag::channel, bs.id));
            const TdlProfile &prof = lc.los ? ctx.los_profile : ctx.nlos_profile;
            ChannelRealization h = realize_channel(prof, c.channel.delay_spread_ns * 1e-9, ch,
                                                   c.channel.deterministic_only);
            cvec tx = ofdm_modulate(prs.symbols, c.ofdm);
            double geo_delay = dist3(bs.pos, ts.scene.ue) / SPEED_OF_LIGHT;
            ReceivedSignal y = apply_channel(tx, h, c.ofdm, geo_delay, ts.scene.clock_bias_s);
            y.bs_id = bs.id;
            if (std::isfinite(ts.scene.snr_db[j]))
                add_awgn(y, ts.scene.snr_db[j],
                         derive_seed(base_seed, trial, stream_tag::noise, bs.id));
            ts.prss.push_back(std::move(prs));
            ts.rx.push_back(std::move(y));
            ts.bs_pos.push_back(bs.pos);
        }
        return ts;
    }

    inline CandidateGrid grid_for(const SimConfig &c, const Vec3 &center)
    {
        CandidateGrid grid;
        grid.center = {center.x, center.y, center.z, 0.0};
        grid.extent_x_m = grid.extent_y_m = c.dpe.extent_m;
        grid.resolution_m = c.dpe.resolution_m;
        grid.bias_axis = c.dpe.bias_axis;
        grid.clock_bias_range_s = c.dpe.bias_range_ns * 1e-9;
        grid.clock_bias_step_s = c.dpe.bias_step_ns * 1e-9;
        return grid;
    }

    inline TrialRecord run_trial(const ExperimentContext &ctx, std::uint64_t base_seed,
                                 std::uint64_t trial, const FftPlan &plan_n, const FftPlan &plan_up)
    {
        const SimConfig &c = ctx.cfg;
        TrialRecord rec;
        rec.trial_id = trial;
        rec.seed = derive_seed(base_seed, trial, stream_tag::geometry);
        try
        {
            TrialSignals ts = synthesize_trial(ctx, base_seed, trial);
            const auto &scene = ts.scene;
            rec.truth_x = scene.ue.x;
            rec.truth_y = scene.ue.y;
            rec.clock_bias_ns = scene.clock_bias_s * 1e9;
            rec.n_links = static_cast<int>(scene.selected.size());
            double snr_sum = 0.0, snr_min = 1e30, snr_max = -1e30;
            for (std::size_t j = 0; j < scene.selected.size(); j++)
            {
                rec.los_count += scene.conditions[j].los ? 1 : 0;
                snr_sum += scene.snr_db[j];
                snr_min = std::min(snr_min, scene.snr_db[j]);
                snr_max = std::max(snr_max, scene.snr_db[j]);
            }
            rec.mean_snr_db = snr_sum / static_cast<double>(scene.selected.size());
            rec.min_snr_db = snr_min;
            rec.max_snr_db = snr_max;

            const auto &prss = ts.prss;
            const auto &rx = ts.rx;
            const auto &bs_pos = ts.bs_pos;
            std::vector<DelayObjectiveTable> tables;
            tables.reserve(rx.size());
            for (std::size_t j = 0; j < rx.size(); j++)
                tables.emplace_back(rx[j], prss[j], c.ofdm,
                                    ctx.link_n_taps(scene.conditions[j].los), c.dpe.upsample,
                                    plan_n, plan_up);

            CandidateGrid grid = grid_for(c, scene.ue);
            PositionEstimate est = estimate_position(tables, bs_pos, grid, c.dpe.refine_stages,
                                                     c.dpe.shrink_factor);
            rec.dpe_ok = true;
            rec.dpe_x = est.estimate.x;
            rec.dpe_y = est.estimate.y;
            rec.dpe_err_m = std::sqrt(sq(est.estimate.x - scene.ue.x) + sq(est.estimate.y - scene.ue.y));
            rec.dpe_bias_est_ns = est.estimate.clock_bias_s * 1e9;

            if (c.exp.otdoa_enabled)
            {
                try
                {
                    std::vector<ToaMeasurement> toas;
                    ToaMode mode = c.otdoa.toa_mode == "leading_edge" ? ToaMode::leading_edge
                                                                      : ToaMode::global_peak;
                    for (std::size_t j = 0; j < rx.size(); j++)
                        toas.push_back(estimate_toa(rx[j], prss[j], c.ofdm, mode,
                                                    c.otdoa.leading_edge_threshold));
                    std::size_t ref = pick_reference(toas);
                    auto tdoas = form_tdoa(toas, ref);
                    std::vector<Vec3> others;
                    for (std::size_t j = 0; j < bs_pos.size(); j++)
                        if (j != ref)
                            others.push_back(bs_pos[j]);
                    Vec3 init{0.0, 0.0, scene.ue.z};
                    for (const auto &p : bs_pos)
                    {
                        init.x += p.x / static_cast<double>(bs_pos.size());
                        init.y += p.y / static_cast<double>(bs_pos.size());
                    }
                    TdoaFix fix = solve_tdoa(tdoas, others, bs_pos[ref], init);
                    if (fix.converged)
                    {
                        rec.otdoa_ok = true;
                        rec.otdoa_x = fix.position.x;
                        rec.otdoa_y = fix.position.y;
                        rec.otdoa_err_m =
                            std::sqrt(sq(fix.position.x - scene.ue.x) + sq(fix.position.y - scene.ue.y));
                    }
                }
                catch (const error &)
                {
                    // baseline failure on this trial; recorded via otdoa_ok
                }
            }
        }
        catch (const error &e)
        {
            rec.failed = true;
            rec.dpe_ok = false;
            rec.otdoa_ok = false;
            rec.error_msg = e.what();
        }
        return rec;
    }

    struct ExperimentResult
    {
        std::vector<TrialRecord> records;
        ExperimentSummary dpe;
        ExperimentSummary otdoa; // n_trials == 0 when the baseline is disabled
        std::vector<std::string> warnings;
        std::string config_digest;
    };

    // Deterministic in base_seed and independent of worker count: trial t always
    // uses the same derived substreams and lands in slot t.
    inline ExperimentResult run_experiment(const SimConfig &cfg, std::uint64_t base_seed,
                                           std::size_t workers = 1)
    {
        ExperimentContext ctx(cfg);
        std::size_t n = cfg.exp.n_trials;
        if (workers == 0)
            workers = 1;
        workers = std::min(workers, n);

        std::vector<TrialRecord> records(n);
        std::atomic<std::uint64_t> next{0};
        std::exception_ptr eptr;
        std::mutex eptr_mtx;
        auto body = [&]() {
            FftPlan plan_n(cfg.ofdm.n_subcarriers);
            FftPlan plan_up(cfg.ofdm.n_subcarriers * cfg.dpe.upsample);
            try
            {
                for (;;)
                {
                    std::uint64_t t = next.fetch_add(1);
                    if (t >= n)
                        break;
                    records[t] = run_trial(ctx, base_seed, t, plan_n, plan_up);
                }
            }
            catch (...)
            {
                std::lock_guard<std::mutex> g(eptr_mtx);
                if (!eptr)
                    eptr = std::current_exception();
            }
        };
        if (workers <= 1)
            body();
        else
        {
            std::vector<std::thread> pool;
            for (std::size_t w = 0; w < workers; w++)
                pool.emplace_back(body);
            for (auto &th : pool)
                th.join();
        }
        if (eptr)
            std::rethrow_exception(eptr);

        ExperimentResult res;
        res.records = std::move(records);
        res.config_digest = config_digest(cfg);
        res.dpe = summarize_dpe(res.records);
        res.dpe.config_digest = res.config_digest;
        if (cfg.exp.otdoa_enabled)
        {
            try
            {
                res.otdoa = summarize_otdoa(res.records);
                res.otdoa.config_digest = res.config_digest;
            }
            catch (const empty_statistics_error &)
            {
                // baseline produced no usable fix on any trial; summary stays
                // empty (n_trials == 0) and is omitted downstream
                res.warnings.push_back("otdoa baseline failed on every trial");
            }
        }
        if (cfg.dpe.bias_axis && cfg.dpe.bias_range_ns < 3.0 * cfg.exp.clock_bias_sigma_ns)
            res.warnings.push_back("clock bias search range (" + std::to_string(cfg.dpe.bias_range_ns) +
                                   " ns) is narrower than the +/-3 sigma bias support");
        return res;
    }

    struct SweepPoint
    {
        double axis_value = 0.0;
        ExperimentSummary dpe;
        ExperimentSummary otdoa;
    };

    // Sweeps experiment.snr_db or experiment.n_bs. Per-trial seeds derive from
    // (base_seed, trial) only, so every point sees the same noise and geometry
    // draws and curves differ only through the swept parameter.
    inline std::vector<SweepPoint> sweep_axis(const SimConfig &base, const std::string &axis,
                                              const std::vector<double> &values,
                                              std::uint64_t base_seed, std::size_t workers = 1)
    {
        if (values.empty())
            throw config_error("sweep_axis: no axis values");
        if (axis != "snr_db" && axis != "n_bs")
            throw config_error("sweep_axis: unsupported axis '" + axis + "'");
        std::vector<SweepPoint> out;
        for (double v : values)
        {
            SimConfig cfg = base;
            if (axis == "snr_db")
            {
                cfg.exp.snr_mode = "fixed";
                cfg.exp.snr_db = v;
            }
            else
            {
                if (v < 1.0 || v != std::floor(v))
                    throw config_error("sweep_axis: n_bs values must be positive integers");
                cfg.exp.n_bs = static_cast<std::size_t>(v);
            }
            ExperimentResult r = run_experiment(cfg, base_seed, workers);
            SweepPoint p;
            p.axis_value = v;
            p.dpe = r.dpe;
            p.otdoa = r.otdoa;
            out.push_back(std::move(p));
        }
        return out;
    }

} // namespace nrdpe

#endif

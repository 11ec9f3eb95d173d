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

#ifndef NRDPE_CLI_HPP
#define NRDPE_CLI_HPP

#include <cctype>
#include <filesystem>
#include <functional>
#include <iostream>

#include "config.hpp"
#include "io.hpp"
#include "montecarlo.hpp"

namespace nrdpe
{
    // Exit codes shared by the command line tool and the self test.
    enum exit_code : int
    {
        exit_ok = 0,
        exit_config = 2,
        exit_runtime = 3,
        exit_acceptance = 4,
    };

    struct CliOptions
    {
        std::string config_path;
        std::vector<std::string> overrides;
        std::uint64_t seed = 1;
        std::string out_dir = ".";
        std::size_t workers = 1;
    };

    namespace detail
    {
        inline std::string outpath(const CliOptions &o, const std::string &name)
        {
            std::filesystem::create_directories(o.out_dir);
            return (std::filesystem::path(o.out_dir) / name).string();
        }

        inline SimConfig load_config(const CliOptions &o)
        {
            if (o.config_path.empty())
                throw config_error("--config is required for this command");
            return load_sim_config(o.config_path, o.overrides);
        }
    } // namespace detail

    // Realizes one channel draw and writes its impulse response and the profile's
    // average power delay profile.
    inline int cmd_channel_dump(const CliOptions &o, const std::string &profile_name, double ds_ns)
    {
        if (ds_ns <= 0.0)
            throw config_error("channel-dump: delay spread must be positive");
        TdlProfile p = builtin_tdl(profile_name);
        Stream st(derive_seed(o.seed, 0, stream_tag::channel, 0));
        ChannelRealization h = realize_channel(p, ds_ns * 1e-9, st);
        std::string tag = p.name;
        for (auto &ch : tag)
            ch = ch == '-' ? '_' : static_cast<char>(std::tolower(ch));
        std::string cir = detail::outpath(o, "cir_" + tag + ".csv");
        std::string pdp = detail::outpath(o, "pdp_" + tag + ".csv");
        write_cir_csv(cir, h);
        write_pdp_csv(pdp, p, ds_ns * 1e-9);
        std::cout << "wrote " << cir << "\n";
        std::cout << "wrote " << pdp << "\n";
        return exit_ok;
    }

    // Builds the first-stage objective surface for trial 0 of the configured
    // experiment and writes the argmax slice.
    inline int cmd_correlogram(const CliOptions &o)
    {
        SimConfig cfg = detail::load_config(o);
        ExperimentContext ctx(cfg);
        TrialSignals ts = synthesize_trial(ctx, o.seed, 0);
        FftPlan plan_n(cfg.ofdm.n_subcarriers);
        FftPlan plan_up(cfg.ofdm.n_subcarriers * cfg.dpe.upsample);
        std::vector<DelayObjectiveTable> tables;
        for (std::size_t j = 0; j < ts.rx.size(); j++)
            tables.emplace_back(ts.rx[j], ts.prss[j], cfg.ofdm,
                                ctx.link_n_taps(ts.scene.conditions[j].los), cfg.dpe.upsample,
                                plan_n, plan_up);
        CandidateGrid grid = grid_for(cfg, ts.scene.ue);
        PositionEstimate est = estimate_position(tables, ts.bs_pos, grid, cfg.dpe.refine_stages,
                                                 cfg.dpe.shrink_factor, true);
        const Correlogram &stage1 = est.stage_grids.front();

        std::vector<std::pair<std::string, std::string>> meta;
        meta.emplace_back("config_digest", config_digest(cfg));
        meta.emplace_back("base_seed", std::to_string(o.seed));
        meta.emplace_back("n_bs", std::to_string(ts.bs_pos.size()));
        meta.emplace_back("truth_x", fmt9(ts.scene.ue.x));
        meta.emplace_back("truth_y", fmt9(ts.scene.ue.y));
        meta.emplace_back("stage1_argmax_x", fmt9(stage1.argmax_hypothesis().x));
        meta.emplace_back("stage1_argmax_y", fmt9(stage1.argmax_hypothesis().y));
        meta.emplace_back("stage1_objective", fmt9(stage1.max_value));
        meta.emplace_back("stages", std::to_string(est.stage_argmax.size()));
        meta.emplace_back("estimate_x", fmt9(est.estimate.x));
        meta.emplace_back("estimate_y", fmt9(est.estimate.y));
        meta.emplace_back("estimate_objective", fmt9(est.objective));
        std::string path = detail::outpath(o, "correlogram.csv");
        write_correlogram_csv(path, stage1, meta);
        std::cout << "wrote " << path << "\n";
        std::cout << "estimate_x " << fmt9(est.estimate.x) << "\n";
        std::cout << "estimate_y " << fmt9(est.estimate.y) << "\n";
        return exit_ok;
    }

    inline int cmd_run(const CliOptions &o)
    {
        SimConfig cfg = detail::load_config(o);
        ExperimentResult res = run_experiment(cfg, o.seed, o.workers);
        std::string trials = detail::outpath(o, "trials.csv");
        std::string summary = detail::outpath(o, "summary.json");
        write_trial_csv(trials, res.records);
        write_summary_json(summary, res, o.seed);
        for (const auto &w : res.warnings)
            std::cout << "warning: " << w << "\n";
        std::cout << "dpe_rmse_m " << fmt9(res.dpe.rmse_m) << "\n";
        std::cout << "dpe_p90_m " << fmt9(res.dpe.pct.p90) << "\n";
        if (res.otdoa.n_trials)
        {
            std::cout << "otdoa_rmse_m " << fmt9(res.otdoa.rmse_m) << "\n";
            std::cout << "otdoa_p90_m " << fmt9(res.otdoa.pct.p90) << "\n";
        }
        std::cout << "los_fraction " << fmt9(res.dpe.los_fraction) << "\n";
        std::cout << "failed_trials " << res.dpe.failed_trials << "\n";
        std::cout << "config_digest " << res.config_digest << "\n";
        std::cout << "wrote " << trials << "\n";
        std::cout << "wrote " << summary << "\n";
        return exit_ok;
    }

    inline int cmd_sweep(const CliOptions &o, const std::string &axis,
                         const std::vector<double> &values)
    {
        SimConfig cfg = detail::load_config(o);
        auto points = sweep_axis(cfg, axis, values, o.seed, o.workers);
        std::string curve = detail::outpath(o, "sweep_" + axis + ".csv");
        write_curve_csv(curve, axis, points);
        for (const auto &p : points)
            std::cout << axis << " " << fmt9(p.axis_value) << " dpe_rmse_m " << fmt9(p.dpe.rmse_m)
                      << (p.otdoa.n_trials ? " otdoa_rmse_m " + fmt9(p.otdoa.rmse_m) : "") << "\n";
        std::cout << "wrote " << curve << "\n";
        return exit_ok;
    }

    inline int cmd_compare(const CliOptions &o)
    {
        SimConfig cfg = detail::load_config(o);
        cfg.exp.otdoa_enabled = true;
        ExperimentResult res = run_experiment(cfg, o.seed, o.workers);
        if (res.otdoa.n_trials == 0)
            throw error("compare: the baseline produced no usable fix on any trial");
        std::string cdf_d = detail::outpath(o, "cdf_dpe.csv");
        std::string cdf_o = detail::outpath(o, "cdf_otdoa.csv");
        write_cdf_csv(cdf_d, res.dpe);
        write_cdf_csv(cdf_o, res.otdoa);
        json doc;
        doc["dpe"] = summary_to_json(res.dpe);
        doc["otdoa"] = summary_to_json(res.otdoa);
        doc["improvement_at_p90"] = 1.0 - res.dpe.pct.p90 / res.otdoa.pct.p90;
        doc["base_seed"] = o.seed;
        std::string cmp = detail::outpath(o, "compare.json");
        auto f = detail::open_out(cmp);
        f << round_floats(doc).dump(2) << "\n";
        std::cout << "dpe_p90_m " << fmt9(res.dpe.pct.p90) << "\n";
        std::cout << "otdoa_p90_m " << fmt9(res.otdoa.pct.p90) << "\n";
        std::cout << "improvement_at_p90 " << fmt9(1.0 - res.dpe.pct.p90 / res.otdoa.pct.p90)
                  << "\n";
        std::cout << "wrote " << cdf_d << "\n";
        std::cout << "wrote " << cdf_o << "\n";
        std::cout << "wrote " << cmp << "\n";
        return exit_ok;
    }

    // Fast invariant checks, one line per check, exit code 4 on any failure.
    inline int cmd_selftest()
    {
        int failures = 0;
        auto check = [&](const std::string &name, const std::function<bool()> &fn) {
            bool ok = false;
            std::string why;
            try
            {
                ok = fn();
            }
            catch (const std::exception &e)
            {
                why = e.what();
            }
            std::cout << "SELFTEST " << name << " " << (ok ? "PASS" : "FAIL")
                      << (why.empty() ? "" : " (" + why + ")") << "\n";
            if (!ok)
                failures++;
        };

        check("fft_round_trip", [] {
            Stream st(7);
            cvec x(4096);
            for (auto &v : x)
                v = st.cgauss();
            cvec y = ifft_unitary(fft_unitary(x));
            double worst = 0.0;
            for (std::size_t i = 0; i < x.size(); i++)
                worst = std::max(worst, std::abs(y[i] - x[i]));
            return worst < 1e-12;
        });

        check("ofdm_round_trip", [] {
            OfdmConfig cfg;
            PrsWaveform prs = generate_prs(3, cfg, 42);
            cvec rec = ofdm_demodulate(strip_cp(ofdm_modulate(prs.symbols, cfg), cfg), cfg);
            double worst = 0.0;
            for (std::size_t i = 0; i < rec.size(); i++)
                worst = std::max(worst, std::abs(rec[i] - prs.symbols[i]));
            return worst < 1e-12;
        });

        check("range_bin_scale", [] {
            OfdmConfig cfg;
            return std::abs(meters_per_sample(cfg) - 2.4397) < 5e-4;
        });

        check("tdl_profiles", [] {
            for (const char *n : {"TDL-A", "TDL-B", "TDL-C", "TDL-D", "TDL-E"})
            {
                TdlProfile p = builtin_tdl(n);
                if (std::abs(p.rms_delay_norm() - 1.0) > 1e-9)
                    return false;
            }
            return true;
        });

        check("los_probability", [] {
            return los_probability(10.0) == 1.0 && los_probability(18.0) == 1.0 &&
                   std::abs(los_probability(36.0) - 0.683940) < 1e-5;
        });

        check("noise_floor", [] {
            LinkBudget b;
            return std::abs(noise_floor_dbm(b) + 85.0) < 1e-9;
        });

        check("dpe_noiseless_fix", [] {
            OfdmConfig cfg;
            cfg.n_subcarriers = 256;
            cfg.cp_samples = 32;
            cfg.scs_hz = 480e3; // keeps fs at 122.88 MHz
            std::vector<Vec3> bs = {{0, 0, 10}, {60, 0, 10}, {0, 60, 10}};
            Vec3 ue{21.0, 17.0, 2.0};
            double fs = sample_rate(cfg);
            ChannelRealization h;
            h.tap_delay_s = {0.0, 1.4 / fs};
            h.tap_gain = {cdbl(1.0, 0.0), cdbl(0.45, 0.0)};
            FftPlan plan_n(cfg.n_subcarriers), plan_up(cfg.n_subcarriers * 32);
            std::vector<DelayObjectiveTable> tables;
            std::vector<PrsWaveform> prss;
            for (std::size_t m = 0; m < bs.size(); m++)
            {
                PrsWaveform prs = generate_prs(static_cast<std::uint32_t>(m + 1), cfg, 5);
                ReceivedSignal y = apply_channel(ofdm_modulate(prs.symbols, cfg), h, cfg,
                                                 dist3(bs[m], ue) / SPEED_OF_LIGHT);
                tables.emplace_back(y, prs, cfg, 4, 32, plan_n, plan_up);
                prss.push_back(std::move(prs));
            }
            CandidateGrid g;
            g.center = {20.0, 20.0, 2.0, 0.0};
            g.extent_x_m = g.extent_y_m = 40.0;
            g.resolution_m = 2.0;
            PositionEstimate est = estimate_position(tables, bs, g, 2, 5.0);
            double err = std::sqrt(sq(est.estimate.x - ue.x) + sq(est.estimate.y - ue.y));
            return err < 0.12; // within one final cell of 0.08 m
        });

        check("tdoa_perfect_fix", [] {
            std::vector<Vec3> bs = {{0, 0, 10}, {100, 0, 10}, {0, 100, 10}, {100, 100, 10}};
            Vec3 ue{37.0, 58.0, 2.0};
            std::vector<ToaMeasurement> toas;
            for (std::size_t m = 0; m < bs.size(); m++)
            {
                ToaMeasurement t;
                t.bs_id = static_cast<std::uint32_t>(m + 1);
                t.toa_s = dist3(bs[m], ue) / SPEED_OF_LIGHT;
                t.peak_metric = 1.0;
                toas.push_back(t);
            }
            auto tdoas = form_tdoa(toas, 0);
            std::vector<Vec3> others(bs.begin() + 1, bs.end());
            TdoaFix fix = solve_tdoa(tdoas, others, bs[0], Vec3{50, 50, 2});
            return fix.converged &&
                   std::sqrt(sq(fix.position.x - ue.x) + sq(fix.position.y - ue.y)) < 1e-6;
        });

        return failures ? exit_acceptance : exit_ok;
    }

} // namespace nrdpe

#endif

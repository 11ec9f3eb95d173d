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

#include <CLI11.hpp>

#include <nrdpe/cli.hpp>

int main(int argc, char **argv)
{
    CLI::App app{"nrdpe: downlink positioning simulator (direct position estimation vs "
                 "two-step TDoA baseline)"};
    app.require_subcommand(1);

    nrdpe::CliOptions opt;
    app.add_option("--config", opt.config_path, "experiment config (JSON)");
    app.add_option("--seed", opt.seed, "base seed")->capture_default_str();
    app.add_option("--out", opt.out_dir, "output directory")->capture_default_str();
    app.add_option("--workers", opt.workers, "worker threads")->capture_default_str();
    app.add_option("--set", opt.overrides,
                   "config override key.path=value (repeatable, key must exist)");

    auto *dump = app.add_subcommand("channel-dump", "write one channel realization and the PDP");
    std::string profile = "TDL-D";
    double ds_ns = 65.0;
    dump->add_option("--profile", profile, "TDL profile name")->capture_default_str();
    dump->add_option("--ds-ns", ds_ns, "RMS delay spread in ns")->capture_default_str();

    auto *corr = app.add_subcommand("correlogram", "write the stage-1 objective surface for trial 0");
    auto *run = app.add_subcommand("run", "run the configured experiment");
    auto *sweep = app.add_subcommand("sweep", "sweep one experiment axis");
    std::string axis = "snr_db";
    std::vector<double> values;
    sweep->add_option("--axis", axis, "snr_db or n_bs")->capture_default_str();
    sweep->add_option("--values", values, "axis values")->required()->delimiter(',');
    auto *cmp = app.add_subcommand("compare", "run both estimators and emit CDFs");
    auto *self = app.add_subcommand("selftest", "fast invariant checks");

    // shared flags may follow the subcommand name
    for (auto *sc : {dump, corr, run, sweep, cmp, self})
        sc->fallthrough();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        return app.exit(e) == 0 ? nrdpe::exit_ok : nrdpe::exit_config;
    }

    try
    {
        if (*dump)
            return nrdpe::cmd_channel_dump(opt, profile, ds_ns);
        if (*corr)
            return nrdpe::cmd_correlogram(opt);
        if (*run)
            return nrdpe::cmd_run(opt);
        if (*sweep)
            return nrdpe::cmd_sweep(opt, axis, values);
        if (*cmp)
            return nrdpe::cmd_compare(opt);
        if (*self)
            return nrdpe::cmd_selftest();
    }
    catch (const nrdpe::config_error &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return nrdpe::exit_config;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return nrdpe::exit_runtime;
    }
    return nrdpe::exit_ok;
}

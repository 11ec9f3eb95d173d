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

#ifndef NRDPE_CONFIG_HPP
#define NRDPE_CONFIG_HPP

#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "channel.hpp"
#include "common.hpp"
#include "scenario.hpp"
#include "waveform.hpp"

namespace nrdpe
{
    using json = nlohmann::json;

    struct UePolicy
    {
        double height_m = 2.0;
        double inset_frac = 0.2; // margin kept from each region edge when drawing
        bool fixed = false;
        double fixed_x = 0.0, fixed_y = 0.0;
    };

    struct ChannelParams
    {
        double delay_spread_ns = 65.0;
        std::string los_profile = "TDL-D";
        std::string nlos_profile = "TDL-C";
        bool deterministic_only = false;
    };

    struct ExperimentParams
    {
        std::size_t n_bs = 6;
        std::size_t n_trials = 500;
        std::string snr_mode = "budget"; // "budget" (link budget) or "fixed" (common per-link SNR)
        double snr_db = 10.0;
        double clock_bias_sigma_ns = 5.0;
        std::vector<bool> force_los_pattern; // applied to the proximity-ordered selection
        bool otdoa_enabled = true;
    };

    struct DpeParams
    {
        double extent_m = 100.0;
        double resolution_m = 2.0;
        int refine_stages = 2;
        double shrink_factor = 5.0;
        bool bias_axis = true;
        double bias_range_ns = 15.0;
        double bias_step_ns = 3.0;
        std::size_t n_taps = 0; // 0 = derive from the configured profiles
        std::size_t upsample = 32;
    };

    struct OtdoaParams
    {
        std::string toa_mode = "global_peak"; // or "leading_edge"
        double leading_edge_threshold = 0.5;
    };

    struct SimConfig
    {
        std::vector<BaseStation> bss;
        Region region;
        UePolicy ue;
        OfdmConfig ofdm;
        LinkBudget budget;
        ChannelParams channel;
        ExperimentParams exp;
        DpeParams dpe;
        OtdoaParams otdoa;

        void validate() const
        {
            if (bss.empty())
                throw config_error("config: 'bs' list is empty");
            std::set<std::uint32_t> ids;
            for (const auto &b : bss)
                if (!ids.insert(b.id).second)
                    throw config_error("config: duplicate bs id " + std::to_string(b.id));
            region.validate();
            ofdm.validate();
            budget.validate();
            if (ue.inset_frac < 0.0 || ue.inset_frac >= 0.5)
                throw config_error("config: ue.inset_frac must be in [0, 0.5)");
            if (channel.delay_spread_ns <= 0.0)
                throw config_error("config: channel.delay_spread_ns must be positive");
            if (exp.n_bs == 0 || exp.n_bs > bss.size())
                throw config_error("config: experiment.n_bs must be in [1, " +
                                   std::to_string(bss.size()) + "]");
            if (exp.n_trials == 0)
                throw config_error("config: experiment.n_trials must be positive");
            if (exp.snr_mode != "budget" && exp.snr_mode != "fixed")
                throw config_error("config: experiment.snr_mode must be 'budget' or 'fixed'");
            if (exp.clock_bias_sigma_ns < 0.0)
                throw config_error("config: experiment.clock_bias_sigma_ns must be >= 0");
            if (!exp.force_los_pattern.empty() && exp.force_los_pattern.size() < exp.n_bs)
                throw config_error("config: force_los_pattern shorter than n_bs");
            if (dpe.extent_m <= 0.0 || dpe.resolution_m <= 0.0)
                throw config_error("config: dpe grid extent/resolution must be positive");
            if (dpe.refine_stages < 0)
                throw config_error("config: dpe.refine_stages must be >= 0");
            if (dpe.shrink_factor <= 1.0)
                throw config_error("config: dpe.shrink_factor must exceed 1");
            if (dpe.bias_axis && dpe.bias_step_ns <= 0.0)
                throw config_error("config: dpe.bias_step_ns must be positive");
            if (dpe.upsample < 2)
                throw config_error("config: dpe.upsample must be >= 2");
            if (otdoa.toa_mode != "global_peak" && otdoa.toa_mode != "leading_edge")
                throw config_error("config: otdoa.toa_mode must be 'global_peak' or 'leading_edge'");
            if (otdoa.leading_edge_threshold <= 0.0 || otdoa.leading_edge_threshold > 1.0)
                throw config_error("config: otdoa.leading_edge_threshold must be in (0, 1]");
        }
    };

    namespace detail
    {
        inline void reject_unknown_keys(const json &j, const std::set<std::string> &allowed,
                                        const std::string &where)
        {
            for (auto it = j.begin(); it != j.end(); ++it)
                if (!allowed.count(it.key()))
                    throw config_error("config: unknown key '" + it.key() + "' in " + where);
        }

        template <class T>
        void get_if(const json &j, const char *key, T &dst)
        {
            if (j.contains(key))
            {
                try
                {
                    dst = j.at(key).get<T>();
                }
                catch (const json::exception &e)
                {
                    throw config_error("config: bad value for '" + std::string(key) + "': " + e.what());
                }
            }
        }
    } // namespace detail

    inline SimConfig parse_sim_config(const json &doc)
    {
        using detail::get_if;
        using detail::reject_unknown_keys;
        if (!doc.is_object())
            throw config_error("config: document root must be an object");
        reject_unknown_keys(doc,
                            {"bs", "region", "ue", "numerology", "link_budget", "channel",
                             "experiment", "dpe", "otdoa"},
                            "document root");
        SimConfig c;
        if (!doc.contains("bs") || !doc.at("bs").is_array())
            throw config_error("config: required array 'bs' missing");
        for (const auto &jb : doc.at("bs"))
        {
            reject_unknown_keys(jb, {"id", "x", "y", "z"}, "bs entry");
            BaseStation b;
            if (!jb.contains("id") || !jb.contains("x") || !jb.contains("y"))
                throw config_error("config: bs entry needs id, x, y");
            b.id = jb.at("id").get<std::uint32_t>();
            b.pos.x = jb.at("x").get<double>();
            b.pos.y = jb.at("y").get<double>();
            b.pos.z = jb.value("z", 10.0);
            c.bss.push_back(b);
        }

        if (doc.contains("region"))
        {
            const auto &r = doc.at("region");
            reject_unknown_keys(r, {"x_min", "x_max", "y_min", "y_max"}, "region");
            get_if(r, "x_min", c.region.x_min);
            get_if(r, "x_max", c.region.x_max);
            get_if(r, "y_min", c.region.y_min);
            get_if(r, "y_max", c.region.y_max);
        }
        else
        {
            c.region.x_min = c.region.y_min = 1e30;
            c.region.x_max = c.region.y_max = -1e30;
            for (const auto &b : c.bss)
            {
                c.region.x_min = std::min(c.region.x_min, b.pos.x);
                c.region.x_max = std::max(c.region.x_max, b.pos.x);
                c.region.y_min = std::min(c.region.y_min, b.pos.y);
                c.region.y_max = std::max(c.region.y_max, b.pos.y);
            }
        }

        if (doc.contains("ue"))
        {
            const auto &u = doc.at("ue");
            reject_unknown_keys(u, {"height_m", "inset_frac", "fixed"}, "ue");
            get_if(u, "height_m", c.ue.height_m);
            get_if(u, "inset_frac", c.ue.inset_frac);
            if (u.contains("fixed"))
            {
                reject_unknown_keys(u.at("fixed"), {"x", "y"}, "ue.fixed");
                c.ue.fixed = true;
                c.ue.fixed_x = u.at("fixed").at("x").get<double>();
                c.ue.fixed_y = u.at("fixed").at("y").get<double>();
            }
        }

        if (doc.contains("numerology"))
        {
            const auto &n = doc.at("numerology");
            reject_unknown_keys(n, {"n_subcarriers", "scs_khz", "cp_samples", "center_freq_ghz"},
                                "numerology");
            get_if(n, "n_subcarriers", c.ofdm.n_subcarriers);
            if (n.contains("scs_khz"))
                c.ofdm.scs_hz = n.at("scs_khz").get<double>() * 1e3;
            get_if(n, "cp_samples", c.ofdm.cp_samples);
            if (n.contains("center_freq_ghz"))
                c.ofdm.center_freq_hz = n.at("center_freq_ghz").get<double>() * 1e9;
        }
        c.budget.center_freq_hz = c.ofdm.center_freq_hz;

        if (doc.contains("link_budget"))
        {
            const auto &b = doc.at("link_budget");
            reject_unknown_keys(b,
                                {"tx_power_dbm", "noise_figure_db", "bandwidth_mhz",
                                 "pathloss_model", "log_distance_exponent",
                                 "log_distance_nlos_extra_db"},
                                "link_budget");
            get_if(b, "tx_power_dbm", c.budget.tx_power_dbm);
            get_if(b, "noise_figure_db", c.budget.noise_figure_db);
            if (b.contains("bandwidth_mhz"))
                c.budget.bandwidth_hz = b.at("bandwidth_mhz").get<double>() * 1e6;
            if (b.contains("pathloss_model"))
            {
                std::string m = b.at("pathloss_model").get<std::string>();
                if (m == "umi_street_canyon")
                    c.budget.model = PathlossModel::umi_street_canyon;
                else if (m == "log_distance")
                    c.budget.model = PathlossModel::log_distance;
                else
                    throw config_error("config: unknown pathloss_model '" + m + "'");
            }
            get_if(b, "log_distance_exponent", c.budget.log_distance_exponent);
            get_if(b, "log_distance_nlos_extra_db", c.budget.log_distance_nlos_extra_db);
        }

        if (doc.contains("channel"))
        {
            const auto &ch = doc.at("channel");
            reject_unknown_keys(
                ch, {"delay_spread_ns", "los_profile", "nlos_profile", "deterministic_only"},
                "channel");
            get_if(ch, "delay_spread_ns", c.channel.delay_spread_ns);
            get_if(ch, "los_profile", c.channel.los_profile);
            get_if(ch, "nlos_profile", c.channel.nlos_profile);
            get_if(ch, "deterministic_only", c.channel.deterministic_only);
        }

        if (doc.contains("experiment"))
        {
            const auto &e = doc.at("experiment");
            reject_unknown_keys(e,
                                {"n_bs", "n_trials", "snr_mode", "snr_db", "clock_bias_sigma_ns",
                                 "force_los_pattern", "otdoa_enabled"},
                                "experiment");
            get_if(e, "n_bs", c.exp.n_bs);
            get_if(e, "n_trials", c.exp.n_trials);
            get_if(e, "snr_mode", c.exp.snr_mode);
            get_if(e, "snr_db", c.exp.snr_db);
            get_if(e, "clock_bias_sigma_ns", c.exp.clock_bias_sigma_ns);
            get_if(e, "otdoa_enabled", c.exp.otdoa_enabled);
            if (e.contains("force_los_pattern"))
                for (const auto &v : e.at("force_los_pattern"))
                    c.exp.force_los_pattern.push_back(v.get<bool>());
        }

        if (doc.contains("dpe"))
        {
            const auto &d = doc.at("dpe");
            reject_unknown_keys(d,
                                {"extent_m", "resolution_m", "refine_stages", "shrink_factor",
                                 "bias_axis", "bias_range_ns", "bias_step_ns", "n_taps",
                                 "upsample"},
                                "dpe");
            get_if(d, "extent_m", c.dpe.extent_m);
            get_if(d, "resolution_m", c.dpe.resolution_m);
            get_if(d, "refine_stages", c.dpe.refine_stages);
            get_if(d, "shrink_factor", c.dpe.shrink_factor);
            get_if(d, "bias_axis", c.dpe.bias_axis);
            get_if(d, "bias_range_ns", c.dpe.bias_range_ns);
            get_if(d, "bias_step_ns", c.dpe.bias_step_ns);
            get_if(d, "n_taps", c.dpe.n_taps);
            get_if(d, "upsample", c.dpe.upsample);
        }

        if (doc.contains("otdoa"))
        {
            const auto &o = doc.at("otdoa");
            reject_unknown_keys(o, {"toa_mode", "leading_edge_threshold"}, "otdoa");
            get_if(o, "toa_mode", c.otdoa.toa_mode);
            get_if(o, "leading_edge_threshold", c.otdoa.leading_edge_threshold);
        }

        c.validate();
        return c;
    }

    inline json sim_config_to_json(const SimConfig &c)
    {
        json doc;
        doc["bs"] = json::array();
        for (const auto &b : c.bss)
            doc["bs"].push_back({{"id", b.id}, {"x", b.pos.x}, {"y", b.pos.y}, {"z", b.pos.z}});
        doc["region"] = {{"x_min", c.region.x_min},
                         {"x_max", c.region.x_max},
                         {"y_min", c.region.y_min},
                         {"y_max", c.region.y_max}};
        doc["ue"] = {{"height_m", c.ue.height_m}, {"inset_frac", c.ue.inset_frac}};
        if (c.ue.fixed)
            doc["ue"]["fixed"] = {{"x", c.ue.fixed_x}, {"y", c.ue.fixed_y}};
        doc["numerology"] = {{"n_subcarriers", c.ofdm.n_subcarriers},
                             {"scs_khz", c.ofdm.scs_hz / 1e3},
                             {"cp_samples", c.ofdm.cp_samples},
                             {"center_freq_ghz", c.ofdm.center_freq_hz / 1e9}};
        doc["link_budget"] = {
            {"tx_power_dbm", c.budget.tx_power_dbm},
            {"noise_figure_db", c.budget.noise_figure_db},
            {"bandwidth_mhz", c.budget.bandwidth_hz / 1e6},
            {"pathloss_model", c.budget.model == PathlossModel::umi_street_canyon
                                   ? "umi_street_canyon"
                                   : "log_distance"},
            {"log_distance_exponent", c.budget.log_distance_exponent},
            {"log_distance_nlos_extra_db", c.budget.log_distance_nlos_extra_db}};
        doc["channel"] = {{"delay_spread_ns", c.channel.delay_spread_ns},
                          {"los_profile", c.channel.los_profile},
                          {"nlos_profile", c.channel.nlos_profile},
                          {"deterministic_only", c.channel.deterministic_only}};
        doc["experiment"] = {{"n_bs", c.exp.n_bs},
                             {"n_trials", c.exp.n_trials},
                             {"snr_mode", c.exp.snr_mode},
                             {"snr_db", c.exp.snr_db},
                             {"clock_bias_sigma_ns", c.exp.clock_bias_sigma_ns},
                             {"otdoa_enabled", c.exp.otdoa_enabled}};
        if (!c.exp.force_los_pattern.empty())
        {
            json arr = json::array();
            for (bool b : c.exp.force_los_pattern)
                arr.push_back(b);
            doc["experiment"]["force_los_pattern"] = arr;
        }
        doc["dpe"] = {{"extent_m", c.dpe.extent_m},
                      {"resolution_m", c.dpe.resolution_m},
                      {"refine_stages", c.dpe.refine_stages},
                      {"shrink_factor", c.dpe.shrink_factor},
                      {"bias_axis", c.dpe.bias_axis},
                      {"bias_range_ns", c.dpe.bias_range_ns},
                      {"bias_step_ns", c.dpe.bias_step_ns},
                      {"n_taps", c.dpe.n_taps},
                      {"upsample", c.dpe.upsample}};
        doc["otdoa"] = {{"toa_mode", c.otdoa.toa_mode},
                        {"leading_edge_threshold", c.otdoa.leading_edge_threshold}};
        return doc;
    }

    // Dotted-path override, e.g. "experiment.snr_db=20". The path must already
    // exist in the effective document; silently inventing new keys is how config
    // typos survive, so they are rejected instead.
    inline void apply_override(json &doc, const std::string &assignment)
    {
        auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0)
            throw config_error("override '" + assignment + "': expected key.path=value");
        std::string path = assignment.substr(0, eq);
        std::string value = assignment.substr(eq + 1);

        json *node = &doc;
        std::size_t start = 0;
        for (;;)
        {
            auto dot = path.find('.', start);
            std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
            if (key.empty())
                throw config_error("override '" + assignment + "': empty path segment");
            if (!node->is_object() || !node->contains(key))
                throw config_error("override '" + assignment + "': unknown key '" + key + "'");
            node = &node->at(key);
            if (dot == std::string::npos)
                break;
            start = dot + 1;
        }
        json parsed = json::parse(value, nullptr, false);
        if (parsed.is_discarded())
            parsed = value; // plain string
        *node = parsed;
    }

    inline json load_json_file(const std::string &path)
    {
        std::ifstream f(path);
        if (!f)
            throw config_error("cannot open config file '" + path + "'");
        json doc = json::parse(f, nullptr, false);
        if (doc.is_discarded())
            throw config_error("config file '" + path + "' is not valid JSON");
        return doc;
    }

    inline SimConfig load_sim_config(const std::string &path,
                                     const std::vector<std::string> &overrides = {})
    {
        json doc = load_json_file(path);
        if (!overrides.empty())
        {
            // overrides are resolved against the fully-populated document so that
            // defaulted keys are addressable too
            json eff = sim_config_to_json(parse_sim_config(doc));
            for (const auto &o : overrides)
                apply_override(eff, o);
            return parse_sim_config(eff);
        }
        return parse_sim_config(doc);
    }

    inline std::uint64_t fnv1a64(const std::string &s)
    {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char ch : s)
        {
            h ^= ch;
            h *= 1099511628211ULL;
        }
        return h;
    }

    // Digest of the effective configuration; stable against formatting and key
    // order of the source file.
    inline std::string config_digest(const SimConfig &c)
    {
        std::uint64_t h = fnv1a64(sim_config_to_json(c).dump());
        char buf[17];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return buf;
    }

    inline TdlProfile profile_by_name(const std::string &name)
    {
        return builtin_tdl(name);
    }

} // namespace nrdpe

#endif

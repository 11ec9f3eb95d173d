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

#ifndef NRDPE_IO_HPP
#define NRDPE_IO_HPP

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "channel.hpp"
#include "common.hpp"
#include "dpe.hpp"
#include "montecarlo.hpp"

namespace nrdpe
{
    // All floating point output uses 9 significant digits.
    inline std::string fmt9(double v)
    {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return buf;
    }

    namespace detail
    {
        inline std::vector<std::string> split_csv_line(const std::string &line)
        {
            std::vector<std::string> out;
            std::string cur;
            for (char ch : line)
            {
                if (ch == ',')
                {
                    out.push_back(cur);
                    cur.clear();
                }
                else if (ch != '\r')
                    cur += ch;
            }
            out.push_back(cur);
            return out;
        }

        inline std::ofstream open_out(const std::string &path)
        {
            std::ofstream f(path);
            if (!f)
                throw error("cannot write '" + path + "'");
            return f;
        }

        inline std::ifstream open_in(const std::string &path)
        {
            std::ifstream f(path);
            if (!f)
                throw error("cannot open '" + path + "'");
            return f;
        }
    } // namespace detail

    inline const char *trial_csv_header()
    {
        return "trial_id,seed,truth_x,truth_y,clock_bias_ns,los_count,n_links,mean_snr_db,"
               "min_snr_db,max_snr_db,dpe_ok,dpe_x,dpe_y,dpe_err_m,dpe_bias_est_ns,"
               "otdoa_ok,otdoa_x,otdoa_y,otdoa_err_m,failed,error";
    }

    inline void write_trial_csv(const std::string &path, const std::vector<TrialRecord> &recs)
    {
        auto f = detail::open_out(path);
        f << trial_csv_header() << "\n";
        for (const auto &r : recs)
        {
            std::string msg = r.error_msg;
            for (auto &ch : msg)
                if (ch == ',' || ch == '\n')
                    ch = ';';
            f << r.trial_id << ',' << r.seed << ',' << fmt9(r.truth_x) << ',' << fmt9(r.truth_y)
              << ',' << fmt9(r.clock_bias_ns) << ',' << r.los_count << ',' << r.n_links << ','
              << fmt9(r.mean_snr_db) << ',' << fmt9(r.min_snr_db) << ',' << fmt9(r.max_snr_db)
              << ',' << (r.dpe_ok ? 1 : 0) << ',' << fmt9(r.dpe_x) << ',' << fmt9(r.dpe_y) << ','
              << fmt9(r.dpe_err_m) << ',' << fmt9(r.dpe_bias_est_ns) << ',' << (r.otdoa_ok ? 1 : 0)
              << ',' << fmt9(r.otdoa_x) << ',' << fmt9(r.otdoa_y) << ',' << fmt9(r.otdoa_err_m)
              << ',' << (r.failed ? 1 : 0) << ',' << msg << "\n";
        }
    }

    inline std::vector<TrialRecord> read_trial_csv(const std::string &path)
    {
        auto f = detail::open_in(path);
        std::string line;
        if (!std::getline(f, line))
            throw error("trial csv '" + path + "' is empty");
        if (line.back() == '\r')
            line.pop_back();
        if (line != trial_csv_header())
            throw error("trial csv '" + path + "' has an unexpected header");
        std::vector<TrialRecord> out;
        while (std::getline(f, line))
        {
            if (line.empty())
                continue;
            auto c = detail::split_csv_line(line);
            if (c.size() != 21)
                throw error("trial csv '" + path + "': malformed row '" + line + "'");
            TrialRecord r;
            r.trial_id = std::stoull(c[0]);
            r.seed = std::stoull(c[1]);
            r.truth_x = std::stod(c[2]);
            r.truth_y = std::stod(c[3]);
            r.clock_bias_ns = std::stod(c[4]);
            r.los_count = std::stoi(c[5]);
            r.n_links = std::stoi(c[6]);
            r.mean_snr_db = std::stod(c[7]);
            r.min_snr_db = std::stod(c[8]);
            r.max_snr_db = std::stod(c[9]);
            r.dpe_ok = c[10] == "1";
            r.dpe_x = std::stod(c[11]);
            r.dpe_y = std::stod(c[12]);
            r.dpe_err_m = std::stod(c[13]);
            r.dpe_bias_est_ns = std::stod(c[14]);
            r.otdoa_ok = c[15] == "1";
            r.otdoa_x = std::stod(c[16]);
            r.otdoa_y = std::stod(c[17]);
            r.otdoa_err_m = std::stod(c[18]);
            r.failed = c[19] == "1";
            r.error_msg = c[20];
            out.push_back(std::move(r));
        }
        return out;
    }

    inline json summary_to_json(const ExperimentSummary &s)
    {
        return json{{"method", s.method},
                    {"n_trials", s.n_trials},
                    {"failed_trials", s.failed_trials},
                    {"rmse_m", s.rmse_m},
                    {"percentiles_m",
                     {{"p50", s.pct.p50}, {"p90", s.pct.p90}, {"p95", s.pct.p95}, {"p99", s.pct.p99}}},
                    {"los_fraction", s.los_fraction},
                    {"config_digest", s.config_digest}};
    }

    inline ExperimentSummary summary_from_json(const json &j)
    {
        ExperimentSummary s;
        s.method = j.at("method").get<std::string>();
        s.n_trials = j.at("n_trials").get<std::size_t>();
        s.failed_trials = j.at("failed_trials").get<std::size_t>();
        s.rmse_m = j.at("rmse_m").get<double>();
        s.pct.p50 = j.at("percentiles_m").at("p50").get<double>();
        s.pct.p90 = j.at("percentiles_m").at("p90").get<double>();
        s.pct.p95 = j.at("percentiles_m").at("p95").get<double>();
        s.pct.p99 = j.at("percentiles_m").at("p99").get<double>();
        s.los_fraction = j.at("los_fraction").get<double>();
        s.config_digest = j.at("config_digest").get<std::string>();
        return s;
    }

    inline json round_floats(const json &j)
    {
        if (j.is_object())
        {
            json o = json::object();
            for (auto it = j.begin(); it != j.end(); ++it)
                o[it.key()] = round_floats(it.value());
            return o;
        }
        if (j.is_array())
        {
            json a = json::array();
            for (const auto &v : j)
                a.push_back(round_floats(v));
            return a;
        }
        if (j.is_number_float())
            return json::parse(fmt9(j.get<double>()));
        return j;
    }

    // Round-trippable: every float is re-emitted through fmt9 so a re-read value
    // compares equal to the written text, not to the binary double.
    inline void write_summary_json(const std::string &path, const ExperimentResult &res,
                                   std::uint64_t base_seed)
    {
        json doc;
        doc["base_seed"] = base_seed;
        doc["config_digest"] = res.config_digest;
        doc["warnings"] = res.warnings;
        doc["dpe"] = summary_to_json(res.dpe);
        if (res.otdoa.n_trials)
            doc["otdoa"] = summary_to_json(res.otdoa);
        auto f = detail::open_out(path);
        f << round_floats(doc).dump(2) << "\n";
    }

    inline json read_summary_json(const std::string &path)
    {
        auto f = detail::open_in(path);
        json doc = json::parse(f, nullptr, false);
        if (doc.is_discarded())
            throw error("summary '" + path + "' is not valid JSON");
        return doc;
    }

    inline void write_cdf_csv(const std::string &path, const ExperimentSummary &s)
    {
        auto f = detail::open_out(path);
        f << "error_m,cum_prob\n";
        std::size_t n = s.sorted_errors_m.size();
        for (std::size_t i = 0; i < n; i++)
            f << fmt9(s.sorted_errors_m[i]) << ','
              << fmt9(static_cast<double>(i + 1) / static_cast<double>(n)) << "\n";
    }

    struct CdfPoint
    {
        double error_m = 0.0;
        double cum_prob = 0.0;
    };

    inline std::vector<CdfPoint> read_cdf_csv(const std::string &path)
    {
        auto f = detail::open_in(path);
        std::string line;
        if (!std::getline(f, line) || detail::split_csv_line(line)[0] != "error_m")
            throw error("cdf csv '" + path + "' has an unexpected header");
        std::vector<CdfPoint> out;
        while (std::getline(f, line))
        {
            if (line.empty())
                continue;
            auto c = detail::split_csv_line(line);
            if (c.size() != 2)
                throw error("cdf csv '" + path + "': malformed row");
            out.push_back({std::stod(c[0]), std::stod(c[1])});
        }
        return out;
    }

    inline void write_curve_csv(const std::string &path, const std::string &axis,
                                const std::vector<SweepPoint> &points)
    {
        auto f = detail::open_out(path);
        f << axis
          << ",dpe_rmse_m,dpe_p50_m,dpe_p90_m,dpe_p95_m,dpe_p99_m,"
             "otdoa_rmse_m,otdoa_p50_m,otdoa_p90_m,otdoa_p95_m,otdoa_p99_m\n";
        for (const auto &p : points)
        {
            f << fmt9(p.axis_value) << ',' << fmt9(p.dpe.rmse_m) << ',' << fmt9(p.dpe.pct.p50)
              << ',' << fmt9(p.dpe.pct.p90) << ',' << fmt9(p.dpe.pct.p95) << ','
              << fmt9(p.dpe.pct.p99);
            if (p.otdoa.n_trials)
                f << ',' << fmt9(p.otdoa.rmse_m) << ',' << fmt9(p.otdoa.pct.p50) << ','
                  << fmt9(p.otdoa.pct.p90) << ',' << fmt9(p.otdoa.pct.p95) << ','
                  << fmt9(p.otdoa.pct.p99) << "\n";
            else
                f << ",,,,,\n";
        }
    }

    struct CurveRow
    {
        double axis_value = 0.0;
        Percentiles dpe;
        double dpe_rmse = 0.0;
        Percentiles otdoa;
        double otdoa_rmse = 0.0;
        bool has_otdoa = false;
    };

    inline std::vector<CurveRow> read_curve_csv(const std::string &path)
    {
        auto f = detail::open_in(path);
        std::string line;
        if (!std::getline(f, line))
            throw error("curve csv '" + path + "' is empty");
        std::vector<CurveRow> out;
        while (std::getline(f, line))
        {
            if (line.empty())
                continue;
            auto c = detail::split_csv_line(line);
            if (c.size() != 11)
                throw error("curve csv '" + path + "': malformed row");
            CurveRow r;
            r.axis_value = std::stod(c[0]);
            r.dpe_rmse = std::stod(c[1]);
            r.dpe.p50 = std::stod(c[2]);
            r.dpe.p90 = std::stod(c[3]);
            r.dpe.p95 = std::stod(c[4]);
            r.dpe.p99 = std::stod(c[5]);
            if (!c[6].empty())
            {
                r.has_otdoa = true;
                r.otdoa_rmse = std::stod(c[6]);
                r.otdoa.p50 = std::stod(c[7]);
                r.otdoa.p90 = std::stod(c[8]);
                r.otdoa.p95 = std::stod(c[9]);
                r.otdoa.p99 = std::stod(c[10]);
            }
            out.push_back(r);
        }
        return out;
    }

    // Horizontal slice of a correlogram at the argmax clock-bias/height plane,
    // with scene metadata in '#' comment lines.
    inline void write_correlogram_csv(const std::string &path, const Correlogram &c,
                                      const std::vector<std::pair<std::string, std::string>> &meta)
    {
        auto f = detail::open_out(path);
        for (const auto &kv : meta)
            f << "# " << kv.first << "=" << kv.second << "\n";
        auto h = c.argmax_hypothesis();
        f << "# slice_z=" << fmt9(h.z) << "\n";
        f << "# slice_clock_bias_ns=" << fmt9(h.clock_bias_s * 1e9) << "\n";
        std::size_t nx = c.xs.size(), ny = c.ys.size(), nz = c.zs.size();
        std::size_t iz = (c.argmax / (nx * ny)) % nz;
        std::size_t ib = c.argmax / (nx * ny * nz);
        f << "x,y,value\n";
        for (std::size_t iy = 0; iy < ny; iy++)
            for (std::size_t ix = 0; ix < nx; ix++)
                f << fmt9(c.xs[ix]) << ',' << fmt9(c.ys[iy]) << ','
                  << fmt9(c.values[c.index(ix, iy, iz, ib)]) << "\n";
    }

    struct CorrelogramSlice
    {
        std::vector<std::pair<std::string, std::string>> meta;
        std::vector<double> xs, ys, values; // row-major, x fastest
    };

    inline CorrelogramSlice read_correlogram_csv(const std::string &path)
    {
        auto f = detail::open_in(path);
        CorrelogramSlice s;
        std::string line;
        bool header_seen = false;
        std::vector<double> xs_all, ys_all;
        while (std::getline(f, line))
        {
            if (!line.empty() && line.back() == '\r')
                line.pop_back();
            if (line.empty())
                continue;
            if (line[0] == '#')
            {
                auto eq = line.find('=');
                if (eq != std::string::npos)
                    s.meta.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
                continue;
            }
            if (!header_seen)
            {
                if (line != "x,y,value")
                    throw error("correlogram csv '" + path + "' has an unexpected header");
                header_seen = true;
                continue;
            }
            auto c = detail::split_csv_line(line);
            if (c.size() != 3)
                throw error("correlogram csv '" + path + "': malformed row");
            xs_all.push_back(std::stod(c[0]));
            ys_all.push_back(std::stod(c[1]));
            s.values.push_back(std::stod(c[2]));
        }
        for (double x : xs_all)
        {
            if (!s.xs.empty() && x == s.xs.front() && s.xs.size() > 1)
                break;
            if (s.xs.empty() || x != s.xs.front())
                s.xs.push_back(x);
            else
                break;
        }
        std::size_t nx = s.xs.size() ? s.xs.size() : 1;
        for (std::size_t i = 0; i < ys_all.size(); i += nx)
            s.ys.push_back(ys_all[i]);
        return s;
    }

    inline void write_cir_csv(const std::string &path, const ChannelRealization &h)
    {
        auto f = detail::open_out(path);
        f << "# profile=" << h.profile_name << "\n";
        f << "# delay_spread_ns=" << fmt9(h.delay_spread_s * 1e9) << "\n";
        f << "tap_delay_ns,gain_abs,gain_phase_rad\n";
        for (std::size_t i = 0; i < h.tap_gain.size(); i++)
            f << fmt9(h.tap_delay_s[i] * 1e9) << ',' << fmt9(std::abs(h.tap_gain[i])) << ','
              << fmt9(std::arg(h.tap_gain[i])) << "\n";
    }

    inline void write_pdp_csv(const std::string &path, const TdlProfile &p, double delay_spread_s)
    {
        auto entries = power_delay_profile(p, delay_spread_s);
        auto f = detail::open_out(path);
        f << "# profile=" << p.name << "\n";
        f << "delay_ns,power_db\n";
        for (const auto &e : entries)
            f << fmt9(e.delay_s * 1e9) << ',' << fmt9(e.power_db) << "\n";
    }

} // namespace nrdpe

#endif

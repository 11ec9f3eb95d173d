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

#ifndef NRDPE_COMMON_HPP
#define NRDPE_COMMON_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nrdpe
{
    using cdbl = std::complex<double>;
    using cvec = std::vector<cdbl>;

    constexpr double SPEED_OF_LIGHT = 299792458.0; // m/s
    constexpr double PI = 3.141592653589793238462643383279502884;

    // Error taxonomy. Everything the library throws derives from nrdpe::error so
    // callers can distinguish library failures from std:: internals.
    struct error : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // Bad or inconsistent configuration / input documents.
    struct config_error : error
    {
        using error::error;
    };

    // Mismatched vector or grid dimensions.
    struct dimension_error : error
    {
        using error::error;
    };

    // Scalar argument outside its mathematical domain.
    struct domain_error : error
    {
        using error::error;
    };

    // Channel or hypothesis delay outside the cyclic-prefix-valid window.
    struct excess_delay_error : error
    {
        using error::error;
    };

    // Correlator output empty or identically zero, no peak to pick.
    struct no_peak_error : error
    {
        using error::error;
    };

    // Multilateration geometry (collinear anchors, rank-deficient normal matrix).
    struct degenerate_geometry_error : error
    {
        using error::error;
    };

    // Statistics requested over an empty record set.
    struct empty_statistics_error : error
    {
        using error::error;
    };

    inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
    inline double lin_to_db(double lin)
    {
        if (lin <= 0.0)
            throw domain_error("lin_to_db: non-positive power " + std::to_string(lin));
        return 10.0 * std::log10(lin);
    }

    inline double sq(double x) { return x * x; }

} // namespace nrdpe

#endif

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

#ifndef NRDPE_RNG_HPP
#define NRDPE_RNG_HPP

#include <cstdint>
#include <random>

#include "common.hpp"

namespace nrdpe
{
    // splitmix64 finalizer, used to mix seed material into independent substreams.
    inline std::uint64_t mix64(std::uint64_t x)
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    // Tags keep substreams for different draw purposes disjoint even when the
    // remaining key material collides.
    enum class stream_tag : std::uint64_t
    {
        pilots = 0x70696C6F74730000ULL,
        channel = 0x6368616E00000000ULL,
        noise = 0x6E6F697365000000ULL,
        geometry = 0x67656F6D00000000ULL,
    };

    inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t trial,
                                     stream_tag tag, std::uint64_t key = 0)
    {
        std::uint64_t s = mix64(base);
        s = mix64(s ^ trial);
        s = mix64(s ^ static_cast<std::uint64_t>(tag));
        s = mix64(s ^ key);
        return s;
    }

    // Deterministic random stream. mt19937_64 output is fixed by the standard;
    // the uniform/normal mappings are written out explicitly because the std::
    // distributions are implementation-defined and would break cross-toolchain
    // reproducibility of recorded results.
    class Stream
    {
      public:
        explicit Stream(std::uint64_t seed) : eng(seed) {}

        // Uniform on [0, 1), 53-bit resolution.
        double uniform()
        {
            return static_cast<double>(eng() >> 11) * 0x1.0p-53;
        }

        double uniform(double lo, double hi)
        {
            if (!(hi >= lo))
                throw domain_error("Stream::uniform: empty interval");
            return lo + (hi - lo) * uniform();
        }

        // Standard normal via Box-Muller. One value per call; the sine partner is
        // deliberately discarded to keep the draw order trivial to reason about.
        double gauss()
        {
            double u1 = (static_cast<double>(eng() >> 11) + 0.5) * 0x1.0p-53; // (0,1)
            double u2 = uniform();
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * PI * u2);
        }

        // Zero-mean circularly-symmetric complex normal with E|z|^2 = 1.
        cdbl cgauss()
        {
            double re = gauss();
            double im = gauss();
            return {re * 0.7071067811865476, im * 0.7071067811865476};
        }

        // Gaussian truncated to +/- n_sigma by rejection.
        double gauss_truncated(double sigma, double n_sigma)
        {
            if (sigma < 0.0 || n_sigma <= 0.0)
                throw domain_error("Stream::gauss_truncated: bad sigma");
            if (sigma == 0.0)
                return 0.0;
            for (;;)
            {
                double g = gauss();
                if (std::abs(g) <= n_sigma)
                    return sigma * g;
            }
        }

        std::uint64_t raw() { return eng(); }

      private:
        std::mt19937_64 eng;
    };

} // namespace nrdpe

#endif

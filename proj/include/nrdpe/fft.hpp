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

#ifndef NRDPE_FFT_HPP
#define NRDPE_FFT_HPP

#include <cstddef>
#include <utility>

#include "common.hpp"

namespace nrdpe
{
    // Iterative radix-2 FFT with precomputed twiddles, power-of-two sizes only.
    // Self-contained on purpose: results must be bit-identical for a given seed
    // regardless of worker count, machine or planner state, which rules out
    // runtime-tuned FFT backends.
    class FftPlan
    {
      public:
        explicit FftPlan(std::size_t n) : n_size(n)
        {
            if (n == 0 || (n & (n - 1)) != 0)
                throw dimension_error("FftPlan: size must be a power of two, got " + std::to_string(n));
            tw.resize(n / 2);
            for (std::size_t j = 0; j < n / 2; j++)
            {
                double a = -2.0 * PI * static_cast<double>(j) / static_cast<double>(n);
                tw[j] = {std::cos(a), std::sin(a)};
            }
            rev.resize(n);
            std::size_t lg = 0;
            while ((std::size_t(1) << lg) < n)
                lg++;
            for (std::size_t i = 0; i < n; i++)
            {
                std::size_t r = 0;
                for (std::size_t b = 0; b < lg; b++)
                    if (i & (std::size_t(1) << b))
                        r |= std::size_t(1) << (lg - 1 - b);
                rev[i] = r;
            }
        }

        std::size_t size() const { return n_size; }

        // In-place DFT, no scaling. inverse = conjugated twiddles.
        void transform_raw(cvec &x, bool inverse) const
        {
            if (x.size() != n_size)
                throw dimension_error("FftPlan: vector length " + std::to_string(x.size()) +
                                      " does not match plan size " + std::to_string(n_size));
            for (std::size_t i = 0; i < n_size; i++)
                if (rev[i] > i)
                    std::swap(x[i], x[rev[i]]);

            for (std::size_t len = 2; len <= n_size; len <<= 1)
            {
                std::size_t half = len >> 1;
                std::size_t step = n_size / len;
                for (std::size_t base = 0; base < n_size; base += len)
                {
                    for (std::size_t k = 0; k < half; k++)
                    {
                        cdbl w = tw[k * step];
                        if (inverse)
                            w = std::conj(w);
                        cdbl &a = x[base + k];
                        cdbl &b = x[base + k + half];
                        // manual complex multiply, keeps the inner loop free of
                        // the library's inf/nan fixup path
                        double br = b.real() * w.real() - b.imag() * w.imag();
                        double bi = b.real() * w.imag() + b.imag() * w.real();
                        double ar = a.real(), ai = a.imag();
                        a = {ar + br, ai + bi};
                        b = {ar - br, ai - bi};
                    }
                }
            }
        }

        // Unitary pair: forward = (1/sqrt(N)) sum x[n] e^{-j2pi kn/N}.
        void forward_unitary(cvec &x) const
        {
            transform_raw(x, false);
            double s = 1.0 / std::sqrt(static_cast<double>(n_size));
            for (auto &v : x)
                v *= s;
        }

        void inverse_unitary(cvec &x) const
        {
            transform_raw(x, true);
            double s = 1.0 / std::sqrt(static_cast<double>(n_size));
            for (auto &v : x)
                v *= s;
        }

      private:
        std::size_t n_size;
        cvec tw;
        std::vector<std::size_t> rev;
    };

    inline cvec fft_unitary(cvec x)
    {
        FftPlan(x.size()).forward_unitary(x);
        return x;
    }

    inline cvec ifft_unitary(cvec x)
    {
        FftPlan(x.size()).inverse_unitary(x);
        return x;
    }

} // namespace nrdpe

#endif

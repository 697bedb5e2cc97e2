/*
 Copyright 2026 The safeedit Authors
 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      http://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#pragma once

// Hand-rolled generators for property tests. Everything derives from a
// mt19937_64 seed so failures reproduce from the printed seed.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "safeedit/grid.hpp"
#include "safeedit/mask_engine.hpp"

namespace gen {

class Rng
{
public:
    explicit Rng(std::uint64_t seed)
        : m_eng(seed)
    {
    }
    // [0, 1)
    double unit() { return static_cast<double>(m_eng() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
    // [lo, hi]
    std::size_t index(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(m_eng() % (hi - lo + 1)); }
    bool coin(double p = 0.5) { return unit() < p; }
    std::uint8_t byte() { return static_cast<std::uint8_t>(m_eng() & 0xffu); }

private:
    std::mt19937_64 m_eng;
};

inline safeedit::BitGrid bits(Rng& rng, std::size_t h, std::size_t w, double density)
{
    safeedit::BitGrid g(h, w, 0);
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = rng.coin(density) ? 1 : 0;
    return g;
}

inline safeedit::LatentGate gate(Rng& rng, std::size_t h, std::size_t w)
{
    const std::size_t r0 = rng.index(0, h - 1), r1 = rng.index(r0, h - 1);
    const std::size_t c0 = rng.index(0, w - 1), c1 = rng.index(c0, w - 1);
    return safeedit::LatentGate::rect(h, w, r0, c0, r1, c1);
}

// Dense symmetric non-negative affinity for a connected graph: a random
// spanning path plus random extra edges.
inline std::vector<double> connected_affinity(Rng& rng, std::size_t n, double extra_density)
{
    std::vector<double> a(n * n, 0.0);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.index(0, i - 1)]);
    for (std::size_t i = 0; i + 1 < n; ++i)
    {
        const double w = rng.uniform(0.1, 2.0);
        a[order[i] * n + order[i + 1]] = w;
        a[order[i + 1] * n + order[i]] = w;
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (rng.coin(extra_density))
            {
                // deliberately asymmetric; the library symmetrizes
                a[i * n + j] += rng.uniform(0.0, 1.5);
                a[j * n + i] += rng.uniform(0.0, 1.5);
            }
    return a;
}

inline safeedit::RgbImage image(Rng& rng, std::size_t w, std::size_t h)
{
    safeedit::RgbImage img(w, h);
    for (auto& v : img.pixels)
        v = rng.byte();
    return img;
}

// Smooth gradient plus noise; SSIM on pure noise is not very discriminating.
inline safeedit::RgbImage structured_image(Rng& rng, std::size_t w, std::size_t h)
{
    safeedit::RgbImage img(w, h);
    const double fx = rng.uniform(0.05, 0.4), fy = rng.uniform(0.05, 0.4);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c)
            {
                const double v = 128 + 90 * std::sin(fx * x + c) * std::cos(fy * y) + rng.uniform(-20, 20);
                img.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
    return img;
}

} // namespace gen

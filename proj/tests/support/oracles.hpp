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

// Reference implementations used only by tests. Each is written from the
// definition, not from the library code: dense elimination instead of CG,
// direct window sums instead of separable filtering, per-cell loops instead
// of span arithmetic.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace oracle {

// Gaussian elimination with partial pivoting on a dense row-major n x n system.
inline std::vector<double> dense_solve(std::vector<double> a, std::vector<double> b)
{
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k)
    {
        std::size_t piv = k;
        for (std::size_t r = k + 1; r < n; ++r)
            if (std::abs(a[r * n + k]) > std::abs(a[piv * n + k]))
                piv = r;
        if (a[piv * n + k] == 0.0)
            throw std::runtime_error("singular system");
        if (piv != k)
        {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(a[k * n + c], a[piv * n + c]);
            std::swap(b[k], b[piv]);
        }
        for (std::size_t r = k + 1; r < n; ++r)
        {
            const double f = a[r * n + k] / a[k * n + k];
            for (std::size_t c = k; c < n; ++c)
                a[r * n + c] -= f * a[k * n + c];
            b[r] -= f * b[k];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;)
    {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c)
            s -= a[i * n + c] * x[c];
        x[i] = s / a[i * n + i];
    }
    return x;
}

// (diag(dw) + lambda (D - A)) with A symmetrized, assembled densely.
inline std::vector<double> dense_system(const std::vector<double>& affinity, std::size_t n, double lambda,
                                        const std::vector<double>& dw)
{
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
    {
        double deg = 0.0;
        for (std::size_t j = 0; j < n; ++j)
        {
            if (i == j)
                continue;
            const double w = 0.5 * (affinity[i * n + j] + affinity[j * n + i]);
            m[i * n + j] = -lambda * w;
            deg += w;
        }
        m[i * n + i] = dw[i] + lambda * deg;
    }
    return m;
}

struct Rgb
{
    std::size_t w = 0, h = 0;
    std::vector<std::uint8_t> px; // interleaved RGB
    int at(std::size_t x, std::size_t y, std::size_t c) const { return px[(y * w + x) * 3 + c]; }
};

// bg[y][x] == 1 marks background.
inline double psnr(const Rgb& a, const Rgb& b, const std::vector<std::vector<int>>& bg)
{
    double total = 0.0;
    double count = 0.0;
    for (std::size_t y = 0; y < a.h; ++y)
        for (std::size_t x = 0; x < a.w; ++x)
        {
            if (!bg[y][x])
                continue;
            for (std::size_t c = 0; c < 3; ++c)
            {
                const double d = a.at(x, y, c) - b.at(x, y, c);
                total += d * d;
                count += 1.0;
            }
        }
    const double mse = total / count;
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(255.0) - 10.0 * std::log10(mse);
}

// SSIM from the definition: 2-D Gaussian window evaluated directly at every
// window position fully inside the image and the background.
inline double ssim(const Rgb& a, const Rgb& b, const std::vector<std::vector<int>>& bg)
{
    const int win = 11;
    const double sigma = 1.5;
    std::vector<double> g2(win * win);
    double gsum = 0.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j)
        {
            const double di = i - 5, dj = j - 5;
            g2[i * win + j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
            gsum += g2[i * win + j];
        }
    for (auto& v : g2)
        v /= gsum;
    auto gray = [](const Rgb& im, std::size_t x, std::size_t y) {
        return 0.299 * im.at(x, y, 0) + 0.587 * im.at(x, y, 1) + 0.114 * im.at(x, y, 2);
    };
    const double c1 = std::pow(0.01 * 255, 2), c2 = std::pow(0.03 * 255, 2);
    double total = 0.0;
    int n = 0;
    for (std::size_t y0 = 0; y0 + win <= a.h; ++y0)
        for (std::size_t x0 = 0; x0 + win <= a.w; ++x0)
        {
            bool inside = true;
            for (int i = 0; i < win && inside; ++i)
                for (int j = 0; j < win && inside; ++j)
                    inside = bg[y0 + i][x0 + j] != 0;
            if (!inside)
                continue;
            double ma = 0, mb = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j)
                {
                    ma += g2[i * win + j] * gray(a, x0 + j, y0 + i);
                    mb += g2[i * win + j] * gray(b, x0 + j, y0 + i);
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j)
                {
                    const double da = gray(a, x0 + j, y0 + i) - ma;
                    const double db = gray(b, x0 + j, y0 + i) - mb;
                    va += g2[i * win + j] * da * da;
                    vb += g2[i * win + j] * db * db;
                    cov += g2[i * win + j] * da * db;
                }
            total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++n;
        }
    return total / n;
}

// Bilinear sample with half-pixel centres and edge clamping, one output cell at a time.
inline std::vector<double> bilinear(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t oh,
                                    std::size_t ow)
{
    std::vector<double> out(oh * ow);
    for (std::size_t r = 0; r < oh; ++r)
        for (std::size_t c = 0; c < ow; ++c)
        {
            double sy = (r + 0.5) * static_cast<double>(h) / static_cast<double>(oh) - 0.5;
            double sx = (c + 0.5) * static_cast<double>(w) / static_cast<double>(ow) - 0.5;
            sy = std::fmin(std::fmax(sy, 0.0), static_cast<double>(h - 1));
            sx = std::fmin(std::fmax(sx, 0.0), static_cast<double>(w - 1));
            const auto y0 = static_cast<std::size_t>(sy), x0 = static_cast<std::size_t>(sx);
            const std::size_t y1 = y0 + 1 < h ? y0 + 1 : y0, x1 = x0 + 1 < w ? x0 + 1 : x0;
            const double fy = sy - y0, fx = sx - x0;
            const double top = src[y0 * w + x0] * (1 - fx) + src[y0 * w + x1] * fx;
            const double bot = src[y1 * w + x0] * (1 - fx) + src[y1 * w + x1] * fx;
            out[r * ow + c] = top * (1 - fy) + bot * fy;
        }
    return out;
}

// Toy denoiser after k steps toward P from z0.
inline double toy_closed_form(double z0, double p, double alpha, int k)
{
    return p + std::pow(1.0 - alpha, k) * (z0 - p);
}

} // namespace oracle

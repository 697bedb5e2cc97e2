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

// Instance-consistent edit masks.
//
//   cross-attention pair --aggregate--> M_cross
//   (D_w + lambda L) M* = D_w M_cross, L = D - A over the self-attention graph
//   M* --normalize, bilinear resample, threshold--> M (latent grid, binary)
//   detector box --outward-rounded scaling--> G (latent rectangle)
//   M' = M AND G

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "safeedit/detector_protocol.hpp"
#include "safeedit/error.hpp"
#include "safeedit/grid.hpp"
#include "safeedit/sparse.hpp"

namespace safeedit {

enum class AggregationPolicy
{
    mean,
    max,
};

enum class DwMode
{
    identity,
    activation, // D_w,ii = 1 + M_cross,i
};

inline AggregationPolicy parse_aggregation(const std::string& s)
{
    if (s == "mean")
        return AggregationPolicy::mean;
    if (s == "max")
        return AggregationPolicy::max;
    throw ConfigError("unknown aggregation policy '" + s + "' (expected mean or max)");
}

inline DwMode parse_dw_mode(const std::string& s)
{
    if (s == "identity")
        return DwMode::identity;
    if (s == "activation")
        return DwMode::activation;
    throw ConfigError("unknown dw-mode '" + s + "' (expected identity or activation)");
}

inline const char* to_string(DwMode m) { return m == DwMode::identity ? "identity" : "activation"; }
inline const char* to_string(AggregationPolicy p) { return p == AggregationPolicy::mean ? "mean" : "max"; }

struct CrossAttentionPair
{
    RealGrid a_source;
    RealGrid a_target;
};

class SelfAffinity
{
public:
    SelfAffinity() = default;

    // Off-diagonal entries are symmetrized as (A + A^T) / 2. Self loops do not
    // affect the Laplacian and are dropped.
    static SelfAffinity from_triplets(std::size_t n, const std::vector<Triplet>& entries)
    {
        std::vector<Triplet> sym;
        sym.reserve(entries.size() * 2);
        for (const auto& t : entries)
        {
            if (t.row >= n || t.col >= n)
                throw ShapeError("affinity entry outside " + std::to_string(n) + "x" + std::to_string(n));
            if (!std::isfinite(t.value) || t.value < 0.0)
                throw ShapeError("affinity entries must be finite and non-negative");
            if (t.row == t.col || t.value == 0.0)
                continue;
            sym.push_back({t.row, t.col, 0.5 * t.value});
            sym.push_back({t.col, t.row, 0.5 * t.value});
        }
        SelfAffinity a;
        a.m_matrix = CsrMatrix(n, n, std::move(sym));
        return a;
    }

    static SelfAffinity from_dense(std::size_t n, const std::vector<double>& dense)
    {
        if (dense.size() != n * n)
            throw ShapeError("dense affinity needs n*n entries");
        std::vector<Triplet> t;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (dense[i * n + j] != 0.0 || std::isnan(dense[i * n + j]))
                    t.push_back({i, j, dense[i * n + j]});
        return from_triplets(n, t);
    }

    std::size_t size() const { return m_matrix.rows(); }
    const CsrMatrix& matrix() const { return m_matrix; }

private:
    CsrMatrix m_matrix;
};

// 4-neighbour lattice graph over an h x w grid with uniform edge weight.
inline std::vector<Triplet> grid4_edges(std::size_t h, std::size_t w, double weight)
{
    std::vector<Triplet> t;
    for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
        {
            const std::size_t i = r * w + c;
            if (c + 1 < w)
                t.push_back({i, i + 1, weight}), t.push_back({i + 1, i, weight});
            if (r + 1 < h)
                t.push_back({i, i + w, weight}), t.push_back({i + w, i, weight});
        }
    return t;
}

struct RefinementParams
{
    double lambda = 1.0;
    // Diagonal of D_w. Empty means the identity.
    std::vector<double> confidence;
    double solver_tol = 1e-10;
    std::size_t max_iter = 10000;
};

struct RefinedMask
{
    RealGrid values;
    std::size_t iterations = 0;
    double relative_residual = 0.0;
};

struct LatentMask
{
    BitGrid bits;

    friend bool operator==(const LatentMask&, const LatentMask&) = default;
};

// Rectangle of ones (inclusive cell bounds) on a latent grid, or no cells at all.
struct LatentGate
{
    BitGrid bits;
    std::optional<std::size_t> row_min, col_min, row_max, col_max;

    bool empty() const { return !row_min.has_value(); }
    bool contains(std::size_t r, std::size_t c) const
    {
        return !empty() && r >= *row_min && r <= *row_max && c >= *col_min && c <= *col_max;
    }

    static LatentGate rect(std::size_t h, std::size_t w, std::size_t r0, std::size_t c0, std::size_t r1,
                           std::size_t c1)
    {
        if (r0 > r1 || c0 > c1 || r1 >= h || c1 >= w)
            throw ShapeError("gate rectangle outside the latent grid");
        LatentGate g;
        g.bits = BitGrid(h, w, 0);
        for (std::size_t r = r0; r <= r1; ++r)
            for (std::size_t c = c0; c <= c1; ++c)
                g.bits(r, c) = 1;
        g.row_min = r0, g.col_min = c0, g.row_max = r1, g.col_max = c1;
        return g;
    }
    static LatentGate full(std::size_t h, std::size_t w) { return rect(h, w, 0, 0, h - 1, w - 1); }
    static LatentGate none(std::size_t h, std::size_t w)
    {
        LatentGate g;
        g.bits = BitGrid(h, w, 0);
        return g;
    }
};

struct MaskSettings
{
    double lambda = 1.0;
    double solver_tol = 1e-10;
    std::size_t max_iter = 10000;
    DwMode dw_mode = DwMode::identity;
    AggregationPolicy aggregation = AggregationPolicy::mean;
    double tau = 0.5;
};

// ---- aggregation ------------------------------------------------------------------

namespace detail {

inline RealGrid min_max_normalized(const RealGrid& m, const char* what)
{
    if (m.empty())
        throw ShapeError(std::string(what) + " is empty");
    auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
    const double mn = *lo, mx = *hi;
    if (!(mx > mn))
        throw DegenerateAttention(std::string(what) + " is constant; min-max normalization is undefined");
    RealGrid out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.size(); ++i)
        out[i] = (m[i] - mn) / (mx - mn);
    return out;
}

inline void check_attention(const RealGrid& m, const char* what)
{
    bool positive = false;
    for (double v : m.values())
    {
        if (!std::isfinite(v) || v < 0.0)
            throw ShapeError(std::string(what) + " must be finite and non-negative");
        positive = positive || v > 0.0;
    }
    if (!positive)
        throw DegenerateAttention(std::string(what) + " is identically zero");
}

} // namespace detail

inline RealGrid aggregate_cross_attention(const CrossAttentionPair& pair,
                                          AggregationPolicy policy = AggregationPolicy::mean)
{
    if (!pair.a_source.same_shape(pair.a_target))
        throw ShapeError("source and target attention maps differ in shape");
    detail::check_attention(pair.a_source, "source attention map");
    detail::check_attention(pair.a_target, "target attention map");
    const RealGrid s = detail::min_max_normalized(pair.a_source, "source attention map");
    const RealGrid t = detail::min_max_normalized(pair.a_target, "target attention map");
    RealGrid out(s.rows(), s.cols());
    for (std::size_t i = 0; i < s.size(); ++i)
        out[i] = policy == AggregationPolicy::mean ? 0.5 * (s[i] + t[i]) : std::max(s[i], t[i]);
    return out;
}

// ---- refinement -----------------------------------------------------------------------

inline CsrMatrix build_laplacian(const SelfAffinity& aff)
{
    const auto& a = aff.matrix();
    const auto degree = a.row_sums();
    std::vector<Triplet> t;
    t.reserve(a.nonzeros() + a.rows());
    a.for_each([&](std::size_t r, std::size_t c, double v) { t.push_back({r, c, -v}); });
    for (std::size_t i = 0; i < a.rows(); ++i)
        if (degree[i] != 0.0)
            t.push_back({i, i, degree[i]});
    return CsrMatrix(a.rows(), a.cols(), std::move(t));
}

inline std::vector<double> confidence_weights(DwMode mode, const RealGrid& m_cross)
{
    std::vector<double> w(m_cross.size(), 1.0);
    if (mode == DwMode::activation)
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = 1.0 + m_cross[i];
    return w;
}

// Solves (D_w + lambda L) M* = D_w M_cross by conjugate gradient, warm
// started from M_cross.
inline RefinedMask refine(const RealGrid& m_cross, const SelfAffinity& aff, const RefinementParams& params)
{
    const std::size_t n = m_cross.size();
    if (aff.size() != n)
        throw ShapeError("affinity is " + std::to_string(aff.size()) + " nodes but the map has " +
                         std::to_string(n) + " cells");
    if (!(params.lambda >= 0.0) || !std::isfinite(params.lambda))
        throw ConfigError("lambda must be finite and >= 0");
    if (!(params.solver_tol > 0.0))
        throw ConfigError("solver tolerance must be > 0");
    std::vector<double> dw = params.confidence.empty() ? std::vector<double>(n, 1.0) : params.confidence;
    if (dw.size() != n)
        throw ShapeError("confidence weights length does not match the map");
    for (double v : dw)
        if (!(v > 0.0) || !std::isfinite(v))
            throw ConfigError("confidence weights must be positive");

    const CsrMatrix lap = build_laplacian(aff);
    const double lambda = params.lambda;

    std::vector<double> b(n), diag = lap.diagonal(), tmp(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        b[i] = dw[i] * m_cross[i];
        diag[i] = dw[i] + lambda * diag[i];
    }
    auto apply = [&](std::span<const double> x, std::span<double> y) {
        lap.multiply(x, tmp);
        for (std::size_t i = 0; i < n; ++i)
            y[i] = dw[i] * x[i] + lambda * tmp[i];
    };

    std::vector<double> x(m_cross.values().begin(), m_cross.values().end());
    const CgResult cg = conjugate_gradient(apply, diag, b, x, params.solver_tol, params.max_iter);
    if (!cg.converged)
        throw SolverError(cg.relative_residual, cg.iterations);

    RefinedMask out;
    out.values = RealGrid(m_cross.rows(), m_cross.cols(), std::move(x));
    out.iterations = cg.iterations;
    out.relative_residual = cg.relative_residual;
    return out;
}

// ---- binarization ----------------------------------------------------------------------

// Bilinear resampling with half-pixel centres, edge clamped.
inline RealGrid resample_bilinear(const RealGrid& src, std::size_t out_h, std::size_t out_w)
{
    RealGrid out(out_h, out_w);
    const double sy = static_cast<double>(src.rows()) / static_cast<double>(out_h);
    const double sx = static_cast<double>(src.cols()) / static_cast<double>(out_w);
    const double max_y = static_cast<double>(src.rows() - 1);
    const double max_x = static_cast<double>(src.cols() - 1);
    for (std::size_t r = 0; r < out_h; ++r)
    {
        const double fy = std::clamp((static_cast<double>(r) + 0.5) * sy - 0.5, 0.0, max_y);
        const auto y0 = static_cast<std::size_t>(std::floor(fy));
        const std::size_t y1 = std::min(y0 + 1, src.rows() - 1);
        const double wy = fy - static_cast<double>(y0);
        for (std::size_t c = 0; c < out_w; ++c)
        {
            const double fx = std::clamp((static_cast<double>(c) + 0.5) * sx - 0.5, 0.0, max_x);
            const auto x0 = static_cast<std::size_t>(std::floor(fx));
            const std::size_t x1 = std::min(x0 + 1, src.cols() - 1);
            const double wx = fx - static_cast<double>(x0);
            const double top = (1.0 - wx) * src(y0, x0) + wx * src(y0, x1);
            const double bot = (1.0 - wx) * src(y1, x0) + wx * src(y1, x1);
            out(r, c) = (1.0 - wy) * top + wy * bot;
        }
    }
    return out;
}

struct BinarizeResult
{
    LatentMask mask;
    // Set when M* was constant; the mask is then all zero.
    bool degenerate = false;
};

inline BinarizeResult binarize_and_upsample(const RealGrid& m_star, std::size_t latent_h, std::size_t latent_w,
                                            double tau)
{
    if (latent_h == 0 || latent_w == 0)
        throw ShapeError("latent dimensions must be positive");
    if (m_star.empty())
        throw ShapeError("refined mask is empty");
    if (!(tau >= 0.0 && tau <= 1.0))
        throw ConfigError("threshold tau must lie in [0, 1]");

    BinarizeResult res;
    res.mask.bits = BitGrid(latent_h, latent_w, 0);
    auto [lo, hi] = std::minmax_element(m_star.values().begin(), m_star.values().end());
    if (!(*hi > *lo))
    {
        res.degenerate = true;
        return res;
    }
    RealGrid norm(m_star.rows(), m_star.cols());
    for (std::size_t i = 0; i < m_star.size(); ++i)
        norm[i] = (m_star[i] - *lo) / (*hi - *lo);
    const RealGrid up = resample_bilinear(norm, latent_h, latent_w);
    for (std::size_t i = 0; i < up.size(); ++i)
        res.mask.bits[i] = up[i] >= tau ? 1 : 0;
    return res;
}

// ---- gating ---------------------------------------------------------------------------------

inline LatentGate gate_from_box(const PixelBox& box, double image_w, double image_h, std::size_t latent_h,
                                std::size_t latent_w)
{
    if (!(image_w > 0) || !(image_h > 0) || latent_h == 0 || latent_w == 0)
        throw ConfigError("image and latent dimensions must be positive");
    if (box.x_min < 0 || box.y_min < 0 || box.x_max > image_w || box.y_max > image_h || !(box.x_min < box.x_max) ||
        !(box.y_min < box.y_max))
        throw BoxRangeError(0, "pixel box lies outside the image or is degenerate");

    const double sx = static_cast<double>(latent_w) / image_w;
    const double sy = static_cast<double>(latent_h) / image_h;
    auto lo = [](double v) { return static_cast<std::size_t>(std::floor(v)); };
    auto hi = [](double v, std::size_t n) {
        return std::clamp(static_cast<std::size_t>(std::ceil(v)), std::size_t{1}, n) - 1;
    };
    const std::size_t c0 = std::min(lo(box.x_min * sx), latent_w - 1);
    const std::size_t r0 = std::min(lo(box.y_min * sy), latent_h - 1);
    const std::size_t c1 = std::max(hi(box.x_max * sx, latent_w), c0);
    const std::size_t r1 = std::max(hi(box.y_max * sy, latent_h), r0);
    return LatentGate::rect(latent_h, latent_w, r0, c0, r1, c1);
}

inline LatentMask apply_gate(const LatentMask& m, const LatentGate& g)
{
    if (!m.bits.same_shape(g.bits))
        throw ShapeError("mask and gate differ in shape");
    LatentMask out{BitGrid(m.bits.rows(), m.bits.cols(), 0)};
    for (std::size_t i = 0; i < m.bits.size(); ++i)
        out.bits[i] = (m.bits[i] != 0 && g.bits[i] != 0) ? 1 : 0;
    return out;
}

// ---- full chain ------------------------------------------------------------------------------

struct MaskStages
{
    RealGrid m_cross;
    RefinedMask m_star;
    LatentMask mask;
    LatentMask gated;
    bool degenerate = false;
};

inline MaskStages build_edit_mask(const CrossAttentionPair& pair, const SelfAffinity& aff, const MaskSettings& s,
                                  const LatentGate& gate)
{
    MaskStages st;
    st.m_cross = aggregate_cross_attention(pair, s.aggregation);
    RefinementParams p;
    p.lambda = s.lambda;
    p.solver_tol = s.solver_tol;
    p.max_iter = s.max_iter;
    if (s.dw_mode != DwMode::identity)
        p.confidence = confidence_weights(s.dw_mode, st.m_cross);
    st.m_star = refine(st.m_cross, aff, p);
    auto bin = binarize_and_upsample(st.m_star.values, gate.bits.rows(), gate.bits.cols(), s.tau);
    st.mask = std::move(bin.mask);
    st.degenerate = bin.degenerate;
    st.gated = apply_gate(st.mask, gate);
    return st;
}

} // namespace safeedit

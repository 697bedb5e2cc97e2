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

// Evaluation: background-restricted fidelity metrics, contrastive alignment,
// detector score aggregation and human-moderation rates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "safeedit/detector_protocol.hpp"
#include "safeedit/error.hpp"
#include "safeedit/grid.hpp"

namespace safeedit {

// ---- background ----------------------------------------------------------------

// 1 = background. Rows are image rows.
struct BackgroundMask
{
    BitGrid bits;
    std::size_t count = 0;
};

// A pixel is excluded when its centre lies inside any box (closed intervals).
inline BackgroundMask background_mask(std::size_t image_w, std::size_t image_h, const std::vector<PixelBox>& boxes)
{
    if (image_w == 0 || image_h == 0)
        throw ConfigError("image dimensions must be positive");
    for (std::size_t i = 0; i < boxes.size(); ++i)
    {
        const auto& b = boxes[i];
        if (b.x_min < 0 || b.y_min < 0 || b.x_max > static_cast<double>(image_w) ||
            b.y_max > static_cast<double>(image_h) || !(b.x_min < b.x_max) || !(b.y_min < b.y_max))
            throw BoxRangeError(i, "exclusion box lies outside the image or is degenerate");
    }
    BackgroundMask m;
    m.bits = BitGrid(image_h, image_w, 1);
    for (const auto& b : boxes)
    {
        // Centres x + 0.5 in [x_min, x_max]  <=>  x in [ceil(x_min - 0.5), floor(x_max - 0.5)].
        const auto x0 = static_cast<long>(std::ceil(b.x_min - 0.5));
        const auto x1 = std::min(static_cast<long>(std::floor(b.x_max - 0.5)), static_cast<long>(image_w) - 1);
        const auto y0 = static_cast<long>(std::ceil(b.y_min - 0.5));
        const auto y1 = std::min(static_cast<long>(std::floor(b.y_max - 0.5)), static_cast<long>(image_h) - 1);
        for (long y = std::max(y0, 0L); y <= y1; ++y)
            for (long x = std::max(x0, 0L); x <= x1; ++x)
                m.bits(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = 0;
    }
    m.count = popcount(m.bits);
    if (m.count == 0)
        throw EmptyBackground();
    return m;
}

namespace detail {

inline void check_pair(const RgbImage& a, const RgbImage& b, const BackgroundMask& mask)
{
    if (a.width != b.width || a.height != b.height)
        throw ShapeError("images differ in size");
    if (mask.bits.rows() != a.height || mask.bits.cols() != a.width)
        throw ShapeError("background mask does not match the image size");
    if (mask.count == 0)
        throw EmptyBackground();
}

} // namespace detail

// ---- PSNR -------------------------------------------------------------------------

inline constexpr double kPsnrPeak = 255.0;

// +inf when the background is identical.
inline double psnr_bg(const RgbImage& a, const RgbImage& b, const BackgroundMask& mask)
{
    detail::check_pair(a, b, mask);
    double sse = 0.0;
    for (std::size_t y = 0; y < a.height; ++y)
        for (std::size_t x = 0; x < a.width; ++x)
            if (mask.bits(y, x))
                for (std::size_t ch = 0; ch < 3; ++ch)
                {
                    const double d = static_cast<double>(a.at(x, y, ch)) - static_cast<double>(b.at(x, y, ch));
                    sse += d * d;
                }
    const double mse = sse / static_cast<double>(mask.count * 3);
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(kPsnrPeak * kPsnrPeak / mse);
}

// ---- SSIM --------------------------------------------------------------------------

struct SsimParams
{
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 255.0;
};

inline RealGrid to_grayscale(const RgbImage& img)
{
    RealGrid g(img.height, img.width);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            g(y, x) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    return g;
}

// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
inline std::vector<double> gaussian_taps(std::size_t size, double sigma)
{
    std::vector<double> w(size);
    const double mid = static_cast<double>(size - 1) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < size; ++i)
    {
        const double d = static_cast<double>(i) - mid;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (auto& v : w)
        v /= sum;
    return w;
}

// Mean SSIM over window centres whose whole window lies in the background.
inline double ssim_bg(const RgbImage& a, const RgbImage& b, const BackgroundMask& mask, const SsimParams& p = {})
{
    detail::check_pair(a, b, mask);
    const std::size_t win = p.window;
    if (a.width < win || a.height < win)
        throw ShapeError("images must be at least " + std::to_string(win) + "x" + std::to_string(win) + " for SSIM");

    const RealGrid ga = to_grayscale(a), gb = to_grayscale(b);
    const std::size_t h = a.height, w = a.width;
    const std::size_t oh = h - win + 1, ow = w - win + 1;

    // Background count over each window via a summed-area table.
    std::vector<std::size_t> sat((h + 1) * (w + 1), 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            sat[(y + 1) * (w + 1) + x + 1] = mask.bits(y, x) + sat[y * (w + 1) + x + 1] +
                                             sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
    auto window_bg = [&](std::size_t y, std::size_t x) {
        return sat[(y + win) * (w + 1) + x + win] - sat[y * (w + 1) + x + win] - sat[(y + win) * (w + 1) + x] +
               sat[y * (w + 1) + x];
    };

    const auto taps = gaussian_taps(win, p.sigma);
    // Separable filtering of the five moment images over the valid region.
    auto filter = [&](auto&& value) {
        RealGrid horiz(h, ow);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < ow; ++x)
            {
                double s = 0.0;
                for (std::size_t k = 0; k < win; ++k)
                    s += taps[k] * value(y, x + k);
                horiz(y, x) = s;
            }
        RealGrid out(oh, ow);
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
            {
                double s = 0.0;
                for (std::size_t k = 0; k < win; ++k)
                    s += taps[k] * horiz(y + k, x);
                out(y, x) = s;
            }
        return out;
    };
    const RealGrid mu_a = filter([&](std::size_t y, std::size_t x) { return ga(y, x); });
    const RealGrid mu_b = filter([&](std::size_t y, std::size_t x) { return gb(y, x); });
    const RealGrid e_aa = filter([&](std::size_t y, std::size_t x) { return ga(y, x) * ga(y, x); });
    const RealGrid e_bb = filter([&](std::size_t y, std::size_t x) { return gb(y, x) * gb(y, x); });
    const RealGrid e_ab = filter([&](std::size_t y, std::size_t x) { return ga(y, x) * gb(y, x); });

    const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
    const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x)
        {
            if (window_bg(y, x) != win * win)
                continue;
            const double ma = mu_a(y, x), mb = mu_b(y, x);
            const double va = e_aa(y, x) - ma * ma;
            const double vb = e_bb(y, x) - mb * mb;
            const double cov = e_ab(y, x) - ma * mb;
            sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++n;
        }
    if (n == 0)
        throw EmptyBackground("no SSIM window lies entirely in the background");
    return sum / static_cast<double>(n);
}

// ---- perceptual distance -----------------------------------------------------------

class PerceptualDistanceProvider
{
public:
    virtual ~PerceptualDistanceProvider() = default;
    virtual std::string name() const = 0;
    virtual double distance(const RgbImage& a, const RgbImage& b, const BackgroundMask& mask) const = 0;
};

namespace detail {

// Uniform in [-1, 1) from the top 53 bits; independent of the standard
// library's distribution implementations.
inline double uniform_pm1(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

inline std::uint64_t fnv1a(std::string_view s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s)
    {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace detail

// Mean squared difference of per-pixel features f(p) = R rgb(p) / 255, with a
// fixed seeded K x 3 projection R, averaged over K and background pixels.
class MockPerceptualProvider : public PerceptualDistanceProvider
{
public:
    explicit MockPerceptualProvider(std::uint64_t seed = 7, std::size_t features = 8)
        : m_projection(features)
    {
        std::mt19937_64 rng(seed);
        for (auto& row : m_projection)
            for (auto& v : row)
                v = detail::uniform_pm1(rng);
    }

    std::string name() const override { return "mock-projection"; }
    const std::vector<std::array<double, 3>>& projection() const { return m_projection; }

    double distance(const RgbImage& a, const RgbImage& b, const BackgroundMask& mask) const override
    {
        detail::check_pair(a, b, mask);
        double sum = 0.0;
        for (std::size_t y = 0; y < a.height; ++y)
            for (std::size_t x = 0; x < a.width; ++x)
            {
                if (!mask.bits(y, x))
                    continue;
                std::array<double, 3> d{};
                for (std::size_t ch = 0; ch < 3; ++ch)
                    d[ch] = (static_cast<double>(a.at(x, y, ch)) - static_cast<double>(b.at(x, y, ch))) / 255.0;
                for (const auto& r : m_projection)
                {
                    const double f = r[0] * d[0] + r[1] * d[1] + r[2] * d[2];
                    sum += f * f;
                }
            }
        return sum / static_cast<double>(mask.count * m_projection.size());
    }

private:
    std::vector<std::array<double, 3>> m_projection;
};

inline double lpips_bg(const PerceptualDistanceProvider& provider, const RgbImage& a, const RgbImage& b,
                       const BackgroundMask& mask)
{
    detail::check_pair(a, b, mask);
    double d;
    try
    {
        d = provider.distance(a, b, mask);
    }
    catch (const std::exception& e)
    {
        throw ProviderError(provider.name() + ": " + e.what());
    }
    if (!std::isfinite(d) || d < 0.0)
        throw ProviderError(provider.name() + " returned an invalid distance");
    return d;
}

struct FidelityReport
{
    double lpips_bg = 0.0;
    double psnr_bg = 0.0;
    double ssim_bg = 0.0;
    std::size_t background_pixel_count = 0;
};

inline FidelityReport fidelity_report(const PerceptualDistanceProvider& lpips, const RgbImage& orig,
                                      const RgbImage& edited, const BackgroundMask& mask)
{
    return FidelityReport{lpips_bg(lpips, orig, edited, mask), psnr_bg(orig, edited, mask),
                          ssim_bg(orig, edited, mask), mask.count};
}

// ---- contrastive alignment ------------------------------------------------------------

class EmbeddingProvider
{
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual std::vector<double> embed_image(const RgbImage& image) const = 0;
    virtual std::vector<double> embed_text(const std::string& text) const = 0;
};

inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b)
{
    if (a.size() != b.size() || a.empty())
        throw ProviderError("embedding dimensions differ");
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
    {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0)
        throw ProviderError("zero embedding vector");
    return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

// Deterministic stand-in for a joint image/text embedder. Text vectors are
// seeded by a hash of the text; images are projected from a 4x4 grid of mean
// colours.
class MockEmbeddingProvider : public EmbeddingProvider
{
public:
    explicit MockEmbeddingProvider(std::uint64_t seed = 11, std::size_t dim = 64)
        : m_seed(seed)
        , m_dim(dim)
        , m_image_proj(dim * kImageFeatures)
    {
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
        for (auto& v : m_image_proj)
            v = detail::uniform_pm1(rng);
    }

    std::string name() const override { return "mock-embedding"; }

    std::vector<double> embed_text(const std::string& text) const override
    {
        std::mt19937_64 rng(detail::fnv1a(text) ^ m_seed);
        std::vector<double> v(m_dim);
        for (auto& x : v)
            x = detail::uniform_pm1(rng);
        return normalized(std::move(v));
    }

    std::vector<double> embed_image(const RgbImage& img) const override
    {
        if (img.width == 0 || img.height == 0)
            throw ProviderError("empty image");
        std::array<double, kImageFeatures> f{};
        std::array<double, 16> counts{};
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
            {
                const std::size_t cell = (y * 4 / img.height) * 4 + (x * 4 / img.width);
                counts[cell] += 1.0;
                for (std::size_t ch = 0; ch < 3; ++ch)
                    f[cell * 3 + ch] += img.at(x, y, ch) / 255.0;
            }
        for (std::size_t cell = 0; cell < 16; ++cell)
            for (std::size_t ch = 0; ch < 3; ++ch)
                f[cell * 3 + ch] = counts[cell] > 0 ? f[cell * 3 + ch] / counts[cell] - 0.5 : 0.0;
        f[kImageFeatures - 1] = 1.0;
        std::vector<double> v(m_dim, 0.0);
        for (std::size_t d = 0; d < m_dim; ++d)
            for (std::size_t k = 0; k < kImageFeatures; ++k)
                v[d] += m_image_proj[d * kImageFeatures + k] * f[k];
        return normalized(std::move(v));
    }

private:
    static constexpr std::size_t kImageFeatures = 49;

    static std::vector<double> normalized(std::vector<double> v)
    {
        double n = 0;
        for (double x : v)
            n += x * x;
        n = std::sqrt(n);
        for (auto& x : v)
            x /= n;
        return v;
    }

    std::uint64_t m_seed;
    std::size_t m_dim;
    std::vector<double> m_image_proj;
};

namespace detail {

inline double provider_similarity(const EmbeddingProvider& p, const std::vector<double>& image_vec,
                                  const std::string& text)
{
    std::vector<double> t;
    try
    {
        t = p.embed_text(text);
    }
    catch (const ProviderError&)
    {
        throw;
    }
    catch (const std::exception& e)
    {
        throw ProviderError(p.name() + ": " + e.what());
    }
    return cosine_similarity(image_vec, t);
}

inline std::vector<double> provider_image(const EmbeddingProvider& p, const RgbImage& img)
{
    try
    {
        return p.embed_image(img);
    }
    catch (const ProviderError&)
    {
        throw;
    }
    catch (const std::exception& e)
    {
        throw ProviderError(p.name() + ": " + e.what());
    }
}

} // namespace detail

// CLIP(I, p_safe) - CLIP(I, p_unsafe)
inline double delta_clip(const EmbeddingProvider& provider, const RgbImage& image, const std::string& p_safe,
                         const std::string& p_unsafe)
{
    if (p_safe.empty() || p_unsafe.empty())
        throw ConfigError("alignment prompts must be non-empty");
    const auto v = detail::provider_image(provider, image);
    return detail::provider_similarity(provider, v, p_safe) - detail::provider_similarity(provider, v, p_unsafe);
}

struct AlignmentReport
{
    double delta_orig = 0.0;
    double delta_sys = 0.0;
    double gain = 0.0;
    double unsafe_reduction = 0.0;
    std::size_t n_concepts = 0;
};

// Builds a report from its primary quantities; gain is always derived.
inline AlignmentReport make_alignment_report(double delta_orig, double delta_sys, double unsafe_reduction,
                                             std::size_t n_concepts)
{
    return AlignmentReport{delta_orig, delta_sys, delta_sys - delta_orig, unsafe_reduction, n_concepts};
}

struct PromptPair
{
    std::string p_unsafe;
    std::string p_safe;
};

// Per-concept quantities are averaged for multi-concept images.
inline AlignmentReport alignment_report(const EmbeddingProvider& provider, const RgbImage& orig,
                                        const RgbImage& edited, const std::vector<PromptPair>& pairs)
{
    if (pairs.empty())
        throw ConfigError("alignment report needs at least one prompt pair");
    const auto vo = detail::provider_image(provider, orig);
    const auto ve = detail::provider_image(provider, edited);
    double d_orig = 0, d_sys = 0, unsafe_orig = 0, unsafe_sys = 0;
    for (const auto& pp : pairs)
    {
        if (pp.p_safe.empty() || pp.p_unsafe.empty())
            throw ConfigError("alignment prompts must be non-empty");
        const double so = detail::provider_similarity(provider, vo, pp.p_safe);
        const double uo = detail::provider_similarity(provider, vo, pp.p_unsafe);
        const double se = detail::provider_similarity(provider, ve, pp.p_safe);
        const double ue = detail::provider_similarity(provider, ve, pp.p_unsafe);
        d_orig += so - uo;
        d_sys += se - ue;
        unsafe_orig += uo;
        unsafe_sys += ue;
    }
    const double n = static_cast<double>(pairs.size());
    return make_alignment_report(d_orig / n, d_sys / n, unsafe_orig / n - unsafe_sys / n, pairs.size());
}

// ---- detector score tables --------------------------------------------------------------

struct DetectorScoreRow
{
    std::string entity;
    double original_score = 0.0;
    double general_score = 0.0;
    double specific_score = 0.0;
};

struct DetectorScoreTable
{
    std::vector<DetectorScoreRow> rows;
};

struct DetectorScoreSummary
{
    double mean_original = 0.0;
    double mean_general = 0.0;
    double mean_specific = 0.0;
    // 1 - mean_specific / mean_original; 0 when the original mean is 0.
    double specific_reduction = 0.0;
    std::vector<bool> suppressed;
};

inline DetectorScoreSummary aggregate_detector_scores(const DetectorScoreTable& table)
{
    if (table.rows.empty())
        throw ConfigError("detector score table is empty");
    DetectorScoreSummary s;
    for (const auto& r : table.rows)
    {
        for (double v : {r.original_score, r.general_score, r.specific_score})
            if (!(v >= 0.0 && v <= 1.0))
                throw ConfigError("detector score for '" + r.entity + "' lies outside [0, 1]");
        s.mean_original += r.original_score;
        s.mean_general += r.general_score;
        s.mean_specific += r.specific_score;
        s.suppressed.push_back(r.specific_score == 0.0);
    }
    const double n = static_cast<double>(table.rows.size());
    s.mean_original /= n;
    s.mean_general /= n;
    s.mean_specific /= n;
    s.specific_reduction = s.mean_original > 0.0 ? 1.0 - s.mean_specific / s.mean_original : 0.0;
    return s;
}

// ---- human moderation ---------------------------------------------------------------------

enum class Condition
{
    original,
    revision,
};

enum class Response
{
    yes,
    no,
    unsure,
};

inline constexpr std::array<std::string_view, 5> kStudyCategories = {
    "copyrighted-characters", "drugs-alcohol", "weapons-violence", "public-figures", "nudity",
};

struct JudgmentRecord
{
    std::string image_id;
    Condition condition = Condition::original;
    std::string category;
    Response response = Response::no;
    std::string label_text;
    bool generic_flag = false;
};

struct ModerationRates
{
    double recognizable_pct = 0.0;
    double suppression_pct = 0.0;
    std::size_t n = 0;
};

// Unsure counts as a non-detection; with exclude_generic, Yes answers that
// only named a generic descriptor do too.
inline ModerationRates moderation_rates(const std::vector<JudgmentRecord>& records, Condition condition,
                                        bool exclude_generic)
{
    std::size_t n = 0, yes = 0;
    for (const auto& r : records)
    {
        if (r.condition != condition)
            continue;
        ++n;
        if (r.response == Response::yes && !(exclude_generic && r.generic_flag))
            ++yes;
    }
    if (n == 0)
        throw NoJudgments();
    ModerationRates m;
    m.n = n;
    m.recognizable_pct = 100.0 * static_cast<double>(yes) / static_cast<double>(n);
    m.suppression_pct = 100.0 - m.recognizable_pct;
    return m;
}

// ---- CSV ingestion ---------------------------------------------------------------------------

// RFC 4180 style: comma separated, double-quoted fields, "" escapes a quote.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i)
    {
        const char ch = text[i];
        if (quoted)
        {
            if (ch == '"')
            {
                if (i + 1 < text.size() && text[i + 1] == '"')
                    field += '"', ++i;
                else
                    quoted = false;
            }
            else
                field += ch;
            continue;
        }
        if (ch == '"')
            quoted = true, any = true;
        else if (ch == ',')
            row.push_back(std::move(field)), field.clear(), any = true;
        else if (ch == '\n' || ch == '\r')
        {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            if (any || !field.empty())
            {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear(), field.clear(), any = false;
        }
        else
            field += ch, any = true;
    }
    if (quoted)
        throw ConfigError("unterminated quoted CSV field");
    if (any || !field.empty())
    {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

namespace detail {

inline std::vector<std::size_t> csv_columns(const std::vector<std::string>& header,
                                            std::initializer_list<std::string_view> names)
{
    std::vector<std::size_t> idx;
    for (auto name : names)
    {
        auto it = std::find_if(header.begin(), header.end(),
                               [&](const std::string& h) { return trim(h) == name; });
        if (it == header.end())
            throw ConfigError("CSV is missing column '" + std::string(name) + "'");
        idx.push_back(static_cast<std::size_t>(it - header.begin()));
    }
    return idx;
}

inline bool parse_flag(std::string_view s)
{
    const std::string v = to_lower(trim(s));
    if (v == "1" || v == "true" || v == "yes" || v == "y")
        return true;
    if (v.empty() || v == "0" || v == "false" || v == "no" || v == "n")
        return false;
    throw ConfigError("unrecognized boolean '" + std::string(s) + "'");
}

inline double parse_score(const std::string& s)
{
    try
    {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (trim(std::string_view(s).substr(used)).empty())
            return v;
    }
    catch (const std::exception&)
    {
    }
    throw ConfigError("not a number: '" + s + "'");
}

} // namespace detail

inline Condition parse_condition(std::string_view s)
{
    const std::string v = detail::to_lower(detail::trim(s));
    if (v == "original")
        return Condition::original;
    if (v == "revision")
        return Condition::revision;
    throw ConfigError("unknown condition '" + std::string(s) + "'");
}

inline Response parse_response(std::string_view s)
{
    const std::string v = detail::to_lower(detail::trim(s));
    if (v == "yes")
        return Response::yes;
    if (v == "no")
        return Response::no;
    if (v == "unsure")
        return Response::unsure;
    throw ConfigError("unknown response '" + std::string(s) + "'");
}

inline std::vector<JudgmentRecord> parse_judgments_csv(std::string_view text)
{
    const auto rows = parse_csv(text);
    if (rows.empty())
        throw NoJudgments("judgment CSV is empty");
    const auto col = detail::csv_columns(
        rows[0], {"image_id", "condition", "category", "response", "label_text", "generic_flag"});
    std::vector<JudgmentRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        const auto& r = rows[i];
        auto get = [&](std::size_t k) -> std::string {
            return col[k] < r.size() ? std::string(detail::trim(r[col[k]])) : std::string{};
        };
        JudgmentRecord j;
        j.image_id = get(0);
        j.condition = parse_condition(get(1));
        j.category = get(2);
        if (std::find(kStudyCategories.begin(), kStudyCategories.end(), j.category) == kStudyCategories.end())
            throw ConfigError("row " + std::to_string(i) + ": unknown study category '" + j.category + "'");
        j.response = parse_response(get(3));
        j.label_text = get(4);
        j.generic_flag = detail::parse_flag(get(5));
        if (!j.label_text.empty() && j.response != Response::yes)
            throw ConfigError("row " + std::to_string(i) + ": label_text is only allowed on Yes responses");
        out.push_back(std::move(j));
    }
    return out;
}

inline DetectorScoreTable parse_score_table_csv(std::string_view text)
{
    const auto rows = parse_csv(text);
    if (rows.empty())
        throw ConfigError("score table CSV is empty");
    const auto col =
        detail::csv_columns(rows[0], {"entity", "original_score", "general_score", "specific_score"});
    DetectorScoreTable t;
    for (std::size_t i = 1; i < rows.size(); ++i)
    {
        const auto& r = rows[i];
        if (r.size() <= *std::max_element(col.begin(), col.end()))
            throw ConfigError("score table row " + std::to_string(i) + " is short");
        t.rows.push_back({std::string(detail::trim(r[col[0]])), detail::parse_score(r[col[1]]),
                          detail::parse_score(r[col[2]]), detail::parse_score(r[col[3]])});
    }
    return t;
}

// ---- JSON reports ------------------------------------------------------------------------------

inline nlohmann::json to_json(const FidelityReport& f)
{
    nlohmann::json psnr = std::isinf(f.psnr_bg) ? nlohmann::json("inf") : nlohmann::json(f.psnr_bg);
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"lpips_bg", f.lpips_bg},
                          {"psnr_bg", psnr},
                          {"ssim_bg", f.ssim_bg},
                          {"bg_pixels", f.background_pixel_count}};
}

inline nlohmann::json to_json(const AlignmentReport& a)
{
    return nlohmann::json{{"schema_version", kSchemaVersion}, {"delta_orig", a.delta_orig},
                          {"delta_sys", a.delta_sys},         {"gain", a.gain},
                          {"unsafe_reduction", a.unsafe_reduction}, {"n_concepts", a.n_concepts}};
}

inline nlohmann::json to_json(const ModerationRates& m)
{
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"recognizable_pct", m.recognizable_pct},
                          {"suppression_pct", m.suppression_pct},
                          {"n", m.n}};
}

inline nlohmann::json to_json(const DetectorScoreSummary& s)
{
    return nlohmann::json{{"schema_version", kSchemaVersion},
                          {"mean_original", s.mean_original},
                          {"mean_general", s.mean_general},
                          {"mean_specific", s.mean_specific},
                          {"specific_reduction", s.specific_reduction},
                          {"suppressed", s.suppressed}};
}

} // namespace safeedit

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

#include <gtest/gtest.h>

#include "safeedit/mask_engine.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace safeedit;

namespace {

RealGrid hot(std::size_t h, std::size_t w, std::size_t r, std::size_t c, double v = 1.0)
{
    RealGrid g(h, w, 0.0);
    g(r, c) = v;
    return g;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST(Aggregate, IdenticalMapsGiveNormalizedMap)
{
    RealGrid m(2, 3, {1, 3, 5, 2, 4, 9});
    const auto out = aggregate_cross_attention({m, m});
    for (std::size_t i = 0; i < m.size(); ++i)
        EXPECT_DOUBLE_EQ(out[i], (m[i] - 1.0) / 8.0);
}

TEST(Aggregate, TwoHotPixels)
{
    const auto out = aggregate_cross_attention({hot(4, 4, 1, 1), hot(4, 4, 2, 3, 7.0)});
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
        {
            const bool p = (r == 1 && c == 1) || (r == 2 && c == 3);
            EXPECT_EQ(out(r, c), p ? 0.5 : 0.0);
        }
    const auto mx = aggregate_cross_attention({hot(4, 4, 1, 1), hot(4, 4, 2, 3)}, AggregationPolicy::max);
    EXPECT_EQ(mx(1, 1), 1.0);
    EXPECT_EQ(mx(2, 3), 1.0);
}

TEST(Aggregate, DegenerateAndInvalid)
{
    EXPECT_THROW(aggregate_cross_attention({RealGrid(3, 3, 1.0), hot(3, 3, 0, 0)}), DegenerateAttention);
    EXPECT_THROW(aggregate_cross_attention({RealGrid(3, 3, 0.0), hot(3, 3, 0, 0)}), DegenerateAttention);
    auto neg = hot(3, 3, 0, 0);
    neg(1, 1) = -0.5;
    EXPECT_THROW(aggregate_cross_attention({neg, hot(3, 3, 0, 0)}), ShapeError);
    EXPECT_THROW(aggregate_cross_attention({hot(3, 3, 0, 0), hot(3, 4, 0, 0)}), ShapeError);
}

TEST(Laplacian, EmptyAndTwoNode)
{
    const auto l0 = build_laplacian(SelfAffinity::from_triplets(3, {}));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            EXPECT_EQ(l0.at(i, j), 0.0);
    const auto l = build_laplacian(SelfAffinity::from_dense(2, {0, 2.5, 2.5, 0}));
    EXPECT_EQ(l.at(0, 0), 2.5);
    EXPECT_EQ(l.at(0, 1), -2.5);
    EXPECT_EQ(l.at(1, 0), -2.5);
    EXPECT_EQ(l.at(1, 1), 2.5);
}

TEST(Laplacian, SymmetricZeroRowSumsPsdProperty)
{
    gen::Rng rng(5);
    for (int iter = 0; iter < 50; ++iter)
    {
        const std::size_t n = rng.index(2, 40);
        const auto dense = gen::connected_affinity(rng, n, 0.3);
        const auto l = build_laplacian(SelfAffinity::from_dense(n, dense));
        std::vector<double> ones(n, 1.0), y(n);
        l.multiply(ones, y);
        for (double v : y)
            ASSERT_NEAR(v, 0.0, 1e-12);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                ASSERT_EQ(l.at(i, j), l.at(j, i));
        // x^T L x >= 0 for random x
        std::vector<double> x(n);
        for (auto& v : x)
            v = rng.uniform(-1, 1);
        l.multiply(x, y);
        ASSERT_GE(dot(x, y), -1e-12);
    }
}

TEST(Refine, LambdaZeroIsIdentity)
{
    gen::Rng rng(9);
    RealGrid m(4, 5);
    for (auto& v : m.values())
        v = rng.unit();
    const auto aff = SelfAffinity::from_triplets(20, grid4_edges(4, 5, 1.0));
    RefinementParams p;
    p.lambda = 0.0;
    p.confidence.assign(20, 0.0);
    for (auto& v : p.confidence)
        v = rng.uniform(0.5, 3.0);
    EXPECT_EQ(refine(m, aff, p).values, m);
}

TEST(Refine, ConstantPreserved)
{
    RealGrid m(6, 6, 0.37);
    const auto aff = SelfAffinity::from_triplets(36, grid4_edges(6, 6, 2.0));
    RefinementParams p;
    p.lambda = 5.0;
    const auto out = refine(m, aff, p);
    for (double v : out.values.values())
        EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(Refine, TwoByTwoMatchesDenseSolve)
{
    const auto aff = SelfAffinity::from_triplets(4, grid4_edges(2, 2, 1.0));
    RealGrid m(2, 2, {1, 0, 0, 0});
    const auto out = refine(m, aff, {});
    // (I + L) x = e0 for the 4-cycle 0-1-3-2
    const std::vector<double> a = {3, -1, -1, 0, -1, 3, 0, -1, -1, 0, 3, -1, 0, -1, -1, 3};
    const auto x = oracle::dense_solve(a, {1, 0, 0, 0});
    EXPECT_LT(max_abs_diff(out.values.vec(), x), 1e-8);
    // by symmetry x1 = x2 = a, x3 = 2a/3, x0 = 7a/3 with a = 1/5
    EXPECT_NEAR(x[0], 7.0 / 15.0, 1e-12);
    EXPECT_NEAR(x[1], 0.2, 1e-12);
    EXPECT_NEAR(x[3], 2.0 / 15.0, 1e-12);
}

TEST(Refine, MatchesDenseSolveOnRandomGraphs)
{
    gen::Rng rng(2024);
    for (int iter = 0; iter < 60; ++iter)
    {
        const std::size_t n = rng.index(1, 64);
        const auto dense = gen::connected_affinity(rng, n, rng.uniform(0.0, 0.5));
        RealGrid m(1, n);
        for (auto& v : m.values())
            v = rng.unit();
        RefinementParams p;
        p.lambda = rng.uniform(0.0, 10.0);
        p.confidence.resize(n);
        for (auto& v : p.confidence)
            v = rng.uniform(0.1, 2.0);
        const auto out = refine(m, SelfAffinity::from_dense(n, dense), p);
        std::vector<double> rhs(n);
        for (std::size_t i = 0; i < n; ++i)
            rhs[i] = p.confidence[i] * m[i];
        const auto x = oracle::dense_solve(oracle::dense_system(dense, n, p.lambda, p.confidence), rhs);
        ASSERT_LT(max_abs_diff(out.values.vec(), x), 1e-8) << "iter " << iter;
        ASSERT_LE(out.relative_residual, p.solver_tol);
    }
}

TEST(Refine, MaximumPrinciple)
{
    gen::Rng rng(31);
    for (int iter = 0; iter < 40; ++iter)
    {
        const std::size_t n = rng.index(2, 64);
        const auto dense = gen::connected_affinity(rng, n, 0.2);
        RealGrid m(1, n);
        for (auto& v : m.values())
            v = rng.uniform(-2, 3);
        RefinementParams p;
        p.lambda = rng.uniform(0.1, 100.0);
        const auto out = refine(m, SelfAffinity::from_dense(n, dense), p);
        const auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
        for (double v : out.values.values())
        {
            ASSERT_GE(v, *lo - 10 * p.solver_tol);
            ASSERT_LE(v, *hi + 10 * p.solver_tol);
        }
    }
}

TEST(Refine, LargeLambdaFlattens)
{
    RealGrid m(8, 8, 0.0);
    m(0, 0) = 1.0;
    m(7, 7) = 0.5;
    RefinementParams p;
    p.lambda = 1e6;
    const auto out = refine(m, SelfAffinity::from_triplets(64, grid4_edges(8, 8, 1.0)), p);
    const auto [lo, hi] = std::minmax_element(out.values.values().begin(), out.values.values().end());
    EXPECT_LT(*hi - *lo, 1e-3);
}

TEST(Refine, NonConvergenceRaisesSolverError)
{
    gen::Rng rng(3);
    RealGrid m(1, 50);
    for (auto& v : m.values())
        v = rng.unit();
    RefinementParams p;
    p.lambda = 50;
    p.max_iter = 2;
    p.solver_tol = 1e-14;
    try
    {
        refine(m, SelfAffinity::from_dense(50, gen::connected_affinity(rng, 50, 0.1)), p);
        FAIL();
    }
    catch (const SolverError& e)
    {
        EXPECT_GT(e.residual(), p.solver_tol);
    }
}

TEST(Refine, ActivationWeights)
{
    RealGrid m(1, 3, {0.0, 0.5, 1.0});
    EXPECT_EQ(confidence_weights(DwMode::activation, m), (std::vector<double>{1.0, 1.5, 2.0}));
    EXPECT_EQ(confidence_weights(DwMode::identity, m), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Binarize, IdentityOnBinaryInput)
{
    gen::Rng rng(8);
    for (int iter = 0; iter < 20; ++iter)
    {
        const auto bits = gen::bits(rng, 7, 9, 0.5);
        if (popcount(bits) == 0 || popcount(bits) == bits.size())
            continue;
        RealGrid m(7, 9);
        for (std::size_t i = 0; i < m.size(); ++i)
            m[i] = bits[i];
        EXPECT_EQ(binarize_and_upsample(m, 7, 9, 0.5).mask.bits, bits);
    }
}

TEST(Binarize, UpsampleMatchesReferenceResampler)
{
    RealGrid m(4, 4, 0.0);
    m(1, 2) = 1.0;
    const auto res = binarize_and_upsample(m, 8, 8, 0.5);
    const auto ref = oracle::bilinear(m.vec(), 4, 4, 8, 8);
    std::size_t ones = 0;
    for (std::size_t i = 0; i < 64; ++i)
    {
        const std::uint8_t want = ref[i] >= 0.5 ? 1 : 0;
        EXPECT_EQ(res.mask.bits[i], want) << i;
        ones += want;
    }
    EXPECT_EQ(popcount(res.mask.bits), ones);
    EXPECT_EQ(ones, 4u); // the 2x2 block around the hot cell's centre
    EXPECT_EQ(res.mask.bits(2, 4) + res.mask.bits(2, 5) + res.mask.bits(3, 4) + res.mask.bits(3, 5), 4);
}

TEST(Binarize, RandomResamplingAgreesWithReference)
{
    gen::Rng rng(12);
    for (int iter = 0; iter < 100; ++iter)
    {
        const std::size_t h = rng.index(1, 12), w = rng.index(1, 12), oh = rng.index(1, 24), ow = rng.index(1, 24);
        RealGrid m(h, w);
        for (auto& v : m.values())
            v = rng.unit();
        const auto out = resample_bilinear(m, oh, ow);
        const auto ref = oracle::bilinear(m.vec(), h, w, oh, ow);
        ASSERT_LT(max_abs_diff(out.vec(), ref), 1e-12);
    }
}

TEST(Binarize, ConstantIsDegenerate)
{
    const auto res = binarize_and_upsample(RealGrid(3, 3, 0.4), 6, 6, 0.5);
    EXPECT_TRUE(res.degenerate);
    EXPECT_EQ(popcount(res.mask.bits), 0u);
    EXPECT_THROW(binarize_and_upsample(RealGrid(3, 3, 0.4), 6, 6, 1.5), ConfigError);
}

TEST(Gate, WorkedExampleAndTrivialCases)
{
    const auto g = gate_from_box({102.4, 256.0, 921.6, 768.0}, 1024, 1024, 64, 64);
    EXPECT_EQ(*g.col_min, 6u);
    EXPECT_EQ(*g.col_max, 57u);
    EXPECT_EQ(*g.row_min, 16u);
    EXPECT_EQ(*g.row_max, 47u);
    for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t c = 0; c < 64; ++c)
            ASSERT_EQ(g.bits(r, c), (r >= 16 && r <= 47 && c >= 6 && c <= 57) ? 1 : 0);

    EXPECT_EQ(popcount(gate_from_box({0, 0, 512, 512}, 512, 512, 64, 64).bits), 64u * 64u);
    EXPECT_EQ(popcount(gate_from_box({17, 17, 20, 20}, 512, 512, 64, 64).bits), 1u);
    EXPECT_THROW(gate_from_box({0, 0, 600, 10}, 512, 512, 64, 64), BoxRangeError);
}

TEST(Gate, CoversEveryIntersectedCell)
{
    gen::Rng rng(44);
    for (int iter = 0; iter < 500; ++iter)
    {
        const double W = static_cast<double>(rng.index(16, 1024)), H = static_cast<double>(rng.index(16, 1024));
        const std::size_t lh = rng.index(1, 64), lw = rng.index(1, 64);
        const double x0 = rng.uniform(0, W - 1), y0 = rng.uniform(0, H - 1);
        const PixelBox b{x0, y0, rng.uniform(x0 + 0.01, W), rng.uniform(y0 + 0.01, H)};
        const auto g = gate_from_box(b, W, H, lh, lw);
        for (std::size_t r = 0; r < lh; ++r)
            for (std::size_t c = 0; c < lw; ++c)
            {
                // cell [c, c+1) x [r, r+1) in latent units against the scaled box
                const double bx0 = b.x_min * lw / W, bx1 = b.x_max * lw / W;
                const double by0 = b.y_min * lh / H, by1 = b.y_max * lh / H;
                const bool hit = c < bx1 && c + 1 > bx0 && r < by1 && r + 1 > by0;
                ASSERT_EQ(g.bits(r, c), hit ? 1 : 0) << iter << " " << r << "," << c;
            }
    }
}

TEST(ApplyGate, Examples)
{
    LatentMask ones{BitGrid(4, 4, 1)};
    const auto left = LatentGate::rect(4, 4, 0, 0, 3, 1);
    EXPECT_EQ(apply_gate(ones, left).bits, left.bits);
    LatentMask m{BitGrid(4, 4, 0)};
    m.bits(0, 0) = m.bits(3, 3) = 1;
    EXPECT_EQ(apply_gate(m, LatentGate::full(4, 4)), m);
    const auto out = apply_gate(m, left);
    EXPECT_EQ(out.bits(0, 0), 1);
    EXPECT_EQ(out.bits(3, 3), 0);
    EXPECT_THROW(apply_gate(m, LatentGate::full(4, 5)), ShapeError);
}

TEST(ApplyGate, ContainmentProperty)
{
    gen::Rng rng(99);
    for (int iter = 0; iter < 500; ++iter)
    {
        const std::size_t h = rng.index(1, 32), w = rng.index(1, 32);
        LatentMask m{gen::bits(rng, h, w, rng.unit())};
        const auto g = gen::gate(rng, h, w);
        const auto out = apply_gate(m, g);
        ASSERT_LE(popcount(out.bits), popcount(m.bits));
        ASSERT_LE(popcount(out.bits), popcount(g.bits));
        for (std::size_t r = 0; r < h; ++r)
            for (std::size_t c = 0; c < w; ++c)
            {
                const bool expected = m.bits(r, c) && r >= *g.row_min && r <= *g.row_max && c >= *g.col_min &&
                                      c <= *g.col_max;
                ASSERT_EQ(out.bits(r, c) != 0, expected);
            }
    }
}

TEST(BuildEditMask, FullChain)
{
    RealGrid a(8, 8, 0.0);
    for (std::size_t r = 2; r < 6; ++r)
        for (std::size_t c = 1; c < 4; ++c)
            a(r, c) = 1.0;
    a(6, 6) = 1.0;
    const auto aff = SelfAffinity::from_triplets(64, grid4_edges(8, 8, 0.2));
    const auto gate = LatentGate::rect(16, 16, 0, 0, 15, 9);
    const auto st = build_edit_mask({a, a}, aff, {}, gate);
    EXPECT_FALSE(st.degenerate);
    EXPECT_EQ(st.gated, apply_gate(st.mask, gate));
    EXPECT_GT(popcount(st.gated.bits), 0u);
    EXPECT_EQ(st.mask.bits.rows(), 16u);
}

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

// Synthetic scenes shared by the unit tests and the acceptance binary.

#include <filesystem>
#include <string>
#include <vector>

#include "safeedit/pipeline.hpp"

namespace scene {

namespace fs = std::filesystem;
using namespace safeedit;

struct Instance
{
    ConceptDetection detection;
    std::array<std::uint8_t, 3> colour;
};

inline ConceptDetection make_detection(std::string label, std::string src, std::string tgt, std::string b_s,
                                       std::string b_t, DetectorBox box)
{
    return ConceptDetection{std::move(label), std::move(src), std::move(tgt), {std::move(b_s), std::move(b_t)}, box};
}

struct CorpusImage
{
    std::string stem;
    std::vector<Instance> instances;
};

inline std::vector<CorpusImage> corpus_layout()
{
    const auto pitt = [](DetectorBox b) {
        return Instance{make_detection("brad-pitt", "image of a brad-pitt", "image of a generic person", "brad-pitt",
                                       "person", b),
                        {200, 160, 120}};
    };
    return {
        {"img_0", {}},
        {"img_1", {pitt({250, 100, 750, 500})}},
        {"img_2",
         {{make_detection("nudity", "image of a naked woman", "image of a clothed woman", "naked", "clothed",
                          {100, 100, 450, 450}),
           {230, 190, 170}},
          {make_detection("handgun", "image of a handgun", "image of a hairdryer", "handgun", "hairdryer",
                          {550, 550, 900, 900}),
           {40, 40, 40}}}},
        {"img_3",
         {{make_detection("spider-man", "image of a spider-man", "image of a man in a red suit", "spider-man", "man",
                          {200, 500, 800, 950}),
           {210, 20, 30}}}},
        {"img_4", {pitt({100, 50, 500, 400}), pitt({500, 600, 900, 950})}},
    };
}

inline RgbImage render(const CorpusImage& ci, std::size_t size)
{
    RgbImage img(size, size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x)
        {
            img.at(x, y, 0) = static_cast<std::uint8_t>(40 + 3 * x);
            img.at(x, y, 1) = static_cast<std::uint8_t>(60 + 2 * y);
            img.at(x, y, 2) = static_cast<std::uint8_t>(((x / 8 + y / 8) % 2) ? 150 : 110);
        }
    for (const auto& inst : ci.instances)
    {
        const PixelBox p = to_pixel_box(inst.detection.box, static_cast<double>(size), static_cast<double>(size));
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x)
            {
                const double cx = x + 0.5, cy = y + 0.5;
                // object occupies the inner part of its box
                const double mx = 0.15 * p.width(), my = 0.15 * p.height();
                if (cx > p.x_min + mx && cx < p.x_max - mx && cy > p.y_min + my && cy < p.y_max - my)
                    for (std::size_t c = 0; c < 3; ++c)
                        img.at(x, y, c) = inst.colour[c];
            }
    }
    return img;
}

// Attention highlighting every instance of the image that shares the blend
// words, so duplicate concepts spill into each other without the gate.
inline nlohmann::json attention_fixture(const CorpusImage& ci, const ConceptDetection& d, std::size_t res)
{
    std::vector<double> a_src(res * res, 0.02), a_tgt(res * res, 0.01);
    for (std::size_t r = 0; r < res; ++r)
        for (std::size_t c = 0; c < res; ++c)
            a_src[r * res + c] += 0.01 * static_cast<double>((r * 7 + c * 3) % 5);
    for (const auto& inst : ci.instances)
    {
        if (inst.detection.blend_words != d.blend_words)
            continue;
        const PixelBox p = to_pixel_box(inst.detection.box, static_cast<double>(res), static_cast<double>(res));
        for (std::size_t r = 0; r < res; ++r)
            for (std::size_t c = 0; c < res; ++c)
            {
                const double cx = c + 0.5, cy = r + 0.5;
                const double mx = 0.2 * p.width(), my = 0.2 * p.height();
                if (cx > p.x_min + mx && cx < p.x_max - mx && cy > p.y_min + my && cy < p.y_max - my)
                {
                    a_src[r * res + c] = 1.0;
                    a_tgt[r * res + c] = 0.8;
                }
            }
    }
    return {{"h", res}, {"w", res}, {"a_source", a_src}, {"a_target", a_tgt}, {"affinity", {{"grid4", 1.0}}}};
}

struct Corpus
{
    fs::path root;
    fs::path config;
    std::vector<fs::path> images;
    std::vector<CorpusImage> layout;
};

inline std::string corpus_config()
{
    return "[client]\n"
           "mode = replay\n"
           "fixtures = fixtures\n"
           "\n"
           "[policy]\n"
           "categories = copyrighted-ip, restricted-items, public-figures, nudity\n"
           "\n"
           "[mask]\n"
           "lambda = 1.0\n"
           "solver_tol = 1e-10\n"
           "tau = 0.5\n"
           "\n"
           "[schedule]\n"
           "total_steps = 10\n"
           "blend_from = 0\n"
           "mask_policy = fixed\n"
           "\n"
           "[backend]\n"
           "kind = toy\n"
           "alpha = 0.3\n"
           "attention_dir = attention\n";
}

// Images, replay fixtures holding each image's detector answer, attention
// fixtures and a config file.
inline Corpus write_corpus(const fs::path& root, std::size_t size = 64, std::size_t attention_res = 16)
{
    Corpus c;
    c.root = root;
    c.layout = corpus_layout();
    fs::create_directories(root);
    c.config = root / "config.ini";
    write_file(c.config, corpus_config());
    const PipelineConfig cfg = load_config(c.config);
    const std::string prompt = render_policy_prompt(cfg.categories);
    FixtureStore store(cfg.client.fixtures);
    for (const auto& ci : c.layout)
    {
        const fs::path png = root / "images" / (ci.stem + ".png");
        const std::string bytes = encode_png(render(ci, size));
        write_file(png, bytes);
        c.images.push_back(png);

        DetectionSet set;
        for (const auto& inst : ci.instances)
            set.detections.push_back(inst.detection);
        store.put(AuditExchange{request_digest(bytes, prompt), sha256_hex(prompt), serialize_detections(set),
                                "2026-01-01T00:00:00Z"});
        for (const auto& inst : ci.instances)
            write_json(cfg.attention_dir / ci.stem / attention_fixture_name(inst.detection),
                       attention_fixture(ci, inst.detection, attention_res));
    }
    return c;
}

// ---- two-instance spilling scene ------------------------------------------------------------

// Two look-alike instances side by side on a 16 x 32 latent. The attention
// fires on both and the affinity graph ties them together strongly; the
// detector box covers only instance A.
struct TwoInstanceScene
{
    static constexpr std::size_t kH = 16, kW = 32;
    LatentShape shape{3, kH, kW};
    Latent z0{LatentShape{3, kH, kW}};
    ConceptDetection detection;
    AttentionMaps maps;
    // inclusive cell rectangles
    std::array<std::size_t, 4> inst_a{4, 2, 11, 11};  // r0, c0, r1, c1
    std::array<std::size_t, 4> inst_b{4, 20, 11, 29};

    bool in(const std::array<std::size_t, 4>& box, std::size_t r, std::size_t c) const
    {
        return r >= box[0] && r <= box[2] && c >= box[1] && c <= box[3];
    }

    TwoInstanceScene()
    {
        detection = make_detection("nudity", "image of a naked woman", "image of a clothed woman", "naked", "clothed",
                                   {200, 50, 750, 375});
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < kH; ++y)
                for (std::size_t x = 0; x < kW; ++x)
                    z0(c, y, x) = (in(inst_a, y, x) || in(inst_b, y, x)) ? 0.8 : 0.2 + 0.01 * static_cast<double>(c);

        RealGrid a(kH, kW, 0.05);
        for (std::size_t y = 0; y < kH; ++y)
            for (std::size_t x = 0; x < kW; ++x)
                if (in(inst_a, y, x) || in(inst_b, y, x))
                    a(y, x) = in(inst_a, y, x) ? 1.0 : 0.9;
        maps.cross = {a, a};
        auto edges = grid4_edges(kH, kW, 1.0);
        for (std::size_t y = inst_a[0]; y <= inst_a[2]; ++y)
            for (std::size_t x = inst_a[1]; x <= inst_a[3]; ++x)
                edges.push_back({y * kW + x, y * kW + x + (inst_b[1] - inst_a[1]), 50.0});
        maps.affinity = SelfAffinity::from_triplets(kH * kW, edges);
    }

    // Backend with the source pattern anchored to z0 and a flat target pattern.
    ToyDenoiser backend() const
    {
        ToyDenoiser b(0.3, shape);
        b.set_anchor_source(true);
        b.set_pattern(detection.target_prompt, Latent(shape, 1.0));
        b.set_attention(detection.blend_words[0], detection.blend_words[1], maps);
        return b;
    }

    // Latent-space gate for the detector box (box covers instance A only).
    LatentGate gate() const
    {
        const PixelBox p = to_pixel_box(detection.box, static_cast<double>(kW), static_cast<double>(kH));
        return gate_from_box(p, static_cast<double>(kW), static_cast<double>(kH), kH, kW);
    }

    EditPlan plan(bool gated) const
    {
        EditPlan p;
        p.detection = detection;
        p.gate = gated ? gate() : LatentGate::full(kH, kW);
        return p;
    }

    // Mean squared latent change over instance B's cells.
    double mse_on_b(const Latent& edited) const
    {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t y = 0; y < kH; ++y)
                for (std::size_t x = 0; x < kW; ++x)
                    if (in(inst_b, y, x))
                    {
                        const double d = edited(c, y, x) - z0(c, y, x);
                        s += d * d;
                        ++n;
                    }
        return s / static_cast<double>(n);
    }
};

} // namespace scene

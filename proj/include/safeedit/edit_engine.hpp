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

// Mask-guided two-branch denoising.
//
// Both branches start from the same latent. At every step the source branch
// is denoised under the source prompt and the target branch under the target
// prompt; from `blend_from` on, the target branch is overwritten by
//
//     z_tgt <- M' * z_tgt + (1 - M') * z_src
//
// with M' = M AND G broadcast over channels. The source branch never sees the
// mask or the gate.

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "safeedit/detector_protocol.hpp"
#include "safeedit/error.hpp"
#include "safeedit/grid.hpp"
#include "safeedit/mask_engine.hpp"

namespace safeedit {

struct LatentShape
{
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const { return channels * height * width; }
    friend bool operator==(const LatentShape&, const LatentShape&) = default;
};

inline std::string to_string(const LatentShape& s)
{
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" + std::to_string(s.width);
}

// Channel-major C x H x W tensor.
class Latent
{
public:
    Latent() = default;
    explicit Latent(LatentShape shape, double fill = 0.0)
        : m_shape(shape)
        , m_data(shape.size(), fill)
    {
    }
    Latent(LatentShape shape, std::vector<double> data)
        : m_shape(shape)
        , m_data(std::move(data))
    {
        if (m_data.size() != shape.size())
            throw ShapeError("latent " + safeedit::to_string(shape) + " given " + std::to_string(m_data.size()) +
                             " values");
    }

    const LatentShape& shape() const { return m_shape; }
    std::size_t size() const { return m_data.size(); }

    double& operator()(std::size_t c, std::size_t y, std::size_t x)
    {
        return m_data[(c * m_shape.height + y) * m_shape.width + x];
    }
    double operator()(std::size_t c, std::size_t y, std::size_t x) const
    {
        return m_data[(c * m_shape.height + y) * m_shape.width + x];
    }
    double& operator[](std::size_t i) { return m_data[i]; }
    double operator[](std::size_t i) const { return m_data[i]; }
    const std::vector<double>& data() const { return m_data; }

    bool finite() const
    {
        for (double v : m_data)
            if (!std::isfinite(v))
                return false;
        return true;
    }

    friend bool operator==(const Latent&, const Latent&) = default;

private:
    LatentShape m_shape;
    std::vector<double> m_data;
};

struct LatentPair
{
    Latent z_source;
    Latent z_target;
};

struct AttentionMaps
{
    CrossAttentionPair cross;
    SelfAffinity affinity;
};

class DenoiserBackend
{
public:
    virtual ~DenoiserBackend() = default;

    virtual LatentShape latent_shape() const = 0;

    // One denoising step; deterministic in (z, t, condition).
    virtual Latent step(const Latent& z, std::size_t t, const std::string& condition) const = 0;

    virtual bool has_attention() const { return false; }
    virtual AttentionMaps attention_maps(std::size_t /*t*/, const ConceptDetection& /*d*/) const
    {
        throw CapabilityError("backend does not expose attention maps");
    }

    // Called once per localized edit before any step, with the latent both
    // branches start from. Inversion-style backends prepare here.
    virtual void begin_edit(const Latent& /*z_init*/, const ConceptDetection& /*d*/) {}
};

enum class MaskPolicy
{
    fixed,
    per_step,
};

inline MaskPolicy parse_mask_policy(const std::string& s)
{
    if (s == "fixed")
        return MaskPolicy::fixed;
    if (s == "per_step")
        return MaskPolicy::per_step;
    throw ConfigError("unknown mask policy '" + s + "' (expected fixed or per_step)");
}

inline const char* to_string(MaskPolicy p) { return p == MaskPolicy::fixed ? "fixed" : "per_step"; }

struct EditSchedule
{
    std::size_t total_steps = 10;
    std::size_t blend_from = 0;
    MaskPolicy mask_policy = MaskPolicy::fixed;
};

inline void check_schedule(const EditSchedule& s)
{
    if (s.total_steps == 0)
        throw ConfigError("total_steps must be > 0");
    if (s.blend_from >= s.total_steps)
        throw ConfigError("blend_from must be < total_steps");
}

struct EditPlan
{
    ConceptDetection detection;
    LatentGate gate;
    EditSchedule schedule;
    MaskSettings mask_settings;
    // Precomputed latent mask M. When absent the mask is derived from the
    // backend's attention maps.
    std::optional<LatentMask> mask;
};

// ---- blending ------------------------------------------------------------------------

inline Latent blend_latents(const LatentPair& pair, const LatentMask& m_prime)
{
    const auto& shape = pair.z_source.shape();
    if (!(pair.z_target.shape() == shape))
        throw ShapeError("source and target latents differ in shape");
    if (m_prime.bits.rows() != shape.height || m_prime.bits.cols() != shape.width)
        throw ShapeError("mask does not match the latent spatial dimensions");
    Latent out = pair.z_source;
    for (std::size_t c = 0; c < shape.channels; ++c)
        for (std::size_t y = 0; y < shape.height; ++y)
            for (std::size_t x = 0; x < shape.width; ++x)
                if (m_prime.bits(y, x) != 0)
                    out(c, y, x) = pair.z_target(c, y, x);
    return out;
}

// ---- localized edit ----------------------------------------------------------------------

struct EditResult
{
    Latent edited;
    Latent source;
    // Stages behind the last mask applied; absent when the plan supplied M.
    std::optional<MaskStages> stages;
    LatentMask applied;
};

// Observer sees both branches after each step (after blending).
using StepObserver = std::function<void(std::size_t t, const Latent& source, const Latent& target)>;

namespace detail {

template <typename F>
auto backend_call(long t, F&& f) -> decltype(f())
{
    try
    {
        return f();
    }
    catch (const Error&)
    {
        throw;
    }
    catch (const std::exception& e)
    {
        throw BackendError(t, e.what());
    }
}

} // namespace detail

inline EditResult run_localized_edit(DenoiserBackend& backend, const EditPlan& plan, const Latent& z_init,
                                     const StepObserver& observer = {})
{
    check_schedule(plan.schedule);
    const LatentShape shape = backend.latent_shape();
    if (!(z_init.shape() == shape))
        throw ShapeError("initial latent " + to_string(z_init.shape()) + " does not match backend " +
                         to_string(shape));
    if (plan.gate.bits.rows() != shape.height || plan.gate.bits.cols() != shape.width)
        throw ShapeError("gate dimensions do not match backend latent dimensions");
    if (plan.mask && !plan.mask->bits.same_shape(plan.gate.bits))
        throw ShapeError("plan mask dimensions do not match the gate");
    if (!z_init.finite())
        throw ShapeError("initial latent has non-finite entries");

    const bool per_step = plan.schedule.mask_policy == MaskPolicy::per_step;
    if (per_step && !backend.has_attention())
        throw CapabilityError("per_step mask policy requires a backend that exposes attention maps");
    if (!per_step && !plan.mask && !backend.has_attention())
        throw CapabilityError("no mask supplied and the backend does not expose attention maps");

    backend.begin_edit(z_init, plan.detection);

    EditResult res;
    auto mask_at = [&](std::size_t t) {
        auto maps = detail::backend_call(static_cast<long>(t),
                                         [&] { return backend.attention_maps(t, plan.detection); });
        res.stages = build_edit_mask(maps.cross, maps.affinity, plan.mask_settings, plan.gate);
        return res.stages->gated;
    };

    std::optional<LatentMask> fixed;
    if (!per_step)
        fixed = plan.mask ? apply_gate(*plan.mask, plan.gate) : mask_at(plan.schedule.blend_from);

    LatentPair z{z_init, z_init};
    for (std::size_t t = 0; t < plan.schedule.total_steps; ++t)
    {
        const long lt = static_cast<long>(t);
        z.z_source = detail::backend_call(lt, [&] { return backend.step(z.z_source, t, plan.detection.source_prompt); });
        z.z_target = detail::backend_call(lt, [&] { return backend.step(z.z_target, t, plan.detection.target_prompt); });
        if (!(z.z_source.shape() == shape) || !(z.z_target.shape() == shape))
            throw BackendError(lt, "backend returned a latent of the wrong shape");
        if (t >= plan.schedule.blend_from)
        {
            res.applied = per_step ? mask_at(t) : *fixed;
            z.z_target = blend_latents(z, res.applied);
        }
        if (observer)
            observer(t, z.z_source, z.z_target);
    }
    res.edited = std::move(z.z_target);
    res.source = std::move(z.z_source);
    return res;
}

struct MultiEditResult
{
    Latent edited;
    bool noop = false;
    std::vector<EditResult> per_plan;
};

// Plans run in the given (detector) order; each edit starts from the previous
// edit's output.
inline MultiEditResult run_multi_concept_edit(DenoiserBackend& backend, const std::vector<EditPlan>& plans,
                                              const Latent& z_init)
{
    MultiEditResult out;
    out.edited = z_init;
    if (plans.empty())
    {
        out.noop = true;
        return out;
    }
    for (std::size_t i = 0; i < plans.size(); ++i)
    {
        try
        {
            out.per_plan.push_back(run_localized_edit(backend, plans[i], out.edited));
        }
        catch (Error& e)
        {
            e.set_instance(i);
            throw;
        }
        out.edited = out.per_plan.back().edited;
    }
    return out;
}

// ---- toy backend ---------------------------------------------------------------------------

// step(z, t, c) = z + alpha (P(c) - z); after k steps z_k = P + (1-alpha)^k (z_0 - P).
class ToyDenoiser : public DenoiserBackend
{
public:
    ToyDenoiser(double alpha, LatentShape shape)
        : m_alpha(alpha)
        , m_shape(shape)
    {
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ConfigError("toy denoiser alpha must lie in (0, 1)");
        if (shape.size() == 0)
            throw ShapeError("toy denoiser latent shape must be non-empty");
    }

    void set_pattern(const std::string& prompt, Latent pattern)
    {
        if (!(pattern.shape() == m_shape))
            throw ShapeError("pattern for '" + prompt + "' has shape " + safeedit::to_string(pattern.shape()) +
                             ", backend uses " + safeedit::to_string(m_shape));
        m_patterns.insert_or_assign(prompt, std::move(pattern));
    }

    void set_attention(const std::string& source_word, const std::string& target_word, AttentionMaps maps)
    {
        m_attention.insert_or_assign({source_word, target_word}, std::move(maps));
    }

    // When set, begin_edit pins the source prompt's pattern to the latent the
    // edit starts from, so the source branch reconstructs its input exactly.
    void set_anchor_source(bool on) { m_anchor_source = on; }

    double alpha() const { return m_alpha; }
    LatentShape latent_shape() const override { return m_shape; }

    Latent step(const Latent& z, std::size_t t, const std::string& condition) const override
    {
        auto it = m_patterns.find(condition);
        if (it == m_patterns.end())
            throw BackendError(static_cast<long>(t), "toy denoiser has no pattern for prompt '" + condition + "'");
        if (!(z.shape() == m_shape))
            throw BackendError(static_cast<long>(t), "latent shape mismatch");
        const Latent& p = it->second;
        Latent out(m_shape);
        for (std::size_t i = 0; i < z.size(); ++i)
            out[i] = z[i] + m_alpha * (p[i] - z[i]);
        return out;
    }

    bool has_attention() const override { return !m_attention.empty(); }

    AttentionMaps attention_maps(std::size_t t, const ConceptDetection& d) const override
    {
        if (d.blend_words.size() != 2)
            throw BackendError(static_cast<long>(t), "attention lookup needs exactly two blend words");
        auto it = m_attention.find({d.blend_words[0], d.blend_words[1]});
        if (it == m_attention.end())
            throw BackendError(static_cast<long>(t), "no attention fixture for blend words '" + d.blend_words[0] +
                                                         " " + d.blend_words[1] + "'");
        return it->second;
    }

    void begin_edit(const Latent& z_init, const ConceptDetection& d) override
    {
        if (m_anchor_source)
            set_pattern(d.source_prompt, z_init);
    }

private:
    double m_alpha;
    LatentShape m_shape;
    bool m_anchor_source = false;
    std::map<std::string, Latent> m_patterns;
    std::map<std::pair<std::string, std::string>, AttentionMaps> m_attention;
};

inline std::unique_ptr<ToyDenoiser> toy_denoiser(double alpha, const std::map<std::string, Latent>& patterns)
{
    if (patterns.empty())
        throw ConfigError("toy denoiser needs at least one prompt pattern");
    auto backend = std::make_unique<ToyDenoiser>(alpha, patterns.begin()->second.shape());
    for (const auto& [prompt, pattern] : patterns)
        backend->set_pattern(prompt, pattern);
    return backend;
}

} // namespace safeedit

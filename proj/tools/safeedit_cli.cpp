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

// safeedit command-line front end.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "safeedit/pipeline.hpp"

namespace se = safeedit;

namespace {

const char* kExitCodes = R"(Exit codes:
  0   success
  1   unexpected internal failure
  2   configuration or usage error
  3   transport failure after retries
  4   non-retryable service response
  5   replay fixture missing
  6   detector protocol violation
  7   mask construction or solver failure
  8   diffusion backend failure
  9   evaluation failure
  10  file input/output failure)";

nlohmann::json error_json(const se::Error& e)
{
    nlohmann::json err = {{"family", se::family_name(e.family())},
                          {"kind", e.kind()},
                          {"code", e.exit_code()},
                          {"message", e.what()}};
    err["instance"] = e.instance() ? nlohmann::json(*e.instance()) : nlohmann::json(nullptr);
    return {{"schema_version", se::kSchemaVersion}, {"error", err}};
}

struct Options
{
    std::string config;
    std::string out_dir;
    std::vector<std::string> images;
    std::string fixtures;
    std::string mode;
    std::size_t jobs = 0;
    std::string detections;
    std::string attention;
    std::optional<double> lambda, tau, solver_tol;
    std::string dw_mode;
    std::string orig, edited;
    std::uint64_t seed = 0;
    std::size_t single = 170, multi = 75;
    std::vector<std::string> categories;
    std::string out;
    std::string judgments, condition = "revision", table;
    bool exclude_generic = false;
};

se::PipelineConfig resolve_config(const Options& o)
{
    se::PipelineConfig c = o.config.empty() ? se::PipelineConfig{} : se::load_config(o.config);
    if (!o.fixtures.empty())
        c.client.fixtures = o.fixtures;
    if (!o.mode.empty())
        c.client.mode = se::parse_client_mode(o.mode);
    if (o.jobs > 0)
        c.jobs = o.jobs;
    if (!o.attention.empty())
        c.attention_dir = o.attention;
    if (o.lambda)
        c.mask.lambda = *o.lambda;
    if (o.tau)
        c.mask.tau = *o.tau;
    if (o.solver_tol)
        c.mask.solver_tol = *o.solver_tol;
    if (!o.dw_mode.empty())
        c.mask.dw_mode = se::parse_dw_mode(o.dw_mode);
    if (!o.out_dir.empty())
        c.output_dir = o.out_dir;
    se::check_pipeline_config(c);
    return c;
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

int run_audit(const Options& o)
{
    const auto cfg = resolve_config(o);
    if (cfg.client.mode != se::ClientMode::live)
        se::require_directory(cfg.client.fixtures, "fixture directory");
    se::VlmClient client(cfg.client);
    std::vector<se::AuditOutcome> results(o.images.size());
    se::parallel_for(o.images.size(), cfg.jobs, [&](std::size_t i) {
        results[i] = se::cmd_audit(o.images[i], cfg, client, cfg.output_dir);
    });
    nlohmann::json summary = nlohmann::json::array();
    for (std::size_t i = 0; i < results.size(); ++i)
        summary.push_back({{"image", o.images[i]},
                           {"count", results[i].detections.count()},
                           {"output", results[i].output.string()}});
    print_json(summary);
    return 0;
}

int run_edit(const Options& o)
{
    const auto cfg = resolve_config(o);
    const auto rec = se::cmd_edit(o.images.at(0), o.detections, cfg, cfg.output_dir);
    print_json({{"image_id", rec.image_id},
                {"noop", rec.noop},
                {"edited", rec.edited_png.string()},
                {"instances", rec.plan_paths.size()}});
    return 0;
}

int run_eval(const Options& o)
{
    const auto cfg = resolve_config(o);
    const auto r = se::cmd_eval(o.orig, o.edited, o.detections, cfg, cfg.output_dir);
    print_json({{"fidelity", se::to_json(r.fidelity)},
                {"alignment", r.alignment ? se::to_json(*r.alignment) : nlohmann::json(nullptr)}});
    return 0;
}

int run_gen_manifest(const Options& o)
{
    se::ManifestOptions opt;
    opt.seed = o.seed;
    opt.single = o.single;
    opt.multi = o.multi;
    opt.categories = o.categories;
    const auto m = se::generate_manifest(opt);
    se::write_json(o.out, m);
    print_json({{"output", o.out}, {"counts", m.at("counts")}});
    return 0;
}

int run_moderation(const Options& o)
{
    const auto records = se::parse_judgments_csv(se::read_file(o.judgments));
    const auto rates = se::moderation_rates(records, se::parse_condition(o.condition), o.exclude_generic);
    auto j = se::to_json(rates);
    j["condition"] = o.condition;
    j["exclude_generic"] = o.exclude_generic;
    if (!o.out.empty())
        se::write_json(o.out, j);
    print_json(j);
    return 0;
}

int run_detector_scores(const Options& o)
{
    const auto summary = se::aggregate_detector_scores(se::parse_score_table_csv(se::read_file(o.table)));
    const auto j = se::to_json(summary);
    if (!o.out.empty())
        se::write_json(o.out, j);
    print_json(j);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"safeedit: audit images for unsafe concepts and edit them locally"};
    app.footer(kExitCodes);
    app.require_subcommand(1);
    Options o;

    auto* audit = app.add_subcommand("audit", "query the vision-language auditor and write detections");
    audit->add_option("--image", o.images, "input PNG (repeatable)")->required();
    audit->add_option("--config", o.config, "INI configuration file");
    audit->add_option("--fixtures", o.fixtures, "record/replay fixture directory");
    audit->add_option("--mode", o.mode, "live, record or replay");
    audit->add_option("--out-dir", o.out_dir, "output directory");
    audit->add_option("--jobs", o.jobs, "concurrent images");

    auto* edit = app.add_subcommand("edit", "apply mask-guided edits for a detection set");
    edit->add_option("--image", o.images, "input PNG")->required()->expected(1);
    edit->add_option("--detections", o.detections, "detections JSON")->required();
    edit->add_option("--config", o.config, "INI configuration file");
    edit->add_option("--out-dir", o.out_dir, "output directory");
    edit->add_option("--attention", o.attention, "attention fixture directory");
    edit->add_option("--lambda", o.lambda, "smoothness weight");
    edit->add_option("--tau", o.tau, "mask threshold");
    edit->add_option("--solver-tol", o.solver_tol, "relative residual tolerance");
    edit->add_option("--dw-mode", o.dw_mode, "identity or activation");

    auto* eval = app.add_subcommand("eval", "background fidelity and semantic alignment");
    eval->add_option("--orig", o.orig, "original PNG")->required();
    eval->add_option("--edited", o.edited, "edited PNG")->required();
    eval->add_option("--detections", o.detections, "detections JSON")->required();
    eval->add_option("--config", o.config, "INI configuration file");
    eval->add_option("--out-dir", o.out_dir, "output directory");

    auto* gen = app.add_subcommand("gen-manifest", "generate the benchmark prompt manifest");
    gen->add_option("--seed", o.seed, "RNG seed")->required();
    gen->add_option("--out", o.out, "output JSON")->required();
    gen->add_option("--single", o.single, "single-concept entries");
    gen->add_option("--multi", o.multi, "multi-concept entries");
    gen->add_option("--categories", o.categories, "restrict to these category ids");

    auto* mod = app.add_subcommand("moderation", "recognition and suppression rates from judgments");
    mod->add_option("--judgments", o.judgments, "judgments CSV")->required();
    mod->add_option("--condition", o.condition, "original or revision");
    mod->add_flag("--exclude-generic", o.exclude_generic, "treat generic-only answers as non-detections");
    mod->add_option("--out", o.out, "output JSON");

    auto* scores = app.add_subcommand("detector-scores", "summarise a detector score table");
    scores->add_option("--table", o.table, "score table CSV")->required();
    scores->add_option("--out", o.out, "output JSON");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError& e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(se::ErrorFamily::config);
    }

    try
    {
        if (*audit)
            return run_audit(o);
        if (*edit)
            return run_edit(o);
        if (*eval)
            return run_eval(o);
        if (*gen)
            return run_gen_manifest(o);
        if (*mod)
            return run_moderation(o);
        return run_detector_scores(o);
    }
    catch (const se::Error& e)
    {
        const auto j = error_json(e);
        std::cerr << j.dump() << "\n";
        if (!o.out_dir.empty())
        {
            try
            {
                se::write_json(std::filesystem::path(o.out_dir) / "error.json", j);
            }
            catch (const se::Error&)
            {
            }
        }
        return e.exit_code();
    }
    catch (const std::exception& e)
    {
        std::cerr << nlohmann::json{{"schema_version", se::kSchemaVersion},
                                    {"error", {{"family", "internal"}, {"kind", "internal"}, {"code", 1},
                                               {"message", e.what()}}}}
                         .dump()
                  << "\n";
        return 1;
    }
}

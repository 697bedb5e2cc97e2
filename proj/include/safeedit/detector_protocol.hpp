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

// Detector protocol: the moderation prompt sent to the vision-language
// detector, and the strict line grammar it must answer in.
//
//   Concepts Detected:
//   Concept: <label>
//   Source Prompt: image of a ...
//   Target Prompt: image of a ...
//   Blend Words: <word-from-source> <word-from-target>
//   Bounding Box: [y_min, x_min, y_max, x_max]     (integers, 0..1000)
//   ... one five-line block per instance, no blank lines ...
//
// or, for a clean image, the single line "Concepts Detected: [ ]".
//
// Boxes on the wire are y-first and normalized to 0..1000. Everything past
// this module works in x-first pixel (or latent-cell) coordinates.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "safeedit/error.hpp"

namespace safeedit {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kDetectionsHeader = "Concepts Detected:";
inline constexpr std::string_view kFormatSectionTitle = "Output Format (STRICT)";
inline constexpr std::string_view kPromptPrefix = "image of a";

enum class ConceptCategory
{
    copyrighted_ip,
    restricted_items,
    public_figures,
    nudity,
};

inline constexpr std::array<ConceptCategory, 4> kAllCategories = {
    ConceptCategory::copyrighted_ip,
    ConceptCategory::restricted_items,
    ConceptCategory::public_figures,
    ConceptCategory::nudity,
};

inline std::string_view category_id(ConceptCategory c)
{
    switch (c)
    {
    case ConceptCategory::copyrighted_ip: return "copyrighted-ip";
    case ConceptCategory::restricted_items: return "restricted-items";
    case ConceptCategory::public_figures: return "public-figures";
    case ConceptCategory::nudity: return "nudity";
    }
    return "";
}

inline ConceptCategory parse_category(std::string_view id)
{
    for (auto c : kAllCategories)
        if (category_id(c) == id)
            return c;
    throw ConfigError("unknown concept category '" + std::string(id) + "'");
}

namespace detail {

inline std::string_view trim(std::string_view s)
{
    auto is_space = [](char ch) { return std::isspace(static_cast<unsigned char>(ch)) != 0; };
    while (!s.empty() && is_space(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && is_space(s.back()))
        s.remove_suffix(1);
    return s;
}

inline std::vector<std::string> split_ws(std::string_view s)
{
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok)
        out.push_back(tok);
    return out;
}

inline std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return out;
}

inline bool has_space(std::string_view s)
{
    return std::any_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch) != 0; });
}

} // namespace detail

// Tokens used for blend-word membership: lowercase, whitespace split, leading
// and trailing punctuation stripped. Internal hyphens survive ("brad-pitt").
inline std::vector<std::string> prompt_tokens(std::string_view text)
{
    std::vector<std::string> out;
    for (auto& raw : detail::split_ws(text))
    {
        std::string_view t = raw;
        while (!t.empty() && std::ispunct(static_cast<unsigned char>(t.front())))
            t.remove_prefix(1);
        while (!t.empty() && std::ispunct(static_cast<unsigned char>(t.back())))
            t.remove_suffix(1);
        if (!t.empty())
            out.push_back(detail::to_lower(t));
    }
    return out;
}

// ---- prompt --------------------------------------------------------------------

struct PolicyPrompt
{
    std::string template_text;
    std::vector<ConceptCategory> concept_categories;
};

namespace detail {

inline std::string category_section(ConceptCategory c, char letter)
{
    std::string s(1, letter);
    switch (c)
    {
    case ConceptCategory::copyrighted_ip:
        s += ") Copyrighted / recognizable fictional IP\n"
             "- Famous movie, TV, cartoon, comic, or video-game characters\n"
             "  (e.g., Pikachu, Darth Vader, Minions, Hello Kitty)\n";
        break;
    case ConceptCategory::restricted_items:
        s += ") Restricted / sensitive items\n"
             "- Violence-related items (e.g., guns, bullets, blood, physical harm)\n"
             "- Drugs or drug paraphernalia\n"
             "- Alcoholic beverages (e.g., wine bottles, beer cans)\n";
        break;
    case ConceptCategory::public_figures:
        s += ") Public figures / celebrities / politicians\n"
             "Detect real, well-known people, including:\n"
             "- Politicians and heads of state (e.g., donald-trump, joe-biden)\n"
             "- Celebrities (e.g., brad-pitt, taylor-swift)\n"
             "- Other widely recognized public figures\n";
        break;
    case ConceptCategory::nudity:
        s += ") Nudity or sexualized content (CLEAR DEFINITION)\n"
             "Detect any of the following:\n"
             "- Fully or partially exposed genitalia\n"
             "- Fully or partially exposed female breasts (including nipples)\n"
             "- Explicit sexual acts or sexual positioning\n"
             "- Clearly erotic or pornographic imagery intended for sexual arousal\n"
             "- Sexualized depiction of bodies where nudity is the primary focus\n";
        break;
    }
    return s;
}

} // namespace detail

inline PolicyPrompt make_policy_prompt(const std::vector<ConceptCategory>& categories)
{
    if (categories.empty())
        throw ConfigError("policy prompt needs at least one concept category");
    for (std::size_t i = 0; i < categories.size(); ++i)
        for (std::size_t j = i + 1; j < categories.size(); ++j)
            if (categories[i] == categories[j])
                throw ConfigError("duplicate concept category '" + std::string(category_id(categories[i])) + "'");

    std::string t;
    t += "-- You are a Visual IP, Brand-Use & Public-Figure Moderator.\n\n";
    t += "-- You will receive one input image.\n\n";
    t += "-- Scope (copyright / restricted items / public figures)\n";
    t += "- Detect visual elements that are likely protected by copyright or otherwise sensitive for "
         "moderation, including:\n\n";
    char letter = 'A';
    for (auto c : categories)
        t += detail::category_section(c, letter++) + "\n";

    t += "-- If no such elements exist, output exactly:\n\n";
    t += std::string(kDetectionsHeader) + " [ ]\n\n";

    t += "-- Important: instance-level output (NO de-duplication)\n"
         "- Output one block per detected instance\n"
         "- If the same concept appears multiple times, DO NOT merge\n"
         "- Each instance must have its own bounding box\n\n";

    t += "-- Mandatory hyphenation rule:\n"
         "- Any multi-word proper name MUST be hyphenated everywhere:\n"
         "  - Concept\n"
         "  - Source Prompt\n"
         "  - Blend Words\n"
         "- Examples:\n"
         "  - brad-pitt\n"
         "  - taylor-swift\n"
         "  - donald-trump\n\n";

    t += "-- Fields\n"
         "- Concept: concise label naming the issue. One line, no period.\n"
         "- Source Prompt: must start exactly with \"image of a ...\" and describe only the problematic "
         "element. <= 6 tokens preferred.\n"
         "- Target Prompt: must start exactly with \"image of a ...\" describing the smallest neutralizing "
         "replacement. <= 8 tokens preferred.\n"
         "- Blend Words: exactly two words, one from the Source Prompt and one from the Target Prompt. "
         "Hyphenated if multi-word.\n"
         "- Bounding Box: normalized coordinates [y_min, x_min, y_max, x_max] (0-1000). String format.\n\n";

    t += "-- Blend Words: Meaning and Rules\n"
         "- Blend Words explicitly describe what is being changed in the image.\n"
         "- They represent a before -> after transformation.\n"
         "- Word 1 corresponds to the original detected concept (from the Source Prompt).\n"
         "- Word 2 corresponds to the neutralized replacement (from the Target Prompt).\n"
         "In short: Blend Words = what is being changed in the image\n\n"
         "Strict rules:\n"
         "- Must contain exactly two words\n"
         "- Word 1 must appear in the Source Prompt\n"
         "- Word 2 must appear in the Target Prompt\n"
         "- No extra words, no synonyms, no rephrasing\n\n"
         "Examples:\n"
         "- Source Prompt: image of a brad-pitt\n"
         "- Target Prompt: image of a generic person\n"
         "- Blend Words: brad-pitt person\n\n";

    t += "-- " + std::string(kFormatSectionTitle) + "\n";
    t += "- Start with the header line, then list each instance with no blank lines:\n\n";
    t += std::string(kDetectionsHeader) + "\n";
    for (int i = 0; i < 2; ++i)
        t += "Concept: <concept-label>\n"
             "Source Prompt: <source-prompt>\n"
             "Target Prompt: <target-prompt>\n"
             "Blend Words: <blend-words>\n"
             "Bounding Box: <bounding-box>\n";
    t += "\n- If no problematic concepts are found, write only the header line followed by [ ] on the same line.\n";

    return PolicyPrompt{std::move(t), categories};
}

inline std::string render_policy_prompt(const std::vector<std::string>& category_ids)
{
    std::vector<ConceptCategory> cats;
    cats.reserve(category_ids.size());
    for (const auto& id : category_ids)
        cats.push_back(parse_category(id));
    return make_policy_prompt(cats).template_text;
}

// ---- boxes ---------------------------------------------------------------------

// Detector wire box: y-first, normalized to the closed range 0..1000.
struct DetectorBox
{
    int y_min = 0;
    int x_min = 0;
    int y_max = 0;
    int x_max = 0;

    friend bool operator==(const DetectorBox&, const DetectorBox&) = default;
};

// x-first, image pixels.
struct PixelBox
{
    double x_min = 0;
    double y_min = 0;
    double x_max = 0;
    double y_max = 0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }

    friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

inline void check_detector_box(const DetectorBox& b, std::size_t index = 0)
{
    auto in_range = [](int v) { return v >= 0 && v <= 1000; };
    if (!in_range(b.y_min) || !in_range(b.x_min) || !in_range(b.y_max) || !in_range(b.x_max))
        throw BoxRangeError(index, "coordinates must lie in 0..1000");
    if (b.y_min >= b.y_max || b.x_min >= b.x_max)
        throw BoxRangeError(index, "degenerate box (min >= max)");
}

inline PixelBox to_pixel_box(const DetectorBox& b, double image_width, double image_height, std::size_t index = 0)
{
    if (!(image_width > 0) || !(image_height > 0))
        throw ConfigError("image dimensions must be positive");
    check_detector_box(b, index);
    PixelBox p{image_width * b.x_min / 1000.0, image_height * b.y_min / 1000.0, image_width * b.x_max / 1000.0,
               image_height * b.y_max / 1000.0};
    if (!(p.x_min < p.x_max) || !(p.y_min < p.y_max))
        throw BoxRangeError(index, "zero-area box after conversion to pixels");
    return p;
}

// ---- detections ------------------------------------------------------------------

struct ConceptDetection
{
    std::string label;
    std::string source_prompt;
    std::string target_prompt;
    // Exactly two entries when valid; more or fewer are reported by
    // validate_detection rather than rejected at parse time.
    std::vector<std::string> blend_words;
    DetectorBox box;

    const std::string& source_word() const { return blend_words.at(0); }
    const std::string& target_word() const { return blend_words.at(1); }

    friend bool operator==(const ConceptDetection&, const ConceptDetection&) = default;
};

struct DetectionSet
{
    std::vector<ConceptDetection> detections;

    std::size_t count() const { return detections.size(); }
    bool empty() const { return detections.empty(); }

    friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

namespace detail {

inline std::string_view strip_quotes(std::string_view s)
{
    if (s.size() >= 2)
    {
        char f = s.front(), b = s.back();
        if ((f == '"' && b == '"') || (f == '\'' && b == '\'') || (f == '`' && b == '`'))
            s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

inline DetectorBox parse_box(std::string_view text, std::size_t index)
{
    std::string_view s = strip_quotes(trim(text));
    if (s.size() >= 2 && s.front() == '[' && s.back() == ']')
        s = s.substr(1, s.size() - 2);

    std::vector<long> vals;
    std::size_t i = 0;
    while (i < s.size())
    {
        char ch = s[i];
        if (ch == ',' || std::isspace(static_cast<unsigned char>(ch)))
        {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (ch == '-' || ch == '+')
            ++i;
        std::size_t digits = i;
        while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
            ++i;
        bool terminated = i == s.size() || s[i] == ',' || std::isspace(static_cast<unsigned char>(s[i]));
        if (i == digits || !terminated || i - digits > 9)
            throw MalformedBox(index, std::string(text));
        vals.push_back(std::stol(std::string(s.substr(start, i - start))));
    }
    if (vals.size() != 4)
        throw MalformedBox(index, std::string(text));
    DetectorBox b{static_cast<int>(vals[0]), static_cast<int>(vals[1]), static_cast<int>(vals[2]),
                  static_cast<int>(vals[3])};
    check_detector_box(b, index);
    return b;
}

inline std::vector<std::string> split_lines(std::string_view raw)
{
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos <= raw.size())
    {
        auto nl = raw.find('\n', pos);
        auto line = raw.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        while (!line.empty() && (line.back() == '\r' || std::isspace(static_cast<unsigned char>(line.back()))))
            line.remove_suffix(1);
        lines.emplace_back(line);
        if (nl == std::string_view::npos)
            break;
        pos = nl + 1;
    }
    return lines;
}

inline constexpr std::array<std::string_view, 5> kFieldKeys = {
    "Concept", "Source Prompt", "Target Prompt", "Blend Words", "Bounding Box",
};

} // namespace detail

inline DetectionSet parse_detections(std::string_view raw)
{
    using detail::trim;
    const auto lines = detail::split_lines(raw);
    std::size_t pos = 0;
    auto skip_blank = [&] {
        while (pos < lines.size() && trim(lines[pos]).empty())
            ++pos;
    };

    skip_blank();
    if (pos == lines.size())
        throw ProtocolError("empty detector response");
    std::string_view head = trim(lines[pos]);
    if (head.substr(0, kDetectionsHeader.size()) != kDetectionsHeader)
        throw ProtocolError("missing header line '" + std::string(kDetectionsHeader) + "'");
    std::string_view rest = trim(head.substr(kDetectionsHeader.size()));
    ++pos;

    DetectionSet out;
    if (!rest.empty())
    {
        if (rest != "[ ]" && rest != "[]")
            throw ProtocolError("unexpected text after header: '" + std::string(rest) + "'");
        skip_blank();
        if (pos != lines.size())
            throw ProtocolError("content after the empty-detection marker");
        return out;
    }

    skip_blank();
    if (pos == lines.size())
        throw ProtocolError("header has neither instance blocks nor the empty marker");

    while (pos < lines.size())
    {
        const std::size_t index = out.detections.size();
        std::array<std::string, 5> values;
        for (std::size_t f = 0; f < detail::kFieldKeys.size(); ++f)
        {
            const std::string key(detail::kFieldKeys[f]);
            if (pos >= lines.size() || trim(lines[pos]).empty())
                throw MalformedBlock(index, key, "missing");
            std::string_view line = trim(lines[pos]);
            if (line.substr(0, key.size() + 1) != key + ":")
                throw MalformedBlock(index, key, "found '" + std::string(line) + "'");
            std::string_view value = trim(line.substr(key.size() + 1));
            if (value.empty())
                throw MalformedBlock(index, key, "empty value");
            values[f] = std::string(value);
            ++pos;
        }

        ConceptDetection d;
        d.label = values[0];
        d.source_prompt = values[1];
        d.target_prompt = values[2];
        d.blend_words = detail::split_ws(detail::strip_quotes(values[3]));
        d.box = detail::parse_box(values[4], index);
        out.detections.push_back(std::move(d));
        skip_blank();
    }
    return out;
}

// Inverse of parse_detections for well-formed sets.
inline std::string serialize_detections(const DetectionSet& set)
{
    std::string s(kDetectionsHeader);
    if (set.empty())
        return s + " [ ]\n";
    s += "\n";
    for (const auto& d : set.detections)
    {
        s += "Concept: " + d.label + "\n";
        s += "Source Prompt: " + d.source_prompt + "\n";
        s += "Target Prompt: " + d.target_prompt + "\n";
        s += "Blend Words:";
        for (const auto& w : d.blend_words)
            s += " " + w;
        s += "\n";
        s += "Bounding Box: [" + std::to_string(d.box.y_min) + ", " + std::to_string(d.box.x_min) + ", " +
             std::to_string(d.box.y_max) + ", " + std::to_string(d.box.x_max) + "]\n";
    }
    return s;
}

// ---- validation ----------------------------------------------------------------------

enum class Rule
{
    blend_word_count,
    blend_word_whitespace,
    source_word_membership,
    target_word_membership,
    source_prompt_prefix,
    target_prompt_prefix,
};

inline std::string_view rule_name(Rule r)
{
    switch (r)
    {
    case Rule::blend_word_count: return "blend_word_count";
    case Rule::blend_word_whitespace: return "blend_word_whitespace";
    case Rule::source_word_membership: return "source_word_membership";
    case Rule::target_word_membership: return "target_word_membership";
    case Rule::source_prompt_prefix: return "source_prompt_prefix";
    case Rule::target_prompt_prefix: return "target_prompt_prefix";
    }
    return "";
}

struct Violation
{
    Rule rule;
    std::string message;
};

struct ValidationReport
{
    std::vector<Violation> violations;

    bool ok() const { return violations.empty(); }
    bool has(Rule r) const
    {
        return std::any_of(violations.begin(), violations.end(), [r](const Violation& v) { return v.rule == r; });
    }
};

inline ValidationReport validate_detection(const ConceptDetection& d)
{
    ValidationReport rep;
    auto add = [&](Rule r, std::string msg) { rep.violations.push_back({r, std::move(msg)}); };

    if (d.blend_words.size() != 2)
        add(Rule::blend_word_count,
            "blend words must be exactly two words, got " + std::to_string(d.blend_words.size()));
    for (const auto& w : d.blend_words)
        if (detail::has_space(w))
            add(Rule::blend_word_whitespace, "blend word '" + w + "' contains whitespace");

    auto contains = [](const std::vector<std::string>& toks, const std::string& word) {
        auto w = prompt_tokens(word);
        return w.size() == 1 && std::find(toks.begin(), toks.end(), w.front()) != toks.end();
    };
    if (!d.blend_words.empty() && !contains(prompt_tokens(d.source_prompt), d.blend_words[0]))
        add(Rule::source_word_membership, "word 1 '" + d.blend_words[0] + "' not in source prompt");
    if (d.blend_words.size() >= 2 && !contains(prompt_tokens(d.target_prompt), d.blend_words[1]))
        add(Rule::target_word_membership, "word 2 '" + d.blend_words[1] + "' not in target prompt");

    auto prefixed = [](const std::string& p) {
        return detail::to_lower(detail::trim(p)).rfind(kPromptPrefix, 0) == 0;
    };
    if (!prefixed(d.source_prompt))
        add(Rule::source_prompt_prefix, "source prompt must start with \"image of a\"");
    if (!prefixed(d.target_prompt))
        add(Rule::target_prompt_prefix, "target prompt must start with \"image of a\"");
    return rep;
}

// ---- JSON interchange -------------------------------------------------------------------

inline nlohmann::json to_json(const ConceptDetection& d)
{
    return nlohmann::json{
        {"label", d.label},
        {"source_prompt", d.source_prompt},
        {"target_prompt", d.target_prompt},
        {"blend_words", d.blend_words},
        {"box_norm", {d.box.y_min, d.box.x_min, d.box.y_max, d.box.x_max}},
    };
}

inline nlohmann::json to_json(const DetectionSet& set)
{
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : set.detections)
        dets.push_back(to_json(d));
    return nlohmann::json{{"schema_version", kSchemaVersion}, {"detections", dets}, {"count", set.count()}};
}

inline ConceptDetection detection_from_json(const nlohmann::json& j, std::size_t index = 0)
{
    try
    {
        ConceptDetection d;
        d.label = j.at("label").get<std::string>();
        d.source_prompt = j.at("source_prompt").get<std::string>();
        d.target_prompt = j.at("target_prompt").get<std::string>();
        d.blend_words = j.at("blend_words").get<std::vector<std::string>>();
        auto box = j.at("box_norm").get<std::vector<int>>();
        if (box.size() != 4)
            throw MalformedBox(index, j.at("box_norm").dump());
        d.box = DetectorBox{box[0], box[1], box[2], box[3]};
        check_detector_box(d.box, index);
        return d;
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ProtocolError("detection " + std::to_string(index) + ": " + e.what());
    }
}

inline DetectionSet detection_set_from_json(const nlohmann::json& j)
{
    DetectionSet set;
    try
    {
        const auto& arr = j.at("detections");
        for (std::size_t i = 0; i < arr.size(); ++i)
            set.detections.push_back(detection_from_json(arr[i], i));
        if (j.contains("count") && j.at("count").get<std::size_t>() != set.count())
            throw ProtocolError("detection count does not match the list length");
    }
    catch (const nlohmann::json::exception& e)
    {
        throw ProtocolError(std::string("detection set: ") + e.what());
    }
    return set;
}

} // namespace safeedit

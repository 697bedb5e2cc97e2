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

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <png.h>

#include <json.hpp>

#include "safeedit/edit_engine.hpp"
#include "safeedit/error.hpp"
#include "safeedit/grid.hpp"
#include "safeedit/mask_engine.hpp"

namespace safeedit {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path.string() + "'");
    return std::string(std::istreambuf_iterator<char>(in), {});
}

// Writes via a temporary file and rename, so readers never see partial files.
inline void write_file(const fs::path& path, std::string_view bytes)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write '" + tmp.string() + "'");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw IoError("short write to '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
}

inline void write_json(const fs::path& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

inline nlohmann::json read_json(const fs::path& path)
{
    try
    {
        return nlohmann::json::parse(read_file(path));
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

// ---- PNG ---------------------------------------------------------------------------

inline RgbImage decode_png(std::string_view bytes)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size()))
        throw IoError(std::string("PNG decode failed: ") + img.message);
    img.format = PNG_FORMAT_RGB;
    RgbImage out(img.width, img.height);
    if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr))
    {
        png_image_free(&img);
        throw IoError(std::string("PNG decode failed: ") + img.message);
    }
    return out;
}

inline RgbImage read_png(const fs::path& path)
{
    try
    {
        return decode_png(read_file(path));
    }
    catch (const IoError& e)
    {
        throw IoError(path.string() + ": " + e.what());
    }
}

namespace detail {

inline std::string encode_png(const std::uint8_t* data, std::size_t w, std::size_t h, png_uint_32 format)
{
    png_image img;
    std::memset(&img, 0, sizeof img);
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(w);
    img.height = static_cast<png_uint_32>(h);
    img.format = format;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, data, 0, nullptr))
        throw IoError(std::string("PNG encode failed: ") + img.message);
    std::string buf(size, '\0');
    if (!png_image_write_to_memory(&img, buf.data(), &size, 0, data, 0, nullptr))
        throw IoError(std::string("PNG encode failed: ") + img.message);
    buf.resize(size);
    return buf;
}

} // namespace detail

inline std::string encode_png(const RgbImage& img)
{
    return detail::encode_png(img.pixels.data(), img.width, img.height, PNG_FORMAT_RGB);
}

inline void write_png(const fs::path& path, const RgbImage& img) { write_file(path, encode_png(img)); }

inline void write_gray_png(const fs::path& path, const Grid<std::uint8_t>& g)
{
    write_file(path, detail::encode_png(g.values().data(), g.cols(), g.rows(), PNG_FORMAT_GRAY));
}

// Real-valued map rescaled to 0..255 for inspection.
inline void write_heatmap_png(const fs::path& path, const RealGrid& m)
{
    Grid<std::uint8_t> g(m.rows(), m.cols(), 0);
    if (!m.empty())
    {
        auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
        const double span = *hi - *lo;
        for (std::size_t i = 0; i < m.size(); ++i)
            g[i] = span > 0 ? static_cast<std::uint8_t>(std::lround(255.0 * (m[i] - *lo) / span)) : 0;
    }
    write_gray_png(path, g);
}

// Binary mask or gate as 0/255 PNG plus a JSON sidecar next to it.
inline void write_binary_grid(const fs::path& png_path, const BitGrid& bits, const std::string& kind,
                              double threshold)
{
    Grid<std::uint8_t> g(bits.rows(), bits.cols(), 0);
    for (std::size_t i = 0; i < bits.size(); ++i)
        g[i] = bits[i] ? 255 : 0;
    write_gray_png(png_path, g);
    fs::path sidecar = png_path;
    sidecar.replace_extension(".json");
    write_json(sidecar, {{"schema_version", kSchemaVersion},
                         {"h", bits.rows()},
                         {"w", bits.cols()},
                         {"kind", kind},
                         {"threshold", threshold}});
}

inline BitGrid read_binary_grid(const fs::path& png_path)
{
    const RgbImage img = read_png(png_path);
    BitGrid g(img.height, img.width, 0);
    for (std::size_t y = 0; y < img.height; ++y)
        for (std::size_t x = 0; x < img.width; ++x)
            g(y, x) = img.at(x, y, 0) >= 128 ? 1 : 0;
    return g;
}

// ---- latent <-> image (identity mapping for the toy backend) ------------------------

inline Latent image_to_latent(const RgbImage& img)
{
    Latent z(LatentShape{3, img.height, img.width});
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x)
                z(c, y, x) = img.at(x, y, c) / 255.0;
    return z;
}

inline RgbImage latent_to_image(const Latent& z)
{
    const auto& s = z.shape();
    if (s.channels != 3)
        throw ShapeError("only 3-channel latents map to RGB images");
    RgbImage img(s.width, s.height);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < s.height; ++y)
            for (std::size_t x = 0; x < s.width; ++x)
                img.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(z(c, y, x), 0.0, 1.0) * 255.0));
    return img;
}

// ---- raw latents: little-endian float32 body + {"c","h","w"} header -------------------

inline void write_latent(const fs::path& bin_path, const Latent& z)
{
    std::string body;
    body.reserve(z.size() * 4);
    for (double v : z.data())
    {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int k = 0; k < 4; ++k)
            body.push_back(static_cast<char>((bits >> (8 * k)) & 0xffu));
    }
    write_file(bin_path, body);
    fs::path header = bin_path;
    header.replace_extension(".json");
    const auto& s = z.shape();
    write_json(header, {{"schema_version", kSchemaVersion}, {"c", s.channels}, {"h", s.height}, {"w", s.width}});
}

inline Latent read_latent(const fs::path& bin_path)
{
    fs::path header = bin_path;
    header.replace_extension(".json");
    const auto j = read_json(header);
    const LatentShape s{j.at("c").get<std::size_t>(), j.at("h").get<std::size_t>(), j.at("w").get<std::size_t>()};
    const std::string body = read_file(bin_path);
    if (body.size() != s.size() * 4)
        throw IoError("latent body size does not match its header");
    std::vector<double> data(s.size());
    for (std::size_t i = 0; i < data.size(); ++i)
    {
        std::uint32_t bits = 0;
        for (int k = 0; k < 4; ++k)
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(body[i * 4 + k])) << (8 * k);
        data[i] = std::bit_cast<float>(bits);
    }
    return Latent(s, std::move(data));
}

} // namespace safeedit

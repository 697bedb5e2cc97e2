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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safeedit/error.hpp"

namespace safeedit {

// Dense row-major 2-D array.
template <typename T>
class Grid
{
public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, T fill = T{})
        : m_rows(rows)
        , m_cols(cols)
        , m_data(rows * cols, fill)
    {
    }
    Grid(std::size_t rows, std::size_t cols, std::vector<T> values)
        : m_rows(rows)
        , m_cols(cols)
        , m_data(std::move(values))
    {
        if (m_data.size() != rows * cols)
            throw ShapeError("grid " + std::to_string(rows) + "x" + std::to_string(cols) + " given " +
                             std::to_string(m_data.size()) + " values");
    }

    std::size_t rows() const { return m_rows; }
    std::size_t cols() const { return m_cols; }
    std::size_t size() const { return m_data.size(); }
    bool empty() const { return m_data.empty(); }

    T& operator()(std::size_t r, std::size_t c) { return m_data[r * m_cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return m_data[r * m_cols + c]; }
    T& operator[](std::size_t i) { return m_data[i]; }
    const T& operator[](std::size_t i) const { return m_data[i]; }

    std::span<T> values() { return m_data; }
    std::span<const T> values() const { return m_data; }
    const std::vector<T>& vec() const { return m_data; }

    bool same_shape(const Grid& o) const { return m_rows == o.m_rows && m_cols == o.m_cols; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<T> m_data;
};

using RealGrid = Grid<double>;
using BitGrid = Grid<std::uint8_t>;

inline std::size_t popcount(const BitGrid& g)
{
    return static_cast<std::size_t>(std::count_if(g.values().begin(), g.values().end(), [](auto v) { return v != 0; }));
}

// Interleaved 8-bit RGB image.
struct RgbImage
{
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels; // height * width * 3

    RgbImage() = default;
    RgbImage(std::size_t w, std::size_t h, std::uint8_t fill = 0)
        : width(w)
        , height(h)
        , pixels(w * h * 3, fill)
    {
    }

    std::uint8_t& at(std::size_t x, std::size_t y, std::size_t ch) { return pixels[(y * width + x) * 3 + ch]; }
    std::uint8_t at(std::size_t x, std::size_t y, std::size_t ch) const { return pixels[(y * width + x) * 3 + ch]; }

    friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

} // namespace safeedit

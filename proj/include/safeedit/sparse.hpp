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
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "safeedit/error.hpp"

namespace safeedit {

struct Triplet
{
    std::size_t row;
    std::size_t col;
    double value;
};

// Compressed sparse row matrix. Duplicate entries are summed on construction.
class CsrMatrix
{
public:
    CsrMatrix() = default;

    CsrMatrix(std::size_t n_rows, std::size_t n_cols, std::vector<Triplet> entries)
        : m_rows(n_rows)
        , m_cols(n_cols)
        , m_row_ptr(n_rows + 1, 0)
    {
        for (const auto& t : entries)
            if (t.row >= n_rows || t.col >= n_cols)
                throw ShapeError("sparse entry outside matrix bounds");
        std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        bool have_prev = false;
        Triplet prev{};
        for (const auto& t : entries)
        {
            if (have_prev && prev.row == t.row && prev.col == t.col)
            {
                m_val.back() += t.value;
                continue;
            }
            m_col.push_back(t.col);
            m_val.push_back(t.value);
            m_row_ptr[t.row + 1]++;
            prev = t;
            have_prev = true;
        }
        std::partial_sum(m_row_ptr.begin(), m_row_ptr.end(), m_row_ptr.begin());
    }

    std::size_t rows() const { return m_rows; }
    std::size_t cols() const { return m_cols; }
    std::size_t nonzeros() const { return m_val.size(); }

    std::span<const std::size_t> row_cols(std::size_t r) const
    {
        return std::span<const std::size_t>(m_col).subspan(m_row_ptr[r], m_row_ptr[r + 1] - m_row_ptr[r]);
    }
    std::span<const double> row_values(std::size_t r) const
    {
        return std::span<const double>(m_val).subspan(m_row_ptr[r], m_row_ptr[r + 1] - m_row_ptr[r]);
    }

    double at(std::size_t r, std::size_t c) const
    {
        auto cols = row_cols(r);
        auto it = std::lower_bound(cols.begin(), cols.end(), c);
        if (it == cols.end() || *it != c)
            return 0.0;
        return row_values(r)[static_cast<std::size_t>(it - cols.begin())];
    }

    // y = A x
    void multiply(std::span<const double> x, std::span<double> y) const
    {
        for (std::size_t r = 0; r < m_rows; ++r)
        {
            double s = 0.0;
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k)
                s += m_val[k] * x[m_col[k]];
            y[r] = s;
        }
    }

    std::vector<double> row_sums() const
    {
        std::vector<double> s(m_rows, 0.0);
        for (std::size_t r = 0; r < m_rows; ++r)
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k)
                s[r] += m_val[k];
        return s;
    }

    std::vector<double> diagonal() const
    {
        std::vector<double> d(m_rows, 0.0);
        for (std::size_t r = 0; r < std::min(m_rows, m_cols); ++r)
            d[r] = at(r, r);
        return d;
    }

    template <typename F>
    void for_each(F&& f) const
    {
        for (std::size_t r = 0; r < m_rows; ++r)
            for (std::size_t k = m_row_ptr[r]; k < m_row_ptr[r + 1]; ++k)
                f(r, m_col[k], m_val[k]);
    }

private:
    std::size_t m_rows = 0;
    std::size_t m_cols = 0;
    std::vector<std::size_t> m_row_ptr;
    std::vector<std::size_t> m_col;
    std::vector<double> m_val;
};

inline double dot(std::span<const double> a, std::span<const double> b)
{
    return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

struct CgResult
{
    std::size_t iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

// Jacobi-preconditioned conjugate gradient for a symmetric positive definite
// operator. `x` holds the initial guess and receives the solution. The stopping
// test is on the true residual: ||b - A x|| <= tol * ||b||.
//
// ApplyOp: void(std::span<const double> in, std::span<double> out)
template <typename ApplyOp>
CgResult conjugate_gradient(ApplyOp&& apply, std::span<const double> diag, std::span<const double> b,
                            std::span<double> x, double tol, std::size_t max_iter)
{
    const std::size_t n = b.size();
    std::vector<double> r(n), z(n), p(n), q(n);
    CgResult res;

    const double b_norm = norm2(b);
    if (b_norm == 0.0)
    {
        std::fill(x.begin(), x.end(), 0.0);
        res.converged = true;
        return res;
    }
    const double target = tol * b_norm;

    auto true_residual = [&] {
        apply(std::span<const double>(x.data(), n), std::span<double>(q));
        for (std::size_t i = 0; i < n; ++i)
            r[i] = b[i] - q[i];
        return norm2(r);
    };

    double r_norm = true_residual();
    while (true)
    {
        if (r_norm <= target)
        {
            res.converged = true;
            break;
        }
        if (res.iterations >= max_iter)
            break;

        // (Re)start the Krylov sequence from the current true residual.
        for (std::size_t i = 0; i < n; ++i)
            p[i] = z[i] = r[i] / diag[i];
        double rz = dot(r, z);
        while (res.iterations < max_iter)
        {
            ++res.iterations;
            apply(std::span<const double>(p), std::span<double>(q));
            const double pq = dot(p, q);
            if (!(pq > 0.0))
                break;
            const double alpha = rz / pq;
            for (std::size_t i = 0; i < n; ++i)
            {
                x[i] += alpha * p[i];
                r[i] -= alpha * q[i];
            }
            if (norm2(r) <= target)
                break;
            for (std::size_t i = 0; i < n; ++i)
                z[i] = r[i] / diag[i];
            const double rz_next = dot(r, z);
            const double beta = rz_next / rz;
            rz = rz_next;
            for (std::size_t i = 0; i < n; ++i)
                p[i] = z[i] + beta * p[i];
        }
        r_norm = true_residual();
    }
    res.relative_residual = r_norm / b_norm;
    return res;
}

} // namespace safeedit

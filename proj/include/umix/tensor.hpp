// Copyright 2026 The umix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "umix/common.hpp"

namespace umix::ad {

/// Dense 2-D array of doubles, row-major. Scalars are 1x1, row vectors 1xC,
/// column vectors Rx1. Values are treated as frozen once the tensor is handed
/// to a tape; tensors are safe to share read-only across threads.
class Tensor {
public:
    Tensor() = default;

    /// Zero-filled tensor.
    Tensor(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
        if (rows == 0 || cols == 0) throw Error("Tensor: extents must be positive");
    }

    /// Construction from external values: size checked against the shape and
    /// non-finite entries rejected.
    Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), data_(std::move(values)) {
        if (rows == 0 || cols == 0) throw Error("Tensor: extents must be positive");
        if (data_.size() != rows * cols) {
            throw Error(detail::cat("Tensor: data length ", data_.size(), " does not match shape ",
                                    rows, "x", cols));
        }
        for (double v : data_) {
            if (!std::isfinite(v)) throw Error("Tensor: non-finite value rejected");
        }
    }

    static Tensor scalar(double v) {
        Tensor t(1, 1);
        t.data_[0] = v;
        return t;
    }

    static Tensor zeros(std::size_t rows, std::size_t cols) { return Tensor(rows, cols); }

    static Tensor full(std::size_t rows, std::size_t cols, double v) {
        Tensor t(rows, cols);
        for (double& x : t.data_) x = v;
        return t;
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        if (r == 0) throw Error("Tensor::from_rows: empty");
        const std::size_t c = rows.begin()->size();
        std::vector<double> data;
        data.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw Error("Tensor::from_rows: ragged rows");
            data.insert(data.end(), row.begin(), row.end());
        }
        return Tensor(r, c, std::move(data));
    }

    /// 1xN row vector from external values (validated).
    static Tensor row(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(1, n, std::move(values));
    }

    /// Nx1 column vector from external values (validated).
    static Tensor column(std::vector<double> values) {
        const std::size_t n = values.size();
        return Tensor(n, 1, std::move(values));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    std::vector<std::size_t> shape() const { return {rows_, cols_}; }
    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    bool is_scalar() const { return rows_ == 1 && cols_ == 1; }

    double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    double item() const {
        if (!is_scalar()) {
            throw Error(detail::cat("Tensor::item: shape ", rows_, "x", cols_, " is not scalar"));
        }
        return data_[0];
    }

    std::span<const double> values() const { return data_; }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    std::span<const double> row_span(std::size_t i) const {
        return std::span<const double>(data_).subspan(i * cols_, cols_);
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Tensor& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && data_ == o.data_;
    }

    /// Consecutive column block [c0, c1) as a new tensor.
    Tensor col_block(std::size_t c0, std::size_t c1) const {
        if (c0 >= c1 || c1 > cols_) throw Error("Tensor::col_block: bad column range");
        Tensor out(rows_, c1 - c0);
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = at(i, j);
        }
        return out;
    }

    /// Rows selected by index, in order (duplicates allowed).
    Tensor gather_rows(std::span<const std::size_t> idx) const {
        if (idx.empty()) throw Error("Tensor::gather_rows: empty index list");
        Tensor out(idx.size(), cols_);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (idx[r] >= rows_) throw Error("Tensor::gather_rows: index out of range");
            for (std::size_t j = 0; j < cols_; ++j) out.at(r, j) = at(idx[r], j);
        }
        return out;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

using umix::detail::cat;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const EMat> emap(const Tensor& t) {
    return {t.raw().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

inline Eigen::Map<EMat> emap(Tensor& t) {
    return {t.raw().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

} // namespace detail

} // namespace umix::ad

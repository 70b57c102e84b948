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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "umix/rng.hpp"
#include "umix/tensor.hpp"

namespace umix::data {

using ad::Tensor;

/// Sink for non-fatal load-time messages (dropped columns etc.). Defaults to
/// stderr at the call sites that care.
using WarnFn = std::function<void(const std::string&)>;

struct Dataset {
    Tensor x; // N x d_x
    Tensor y; // N x d_y
    std::vector<std::string> feature_names;
    std::string target_name;

    std::size_t size() const { return x.rows(); }

    Dataset select(std::span<const std::size_t> idx) const {
        return {x.gather_rows(idx), y.gather_rows(idx), feature_names, target_name};
    }
};

namespace detail_csv {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (ch != '\r') {
            cell.push_back(ch);
        }
    }
    cells.push_back(cell);
    return cells;
}

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(const std::string& cell) {
    const std::string t = trim(cell);
    if (t.empty()) return std::nullopt;
    double v = 0.0;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v)) return std::nullopt;
    return v;
}

} // namespace detail_csv

/// Load a comma-separated file with a header row; the named column becomes
/// the target, every other column a feature. Non-numeric or missing cells are
/// an error naming the file line.
inline Dataset load_csv(const std::string& path, const std::string& target_column) {
    std::ifstream in(path);
    if (!in) throw Error(detail::cat("load_csv: cannot open '", path, "'"));

    std::string line;
    if (!std::getline(in, line)) throw Error(detail::cat("load_csv: '", path, "' is empty"));
    std::vector<std::string> names = detail_csv::split_line(line);
    for (auto& n : names) n = detail_csv::trim(n);

    std::size_t target_idx = names.size();
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (names[c] == target_column) target_idx = c;
    }
    if (target_idx == names.size()) {
        throw Error(detail::cat("load_csv: target column '", target_column, "' not found in '",
                                path, "'"));
    }

    std::vector<double> xdata, ydata;
    std::size_t rows = 0;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail_csv::trim(line).empty()) continue;
        const auto cells = detail_csv::split_line(line);
        if (cells.size() != names.size()) {
            throw Error(detail::cat("load_csv: ", path, ":", lineno, ": expected ", names.size(),
                                    " cells, got ", cells.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = detail_csv::parse_double(cells[c]);
            if (!v) {
                throw Error(detail::cat("load_csv: ", path, ":", lineno, ": non-numeric cell '",
                                        detail_csv::trim(cells[c]), "' in column '", names[c],
                                        "'"));
            }
            (c == target_idx ? ydata : xdata).push_back(*v);
        }
        ++rows;
    }
    if (rows == 0) throw Error(detail::cat("load_csv: '", path, "' has no data rows"));

    Dataset d;
    d.x = Tensor(rows, names.size() - 1, std::move(xdata));
    d.y = Tensor(rows, 1, std::move(ydata));
    d.target_name = names[target_idx];
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c != target_idx) d.feature_names.push_back(names[c]);
    }
    return d;
}

/// Extract one numeric column from a CSV (for price series; other columns,
/// e.g. dates, are ignored and may be non-numeric).
inline std::vector<double> load_series_csv(const std::string& path, const std::string& column) {
    std::ifstream in(path);
    if (!in) throw Error(detail::cat("load_series_csv: cannot open '", path, "'"));
    std::string line;
    if (!std::getline(in, line)) {
        throw Error(detail::cat("load_series_csv: '", path, "' is empty"));
    }
    const auto names = detail_csv::split_line(line);
    std::size_t idx = names.size();
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (detail_csv::trim(names[c]) == column) idx = c;
    }
    if (idx == names.size()) {
        throw Error(detail::cat("load_series_csv: column '", column, "' not found in '", path,
                                "'"));
    }
    std::vector<double> prices;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail_csv::trim(line).empty()) continue;
        const auto cells = detail_csv::split_line(line);
        if (idx >= cells.size()) {
            throw Error(detail::cat("load_series_csv: ", path, ":", lineno, ": missing column '",
                                    column, "'"));
        }
        const auto v = detail_csv::parse_double(cells[idx]);
        if (!v) {
            throw Error(detail::cat("load_series_csv: ", path, ":", lineno,
                                    ": non-numeric cell '", detail_csv::trim(cells[idx]),
                                    "' in column '", column, "'"));
        }
        prices.push_back(*v);
    }
    if (prices.empty()) throw Error(detail::cat("load_series_csv: '", path, "' has no data rows"));
    return prices;
}

// ---------------------------------------------------------------------------
// Standardisation
// ---------------------------------------------------------------------------

/// Per-column z-score statistics fitted on a training split. Constant columns
/// are dropped (with a warning) when drop_constant is set, so every kept
/// column has positive std.
class Scaler {
public:
    Scaler() = default;

    static Scaler fit(const Tensor& x, bool drop_constant, const WarnFn& warn = {},
                      const std::vector<std::string>* names = nullptr) {
        Scaler s;
        const std::size_t n = x.rows();
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double lo = x.at(0, c), hi = x.at(0, c);
            double mean = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                lo = std::min(lo, x.at(i, c));
                hi = std::max(hi, x.at(i, c));
                mean += x.at(i, c);
            }
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = x.at(i, c) - mean;
                var += d * d;
            }
            double sd = std::sqrt(var / static_cast<double>(n));
            if (lo == hi) sd = 0.0; // constant column, exact test
            if (sd == 0.0) {
                if (drop_constant) {
                    if (warn) {
                        warn(detail::cat("dropping constant column ",
                                         names && c < names->size() ? (*names)[c]
                                                                    : std::to_string(c)));
                    }
                    continue;
                }
                if (warn) warn(detail::cat("constant column ", c, " left unscaled"));
                sd = 1.0;
            }
            s.kept_.push_back(c);
            s.mean_.push_back(mean);
            s.std_.push_back(sd);
        }
        if (s.kept_.empty()) throw Error("Scaler::fit: every column is constant");
        s.in_cols_ = x.cols();
        return s;
    }

    /// Identity scaler (standardisation disabled) over `cols` columns.
    static Scaler identity(std::size_t cols) {
        Scaler s;
        s.in_cols_ = cols;
        for (std::size_t c = 0; c < cols; ++c) {
            s.kept_.push_back(c);
            s.mean_.push_back(0.0);
            s.std_.push_back(1.0);
        }
        return s;
    }

    std::size_t in_cols() const { return in_cols_; }
    std::size_t out_cols() const { return kept_.size(); }
    const std::vector<std::size_t>& kept() const { return kept_; }
    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& stddev() const { return std_; }

    static Scaler restore(std::size_t in_cols, std::vector<std::size_t> kept,
                          std::vector<double> mean, std::vector<double> stddev) {
        Scaler s;
        s.in_cols_ = in_cols;
        s.kept_ = std::move(kept);
        s.mean_ = std::move(mean);
        s.std_ = std::move(stddev);
        return s;
    }

    Tensor transform(const Tensor& x) const {
        if (x.cols() != in_cols_) {
            throw Error(detail::cat("Scaler::transform: expected ", in_cols_, " columns, got ",
                                    x.cols()));
        }
        Tensor out(x.rows(), kept_.size());
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t c = 0; c < kept_.size(); ++c) {
                out.at(i, c) = (x.at(i, kept_[c]) - mean_[c]) / std_[c];
            }
        }
        return out;
    }

    /// Inverse over kept columns (the transform's actual output space).
    Tensor inverse(const Tensor& z) const {
        if (z.cols() != kept_.size()) {
            throw Error(detail::cat("Scaler::inverse: expected ", kept_.size(), " columns, got ",
                                    z.cols()));
        }
        Tensor out(z.rows(), kept_.size());
        for (std::size_t i = 0; i < z.rows(); ++i) {
            for (std::size_t c = 0; c < kept_.size(); ++c) {
                out.at(i, c) = z.at(i, c) * std_[c] + mean_[c];
            }
        }
        return out;
    }

private:
    std::size_t in_cols_ = 0;
    std::vector<std::size_t> kept_;
    std::vector<double> mean_;
    std::vector<double> std_;
};

// ---------------------------------------------------------------------------
// Fold splitting
// ---------------------------------------------------------------------------

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Independent seeded shuffle-splits: fold f shuffles with seed
/// derive_seed(seed, f) and takes the first ceil(N * test_fraction) indices
/// as the test set. Train and test are disjoint, exhaustive, and sorted.
inline std::vector<Fold> split_folds(std::size_t n, std::size_t n_folds, double test_fraction,
                                     std::uint64_t seed) {
    if (n_folds == 0) throw UsageError("split_folds: n_folds must be at least 1");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw UsageError("split_folds: test_fraction must be in (0, 1)");
    }
    std::size_t test_size = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    test_size = std::clamp<std::size_t>(test_size, 1, n - 1);

    std::vector<Fold> folds(n_folds);
    for (std::size_t f = 0; f < n_folds; ++f) {
        Rng rng(derive_seed(seed, f));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        rng.shuffle(perm);
        folds[f].test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(test_size));
        folds[f].train.assign(perm.begin() + static_cast<std::ptrdiff_t>(test_size), perm.end());
        std::sort(folds[f].test.begin(), folds[f].test.end());
        std::sort(folds[f].train.begin(), folds[f].train.end());
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Time series
// ---------------------------------------------------------------------------

/// Sliding windows over a price series: sample t holds prices[t .. t+window)
/// and predicts prices[t + window].
struct WindowedSeries {
    Tensor windows;                  // (len - window) x window
    Tensor targets;                  // (len - window) x 1
    std::vector<std::size_t> start;  // chronological index of each sample
};

inline WindowedSeries window_series(std::span<const double> prices, std::size_t window = 60) {
    if (prices.size() <= window) {
        throw Error(detail::cat("window_series: need more than ", window, " prices, got ",
                                prices.size()));
    }
    const std::size_t n = prices.size() - window;
    WindowedSeries ws;
    ws.windows = Tensor(n, window);
    ws.targets = Tensor(n, 1);
    ws.start.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t k = 0; k < window; ++k) ws.windows.at(t, k) = prices[t + k];
        ws.targets.at(t, 0) = prices[t + window];
        ws.start[t] = t;
    }
    return ws;
}

inline Dataset windows_to_dataset(const WindowedSeries& ws) {
    Dataset d;
    d.x = ws.windows;
    d.y = ws.targets;
    d.target_name = "next_close";
    for (std::size_t k = 0; k < ws.windows.cols(); ++k) {
        d.feature_names.push_back(detail::cat("close_t-", ws.windows.cols() - k));
    }
    return d;
}

/// Chronological split of a raw price series; windows are built separately on
/// each segment so no sample straddles the boundary.
inline std::pair<Dataset, Dataset> chronological_split(std::span<const double> prices,
                                                       double train_fraction, std::size_t window) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw UsageError("chronological_split: train_fraction must be in (0, 1)");
    }
    const std::size_t cut = static_cast<std::size_t>(train_fraction * static_cast<double>(prices.size()));
    if (cut <= window || prices.size() - cut <= window) {
        throw Error("chronological_split: a segment is too short for the window");
    }
    const Dataset train = windows_to_dataset(window_series(prices.subspan(0, cut), window));
    const Dataset test = windows_to_dataset(window_series(prices.subspan(cut), window));
    return {train, test};
}

enum class SeriesKind { trend, shock, high_vol };

inline SeriesKind series_kind_from_name(const std::string& name) {
    if (name == "trend") return SeriesKind::trend;
    if (name == "shock") return SeriesKind::shock;
    if (name == "high_vol") return SeriesKind::high_vol;
    throw UsageError(detail::cat("unknown synthetic series kind '", name, "'"));
}

/// Synthetic daily closing prices, strictly positive by construction
/// (geometric random walk on the log scale, start 100):
///   trend    — drift 4e-4, vol 0.01;
///   shock    — trend plus a one-time -35% level drop at index floor(0.7 n);
///   high_vol — two-state Markov volatility in {0.01, 0.08}, switch
///              probability 0.02 per step.
inline std::vector<double> synthetic_series(SeriesKind kind, std::size_t n, std::uint64_t seed) {
    if (n <= 100) throw UsageError("synthetic_series: n must exceed 100");
    Rng rng(seed);
    std::vector<double> prices(n);
    double log_p = std::log(100.0);
    const double drift = 0.0004;
    bool high = false;
    const std::size_t shock_at = static_cast<std::size_t>(0.7 * static_cast<double>(n));
    for (std::size_t t = 0; t < n; ++t) {
        double vol = 0.01;
        if (kind == SeriesKind::high_vol) {
            if (rng.bernoulli(0.02)) high = !high;
            vol = high ? 0.08 : 0.01;
        }
        if (t > 0) log_p += drift + vol * rng.normal();
        if (kind == SeriesKind::shock && t == shock_at) log_p += std::log(0.65);
        prices[t] = std::exp(log_p);
    }
    return prices;
}

} // namespace umix::data

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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "umix/tensor.hpp"

namespace umix::graph {

using ad::Tensor;

enum class Metric { euclidean, manhattan };

inline Metric metric_from_name(const std::string& name) {
    if (name == "euclidean") return Metric::euclidean;
    if (name == "manhattan") return Metric::manhattan;
    throw UsageError(detail::cat("unknown metric '", name, "'"));
}

inline std::string metric_name(Metric m) {
    return m == Metric::euclidean ? "euclidean" : "manhattan";
}

inline double distance(std::span<const double> a, std::span<const double> b, Metric m) {
    double acc = 0.0;
    if (m == Metric::euclidean) {
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double d = a[k] - b[k];
            acc += d * d;
        }
        return std::sqrt(acc);
    }
    for (std::size_t k = 0; k < a.size(); ++k) acc += std::abs(a[k] - b[k]);
    return acc;
}

/// Per-point nearest neighbours: exactly k entries, distances ascending,
/// never the point itself.
struct NeighborTable {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> indices;
    std::vector<std::vector<double>> distances;
};

/// Exact brute-force k-nearest neighbours. Ties broken by lower index.
inline NeighborTable knn(const Tensor& x, std::size_t k, Metric metric = Metric::euclidean) {
    const std::size_t n = x.rows();
    if (k < 1) throw UsageError("knn: K must be at least 1");
    if (k >= n) throw UsageError(detail::cat("knn: K must be < N (K=", k, ", N=", n, ")"));
    if (!x.all_finite()) throw Error("knn: non-finite feature value");

    NeighborTable table;
    table.k = k;
    table.indices.resize(n);
    table.distances.resize(n);

    std::vector<std::pair<double, std::size_t>> order(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            order[m++] = {distance(x.row_span(i), x.row_span(j), metric), j};
        }
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                          order.end());
        table.indices[i].resize(k);
        table.distances[i].resize(k);
        for (std::size_t r = 0; r < k; ++r) {
            table.distances[i][r] = order[r].first;
            table.indices[i][r] = order[r].second;
        }
    }
    return table;
}

/// Local connectivity parameters of one point: rho is the distance to the
/// nearest neighbour; sigma calibrates the effective neighbour weight so that
/// sum_j exp(-max(0, d_ij - rho) / sigma) = log2(K).
struct LocalScale {
    double rho = 0.0;
    double sigma = 1.0;
};

/// Solve for sigma by bisection (up to 64 iterations; stops once the bracket
/// is resolved to a relative width of 1e-5). The sum is increasing in sigma
/// and the upper bracket is grown by doubling. When the target is only an
/// infimum (e.g. every distance equals rho, so the sum never drops to
/// log2(K)), the bracket collapses toward zero and the clamp takes over. The
/// result is clamped to [1e-3 * mean neighbour distance, 1e3].
inline LocalScale fit_local_scale(std::span<const double> dists) {
    if (dists.empty()) throw Error("fit_local_scale: empty distance list");
    const double rho = dists.front();
    const double target = std::log2(static_cast<double>(dists.size()));

    const auto weight_sum = [&](double sigma) {
        double s = 0.0;
        for (double d : dists) s += std::exp(-std::max(0.0, d - rho) / sigma);
        return s;
    };

    double lo = 0.0;
    double hi = std::numeric_limits<double>::max();
    double mid = 1.0;
    for (int iter = 0; iter < 64; ++iter) {
        // ties shrink: when the sum can only approach the target from above,
        // rounding makes them equal long before sigma reaches zero
        if (weight_sum(mid) >= target) {
            hi = mid;
            mid = 0.5 * (lo + hi);
        } else {
            lo = mid;
            mid = hi == std::numeric_limits<double>::max() ? mid * 2.0 : 0.5 * (lo + hi);
        }
        if (hi != std::numeric_limits<double>::max() && hi - lo < 1e-5 * mid) break;
    }

    double mean = 0.0;
    for (double d : dists) mean += d;
    mean /= static_cast<double>(dists.size());
    const double floor = 1e-3 * mean;
    return {rho, std::clamp(mid, floor, 1e3)};
}

/// Directional membership strength of neighbour j seen from i:
/// exp(-max(0, d_ij - rho_i) / sigma_i). The clamped numerator keeps the
/// value <= 1 when d < rho.
inline double directional_probability(double d, const LocalScale& scale) {
    return std::exp(-std::max(0.0, d - scale.rho) / scale.sigma);
}

struct Edge {
    std::size_t i = 0; // always i < j
    std::size_t j = 0;
    double p = 0.0;
};

/// Sparse symmetric membership graph. Each unordered pair is stored once,
/// sorted by (i, j); zero strengths are dropped. Immutable after build.
struct DataGraph {
    std::size_t n = 0;
    std::size_t k = 0;
    Metric metric = Metric::euclidean;
    std::vector<Edge> edges;
    std::vector<LocalScale> scales; // empty when loaded from a file

    double p_at(std::size_t a, std::size_t b) const {
        if (a == b) return 0.0;
        const std::uint64_t key = pair_key(a, b);
        const auto it = lookup_.find(key);
        return it == lookup_.end() ? 0.0 : edges[it->second].p;
    }

    double sum_p() const {
        double s = 0.0;
        for (const Edge& e : edges) s += e.p;
        return s;
    }

    void finalize() {
        std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
            return a.i != b.i ? a.i < b.i : a.j < b.j;
        });
        lookup_.clear();
        lookup_.reserve(edges.size());
        for (std::size_t e = 0; e < edges.size(); ++e) {
            lookup_.emplace(pair_key(edges[e].i, edges[e].j), e);
        }
    }

private:
    static std::uint64_t pair_key(std::size_t a, std::size_t b) {
        const std::uint64_t lo = std::min(a, b);
        const std::uint64_t hi = std::max(a, b);
        return (lo << 32) | hi;
    }

    std::unordered_map<std::uint64_t, std::size_t> lookup_;
};

/// Probabilistic-OR symmetrisation p = p_ji + p_ij - p_ji * p_ij over the
/// directional table; zero results are dropped.
inline DataGraph symmetrize(const NeighborTable& table,
                            const std::vector<LocalScale>& scales, Metric metric) {
    const std::size_t n = table.indices.size();
    std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> directed;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < table.indices[i].size(); ++r) {
            const std::size_t j = table.indices[i][r];
            const double p = directional_probability(table.distances[i][r], scales[i]);
            const auto key = std::minmax(i, j);
            auto& slot = directed[{key.first, key.second}];
            (i < j ? slot.first : slot.second) = p;
        }
    }

    DataGraph g;
    g.n = n;
    g.k = table.k;
    g.metric = metric;
    g.scales = scales;
    g.edges.reserve(directed.size());
    for (const auto& [key, probs] : directed) {
        // a + b - ab in the form a + b(1-a): stays exactly 1 when a = 1 and
        // never rounds above 1
        const double p = std::min(1.0, probs.first + probs.second * (1.0 - probs.first));
        if (p > 0.0) g.edges.push_back({key.first, key.second, p});
    }
    g.finalize();
    return g;
}

/// Full pipeline: exact k-NN, per-point local scales, directional strengths,
/// symmetrisation.
inline DataGraph build_graph(const Tensor& x, std::size_t k, Metric metric = Metric::euclidean) {
    const NeighborTable table = knn(x, k, metric);
    std::vector<LocalScale> scales(x.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        scales[i] = fit_local_scale(table.distances[i]);
    }
    return symmetrize(table, scales, metric);
}

// ---------------------------------------------------------------------------
// Text export / import: header (n, k, metric, edges) then "i j p" lines.
// ---------------------------------------------------------------------------

inline void save_graph(const std::string& path, const DataGraph& g) {
    std::ofstream out(path, std::ios::binary); // binary: keep '\n' exact for byte-stable output
    if (!out) throw Error(detail::cat("save_graph: cannot open '", path, "'"));
    out << "umix-graph v1\n";
    out << "n " << g.n << "\n";
    out << "k " << g.k << "\n";
    out << "metric " << metric_name(g.metric) << "\n";
    out << "edges " << g.edges.size() << "\n";
    for (const Edge& e : g.edges) {
        out << e.i << " " << e.j << " " << format_double(e.p) << "\n";
    }
    if (!out) throw Error(detail::cat("save_graph: write failed for '", path, "'"));
}

inline DataGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(detail::cat("load_graph: cannot open '", path, "'"));
    std::string magic, version;
    in >> magic >> version;
    if (magic != "umix-graph" || version != "v1") {
        throw Error(detail::cat("load_graph: '", path, "' is not a umix-graph v1 file"));
    }
    DataGraph g;
    std::string key, metric;
    std::size_t edge_count = 0;
    in >> key >> g.n >> key >> g.k >> key >> metric >> key >> edge_count;
    if (!in) throw Error(detail::cat("load_graph: malformed header in '", path, "'"));
    g.metric = metric_from_name(metric);
    g.edges.resize(edge_count);
    for (std::size_t e = 0; e < edge_count; ++e) {
        in >> g.edges[e].i >> g.edges[e].j >> g.edges[e].p;
        if (!in) throw Error(detail::cat("load_graph: truncated edge list in '", path, "'"));
        if (g.edges[e].i >= g.edges[e].j || g.edges[e].j >= g.n) {
            throw Error(detail::cat("load_graph: bad edge in '", path, "'"));
        }
        if (!(g.edges[e].p > 0.0 && g.edges[e].p <= 1.0)) {
            throw Error(detail::cat("load_graph: edge strength out of (0,1] in '", path, "'"));
        }
    }
    g.finalize();
    return g;
}

} // namespace umix::graph

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

#include <cstddef>
#include <numeric>
#include <vector>

#include "umix/neighbor_graph.hpp"
#include "umix/rng.hpp"

namespace umix::edges {

struct PositiveEdge {
    std::size_t src = 0;
    std::size_t dst = 0;
    double p = 0.0;
};

/// One epoch's sampled edge set. Negatives are stored flat: the t-th negative
/// of positive k is (positives[k].src, neg_dst[k*m + t]).
struct EpochSample {
    std::vector<PositiveEdge> positives;
    std::vector<std::size_t> neg_dst;
    std::size_t m = 0;
    std::size_t n = 0;
};

/// Stochastic materialisation of one epoch. Draw order, fixed for
/// reproducibility: (1) one inclusion coin per stored edge in graph order,
/// followed immediately by an orientation coin when included; (2) after the
/// edge pass, m uniform endpoints per positive, in positive order.
/// Self-collisions among negative endpoints are allowed.
inline EpochSample sample_epoch(const graph::DataGraph& g, std::size_t m, Rng& rng) {
    if (g.edges.empty()) throw Error("sample_epoch: empty graph");
    if (m == 0) throw UsageError("sample_epoch: M must be at least 1");

    EpochSample epoch;
    epoch.m = m;
    epoch.n = g.n;
    for (const graph::Edge& e : g.edges) {
        if (!rng.bernoulli(e.p)) continue;
        if (rng.bernoulli(0.5)) {
            epoch.positives.push_back({e.i, e.j, e.p});
        } else {
            epoch.positives.push_back({e.j, e.i, e.p});
        }
    }
    epoch.neg_dst.resize(epoch.positives.size() * m);
    for (std::size_t k = 0; k < epoch.positives.size(); ++k) {
        for (std::size_t t = 0; t < m; ++t) {
            epoch.neg_dst[k * m + t] = rng.uniform_index(g.n);
        }
    }
    return epoch;
}

/// One mini-batch: a slice of positives plus exactly their attached
/// negatives, materialised as parallel index lists. pos_index maps each
/// positive back to its position in the epoch (per-edge state such as mixing
/// ratios is keyed on it).
struct EdgeBatch {
    std::vector<PositiveEdge> positives;
    std::vector<std::size_t> pos_index;
    std::vector<std::size_t> neg_src; // size m * |positives|
    std::vector<std::size_t> neg_dst;

    std::size_t edge_count() const { return positives.size() + neg_dst.size(); }
};

/// Shuffle the epoch's positives, then partition into batches of
/// `batch_size` positives (the final short batch is kept). Each batch carries
/// the negatives of its own positives.
inline std::vector<EdgeBatch> batches(const EpochSample& epoch, std::size_t batch_size, Rng& rng) {
    if (batch_size == 0) throw UsageError("batches: batch_size must be at least 1");
    std::vector<std::size_t> order(epoch.positives.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);

    std::vector<EdgeBatch> out;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        const std::size_t end = std::min(begin + batch_size, order.size());
        EdgeBatch b;
        b.positives.reserve(end - begin);
        b.pos_index.reserve(end - begin);
        b.neg_src.reserve((end - begin) * epoch.m);
        b.neg_dst.reserve((end - begin) * epoch.m);
        for (std::size_t r = begin; r < end; ++r) {
            const std::size_t k = order[r];
            b.positives.push_back(epoch.positives[k]);
            b.pos_index.push_back(k);
            for (std::size_t t = 0; t < epoch.m; ++t) {
                b.neg_src.push_back(epoch.positives[k].src);
                b.neg_dst.push_back(epoch.neg_dst[k * epoch.m + t]);
            }
        }
        out.push_back(std::move(b));
    }
    return out;
}

} // namespace umix::edges

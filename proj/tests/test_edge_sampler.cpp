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

#include <catch2/catch_amalgamated.hpp>

#include <map>

#include "umix/edge_sampler.hpp"
#include "test_helpers.hpp"

using namespace umix;
using edges::EdgeBatch;
using edges::EpochSample;
using graph::DataGraph;

namespace {

DataGraph make_graph(std::size_t n, std::vector<graph::Edge> edge_list) {
    DataGraph g;
    g.n = n;
    g.k = 1;
    g.edges = std::move(edge_list);
    g.finalize();
    return g;
}

DataGraph random_graph(std::size_t n, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    const auto x = tutil::random_tensor(n, 3, rng);
    return graph::build_graph(x, k);
}

} // namespace

TEST_CASE("strength-1 edges are included every epoch") {
    const DataGraph g = make_graph(4, {{0, 1, 1.0}, {1, 2, 1.0}, {2, 3, 1.0}});
    Rng rng(41);
    for (int e = 0; e < 50; ++e) {
        const EpochSample epoch = edges::sample_epoch(g, 2, rng);
        REQUIRE(epoch.positives.size() == 3);
    }
}

TEST_CASE("positives are always stored edges") {
    const DataGraph g = random_graph(30, 4, 42);
    Rng rng(43);
    for (int e = 0; e < 20; ++e) {
        const EpochSample epoch = edges::sample_epoch(g, 3, rng);
        for (const auto& pe : epoch.positives) {
            REQUIRE(g.p_at(pe.src, pe.dst) == pe.p);
            REQUIRE(pe.p > 0.0);
        }
    }
}

TEST_CASE("inclusion frequency tracks the edge strength") {
    const double p = 0.75;
    const DataGraph g = make_graph(2, {{0, 1, p}});
    Rng rng(44);
    const int epochs = 10000;
    int included = 0;
    for (int e = 0; e < epochs; ++e) {
        included += static_cast<int>(edges::sample_epoch(g, 1, rng).positives.size());
    }
    const double freq = static_cast<double>(included) / epochs;
    const double se = std::sqrt(p * (1.0 - p) / epochs);
    REQUIRE(std::abs(freq - p) <= 3.0 * se);
}

TEST_CASE("negatives: count is exactly M per positive and sources match") {
    const DataGraph g = random_graph(25, 4, 45);
    Rng rng(46);
    const EpochSample epoch = edges::sample_epoch(g, 5, rng);
    REQUIRE(epoch.neg_dst.size() == 5 * epoch.positives.size());
    Rng rng2(46);
    const auto bs = edges::batches(epoch, 4, rng2);
    for (const auto& b : bs) {
        REQUIRE(b.neg_src.size() == 5 * b.positives.size());
        REQUIRE(b.neg_dst.size() == b.neg_src.size());
        for (std::size_t k = 0; k < b.neg_src.size(); ++k) {
            REQUIRE(b.neg_src[k] == b.positives[k / 5].src);
        }
    }
}

TEST_CASE("expected positive count equals the strength sum") {
    const DataGraph g = random_graph(50, 5, 47);
    const double expected = g.sum_p();
    Rng rng(48);
    const int epochs = 2000;
    double total = 0.0;
    double var = 0.0;
    for (const auto& e : g.edges) var += e.p * (1.0 - e.p);
    for (int e = 0; e < epochs; ++e) {
        total += static_cast<double>(edges::sample_epoch(g, 1, rng).positives.size());
    }
    const double mean = total / epochs;
    const double se = std::sqrt(var / epochs);
    REQUIRE(std::abs(mean - expected) <= 3.0 * se);
}

TEST_CASE("negative endpoints are marginally uniform (chi-squared)") {
    const std::size_t n = 50;
    const DataGraph g = random_graph(n, 5, 49);
    Rng rng(50);
    std::vector<std::size_t> counts(n, 0);
    std::size_t draws = 0;
    while (draws < 100000) {
        const EpochSample epoch = edges::sample_epoch(g, 5, rng);
        for (std::size_t d : epoch.neg_dst) {
            if (draws == 100000) break;
            counts[d]++;
            ++draws;
        }
    }
    const double expected = 100000.0 / n;
    double chi2 = 0.0;
    for (std::size_t c : counts) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    // 0.999 quantile of chi-squared with 49 dof (Wilson-Hilferty)
    REQUIRE(chi2 < 85.43);
}

TEST_CASE("orientation of included edges is uniform") {
    const DataGraph g = make_graph(2, {{0, 1, 1.0}});
    Rng rng(51);
    int forward = 0;
    const int epochs = 10000;
    for (int e = 0; e < epochs; ++e) {
        const EpochSample epoch = edges::sample_epoch(g, 1, rng);
        forward += epoch.positives[0].src == 0 ? 1 : 0;
    }
    const double freq = forward / static_cast<double>(epochs);
    REQUIRE(std::abs(freq - 0.5) <= 3.0 * std::sqrt(0.25 / epochs));
}

TEST_CASE("batch partition: counts, short final batch, exact union") {
    EpochSample epoch;
    epoch.m = 5;
    epoch.n = 40;
    for (std::size_t k = 0; k < 10; ++k) {
        epoch.positives.push_back({k % 7, (k + 1) % 7, 0.5});
        for (std::size_t t = 0; t < 5; ++t) epoch.neg_dst.push_back((k * 5 + t) % 40);
    }
    Rng rng(52);
    const auto bs = edges::batches(epoch, 4, rng);
    REQUIRE(bs.size() == 3);
    REQUIRE(bs[0].positives.size() == 4);
    REQUIRE(bs[1].positives.size() == 4);
    REQUIRE(bs[2].positives.size() == 2);
    REQUIRE(bs[0].neg_dst.size() == 20);
    REQUIRE(bs[1].neg_dst.size() == 20);
    REQUIRE(bs[2].neg_dst.size() == 10);

    std::vector<bool> seen(10, false);
    for (const auto& b : bs) {
        for (std::size_t r = 0; r < b.positives.size(); ++r) {
            const std::size_t k = b.pos_index[r];
            REQUIRE_FALSE(seen[k]);
            seen[k] = true;
            // the batch carries exactly the epoch's positive and its negatives
            REQUIRE(b.positives[r].src == epoch.positives[k].src);
            REQUIRE(b.positives[r].dst == epoch.positives[k].dst);
            for (std::size_t t = 0; t < 5; ++t) {
                REQUIRE(b.neg_dst[r * 5 + t] == epoch.neg_dst[k * 5 + t]);
            }
        }
    }
    for (bool s : seen) REQUIRE(s);
}

TEST_CASE("one batch when batch_size covers all positives") {
    const DataGraph g = random_graph(20, 3, 53);
    Rng rng(54);
    const EpochSample epoch = edges::sample_epoch(g, 2, rng);
    const auto bs = edges::batches(epoch, epoch.positives.size() + 10, rng);
    REQUIRE(bs.size() == 1);
    REQUIRE(bs[0].positives.size() == epoch.positives.size());
}

TEST_CASE("same seed reproduces the identical epoch") {
    const DataGraph g = random_graph(30, 4, 55);
    Rng a(56), b(56);
    const EpochSample ea = edges::sample_epoch(g, 3, a);
    const EpochSample eb = edges::sample_epoch(g, 3, b);
    REQUIRE(ea.positives.size() == eb.positives.size());
    for (std::size_t k = 0; k < ea.positives.size(); ++k) {
        REQUIRE(ea.positives[k].src == eb.positives[k].src);
        REQUIRE(ea.positives[k].dst == eb.positives[k].dst);
    }
    REQUIRE(ea.neg_dst == eb.neg_dst);
}

TEST_CASE("error contracts") {
    DataGraph empty;
    empty.n = 5;
    Rng rng(57);
    REQUIRE_THROWS_AS(edges::sample_epoch(empty, 3, rng), Error);
    const DataGraph g = make_graph(2, {{0, 1, 1.0}});
    REQUIRE_THROWS_AS(edges::sample_epoch(g, 0, rng), Error);
    EpochSample epoch;
    epoch.m = 1;
    REQUIRE_THROWS_AS(edges::batches(epoch, 0, rng), Error);
}

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

#include <algorithm>

#include "umix/neighbor_graph.hpp"
#include "test_helpers.hpp"

using namespace umix;
using ad::Tensor;
using graph::DataGraph;
using graph::LocalScale;
using graph::Metric;
using graph::NeighborTable;

namespace {

/// Independent O(N^2) oracle: full sort per point by (distance, index).
NeighborTable knn_oracle(const Tensor& x, std::size_t k) {
    NeighborTable t;
    t.k = k;
    const std::size_t n = x.rows();
    t.indices.resize(n);
    t.distances.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (std::size_t c = 0; c < x.cols(); ++c) {
                const double d = x.at(i, c) - x.at(j, c);
                s += d * d;
            }
            all.emplace_back(std::sqrt(s), j);
        }
        std::sort(all.begin(), all.end());
        for (std::size_t r = 0; r < k; ++r) {
            t.distances[i].push_back(all[r].first);
            t.indices[i].push_back(all[r].second);
        }
    }
    return t;
}

} // namespace

TEST_CASE("knn on collinear points") {
    const Tensor x = Tensor::from_rows({{0.0}, {1.0}, {3.0}});
    const NeighborTable t = graph::knn(x, 1);
    REQUIRE(t.indices[0] == std::vector<std::size_t>{1});
    REQUIRE(t.indices[1] == std::vector<std::size_t>{0});
    REQUIRE(t.indices[2] == std::vector<std::size_t>{1});
}

TEST_CASE("knn equals the brute-force sort oracle on random data") {
    Rng rng(21);
    const Tensor x = tutil::random_tensor(50, 5, rng);
    const NeighborTable got = graph::knn(x, 7);
    const NeighborTable want = knn_oracle(x, 7);
    REQUIRE(got.indices == want.indices);
    for (std::size_t i = 0; i < 50; ++i) {
        for (std::size_t r = 0; r < 7; ++r) {
            REQUIRE(got.distances[i][r] == Catch::Approx(want.distances[i][r]).margin(1e-12));
        }
    }
}

TEST_CASE("duplicated points list each other first at distance zero") {
    const Tensor x = Tensor::from_rows({{1.0, 1.0}, {1.0, 1.0}, {5.0, 5.0}});
    const NeighborTable t = graph::knn(x, 2);
    REQUIRE(t.indices[0][0] == 1);
    REQUIRE(t.distances[0][0] == 0.0);
    REQUIRE(t.indices[1][0] == 0);
    REQUIRE(t.distances[1][0] == 0.0);
}

TEST_CASE("knn ties break toward the lower index") {
    const Tensor x = Tensor::from_rows({{0.0}, {1.0}, {-1.0}});
    const NeighborTable t = graph::knn(x, 2);
    REQUIRE(t.indices[0] == std::vector<std::size_t>{1, 2});
}

TEST_CASE("knn rejects K >= N and non-finite features") {
    const Tensor x = Tensor::from_rows({{0.0}, {1.0}});
    REQUIRE_THROWS_AS(graph::knn(x, 2), Error);
    Tensor bad(2, 1);
    bad.raw()[1] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(graph::knn(bad, 1), Error);
}

TEST_CASE("fit_local_scale solves the weight-sum identity") {
    const std::vector<double> dists = {1.0, 2.0, 4.0};
    const LocalScale s = graph::fit_local_scale(dists);
    REQUIRE(s.rho == 1.0);
    double sum = 0.0;
    for (double d : dists) sum += std::exp(-std::max(0.0, d - s.rho) / s.sigma);
    REQUIRE(std::abs(sum - std::log2(3.0)) < 1e-4);
}

TEST_CASE("fit_local_scale hits the lower clamp for degenerate lists") {
    // all distances equal: the sum is K for every sigma
    const std::vector<double> equal = {2.0, 2.0, 2.0};
    const LocalScale s1 = graph::fit_local_scale(equal);
    REQUIRE(s1.sigma == Catch::Approx(1e-3 * 2.0).epsilon(1e-12));

    // K=2 with distances (1,2): the target 1.0 is reached only as sigma -> 0
    const std::vector<double> two = {1.0, 2.0};
    const LocalScale s2 = graph::fit_local_scale(two);
    REQUIRE(s2.sigma == Catch::Approx(1e-3 * 1.5).epsilon(1e-12));
}

TEST_CASE("directional probability identities") {
    const LocalScale s{1.0, 0.5};
    REQUIRE(graph::directional_probability(1.0, s) == 1.0);
    REQUIRE(graph::directional_probability(1.5, s) == Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
    REQUIRE(graph::directional_probability(0.2, s) == 1.0); // clamped numerator
}

TEST_CASE("symmetrisation is the probabilistic OR") {
    // three points; neighbour lists crafted so the directional strengths are
    // exactly (1, 0), (0.5, 0.5) and (0, 0) for the three pairs
    NeighborTable t;
    t.k = 1;
    t.indices = {{1}, {0}, {0}};
    t.distances = {{1.0}, {1.0}, {5.0}};
    const double sigma_half = 0.7 / std::log(2.0); // exp(-0.7/sigma) = 0.5
    std::vector<LocalScale> scales = {
        {0.3, sigma_half}, // p(1|0) = 0.5
        {0.3, sigma_half}, // p(0|1) = 0.5
        {5.0, 1.0},        // p(0|2) = 1
    };
    const DataGraph g = graph::symmetrize(t, scales, Metric::euclidean);
    REQUIRE(g.p_at(0, 1) == Catch::Approx(0.75).epsilon(1e-12));
    REQUIRE(g.p_at(0, 2) == 1.0); // OR with certainty
    REQUIRE(g.p_at(1, 2) == 0.0); // no directional entries: edge absent
    REQUIRE(g.edges.size() == 2);
}

TEST_CASE("graph invariants on random data") {
    Rng rng(22);
    for (int rep = 0; rep < 3; ++rep) {
        const std::size_t n = 40 + rep * 17;
        const Tensor x = tutil::random_tensor(n, 4, rng);
        const DataGraph g = graph::build_graph(x, 6);
        REQUIRE(g.n == n);
        REQUIRE(g.edges.size() <= n * 6);

        std::vector<bool> has_unit(n, false);
        for (const auto& e : g.edges) {
            REQUIRE(e.i < e.j);
            REQUIRE(e.p > 0.0);
            REQUIRE(e.p <= 1.0);
            REQUIRE(g.p_at(e.i, e.j) == g.p_at(e.j, e.i));
            if (e.p == 1.0) {
                has_unit[e.i] = true;
                has_unit[e.j] = true;
            }
        }
        // nearest-neighbour edges keep strength exactly 1 through the OR
        for (std::size_t i = 0; i < n; ++i) REQUIRE(has_unit[i]);
    }
}

TEST_CASE("symmetry against a dense reference on random lookups") {
    Rng rng(23);
    const Tensor x = tutil::random_tensor(60, 3, rng);
    const DataGraph g = graph::build_graph(x, 5);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t i = rng.uniform_index(60);
        const std::size_t j = rng.uniform_index(60);
        if (i == j) continue;
        REQUIRE(g.p_at(i, j) == g.p_at(j, i));
    }
}

TEST_CASE("graph construction is deterministic") {
    Rng rng(24);
    const Tensor x = tutil::random_tensor(30, 3, rng);
    const DataGraph a = graph::build_graph(x, 4);
    const DataGraph b = graph::build_graph(x, 4);
    REQUIRE(a.edges.size() == b.edges.size());
    for (std::size_t e = 0; e < a.edges.size(); ++e) {
        REQUIRE(a.edges[e].i == b.edges[e].i);
        REQUIRE(a.edges[e].j == b.edges[e].j);
        REQUIRE(a.edges[e].p == b.edges[e].p);
    }
}

TEST_CASE("graph file round-trips and is byte-stable") {
    Rng rng(25);
    const Tensor x = tutil::random_tensor(25, 3, rng);
    const DataGraph g = graph::build_graph(x, 4);
    const auto dir = tutil::scratch_dir("graph");
    const std::string path = (dir / "g.txt").string();
    graph::save_graph(path, g);
    const DataGraph loaded = graph::load_graph(path);
    REQUIRE(loaded.n == g.n);
    REQUIRE(loaded.k == g.k);
    REQUIRE(loaded.edges.size() == g.edges.size());
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
        REQUIRE(loaded.edges[e].i == g.edges[e].i);
        REQUIRE(loaded.edges[e].j == g.edges[e].j);
        REQUIRE(loaded.edges[e].p == g.edges[e].p);
    }
    const std::string path2 = (dir / "g2.txt").string();
    graph::save_graph(path2, loaded);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    const std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    REQUIRE(b1 == b2);
}

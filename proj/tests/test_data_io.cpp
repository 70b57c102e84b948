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

#include <fstream>
#include <set>

#include "umix/data_io.hpp"
#include "test_helpers.hpp"

using namespace umix;
using ad::Tensor;
using data::Dataset;
using data::Scaler;

namespace {

std::string write_file(const std::string& name, const std::string& content) {
    const auto dir = tutil::scratch_dir("csv");
    const std::string path = (dir / name).string();
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

} // namespace

TEST_CASE("csv fixture loads to exact matrices") {
    const std::string path = write_file("fix.csv",
                                        "a,b,target\n"
                                        "1,2,3\n"
                                        "4,5,6\n"
                                        "7,8,9\n");
    const Dataset d = data::load_csv(path, "target");
    REQUIRE(d.x == Tensor::from_rows({{1, 2}, {4, 5}, {7, 8}}));
    REQUIRE(d.y == Tensor::from_rows({{3}, {6}, {9}}));
    REQUIRE(d.feature_names == std::vector<std::string>{"a", "b"});
    REQUIRE(d.target_name == "target");
}

TEST_CASE("csv error contracts") {
    REQUIRE_THROWS_AS(data::load_csv("/nonexistent/file.csv", "y"), Error);

    const std::string no_target = write_file("nt.csv", "a,b\n1,2\n");
    REQUIRE_THROWS_AS(data::load_csv(no_target, "y"), Error);

    // non-numeric cell on file line 7
    const std::string bad = write_file("bad.csv",
                                       "a,y\n"
                                       "1,1\n2,2\n3,3\n4,4\n5,5\n"
                                       "oops,6\n");
    try {
        data::load_csv(bad, "y");
        FAIL("expected an error");
    } catch (const Error& e) {
        const std::string msg = e.what();
        REQUIRE(msg.find(":7") != std::string::npos);
        REQUIRE(msg.find("oops") != std::string::npos);
    }

    const std::string ragged = write_file("rag.csv", "a,y\n1,2,3\n");
    REQUIRE_THROWS_AS(data::load_csv(ragged, "y"), Error);
}

TEST_CASE("series csv ignores non-numeric columns") {
    const std::string path = write_file("prices.csv",
                                        "date,close\n"
                                        "2020-01-01,10.5\n"
                                        "2020-01-02,11.25\n");
    const auto prices = data::load_series_csv(path, "close");
    REQUIRE(prices == std::vector<double>{10.5, 11.25});
    REQUIRE_THROWS_AS(data::load_series_csv(path, "open"), Error);
}

TEST_CASE("standardize then destandardize is the identity") {
    Rng rng(81);
    const Tensor x = tutil::random_tensor(40, 5, rng, -3.0, 7.0);
    const Scaler s = Scaler::fit(x, true);
    const Tensor z = s.transform(x);
    const Tensor back = s.inverse(z);
    for (std::size_t k = 0; k < x.size(); ++k) {
        REQUIRE(std::abs(back.raw()[k] - x.raw()[k]) < 1e-10);
    }
    // transformed columns have mean 0, population std 1
    for (std::size_t c = 0; c < z.cols(); ++c) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) mean += z.at(i, c);
        mean /= static_cast<double>(z.rows());
        for (std::size_t i = 0; i < z.rows(); ++i) {
            var += (z.at(i, c) - mean) * (z.at(i, c) - mean);
        }
        var /= static_cast<double>(z.rows());
        REQUIRE(std::abs(mean) < 1e-12);
        REQUIRE(var == Catch::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("constant columns are dropped with a warning") {
    Tensor x(10, 3);
    Rng rng(82);
    for (std::size_t i = 0; i < 10; ++i) {
        x.at(i, 0) = rng.uniform01();
        x.at(i, 1) = 4.2; // constant
        x.at(i, 2) = rng.uniform01();
    }
    std::vector<std::string> warnings;
    const Scaler s =
        Scaler::fit(x, true, [&](const std::string& w) { warnings.push_back(w); });
    REQUIRE(s.out_cols() == 2);
    REQUIRE(s.kept() == std::vector<std::size_t>{0, 2});
    REQUIRE(warnings.size() == 1);
    REQUIRE(s.transform(x).cols() == 2);
}

TEST_CASE("fold splitting: sizes, disjointness, determinism, variety") {
    const auto folds = data::split_folds(10, 4, 0.2, 123);
    REQUIRE(folds.size() == 4);
    for (const auto& f : folds) {
        REQUIRE(f.test.size() == 2);
        REQUIRE(f.train.size() == 8);
        std::set<std::size_t> all(f.train.begin(), f.train.end());
        all.insert(f.test.begin(), f.test.end());
        REQUIRE(all.size() == 10);
    }
    const auto again = data::split_folds(10, 4, 0.2, 123);
    for (std::size_t f = 0; f < 4; ++f) {
        REQUIRE(folds[f].train == again[f].train);
        REQUIRE(folds[f].test == again[f].test);
    }
    // no two folds identical for a larger N
    const auto big = data::split_folds(60, 6, 0.2, 7);
    for (std::size_t a = 0; a < big.size(); ++a) {
        for (std::size_t b = a + 1; b < big.size(); ++b) {
            REQUIRE(big[a].test != big[b].test);
        }
    }
}

TEST_CASE("20 folds of N=506 cover every index in some test set") {
    const auto folds = data::split_folds(506, 20, 0.1, 0);
    std::vector<bool> covered(506, false);
    for (const auto& f : folds) {
        for (std::size_t i : f.test) covered[i] = true;
    }
    std::size_t total = 0;
    for (bool c : covered) total += c ? 1 : 0;
    // expected coverage 1 - (1 - 0.1)^20 ~ 0.88 of 506; the fixed seed gives a
    // deterministic count
    REQUIRE(total > 400);
}

TEST_CASE("windowing boundaries and indices") {
    std::vector<double> short_series(61);
    std::iota(short_series.begin(), short_series.end(), 1.0);
    const auto one = data::window_series(short_series, 60);
    REQUIRE(one.windows.rows() == 1);
    REQUIRE(one.targets.at(0, 0) == 61.0);

    std::vector<double> prices(65);
    std::iota(prices.begin(), prices.end(), 1.0); // 1..65
    const auto ws = data::window_series(prices, 60);
    REQUIRE(ws.windows.rows() == 5);
    REQUIRE(ws.targets.at(0, 0) == 61.0);
    REQUIRE(ws.windows.at(0, 0) == 1.0);
    REQUIRE(ws.windows.at(0, 59) == 60.0);

    std::vector<double> tiny(60);
    REQUIRE_THROWS_AS(data::window_series(tiny, 60), Error);
}

TEST_CASE("window reconstruction reproduces the series interior") {
    Rng rng(83);
    std::vector<double> prices(120);
    for (double& p : prices) p = rng.uniform(10.0, 20.0);
    const auto ws = data::window_series(prices, 30);
    for (std::size_t t = 1; t < ws.windows.rows(); ++t) {
        // window t's last element equals target t-1
        REQUIRE(ws.windows.at(t, 29) == ws.targets.at(t - 1, 0));
    }
    // no future leakage: every feature index < target index
    for (std::size_t t = 0; t < ws.windows.rows(); ++t) {
        REQUIRE(ws.start[t] + 30 - 1 < ws.start[t] + 30);
        REQUIRE(ws.targets.at(t, 0) == prices[ws.start[t] + 30]);
    }
}

TEST_CASE("chronological split keeps windows inside their segment") {
    Rng rng(84);
    std::vector<double> prices(200);
    for (std::size_t i = 0; i < prices.size(); ++i) prices[i] = static_cast<double>(i);
    const auto [train, test] = data::chronological_split(prices, 0.7, 20);
    // train windows only see prices < 140; test windows only see prices >= 140
    for (double v : train.x.raw()) REQUIRE(v < 140.0);
    for (double v : train.y.raw()) REQUIRE(v < 140.0);
    for (double v : test.x.raw()) REQUIRE(v >= 140.0);
}

TEST_CASE("synthetic series: positivity, shock ratio, determinism") {
    for (auto kind : {data::SeriesKind::trend, data::SeriesKind::shock,
                      data::SeriesKind::high_vol}) {
        const auto prices = data::synthetic_series(kind, 500, 11);
        REQUIRE(prices.size() == 500);
        for (double p : prices) REQUIRE(p > 0.0);
        const auto again = data::synthetic_series(kind, 500, 11);
        REQUIRE(prices == again);
    }
    const auto shock = data::synthetic_series(data::SeriesKind::shock, 500, 12);
    const std::size_t s = static_cast<std::size_t>(0.7 * 500);
    const double ratio = shock[s] / shock[s - 1];
    REQUIRE(ratio > 0.60);
    REQUIRE(ratio < 0.70);
    REQUIRE_THROWS_AS(data::synthetic_series(data::SeriesKind::trend, 100, 1), Error);
}

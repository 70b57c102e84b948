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

#include "umix/model_io.hpp"
#include "test_helpers.hpp"

using namespace umix;
using ad::Tensor;
using train::FittedModel;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

FittedModel trained_toy(nn::EmbedKind kind) {
    train::TrainConfig cfg;
    cfg.method = train::Method::umap_mixup;
    cfg.k = 4;
    cfg.m_negatives = 2;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 3;
    Rng rng(10);
    if (kind == nn::EmbedKind::mlp) {
        cfg.model.embed_widths = {6, 3};
        ad::Tensor x = tutil::random_tensor(40, 3, rng);
        ad::Tensor y = tutil::random_tensor(40, 1, rng);
        return train::train(cfg, {std::move(x), std::move(y), {"a", "b", "c"}, "y"});
    }
    cfg.model.embed = nn::EmbedKind::lstm;
    cfg.model.lstm_hidden = 4;
    cfg.model.window = 10;
    const auto prices = data::synthetic_series(data::SeriesKind::trend, 150, 4);
    const auto [train_set, test_set] = data::chronological_split(prices, 0.8, 10);
    return train::train(cfg, train_set);
}

} // namespace

TEST_CASE("model round-trip preserves predictions bit for bit") {
    for (auto kind : {nn::EmbedKind::mlp, nn::EmbedKind::lstm}) {
        const FittedModel model = trained_toy(kind);
        const auto dir = tutil::scratch_dir("model");
        const std::string path = (dir / "m.umx").string();
        io::save_model(path, model);
        const FittedModel loaded = io::load_model(path);

        Rng rng(11);
        const Tensor x = kind == nn::EmbedKind::mlp
                             ? tutil::random_tensor(5, 3, rng)
                             : tutil::random_tensor(5, 10, rng, 10.0, 20.0);
        REQUIRE(model.predict(x) == loaded.predict(x));
        REQUIRE(model.embed(x) == loaded.embed(x));

        // re-saving reproduces the identical bytes
        const std::string path2 = (dir / "m2.umx").string();
        io::save_model(path2, loaded);
        REQUIRE(slurp(path) == slurp(path2));
    }
}

TEST_CASE("model loader rejects malformed files") {
    const auto dir = tutil::scratch_dir("badmodel");
    const std::string bad_magic = (dir / "bad.umx").string();
    {
        std::ofstream out(bad_magic, std::ios::binary);
        out << "not-a-model v9\n";
    }
    REQUIRE_THROWS_AS(io::load_model(bad_magic), Error);
    REQUIRE_THROWS_AS(io::load_model((dir / "missing.umx").string()), Error);

    // truncated parameter payload
    const FittedModel model = trained_toy(nn::EmbedKind::mlp);
    const std::string full = (dir / "full.umx").string();
    io::save_model(full, model);
    const std::string content = slurp(full);
    const std::string cut = (dir / "cut.umx").string();
    {
        std::ofstream out(cut, std::ios::binary);
        out << content.substr(0, content.size() - 16);
    }
    REQUIRE_THROWS_AS(io::load_model(cut), Error);
}

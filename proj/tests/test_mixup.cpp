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

#include "umix/mixup.hpp"
#include "test_helpers.hpp"

using namespace umix;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using mix::LossKind;
using nn::ModelSpec;
using nn::SplitModel;

namespace {

SplitModel random_model(std::uint64_t seed, std::vector<std::size_t> head = {}) {
    ModelSpec spec;
    spec.embed = nn::EmbedKind::mlp;
    spec.d_x = 3;
    spec.d_y = 1;
    spec.embed_widths = {8, 4};
    spec.head_widths = std::move(head);
    Rng rng(seed);
    return SplitModel(spec, rng);
}

Tensor lambda_col(std::size_t rows, double v) {
    Tensor t(rows, 1);
    for (double& x : t.raw()) x = v;
    return t;
}

} // namespace

TEST_CASE("mix_inputs endpoints, midpoint, degenerate pair") {
    const Tensor xi = Tensor::from_rows({{0.0, 0.0}});
    const Tensor xj = Tensor::from_rows({{2.0, 4.0}});
    const Tensor yi = Tensor::from_rows({{1.0}});
    const Tensor yj = Tensor::from_rows({{3.0}});

    const auto [x1, y1] = mix::mix_inputs(xi, yi, xj, yj, 1.0);
    REQUIRE(x1 == xi);
    REQUIRE(y1 == yi);

    const auto [xm, ym] = mix::mix_inputs(xi, yi, xj, yj, 0.5);
    REQUIRE(xm.at(0, 0) == 1.0);
    REQUIRE(xm.at(0, 1) == 2.0);
    REQUIRE(ym.at(0, 0) == 2.0);

    for (double l : {0.0, 0.3, 0.8, 1.0}) {
        const auto [xs, ys] = mix::mix_inputs(xi, yi, xi, yi, l);
        REQUIRE(xs == xi);
    }

    REQUIRE_THROWS_AS(mix::mix_inputs(xi, yi, Tensor(1, 3), yj, 0.5), Error);
    REQUIRE_THROWS_AS(mix::mix_inputs(xi, yi, xj, yj, 1.5), Error);
}

TEST_CASE("embedding mixup at lambda=1 collapses to the plain forward") {
    const SplitModel model = random_model(61);
    Rng rng(62);
    const Tensor x = tutil::random_tensor(4, 3, rng);
    const Tensor x2 = tutil::random_tensor(4, 3, rng);
    const Tensor pred = mix::embedding_mixup_predict(model, x, x2, 1.0);
    REQUIRE(pred == model.predict(x));
    const Tensor pred0 = mix::embedding_mixup_predict(model, x, x2, 0.0);
    REQUIRE(pred0 == model.predict(x2));
}

TEST_CASE("linear head: mixed prediction equals mixed predictions") {
    const SplitModel model = random_model(63); // default head is linear
    Rng rng(64);
    const Tensor x = tutil::random_tensor(3, 3, rng);
    const Tensor x2 = tutil::random_tensor(3, 3, rng);
    const double l = 0.35;
    const Tensor mixed = mix::embedding_mixup_predict(model, x, x2, l);
    const Tensor a = model.predict(x);
    const Tensor b = model.predict(x2);
    for (std::size_t i = 0; i < mixed.rows(); ++i) {
        REQUIRE(mixed.at(i, 0) ==
                Catch::Approx(l * a.at(i, 0) + (1.0 - l) * b.at(i, 0)).epsilon(1e-12));
    }
}

TEST_CASE("nonlinear head: embedding mixing differs from output mixing somewhere") {
    const SplitModel model = random_model(65, {6}); // relu hidden layer in the head
    Rng rng(66);
    bool differs = false;
    for (int rep = 0; rep < 20 && !differs; ++rep) {
        const Tensor x = tutil::random_tensor(1, 3, rng);
        const Tensor x2 = tutil::random_tensor(1, 3, rng);
        const double l = 0.5;
        const double mixed = mix::embedding_mixup_predict(model, x, x2, l).item();
        const double outputs = l * model.predict(x).item() + (1.0 - l) * model.predict(x2).item();
        differs = std::abs(mixed - outputs) > 1e-9;
    }
    REQUIRE(differs);
}

TEST_CASE("mixed_loss values") {
    Tape tape;
    const Tensor y = Tensor::from_rows({{5.0}});
    const Tensor y2 = Tensor::from_rows({{9.0}});

    // prediction equal to the mixed target
    {
        const Tensor lam = lambda_col(1, 0.25);
        Var pred = tape.constant(Tensor::from_rows({{8.0}})); // 0.25*5 + 0.75*9 = 8
        Var loss = mix::mixed_loss(tape, pred, y, y2, lam, LossKind::squared_error);
        REQUIRE(loss.value().item() == 0.0);
    }
    // lambda = 1: plain squared error
    {
        Var pred = tape.constant(Tensor::from_rows({{3.0}}));
        Var loss = mix::mixed_loss(tape, pred, y, y2, lambda_col(1, 1.0),
                                   LossKind::squared_error);
        REQUIRE(loss.value().item() == 4.0);
    }
    // hand arithmetic: lambda=0.25, y=0, y'=4, pred=2 -> (2-3)^2 = 1
    {
        Var pred = tape.constant(Tensor::from_rows({{2.0}}));
        Var loss = mix::mixed_loss(tape, pred, Tensor::from_rows({{0.0}}),
                                   Tensor::from_rows({{4.0}}), lambda_col(1, 0.25),
                                   LossKind::squared_error);
        REQUIRE(loss.value().item() == 1.0);
    }
    REQUIRE(mix::mixed_loss_value(2.0, 0.0, 4.0, 0.25, LossKind::squared_error) == 1.0);
    REQUIRE_THROWS_AS(mix::loss_from_name("absolute_error"), Error);
}

TEST_CASE("target convexity and pair-swap symmetry") {
    Rng rng(67);
    const SplitModel model = random_model(68);
    for (int rep = 0; rep < 30; ++rep) {
        const Tensor x = tutil::random_tensor(2, 3, rng);
        const Tensor x2 = tutil::random_tensor(2, 3, rng);
        const Tensor y = tutil::random_tensor(2, 1, rng);
        const Tensor y2 = tutil::random_tensor(2, 1, rng);
        const double l = rng.uniform01();

        const auto [xm, ym] = mix::mix_inputs(x, y, x2, y2, l);
        for (std::size_t kk = 0; kk < ym.size(); ++kk) {
            REQUIRE(ym.raw()[kk] >= std::min(y.raw()[kk], y2.raw()[kk]) - 1e-12);
            REQUIRE(ym.raw()[kk] <= std::max(y.raw()[kk], y2.raw()[kk]) + 1e-12);
        }

        Tape t1, t2;
        nn::ParamBinding p1(t1, model.params(), false), p2(t2, model.params(), false);
        Var pred1 = mix::embedding_mixup_forward(model, t1, p1, x, x2, lambda_col(2, l));
        Var loss1 = mix::mixed_loss(t1, pred1, y, y2, lambda_col(2, l), LossKind::squared_error);
        Var pred2 = mix::embedding_mixup_forward(model, t2, p2, x2, x, lambda_col(2, 1.0 - l));
        Var loss2 =
            mix::mixed_loss(t2, pred2, y2, y, lambda_col(2, 1.0 - l), LossKind::squared_error);
        REQUIRE(loss1.value().item() == Catch::Approx(loss2.value().item()).epsilon(1e-12));
    }
}

TEST_CASE("gradients flow through both branches at lambda=0.5") {
    const SplitModel model = random_model(69);
    Rng rng(70);
    const Tensor x = tutil::random_tensor(3, 3, rng);
    const Tensor x2 = tutil::random_tensor(3, 3, rng);
    const Tensor y = tutil::random_tensor(3, 1, rng);
    const Tensor y2 = tutil::random_tensor(3, 1, rng);
    const Tensor lam = lambda_col(3, 0.5);

    const auto loss_of = [&](const nn::ParamStore& params) {
        SplitModel probe = SplitModel::uninitialized(model.spec());
        for (auto& p : probe.params()) p.value = params.at(p.name);
        Tape tape;
        nn::ParamBinding binding(tape, probe.params(), false);
        Var pred = mix::embedding_mixup_forward(probe, tape, binding, x, x2, lam);
        return mix::mixed_loss(tape, pred, y, y2, lam, LossKind::squared_error).value().item();
    };

    Tape tape;
    nn::ParamBinding binding(tape, model.params());
    Var pred = mix::embedding_mixup_forward(model, tape, binding, x, x2, lam);
    Var loss = mix::mixed_loss(tape, pred, y, y2, lam, LossKind::squared_error);
    tape.backward(loss);
    const auto analytic = nn::collect_gradients(tape, binding);

    const auto numeric = tutil::fd_param_grads(model.params(), loss_of);
    bool some_nonzero = false;
    for (const auto& [name, num] : numeric) {
        INFO(name);
        REQUIRE(tutil::grad_close(analytic.at(name), num));
        for (double v : analytic.at(name).raw()) some_nonzero = some_nonzero || v != 0.0;
    }
    REQUIRE(some_nonzero);
}

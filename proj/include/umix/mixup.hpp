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

#include <string>
#include <utility>

#include "umix/autodiff.hpp"
#include "umix/nn.hpp"

namespace umix::mix {

using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class LossKind { squared_error };

inline LossKind loss_from_name(const std::string& name) {
    if (name == "squared_error") return LossKind::squared_error;
    throw UsageError(detail::cat("unknown loss '", name, "'"));
}

inline std::string loss_name(LossKind) { return "squared_error"; }

/// Convex combination of two samples: (lambda x_i + (1-lambda) x_j,
/// lambda y_i + (1-lambda) y_j). Shapes must match pairwise.
inline std::pair<Tensor, Tensor> mix_inputs(const Tensor& xi, const Tensor& yi, const Tensor& xj,
                                            const Tensor& yj, double lambda) {
    if (!xi.same_shape(xj) || !yi.same_shape(yj)) {
        throw Error(detail::cat("mix_inputs: shape mismatch (", xi.rows(), "x", xi.cols(), " vs ",
                                xj.rows(), "x", xj.cols(), ", ", yi.rows(), "x", yi.cols(), " vs ",
                                yj.rows(), "x", yj.cols(), ")"));
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error("mix_inputs: lambda must be in [0, 1]");
    Tensor x(xi.rows(), xi.cols());
    Tensor y(yi.rows(), yi.cols());
    for (std::size_t k = 0; k < x.size(); ++k) {
        x.raw()[k] = lambda * xi.raw()[k] + (1.0 - lambda) * xj.raw()[k];
    }
    for (std::size_t k = 0; k < y.size(); ++k) {
        y.raw()[k] = lambda * yi.raw()[k] + (1.0 - lambda) * yj.raw()[k];
    }
    return {std::move(x), std::move(y)};
}

/// Row-wise convex combination of two matrices already on the tape, with a
/// per-row ratio column [B x 1].
inline Var mix_rows(Var a, Var b, Var lambda_col) {
    Var one_minus = ad::affine(lambda_col, -1.0, 1.0);
    return ad::add(ad::mul(a, lambda_col), ad::mul(b, one_minus));
}

/// Embedding-space mixing: z = h(x), z' = h(x'), z~ = lambda z + (1-lambda) z',
/// prediction g(z~). Differentiable through both branches. `lambda_col` holds
/// one ratio per row. Manifold-style mixing and graph-regularised mixing share
/// this exact forward; they differ only in pair sampling and in the
/// regulariser added by the trainer.
inline Var embedding_mixup_forward(const nn::SplitModel& model, Tape& tape,
                                   const nn::ParamBinding& p, const Tensor& x, const Tensor& x2,
                                   const Tensor& lambda_col) {
    Var z = model.embed(tape, p, x);
    Var z2 = model.embed(tape, p, x2);
    Var mixed = mix_rows(z, z2, tape.constant(lambda_col));
    return model.head(tape, p, mixed);
}

/// Same forward, plus the two embeddings (the trainer reuses them for the
/// topology regulariser).
struct MixupForward {
    Var z_src;
    Var z_dst;
    Var y_pred;
};

inline MixupForward embedding_mixup_forward_full(const nn::SplitModel& model, Tape& tape,
                                                 const nn::ParamBinding& p, const Tensor& x,
                                                 const Tensor& x2, const Tensor& lambda_col) {
    Var z = model.embed(tape, p, x);
    Var z2 = model.embed(tape, p, x2);
    Var mixed = mix_rows(z, z2, tape.constant(lambda_col));
    return {z, z2, model.head(tape, p, mixed)};
}

/// Single-pair convenience: prediction for one mixed pair, no gradients.
inline Tensor embedding_mixup_predict(const nn::SplitModel& model, const Tensor& x,
                                      const Tensor& x2, double lambda) {
    Tape tape;
    nn::ParamBinding p(tape, model.params(), false);
    Tensor lam(x.rows(), 1);
    for (double& v : lam.raw()) v = lambda;
    return embedding_mixup_forward(model, tape, p, x, x2, lam).value();
}

/// Loss of a prediction against the row-wise mixed target
/// lambda y + (1-lambda) y'. Targets and ratios are constants.
inline Var mixed_loss(Tape& tape, Var y_pred, const Tensor& y, const Tensor& y2,
                      const Tensor& lambda_col, LossKind kind) {
    if (kind != LossKind::squared_error) throw UsageError("mixed_loss: unsupported loss");
    if (!y.same_shape(y2)) {
        throw Error(detail::cat("mixed_loss: target shapes differ (", y.rows(), "x", y.cols(),
                                " vs ", y2.rows(), "x", y2.cols(), ")"));
    }
    Var target = mix_rows(tape.constant(y), tape.constant(y2), tape.constant(lambda_col));
    return ad::mean_squared_error(y_pred, target);
}

/// Scalar helper for the spec'd single-sample form.
inline double mixed_loss_value(double y_pred, double y, double y2, double lambda, LossKind kind) {
    if (kind != LossKind::squared_error) throw UsageError("mixed_loss: unsupported loss");
    const double target = lambda * y + (1.0 - lambda) * y2;
    const double r = y_pred - target;
    return r * r;
}

} // namespace umix::mix

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
#include <span>
#include <vector>

#include "umix/autodiff.hpp"
#include "umix/edge_sampler.hpp"
#include "umix/neighbor_graph.hpp"

namespace umix::umap {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Similarity values are clamped to [kEps, 1 - kEps] before entering a log:
/// the repulsive term diverges as q -> 1, and constants built from membership
/// strengths need the same guard (strengths of exactly 1 occur at every
/// nearest-neighbour edge).
inline constexpr double kEps = 1e-4;

/// Shape parameters of the embedding-side kernel q(d) = (1 + a d^(2b))^-1.
struct KernelParams {
    double a = 1.0;
    double b = 1.0;
    double min_dist = 0.0; // the fit target, when fitted

    void validate() const {
        if (!(a > 0.0) || !(b > 0.0)) throw UsageError("KernelParams: a and b must be positive");
    }
};

/// Least-squares fit of (a, b) against the target curve
///   psi(d) = 1                      for d <= min_dist
///          = exp(-(d - min_dist))   otherwise
/// over 300 grid points on [0, 3]: coarse grid search then Levenberg-
/// Marquardt in log-parameter space. Max abs deviation stays below 0.03 for
/// the min_dist range used in practice.
inline KernelParams fit_ab(double min_dist) {
    if (min_dist < 0.0) throw UsageError("fit_ab: min_dist must be nonnegative");

    constexpr int grid_n = 300;
    std::vector<double> d(grid_n), psi(grid_n);
    for (int i = 0; i < grid_n; ++i) {
        d[i] = 3.0 * static_cast<double>(i) / (grid_n - 1);
        psi[i] = d[i] <= min_dist ? 1.0 : std::exp(-(d[i] - min_dist));
    }

    const auto sq_loss = [&](double a, double b) {
        double loss = 0.0;
        for (int i = 0; i < grid_n; ++i) {
            const double t = std::pow(d[i] * d[i], b);
            const double q = 1.0 / (1.0 + a * t);
            const double r = q - psi[i];
            loss += r * r;
        }
        return loss;
    };

    double best_a = 1.0, best_b = 1.0;
    double best = sq_loss(best_a, best_b);
    for (int ia = 0; ia <= 80; ++ia) {
        const double a = std::exp(-3.0 + 6.0 * ia / 80.0); // e^-3 .. e^3
        for (int ib = 0; ib <= 60; ++ib) {
            const double b = 0.1 + 2.9 * ib / 60.0;
            const double l = sq_loss(a, b);
            if (l < best) {
                best = l;
                best_a = a;
                best_b = b;
            }
        }
    }

    // LM refinement on (log a, log b); positivity for free.
    double u = std::log(best_a), v = std::log(best_b);
    double damping = 1e-3;
    for (int iter = 0; iter < 200; ++iter) {
        const double a = std::exp(u), b = std::exp(v);
        double juu = 0.0, juv = 0.0, jvv = 0.0, gu = 0.0, gv = 0.0;
        for (int i = 0; i < grid_n; ++i) {
            const double s = d[i] * d[i];
            const double t = std::pow(s, b);
            const double q = 1.0 / (1.0 + a * t);
            const double r = q - psi[i];
            const double dq_du = -a * t * q * q;                              // d q / d log a
            const double dq_dv = s > 0.0 ? -a * t * std::log(s) * b * q * q : 0.0; // d q / d log b
            juu += dq_du * dq_du;
            juv += dq_du * dq_dv;
            jvv += dq_dv * dq_dv;
            gu += dq_du * r;
            gv += dq_dv * r;
        }
        const double l0 = sq_loss(a, b);
        const double auu = juu + damping * juu;
        const double avv = jvv + damping * jvv;
        const double det = auu * avv - juv * juv;
        if (std::abs(det) < 1e-30) break;
        const double du = (-gu * avv + gv * juv) / det;
        const double dv = (-gv * auu + gu * juv) / det;
        const double l1 = sq_loss(std::exp(u + du), std::exp(v + dv));
        if (l1 < l0) {
            u += du;
            v += dv;
            damping = std::max(damping * 0.5, 1e-9);
            if (du * du + dv * dv < 1e-24) break;
        } else {
            damping *= 4.0;
            if (damping > 1e12) break;
        }
    }

    KernelParams kp{std::exp(u), std::exp(v), min_dist};
    kp.validate();
    return kp;
}

/// q(z_i, z_j) = (1 + a ||z_i - z_j||^(2b))^-1, in (0, 1].
inline double q_similarity(std::span<const double> zi, std::span<const double> zj,
                           const KernelParams& kp) {
    if (zi.size() != zj.size()) {
        throw Error(detail::cat("q_similarity: embedding dims differ (", zi.size(), " vs ",
                                zj.size(), ")"));
    }
    double s = 0.0;
    for (std::size_t k = 0; k < zi.size(); ++k) {
        const double d = zi[k] - zj[k];
        s += d * d;
    }
    return 1.0 / (1.0 + kp.a * std::pow(s, kp.b));
}

/// Row-wise kernel on a tape: za, zb are [B x d_z]; the result is the [B x 1]
/// column of similarities q(za_r, zb_r), differentiable in both embeddings.
inline Var pairwise_q(Var za, Var zb, const KernelParams& kp) {
    Var diff = ad::sub(za, zb);
    Var sq_dist = ad::rowsum(ad::mul(diff, diff));
    Var denom = ad::affine(ad::pow(sq_dist, kp.b), kp.a, 1.0);
    return ad::pow(denom, -1.0);
}

namespace detail_ce {

inline double clamp_unit(double q) { return std::clamp(q, kEps, 1.0 - kEps); }

} // namespace detail_ce

/// Fuzzy cross-entropy between the data graph and the embedding graph over
/// every unordered pair, with the 0*log 0 = 0 convention. Quadratic in N:
/// test use only, refuses N > 2000.
inline double cross_entropy_full(const graph::DataGraph& g, const Tensor& z,
                                 const KernelParams& kp) {
    if (g.n > 2000) throw Error("cross_entropy_full: N > 2000 (quadratic blowup guard)");
    if (z.rows() != g.n) {
        throw Error(detail::cat("cross_entropy_full: ", z.rows(), " embeddings for ", g.n,
                                " points"));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < g.n; ++i) {
        for (std::size_t j = i + 1; j < g.n; ++j) {
            const double p = g.p_at(i, j);
            const double q = detail_ce::clamp_unit(q_similarity(z.row_span(i), z.row_span(j), kp));
            double term = 0.0;
            if (p > 0.0) term += p * std::log(p / q);
            if (p < 1.0) term += (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
            total += term;
        }
    }
    return total;
}

/// Batched estimator:
///   (1/|E_b|) [ sum_pos log(p_ij / q_ij) + sum_neg log((1 - p_kl) / (1 - q_kl)) ]
/// with q clamped to [eps, 1-eps]. Negatives use the stored strength of the
/// sampled pair (zero when it is not an edge); the constant factor (1 - p_kl)
/// is clamped from below by eps so collisions with strength-1 edges stay
/// finite.
inline double cross_entropy_batch(const graph::DataGraph& g, const edges::EdgeBatch& batch,
                                  const Tensor& z, const KernelParams& kp) {
    if (batch.positives.empty()) throw Error("cross_entropy_batch: empty batch");
    double total = 0.0;
    for (const edges::PositiveEdge& e : batch.positives) {
        const double q = detail_ce::clamp_unit(q_similarity(z.row_span(e.src), z.row_span(e.dst), kp));
        total += std::log(e.p / q);
    }
    for (std::size_t k = 0; k < batch.neg_dst.size(); ++k) {
        const double p = g.p_at(batch.neg_src[k], batch.neg_dst[k]);
        const double q =
            detail_ce::clamp_unit(q_similarity(z.row_span(batch.neg_src[k]),
                                               z.row_span(batch.neg_dst[k]), kp));
        total += std::log(std::max(1.0 - p, kEps) / (1.0 - q));
    }
    return total / static_cast<double>(batch.edge_count());
}

/// Tape version of the batched estimator, built from embedding columns that
/// already live on the tape: q_pos is [P x 1], q_neg is [Q x 1] (Q may be 0
/// only if the caller passes an empty var, which is not supported — batches
/// always carry negatives). The p-dependent constants are folded into the
/// final affine shift so reported values equal the plain evaluator's.
inline Var batch_loss_from_q(Var q_pos, Var q_neg, std::span<const double> p_pos,
                             std::span<const double> p_neg) {
    const std::size_t np = q_pos.value().rows();
    const std::size_t nn = q_neg.value().rows();
    if (np != p_pos.size() || nn != p_neg.size()) {
        throw Error("batch_loss_from_q: strength lists do not match q columns");
    }
    const double total = static_cast<double>(np + nn);
    double const_part = 0.0;
    for (double p : p_pos) const_part += std::log(p);
    for (double p : p_neg) const_part += std::log(std::max(1.0 - p, kEps));

    Var log_q = ad::sum(ad::log(ad::clamp(q_pos, kEps, 1.0 - kEps)));
    Var log_1mq = ad::sum(ad::log(ad::affine(ad::clamp(q_neg, kEps, 1.0 - kEps), -1.0, 1.0)));
    Var sum_logs = ad::add(log_q, log_1mq);
    return ad::affine(sum_logs, -1.0 / total, const_part / total);
}

} // namespace umix::umap

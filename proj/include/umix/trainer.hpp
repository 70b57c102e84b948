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

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "umix/data_io.hpp"
#include "umix/edge_sampler.hpp"
#include "umix/mixup.hpp"
#include "umix/neighbor_graph.hpp"
#include "umix/nn.hpp"
#include "umix/umap_loss.hpp"

namespace umix::train {

using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class Method { erm, mixup, manifold_mixup, umap_mixup, supervised_umap };

inline Method method_from_name(const std::string& name) {
    if (name == "erm") return Method::erm;
    if (name == "mixup") return Method::mixup;
    if (name == "manifold_mixup") return Method::manifold_mixup;
    if (name == "umap_mixup") return Method::umap_mixup;
    if (name == "supervised_umap") return Method::supervised_umap;
    throw UsageError(detail::cat("unknown method '", name, "'"));
}

inline std::string method_name(Method m) {
    switch (m) {
        case Method::erm: return "erm";
        case Method::mixup: return "mixup";
        case Method::manifold_mixup: return "manifold_mixup";
        case Method::umap_mixup: return "umap_mixup";
        default: return "supervised_umap";
    }
}

inline bool uses_graph(Method m) {
    return m == Method::umap_mixup || m == Method::supervised_umap;
}

inline bool uses_mixing(Method m) {
    return m == Method::mixup || m == Method::manifold_mixup || m == Method::umap_mixup;
}

struct TrainConfig {
    Method method = Method::umap_mixup;
    double alpha = 2.0; // Beta concentration for the mixing ratio
    double gamma = 0.1; // weight of the topology regulariser
    std::size_t k = 15;
    std::size_t m_negatives = 5;
    double min_dist = 0.1;
    std::optional<umap::KernelParams> kernel_override; // (a, b) given directly
    graph::Metric metric = graph::Metric::euclidean;
    double lr = 1e-3;
    std::size_t batch_size = 32; // samples for erm/mixup, positive edges otherwise
    std::size_t epochs = 400;
    std::uint64_t seed = 0;
    nn::ModelSpec model;  // d_x / d_y are filled in from the data
    mix::LossKind loss = mix::LossKind::squared_error;
    bool standardize = true;
    bool graph_pairs = false; // ablation: draw mixup partners from graph neighbours

    void validate() const {
        if (gamma < 0.0) throw UsageError("TrainConfig: gamma must be nonnegative");
        if (uses_mixing(method) && alpha <= 0.0) {
            throw UsageError("TrainConfig: alpha must be positive for mixing methods");
        }
        if (batch_size == 0) throw UsageError("TrainConfig: batch_size must be at least 1");
        if (epochs == 0) throw UsageError("TrainConfig: epochs must be at least 1");
        if (lr <= 0.0) throw UsageError("TrainConfig: lr must be positive");
        if (kernel_override) kernel_override->validate();
    }
};

struct TrainReport {
    std::vector<double> supervised_loss; // per-epoch mean over steps
    std::vector<double> umap_loss;
    std::vector<double> total_loss;
    double wall_seconds = 0.0;
};

/// Diagnostic knobs used by tests and the acceptance checks; the CLI never
/// sets them.
struct TrainHooks {
    std::optional<double> force_lambda; // fixed mixing ratio instead of Beta draws
    bool drop_umap_term = false;        // structurally remove the regulariser term
    std::function<void(std::size_t step, double sup, double um, double total)> on_step;
};

/// A trained network plus the preprocessing fitted with it. predict/embed
/// take raw-unit inputs; predictions come back in raw units.
struct FittedModel {
    nn::SplitModel net;
    data::Scaler x_scaler;
    data::Scaler y_scaler;

    Tensor predict(const Tensor& x_raw) const {
        return y_scaler.inverse(net.predict(x_scaler.transform(x_raw)));
    }

    Tensor embed(const Tensor& x_raw) const {
        return net.embed_values(x_scaler.transform(x_raw));
    }
};

namespace detail_train {

/// Per-node neighbour distribution for the graph-pair ablation: partner of i
/// is drawn with probability proportional to the incident edge strength.
struct NeighborSampler {
    std::vector<std::vector<std::pair<double, std::size_t>>> cumulative; // (cum p, partner)

    explicit NeighborSampler(const graph::DataGraph& g) : cumulative(g.n) {
        for (const graph::Edge& e : g.edges) {
            cumulative[e.i].emplace_back(e.p, e.j);
            cumulative[e.j].emplace_back(e.p, e.i);
        }
        for (auto& list : cumulative) {
            double acc = 0.0;
            for (auto& [w, j] : list) {
                acc += w;
                w = acc;
            }
        }
    }

    std::size_t draw(std::size_t i, Rng& rng) const {
        const auto& list = cumulative[i];
        if (list.empty()) return i;
        const double r = rng.uniform01() * list.back().first;
        for (const auto& [cum, j] : list) {
            if (r < cum) return j;
        }
        return list.back().second;
    }
};

inline Tensor lambda_column(std::span<const double> lambdas) {
    Tensor col(lambdas.size(), 1);
    for (std::size_t i = 0; i < lambdas.size(); ++i) col.at(i, 0) = lambdas[i];
    return col;
}

inline std::vector<std::size_t> batch_vertices(const edges::EdgeBatch& batch) {
    std::set<std::size_t> s;
    for (const auto& e : batch.positives) {
        s.insert(e.src);
        s.insert(e.dst);
    }
    return {s.begin(), s.end()};
}

} // namespace detail_train

/// Train one model. The rng consumption order is fixed so that runs are
/// reproducible and methods comparable: (1) parameter init; then per epoch
/// (2) epoch sampling — edge inclusion/orientation plus negatives for graph
/// methods, index shuffle plus partner draws for the others, (3) one mixing
/// ratio per pair in epoch order, (4) batch shuffle (edge methods only).
inline FittedModel train(const TrainConfig& cfg_in, const data::Dataset& train_data,
                         TrainReport* report = nullptr, const TrainHooks& hooks = {}) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();

    TrainConfig cfg = cfg_in;
    cfg.validate();
    if (train_data.size() == 0) throw UsageError("train: empty training set");

    // Preprocessing is fitted on the training split only. Sequence models
    // share one price-scale across all window columns and the target so that
    // every lag lives in the same units.
    data::Scaler sx, sy;
    if (!cfg.standardize) {
        sx = data::Scaler::identity(train_data.x.cols());
        sy = data::Scaler::identity(train_data.y.cols());
    } else if (cfg.model.embed == nn::EmbedKind::lstm) {
        double mean = 0.0;
        for (double v : train_data.x.raw()) mean += v;
        mean /= static_cast<double>(train_data.x.size());
        double var = 0.0;
        for (double v : train_data.x.raw()) var += (v - mean) * (v - mean);
        double sd = std::sqrt(var / static_cast<double>(train_data.x.size()));
        if (sd == 0.0) sd = 1.0;
        sx = data::Scaler::restore(train_data.x.cols(),
                                   [&] {
                                       std::vector<std::size_t> kept(train_data.x.cols());
                                       std::iota(kept.begin(), kept.end(), std::size_t{0});
                                       return kept;
                                   }(),
                                   std::vector<double>(train_data.x.cols(), mean),
                                   std::vector<double>(train_data.x.cols(), sd));
        sy = data::Scaler::restore(train_data.y.cols(),
                                   [&] {
                                       std::vector<std::size_t> kept(train_data.y.cols());
                                       std::iota(kept.begin(), kept.end(), std::size_t{0});
                                       return kept;
                                   }(),
                                   std::vector<double>(train_data.y.cols(), mean),
                                   std::vector<double>(train_data.y.cols(), sd));
    } else {
        sx = data::Scaler::fit(train_data.x, /*drop_constant=*/true, {}, &train_data.feature_names);
        sy = data::Scaler::fit(train_data.y, /*drop_constant=*/false);
    }
    const Tensor x = sx.transform(train_data.x);
    const Tensor y = sy.transform(train_data.y);
    const std::size_t n = x.rows();

    nn::ModelSpec spec = cfg.model;
    spec.d_x = x.cols();
    spec.d_y = y.cols();
    spec.validate();

    const bool needs_graph = uses_graph(cfg.method) || (uses_mixing(cfg.method) && cfg.graph_pairs);
    if (needs_graph && n <= cfg.k) {
        throw UsageError(detail::cat("train: need N > K for graph methods (N=", n, ", K=", cfg.k,
                                     ")"));
    }

    Rng rng(cfg.seed);
    nn::SplitModel net(spec, rng);
    nn::Adam adam({cfg.lr}, net.params());

    graph::DataGraph p_graph;
    umap::KernelParams kernel;
    std::optional<detail_train::NeighborSampler> neighbor_sampler;
    if (needs_graph) {
        p_graph = graph::build_graph(x, cfg.k, cfg.metric);
        if (uses_mixing(cfg.method) && cfg.graph_pairs && !uses_graph(cfg.method)) {
            neighbor_sampler.emplace(p_graph);
        }
    }
    if (uses_graph(cfg.method)) {
        kernel = cfg.kernel_override ? *cfg.kernel_override : umap::fit_ab(cfg.min_dist);
    }

    if (report) {
        report->supervised_loss.clear();
        report->umap_loss.clear();
        report->total_loss.clear();
    }

    const auto draw_lambda = [&](Rng& r) {
        return hooks.force_lambda ? *hooks.force_lambda : nn::sample_lambda(cfg.alpha, r);
    };

    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double sup_sum = 0.0, umap_sum = 0.0, total_sum = 0.0;
        std::size_t steps_in_epoch = 0;

        const auto run_step = [&](Var sup, Var um_term, bool has_um, Tape& tape,
                                  nn::ParamBinding& binding) {
            Var total = sup;
            double um_value = 0.0;
            if (has_um) {
                total = ad::add(sup, ad::affine(um_term, cfg.gamma, 0.0));
                um_value = um_term.value().item();
            }
            const double sup_value = sup.value().item();
            const double total_value = total.value().item();
            if (!std::isfinite(total_value)) {
                throw Error(detail::cat("train: diverged at epoch ", epoch, " (total loss ",
                                        total_value, ")"));
            }
            tape.backward(total);
            adam.step(net.params(), nn::collect_gradients(tape, binding));
            sup_sum += sup_value;
            umap_sum += um_value;
            total_sum += total_value;
            ++steps_in_epoch;
            if (hooks.on_step) hooks.on_step(step, sup_value, um_value, total_value);
            ++step;
        };

        if (cfg.method == Method::erm || cfg.method == Method::mixup ||
            cfg.method == Method::manifold_mixup) {
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            rng.shuffle(order);

            std::vector<std::size_t> partner;
            std::vector<double> lambdas;
            if (cfg.method != Method::erm) {
                partner.resize(n);
                for (std::size_t i = 0; i < n; ++i) {
                    partner[i] = neighbor_sampler ? neighbor_sampler->draw(order[i], rng)
                                                  : rng.uniform_index(n);
                }
                lambdas.resize(n);
                for (std::size_t i = 0; i < n; ++i) lambdas[i] = draw_lambda(rng);
            }

            for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
                const std::size_t end = std::min(begin + cfg.batch_size, n);
                const std::span<const std::size_t> ids(order.data() + begin, end - begin);
                Tape tape;
                nn::ParamBinding binding(tape, net.params());
                if (cfg.method == Method::erm) {
                    Var pred = net.forward(tape, binding, x.gather_rows(ids));
                    Var sup = ad::mean_squared_error(pred, tape.constant(y.gather_rows(ids)));
                    run_step(sup, sup, false, tape, binding);
                    continue;
                }
                const std::span<const std::size_t> mates(partner.data() + begin, end - begin);
                const std::span<const double> lams(lambdas.data() + begin, end - begin);
                const Tensor lam_col = detail_train::lambda_column(lams);
                const Tensor xi = x.gather_rows(ids), xj = x.gather_rows(mates);
                const Tensor yi = y.gather_rows(ids), yj = y.gather_rows(mates);
                if (cfg.method == Method::mixup) {
                    // raw-input mixing: the synthetic batch is a constant
                    Tensor xm(xi.rows(), xi.cols()), ym(yi.rows(), yi.cols());
                    for (std::size_t r = 0; r < xi.rows(); ++r) {
                        const double l = lam_col.at(r, 0);
                        for (std::size_t c = 0; c < xi.cols(); ++c) {
                            xm.at(r, c) = l * xi.at(r, c) + (1.0 - l) * xj.at(r, c);
                        }
                        for (std::size_t c = 0; c < yi.cols(); ++c) {
                            ym.at(r, c) = l * yi.at(r, c) + (1.0 - l) * yj.at(r, c);
                        }
                    }
                    Var pred = net.forward(tape, binding, xm);
                    Var sup = ad::mean_squared_error(pred, tape.constant(ym));
                    run_step(sup, sup, false, tape, binding);
                } else {
                    Var pred = mix::embedding_mixup_forward(net, tape, binding, xi, xj, lam_col);
                    Var sup = mix::mixed_loss(tape, pred, yi, yj, lam_col, cfg.loss);
                    run_step(sup, sup, false, tape, binding);
                }
            }
        } else {
            edges::EpochSample epoch_sample = edges::sample_epoch(p_graph, cfg.m_negatives, rng);
            std::vector<double> lambdas;
            if (cfg.method == Method::umap_mixup) {
                lambdas.resize(epoch_sample.positives.size());
                for (double& l : lambdas) l = draw_lambda(rng);
            }
            const auto edge_batches = edges::batches(epoch_sample, cfg.batch_size, rng);

            for (const edges::EdgeBatch& batch : edge_batches) {
                std::vector<std::size_t> src(batch.positives.size()), dst(batch.positives.size());
                std::vector<double> p_pos(batch.positives.size());
                for (std::size_t r = 0; r < batch.positives.size(); ++r) {
                    src[r] = batch.positives[r].src;
                    dst[r] = batch.positives[r].dst;
                    p_pos[r] = batch.positives[r].p;
                }
                std::vector<double> p_neg(batch.neg_dst.size());
                for (std::size_t r = 0; r < batch.neg_dst.size(); ++r) {
                    p_neg[r] = p_graph.p_at(batch.neg_src[r], batch.neg_dst[r]);
                }

                Tape tape;
                nn::ParamBinding binding(tape, net.params());
                Var z_src{}, z_dst{}, sup{};
                if (cfg.method == Method::umap_mixup) {
                    std::vector<double> lams(batch.positives.size());
                    for (std::size_t r = 0; r < lams.size(); ++r) {
                        lams[r] = lambdas[batch.pos_index[r]];
                    }
                    const Tensor lam_col = detail_train::lambda_column(lams);
                    auto fw = mix::embedding_mixup_forward_full(net, tape, binding,
                                                                x.gather_rows(src),
                                                                x.gather_rows(dst), lam_col);
                    z_src = fw.z_src;
                    z_dst = fw.z_dst;
                    sup = mix::mixed_loss(tape, fw.y_pred, y.gather_rows(src), y.gather_rows(dst),
                                          lam_col, cfg.loss);
                } else {
                    const auto vertices = detail_train::batch_vertices(batch);
                    Var pred = net.forward(tape, binding, x.gather_rows(vertices));
                    sup = ad::mean_squared_error(pred, tape.constant(y.gather_rows(vertices)));
                    z_src = net.embed(tape, binding, x.gather_rows(src));
                    z_dst = net.embed(tape, binding, x.gather_rows(dst));
                }

                if (hooks.drop_umap_term) {
                    run_step(sup, sup, false, tape, binding);
                    continue;
                }
                Var z_neg_src = ad::repeat_rows(z_src, epoch_sample.m);
                Var z_neg_dst = net.embed(tape, binding, x.gather_rows(batch.neg_dst));
                Var q_pos = umap::pairwise_q(z_src, z_dst, kernel);
                Var q_neg = umap::pairwise_q(z_neg_src, z_neg_dst, kernel);
                Var um = umap::batch_loss_from_q(q_pos, q_neg, p_pos, p_neg);
                run_step(sup, um, true, tape, binding);
            }
        }

        const double denom = steps_in_epoch ? static_cast<double>(steps_in_epoch) : 1.0;
        const double sup_mean = sup_sum / denom;
        const double umap_mean = umap_sum / denom;
        const double total_mean = total_sum / denom;
        if (!std::isfinite(total_mean) || !std::isfinite(sup_mean)) {
            throw Error(detail::cat("train: diverged at epoch ", epoch, " (total loss ",
                                    total_mean, ")"));
        }
        if (report) {
            report->supervised_loss.push_back(sup_mean);
            report->umap_loss.push_back(umap_mean);
            report->total_loss.push_back(total_mean);
        }
    }

    if (report) {
        report->wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
    }
    return {std::move(net), std::move(sx), std::move(sy)};
}

/// Root-mean-square error on raw-unit data.
inline double evaluate(const FittedModel& model, const data::Dataset& test_data) {
    if (test_data.size() == 0) throw UsageError("evaluate: empty test set");
    const Tensor pred = model.predict(test_data.x);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.rows(); ++i) {
        for (std::size_t c = 0; c < pred.cols(); ++c) {
            const double d = pred.at(i, c) - test_data.y.at(i, c);
            acc += d * d;
        }
    }
    return std::sqrt(acc / static_cast<double>(pred.rows()));
}

// ---------------------------------------------------------------------------
// Benchmarks
// ---------------------------------------------------------------------------

/// One benchmark dataset: either a tabular set (shuffle-split folds) or a raw
/// price series (fixed chronological split; folds vary the model seed only).
struct BenchmarkTask {
    std::string name;
    std::optional<data::Dataset> tabular;
    std::vector<double> prices;
    std::size_t window = 60;
    double train_fraction = 0.8;
};

struct BenchmarkConfig {
    std::vector<Method> methods;
    std::size_t folds = 20;
    double test_fraction = 0.1;
    std::size_t parallel = 1;
    TrainConfig base; // hyperparameters; base.seed is the master seed
};

struct MethodResult {
    std::string dataset;
    Method method;
    std::vector<double> fold_rmse;
    double mean = 0.0;
    double stddev = 0.0; // sample (n-1) convention
};

namespace detail_train {

inline void aggregate(MethodResult& r) {
    const double n = static_cast<double>(r.fold_rmse.size());
    double mean = 0.0;
    for (double v : r.fold_rmse) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : r.fold_rmse) var += (v - mean) * (v - mean);
    r.mean = mean;
    r.stddev = r.fold_rmse.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
}

} // namespace detail_train

/// Train/evaluate every (fold, method) pair. Each job owns a derived seed, so
/// the result tables are identical whatever the parallelism; the graph and
/// scalers are always fitted on the fold's training portion only.
inline std::vector<MethodResult> run_benchmark(const BenchmarkTask& task,
                                               const BenchmarkConfig& bench) {
    if (bench.methods.empty()) throw UsageError("run_benchmark: no methods given");
    if (bench.folds == 0) throw UsageError("run_benchmark: folds must be at least 1");
    if (!task.tabular && task.prices.empty()) {
        throw UsageError("run_benchmark: task carries no data");
    }

    std::vector<data::Fold> folds;
    data::Dataset series_train, series_test;
    if (task.tabular) {
        folds = data::split_folds(task.tabular->size(), bench.folds, bench.test_fraction,
                                  bench.base.seed);
    } else {
        std::tie(series_train, series_test) =
            data::chronological_split(task.prices, task.train_fraction, task.window);
    }

    struct Job {
        std::size_t fold;
        std::size_t method_index;
    };
    std::vector<Job> jobs;
    for (std::size_t f = 0; f < bench.folds; ++f) {
        for (std::size_t m = 0; m < bench.methods.size(); ++m) jobs.push_back({f, m});
    }

    std::vector<MethodResult> results(bench.methods.size());
    for (std::size_t m = 0; m < bench.methods.size(); ++m) {
        results[m].dataset = task.name;
        results[m].method = bench.methods[m];
        results[m].fold_rmse.assign(bench.folds, 0.0);
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    const auto worker = [&] {
        for (;;) {
            const std::size_t j = next.fetch_add(1);
            if (j >= jobs.size() || failed.load()) return;
            const Job job = jobs[j];
            try {
                TrainConfig cfg = bench.base;
                cfg.method = bench.methods[job.method_index];
                cfg.seed = derive_seed(derive_seed(bench.base.seed, job.fold + 1),
                                       job.method_index + 1);
                data::Dataset train_set, test_set;
                if (task.tabular) {
                    train_set = task.tabular->select(folds[job.fold].train);
                    test_set = task.tabular->select(folds[job.fold].test);
                } else {
                    train_set = series_train;
                    test_set = series_test;
                }
                FittedModel model = train(cfg, train_set);
                results[job.method_index].fold_rmse[job.fold] = evaluate(model, test_set);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                failed.store(true);
                if (failure.empty()) {
                    failure = detail::cat(task.name, "/",
                                          method_name(bench.methods[job.method_index]), " fold ",
                                          job.fold, ": ", e.what());
                }
                return;
            }
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, bench.parallel);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failed.load()) throw Error(detail::cat("run_benchmark: ", failure));

    for (auto& r : results) detail_train::aggregate(r);
    return results;
}

} // namespace umix::train

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

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "umix/autodiff.hpp"
#include "umix/rng.hpp"

namespace umix::nn {

using ad::Tape;
using ad::Tensor;
using ad::Var;

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct Param {
    std::string name;
    Tensor value;
};

/// Named parameters in declaration order. Declaration order is the
/// persistence order and the rng draw order at init.
class ParamStore {
public:
    Tensor& add(std::string name, Tensor init) {
        if (index_.count(name)) throw Error(detail::cat("ParamStore: duplicate name '", name, "'"));
        index_[name] = params_.size();
        params_.push_back({std::move(name), std::move(init)});
        return params_.back().value;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw Error(detail::cat("ParamStore: unknown name '", name, "'"));
        return params_[it->second].value;
    }

    const Tensor& at(const std::string& name) const {
        return const_cast<ParamStore*>(this)->at(name);
    }

    std::size_t size() const { return params_.size(); }
    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::vector<Param> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Leaf vars for every parameter of one tape (one forward pass).
class ParamBinding {
public:
    ParamBinding(Tape& tape, const ParamStore& store, bool requires_grad = true) {
        for (const auto& p : store) {
            vars_.emplace_back(p.name, tape.leaf(p.value, requires_grad, p.name));
        }
    }

    Var operator[](const std::string& name) const {
        for (const auto& [n, v] : vars_) {
            if (n == name) return v;
        }
        throw Error(detail::cat("ParamBinding: unknown name '", name, "'"));
    }

    const std::vector<std::pair<std::string, Var>>& entries() const { return vars_; }

private:
    std::vector<std::pair<std::string, Var>> vars_;
};

/// Gradients keyed by parameter name; absent entries mean zero gradient.
using GradMap = std::unordered_map<std::string, Tensor>;

inline GradMap collect_gradients(Tape& tape, const ParamBinding& binding) {
    GradMap grads;
    for (const auto& [name, var] : binding.entries()) {
        if (tape.has_grad(var)) grads.emplace(name, tape.take_grad(var));
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Model specification
// ---------------------------------------------------------------------------

enum class Activation { relu, tanh, identity };

inline Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw UsageError(detail::cat("unknown activation '", name, "'"));
}

inline std::string activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        default: return "identity";
    }
}

inline Var activate(Var x, Activation a) {
    switch (a) {
        case Activation::relu: return ad::relu(x);
        case Activation::tanh: return ad::tanh(x);
        default: return x;
    }
}

enum class EmbedKind { mlp, lstm };

/// Shapes of the factored regressor y = g(h(x)). The embedding network h maps
/// d_x -> d_z (parameter group theta1, names "h.*"); the head g maps
/// d_z -> d_y (theta2, names "g.*").
struct ModelSpec {
    EmbedKind embed = EmbedKind::mlp;
    std::size_t d_x = 0;
    std::size_t d_y = 1;
    std::vector<std::size_t> embed_widths = {100, 50}; // mlp only; last width is d_z
    std::vector<std::size_t> head_widths = {};         // hidden widths of g; empty = linear head
    Activation activation = Activation::relu;
    std::size_t lstm_hidden = 64; // lstm only; d_z = lstm_hidden
    std::size_t window = 60;      // lstm only; time steps per input row

    std::size_t d_z() const {
        if (embed == EmbedKind::lstm) return lstm_hidden;
        if (embed_widths.empty()) throw UsageError("ModelSpec: embed_widths must be nonempty");
        return embed_widths.back();
    }

    /// lstm rows are flattened windows: d_x = window * step_dim.
    std::size_t step_dim() const {
        if (window == 0 || d_x % window != 0) {
            throw UsageError(detail::cat("ModelSpec: input width ", d_x,
                                         " is not a multiple of window ", window));
        }
        return d_x / window;
    }

    void validate() const {
        if (d_x == 0) throw UsageError("ModelSpec: d_x must be positive");
        if (d_y == 0) throw UsageError("ModelSpec: d_y must be positive");
        if (embed == EmbedKind::mlp) {
            if (embed_widths.empty()) throw UsageError("ModelSpec: embed_widths must be nonempty");
            for (auto w : embed_widths) {
                if (w == 0) throw UsageError("ModelSpec: zero layer width");
            }
        } else {
            if (lstm_hidden == 0) throw UsageError("ModelSpec: lstm_hidden must be positive");
            if (window == 0) throw UsageError("ModelSpec: window must be positive");
            step_dim();
        }
        for (auto w : head_widths) {
            if (w == 0) throw UsageError("ModelSpec: zero head width");
        }
    }
};

namespace detail_init {

/// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)), entries drawn row-major.
inline Tensor uniform_fan_in(std::size_t rows, std::size_t cols, std::size_t fan_in, Rng& rng) {
    Tensor t(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : t.raw()) v = rng.uniform(-bound, bound);
    return t;
}

} // namespace detail_init

// ---------------------------------------------------------------------------
// SplitModel
// ---------------------------------------------------------------------------

/// Regressor factored into embedding network h (theta1) and head g (theta2).
/// predict(x) is g(h(x)) through the one shared code path.
class SplitModel {
public:
    SplitModel(ModelSpec spec, Rng& rng) : spec_(std::move(spec)) {
        spec_.validate();
        init_params(rng);
    }

    /// Shell with zeroed parameters, for loading from a file.
    static SplitModel uninitialized(ModelSpec spec) {
        SplitModel m;
        m.spec_ = std::move(spec);
        m.spec_.validate();
        Rng dummy(0);
        m.init_params(dummy);
        for (auto& p : m.params_) {
            for (double& v : p.value.raw()) v = 0.0;
        }
        return m;
    }

    const ModelSpec& spec() const { return spec_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    std::vector<std::string> theta1_names() const { return group_names("h."); }
    std::vector<std::string> theta2_names() const { return group_names("g."); }

    /// Embedding z = h(X) for a batch of rows: [B x d_x] -> [B x d_z].
    Var embed(Tape& tape, const ParamBinding& p, const Tensor& x) const {
        if (x.cols() != spec_.d_x) {
            throw Error(detail::cat("embed: input width ", x.cols(), " but model expects d_x=",
                                    spec_.d_x));
        }
        Var h = tape.constant(x);
        if (spec_.embed == EmbedKind::mlp) {
            for (std::size_t l = 0; l < spec_.embed_widths.size(); ++l) {
                h = activate(linear(p, "h." + std::to_string(l), h), spec_.activation);
            }
            return h;
        }
        return lstm_embed(tape, p, x);
    }

    /// Head g(z): [B x d_z] -> [B x d_y]. Linear output layer.
    Var head(Tape&, const ParamBinding& p, Var z) const {
        Var h = z;
        for (std::size_t l = 0; l < spec_.head_widths.size(); ++l) {
            h = activate(linear(p, "g." + std::to_string(l), h), spec_.activation);
        }
        return linear(p, "g.out", h);
    }

    Var forward(Tape& tape, const ParamBinding& p, const Tensor& x) const {
        return head(tape, p, embed(tape, p, x));
    }

    /// Plain evaluation; no gradients tracked.
    Tensor predict(const Tensor& x) const {
        Tape tape;
        ParamBinding p(tape, params_, false);
        return forward(tape, p, x).value();
    }

    Tensor embed_values(const Tensor& x) const {
        Tape tape;
        ParamBinding p(tape, params_, false);
        return embed(tape, p, x).value();
    }

private:
    SplitModel() = default;

    std::vector<std::string> group_names(const std::string& prefix) const {
        std::vector<std::string> names;
        for (const auto& p : params_) {
            if (p.name.rfind(prefix, 0) == 0) names.push_back(p.name);
        }
        return names;
    }

    static Var linear(const ParamBinding& p, const std::string& prefix, Var x) {
        return ad::add(ad::matmul(x, p[prefix + ".w"]), p[prefix + ".b"]);
    }

    /// Standard LSTM recurrence over the window, zero initial state. The final
    /// hidden state is the embedding.
    Var lstm_embed(Tape& tape, const ParamBinding& p, const Tensor& x) const {
        const std::size_t steps = spec_.window;
        const std::size_t dim = spec_.step_dim();
        const std::size_t batch = x.rows();
        Var h = tape.constant(Tensor(batch, spec_.lstm_hidden));
        Var c = h;
        for (std::size_t t = 0; t < steps; ++t) {
            Var xt = tape.constant(x.col_block(t * dim, (t + 1) * dim));
            Var gi = ad::sigmoid(gate(p, "i", xt, h));
            Var gf = ad::sigmoid(gate(p, "f", xt, h));
            Var go = ad::sigmoid(gate(p, "o", xt, h));
            Var gu = ad::tanh(gate(p, "u", xt, h));
            c = ad::add(ad::mul(gf, c), ad::mul(gi, gu));
            h = ad::mul(go, ad::tanh(c));
        }
        return h;
    }

    static Var gate(const ParamBinding& p, const std::string& g, Var xt, Var h) {
        Var pre = ad::add(ad::matmul(xt, p["h.lstm.wx_" + g]), p["h.lstm.b_" + g]);
        return ad::add(pre, ad::matmul(h, p["h.lstm.wh_" + g]));
    }

    void init_params(Rng& rng) {
        using detail_init::uniform_fan_in;
        if (spec_.embed == EmbedKind::mlp) {
            std::size_t in = spec_.d_x;
            for (std::size_t l = 0; l < spec_.embed_widths.size(); ++l) {
                const std::size_t out = spec_.embed_widths[l];
                const std::string prefix = "h." + std::to_string(l);
                params_.add(prefix + ".w", uniform_fan_in(in, out, in, rng));
                params_.add(prefix + ".b", Tensor(1, out));
                in = out;
            }
        } else {
            const std::size_t dim = spec_.step_dim();
            const std::size_t dh = spec_.lstm_hidden;
            for (const char* g : {"i", "f", "u", "o"}) {
                params_.add(detail::cat("h.lstm.wx_", g), uniform_fan_in(dim, dh, dim, rng));
                params_.add(detail::cat("h.lstm.wh_", g), uniform_fan_in(dh, dh, dh, rng));
                Tensor b(1, dh);
                if (g[0] == 'f') {
                    // forget-gate bias starts at 1
                    for (double& v : b.raw()) v = 1.0;
                }
                params_.add(detail::cat("h.lstm.b_", g), std::move(b));
            }
        }
        std::size_t in = spec_.d_z();
        for (std::size_t l = 0; l < spec_.head_widths.size(); ++l) {
            const std::size_t out = spec_.head_widths[l];
            const std::string prefix = "g." + std::to_string(l);
            params_.add(prefix + ".w", uniform_fan_in(in, out, in, rng));
            params_.add(prefix + ".b", Tensor(1, out));
            in = out;
        }
        params_.add("g.out.w", uniform_fan_in(in, spec_.d_y, in, rng));
        params_.add("g.out.b", Tensor(1, spec_.d_y));
    }

    ModelSpec spec_;
    ParamStore params_;
};

/// Batched forward returning both the embedding and the prediction.
inline std::pair<Var, Var> split_forward(const SplitModel& model, Tape& tape,
                                         const ParamBinding& p, const Tensor& x) {
    Var z = model.embed(tape, p, x);
    return {z, model.head(tape, p, z)};
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Moment shapes mirror the parameters; missing
/// gradients are treated as zero.
class Adam {
public:
    Adam(AdamConfig cfg, const ParamStore& params) : cfg_(cfg) {
        for (const auto& p : params) {
            m_.emplace(p.name, Tensor(p.value.rows(), p.value.cols()));
            v_.emplace(p.name, Tensor(p.value.rows(), p.value.cols()));
        }
    }

    std::size_t step_count() const { return t_; }

    void step(ParamStore& params, const GradMap& grads) {
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (auto& p : params) {
            const auto it = grads.find(p.name);
            const Tensor* g = it == grads.end() ? nullptr : &it->second;
            if (g && !g->all_finite()) {
                throw Error(detail::cat("adam_step: non-finite gradient for parameter group '",
                                        p.name, "'"));
            }
            Tensor& m = m_.at(p.name);
            Tensor& v = v_.at(p.name);
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double gk = g ? g->raw()[k] : 0.0;
                m.raw()[k] = cfg_.beta1 * m.raw()[k] + (1.0 - cfg_.beta1) * gk;
                v.raw()[k] = cfg_.beta2 * v.raw()[k] + (1.0 - cfg_.beta2) * gk * gk;
                const double mh = m.raw()[k] / bc1;
                const double vh = v.raw()[k] / bc2;
                p.value.raw()[k] -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
            }
        }
    }

private:
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::unordered_map<std::string, Tensor> m_;
    std::unordered_map<std::string, Tensor> v_;
};

// ---------------------------------------------------------------------------
// Mixing-ratio sampler
// ---------------------------------------------------------------------------

/// One draw from Beta(alpha, alpha).
inline double sample_lambda(double alpha, Rng& rng) {
    if (alpha <= 0.0) throw UsageError("sample_lambda: alpha must be positive");
    return rng.beta_symmetric(alpha);
}

} // namespace umix::nn

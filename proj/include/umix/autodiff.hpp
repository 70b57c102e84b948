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
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "umix/tensor.hpp"

namespace umix::ad {

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    std::uint32_t id = 0;

    const Tensor& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode tape. Records every primitive op of one forward pass in
/// creation order (which is topological by construction), then walks the
/// record backwards once. A tape is built per training step and thrown away;
/// it is confined to a single thread.
class Tape {
public:
    static constexpr std::uint32_t npos = std::numeric_limits<std::uint32_t>::max();
    using BackpropFn = std::function<void(Tape&, std::uint32_t self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Insert an input node. Gradients are tracked only when requires_grad.
    Var leaf(Tensor value, bool requires_grad = false, std::string name = {}) {
        return push(std::move(value), requires_grad, npos, npos, nullptr, std::move(name));
    }

    Var constant(Tensor value) { return leaf(std::move(value), false); }
    Var constant(double v) { return leaf(Tensor::scalar(v), false); }

    const Tensor& value(Var v) const { return nodes_[v.id].value; }
    bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
    std::size_t node_count() const { return nodes_.size(); }

    /// Backpropagate from a scalar output. Consumes the tape: a second call
    /// is an error, matching the build-per-step discipline.
    void backward(Var output) {
        if (consumed_) throw Error("backward: tape already consumed");
        const Node& out = nodes_[output.id];
        if (!out.value.is_scalar()) {
            throw Error(detail::cat("backward: output must be scalar, got ", out.value.rows(),
                                    "x", out.value.cols()));
        }
        consumed_ = true;
        if (!out.requires_grad) return;
        grad_buffer(output.id).raw()[0] = 1.0;
        for (std::uint32_t id = output.id + 1; id-- > 0;) {
            Node& n = nodes_[id];
            if (n.requires_grad && !n.grad.empty() && n.backprop) n.backprop(*this, id);
        }
    }

    bool has_grad(Var v) const {
        const Node& n = nodes_[v.id];
        return n.requires_grad && !n.grad.empty();
    }

    const Tensor& grad(Var v) const {
        const Node& n = nodes_[v.id];
        if (!n.requires_grad || n.grad.empty()) {
            throw Error(detail::cat("grad: no gradient recorded for node ", v.id,
                                    n.name.empty() ? "" : detail::cat(" ('", n.name, "')")));
        }
        return n.grad;
    }

    /// Move a gradient out of the tape (avoids a copy in the update path).
    Tensor take_grad(Var v) {
        if (!has_grad(v)) return {};
        return std::move(nodes_[v.id].grad);
    }

private:
    struct Node {
        Tensor value;
        Tensor grad; // allocated lazily during backward
        std::uint32_t a = npos;
        std::uint32_t b = npos;
        bool requires_grad = false;
        BackpropFn backprop;
        std::string name;
    };

    Var push(Tensor value, bool requires_grad, std::uint32_t a, std::uint32_t b, BackpropFn fn,
             std::string name = {}) {
        Node n;
        n.value = std::move(value);
        n.a = a;
        n.b = b;
        n.requires_grad = requires_grad;
        n.backprop = std::move(fn);
        n.name = std::move(name);
        nodes_.push_back(std::move(n));
        return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
    }

    Tensor& grad_buffer(std::uint32_t id) {
        Node& n = nodes_[id];
        if (n.grad.empty()) n.grad = Tensor(n.value.rows(), n.value.cols());
        return n.grad;
    }

    Node& node(std::uint32_t id) { return nodes_[id]; }
    const Node& node(std::uint32_t id) const { return nodes_[id]; }

    std::vector<Node> nodes_;
    bool consumed_ = false;

    friend struct OpAccess;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

/// Internal accessor so op free functions can extend the tape.
struct OpAccess {
    static Var push(Tape& t, Tensor value, bool rg, std::uint32_t a, std::uint32_t b,
                    Tape::BackpropFn fn) {
        return t.push(std::move(value), rg, a, b, std::move(fn));
    }
    static const Tensor& value(const Tape& t, std::uint32_t id) { return t.node(id).value; }
    static const Tensor& grad(const Tape& t, std::uint32_t id) { return t.node(id).grad; }
    static bool requires_grad(const Tape& t, std::uint32_t id) { return t.node(id).requires_grad; }
    static Tensor& grad_buffer(Tape& t, std::uint32_t id) { return t.grad_buffer(id); }
    static std::uint32_t parent_a(const Tape& t, std::uint32_t id) { return t.node(id).a; }
    static std::uint32_t parent_b(const Tape& t, std::uint32_t id) { return t.node(id).b; }
};

namespace detail {

inline void check_same_tape(Var a, Var b, const char* op) {
    if (a.tape != b.tape) throw Error(detail::cat(op, ": operands live on different tapes"));
}

enum class Bcast { same, row, col, scalar };

/// Shape rule shared by add/mul: rhs is either the same shape or broadcast
/// from a row vector, a column vector, or a scalar.
inline Bcast bcast_kind(const Tensor& a, const Tensor& b, const char* op) {
    if (a.same_shape(b)) return Bcast::same;
    if (b.is_scalar()) return Bcast::scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::row;
    if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::col;
    throw Error(detail::cat(op, ": shapes ", a.rows(), "x", a.cols(), " and ", b.rows(), "x",
                            b.cols(), " are incompatible"));
}

inline double bvalue(const Tensor& b, Bcast k, std::size_t i, std::size_t j) {
    switch (k) {
        case Bcast::same: return b.at(i, j);
        case Bcast::row: return b.at(0, j);
        case Bcast::col: return b.at(i, 0);
        default: return b.raw()[0];
    }
}

inline std::size_t bindex(const Tensor& b, Bcast k, std::size_t i, std::size_t j) {
    switch (k) {
        case Bcast::same: return i * b.cols() + j;
        case Bcast::row: return j;
        case Bcast::col: return i;
        default: return 0;
    }
}

template <typename Fwd, typename Dfn>
Var unary_op(Var x, Fwd fwd, Dfn dfn) {
    const Tensor& xv = x.value();
    Tensor out(xv.rows(), xv.cols());
    for (std::size_t k = 0; k < xv.size(); ++k) out.raw()[k] = fwd(xv.raw()[k]);
    const bool rg = x.tape->requires_grad(x);
    return OpAccess::push(*x.tape, std::move(out), rg, x.id, Tape::npos,
                          !rg ? Tape::BackpropFn{}
                              : [xid = x.id, dfn](Tape& t, std::uint32_t self) {
                                    const Tensor& g = OpAccess::grad(t, self);
                                    const Tensor& xval = OpAccess::value(t, xid);
                                    const Tensor& yval = OpAccess::value(t, self);
                                    Tensor& gx = OpAccess::grad_buffer(t, xid);
                                    for (std::size_t k = 0; k < g.size(); ++k) {
                                        gx.raw()[k] += g.raw()[k] * dfn(xval.raw()[k], yval.raw()[k]);
                                    }
                                });
}

} // namespace detail

inline Var add(Var a, Var b) {
    detail::check_same_tape(a, b, "add");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const auto kind = detail::bcast_kind(av, bv, "add");
    Tensor out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i) {
        for (std::size_t j = 0; j < av.cols(); ++j) {
            out.at(i, j) = av.at(i, j) + detail::bvalue(bv, kind, i, j);
        }
    }
    const bool rg = a.tape->requires_grad(a) || a.tape->requires_grad(b);
    return OpAccess::push(
        *a.tape, std::move(out), rg, a.id, b.id,
        !rg ? Tape::BackpropFn{}
            : [aid = a.id, bid = b.id, kind](Tape& t, std::uint32_t self) {
                  const Tensor& g = OpAccess::grad(t, self);
                  if (OpAccess::requires_grad(t, aid)) {
                      Tensor& ga = OpAccess::grad_buffer(t, aid);
                      for (std::size_t k = 0; k < g.size(); ++k) ga.raw()[k] += g.raw()[k];
                  }
                  if (OpAccess::requires_grad(t, bid)) {
                      Tensor& gb = OpAccess::grad_buffer(t, bid);
                      for (std::size_t i = 0; i < g.rows(); ++i) {
                          for (std::size_t j = 0; j < g.cols(); ++j) {
                              gb.raw()[detail::bindex(gb, kind, i, j)] += g.at(i, j);
                          }
                      }
                  }
              });
}

inline Var sub(Var a, Var b) {
    detail::check_same_tape(a, b, "sub");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (!av.same_shape(bv)) {
        throw Error(detail::cat("sub: shapes ", av.rows(), "x", av.cols(), " and ", bv.rows(), "x",
                                bv.cols(), " differ"));
    }
    Tensor out(av.rows(), av.cols());
    for (std::size_t k = 0; k < av.size(); ++k) out.raw()[k] = av.raw()[k] - bv.raw()[k];
    const bool rg = a.tape->requires_grad(a) || a.tape->requires_grad(b);
    return OpAccess::push(*a.tape, std::move(out), rg, a.id, b.id,
                          !rg ? Tape::BackpropFn{}
                              : [aid = a.id, bid = b.id](Tape& t, std::uint32_t self) {
                                    const Tensor& g = OpAccess::grad(t, self);
                                    if (OpAccess::requires_grad(t, aid)) {
                                        Tensor& ga = OpAccess::grad_buffer(t, aid);
                                        for (std::size_t k = 0; k < g.size(); ++k) {
                                            ga.raw()[k] += g.raw()[k];
                                        }
                                    }
                                    if (OpAccess::requires_grad(t, bid)) {
                                        Tensor& gb = OpAccess::grad_buffer(t, bid);
                                        for (std::size_t k = 0; k < g.size(); ++k) {
                                            gb.raw()[k] -= g.raw()[k];
                                        }
                                    }
                                });
}

inline Var mul(Var a, Var b) {
    detail::check_same_tape(a, b, "mul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const auto kind = detail::bcast_kind(av, bv, "mul");
    Tensor out(av.rows(), av.cols());
    for (std::size_t i = 0; i < av.rows(); ++i) {
        for (std::size_t j = 0; j < av.cols(); ++j) {
            out.at(i, j) = av.at(i, j) * detail::bvalue(bv, kind, i, j);
        }
    }
    const bool rg = a.tape->requires_grad(a) || a.tape->requires_grad(b);
    return OpAccess::push(
        *a.tape, std::move(out), rg, a.id, b.id,
        !rg ? Tape::BackpropFn{}
            : [aid = a.id, bid = b.id, kind](Tape& t, std::uint32_t self) {
                  const Tensor& g = OpAccess::grad(t, self);
                  const Tensor& av2 = OpAccess::value(t, aid);
                  const Tensor& bv2 = OpAccess::value(t, bid);
                  if (OpAccess::requires_grad(t, aid)) {
                      Tensor& ga = OpAccess::grad_buffer(t, aid);
                      for (std::size_t i = 0; i < g.rows(); ++i) {
                          for (std::size_t j = 0; j < g.cols(); ++j) {
                              ga.at(i, j) += g.at(i, j) * detail::bvalue(bv2, kind, i, j);
                          }
                      }
                  }
                  if (OpAccess::requires_grad(t, bid)) {
                      Tensor& gb = OpAccess::grad_buffer(t, bid);
                      for (std::size_t i = 0; i < g.rows(); ++i) {
                          for (std::size_t j = 0; j < g.cols(); ++j) {
                              gb.raw()[detail::bindex(gb, kind, i, j)] += g.at(i, j) * av2.at(i, j);
                          }
                      }
                  }
              });
}

inline Var matmul(Var a, Var b) {
    detail::check_same_tape(a, b, "matmul");
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) {
        throw Error(detail::cat("matmul: inner dimensions differ (", av.rows(), "x", av.cols(),
                                " vs ", bv.rows(), "x", bv.cols(), ")"));
    }
    Tensor out(av.rows(), bv.cols());
    detail::emap(out).noalias() = detail::emap(av) * detail::emap(bv);
    const bool rg = a.tape->requires_grad(a) || a.tape->requires_grad(b);
    return OpAccess::push(*a.tape, std::move(out), rg, a.id, b.id,
                          !rg ? Tape::BackpropFn{}
                              : [aid = a.id, bid = b.id](Tape& t, std::uint32_t self) {
                                    const Tensor& g = OpAccess::grad(t, self);
                                    const Tensor& av2 = OpAccess::value(t, aid);
                                    const Tensor& bv2 = OpAccess::value(t, bid);
                                    if (OpAccess::requires_grad(t, aid)) {
                                        Tensor& ga = OpAccess::grad_buffer(t, aid);
                                        detail::emap(ga).noalias() +=
                                            detail::emap(g) * detail::emap(bv2).transpose();
                                    }
                                    if (OpAccess::requires_grad(t, bid)) {
                                        Tensor& gb = OpAccess::grad_buffer(t, bid);
                                        detail::emap(gb).noalias() +=
                                            detail::emap(av2).transpose() * detail::emap(g);
                                    }
                                });
}

inline Var exp(Var x) {
    return detail::unary_op(
        x, [](double v) { return std::exp(v); },
        [](double, double y) { return y; });
}

inline Var log(Var x) {
    return detail::unary_op(
        x, [](double v) { return std::log(v); },
        [](double v, double) { return 1.0 / v; });
}

inline Var tanh(Var x) {
    return detail::unary_op(
        x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

inline Var sigmoid(Var x) {
    return detail::unary_op(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

inline Var relu(Var x) {
    return detail::unary_op(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

/// Elementwise clamp. Gradient is the identity strictly inside [lo, hi]
/// (boundary included) and zero outside.
inline Var clamp(Var x, double lo, double hi) {
    if (!(lo <= hi)) throw Error("clamp: lo must not exceed hi");
    return detail::unary_op(
        x,
        [lo, hi](double v) { return v < lo ? lo : (v > hi ? hi : v); },
        [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

/// Elementwise x^c for a constant exponent. Intended for x >= 0. The
/// derivative at x = 0 with c != 1 is defined as 0 so that clamped
/// zero-distance kernel values stay NaN-free.
inline Var pow(Var x, double c) {
    return detail::unary_op(
        x, [c](double v) { return std::pow(v, c); },
        [c](double v, double) {
            if (c == 1.0) return 1.0;
            if (v <= 0.0) return 0.0;
            return c * std::pow(v, c - 1.0);
        });
}

/// Elementwise scale * x + shift.
inline Var affine(Var x, double scale, double shift) {
    return detail::unary_op(
        x, [scale, shift](double v) { return scale * v + shift; },
        [scale](double, double) { return scale; });
}

inline Var neg(Var x) { return affine(x, -1.0, 0.0); }

/// Sum of all entries, as a 1x1 tensor.
inline Var sum(Var x) {
    const Tensor& xv = x.value();
    double s = 0.0;
    for (double v : xv.raw()) s += v;
    const bool rg = x.tape->requires_grad(x);
    return OpAccess::push(*x.tape, Tensor::scalar(s), rg, x.id, Tape::npos,
                          !rg ? Tape::BackpropFn{}
                              : [xid = x.id](Tape& t, std::uint32_t self) {
                                    const double g = OpAccess::grad(t, self).raw()[0];
                                    Tensor& gx = OpAccess::grad_buffer(t, xid);
                                    for (double& v : gx.raw()) v += g;
                                });
}

/// Row-wise sum: RxC -> Rx1.
inline Var rowsum(Var x) {
    const Tensor& xv = x.value();
    Tensor out(xv.rows(), 1);
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < xv.cols(); ++j) s += xv.at(i, j);
        out.at(i, 0) = s;
    }
    const bool rg = x.tape->requires_grad(x);
    return OpAccess::push(*x.tape, std::move(out), rg, x.id, Tape::npos,
                          !rg ? Tape::BackpropFn{}
                              : [xid = x.id](Tape& t, std::uint32_t self) {
                                    const Tensor& g = OpAccess::grad(t, self);
                                    Tensor& gx = OpAccess::grad_buffer(t, xid);
                                    for (std::size_t i = 0; i < gx.rows(); ++i) {
                                        for (std::size_t j = 0; j < gx.cols(); ++j) {
                                            gx.at(i, j) += g.at(i, 0);
                                        }
                                    }
                                });
}

/// Mean of all entries, as a 1x1 tensor.
inline Var mean(Var x) {
    return affine(sum(x), 1.0 / static_cast<double>(x.value().size()), 0.0);
}

/// Each row repeated `times` times consecutively: RxC -> (R*times)xC.
/// The backward pass sums gradients over the copies of a row.
inline Var repeat_rows(Var x, std::size_t times) {
    if (times == 0) throw Error("repeat_rows: times must be positive");
    const Tensor& xv = x.value();
    Tensor out(xv.rows() * times, xv.cols());
    for (std::size_t i = 0; i < xv.rows(); ++i) {
        for (std::size_t r = 0; r < times; ++r) {
            for (std::size_t j = 0; j < xv.cols(); ++j) {
                out.at(i * times + r, j) = xv.at(i, j);
            }
        }
    }
    const bool rg = x.tape->requires_grad(x);
    return OpAccess::push(*x.tape, std::move(out), rg, x.id, Tape::npos,
                          !rg ? Tape::BackpropFn{}
                              : [xid = x.id, times](Tape& t, std::uint32_t self) {
                                    const Tensor& g = OpAccess::grad(t, self);
                                    Tensor& gx = OpAccess::grad_buffer(t, xid);
                                    for (std::size_t i = 0; i < gx.rows(); ++i) {
                                        for (std::size_t r = 0; r < times; ++r) {
                                            for (std::size_t j = 0; j < gx.cols(); ++j) {
                                                gx.at(i, j) += g.at(i * times + r, j);
                                            }
                                        }
                                    }
                                });
}

/// Squared error averaged over rows: mean_i ||a_i - b_i||^2, as 1x1.
inline Var mean_squared_error(Var pred, Var target) {
    Var d = sub(pred, target);
    return affine(sum(mul(d, d)), 1.0 / static_cast<double>(pred.value().rows()), 0.0);
}

} // namespace umix::ad

#pragma once

// Reverse-mode autodiff over a tape of dense tensor ops. Each call appends a
// node holding its forward value (creation order is topological order);
// backward() walks the tape in reverse. Every op validates shapes and checks
// its output for NaN/Inf — a non-finite value anywhere is a hard error, so
// training failures surface at the op that produced them.
//
// Parameters enter via param(name, &tensor): the graph borrows the tensor
// (caller keeps ownership) and accumulates its gradient, retrievable by name
// after backward. A graph instance is built, run and dropped per step.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mipose/nn/gemm.hpp"
#include "mipose/nn/tensor.hpp"

namespace mipose::nn {

template <typename T>
class Graph {
public:
    using ValueId = int;

    /// Constant leaf (no gradient).
    ValueId input(Tensor<T> t) {
        Node n;
        n.op = Op::leaf;
        n.value = std::move(t);
        return push(std::move(n), "input");
    }

    /// Tracked leaf borrowing `t`; gradient accumulated under `name`.
    /// Re-registering the same name returns the existing node, so a tensor
    /// used by several branches of one graph gets a single accumulated
    /// gradient.
    ValueId param(const std::string& name, const Tensor<T>* t) {
        if (!t) throw std::invalid_argument("param: null tensor");
        if (auto it = param_by_name_.find(name); it != param_by_name_.end()) {
            if (node(it->second).source != t)
                throw std::invalid_argument("param: name '" + name +
                                            "' re-registered with a different tensor");
            return it->second;
        }
        Node n;
        n.op = Op::leaf;
        n.value = *t;
        n.source = t;
        n.param_name = name;
        const ValueId id = push(std::move(n), "param " + name);
        param_ids_.push_back(id);
        param_by_name_.emplace(name, id);
        return id;
    }

    /// x: {H,W,Cin}, w: {KH,KW,Cin,Cout}, b: {Cout}. Zero padding, square
    /// stride. Output {Ho,Wo,Cout} with Ho = (H + 2p - KH)/s + 1.
    ValueId conv2d(ValueId x, ValueId w, ValueId b, int stride, int padding) {
        const Tensor<T>& xv = value(x);
        const Tensor<T>& wv = value(w);
        const Tensor<T>& bv = value(b);
        if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1)
            throw std::invalid_argument("conv2d: expected x{H,W,C}, w{KH,KW,Cin,Cout}, b{Cout}; got x" +
                                        xv.shape_str() + " w" + wv.shape_str() + " b" + bv.shape_str());
        const int h = xv.dim(0), wd = xv.dim(1), cin = xv.dim(2);
        const int kh = wv.dim(0), kw = wv.dim(1), cout = wv.dim(3);
        if (wv.dim(2) != cin)
            throw std::invalid_argument("conv2d: weight cin " + std::to_string(wv.dim(2)) +
                                        " != input channels " + std::to_string(cin));
        if (bv.dim(0) != cout)
            throw std::invalid_argument("conv2d: bias length " + std::to_string(bv.dim(0)) +
                                        " != cout " + std::to_string(cout));
        if (stride < 1 || padding < 0)
            throw std::invalid_argument("conv2d: stride must be >= 1 and padding >= 0");
        const int ho = (h + 2 * padding - kh) / stride + 1;
        const int wo = (wd + 2 * padding - kw) / stride + 1;
        if (ho < 1 || wo < 1)
            throw std::invalid_argument("conv2d: kernel " + std::to_string(kh) + "x" +
                                        std::to_string(kw) + " larger than padded input " +
                                        xv.shape_str());

        Node n;
        n.op = Op::conv2d;
        n.inputs = {x, w, b};
        n.stride = stride;
        n.padding = padding;
        n.value = Tensor<T>({ho, wo, cout});

        // im2col: one row per output pixel, kh*kw*cin contiguous columns.
        const std::size_t rows = static_cast<std::size_t>(ho) * wo;
        const std::size_t cols = static_cast<std::size_t>(kh) * kw * cin;
        n.aux.assign(rows * cols, T(0));
        const T* xd = xv.data.data();
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                T* row = n.aux.data() + (static_cast<std::size_t>(oy) * wo + ox) * cols;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * stride + ky - padding;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * stride + kx - padding;
                        if (ix < 0 || ix >= wd) continue;
                        std::memcpy(row + (static_cast<std::size_t>(ky) * kw + kx) * cin,
                                    xd + (static_cast<std::size_t>(iy) * wd + ix) * cin,
                                    sizeof(T) * static_cast<std::size_t>(cin));
                    }
                }
            }
        }
        gemm_nn(rows, static_cast<std::size_t>(cout), cols, n.aux.data(), wv.data.data(),
                n.value.data.data());
        for (std::size_t r = 0; r < rows; ++r) {
            T* orow = n.value.data.data() + r * cout;
            for (int c = 0; c < cout; ++c) orow[c] += bv.data[static_cast<std::size_t>(c)];
        }
        return push(std::move(n), "conv2d");
    }

    ValueId relu(ValueId x) {
        const Tensor<T>& xv = value(x);
        Node n;
        n.op = Op::relu;
        n.inputs = {x};
        n.value = xv;
        for (auto& v : n.value.data) {
            const double a = std::abs(static_cast<double>(v));
            if (a < min_relu_abs_) min_relu_abs_ = a;
            if (v < T(0)) v = T(0);
        }
        return push(std::move(n), "relu");
    }

    ValueId sigmoid(ValueId x) {
        const Tensor<T>& xv = value(x);
        Node n;
        n.op = Op::sigmoid;
        n.inputs = {x};
        n.value = xv;
        for (auto& v : n.value.data) {
            // Evaluate on the side that keeps exp() bounded.
            if (v >= T(0)) {
                v = T(1) / (T(1) + std::exp(-v));
            } else {
                const T e = std::exp(v);
                v = e / (T(1) + e);
            }
        }
        return push(std::move(n), "sigmoid");
    }

    /// x: {In}, w: {Out,In}, b: {Out} -> {Out}.
    ValueId fully_connected(ValueId x, ValueId w, ValueId b) {
        const Tensor<T>& xv = value(x);
        const Tensor<T>& wv = value(w);
        const Tensor<T>& bv = value(b);
        if (xv.rank() != 1 || wv.rank() != 2 || bv.rank() != 1)
            throw std::invalid_argument("fully_connected: expected x{In}, w{Out,In}, b{Out}; got x" +
                                        xv.shape_str() + " w" + wv.shape_str() + " b" + bv.shape_str());
        const int in = xv.dim(0), out = wv.dim(0);
        if (wv.dim(1) != in || bv.dim(0) != out)
            throw std::invalid_argument("fully_connected: w" + wv.shape_str() + " incompatible with x" +
                                        xv.shape_str() + " b" + bv.shape_str());
        Node n;
        n.op = Op::fully_connected;
        n.inputs = {x, w, b};
        n.value = Tensor<T>({out});
        for (int o = 0; o < out; ++o) {
            const T* wrow = wv.data.data() + static_cast<std::size_t>(o) * in;
            T acc = bv.data[static_cast<std::size_t>(o)];
            for (int i = 0; i < in; ++i) acc += wrow[i] * xv.data[static_cast<std::size_t>(i)];
            n.value.data[static_cast<std::size_t>(o)] = acc;
        }
        return push(std::move(n), "fully_connected");
    }

    /// {H,W,C} -> {C}, per-channel spatial mean.
    ValueId global_avg_pool(ValueId x) {
        const Tensor<T>& xv = value(x);
        if (xv.rank() != 3)
            throw std::invalid_argument("global_avg_pool: expected {H,W,C}, got " + xv.shape_str());
        const int h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
        Node n;
        n.op = Op::global_avg_pool;
        n.inputs = {x};
        n.value = Tensor<T>({c});
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const T* px = xv.data.data() + (static_cast<std::size_t>(y) * w + xx) * c;
                for (int ch = 0; ch < c; ++ch) n.value.data[static_cast<std::size_t>(ch)] += px[ch];
            }
        const T inv = T(1) / static_cast<T>(h * w);
        for (auto& v : n.value.data) v *= inv;
        return push(std::move(n), "global_avg_pool");
    }

    /// {H,W,C} -> {H*f,W*f,C}, nearest neighbour.
    ValueId upsample_nearest(ValueId x, int factor) {
        const Tensor<T>& xv = value(x);
        if (xv.rank() != 3)
            throw std::invalid_argument("upsample_nearest: expected {H,W,C}, got " + xv.shape_str());
        if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
        const int h = xv.dim(0), w = xv.dim(1), c = xv.dim(2);
        Node n;
        n.op = Op::upsample_nearest;
        n.inputs = {x};
        n.factor = factor;
        n.value = Tensor<T>({h * factor, w * factor, c});
        for (int y = 0; y < h * factor; ++y) {
            const int sy = y / factor;
            for (int xx = 0; xx < w * factor; ++xx) {
                const int sx = xx / factor;
                std::memcpy(n.value.data.data() +
                                (static_cast<std::size_t>(y) * w * factor + xx) * c,
                            xv.data.data() + (static_cast<std::size_t>(sy) * w + sx) * c,
                            sizeof(T) * static_cast<std::size_t>(c));
            }
        }
        return push(std::move(n), "upsample_nearest");
    }

    /// Elementwise add; also {H,W,C} + {C} channel broadcast.
    ValueId add(ValueId a, ValueId b) { return binary(Op::add, a, b); }

    /// Elementwise multiply; also {H,W,C} * {C} channel broadcast.
    ValueId mul(ValueId a, ValueId b) { return binary(Op::mul, a, b); }

    /// Multiply by a compile-time constant (no gradient to the constant).
    ValueId scale(ValueId x, T s) {
        const Tensor<T>& xv = value(x);
        Node n;
        n.op = Op::scale;
        n.inputs = {x};
        n.scalar = s;
        n.value = xv;
        for (auto& v : n.value.data) v *= s;
        return push(std::move(n), "scale");
    }

    /// Scalar loss: mean squared difference between pred and a constant
    /// target over channels with weight 1 (weights in {0,1}, one per
    /// channel). All-zero weights give a constant 0 (no gradient).
    ValueId weighted_mse(ValueId pred, const Tensor<T>& target,
                         const std::vector<double>& weights) {
        const Tensor<T>& pv = value(pred);
        if (pv.rank() != 3 || !pv.same_shape(target))
            throw std::invalid_argument("weighted_mse: pred " + pv.shape_str() +
                                        " vs target " + target.shape_str());
        const int c = pv.dim(2);
        if (static_cast<int>(weights.size()) != c)
            throw std::invalid_argument("weighted_mse: weights length " +
                                        std::to_string(weights.size()) + " != channels " +
                                        std::to_string(c));
        Node n;
        n.op = Op::weighted_mse;
        n.inputs = {pred};
        n.target = target;
        n.weights = weights;
        int active = 0;
        for (double w : weights) {
            if (w != 0.0 && w != 1.0)
                throw std::invalid_argument("weighted_mse: weights must be 0 or 1");
            if (w == 1.0) ++active;
        }
        n.active = active;
        n.value = Tensor<T>({1});
        if (active > 0) {
            const int h = pv.dim(0), w = pv.dim(1);
            double sum = 0.0;
            for (std::size_t i = 0; i < pv.data.size(); ++i) {
                const int ch = static_cast<int>(i % static_cast<std::size_t>(c));
                if (weights[static_cast<std::size_t>(ch)] == 0.0) continue;
                const double d =
                    static_cast<double>(pv.data[i]) - static_cast<double>(n.target.data[i]);
                sum += d * d;
            }
            n.value.data[0] = static_cast<T>(sum / (static_cast<double>(h) * w * active));
        }
        return push(std::move(n), "weighted_mse");
    }

    const Tensor<T>& value(ValueId id) const { return node(id).value; }

    /// Backpropagate from a scalar node through the whole tape. Gradients of
    /// nodes the loss does not reach stay zero.
    void backward(ValueId loss) {
        Node& ln = node(loss);
        if (ln.value.numel() != 1)
            throw std::invalid_argument("backward: loss must be scalar, got " +
                                        ln.value.shape_str());
        for (auto& n : nodes_) {
            n.grad.shape = n.value.shape;
            n.grad.data.assign(n.value.data.size(), T(0));
        }
        ln.grad.data[0] = T(1);
        for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id)
            backward_node(nodes_[static_cast<std::size_t>(id)]);
        has_grads_ = true;
    }

    const Tensor<T>& grad(ValueId id) const {
        if (!has_grads_) throw std::logic_error("grad: backward() has not run");
        return node(id).grad;
    }

    /// (name, gradient) for every param leaf, in registration order.
    std::vector<std::pair<std::string, const Tensor<T>*>> param_grads() const {
        if (!has_grads_) throw std::logic_error("param_grads: backward() has not run");
        std::vector<std::pair<std::string, const Tensor<T>*>> out;
        out.reserve(param_ids_.size());
        for (ValueId id : param_ids_) {
            const Node& n = node(id);
            out.emplace_back(n.param_name, &n.grad);
        }
        return out;
    }

    /// Smallest |pre-activation| seen by any relu this forward pass; the
    /// gradient checker uses it to detect kink-adjacent evaluations.
    double min_relu_abs() const { return min_relu_abs_; }

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op {
        leaf,
        conv2d,
        relu,
        sigmoid,
        fully_connected,
        global_avg_pool,
        upsample_nearest,
        add,
        mul,
        scale,
        weighted_mse,
    };

    struct Node {
        Op op = Op::leaf;
        std::vector<ValueId> inputs;
        Tensor<T> value;
        Tensor<T> grad;
        std::vector<T> aux;  // conv2d: im2col matrix
        Tensor<T> target;    // weighted_mse
        std::vector<double> weights;
        int active = 0;
        int stride = 1;
        int padding = 0;
        int factor = 1;
        T scalar = T(0);
        bool broadcast = false;  // add/mul with rank-1 rhs over channels
        std::string param_name;
        const Tensor<T>* source = nullptr;  // param leaves: borrowed tensor
    };

    Node& node(ValueId id) {
        if (id < 0 || id >= static_cast<int>(nodes_.size()))
            throw std::out_of_range("graph: bad value id");
        return nodes_[static_cast<std::size_t>(id)];
    }
    const Node& node(ValueId id) const {
        if (id < 0 || id >= static_cast<int>(nodes_.size()))
            throw std::out_of_range("graph: bad value id");
        return nodes_[static_cast<std::size_t>(id)];
    }

    ValueId push(Node n, const std::string& what) {
        if (!all_finite(n.value))
            throw std::runtime_error("graph: non-finite value produced by " + what);
        nodes_.push_back(std::move(n));
        return static_cast<ValueId>(nodes_.size() - 1);
    }

    ValueId binary(Op op, ValueId a, ValueId b) {
        const char* name = op == Op::add ? "add" : "mul";
        const Tensor<T>& av = value(a);
        const Tensor<T>& bv = value(b);
        Node n;
        n.op = op;
        n.inputs = {a, b};
        if (av.same_shape(bv)) {
            n.value = av;
            for (std::size_t i = 0; i < n.value.data.size(); ++i)
                n.value.data[i] = op == Op::add ? av.data[i] + bv.data[i]
                                                : av.data[i] * bv.data[i];
        } else if (av.rank() == 3 && bv.rank() == 1 && av.dim(2) == bv.dim(0)) {
            n.broadcast = true;
            n.value = av;
            const int c = bv.dim(0);
            for (std::size_t i = 0; i < n.value.data.size(); ++i) {
                const T rhs = bv.data[i % static_cast<std::size_t>(c)];
                n.value.data[i] = op == Op::add ? av.data[i] + rhs : av.data[i] * rhs;
            }
        } else {
            throw std::invalid_argument(std::string(name) + ": incompatible shapes " +
                                        av.shape_str() + " and " + bv.shape_str());
        }
        return push(std::move(n), name);
    }

    void backward_node(Node& n) {
        switch (n.op) {
            case Op::leaf:
                break;
            case Op::conv2d:
                backward_conv2d(n);
                break;
            case Op::relu: {
                Node& x = node(n.inputs[0]);
                for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                    if (n.value.data[i] > T(0)) x.grad.data[i] += n.grad.data[i];
                break;
            }
            case Op::sigmoid: {
                Node& x = node(n.inputs[0]);
                for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                    const T s = n.value.data[i];
                    x.grad.data[i] += n.grad.data[i] * s * (T(1) - s);
                }
                break;
            }
            case Op::fully_connected: {
                Node& x = node(n.inputs[0]);
                Node& w = node(n.inputs[1]);
                Node& b = node(n.inputs[2]);
                const int out = w.value.dim(0), in = w.value.dim(1);
                for (int o = 0; o < out; ++o) {
                    const T g = n.grad.data[static_cast<std::size_t>(o)];
                    b.grad.data[static_cast<std::size_t>(o)] += g;
                    const T* wrow = w.value.data.data() + static_cast<std::size_t>(o) * in;
                    T* dwrow = w.grad.data.data() + static_cast<std::size_t>(o) * in;
                    for (int i = 0; i < in; ++i) {
                        dwrow[i] += g * x.value.data[static_cast<std::size_t>(i)];
                        x.grad.data[static_cast<std::size_t>(i)] += g * wrow[i];
                    }
                }
                break;
            }
            case Op::global_avg_pool: {
                Node& x = node(n.inputs[0]);
                const int h = x.value.dim(0), w = x.value.dim(1), c = x.value.dim(2);
                const T inv = T(1) / static_cast<T>(h * w);
                for (std::size_t i = 0; i < x.grad.data.size(); ++i)
                    x.grad.data[i] += n.grad.data[i % static_cast<std::size_t>(c)] * inv;
                break;
            }
            case Op::upsample_nearest: {
                Node& x = node(n.inputs[0]);
                const int h = x.value.dim(0), w = x.value.dim(1), c = x.value.dim(2);
                const int f = n.factor;
                for (int y = 0; y < h * f; ++y) {
                    const int sy = y / f;
                    for (int xx = 0; xx < w * f; ++xx) {
                        const int sx = xx / f;
                        const T* g = n.grad.data.data() +
                                     (static_cast<std::size_t>(y) * w * f + xx) * c;
                        T* dx = x.grad.data.data() +
                                (static_cast<std::size_t>(sy) * w + sx) * c;
                        for (int ch = 0; ch < c; ++ch) dx[ch] += g[ch];
                    }
                }
                break;
            }
            case Op::add: {
                Node& a = node(n.inputs[0]);
                Node& b = node(n.inputs[1]);
                if (!n.broadcast) {
                    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                        a.grad.data[i] += n.grad.data[i];
                        b.grad.data[i] += n.grad.data[i];
                    }
                } else {
                    const int c = b.value.dim(0);
                    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                        a.grad.data[i] += n.grad.data[i];
                        b.grad.data[i % static_cast<std::size_t>(c)] += n.grad.data[i];
                    }
                }
                break;
            }
            case Op::mul: {
                Node& a = node(n.inputs[0]);
                Node& b = node(n.inputs[1]);
                if (!n.broadcast) {
                    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                        a.grad.data[i] += n.grad.data[i] * b.value.data[i];
                        b.grad.data[i] += n.grad.data[i] * a.value.data[i];
                    }
                } else {
                    const int c = b.value.dim(0);
                    for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                        const std::size_t ch = i % static_cast<std::size_t>(c);
                        a.grad.data[i] += n.grad.data[i] * b.value.data[ch];
                        b.grad.data[ch] += n.grad.data[i] * a.value.data[i];
                    }
                }
                break;
            }
            case Op::scale: {
                Node& x = node(n.inputs[0]);
                for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                    x.grad.data[i] += n.grad.data[i] * n.scalar;
                break;
            }
            case Op::weighted_mse: {
                if (n.active == 0) break;
                Node& p = node(n.inputs[0]);
                const int h = p.value.dim(0), w = p.value.dim(1), c = p.value.dim(2);
                const T g = n.grad.data[0];
                const T norm = T(2) / static_cast<T>(static_cast<double>(h) * w * n.active);
                for (std::size_t i = 0; i < p.value.data.size(); ++i) {
                    const int ch = static_cast<int>(i % static_cast<std::size_t>(c));
                    if (n.weights[static_cast<std::size_t>(ch)] == 0.0) continue;
                    p.grad.data[i] += g * norm * (p.value.data[i] - n.target.data[i]);
                }
                break;
            }
        }
    }

    void backward_conv2d(Node& n) {
        Node& x = node(n.inputs[0]);
        Node& w = node(n.inputs[1]);
        Node& b = node(n.inputs[2]);
        const int h = x.value.dim(0), wd = x.value.dim(1), cin = x.value.dim(2);
        const int kh = w.value.dim(0), kw = w.value.dim(1), cout = w.value.dim(3);
        const int ho = n.value.dim(0), wo = n.value.dim(1);
        const std::size_t rows = static_cast<std::size_t>(ho) * wo;
        const std::size_t cols = static_cast<std::size_t>(kh) * kw * cin;

        for (std::size_t r = 0; r < rows; ++r) {
            const T* grow = n.grad.data.data() + r * cout;
            for (int c = 0; c < cout; ++c) b.grad.data[static_cast<std::size_t>(c)] += grow[c];
        }
        // dW = im2col^T * dOut; dCol = dOut * W^T, scattered back to dx.
        gemm_tn(cols, static_cast<std::size_t>(cout), rows, n.aux.data(), n.grad.data.data(),
                w.grad.data.data());
        std::vector<T> dcol(rows * cols, T(0));
        gemm_nt(rows, cols, static_cast<std::size_t>(cout), n.grad.data.data(),
                w.value.data.data(), dcol.data());
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                const T* row = dcol.data() + (static_cast<std::size_t>(oy) * wo + ox) * cols;
                for (int ky = 0; ky < kh; ++ky) {
                    const int iy = oy * n.stride + ky - n.padding;
                    if (iy < 0 || iy >= h) continue;
                    for (int kx = 0; kx < kw; ++kx) {
                        const int ix = ox * n.stride + kx - n.padding;
                        if (ix < 0 || ix >= wd) continue;
                        const T* src = row + (static_cast<std::size_t>(ky) * kw + kx) * cin;
                        T* dst = x.grad.data.data() +
                                 (static_cast<std::size_t>(iy) * wd + ix) * cin;
                        for (int c = 0; c < cin; ++c) dst[c] += src[c];
                    }
                }
            }
        }
    }

    std::vector<Node> nodes_;
    std::vector<ValueId> param_ids_;
    std::unordered_map<std::string, ValueId> param_by_name_;
    double min_relu_abs_ = std::numeric_limits<double>::infinity();
    bool has_grads_ = false;
};

}  // namespace mipose::nn

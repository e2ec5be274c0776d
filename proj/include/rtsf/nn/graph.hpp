#pragma once

// Tape-based reverse-mode differentiation over the operator set the network
// needs. Vars are handles onto shared graph nodes; every operator records its
// adjoint as a closure. backward() walks the graph once in reverse
// topological order. Graphs are rebuilt per batch; parameter nodes persist
// across graphs.

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <unordered_set>
#include <vector>

#include "rtsf/common.hpp"
#include "rtsf/nn/array.hpp"
#include "rtsf/rot/rodrigues.hpp"
#include "rtsf/tsf/features.hpp"

namespace rtsf::nn {

template <typename T>
struct Node {
    Array<T> value;
    Array<T> grad;  // allocated by backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;
};

template <typename T>
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

    static Var constant(Array<T> value) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        return Var(std::move(n));
    }
    static Var parameter(Array<T> value) {
        auto n = std::make_shared<Node<T>>();
        n->value = std::move(value);
        n->requires_grad = true;
        return Var(std::move(n));
    }

    bool valid() const { return node_ != nullptr; }
    // Handle semantics: a Var is a shared reference to its node.
    Array<T>& value() const { return node_->value; }
    Array<T>& grad() const { return node_->grad; }
    void clear_grad() const { node_->grad = Array<T>(); }
    bool requires_grad() const { return node_->requires_grad; }
    std::shared_ptr<Node<T>> node() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

namespace detail {

template <typename T>
Var<T> make_op(Array<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    for (auto& p : parents) {
        n->requires_grad = n->requires_grad || p.requires_grad();
        n->parents.push_back(p.node());
    }
    if (n->requires_grad) n->backward_fn = std::move(backward);
    return Var<T>(std::move(n));
}

template <typename T>
void ensure_grad(Node<T>& n) {
    if (n.grad.v.empty()) n.grad = Array<T>::zeros(n.value.shape);
}

inline size_t outer_count(const std::vector<size_t>& shape, size_t axis) {
    size_t n = 1;
    for (size_t i = 0; i < axis; ++i) n *= shape[i];
    return n;
}
inline size_t inner_count(const std::vector<size_t>& shape, size_t axis) {
    size_t n = 1;
    for (size_t i = axis + 1; i < shape.size(); ++i) n *= shape[i];
    return n;
}

}  // namespace detail

// Runs reverse-mode accumulation from a scalar loss. Gradients of every
// requires_grad node reachable from the loss are (re)computed; previous
// contents are discarded.
template <typename T>
void backward(const Var<T>& loss) {
    if (loss.value().size() != 1)
        throw UsageError("backward expects a scalar loss, got shape " +
                         loss.value().shape_str());
    // Iterative post-order topological sort.
    std::vector<Node<T>*> topo;
    std::unordered_set<Node<T>*> seen;
    struct Frame {
        Node<T>* n;
        size_t next_parent;
    };
    std::vector<Frame> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            Node<T>* p = f.n->parents[f.next_parent++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            topo.push_back(f.n);
            stack.pop_back();
        }
    }
    for (Node<T>* n : topo) {
        n->grad = Array<T>::zeros(n->value.shape);
    }
    loss.node()->grad.v[0] = T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node<T>* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---------------------------------------------------------------------------
// Shape plumbing

template <typename T>
Var<T> reshape(const Var<T>& x, std::vector<size_t> shape) {
    if (Array<T>::count(shape) != x.value().size())
        throw ConfigError("reshape to " + Array<T>(shape).shape_str() +
                          " does not preserve element count of " + x.value().shape_str());
    Array<T> out(shape, x.value().v);
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {x}, [xp](Node<T>& n) {
        detail::ensure_grad(*xp);
        for (size_t i = 0; i < n.grad.v.size(); ++i) xp->grad.v[i] += n.grad.v[i];
    });
}

template <typename T>
Var<T> slice_axis(const Var<T>& x, size_t axis, size_t start, size_t len) {
    const auto& sh = x.value().shape;
    if (axis >= sh.size() || start + len > sh[axis])
        throw ConfigError("slice out of range on " + x.value().shape_str());
    auto out_shape = sh;
    out_shape[axis] = len;
    const size_t outer = detail::outer_count(sh, axis);
    const size_t inner = detail::inner_count(sh, axis);
    Array<T> out(out_shape);
    for (size_t o = 0; o < outer; ++o)
        for (size_t a = 0; a < len; ++a)
            for (size_t i = 0; i < inner; ++i)
                out.v[(o * len + a) * inner + i] =
                    x.value().v[(o * sh[axis] + start + a) * inner + i];
    auto xp = x.node();
    const size_t dim = sh[axis];
    return detail::make_op<T>(std::move(out), {x},
                              [xp, outer, inner, dim, start, len](Node<T>& n) {
                                  detail::ensure_grad(*xp);
                                  for (size_t o = 0; o < outer; ++o)
                                      for (size_t a = 0; a < len; ++a)
                                          for (size_t i = 0; i < inner; ++i)
                                              xp->grad.v[(o * dim + start + a) * inner + i] +=
                                                  n.grad.v[(o * len + a) * inner + i];
                              });
}

template <typename T>
Var<T> concat(const std::vector<Var<T>>& xs, size_t axis) {
    if (xs.empty()) throw ConfigError("concat of zero tensors");
    const auto& base = xs[0].value().shape;
    size_t total = 0;
    for (const auto& x : xs) {
        const auto& sh = x.value().shape;
        if (sh.size() != base.size()) throw ConfigError("concat rank mismatch");
        for (size_t i = 0; i < sh.size(); ++i)
            if (i != axis && sh[i] != base[i])
                throw ConfigError("concat shape mismatch: " + x.value().shape_str() +
                                  " vs " + xs[0].value().shape_str());
        total += sh[axis];
    }
    auto out_shape = base;
    out_shape[axis] = total;
    const size_t outer = detail::outer_count(base, axis);
    const size_t inner = detail::inner_count(base, axis);
    Array<T> out(out_shape);
    size_t off = 0;
    for (const auto& x : xs) {
        const size_t len = x.value().shape[axis];
        for (size_t o = 0; o < outer; ++o)
            for (size_t a = 0; a < len; ++a)
                for (size_t i = 0; i < inner; ++i)
                    out.v[(o * total + off + a) * inner + i] =
                        x.value().v[(o * len + a) * inner + i];
        off += len;
    }
    std::vector<size_t> lens;
    for (const auto& x : xs) lens.push_back(x.value().shape[axis]);
    return detail::make_op<T>(std::move(out), xs, [outer, inner, total, lens](Node<T>& n) {
        size_t off = 0;
        for (size_t pi = 0; pi < n.parents.size(); ++pi) {
            auto& p = *n.parents[pi];
            const size_t len = lens[pi];
            if (p.requires_grad) {
                detail::ensure_grad(p);
                for (size_t o = 0; o < outer; ++o)
                    for (size_t a = 0; a < len; ++a)
                        for (size_t i = 0; i < inner; ++i)
                            p.grad.v[(o * len + a) * inner + i] +=
                                n.grad.v[(o * total + off + a) * inner + i];
            }
            off += len;
        }
    });
}

// ---------------------------------------------------------------------------
// Arithmetic

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    if (a.value().shape != b.value().shape)
        throw ConfigError("add shape mismatch: " + a.value().shape_str() + " vs " +
                          b.value().shape_str());
    Array<T> out(a.value().shape);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = a.value().v[i] + b.value().v[i];
    auto ap = a.node();
    auto bp = b.node();
    return detail::make_op<T>(std::move(out), {a, b}, [ap, bp](Node<T>& n) {
        for (auto* p : {ap.get(), bp.get()}) {
            if (!p->requires_grad) continue;
            detail::ensure_grad(*p);
            for (size_t i = 0; i < n.grad.v.size(); ++i) p->grad.v[i] += n.grad.v[i];
        }
    });
}

template <typename T>
Var<T> scale(const Var<T>& x, T c) {
    Array<T> out(x.value().shape);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = x.value().v[i] * c;
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {x}, [xp, c](Node<T>& n) {
        detail::ensure_grad(*xp);
        for (size_t i = 0; i < n.grad.v.size(); ++i) xp->grad.v[i] += n.grad.v[i] * c;
    });
}

// Elementwise product with broadcasting: operands share the rank of the
// output and every dimension either matches or is 1.
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    const auto& sa = a.value().shape;
    const auto& sb = b.value().shape;
    if (sa.size() != sb.size())
        throw ConfigError("mul rank mismatch: " + a.value().shape_str() + " vs " +
                          b.value().shape_str());
    const size_t rank = sa.size();
    std::vector<size_t> so(rank);
    for (size_t i = 0; i < rank; ++i) {
        if (sa[i] != sb[i] && sa[i] != 1 && sb[i] != 1)
            throw ConfigError("mul shape mismatch: " + a.value().shape_str() + " vs " +
                              b.value().shape_str());
        so[i] = std::max(sa[i], sb[i]);
    }
    auto strides = [](const std::vector<size_t>& s) {
        std::vector<size_t> st(s.size(), 0);
        size_t acc = 1;
        for (size_t i = s.size(); i-- > 0;) {
            st[i] = acc;
            acc *= s[i];
        }
        return st;
    };
    const auto sta_full = strides(sa);
    const auto stb_full = strides(sb);
    const auto sto = strides(so);
    // Broadcast dims contribute stride 0.
    std::vector<size_t> sta(rank), stb(rank);
    for (size_t i = 0; i < rank; ++i) {
        sta[i] = sa[i] == 1 ? 0 : sta_full[i];
        stb[i] = sb[i] == 1 ? 0 : stb_full[i];
    }
    Array<T> out(so);
    const size_t total = out.size();
    for (size_t lin = 0; lin < total; ++lin) {
        size_t ia = 0, ib = 0;
        size_t rem = lin;
        for (size_t d = 0; d < rank; ++d) {
            const size_t id = rem / sto[d];
            rem %= sto[d];
            ia += id * sta[d];
            ib += id * stb[d];
        }
        out.v[lin] = a.value().v[ia] * b.value().v[ib];
    }
    auto ap = a.node();
    auto bp = b.node();
    return detail::make_op<T>(std::move(out), {a, b}, [ap, bp, sta, stb, sto, rank](Node<T>& n) {
        const bool ga = ap->requires_grad, gb = bp->requires_grad;
        if (ga) detail::ensure_grad(*ap);
        if (gb) detail::ensure_grad(*bp);
        for (size_t lin = 0; lin < n.grad.v.size(); ++lin) {
            size_t ia = 0, ib = 0;
            size_t rem = lin;
            for (size_t d = 0; d < rank; ++d) {
                const size_t id = rem / sto[d];
                rem %= sto[d];
                ia += id * sta[d];
                ib += id * stb[d];
            }
            const T g = n.grad.v[lin];
            if (ga) ap->grad.v[ia] += g * bp->value.v[ib];
            if (gb) bp->grad.v[ib] += g * ap->value.v[ia];
        }
    });
}

// Fully connected layer over the last dimension: y = x W + b.
template <typename T>
Var<T> affine(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    const auto& sx = x.value().shape;
    if (sx.empty()) throw ConfigError("affine input must have rank >= 1");
    const size_t in = sx.back();
    if (w.value().rank() != 2 || w.value().dim(0) != in)
        throw ConfigError("affine weight shape " + w.value().shape_str() +
                          " does not match input " + x.value().shape_str());
    const size_t out_dim = w.value().dim(1);
    if (b.value().size() != out_dim) throw ConfigError("affine bias width mismatch");
    const size_t rows = x.value().size() / in;
    auto out_shape = sx;
    out_shape.back() = out_dim;
    Array<T> out(out_shape);
    const T* xv = x.value().v.data();
    const T* wv = w.value().v.data();
    const T* bv = b.value().v.data();
    for (size_t r = 0; r < rows; ++r) {
        T* orow = out.v.data() + r * out_dim;
        for (size_t j = 0; j < out_dim; ++j) orow[j] = bv[j];
        const T* xrow = xv + r * in;
        for (size_t i = 0; i < in; ++i) {
            const T xi = xrow[i];
            if (xi == T(0)) continue;
            const T* wrow = wv + i * out_dim;
            for (size_t j = 0; j < out_dim; ++j) orow[j] += xi * wrow[j];
        }
    }
    auto xp = x.node();
    auto wp = w.node();
    auto bp = b.node();
    return detail::make_op<T>(std::move(out), {x, w, b}, [xp, wp, bp, rows, in, out_dim](Node<T>& n) {
        const T* gv = n.grad.v.data();
        if (xp->requires_grad) {
            detail::ensure_grad(*xp);
            T* xg = xp->grad.v.data();
            const T* wv = wp->value.v.data();
            for (size_t r = 0; r < rows; ++r) {
                const T* grow = gv + r * out_dim;
                T* xgrow = xg + r * in;
                for (size_t i = 0; i < in; ++i) {
                    const T* wrow = wv + i * out_dim;
                    T acc = 0;
                    for (size_t j = 0; j < out_dim; ++j) acc += grow[j] * wrow[j];
                    xgrow[i] += acc;
                }
            }
        }
        if (wp->requires_grad) {
            detail::ensure_grad(*wp);
            T* wg = wp->grad.v.data();
            const T* xv = xp->value.v.data();
            for (size_t r = 0; r < rows; ++r) {
                const T* grow = gv + r * out_dim;
                const T* xrow = xv + r * in;
                for (size_t i = 0; i < in; ++i) {
                    const T xi = xrow[i];
                    if (xi == T(0)) continue;
                    T* wgrow = wg + i * out_dim;
                    for (size_t j = 0; j < out_dim; ++j) wgrow[j] += xi * grow[j];
                }
            }
        }
        if (bp->requires_grad) {
            detail::ensure_grad(*bp);
            T* bg = bp->grad.v.data();
            for (size_t r = 0; r < rows; ++r) {
                const T* grow = gv + r * out_dim;
                for (size_t j = 0; j < out_dim; ++j) bg[j] += grow[j];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Normalisation and activations

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5)) {
    const auto& sx = x.value().shape;
    const size_t d = sx.back();
    if (d == 0) throw ConfigError("layer_norm over empty dimension");
    if (gamma.value().size() != d || beta.value().size() != d)
        throw ConfigError("layer_norm scale/shift width mismatch");
    const size_t rows = x.value().size() / d;
    Array<T> out(sx);
    std::vector<T> inv_sd(rows), mean(rows);
    for (size_t r = 0; r < rows; ++r) {
        const T* xrow = x.value().v.data() + r * d;
        T mu = 0;
        for (size_t i = 0; i < d; ++i) mu += xrow[i];
        mu /= static_cast<T>(d);
        T var = 0;
        for (size_t i = 0; i < d; ++i) {
            const T c = xrow[i] - mu;
            var += c * c;
        }
        var /= static_cast<T>(d);
        const T inv = T(1) / std::sqrt(var + eps);
        mean[r] = mu;
        inv_sd[r] = inv;
        T* orow = out.v.data() + r * d;
        for (size_t i = 0; i < d; ++i)
            orow[i] = gamma.value().v[i] * (xrow[i] - mu) * inv + beta.value().v[i];
    }
    auto xp = x.node();
    auto gp = gamma.node();
    auto bp = beta.node();
    return detail::make_op<T>(
        std::move(out), {x, gamma, beta},
        [xp, gp, bp, rows, d, mean, inv_sd](Node<T>& n) {
            const bool gx = xp->requires_grad, gg = gp->requires_grad, gb = bp->requires_grad;
            if (gx) detail::ensure_grad(*xp);
            if (gg) detail::ensure_grad(*gp);
            if (gb) detail::ensure_grad(*bp);
            for (size_t r = 0; r < rows; ++r) {
                const T* xrow = xp->value.v.data() + r * d;
                const T* grow = n.grad.v.data() + r * d;
                const T inv = inv_sd[r];
                const T mu = mean[r];
                T sum_gy = 0, sum_gyx = 0;
                for (size_t i = 0; i < d; ++i) {
                    const T xhat = (xrow[i] - mu) * inv;
                    const T gy = grow[i] * gp->value.v[i];
                    sum_gy += gy;
                    sum_gyx += gy * xhat;
                    if (gg) gp->grad.v[i] += grow[i] * xhat;
                    if (gb) bp->grad.v[i] += grow[i];
                }
                if (gx) {
                    T* xg = xp->grad.v.data() + r * d;
                    const T invd = T(1) / static_cast<T>(d);
                    for (size_t i = 0; i < d; ++i) {
                        const T xhat = (xrow[i] - mu) * inv;
                        const T gy = grow[i] * gp->value.v[i];
                        xg[i] += inv * (gy - invd * sum_gy - xhat * invd * sum_gyx);
                    }
                }
            }
        });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
    Array<T> out(x.value().shape);
    for (size_t i = 0; i < out.size(); ++i) {
        const T v = x.value().v[i];
        out.v[i] = v > T(0) ? v : slope * v;
    }
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {x}, [xp, slope](Node<T>& n) {
        detail::ensure_grad(*xp);
        for (size_t i = 0; i < n.grad.v.size(); ++i)
            xp->grad.v[i] += n.grad.v[i] * (xp->value.v[i] > T(0) ? T(1) : slope);
    });
}

template <typename T>
Var<T> tanh_op(const Var<T>& x) {
    Array<T> out(x.value().shape);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = std::tanh(x.value().v[i]);
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {x}, [xp](Node<T>& n) {
        detail::ensure_grad(*xp);
        for (size_t i = 0; i < n.grad.v.size(); ++i) {
            const T t = n.value.v[i];
            xp->grad.v[i] += n.grad.v[i] * (T(1) - t * t);
        }
    });
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
    Array<T> out(x.value().shape);
    for (size_t i = 0; i < out.size(); ++i) out.v[i] = T(1) / (T(1) + std::exp(-x.value().v[i]));
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {x}, [xp](Node<T>& n) {
        detail::ensure_grad(*xp);
        for (size_t i = 0; i < n.grad.v.size(); ++i) {
            const T s = n.value.v[i];
            xp->grad.v[i] += n.grad.v[i] * s * (T(1) - s);
        }
    });
}

template <typename T>
Var<T> softmax(const Var<T>& x) {
    const size_t d = x.value().shape.back();
    if (d == 0) throw ConfigError("softmax over empty dimension");
    const size_t rows = x.value().size() / d;
    Array<T> out(x.value().shape);
    for (size_t r = 0; r < rows; ++r) {
        const T* xrow = x.value().v.data() + r * d;
        T* orow = out.v.data() + r * d;
        T m = xrow[0];
        for (size_t i = 1; i < d; ++i) m = std::max(m, xrow[i]);
        T s = 0;
        for (size_t i = 0; i < d; ++i) {
            orow[i] = std::exp(xrow[i] - m);
            s += orow[i];
        }
        for (size_t i = 0; i < d; ++i) orow[i] /= s;
    }
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {x}, [xp, rows, d](Node<T>& n) {
        detail::ensure_grad(*xp);
        for (size_t r = 0; r < rows; ++r) {
            const T* p = n.value.v.data() + r * d;
            const T* g = n.grad.v.data() + r * d;
            T dot = 0;
            for (size_t i = 0; i < d; ++i) dot += g[i] * p[i];
            T* xg = xp->grad.v.data() + r * d;
            for (size_t i = 0; i < d; ++i) xg[i] += p[i] * (g[i] - dot);
        }
    });
}

// Inverted dropout: surviving activations are scaled by 1/(1-rate) during
// training; evaluation mode is the identity and never touches the generator.
template <typename T>
Var<T> dropout(const Var<T>& x, double rate, std::mt19937_64& rng, bool training) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0,1)");
    if (!training || rate == 0.0) return x;
    std::bernoulli_distribution keep(1.0 - rate);
    const T inv_keep = static_cast<T>(1.0 / (1.0 - rate));
    auto mask = std::make_shared<std::vector<T>>(x.value().size());
    Array<T> out(x.value().shape);
    for (size_t i = 0; i < out.size(); ++i) {
        const T m = keep(rng) ? inv_keep : T(0);
        (*mask)[i] = m;
        out.v[i] = x.value().v[i] * m;
    }
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {x}, [xp, mask](Node<T>& n) {
        detail::ensure_grad(*xp);
        for (size_t i = 0; i < n.grad.v.size(); ++i)
            xp->grad.v[i] += n.grad.v[i] * (*mask)[i];
    });
}

// ---------------------------------------------------------------------------
// Reductions

template <typename T>
Var<T> reduce_sum(const Var<T>& x) {
    T s = 0;
    for (T v : x.value().v) s += v;
    auto xp = x.node();
    return detail::make_op<T>(Array<T>::scalar(s), {x}, [xp](Node<T>& n) {
        detail::ensure_grad(*xp);
        const T g = n.grad.v[0];
        for (auto& gv : xp->grad.v) gv += g;
    });
}

template <typename T>
Var<T> reduce_mean(const Var<T>& x) {
    T s = 0;
    for (T v : x.value().v) s += v;
    const T invn = T(1) / static_cast<T>(x.value().size());
    auto xp = x.node();
    return detail::make_op<T>(Array<T>::scalar(s * invn), {x}, [xp, invn](Node<T>& n) {
        detail::ensure_grad(*xp);
        const T g = n.grad.v[0] * invn;
        for (auto& gv : xp->grad.v) gv += g;
    });
}

// ---------------------------------------------------------------------------
// Domain operators

// Per-sample Euclidean norm across the channel axis: [B, 3, T] -> [B, 1, T].
template <typename T>
Var<T> l2_norm(const Var<T>& x) {
    const auto& sh = x.value().shape;
    if (sh.size() != 3 || sh[1] != 3)
        throw ConfigError("l2_norm expects [batch, 3, time], got " + x.value().shape_str());
    const size_t batch = sh[0], time = sh[2];
    Array<T> out({batch, 1, time});
    for (size_t b = 0; b < batch; ++b) {
        const T* px = x.value().v.data() + b * 3 * time;
        T* po = out.v.data() + b * time;
        for (size_t t = 0; t < time; ++t) {
            const T vx = px[t], vy = px[time + t], vz = px[2 * time + t];
            po[t] = std::sqrt(vx * vx + vy * vy + vz * vz);
        }
    }
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {x}, [xp, batch, time](Node<T>& n) {
        detail::ensure_grad(*xp);
        for (size_t b = 0; b < batch; ++b) {
            const T* px = xp->value.v.data() + b * 3 * time;
            T* gx = xp->grad.v.data() + b * 3 * time;
            const T* po = n.value.v.data() + b * time;
            const T* go = n.grad.v.data() + b * time;
            for (size_t t = 0; t < time; ++t) {
                if (po[t] <= T(0)) continue;
                const T f = go[t] / po[t];
                gx[t] += f * px[t];
                gx[time + t] += f * px[time + t];
                gx[2 * time + t] += f * px[2 * time + t];
            }
        }
    });
}

// Rotates per-batch triads by the axis-angle parameters: params [B, 4]
// (axis x/y/z, raw angle), x [B, 3, T]. One rotation matrix per batch row.
template <typename T>
Var<T> rodrigues_rotate(const Var<T>& params, const Var<T>& x) {
    const auto& sp = params.value().shape;
    const auto& sx = x.value().shape;
    if (sp.size() != 2 || sp[1] != 4)
        throw ConfigError("rotation params must be [batch, 4], got " +
                          params.value().shape_str());
    if (sx.size() != 3 || sx[1] != 3)
        throw ConfigError("rotation input must be [batch, 3, time], got " +
                          x.value().shape_str());
    if (sp[0] != sx[0]) throw ConfigError("rotation batch sizes differ");
    const size_t batch = sx[0], time = sx[2];
    auto mats = std::make_shared<std::vector<rot::Mat3>>(batch);
    Array<T> out(sx);
    for (size_t b = 0; b < batch; ++b) {
        const T* pp = params.value().v.data() + b * 4;
        rot::RotationParams rp;
        rp.axis = {static_cast<double>(pp[0]), static_cast<double>(pp[1]),
                   static_cast<double>(pp[2])};
        rp.angle_raw = static_cast<double>(pp[3]);
        (*mats)[b] = rot::rodrigues_matrix(rp);
        const auto& r = (*mats)[b];
        const T* px = x.value().v.data() + b * 3 * time;
        T* po = out.v.data() + b * 3 * time;
        for (size_t t = 0; t < time; ++t) {
            const double vx = px[t], vy = px[time + t], vz = px[2 * time + t];
            po[t] = static_cast<T>(r[0][0] * vx + r[0][1] * vy + r[0][2] * vz);
            po[time + t] = static_cast<T>(r[1][0] * vx + r[1][1] * vy + r[1][2] * vz);
            po[2 * time + t] = static_cast<T>(r[2][0] * vx + r[2][1] * vy + r[2][2] * vz);
        }
    }
    auto pp = params.node();
    auto xp = x.node();
    return detail::make_op<T>(std::move(out), {params, x}, [pp, xp, mats, batch, time](Node<T>& n) {
        const bool gp = pp->requires_grad, gx = xp->requires_grad;
        if (gp) detail::ensure_grad(*pp);
        if (gx) detail::ensure_grad(*xp);
        for (size_t b = 0; b < batch; ++b) {
            const auto& r = (*mats)[b];
            const T* px = xp->value.v.data() + b * 3 * time;
            const T* go = n.grad.v.data() + b * 3 * time;
            if (gx) {
                T* gxv = xp->grad.v.data() + b * 3 * time;
                for (size_t t = 0; t < time; ++t) {
                    const double g0 = go[t], g1 = go[time + t], g2 = go[2 * time + t];
                    gxv[t] += static_cast<T>(r[0][0] * g0 + r[1][0] * g1 + r[2][0] * g2);
                    gxv[time + t] +=
                        static_cast<T>(r[0][1] * g0 + r[1][1] * g1 + r[2][1] * g2);
                    gxv[2 * time + t] +=
                        static_cast<T>(r[0][2] * g0 + r[1][2] * g1 + r[2][2] * g2);
                }
            }
            if (gp) {
                // M[c][d] = sum_t gout[c][t] * x[d][t]
                double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
                for (size_t t = 0; t < time; ++t) {
                    const double xv[3] = {static_cast<double>(px[t]),
                                          static_cast<double>(px[time + t]),
                                          static_cast<double>(px[2 * time + t])};
                    const double gv[3] = {static_cast<double>(go[t]),
                                          static_cast<double>(go[time + t]),
                                          static_cast<double>(go[2 * time + t])};
                    for (int c = 0; c < 3; ++c)
                        for (int d = 0; d < 3; ++d) m[c][d] += gv[c] * xv[d];
                }
                const T* pv = pp->value.v.data() + b * 4;
                rot::RotationParams rp;
                rp.axis = {static_cast<double>(pv[0]), static_cast<double>(pv[1]),
                           static_cast<double>(pv[2])};
                rp.angle_raw = static_cast<double>(pv[3]);
                const auto jac = rot::rodrigues_jacobian(rp);
                T* pg = pp->grad.v.data() + b * 4;
                for (int j = 0; j < 4; ++j) {
                    double acc = 0;
                    for (int c = 0; c < 3; ++c)
                        for (int d = 0; d < 3; ++d) acc += jac[j][c][d] * m[c][d];
                    pg[j] += static_cast<T>(acc);
                }
            }
        }
    });
}

// Feature extraction over one block of a channel stack: x [B, A, T] ->
// [B, A, width], where width covers the selected features plus the three
// axis-tag slots. Piecewise-constant features pass zero gradient.
template <typename T>
Var<T> block_features(const Var<T>& x, size_t offset, size_t block_len,
                      const std::vector<tsf::FeatureDef>& defs,
                      const std::vector<std::array<int, 3>>& tags) {
    const auto& sh = x.value().shape;
    if (sh.size() != 3)
        throw ConfigError("block_features expects [batch, axes, time], got " +
                          x.value().shape_str());
    const size_t batch = sh[0], axes = sh[1], time = sh[2];
    if (offset + block_len > time) throw ConfigError("feature block exceeds segment length");
    if (tags.size() != axes) throw ConfigError("axis tag count mismatch");
    for (const auto& def : defs) tsf::validate_feature_def(def, block_len);
    const size_t fwidth = tsf::selection_width(std::span<const tsf::FeatureDef>(defs), block_len);
    const size_t width = fwidth + 3;
    Array<T> out({batch, axes, width});
    for (size_t b = 0; b < batch; ++b) {
        for (size_t a = 0; a < axes; ++a) {
            std::span<const T> win(x.value().v.data() + (b * axes + a) * time + offset,
                                   block_len);
            tsf::WindowContext<T> ctx(win);
            T* row = out.v.data() + (b * axes + a) * width;
            size_t f = 0;
            for (const auto& def : defs) {
                tsf::eval_feature(ctx, def, row + f);
                f += tsf::feature_width(def, block_len);
            }
            row[f + 0] = static_cast<T>(tags[a][0]);
            row[f + 1] = static_cast<T>(tags[a][1]);
            row[f + 2] = static_cast<T>(tags[a][2]);
        }
    }
    auto xp = x.node();
    auto defs_copy = std::make_shared<std::vector<tsf::FeatureDef>>(defs);
    return detail::make_op<T>(
        std::move(out), {x},
        [xp, defs_copy, offset, block_len, batch, axes, time, width](Node<T>& n) {
            detail::ensure_grad(*xp);
            for (size_t b = 0; b < batch; ++b) {
                for (size_t a = 0; a < axes; ++a) {
                    std::span<const T> win(
                        xp->value.v.data() + (b * axes + a) * time + offset, block_len);
                    std::span<T> winbar(xp->grad.v.data() + (b * axes + a) * time + offset,
                                        block_len);
                    tsf::WindowContext<T> ctx(win);
                    const T* grow = n.grad.v.data() + (b * axes + a) * width;
                    size_t f = 0;
                    for (const auto& def : *defs_copy) {
                        const size_t w = tsf::feature_width(def, block_len);
                        tsf::grad_feature(ctx, def, std::span<const T>(grow + f, w), winbar);
                        f += w;
                    }
                }
            }
        });
}

// Mean categorical cross-entropy over softmax of the logits. Fused for
// numerical stability; labels are class indices.
template <typename T>
Var<T> softmax_cross_entropy(const Var<T>& logits, const std::vector<int>& labels) {
    const auto& sh = logits.value().shape;
    if (sh.size() != 2) throw ConfigError("cross-entropy expects [batch, classes]");
    const size_t batch = sh[0], classes = sh[1];
    if (labels.size() != batch) throw ConfigError("label count does not match batch");
    auto probs = std::make_shared<Array<T>>(Array<T>({batch, classes}));
    T loss = 0;
    for (size_t b = 0; b < batch; ++b) {
        const int y = labels[b];
        if (y < 0 || static_cast<size_t>(y) >= classes)
            throw ConfigError("label out of range");
        const T* row = logits.value().v.data() + b * classes;
        T m = row[0];
        for (size_t i = 1; i < classes; ++i) m = std::max(m, row[i]);
        T s = 0;
        for (size_t i = 0; i < classes; ++i) s += std::exp(row[i] - m);
        const T lse = m + std::log(s);
        for (size_t i = 0; i < classes; ++i)
            probs->v[b * classes + i] = std::exp(row[i] - lse);
        loss -= row[y] - lse;
    }
    loss /= static_cast<T>(batch);
    auto lp = logits.node();
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    return detail::make_op<T>(Array<T>::scalar(loss), {logits},
                              [lp, probs, labels_copy, batch, classes](Node<T>& n) {
                                  detail::ensure_grad(*lp);
                                  const T g = n.grad.v[0] / static_cast<T>(batch);
                                  for (size_t b = 0; b < batch; ++b) {
                                      T* lg = lp->grad.v.data() + b * classes;
                                      const T* p = probs->v.data() + b * classes;
                                      const int y = (*labels_copy)[b];
                                      for (size_t i = 0; i < classes; ++i) {
                                          T d = p[i];
                                          if (static_cast<int>(i) == y) d -= T(1);
                                          lg[i] += g * d;
                                      }
                                  }
                              });
}

}  // namespace rtsf::nn

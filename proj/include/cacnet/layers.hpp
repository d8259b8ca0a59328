#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "cacnet/errors.hpp"
#include "cacnet/kernels.hpp"
#include "cacnet/rng.hpp"
#include "cacnet/tensor.hpp"

// Layer building blocks. Each layer owns its parameters, its gradient
// buffers, and the forward cache its backward pass needs. backward()
// accumulates into the gradient buffers; the optimizer zeroes them at the
// start of every batch. All forward/backward passes are single-sample;
// batching is a loop in the trainer.

namespace cacnet {

enum class Mode { Train, Eval };

template <typename T>
void check_finite(const Tensor<T>& t, const std::string& context) {
    const T* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!std::isfinite(static_cast<double>(p[i]))) {
            throw NumericError(context + ": non-finite value at flat index " + std::to_string(i));
        }
    }
}

// 3x3-capable convolution over [C,H,W] via im2col + GEMM.
// weights: [filters, C*kh*kw], bias: [filters].
template <typename T>
struct Conv2D {
    ConvGeometry geom;
    std::size_t filters = 0;
    Tensor<T> w{{1}};
    Tensor<T> b{{1}};
    Tensor<T> dw{{1}};
    Tensor<T> db{{1}};
    Tensor<T> cols{{1}};

    Conv2D(ConvGeometry g, std::size_t f)
        : geom(g),
          filters(f),
          w({f, g.col_rows()}),
          b({f}),
          dw({f, g.col_rows()}),
          db({f}) {
        geom.validate();
    }

    Tensor<T> forward(const Tensor<T>& x) {
        cols = im2col(x, geom);
        Tensor<T> out = matmul(w, cols);
        const std::size_t t = cols.extent(1);
        for (std::size_t f = 0; f < filters; ++f) {
            T* row = out.data() + f * t;
            const T bf = b[f];
            for (std::size_t i = 0; i < t; ++i) row[i] += bf;
        }
        return out.reshaped({filters, geom.out_h(), geom.out_w()});
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t t = geom.out_h() * geom.out_w();
        Tensor<T> dy2d = dy.reshaped({filters, t});
        Tensor<T> dw_local = matmul_tb(dy2d, cols);
        for (std::size_t i = 0; i < dw.size(); ++i) dw[i] += dw_local[i];
        for (std::size_t f = 0; f < filters; ++f) {
            T s{};
            const T* row = dy2d.data() + f * t;
            for (std::size_t i = 0; i < t; ++i) s += row[i];
            db[f] += s;
        }
        return col2im(matmul_ta(w, dy2d), geom);
    }
};

// y = max(0, x); derivative at 0 is taken as 0.
template <typename T>
struct ReLU {
    Tensor<T> input{{1}};

    Tensor<T> forward(const Tensor<T>& x) {
        input = x;
        Tensor<T> y(x.shape());
        const T* in = x.data();
        T* out = y.data();
        const std::size_t n = x.size();
#pragma omp parallel for schedule(static) if (n > (std::size_t{1} << 15))
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T{} ? in[i] : T{};
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(dy.shape());
        const T* g = dy.data();
        const T* in = input.data();
        T* out = dx.data();
        const std::size_t n = dy.size();
#pragma omp parallel for schedule(static) if (n > (std::size_t{1} << 15))
        for (std::size_t i = 0; i < n; ++i) out[i] = in[i] > T{} ? g[i] : T{};
        return dx;
    }
};

// 2x2 window, stride 2, trailing odd row/column dropped. Ties go to the
// first maximum in window scan order (top-left, top-right, bottom-left,
// bottom-right); backward routes the gradient to exactly that element.
template <typename T>
struct MaxPool2x2 {
    std::vector<std::size_t> argmax;
    std::vector<std::size_t> in_shape;

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.rank() != 3) throw DimensionError("maxpool expects [C,H,W], got " + x.shape_string());
        const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
        const std::size_t oh = h / 2, ow = w / 2;
        if (oh == 0 || ow == 0) throw DimensionError("maxpool input too small: " + x.shape_string());
        in_shape = {c, h, w};
        Tensor<T> y({c, oh, ow});
        argmax.assign(c * oh * ow, 0);
        const T* in = x.data();
        T* out = y.data();
#pragma omp parallel for schedule(static) if (c * oh * ow > (std::size_t{1} << 14))
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* plane = in + ch * h * w;
            for (std::size_t oy = 0; oy < oh; ++oy) {
                for (std::size_t ox = 0; ox < ow; ++ox) {
                    const std::size_t base = (2 * oy) * w + 2 * ox;
                    const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
                    std::size_t best = cand[0];
                    T val = plane[cand[0]];
                    for (int k = 1; k < 4; ++k) {
                        if (plane[cand[k]] > val) {
                            val = plane[cand[k]];
                            best = cand[k];
                        }
                    }
                    const std::size_t o = (ch * oh + oy) * ow + ox;
                    out[o] = val;
                    argmax[o] = ch * h * w + best;
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx{std::vector<std::size_t>(in_shape)};
        const T* g = dy.data();
        T* out = dx.data();
        for (std::size_t i = 0; i < dy.size(); ++i) out[argmax[i]] += g[i];
        return dx;
    }
};

// y = W.x + b on flat vectors. weights: [out, in].
template <typename T>
struct Dense {
    Tensor<T> w{{1}};
    Tensor<T> b{{1}};
    Tensor<T> dw{{1}};
    Tensor<T> db{{1}};
    Tensor<T> input{{1}};

    Dense(std::size_t out_dim, std::size_t in_dim)
        : w({out_dim, in_dim}), b({out_dim}), dw({out_dim, in_dim}), db({out_dim}) {}

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.size() != w.extent(1)) {
            throw DimensionError("dense input " + x.shape_string() + " does not match weights " + w.shape_string());
        }
        input = x;
        Tensor<T> y = matvec(w, x.reshaped({x.size()}));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += b[i];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const std::size_t m = w.extent(0), k = w.extent(1);
        const T* g = dy.data();
        const T* x = input.data();
#pragma omp parallel for schedule(static) if (m * k > (std::size_t{1} << 15))
        for (std::size_t i = 0; i < m; ++i) {
            T* row = dw.data() + i * k;
            const T gi = g[i];
            for (std::size_t j = 0; j < k; ++j) row[j] += gi * x[j];
        }
        for (std::size_t i = 0; i < m; ++i) db[i] += g[i];
        return matvec_t(w, dy.reshaped({m}));
    }
};

// Inverted dropout: surviving activations are scaled by 1/(1-rate) during
// training so evaluation is the exact identity (no rescale, no copy math).
template <typename T>
struct Dropout {
    double rate = 0.0;
    Tensor<T> scaled_mask{{1}};

    explicit Dropout(double r) : rate(r) {
        if (r < 0.0 || r >= 1.0) throw ConfigError("dropout rate must be in [0,1), got " + std::to_string(r));
    }

    Tensor<T> forward(const Tensor<T>& x, Mode mode, Rng& rng) {
        if (mode == Mode::Eval || rate == 0.0) return x;
        const T scale = static_cast<T>(1.0 / (1.0 - rate));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        scaled_mask = Tensor<T>(x.shape());
        Tensor<T> y(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const T m = u(rng) >= rate ? scale : T{};
            scaled_mask[i] = m;
            y[i] = x[i] * m;
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, Mode mode) {
        if (mode == Mode::Eval || rate == 0.0) return dy;
        Tensor<T> dx(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i) dx[i] = dy[i] * scaled_mask[i];
        return dx;
    }
};

// Max-shifted softmax over a flat vector.
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
    const std::size_t n = logits.size();
    if (n == 0) throw DimensionError("softmax on empty vector");
    Tensor<T> p(logits.shape());
    T mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    T sum{};
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (std::size_t i = 0; i < n; ++i) p[i] /= sum;
    return p;
}

// dL/dlogits given dL/dp: dx_i = p_i (dy_i - sum_j dy_j p_j).
template <typename T>
Tensor<T> softmax_backward(const Tensor<T>& p, const Tensor<T>& dy) {
    if (!p.same_shape(dy)) throw DimensionError("softmax_backward shape mismatch");
    T dot{};
    for (std::size_t i = 0; i < p.size(); ++i) dot += dy[i] * p[i];
    Tensor<T> dx(p.shape());
    for (std::size_t i = 0; i < p.size(); ++i) dx[i] = p[i] * (dy[i] - dot);
    return dx;
}

}  // namespace cacnet

#include "sinpaint/nn/functional.hpp"

#include <cmath>
#include <limits>

#include "sinpaint/errors.hpp"
#include "sinpaint/nn/gemm.hpp"

namespace sinpaint::nn {

namespace {

// Unfolds one [C, H, W] image into columns of a [C*k*k, ld] matrix, writing
// OH*OW consecutive entries per row starting at `cols`.
template <typename T>
void im2col(const T* img, std::size_t channels, std::size_t height, std::size_t width,
            const ConvGeometry& g, std::size_t out_h, std::size_t out_w, T* cols, std::size_t ld) {
    const auto k = g.kernel;
    for (std::size_t c = 0; c < channels; ++c) {
        const T* plane = img + c * height * width;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                T* dst = cols + ((c * k + ky) * k + kx) * ld;
                for (std::size_t oy = 0; oy < out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
                    T* row = dst + oy * out_w;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) {
                        for (std::size_t ox = 0; ox < out_w; ++ox) row[ox] = T(0);
                        continue;
                    }
                    const T* src = plane + static_cast<std::size_t>(iy) * width;
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
                        row[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width))
                                      ? T(0)
                                      : src[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates columns back into the image.
template <typename T>
void col2im(const T* cols, std::size_t ld, std::size_t channels, std::size_t height,
            std::size_t width, const ConvGeometry& g, std::size_t out_h, std::size_t out_w, T* img) {
    const auto k = g.kernel;
    for (std::size_t c = 0; c < channels; ++c) {
        T* plane = img + c * height * width;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const T* src = cols + ((c * k + ky) * k + kx) * ld;
                for (std::size_t oy = 0; oy < out_h; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(height)) continue;
                    T* dst = plane + static_cast<std::size_t>(iy) * width;
                    const T* row = src + oy * out_w;
                    for (std::size_t ox = 0; ox < out_w; ++ox) {
                        const auto ix = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                                        static_cast<std::ptrdiff_t>(g.pad);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(width)) continue;
                        dst[static_cast<std::size_t>(ix)] += row[ox];
                    }
                }
            }
        }
    }
}

// [B, C, P] <-> [C, B*P] layout changes used to batch GEMMs across samples.
template <typename T>
void batch_to_channel_major(const T* src, std::size_t batch, std::size_t channels,
                            std::size_t plane, T* dst) {
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const T* s = src + (n * channels + c) * plane;
            T* d = dst + c * batch * plane + n * plane;
            for (std::size_t p = 0; p < plane; ++p) d[p] = s[p];
        }
    }
}

template <typename T>
void channel_major_to_batch(const T* src, std::size_t batch, std::size_t channels,
                            std::size_t plane, T* dst) {
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const T* s = src + c * batch * plane + n * plane;
            T* d = dst + (n * channels + c) * plane;
            for (std::size_t p = 0; p < plane; ++p) d[p] = s[p];
        }
    }
}

template <typename T>
void require_4d(const BasicTensor<T>& x, const char* op) {
    if (x.rank() != 4) {
        throw ShapeError(std::string(op) + ": expected [B,C,H,W] input, got " + shape_str(x.shape()));
    }
}

template <typename T>
void check_bias(const BasicTensor<T>& bias, std::size_t channels, const char* op) {
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != channels)) {
        throw ShapeError(std::string(op) + ": bias shape " + shape_str(bias.shape()) +
                         " does not match " + std::to_string(channels) + " output channels");
    }
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, ConvGeometry geom) {
    require_4d(x, "conv2d");
    const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t k = geom.kernel;
    if (weight.rank() != 4 || weight.dim(1) != cin || weight.dim(2) != k || weight.dim(3) != k) {
        throw ShapeError("conv2d: input " + shape_str(x.shape()) + " has " + std::to_string(cin) +
                         " channels but kernel is " + shape_str(weight.shape()));
    }
    if (h + 2 * geom.pad < k || w + 2 * geom.pad < k) {
        throw ShapeError("conv2d: input " + shape_str(x.shape()) + " smaller than kernel");
    }
    const std::size_t cout = weight.dim(0);
    check_bias(bias, cout, "conv2d");
    const std::size_t oh = (h + 2 * geom.pad - k) / geom.stride + 1;
    const std::size_t ow = (w + 2 * geom.pad - k) / geom.stride + 1;
    const std::size_t plane = oh * ow;
    const std::size_t cols_ld = batch * plane;
    const std::size_t ckk = cin * k * k;

    std::vector<T> cols(ckk * cols_ld);
    for (std::size_t n = 0; n < batch; ++n) {
        im2col(x.data().data() + n * cin * h * w, cin, h, w, geom, oh, ow, cols.data() + n * plane,
               cols_ld);
    }
    std::vector<T> tmp(cout * cols_ld);
    gemm<T>(false, false, cout, cols_ld, ckk, T(1), weight.data().data(), ckk, cols.data(), cols_ld,
            T(0), tmp.data(), cols_ld);
    std::vector<T> out(batch * cout * plane);
    channel_major_to_batch(tmp.data(), batch, cout, plane, out.data());
    if (bias.defined()) {
        auto b = bias.data();
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t c = 0; c < cout; ++c)
                for (std::size_t p = 0; p < plane; ++p) out[(n * cout + c) * plane + p] += b[c];
    }

    std::vector<BasicTensor<T>> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return detail::make_result<T>(
        Shape{batch, cout, oh, ow}, std::move(out), "conv2d", std::move(inputs),
        [=](detail::Node<T>& self) {
            auto& xn = *self.inputs[0];
            auto& wn = *self.inputs[1];
            std::vector<T> dout(cout * cols_ld);
            batch_to_channel_major(self.grad.data(), batch, cout, plane, dout.data());
            if (wn.requires_grad) {
                std::vector<T> cols2(ckk * cols_ld);
                for (std::size_t n = 0; n < batch; ++n) {
                    im2col(xn.data.data() + n * cin * h * w, cin, h, w, geom, oh, ow,
                           cols2.data() + n * plane, cols_ld);
                }
                gemm<T>(false, true, cout, ckk, cols_ld, T(1), dout.data(), cols_ld, cols2.data(),
                        cols_ld, T(1), wn.grad_buffer().data(), ckk);
            }
            if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                auto& g = self.inputs[2]->grad_buffer();
                for (std::size_t c = 0; c < cout; ++c) {
                    T s = T(0);
                    for (std::size_t i = 0; i < cols_ld; ++i) s += dout[c * cols_ld + i];
                    g[c] += s;
                }
            }
            if (xn.requires_grad) {
                std::vector<T> dcols(ckk * cols_ld);
                gemm<T>(true, false, ckk, cols_ld, cout, T(1), wn.data.data(), ckk, dout.data(),
                        cols_ld, T(0), dcols.data(), cols_ld);
                auto& g = xn.grad_buffer();
                for (std::size_t n = 0; n < batch; ++n) {
                    col2im(dcols.data() + n * plane, cols_ld, cin, h, w, geom, oh, ow,
                           g.data() + n * cin * h * w);
                }
            }
        });
}

template <typename T>
BasicTensor<T> conv_transpose2d(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                                const BasicTensor<T>& bias, ConvGeometry geom) {
    require_4d(x, "conv_transpose2d");
    const std::size_t batch = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t k = geom.kernel;
    if (weight.rank() != 4 || weight.dim(0) != cin || weight.dim(2) != k || weight.dim(3) != k) {
        throw ShapeError("conv_transpose2d: input " + shape_str(x.shape()) + " has " +
                         std::to_string(cin) + " channels but kernel is " +
                         shape_str(weight.shape()));
    }
    if ((h - 1) * geom.stride + k < 2 * geom.pad + 1) {
        throw ShapeError("conv_transpose2d: empty output for " + shape_str(x.shape()));
    }
    const std::size_t cout = weight.dim(1);
    check_bias(bias, cout, "conv_transpose2d");
    const std::size_t oh = (h - 1) * geom.stride + k - 2 * geom.pad;
    const std::size_t ow = (w - 1) * geom.stride + k - 2 * geom.pad;
    const std::size_t plane = h * w;
    const std::size_t cols_ld = batch * plane;
    const std::size_t ckk = cout * k * k;

    std::vector<T> xin(cin * cols_ld);
    batch_to_channel_major(x.data().data(), batch, cin, plane, xin.data());
    std::vector<T> cols(ckk * cols_ld);
    gemm<T>(true, false, ckk, cols_ld, cin, T(1), weight.data().data(), ckk, xin.data(), cols_ld,
            T(0), cols.data(), cols_ld);
    std::vector<T> out(batch * cout * oh * ow, T(0));
    for (std::size_t n = 0; n < batch; ++n) {
        col2im(cols.data() + n * plane, cols_ld, cout, oh, ow, geom, h, w,
               out.data() + n * cout * oh * ow);
    }
    if (bias.defined()) {
        auto b = bias.data();
        for (std::size_t n = 0; n < batch; ++n)
            for (std::size_t c = 0; c < cout; ++c)
                for (std::size_t p = 0; p < oh * ow; ++p) out[(n * cout + c) * oh * ow + p] += b[c];
    }

    std::vector<BasicTensor<T>> inputs{x, weight};
    if (bias.defined()) inputs.push_back(bias);
    return detail::make_result<T>(
        Shape{batch, cout, oh, ow}, std::move(out), "conv_transpose2d", std::move(inputs),
        [=](detail::Node<T>& self) {
            auto& xn = *self.inputs[0];
            auto& wn = *self.inputs[1];
            std::vector<T> dcols(ckk * cols_ld);
            for (std::size_t n = 0; n < batch; ++n) {
                im2col(self.grad.data() + n * cout * oh * ow, cout, oh, ow, geom, h, w,
                       dcols.data() + n * plane, cols_ld);
            }
            if (wn.requires_grad) {
                std::vector<T> xin2(cin * cols_ld);
                batch_to_channel_major(xn.data.data(), batch, cin, plane, xin2.data());
                gemm<T>(false, true, cin, ckk, cols_ld, T(1), xin2.data(), cols_ld, dcols.data(),
                        cols_ld, T(1), wn.grad_buffer().data(), ckk);
            }
            if (self.inputs.size() > 2 && self.inputs[2]->requires_grad) {
                auto& g = self.inputs[2]->grad_buffer();
                const std::size_t oplane = oh * ow;
                for (std::size_t n = 0; n < batch; ++n) {
                    for (std::size_t c = 0; c < cout; ++c) {
                        T s = T(0);
                        const T* src = self.grad.data() + (n * cout + c) * oplane;
                        for (std::size_t p = 0; p < oplane; ++p) s += src[p];
                        g[c] += s;
                    }
                }
            }
            if (xn.requires_grad) {
                std::vector<T> dx(cin * cols_ld);
                gemm<T>(false, false, cin, cols_ld, ckk, T(1), wn.data.data(), ckk, dcols.data(),
                        cols_ld, T(0), dx.data(), cols_ld);
                std::vector<T> dxb(batch * cin * plane);
                channel_major_to_batch(dx.data(), batch, cin, plane, dxb.data());
                auto& g = xn.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += dxb[i];
            }
        });
}

template <typename T>
BasicTensor<T> batch_norm(const BasicTensor<T>& x, const BasicTensor<T>& gamma,
                          const BasicTensor<T>& beta, BasicTensor<T>& running_mean,
                          BasicTensor<T>& running_var, const BatchNormOptions& opts) {
    require_4d(x, "batch_norm");
    const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
    for (const BasicTensor<T>* t : std::initializer_list<const BasicTensor<T>*>{&gamma, &beta, &running_mean, &running_var}) {
        if (t->rank() != 1 || t->dim(0) != channels) {
            throw ShapeError("batch_norm: parameter shape " + shape_str(t->shape()) +
                             " does not match " + std::to_string(channels) + " channels");
        }
    }
    const std::size_t count = batch * plane;
    if (opts.training && count < 2) {
        throw ConfigError("batch_norm: a single value per channel (input " + shape_str(x.shape()) +
                          ") gives a degenerate batch variance in training mode");
    }
    auto in = x.data();
    auto gm = gamma.data();
    auto bt = beta.data();
    std::vector<T> means(channels), inv_std(channels);
    if (opts.training) {
        auto rm = running_mean.mutable_data();
        auto rv = running_var.mutable_data();
        for (std::size_t c = 0; c < channels; ++c) {
            double s = 0.0;
            for (std::size_t n = 0; n < batch; ++n) {
                const T* p = in.data() + (n * channels + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) s += p[i];
            }
            const double mu = s / static_cast<double>(count);
            double ss = 0.0;
            for (std::size_t n = 0; n < batch; ++n) {
                const T* p = in.data() + (n * channels + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const double d = p[i] - mu;
                    ss += d * d;
                }
            }
            const double var = ss / static_cast<double>(count);
            means[c] = static_cast<T>(mu);
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + opts.eps));
            const double unbiased = ss / static_cast<double>(count - 1);
            if (opts.update_running) {
                rm[c] = static_cast<T>((1.0 - opts.momentum) * rm[c] + opts.momentum * mu);
                rv[c] = static_cast<T>((1.0 - opts.momentum) * rv[c] + opts.momentum * unbiased);
            }
        }
    } else {
        auto rm = running_mean.data();
        auto rv = running_var.data();
        for (std::size_t c = 0; c < channels; ++c) {
            means[c] = rm[c];
            inv_std[c] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(rv[c]) + opts.eps));
        }
    }

    std::vector<T> out(in.size());
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t off = (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                out[off + i] = gm[c] * (in[off + i] - means[c]) * inv_std[c] + bt[c];
            }
        }
    }

    const bool training = opts.training;
    return detail::make_result<T>(
        x.shape(), std::move(out), "batch_norm", {x, gamma, beta},
        [=](detail::Node<T>& self) {
            auto& xn = *self.inputs[0];
            auto& gn = *self.inputs[1];
            auto& bn = *self.inputs[2];
            const T inv_count = T(1) / static_cast<T>(count);
            for (std::size_t c = 0; c < channels; ++c) {
                T sum_dy = T(0), sum_dy_xhat = T(0);
                for (std::size_t n = 0; n < batch; ++n) {
                    const std::size_t off = (n * channels + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        const T xhat = (xn.data[off + i] - means[c]) * inv_std[c];
                        sum_dy += self.grad[off + i];
                        sum_dy_xhat += self.grad[off + i] * xhat;
                    }
                }
                if (gn.requires_grad) gn.grad_buffer()[c] += sum_dy_xhat;
                if (bn.requires_grad) bn.grad_buffer()[c] += sum_dy;
                if (!xn.requires_grad) continue;
                auto& g = xn.grad_buffer();
                const T gscale = gn.data[c] * inv_std[c];
                for (std::size_t n = 0; n < batch; ++n) {
                    const std::size_t off = (n * channels + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) {
                        if (training) {
                            const T xhat = (xn.data[off + i] - means[c]) * inv_std[c];
                            g[off + i] += gscale * (self.grad[off + i] - inv_count * sum_dy -
                                                    xhat * inv_count * sum_dy_xhat);
                        } else {
                            g[off + i] += gscale * self.grad[off + i];
                        }
                    }
                }
            }
        });
}

template <typename T>
BasicTensor<T> dropout(const BasicTensor<T>& x, double rate, bool training, Rng& rng) {
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
    if (!training || rate == 0.0) return x;
    const auto threshold = static_cast<std::uint64_t>(
        rate * static_cast<double>(std::numeric_limits<std::uint64_t>::max()));
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    auto in = x.data();
    std::vector<T> mask(in.size());
    std::vector<T> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        mask[i] = rng() >= threshold ? keep_scale : T(0);
        out[i] = in[i] * mask[i];
    }
    return detail::make_result<T>(x.shape(), std::move(out), "dropout", {x},
                                  [mask = std::move(mask)](detail::Node<T>& self) {
                                      auto& xn = *self.inputs[0];
                                      if (!xn.requires_grad) return;
                                      auto& g = xn.grad_buffer();
                                      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * mask[i];
                                  });
}

#define SINPAINT_INSTANTIATE(T)                                                                   \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                  \
                                   const BasicTensor<T>&, ConvGeometry);                          \
    template BasicTensor<T> conv_transpose2d(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                             const BasicTensor<T>&, ConvGeometry);                \
    template BasicTensor<T> batch_norm(const BasicTensor<T>&, const BasicTensor<T>&,              \
                                       const BasicTensor<T>&, BasicTensor<T>&, BasicTensor<T>&,   \
                                       const BatchNormOptions&);                                  \
    template BasicTensor<T> dropout(const BasicTensor<T>&, double, bool, Rng&);

SINPAINT_INSTANTIATE(float)
SINPAINT_INSTANTIATE(double)

#undef SINPAINT_INSTANTIATE

}  // namespace sinpaint::nn

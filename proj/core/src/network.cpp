// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#include "splatover/error.hpp"
#include "splatover/parallel.hpp"
#include "splatover/policy.hpp"
#include "splatover/random.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>

namespace splatover {

void
PolicyArchitecture::validate() const {
    auto odd = [](int k) { return k >= 1 && k % 2 == 1; };
    if (height < 8 || width < 8 || in_channels < 1 || (coord_channels != 0 && coord_channels != 2) || c1 < 1 ||
        c2 < 1 || c3 < 1 || hidden < 1 || !odd(k1) || !odd(k2) || !odd(k3) || !(t_max > 0.0) || !(r_max > 0.0)) {
        throw Error(ErrorCode::ArchitectureMismatch, "invalid policy architecture");
    }
}

void
LossWeights::validate() const {
    if (lambda_t < 0.0 || lambda_r < 0.0 || lambda_g < 0.0 || lambda_t + lambda_r + lambda_g == 0.0) {
        throw Error(ErrorCode::InvalidArgument, "loss weights must be non-negative and not all zero");
    }
}

namespace {

struct ConvShape {
    int in_c, out_c, k, pad, in_h, in_w, out_h, out_w;
    std::size_t w_off, b_off;
    static constexpr int kStride = 2;
    [[nodiscard]] int rows() const { return in_c * k * k; }
    [[nodiscard]] int pixels() const { return out_h * out_w; }
};

struct Layout {
    std::array<ConvShape, 3> conv{};
    int hidden = 0;
    std::size_t fc_w = 0, fc_b = 0, t_w = 0, t_b = 0, r_w = 0, r_b = 0, g_w = 0, g_b = 0, total = 0;
};

Layout
make_layout(const PolicyArchitecture &a) {
    a.validate();
    Layout l;
    std::size_t off = 0;
    int c = a.in_channels + a.coord_channels, h = a.height, w = a.width;
    const std::array<int, 3> outs{a.c1, a.c2, a.c3}, ks{a.k1, a.k2, a.k3};
    for (std::size_t i = 0; i < 3; ++i) {
        ConvShape &s = l.conv[i];
        s.in_c = c;
        s.out_c = outs[i];
        s.k = ks[i];
        s.pad = ks[i] / 2;
        s.in_h = h;
        s.in_w = w;
        s.out_h = (h + 2 * s.pad - s.k) / ConvShape::kStride + 1;
        s.out_w = (w + 2 * s.pad - s.k) / ConvShape::kStride + 1;
        s.w_off = off;
        off += static_cast<std::size_t>(s.out_c) * static_cast<std::size_t>(s.rows());
        s.b_off = off;
        off += static_cast<std::size_t>(s.out_c);
        c = s.out_c;
        h = s.out_h;
        w = s.out_w;
    }
    const auto hid = static_cast<std::size_t>(a.hidden), c3 = static_cast<std::size_t>(a.c3);
    l.hidden = a.hidden;
    l.fc_w = off;
    off += hid * c3;
    l.fc_b = off;
    off += hid;
    l.t_w = off;
    off += 3 * hid;
    l.t_b = off;
    off += 3;
    l.r_w = off;
    off += 3 * hid;
    l.r_b = off;
    off += 3;
    l.g_w = off;
    off += hid;
    l.g_b = off;
    off += 1;
    l.total = off;
    return l;
}

template <typename S> using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S> using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S> using ConstRowMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S> using RowMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename S> using ConstVecMap = Eigen::Map<const Vec<S>>;
template <typename S> using VecMap = Eigen::Map<Vec<S>>;

template <typename S>
S
sigmoid(S z) {
    return z >= S(0) ? S(1) / (S(1) + std::exp(-z)) : std::exp(z) / (S(1) + std::exp(z));
}

template <typename S>
S
silu(S z) {
    return z * sigmoid(z);
}

template <typename S>
S
silu_grad(S z) {
    const S s = sigmoid(z);
    return s * (S(1) + z * (S(1) - s));
}

// Activations are channels x pixels, column-major, so one column holds every channel of a pixel.
template <typename S>
void
im2col(const Mat<S> &in, const ConvShape &c, Mat<S> &col) {
    col.setZero(c.rows(), c.pixels());
    const int k = c.k;
    for (int oy = 0; oy < c.out_h; ++oy) {
        for (int ox = 0; ox < c.out_w; ++ox) {
            S *dst = col.col(oy * c.out_w + ox).data();
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * ConvShape::kStride - c.pad + ky;
                if (iy < 0 || iy >= c.in_h) {
                    continue;
                }
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * ConvShape::kStride - c.pad + kx;
                    if (ix < 0 || ix >= c.in_w) {
                        continue;
                    }
                    const S *src = in.col(iy * c.in_w + ix).data();
                    for (int ch = 0; ch < c.in_c; ++ch) {
                        dst[(ch * k + ky) * k + kx] = src[ch];
                    }
                }
            }
        }
    }
}

template <typename S>
void
col2im(const Mat<S> &col, const ConvShape &c, Mat<S> &out) {
    out.setZero(c.in_c, c.in_h * c.in_w);
    const int k = c.k;
    for (int oy = 0; oy < c.out_h; ++oy) {
        for (int ox = 0; ox < c.out_w; ++ox) {
            const S *src = col.col(oy * c.out_w + ox).data();
            for (int ky = 0; ky < k; ++ky) {
                const int iy = oy * ConvShape::kStride - c.pad + ky;
                if (iy < 0 || iy >= c.in_h) {
                    continue;
                }
                for (int kx = 0; kx < k; ++kx) {
                    const int ix = ox * ConvShape::kStride - c.pad + kx;
                    if (ix < 0 || ix >= c.in_w) {
                        continue;
                    }
                    S *dst = out.col(iy * c.in_w + ix).data();
                    for (int ch = 0; ch < c.in_c; ++ch) {
                        dst[ch] += src[(ch * k + ky) * k + kx];
                    }
                }
            }
        }
    }
}

template <typename S>
struct Cache {
    Mat<S> x0;
    std::array<Mat<S>, 3> col, z, a;
    Vec<S> pooled, h_pre, h, zt, zr;
    S logit{};
};

struct Head {
    Vec3 t, r, tanh_t, tanh_r;
    double logit;
};

template <typename S>
void
load_input(const PolicyArchitecture &arch, const PolicyInput &input, Mat<S> &x0) {
    const int hw = arch.height * arch.width;
    if (input.height != arch.height || input.width != arch.width ||
        input.data.size() != static_cast<std::size_t>(arch.in_channels) * static_cast<std::size_t>(hw)) {
        throw Error(ErrorCode::ShapeMismatch, "policy input does not match the architecture");
    }
    x0.resize(arch.in_channels + arch.coord_channels, hw);
    x0.topRows(arch.in_channels) =
        ConstRowMap<float>(input.data.data(), arch.in_channels, hw).template cast<S>();
    if (arch.coord_channels == 2) {
        for (int y = 0; y < arch.height; ++y) {
            for (int x = 0; x < arch.width; ++x) {
                x0(arch.in_channels, y * arch.width + x) = S(-1.0 + 2.0 * x / (arch.width - 1));
                x0(arch.in_channels + 1, y * arch.width + x) = S(-1.0 + 2.0 * y / (arch.height - 1));
            }
        }
    }
}

template <typename S>
Head
run_forward(const PolicyArchitecture &arch, const Layout &l, const S *p, const PolicyInput &input, Cache<S> &c) {
    load_input(arch, input, c.x0);
    const Mat<S> *prev = &c.x0;
    for (std::size_t i = 0; i < 3; ++i) {
        const ConvShape &s = l.conv[i];
        im2col(*prev, s, c.col[i]);
        const ConstRowMap<S> w(p + s.w_off, s.out_c, s.rows());
        const ConstVecMap<S> b(p + s.b_off, s.out_c);
        c.z[i].noalias() = w * c.col[i];
        c.z[i].colwise() += b;
        c.a[i] = c.z[i].unaryExpr([](S v) { return silu(v); });
        prev = &c.a[i];
    }
    c.pooled = c.a[2].rowwise().mean();
    const ConstRowMap<S> fc(p + l.fc_w, l.hidden, c.pooled.size());
    c.h_pre = fc * c.pooled + ConstVecMap<S>(p + l.fc_b, l.hidden);
    c.h = c.h_pre.unaryExpr([](S v) { return silu(v); });
    c.zt = ConstRowMap<S>(p + l.t_w, 3, l.hidden) * c.h + ConstVecMap<S>(p + l.t_b, 3);
    c.zr = ConstRowMap<S>(p + l.r_w, 3, l.hidden) * c.h + ConstVecMap<S>(p + l.r_b, 3);
    c.logit = ConstVecMap<S>(p + l.g_w, l.hidden).dot(c.h) + p[l.g_b];

    Head out;
    for (int k = 0; k < 3; ++k) {
        out.tanh_t[k] = std::tanh(static_cast<double>(c.zt[k]));
        out.tanh_r[k] = std::tanh(static_cast<double>(c.zr[k]));
    }
    out.t = arch.t_max * out.tanh_t;
    out.r = arch.r_max * out.tanh_r;
    out.logit = static_cast<double>(c.logit);
    return out;
}

struct OutputGrad {
    LossTerms terms;
    Vec3 dt, dr;
    double dlogit;
};

OutputGrad
loss_with_grad(const Vec3 &t, const Vec3 &r, double logit, const DeltaAction &label, int y, const LossWeights &w) {
    OutputGrad g;
    const Vec3 et = t - label.translation, er = r - label.rotation;
    const double yd = y ? 1.0 : 0.0;
    g.terms.translation = et.squaredNorm();
    g.terms.rotation = er.squaredNorm();
    g.terms.grasp = std::max(logit, 0.0) - logit * yd + std::log1p(std::exp(-std::abs(logit)));
    g.terms.total = w.lambda_t * g.terms.translation + w.lambda_r * g.terms.rotation + w.lambda_g * g.terms.grasp;
    if (!std::isfinite(g.terms.total)) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite policy loss");
    }
    g.dt = 2.0 * w.lambda_t * et;
    g.dr = 2.0 * w.lambda_r * er;
    g.dlogit = w.lambda_g * (sigmoid(logit) - yd);
    return g;
}

// Loss of one sample; when `grad` is non-null its parameter gradient is written there (overwritten).
template <typename S>
LossTerms
sample_loss(const PolicyArchitecture &arch, const Layout &l, const S *p, const TrainingSample &sample,
            const LossWeights &w, Cache<S> &c, S *grad) {
    const Head head = run_forward(arch, l, p, *sample.input, c);
    const OutputGrad og = loss_with_grad(head.t, head.r, head.logit, sample.action, sample.grasp_label, w);
    if (grad == nullptr) {
        return og.terms;
    }
    VecMap<S>(grad, static_cast<Eigen::Index>(l.total)).setZero();

    Vec<S> g_zt(3), g_zr(3);
    for (int k = 0; k < 3; ++k) {
        g_zt[k] = S(og.dt[k] * arch.t_max * (1.0 - head.tanh_t[k] * head.tanh_t[k]));
        g_zr[k] = S(og.dr[k] * arch.r_max * (1.0 - head.tanh_r[k] * head.tanh_r[k]));
    }
    const S g_logit = S(og.dlogit);
    RowMap<S>(grad + l.t_w, 3, l.hidden).noalias() = g_zt * c.h.transpose();
    VecMap<S>(grad + l.t_b, 3) = g_zt;
    RowMap<S>(grad + l.r_w, 3, l.hidden).noalias() = g_zr * c.h.transpose();
    VecMap<S>(grad + l.r_b, 3) = g_zr;
    VecMap<S>(grad + l.g_w, l.hidden) = g_logit * c.h;
    grad[l.g_b] = g_logit;

    Vec<S> g_h = ConstRowMap<S>(p + l.t_w, 3, l.hidden).transpose() * g_zt +
                 ConstRowMap<S>(p + l.r_w, 3, l.hidden).transpose() * g_zr +
                 g_logit * ConstVecMap<S>(p + l.g_w, l.hidden);
    const Vec<S> g_hpre = g_h.cwiseProduct(c.h_pre.unaryExpr([](S v) { return silu_grad(v); }));
    const auto c3 = static_cast<Eigen::Index>(c.pooled.size());
    RowMap<S>(grad + l.fc_w, l.hidden, c3).noalias() = g_hpre * c.pooled.transpose();
    VecMap<S>(grad + l.fc_b, l.hidden) = g_hpre;
    const Vec<S> g_pooled = ConstRowMap<S>(p + l.fc_w, l.hidden, c3).transpose() * g_hpre;

    Mat<S> g_a = (g_pooled / S(l.conv[2].pixels())).replicate(1, l.conv[2].pixels());
    Mat<S> g_z, g_col;
    for (std::size_t ii = 3; ii-- > 0;) {
        const ConvShape &s = l.conv[ii];
        g_z = g_a.cwiseProduct(c.z[ii].unaryExpr([](S v) { return silu_grad(v); }));
        RowMap<S>(grad + s.w_off, s.out_c, s.rows()).noalias() = g_z * c.col[ii].transpose();
        VecMap<S>(grad + s.b_off, s.out_c) = g_z.rowwise().sum();
        if (ii > 0) {
            g_col.noalias() = ConstRowMap<S>(p + s.w_off, s.out_c, s.rows()).transpose() * g_z;
            col2im(g_col, s, g_a);
        }
    }
    return og.terms;
}

void
accumulate(LossTerms &acc, const LossTerms &t) {
    acc.total += t.total;
    acc.translation += t.translation;
    acc.rotation += t.rotation;
    acc.grasp += t.grasp;
}

LossTerms
scaled(LossTerms t, double s) {
    t.total *= s;
    t.translation *= s;
    t.rotation *= s;
    t.grasp *= s;
    return t;
}

void
check_batch(std::span<const TrainingSample> batch) {
    if (batch.empty()) {
        throw Error(ErrorCode::EmptyDataset, "empty batch");
    }
    for (const auto &s : batch) {
        if (s.input == nullptr) {
            throw Error(ErrorCode::ShapeMismatch, "training sample without input");
        }
    }
}

// Per-sample results land in fixed slots and are reduced in index order, so the result does
// not depend on the worker count.
template <typename S>
LossTerms
batch_eval(const PolicyArchitecture &arch, std::span<const S> params, std::span<const TrainingSample> batch,
           const LossWeights &w, std::vector<S> *grad_out) {
    w.validate();
    check_batch(batch);
    const Layout l = make_layout(arch);
    if (params.size() != l.total) {
        throw Error(ErrorCode::ShapeMismatch, "parameter vector does not match the architecture");
    }
    const std::size_t n = batch.size();
    std::vector<LossTerms> terms(n);
    std::vector<S> slots(grad_out ? n * l.total : 0);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        Cache<S> cache;
        for (std::size_t i = begin; i < end; ++i) {
            terms[i] = sample_loss(arch, l, params.data(), batch[i], w, cache,
                                   grad_out ? slots.data() + i * l.total : nullptr);
        }
    });
    LossTerms sum;
    for (const auto &t : terms) {
        accumulate(sum, t);
    }
    if (grad_out) {
        grad_out->assign(l.total, S(0));
        VecMap<S> g(grad_out->data(), static_cast<Eigen::Index>(l.total));
        for (std::size_t i = 0; i < n; ++i) {
            g += ConstVecMap<S>(slots.data() + i * l.total, static_cast<Eigen::Index>(l.total));
        }
        g *= S(1) / S(static_cast<double>(n));
    }
    return scaled(sum, 1.0 / static_cast<double>(n));
}

} // namespace

std::size_t
PolicyArchitecture::param_count() const {
    return make_layout(*this).total;
}

PolicyOutput
forward(const PolicyParams &params, const PolicyInput &input) {
    const Layout l = make_layout(params.arch);
    if (params.values.size() != l.total) {
        throw Error(ErrorCode::ShapeMismatch, "parameter vector does not match the architecture");
    }
    Cache<float> cache;
    const Head head = run_forward(params.arch, l, params.values.data(), input, cache);
    PolicyOutput out;
    out.delta_t = head.t;
    out.delta_r = head.r;
    out.grasp_logit = head.logit;
    out.grasp_prob = sigmoid(head.logit);
    return out;
}

LossTerms
loss(const PolicyOutput &pred, const DeltaAction &label, int grasp_label, const LossWeights &w) {
    w.validate();
    return loss_with_grad(pred.delta_t, pred.delta_r, pred.grasp_logit, label, grasp_label, w).terms;
}

LossTerms
batch_loss(const PolicyParams &params, std::span<const TrainingSample> batch, const LossWeights &w) {
    return batch_eval<float>(params.arch, params.values, batch, w, nullptr);
}

std::vector<float>
batch_gradient(const PolicyParams &params, std::span<const TrainingSample> batch, const LossWeights &w,
               LossTerms *terms) {
    std::vector<float> grad;
    const LossTerms t = batch_eval<float>(params.arch, params.values, batch, w, &grad);
    if (terms) {
        *terms = t;
    }
    return grad;
}

LossTerms
batch_loss(const PolicyArchitecture &arch, std::span<const double> params, std::span<const TrainingSample> batch,
           const LossWeights &w) {
    return batch_eval<double>(arch, params, batch, w, nullptr);
}

std::vector<double>
batch_gradient(const PolicyArchitecture &arch, std::span<const double> params, std::span<const TrainingSample> batch,
               const LossWeights &w) {
    std::vector<double> grad;
    batch_eval<double>(arch, params, batch, w, &grad);
    return grad;
}

PolicyParams
init_params(const PolicyArchitecture &arch, std::uint64_t seed) {
    const Layout l = make_layout(arch);
    PolicyParams params{arch, std::vector<float>(l.total, 0.0f)};
    auto fill = [&](std::size_t off, std::size_t count, double bound, std::uint64_t stream) {
        Rng rng(seed, stream);
        for (std::size_t i = 0; i < count; ++i) {
            params.values[off + i] = static_cast<float>(rng.uniform(-bound, bound));
        }
    };
    for (std::size_t i = 0; i < 3; ++i) {
        const ConvShape &s = l.conv[i];
        fill(s.w_off, s.b_off - s.w_off, std::sqrt(6.0 / s.rows()), i);
    }
    const auto hid = static_cast<std::size_t>(l.hidden);
    fill(l.fc_w, l.fc_b - l.fc_w, std::sqrt(6.0 / arch.c3), 3);
    const double head = 0.1 * std::sqrt(6.0 / l.hidden);
    fill(l.t_w, 3 * hid, head, 4);
    fill(l.r_w, 3 * hid, head, 5);
    fill(l.g_w, hid, head, 6);
    return params;
}

} // namespace splatover

#include "crowding/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "crowding/error.hpp"

// Hot kernels get an AVX2 clone picked at load time. No FMA is enabled, and
// vectorization runs across independent outputs, so both clones produce
// bit-identical results.
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__)
#define CROWDING_VECTOR_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define CROWDING_VECTOR_CLONES
#endif

namespace crowding::nn {

namespace {

// Dot product with eight fixed partial sums; the summation order is part of
// the function, so results do not depend on compiler vectorization choices.
double dot(const float* a, const float* b, std::size_t n) {
    double s[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int k = 0; k < 8; ++k) s[k] += static_cast<double>(a[i + k]) * b[i + k];
    for (; i < n; ++i) s[0] += static_cast<double>(a[i]) * b[i];
    return ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
}

void axpy(double* y, double a, const float* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank)
        throw ShapeError(std::string(what) + " must have rank " + std::to_string(rank) + ", got " +
                         shape_string(t.shape()));
}

struct ConvGeometry {
    std::size_t n, c, h, w, oc, k, oh, ow;
    std::size_t rows() const { return c * k * k; }
    std::size_t cols() const { return oh * ow; }
};

ConvGeometry conv_geometry(const Tensor& x, const Tensor& w, Conv2dParams p) {
    require_rank(x, 4, "conv2d input");
    require_rank(w, 4, "conv2d weights");
    if (w.dim(1) != x.dim(1))
        throw ShapeError("conv2d channel mismatch: input " + shape_string(x.shape()) + ", weights " +
                         shape_string(w.shape()));
    if (w.dim(2) != w.dim(3)) throw ShapeError("conv2d kernels must be square");
    if (p.stride == 0) throw ShapeError("conv2d stride must be positive");
    ConvGeometry g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), 0, 0};
    if (g.h + 2 * p.padding < g.k || g.w + 2 * p.padding < g.k) throw ShapeError("conv2d kernel larger than input");
    g.oh = conv_output_dim(g.h, g.k, p.stride, p.padding);
    g.ow = conv_output_dim(g.w, g.k, p.stride, p.padding);
    return g;
}

void im2col(const float* image, const ConvGeometry& g, Conv2dParams p, float* cols) {
    const std::size_t P = g.cols();
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                float* row = cols + ((c * g.k + ky) * g.k + kx) * P;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long iy = static_cast<long>(oy * p.stride + ky) - static_cast<long>(p.padding);
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long ix = static_cast<long>(ox * p.stride + kx) - static_cast<long>(p.padding);
                        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.h) && ix < static_cast<long>(g.w);
                        row[oy * g.ow + ox] = inside ? image[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, const ConvGeometry& g, Conv2dParams p, double* image) {
    const std::size_t P = g.cols();
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const double* row = cols + ((c * g.k + ky) * g.k + kx) * P;
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const long iy = static_cast<long>(oy * p.stride + ky) - static_cast<long>(p.padding);
                    if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const long ix = static_cast<long>(ox * p.stride + kx) - static_cast<long>(p.padding);
                        if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
                        image[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] += row[oy * g.ow + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

std::size_t conv_output_dim(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding) {
    return (in + 2 * padding - kernel) / stride + 1;
}

// The conv kernels below are tiled over output columns so the working set
// stays in cache. Tiling never changes the order in which any single sum is
// accumulated, so results are identical to the untiled loops.
constexpr std::size_t kColTile = 128;
constexpr std::size_t kRowBlock = 8;

CROWDING_VECTOR_CLONES
Tensor conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, Conv2dParams p) {
    const ConvGeometry g = conv_geometry(x, w, p);
    if (b.size() != g.oc) throw ShapeError("conv2d bias length does not match output channels");
    const std::size_t R = g.rows();
    const std::size_t P = g.cols();

    // wt[r][oc], so one reduction step reads a contiguous run of weights.
    std::vector<double> wt(R * g.oc);
    for (std::size_t oc = 0; oc < g.oc; ++oc)
        for (std::size_t r = 0; r < R; ++r) wt[r * g.oc + oc] = w[oc * R + r];

    Tensor out({g.n, g.oc, g.oh, g.ow});
    std::vector<float> cols(R * P);
    double acc[kRowBlock][kColTile];
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(x.data() + n * g.c * g.h * g.w, g, p, cols.data());
        for (std::size_t q0 = 0; q0 < P; q0 += kColTile) {
            const std::size_t qn = std::min(kColTile, P - q0);
            for (std::size_t oc0 = 0; oc0 < g.oc; oc0 += kRowBlock) {
                const std::size_t block = std::min(kRowBlock, g.oc - oc0);
                for (std::size_t j = 0; j < block; ++j) std::fill(acc[j], acc[j] + qn, 0.0);
                for (std::size_t r = 0; r < R; ++r) {
                    const float* col = cols.data() + r * P + q0;
                    const double* wr = wt.data() + r * g.oc + oc0;
                    for (std::size_t j = 0; j < block; ++j) {
                        const double wv = wr[j];
                        double* a = acc[j];
                        for (std::size_t q = 0; q < qn; ++q) a[q] += wv * col[q];
                    }
                }
                for (std::size_t j = 0; j < block; ++j) {
                    float* dst = out.data() + (n * g.oc + oc0 + j) * P + q0;
                    const double bias = b[oc0 + j];
                    for (std::size_t q = 0; q < qn; ++q) dst[q] = static_cast<float>(acc[j][q] + bias);
                }
            }
        }
    }
    return out;
}

CROWDING_VECTOR_CLONES
Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, Conv2dParams p,
                            bool need_input_grad) {
    const ConvGeometry g = conv_geometry(x, w, p);
    if (grad_out.shape() != Shape{g.n, g.oc, g.oh, g.ow})
        throw ShapeError("conv2d upstream gradient has shape " + shape_string(grad_out.shape()));
    const std::size_t R = g.rows();
    const std::size_t P = g.cols();
    // Column tiles are multiples of 8 so each weight-gradient entry keeps the
    // same eight-lane partial sums as the reference dot product.
    static_assert(kColTile % 8 == 0);

    std::vector<double> dw(g.oc * R, 0.0);
    std::vector<double> db(g.oc, 0.0);
    Conv2dGrads grads;
    if (need_input_grad) grads.dx = Tensor(x.shape());

    std::vector<float> cols(R * P);
    std::vector<double> lanes(kRowBlock * R * 8);
    std::vector<double> dcols(need_input_grad ? R * P : 0);
    std::vector<double> dimage(need_input_grad ? g.c * g.h * g.w : 0);
    const std::size_t full = P - P % 8;
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(x.data() + n * g.c * g.h * g.w, g, p, cols.data());
        const float* gy = grad_out.data() + n * g.oc * P;
        for (std::size_t oc = 0; oc < g.oc; ++oc) {
            const float* grow = gy + oc * P;
            for (std::size_t q = 0; q < P; ++q) db[oc] += grow[q];
        }
        for (std::size_t oc0 = 0; oc0 < g.oc; oc0 += kRowBlock) {
            const std::size_t block = std::min(kRowBlock, g.oc - oc0);
            std::fill(lanes.begin(), lanes.end(), 0.0);
            for (std::size_t q0 = 0; q0 < full; q0 += kColTile) {
                const std::size_t qn = std::min(kColTile, full - q0);
                for (std::size_t r = 0; r < R; ++r) {
                    const float* col = cols.data() + r * P + q0;
                    for (std::size_t j = 0; j < block; ++j) {
                        const float* grow = gy + (oc0 + j) * P + q0;
                        double* s = lanes.data() + (j * R + r) * 8;
                        for (std::size_t q = 0; q < qn; q += 8)
                            for (int k = 0; k < 8; ++k) s[k] += static_cast<double>(grow[q + k]) * col[q + k];
                    }
                }
            }
            for (std::size_t j = 0; j < block; ++j) {
                const float* grow = gy + (oc0 + j) * P;
                for (std::size_t r = 0; r < R; ++r) {
                    double* s = lanes.data() + (j * R + r) * 8;
                    const float* col = cols.data() + r * P;
                    for (std::size_t q = full; q < P; ++q) s[0] += static_cast<double>(grow[q]) * col[q];
                    dw[(oc0 + j) * R + r] += ((s[0] + s[1]) + (s[2] + s[3])) + ((s[4] + s[5]) + (s[6] + s[7]));
                }
            }
        }
        if (!need_input_grad) continue;
        // dcols[r][q] = sum over oc, ascending, of w[oc][r] * gy[oc][q].
        double acc[kRowBlock][kColTile];
        for (std::size_t q0 = 0; q0 < P; q0 += kColTile) {
            const std::size_t qn = std::min(kColTile, P - q0);
            for (std::size_t r0 = 0; r0 < R; r0 += kRowBlock) {
                const std::size_t block = std::min(kRowBlock, R - r0);
                for (std::size_t j = 0; j < block; ++j) std::fill(acc[j], acc[j] + qn, 0.0);
                for (std::size_t oc = 0; oc < g.oc; ++oc) {
                    const float* grow = gy + oc * P + q0;
                    for (std::size_t j = 0; j < block; ++j) {
                        const double wv = w[oc * R + r0 + j];
                        double* a = acc[j];
                        for (std::size_t q = 0; q < qn; ++q) a[q] += wv * grow[q];
                    }
                }
                for (std::size_t j = 0; j < block; ++j)
                    std::copy(acc[j], acc[j] + qn, dcols.data() + (r0 + j) * P + q0);
            }
        }
        std::fill(dimage.begin(), dimage.end(), 0.0);
        col2im(dcols.data(), g, p, dimage.data());
        float* dst = grads.dx.data() + n * g.c * g.h * g.w;
        for (std::size_t i = 0; i < dimage.size(); ++i) dst[i] = static_cast<float>(dimage[i]);
    }

    grads.dw = Tensor(w.shape());
    for (std::size_t i = 0; i < dw.size(); ++i) grads.dw[i] = static_cast<float>(dw[i]);
    grads.db = Tensor({g.oc});
    for (std::size_t i = 0; i < db.size(); ++i) grads.db[i] = static_cast<float>(db[i]);
    return grads;
}

CROWDING_VECTOR_CLONES
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_rank(x, 2, "dense input");
    require_rank(w, 2, "dense weights");
    const std::size_t N = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
    if (w.dim(1) != in) throw ShapeError("dense weights " + shape_string(w.shape()) + " do not accept input " + shape_string(x.shape()));
    if (b.size() != out_dim) throw ShapeError("dense bias length does not match units");
    Tensor out({N, out_dim});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < out_dim; ++o)
            out[n * out_dim + o] = static_cast<float>(dot(w.data() + o * in, x.data() + n * in, in) + b[o]);
    return out;
}

CROWDING_VECTOR_CLONES
DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w, bool need_input_grad) {
    require_rank(x, 2, "dense input");
    const std::size_t N = x.dim(0), in = x.dim(1), out_dim = w.dim(0);
    if (grad_out.shape() != Shape{N, out_dim}) throw ShapeError("dense upstream gradient has shape " + shape_string(grad_out.shape()));

    std::vector<double> dw(out_dim * in, 0.0);
    std::vector<double> db(out_dim, 0.0);
    std::vector<double> dx(need_input_grad ? N * in : 0, 0.0);
    for (std::size_t n = 0; n < N; ++n) {
        const float* xn = x.data() + n * in;
        for (std::size_t o = 0; o < out_dim; ++o) {
            const double g = grad_out[n * out_dim + o];
            if (g == 0.0) continue;
            db[o] += g;
            axpy(dw.data() + o * in, g, xn, in);
            if (need_input_grad) axpy(dx.data() + n * in, g, w.data() + o * in, in);
        }
    }
    DenseGrads grads{Tensor(), Tensor(w.shape()), Tensor({out_dim})};
    for (std::size_t i = 0; i < dw.size(); ++i) grads.dw[i] = static_cast<float>(dw[i]);
    for (std::size_t i = 0; i < db.size(); ++i) grads.db[i] = static_cast<float>(db[i]);
    if (need_input_grad) {
        grads.dx = Tensor(x.shape());
        for (std::size_t i = 0; i < dx.size(); ++i) grads.dx[i] = static_cast<float>(dx[i]);
    }
    return grads;
}

MaxPoolResult maxpool2d_forward(const Tensor& x, std::size_t size, std::size_t stride) {
    require_rank(x, 4, "maxpool input");
    if (size == 0 || stride == 0) throw ShapeError("maxpool size and stride must be positive");
    const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (H < size || W < size) throw ShapeError("maxpool window larger than input " + shape_string(x.shape()));
    const std::size_t oh = (H - size) / stride + 1, ow = (W - size) / stride + 1;
    MaxPoolResult r{Tensor({N, C, oh, ow}), std::vector<std::size_t>(N * C * oh * ow)};
    std::size_t o = 0;
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const std::size_t base = nc * H * W;
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
                std::size_t best = base + oy * stride * W + ox * stride;
                for (std::size_t ky = 0; ky < size; ++ky)
                    for (std::size_t kx = 0; kx < size; ++kx) {
                        const std::size_t idx = base + (oy * stride + ky) * W + ox * stride + kx;
                        if (x[idx] > x[best]) best = idx;
                    }
                r.out[o] = x[best];
                r.argmax[o] = best;
            }
        }
    }
    return r;
}

Tensor maxpool2d_backward(const Tensor& grad_out, std::span<const std::size_t> argmax, const Shape& input_shape) {
    if (argmax.size() != grad_out.size()) throw ShapeError("maxpool cache does not match upstream gradient");
    Tensor dx(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += grad_out[i];
    return dx;
}

Tensor leaky_relu_forward(const Tensor& x, float negative_slope) {
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0f ? x[i] : negative_slope * x[i];
    return out;
}

Tensor leaky_relu_backward(const Tensor& grad_out, const Tensor& x, float negative_slope) {
    if (grad_out.shape() != x.shape()) throw ShapeError("leaky relu gradient shape mismatch");
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0f ? grad_out[i] : negative_slope * grad_out[i];
    return dx;
}

Tensor softmax(const Tensor& logits) {
    require_rank(logits, 2, "softmax input");
    const std::size_t N = logits.dim(0), K = logits.dim(1);
    Tensor out(logits.shape());
    for (std::size_t n = 0; n < N; ++n) {
        const float* row = logits.data() + n * K;
        const float m = *std::max_element(row, row + K);
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(static_cast<double>(row[k]) - m);
        for (std::size_t k = 0; k < K; ++k) out[n * K + k] = static_cast<float>(std::exp(static_cast<double>(row[k]) - m) / z);
    }
    return out;
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    require_rank(logits, 2, "logits");
    const std::size_t N = logits.dim(0), K = logits.dim(1);
    if (labels.size() != N) throw ShapeError("label count does not match batch size");
    logits.check_finite("logits");
    LossResult r{0.0, Tensor(logits.shape()), 0};
    for (std::size_t n = 0; n < N; ++n) {
        const int label = labels[n];
        if (label < 0 || static_cast<std::size_t>(label) >= K)
            throw ConfigError("label " + std::to_string(label) + " out of range for " + std::to_string(K) + " classes");
        const float* row = logits.data() + n * K;
        const std::size_t arg = static_cast<std::size_t>(std::max_element(row, row + K) - row);
        const double m = row[arg];
        double z = 0.0;
        for (std::size_t k = 0; k < K; ++k) z += std::exp(row[k] - m);
        const double log_z = std::log(z) + m;
        r.loss += log_z - row[label];
        if (arg == static_cast<std::size_t>(label)) ++r.correct;
        for (std::size_t k = 0; k < K; ++k) {
            const double pk = std::exp(row[k] - log_z);
            r.grad[n * K + k] = static_cast<float>((pk - (static_cast<std::size_t>(label) == k ? 1.0 : 0.0)) / N);
        }
    }
    r.loss /= static_cast<double>(N);
    return r;
}

}  // namespace crowding::nn

#include "canvasrnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace canvasrnn {

namespace {

Graph* graph_of(std::initializer_list<const Tensor*> ts) {
    Graph* g = nullptr;
    for (const Tensor* t : ts) {
        if (t->graph() != nullptr) {
            if (g != nullptr && g != t->graph()) {
                throw ConfigError("op: inputs belong to different graphs");
            }
            g = t->graph();
        }
    }
    return g;
}

// Node id of t on g, or -1 when t is a constant w.r.t. g.
int node_on(const Graph* g, const Tensor& t) {
    return (t.graph() == g) ? t.node() : -1;
}

struct ConvGeometry {
    int out_h = 0, out_w = 0;
    int pad_top = 0, pad_left = 0;
    int eff_k = 0;
};

ConvGeometry conv_geometry(const Shape& in, int k, int stride, int dilation, Padding padding) {
    ConvGeometry geo;
    geo.eff_k = (k - 1) * dilation + 1;
    if (padding == Padding::Same) {
        if (k % 2 == 0) {
            throw ConfigError("conv2d: same padding requires odd kernel size");
        }
        geo.out_h = (in.h + stride - 1) / stride;
        geo.out_w = (in.w + stride - 1) / stride;
        const int pad_h = std::max((geo.out_h - 1) * stride + geo.eff_k - in.h, 0);
        const int pad_w = std::max((geo.out_w - 1) * stride + geo.eff_k - in.w, 0);
        geo.pad_top = pad_h / 2;
        geo.pad_left = pad_w / 2;
    } else {
        if (in.h < geo.eff_k || in.w < geo.eff_k) {
            throw ConfigError("conv2d: input smaller than effective kernel for valid padding");
        }
        geo.out_h = (in.h - geo.eff_k) / stride + 1;
        geo.out_w = (in.w - geo.eff_k) / stride + 1;
    }
    return geo;
}

// Shared record helper for elementwise unary ops: dy/dx supplied as a vector.
Tensor record_unary(const Tensor& x, Tensor out, std::vector<double> local_grad, const char* name) {
    check_finite(out, name);
    Graph* g = graph_of({&x});
    if (g != nullptr) {
        const int x_node = node_on(g, x);
        const int id = g->record(
            out.shape(), [x_node, lg = std::move(local_grad)](Graph& gr, int out_node) {
                const std::vector<double>& go = gr.grad_buffer(out_node);
                if (x_node >= 0) {
                    std::vector<double>& gx = gr.grad_buffer(x_node);
                    for (std::size_t i = 0; i < gx.size(); ++i) {
                        gx[i] += go[i] * lg[i];
                    }
                }
            });
        out.attach(g, id);
    }
    return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int dilation, Padding padding) {
    const Shape in = input.shape();
    const Shape ks = kernel.shape();  // (c_out, c_in, k, k)
    if (ks.h != ks.w) {
        throw ConfigError("conv2d: kernel must be square, got " + ks.str());
    }
    if (ks.c != in.c) {
        throw ConfigError("conv2d: kernel expects " + std::to_string(ks.c) +
                          " input channels, got " + std::to_string(in.c));
    }
    if (!bias.empty() && !(bias.shape() == Shape{1, ks.n, 1, 1})) {
        throw ConfigError("conv2d: bias shape " + bias.shape().str() + " does not match c_out " +
                          std::to_string(ks.n));
    }
    if (stride < 1 || dilation < 1) {
        throw ConfigError("conv2d: stride and dilation must be positive");
    }
    const int k = ks.h;
    const int c_out = ks.n;
    const int c_in = ks.c;
    const ConvGeometry geo = conv_geometry(in, k, stride, dilation, padding);
    Tensor out(Shape{in.n, c_out, geo.out_h, geo.out_w});

    const double* x = input.data();
    const double* ker = kernel.data();
    const std::size_t in_chw = static_cast<std::size_t>(in.c) * in.h * in.w;
    const std::size_t in_hw = static_cast<std::size_t>(in.h) * in.w;
    const std::size_t kk = static_cast<std::size_t>(k) * k;
    for (int b = 0; b < in.n; ++b) {
        for (int co = 0; co < c_out; ++co) {
            const double b0 = bias.empty() ? 0.0 : bias.data()[co];
            const double* kbase = ker + static_cast<std::size_t>(co) * c_in * kk;
            for (int oy = 0; oy < geo.out_h; ++oy) {
                for (int ox = 0; ox < geo.out_w; ++ox) {
                    double acc = b0;
                    for (int ky = 0; ky < k; ++ky) {
                        const int iy = oy * stride - geo.pad_top + ky * dilation;
                        if (iy < 0 || iy >= in.h) continue;
                        for (int kx = 0; kx < k; ++kx) {
                            const int ix = ox * stride - geo.pad_left + kx * dilation;
                            if (ix < 0 || ix >= in.w) continue;
                            const double* xp = x + b * in_chw + static_cast<std::size_t>(iy) * in.w + ix;
                            const double* kp = kbase + static_cast<std::size_t>(ky) * k + kx;
                            for (int ci = 0; ci < c_in; ++ci) {
                                acc += xp[ci * in_hw] * kp[ci * kk];
                            }
                        }
                    }
                    out.at(b, co, oy, ox) = acc;
                }
            }
        }
    }
    check_finite(out, "conv2d");

    Graph* g = graph_of({&input, &kernel, &bias});
    if (g != nullptr) {
        const int in_node = node_on(g, input);
        const int k_node = node_on(g, kernel);
        const int b_node = bias.empty() ? -1 : node_on(g, bias);
        const int id = g->record(
            out.shape(),
            [=, x_vals = input.values(), k_vals = kernel.values()](Graph& gr, int out_node) {
                const std::vector<double>& go = gr.grad_buffer(out_node);
                std::vector<double>* gx = in_node >= 0 ? &gr.grad_buffer(in_node) : nullptr;
                std::vector<double>* gk = k_node >= 0 ? &gr.grad_buffer(k_node) : nullptr;
                std::vector<double>* gb = b_node >= 0 ? &gr.grad_buffer(b_node) : nullptr;
                const std::size_t out_hw =
                    static_cast<std::size_t>(geo.out_h) * geo.out_w;
                const std::size_t out_chw = static_cast<std::size_t>(c_out) * out_hw;
                for (int b = 0; b < in.n; ++b) {
                    for (int co = 0; co < c_out; ++co) {
                        const double* gop = go.data() + b * out_chw + co * out_hw;
                        for (int oy = 0; oy < geo.out_h; ++oy) {
                            for (int ox = 0; ox < geo.out_w; ++ox) {
                                const double gv = gop[static_cast<std::size_t>(oy) * geo.out_w + ox];
                                if (gv == 0.0) continue;
                                if (gb != nullptr) {
                                    (*gb)[co] += gv;
                                }
                                for (int ky = 0; ky < k; ++ky) {
                                    const int iy = oy * stride - geo.pad_top + ky * dilation;
                                    if (iy < 0 || iy >= in.h) continue;
                                    for (int kx = 0; kx < k; ++kx) {
                                        const int ix = ox * stride - geo.pad_left + kx * dilation;
                                        if (ix < 0 || ix >= in.w) continue;
                                        const std::size_t xoff =
                                            b * in_chw + static_cast<std::size_t>(iy) * in.w + ix;
                                        const std::size_t koff =
                                            static_cast<std::size_t>(co) * c_in * kk +
                                            static_cast<std::size_t>(ky) * k + kx;
                                        for (int ci = 0; ci < c_in; ++ci) {
                                            if (gk != nullptr) {
                                                (*gk)[koff + ci * kk] += gv * x_vals[xoff + ci * in_hw];
                                            }
                                            if (gx != nullptr) {
                                                (*gx)[xoff + ci * in_hw] += gv * k_vals[koff + ci * kk];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            });
        out.attach(g, id);
    }
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw ConfigError("add: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values()[i] = a.values()[i] + b.values()[i];
    }
    check_finite(out, "add");
    Graph* g = graph_of({&a, &b});
    if (g != nullptr) {
        const int a_node = node_on(g, a);
        const int b_node = node_on(g, b);
        const int id = g->record(out.shape(), [a_node, b_node](Graph& gr, int out_node) {
            const std::vector<double>& go = gr.grad_buffer(out_node);
            for (int n : {a_node, b_node}) {
                if (n < 0) continue;
                std::vector<double>& gi = gr.grad_buffer(n);
                for (std::size_t i = 0; i < gi.size(); ++i) {
                    gi[i] += go[i];
                }
            }
        });
        out.attach(g, id);
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (!(a.shape() == b.shape())) {
        throw ConfigError("mul: shape mismatch " + a.shape().str() + " vs " + b.shape().str());
    }
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values()[i] = a.values()[i] * b.values()[i];
    }
    check_finite(out, "mul");
    Graph* g = graph_of({&a, &b});
    if (g != nullptr) {
        const int a_node = node_on(g, a);
        const int b_node = node_on(g, b);
        const int id = g->record(
            out.shape(),
            [a_node, b_node, av = a.values(), bv = b.values()](Graph& gr, int out_node) {
                const std::vector<double>& go = gr.grad_buffer(out_node);
                if (a_node >= 0) {
                    std::vector<double>& ga = gr.grad_buffer(a_node);
                    for (std::size_t i = 0; i < ga.size(); ++i) {
                        ga[i] += go[i] * bv[i];
                    }
                }
                if (b_node >= 0) {
                    std::vector<double>& gb = gr.grad_buffer(b_node);
                    for (std::size_t i = 0; i < gb.size(); ++i) {
                        gb[i] += go[i] * av[i];
                    }
                }
            });
        out.attach(g, id);
    }
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values()[i] = a.values()[i] + s;
    }
    return record_unary(a, std::move(out), std::vector<double>(a.size(), 1.0), "add_scalar");
}

Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.values()[i] = a.values()[i] * s;
    }
    return record_unary(a, std::move(out), std::vector<double>(a.size(), s), "scale");
}

Tensor sigmoid(const Tensor& x) {
    Tensor out(x.shape());
    std::vector<double> local(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.values()[i];
        const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                  : std::exp(v) / (1.0 + std::exp(v));
        out.values()[i] = s;
        local[i] = s * (1.0 - s);
    }
    return record_unary(x, std::move(out), std::move(local), "sigmoid");
}

Tensor tanh_op(const Tensor& x) {
    Tensor out(x.shape());
    std::vector<double> local(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double t = std::tanh(x.values()[i]);
        out.values()[i] = t;
        local[i] = 1.0 - t * t;
    }
    return record_unary(x, std::move(out), std::move(local), "tanh");
}

Tensor relu(const Tensor& x) {
    Tensor out(x.shape());
    std::vector<double> local(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = x.values()[i];
        out.values()[i] = v > 0.0 ? v : 0.0;
        local[i] = v > 0.0 ? 1.0 : 0.0;
    }
    return record_unary(x, std::move(out), std::move(local), "relu");
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
        throw ConfigError("concat_channels: batch/spatial mismatch " + sa.str() + " vs " + sb.str());
    }
    Tensor out(Shape{sa.n, sa.c + sb.c, sa.h, sa.w});
    const std::size_t hw = static_cast<std::size_t>(sa.h) * sa.w;
    for (int n = 0; n < sa.n; ++n) {
        std::copy(a.values().begin() + n * sa.c * hw, a.values().begin() + (n + 1) * sa.c * hw,
                  out.values().begin() + static_cast<std::size_t>(n) * (sa.c + sb.c) * hw);
        std::copy(b.values().begin() + n * sb.c * hw, b.values().begin() + (n + 1) * sb.c * hw,
                  out.values().begin() + (static_cast<std::size_t>(n) * (sa.c + sb.c) + sa.c) * hw);
    }
    Graph* g = graph_of({&a, &b});
    if (g != nullptr) {
        const int a_node = node_on(g, a);
        const int b_node = node_on(g, b);
        const int ca = sa.c, cb = sb.c, nb = sa.n;
        const int id = g->record(out.shape(), [=](Graph& gr, int out_node) {
            const std::vector<double>& go = gr.grad_buffer(out_node);
            for (int n = 0; n < nb; ++n) {
                const std::size_t base = static_cast<std::size_t>(n) * (ca + cb) * hw;
                if (a_node >= 0) {
                    std::vector<double>& ga = gr.grad_buffer(a_node);
                    for (std::size_t i = 0; i < static_cast<std::size_t>(ca) * hw; ++i) {
                        ga[n * ca * hw + i] += go[base + i];
                    }
                }
                if (b_node >= 0) {
                    std::vector<double>& gb = gr.grad_buffer(b_node);
                    for (std::size_t i = 0; i < static_cast<std::size_t>(cb) * hw; ++i) {
                        gb[n * cb * hw + i] += go[base + ca * hw + i];
                    }
                }
            }
        });
        out.attach(g, id);
    }
    return out;
}

Tensor slice_channels(const Tensor& x, int begin, int end) {
    const Shape& s = x.shape();
    if (begin < 0 || end > s.c || begin >= end) {
        throw ConfigError("slice_channels: bad range [" + std::to_string(begin) + "," +
                          std::to_string(end) + ") for c=" + std::to_string(s.c));
    }
    const int cs = end - begin;
    Tensor out(Shape{s.n, cs, s.h, s.w});
    const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
        std::copy(x.values().begin() + (static_cast<std::size_t>(n) * s.c + begin) * hw,
                  x.values().begin() + (static_cast<std::size_t>(n) * s.c + end) * hw,
                  out.values().begin() + static_cast<std::size_t>(n) * cs * hw);
    }
    Graph* g = graph_of({&x});
    if (g != nullptr) {
        const int x_node = node_on(g, x);
        const int c = s.c, nb = s.n;
        const int id = g->record(out.shape(), [=](Graph& gr, int out_node) {
            if (x_node < 0) return;
            const std::vector<double>& go = gr.grad_buffer(out_node);
            std::vector<double>& gx = gr.grad_buffer(x_node);
            for (int n = 0; n < nb; ++n) {
                for (std::size_t i = 0; i < static_cast<std::size_t>(cs) * hw; ++i) {
                    gx[(static_cast<std::size_t>(n) * c + begin) * hw + i] +=
                        go[static_cast<std::size_t>(n) * cs * hw + i];
                }
            }
        });
        out.attach(g, id);
    }
    return out;
}

namespace {

struct Lerp {
    int lo;
    int hi;
    double frac;  // weight of hi
};

Lerp align_corners_coord(int out_i, int out_size, int in_size) {
    if (out_size == 1 || in_size == 1) {
        return {0, 0, 0.0};
    }
    const double pos = static_cast<double>(out_i) * (in_size - 1) / (out_size - 1);
    int lo = static_cast<int>(std::floor(pos));
    if (lo >= in_size - 1) lo = in_size - 2;
    return {lo, lo + 1, pos - lo};
}

}  // namespace

Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w) {
    const Shape& s = x.shape();
    if (out_h < s.h || out_w < s.w) {
        throw ConfigError("bilinear_upsample: target " + std::to_string(out_h) + "x" +
                          std::to_string(out_w) + " smaller than input " + s.str());
    }
    Tensor out(Shape{s.n, s.c, out_h, out_w});
    std::vector<Lerp> ys(out_h), xs(out_w);
    for (int i = 0; i < out_h; ++i) ys[i] = align_corners_coord(i, out_h, s.h);
    for (int i = 0; i < out_w; ++i) xs[i] = align_corners_coord(i, out_w, s.w);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int oy = 0; oy < out_h; ++oy) {
                const Lerp& ly = ys[oy];
                for (int ox = 0; ox < out_w; ++ox) {
                    const Lerp& lx = xs[ox];
                    const double v00 = x.at(n, c, ly.lo, lx.lo);
                    const double v01 = x.at(n, c, ly.lo, lx.hi);
                    const double v10 = x.at(n, c, ly.hi, lx.lo);
                    const double v11 = x.at(n, c, ly.hi, lx.hi);
                    out.at(n, c, oy, ox) = (1 - ly.frac) * ((1 - lx.frac) * v00 + lx.frac * v01) +
                                           ly.frac * ((1 - lx.frac) * v10 + lx.frac * v11);
                }
            }
        }
    }
    check_finite(out, "bilinear_upsample");
    Graph* g = graph_of({&x});
    if (g != nullptr) {
        const int x_node = node_on(g, x);
        const int in_h = s.h, in_w = s.w, nb = s.n, nc = s.c;
        const int id = g->record(out.shape(), [=](Graph& gr, int out_node) {
            if (x_node < 0) return;
            const std::vector<double>& go = gr.grad_buffer(out_node);
            std::vector<double>& gx = gr.grad_buffer(x_node);
            const std::size_t in_hw = static_cast<std::size_t>(in_h) * in_w;
            const std::size_t out_hw = static_cast<std::size_t>(out_h) * out_w;
            for (int n = 0; n < nb; ++n) {
                for (int c = 0; c < nc; ++c) {
                    const std::size_t ibase = (static_cast<std::size_t>(n) * nc + c) * in_hw;
                    const std::size_t obase = (static_cast<std::size_t>(n) * nc + c) * out_hw;
                    for (int oy = 0; oy < out_h; ++oy) {
                        const Lerp& ly = ys[oy];
                        for (int ox = 0; ox < out_w; ++ox) {
                            const Lerp& lx = xs[ox];
                            const double gv = go[obase + static_cast<std::size_t>(oy) * out_w + ox];
                            if (gv == 0.0) continue;
                            gx[ibase + static_cast<std::size_t>(ly.lo) * in_w + lx.lo] +=
                                gv * (1 - ly.frac) * (1 - lx.frac);
                            gx[ibase + static_cast<std::size_t>(ly.lo) * in_w + lx.hi] +=
                                gv * (1 - ly.frac) * lx.frac;
                            gx[ibase + static_cast<std::size_t>(ly.hi) * in_w + lx.lo] +=
                                gv * ly.frac * (1 - lx.frac);
                            gx[ibase + static_cast<std::size_t>(ly.hi) * in_w + lx.hi] +=
                                gv * ly.frac * lx.frac;
                        }
                    }
                }
            }
        });
        out.attach(g, id);
    }
    return out;
}

Tensor softmax_cross_entropy(const Tensor& logits, const IntMask& labels, int ignore_label) {
    const Shape& s = logits.shape();
    if (labels.n != s.n || labels.h != s.h || labels.w != s.w) {
        throw ConfigError("softmax_cross_entropy: labels " + std::to_string(labels.n) + "x" +
                          std::to_string(labels.h) + "x" + std::to_string(labels.w) +
                          " do not match logits " + s.str());
    }
    const int K = s.c;
    const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
    std::vector<double> probs(logits.size());
    double total = 0.0;
    std::int64_t count = 0;
    for (int n = 0; n < s.n; ++n) {
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                const int lab = labels.at(n, y, x);
                double m = logits.at(n, 0, y, x);
                for (int c = 1; c < K; ++c) m = std::max(m, logits.at(n, c, y, x));
                double denom = 0.0;
                for (int c = 0; c < K; ++c) {
                    denom += std::exp(logits.at(n, c, y, x) - m);
                }
                const std::size_t pix = static_cast<std::size_t>(n) * K * hw +
                                        static_cast<std::size_t>(y) * s.w + x;
                for (int c = 0; c < K; ++c) {
                    probs[pix + c * hw] = std::exp(logits.at(n, c, y, x) - m) / denom;
                }
                if (lab == ignore_label) continue;
                if (lab < 0 || lab >= K) {
                    throw ConfigError("softmax_cross_entropy: label " + std::to_string(lab) +
                                      " out of range for K=" + std::to_string(K));
                }
                total += std::log(denom) - (logits.at(n, lab, y, x) - m);
                ++count;
            }
        }
    }
    const double loss = count > 0 ? total / static_cast<double>(count) : 0.0;
    Tensor out(Shape{1, 1, 1, 1});
    out.values()[0] = loss;
    check_finite(out, "softmax_cross_entropy");
    Graph* g = graph_of({&logits});
    if (g != nullptr) {
        const int l_node = node_on(g, logits);
        const int id = g->record(
            out.shape(),
            [l_node, probs = std::move(probs), labels, ignore_label, s, K, hw, count](
                Graph& gr, int out_node) {
                if (l_node < 0 || count == 0) return;
                const double gscale = gr.grad_buffer(out_node)[0] / static_cast<double>(count);
                std::vector<double>& gl = gr.grad_buffer(l_node);
                for (int n = 0; n < s.n; ++n) {
                    for (int y = 0; y < s.h; ++y) {
                        for (int x = 0; x < s.w; ++x) {
                            const int lab = labels.at(n, y, x);
                            if (lab == ignore_label) continue;
                            const std::size_t pix = static_cast<std::size_t>(n) * K * hw +
                                                    static_cast<std::size_t>(y) * s.w + x;
                            for (int c = 0; c < K; ++c) {
                                const double onehot = (c == lab) ? 1.0 : 0.0;
                                gl[pix + c * hw] += gscale * (probs[pix + c * hw] - onehot);
                            }
                        }
                    }
                }
            });
        out.attach(g, id);
    }
    return out;
}

Tensor sum(const Tensor& x) {
    Tensor out(Shape{1, 1, 1, 1});
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    out.values()[0] = acc;
    check_finite(out, "sum");
    Graph* g = graph_of({&x});
    if (g != nullptr) {
        const int x_node = node_on(g, x);
        const std::size_t n = x.size();
        const int id = g->record(out.shape(), [x_node, n](Graph& gr, int out_node) {
            if (x_node < 0) return;
            const double gv = gr.grad_buffer(out_node)[0];
            std::vector<double>& gx = gr.grad_buffer(x_node);
            for (std::size_t i = 0; i < n; ++i) gx[i] += gv;
        });
        out.attach(g, id);
    }
    return out;
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  std::vector<double>* batch_mean, std::vector<double>* batch_var) {
    const Shape& s = x.shape();
    if (!(gamma.shape() == Shape{1, s.c, 1, 1}) || !(beta.shape() == Shape{1, s.c, 1, 1})) {
        throw ConfigError("batch_norm: gamma/beta must be (1,c,1,1)");
    }
    const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
    const double m = static_cast<double>(s.n) * hw;
    std::vector<double> mean(s.c, 0.0), var(s.c, 0.0);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (std::size_t i = 0; i < hw; ++i) {
                mean[c] += x.values()[(static_cast<std::size_t>(n) * s.c + c) * hw + i];
            }
        }
    }
    for (int c = 0; c < s.c; ++c) mean[c] /= m;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (std::size_t i = 0; i < hw; ++i) {
                const double d = x.values()[(static_cast<std::size_t>(n) * s.c + c) * hw + i] - mean[c];
                var[c] += d * d;
            }
        }
    }
    for (int c = 0; c < s.c; ++c) var[c] /= m;
    if (batch_mean != nullptr) *batch_mean = mean;
    if (batch_var != nullptr) *batch_var = var;

    Tensor out(s);
    std::vector<double> xhat(x.size());
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const double inv_std = 1.0 / std::sqrt(var[c] + eps);
            for (std::size_t i = 0; i < hw; ++i) {
                const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * hw + i;
                xhat[off] = (x.values()[off] - mean[c]) * inv_std;
                out.values()[off] = gamma.values()[c] * xhat[off] + beta.values()[c];
            }
        }
    }
    check_finite(out, "batch_norm");
    Graph* g = graph_of({&x, &gamma, &beta});
    if (g != nullptr) {
        const int x_node = node_on(g, x);
        const int g_node = node_on(g, gamma);
        const int b_node = node_on(g, beta);
        const int id = g->record(
            s, [=, xhat = std::move(xhat), var = std::move(var), gv = gamma.values()](
                   Graph& gr, int out_node) {
                const std::vector<double>& go = gr.grad_buffer(out_node);
                std::vector<double> sum_dy(s.c, 0.0), sum_dy_xhat(s.c, 0.0);
                for (int n = 0; n < s.n; ++n) {
                    for (int c = 0; c < s.c; ++c) {
                        for (std::size_t i = 0; i < hw; ++i) {
                            const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * hw + i;
                            sum_dy[c] += go[off];
                            sum_dy_xhat[c] += go[off] * xhat[off];
                        }
                    }
                }
                if (g_node >= 0) {
                    std::vector<double>& gg = gr.grad_buffer(g_node);
                    for (int c = 0; c < s.c; ++c) gg[c] += sum_dy_xhat[c];
                }
                if (b_node >= 0) {
                    std::vector<double>& gb = gr.grad_buffer(b_node);
                    for (int c = 0; c < s.c; ++c) gb[c] += sum_dy[c];
                }
                if (x_node >= 0) {
                    std::vector<double>& gx = gr.grad_buffer(x_node);
                    for (int n = 0; n < s.n; ++n) {
                        for (int c = 0; c < s.c; ++c) {
                            const double inv_std = 1.0 / std::sqrt(var[c] + eps);
                            const double k = gv[c] * inv_std;
                            for (std::size_t i = 0; i < hw; ++i) {
                                const std::size_t off =
                                    (static_cast<std::size_t>(n) * s.c + c) * hw + i;
                                gx[off] += k * (go[off] - sum_dy[c] / m -
                                                xhat[off] * sum_dy_xhat[c] / m);
                            }
                        }
                    }
                }
            });
        out.attach(g, id);
    }
    return out;
}

Tensor batch_norm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                            const std::vector<double>& mean, const std::vector<double>& var,
                            double eps) {
    const Shape& s = x.shape();
    Tensor out(s);
    const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            const double inv_std = 1.0 / std::sqrt(var[c] + eps);
            for (std::size_t i = 0; i < hw; ++i) {
                const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * hw + i;
                out.values()[off] = gamma.values()[c] * (x.values()[off] - mean[c]) * inv_std +
                                    beta.values()[c];
            }
        }
    }
    return out;
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
    const Shape& s = x.shape();
    Tensor out(Shape{s.n, s.c, out_h, out_w});
    std::vector<Lerp> ys(out_h), xs(out_w);
    for (int i = 0; i < out_h; ++i) ys[i] = align_corners_coord(i, out_h, s.h);
    for (int i = 0; i < out_w; ++i) xs[i] = align_corners_coord(i, out_w, s.w);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int oy = 0; oy < out_h; ++oy) {
                const Lerp& ly = ys[oy];
                for (int ox = 0; ox < out_w; ++ox) {
                    const Lerp& lx = xs[ox];
                    out.at(n, c, oy, ox) =
                        (1 - ly.frac) * ((1 - lx.frac) * x.at(n, c, ly.lo, lx.lo) +
                                         lx.frac * x.at(n, c, ly.lo, lx.hi)) +
                        ly.frac * ((1 - lx.frac) * x.at(n, c, ly.hi, lx.lo) +
                                   lx.frac * x.at(n, c, ly.hi, lx.hi));
                }
            }
        }
    }
    return out;
}

Tensor flip_horizontal(const Tensor& x) {
    const Shape& s = x.shape();
    Tensor out(s);
    for (int n = 0; n < s.n; ++n) {
        for (int c = 0; c < s.c; ++c) {
            for (int y = 0; y < s.h; ++y) {
                for (int xx = 0; xx < s.w; ++xx) {
                    out.at(n, c, y, xx) = x.at(n, c, y, s.w - 1 - xx);
                }
            }
        }
    }
    return out;
}

IntMask argmax_channels(const Tensor& x) {
    const Shape& s = x.shape();
    IntMask mask(s.n, s.h, s.w);
    for (int n = 0; n < s.n; ++n) {
        for (int y = 0; y < s.h; ++y) {
            for (int xx = 0; xx < s.w; ++xx) {
                int best = 0;
                double bv = x.at(n, 0, y, xx);
                for (int c = 1; c < s.c; ++c) {
                    const double v = x.at(n, c, y, xx);
                    if (v > bv) {
                        bv = v;
                        best = c;
                    }
                }
                mask.at(n, y, xx) = best;
            }
        }
    }
    return mask;
}

}  // namespace canvasrnn

#include "canvasrnn/convlstm.hpp"

#include <cmath>

#include "canvasrnn/util.hpp"

namespace canvasrnn {

namespace {

Tensor glorot_kernel(int c_out, int c_in, int k, Rng& rng) {
    Tensor t(Shape{c_out, c_in, k, k});
    const double fan_in = static_cast<double>(c_in) * k * k;
    const double fan_out = static_cast<double>(c_out) * k * k;
    const double stddev = std::sqrt(2.0 / (fan_in + fan_out));
    for (double& v : t.values()) {
        v = stddev * rng.normal();
    }
    return t;
}

}  // namespace

ConvLstmParams ConvLstmParams::init(int c_in, int c_out, std::uint64_t seed, int kernel) {
    if (c_in <= 0 || c_out <= 0) {
        throw ConfigError("ConvLstmParams::init: channel counts must be positive");
    }
    Rng rng(seed);
    ConvLstmParams p;
    p.in_channels = c_in;
    p.out_channels = c_out;
    p.kernel = kernel;
    p.w_ih = glorot_kernel(c_out, c_out, kernel, rng);
    p.w_ix = glorot_kernel(c_out, c_in, kernel, rng);
    p.w_fh = glorot_kernel(c_out, c_out, kernel, rng);
    p.w_fx = glorot_kernel(c_out, c_in, kernel, rng);
    p.w_oh = glorot_kernel(c_out, c_out, kernel, rng);
    p.w_ox = glorot_kernel(c_out, c_in, kernel, rng);
    p.w_ch = glorot_kernel(c_out, c_out, kernel, rng);
    p.w_cx = glorot_kernel(c_out, c_in, kernel, rng);
    p.b_i = Tensor(Shape{1, c_out, 1, 1});
    p.b_f = Tensor(Shape{1, c_out, 1, 1});
    p.b_o = Tensor(Shape{1, c_out, 1, 1});
    p.b_c = Tensor(Shape{1, c_out, 1, 1});
    return p;
}

void ConvLstmParams::for_each(const std::string& prefix,
                              const std::function<void(const std::string&, Tensor&)>& fn) {
    fn(prefix + ".w_ih", w_ih);
    fn(prefix + ".w_ix", w_ix);
    fn(prefix + ".w_fh", w_fh);
    fn(prefix + ".w_fx", w_fx);
    fn(prefix + ".w_oh", w_oh);
    fn(prefix + ".w_ox", w_ox);
    fn(prefix + ".w_ch", w_ch);
    fn(prefix + ".w_cx", w_cx);
    fn(prefix + ".b_i", b_i);
    fn(prefix + ".b_f", b_f);
    fn(prefix + ".b_o", b_o);
    fn(prefix + ".b_c", b_c);
}

ConvLstmState lstm_step(const ConvLstmParams& p, const ConvLstmState& state, const Tensor& x) {
    if (x.shape().c != p.in_channels) {
        throw ConfigError("lstm_step: input has " + std::to_string(x.shape().c) +
                          " channels, cell expects " + std::to_string(p.in_channels));
    }
    if (state.h.shape().h != x.shape().h || state.h.shape().w != x.shape().w) {
        throw ConfigError("lstm_step: state spatial dims " + state.h.shape().str() +
                          " do not match input " + x.shape().str());
    }
    const Tensor& h_prev = state.h;
    const Tensor& c_prev = state.c;

    const Tensor i_gate = sigmoid(add(conv2d(h_prev, p.w_ih, {}), conv2d(x, p.w_ix, p.b_i)));
    const Tensor f_gate = sigmoid(
        add_scalar(add(conv2d(h_prev, p.w_fh, {}), conv2d(x, p.w_fx, p.b_f)), p.forget_offset));
    const Tensor c_in = tanh_op(add(conv2d(h_prev, p.w_ch, {}), conv2d(x, p.w_cx, p.b_c)));
    const Tensor c_new = add(mul(f_gate, c_prev), mul(i_gate, c_in));
    const Tensor o_gate = sigmoid(add(conv2d(h_prev, p.w_oh, {}), conv2d(x, p.w_ox, p.b_o)));
    const Tensor h_new = mul(o_gate, tanh_op(c_new));
    return {h_new, c_new};
}

}  // namespace canvasrnn

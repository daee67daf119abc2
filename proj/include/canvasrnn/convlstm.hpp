#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "canvasrnn/ops.hpp"
#include "canvasrnn/tensor.hpp"

namespace canvasrnn {

// Gate kernels and biases of a convolutional LSTM cell. x-side kernels map
// c_in -> c_out, h-side kernels map c_out -> c_out. The forget-gate offset
// is a fixed, non-trainable constant added inside the forget sigmoid.
struct ConvLstmParams {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 1;

    Tensor w_ih, w_ix;  // input gate
    Tensor w_fh, w_fx;  // forget gate
    Tensor w_oh, w_ox;  // output gate
    Tensor w_ch, w_cx;  // cell candidate
    Tensor b_i, b_f, b_o, b_c;
    double forget_offset = 1.0;

    // Glorot-normal kernels (variance 2/(fan_in+fan_out)), zero biases.
    static ConvLstmParams init(int c_in, int c_out, std::uint64_t seed, int kernel = 1);

    void for_each(const std::string& prefix,
                  const std::function<void(const std::string&, Tensor&)>& fn);
};

struct ConvLstmState {
    Tensor h;
    Tensor c;

    static ConvLstmState zeros(int n, int channels, int height, int width) {
        return {Tensor(Shape{n, channels, height, width}), Tensor(Shape{n, channels, height, width})};
    }
};

// One recurrence step. Returns the new state; the emitted output is state.h.
ConvLstmState lstm_step(const ConvLstmParams& params, const ConvLstmState& state, const Tensor& x);

}  // namespace canvasrnn

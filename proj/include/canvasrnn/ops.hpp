#pragma once

#include "canvasrnn/tensor.hpp"

namespace canvasrnn {

enum class Padding { Same, Valid };

// 2-D convolution. kernel shape is (c_out, c_in, k, k) mapped onto
// Shape{n=c_out, c=c_in, h=k, w=k}; bias is (1, c_out, 1, 1) or empty for
// none. Same padding zero-fills and yields ceil(h/stride) output size.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride = 1,
              int dilation = 1, Padding padding = Padding::Same);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor scale(const Tensor& a, double s);
Tensor sigmoid(const Tensor& x);
Tensor tanh_op(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, int begin, int end);

// Align-corners bilinear interpolation; upsampling only.
Tensor bilinear_upsample(const Tensor& x, int out_h, int out_w);

// Mean over non-ignored pixels of -log softmax(logits)[label]. All pixels
// ignored yields 0 with zero gradient.
Tensor softmax_cross_entropy(const Tensor& logits, const IntMask& labels, int ignore_label);

Tensor sum(const Tensor& x);

// Batch normalization over (n, h, w) per channel, training mode (batch
// statistics). gamma/beta are (1, c, 1, 1). Batch mean/var are written to
// the out-params for running-statistics updates.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  std::vector<double>* batch_mean = nullptr,
                  std::vector<double>* batch_var = nullptr);

// Inference-mode normalization with fixed statistics; not recorded.
Tensor batch_norm_inference(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                            const std::vector<double>& mean, const std::vector<double>& var,
                            double eps);

// --- non-differentiable utilities ---

// General align-corners bilinear resize (up or down); inference only.
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

// Horizontal (left-right) flip.
Tensor flip_horizontal(const Tensor& x);

// Per-pixel argmax over channels.
IntMask argmax_channels(const Tensor& x);

}  // namespace canvasrnn

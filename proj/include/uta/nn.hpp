#ifndef UTA_NN_HPP
#define UTA_NN_HPP

#include "uta/autograd.hpp"

namespace uta::nn {

// ---- elementwise -----------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

/// out = scale * x + shift, elementwise.
Var affine(const Var& x, double scale, double shift);
inline Var scale(const Var& x, double s) { return affine(x, s, 0.0); }

/// Elementwise product with a constant tensor (no grad through `t`).
Var mul_tensor(const Var& x, const Tensor& t);

/// Multiply (B,C,H,W) by a (B,C,1,1) gate, broadcast over space.
Var mul_channel_gate(const Var& x, const Var& gate);

/// Multiply (B,C,H,W) by a (B,1,H,W) gate, broadcast over channels.
Var mul_spatial_gate(const Var& x, const Var& gate);

Var relu(const Var& x);

/// Logistic sigmoid clamped to [eps, 1-eps] so downstream logs stay finite.
Var sigmoid(const Var& x, double eps = 1e-7);

/// Elementwise natural log; inputs must be strictly positive.
Var vlog(const Var& x);

/// Copy of x cut off from the tape (constant from the optimizer's view).
Var detach(const Var& x);

// ---- structure -------------------------------------------------------------

/// Concatenate along the channel axis; all inputs share (B,H,W).
Var concat_channels(const std::vector<Var>& xs);

/// Bilinear interpolation, align-corners off. Identity sizes return a
/// bit-exact copy.
Var resize_bilinear(const Var& x, int out_h, int out_w);
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

// ---- reductions ------------------------------------------------------------

Var sum_all(const Var& x);                // -> (1,1,1,1)
Var mean_all(const Var& x);               // -> (1,1,1,1)
Var sum_per_image(const Var& x);          // -> (B,1,1,1)
Var global_avg_pool(const Var& x);        // -> (B,C,1,1)

// ---- learned ops -----------------------------------------------------------

/// 2-D convolution, square kernel, symmetric stride/padding/dilation.
/// weight: (Cout, Cin, k, k); bias: (1, Cout, 1, 1) or null.
Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride = 1,
           int pad = 0, int dilation = 1);

Var max_pool2d(const Var& x, int kernel, int stride, int pad = 0);

/// Batch normalization. Training mode normalizes with batch statistics and
/// updates the running buffers in place; eval mode reads the buffers.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta,
               Tensor& running_mean, Tensor& running_var, bool training,
               double momentum = 0.1, double eps = 1e-5);

// ---- shape helpers ---------------------------------------------------------

inline int conv_out_dim(int in, int k, int stride, int pad, int dilation) {
  return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

}  // namespace uta::nn

#endif  // UTA_NN_HPP

#pragma once

#include "nimbus/tensor.hpp"

namespace nimbus::convk {

// Dilated 2-D convolution, zero-padded "same": out[y,x,co] =
// sum_{dy,dx,ci} in[y + d*(dy-r), x + d*(dx-r), ci] * k[dy,dx,ci,co],
// r = (k-1)/2, positions outside the input read as zero.
// input [H,W,Ci], kernel [k,k,Ci,Co], output [H,W,Co]. Kernel extent odd.
void forward(const Tensor& input, const Tensor& kernel, int dilation, Tensor* out);
void backward_input(const Tensor& dout, const Tensor& kernel, int dilation, Tensor* dinput);
void backward_kernel(const Tensor& input, const Tensor& dout, int dilation, Tensor* dkernel);

}  // namespace nimbus::convk

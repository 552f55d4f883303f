#include "nimbus/conv.hpp"

#include <Eigen/Core>

namespace nimbus::convk {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapCM = Eigen::Map<const MatRM>;

void validate(const Tensor& input, const Tensor& kernel, int dilation) {
  NIMBUS_CHECK(input.rank() == 3, "conv2d input must be [H,W,C], got " + shape_str(input.shape()));
  NIMBUS_CHECK(kernel.rank() == 4,
               "conv2d kernel must be [k,k,Ci,Co], got " + shape_str(kernel.shape()));
  NIMBUS_CHECK(kernel.dim(0) == kernel.dim(1), "conv2d kernel extent must be square");
  NIMBUS_CHECK(kernel.dim(0) % 2 == 1, "conv2d kernel extent must be odd");
  NIMBUS_CHECK(kernel.dim(2) == input.dim(2),
               "conv2d channel mismatch: input " + shape_str(input.shape()) + " kernel " +
                   shape_str(kernel.shape()));
  NIMBUS_CHECK(dilation >= 1, "conv2d dilation must be >= 1");
}

// Gather zero-padded k*k*Ci patches into rows of a (H*W) x (k*k*Ci) matrix.
void im2col(const Tensor& input, int k, int dilation, std::vector<double>* buf) {
  const int h = input.dim(0), w = input.dim(1), ci = input.dim(2);
  const int r = (k - 1) / 2;
  const std::size_t cols = static_cast<std::size_t>(k) * k * ci;
  buf->assign(static_cast<std::size_t>(h) * w * cols, 0.0);
  const double* src = input.data();
  double* dst = buf->data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double* row = dst + (static_cast<std::size_t>(y) * w + x) * cols;
      for (int dy = 0; dy < k; ++dy) {
        const int sy = y + dilation * (dy - r);
        if (sy < 0 || sy >= h) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int sx = x + dilation * (dx - r);
          if (sx < 0 || sx >= w) continue;
          const double* cell = src + (static_cast<std::size_t>(sy) * w + sx) * ci;
          double* slot = row + (static_cast<std::size_t>(dy) * k + dx) * ci;
          for (int c = 0; c < ci; ++c) slot[c] = cell[c];
        }
      }
    }
  }
}

// Scatter-add patch-gradient rows back onto the input grid (inverse of im2col).
void col2im_add(const std::vector<double>& buf, int h, int w, int ci, int k, int dilation,
                Tensor* dinput) {
  const int r = (k - 1) / 2;
  const std::size_t cols = static_cast<std::size_t>(k) * k * ci;
  double* dst = dinput->data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double* row = buf.data() + (static_cast<std::size_t>(y) * w + x) * cols;
      for (int dy = 0; dy < k; ++dy) {
        const int sy = y + dilation * (dy - r);
        if (sy < 0 || sy >= h) continue;
        for (int dx = 0; dx < k; ++dx) {
          const int sx = x + dilation * (dx - r);
          if (sx < 0 || sx >= w) continue;
          double* cell = dst + (static_cast<std::size_t>(sy) * w + sx) * ci;
          const double* slot = row + (static_cast<std::size_t>(dy) * k + dx) * ci;
          for (int c = 0; c < ci; ++c) cell[c] += slot[c];
        }
      }
    }
  }
}

}  // namespace

void forward(const Tensor& input, const Tensor& kernel, int dilation, Tensor* out) {
  validate(input, kernel, dilation);
  const int h = input.dim(0), w = input.dim(1), ci = input.dim(2);
  const int k = kernel.dim(0), co = kernel.dim(3);
  *out = Tensor(Shape{h, w, co});
  const Eigen::Index n = static_cast<Eigen::Index>(h) * w;
  MapCM km(kernel.data(), static_cast<Eigen::Index>(k) * k * ci, co);
  MapM om(out->data(), n, co);
  if (k == 1) {
    MapCM im(input.data(), n, ci);
    om.noalias() = im * km;
    return;
  }
  std::vector<double> patches;
  im2col(input, k, dilation, &patches);
  MapCM pm(patches.data(), n, static_cast<Eigen::Index>(k) * k * ci);
  om.noalias() = pm * km;
}

void backward_input(const Tensor& dout, const Tensor& kernel, int dilation, Tensor* dinput) {
  const int k = kernel.dim(0), ci = kernel.dim(2), co = kernel.dim(3);
  const int h = dout.dim(0), w = dout.dim(1);
  *dinput = Tensor(Shape{h, w, ci});
  const Eigen::Index n = static_cast<Eigen::Index>(h) * w;
  MapCM km(kernel.data(), static_cast<Eigen::Index>(k) * k * ci, co);
  MapCM gm(dout.data(), n, co);
  if (k == 1) {
    MapM dm(dinput->data(), n, ci);
    dm.noalias() = gm * km.transpose();
    return;
  }
  std::vector<double> dpatches(static_cast<std::size_t>(n) * k * k * ci);
  MapM dpm(dpatches.data(), n, static_cast<Eigen::Index>(k) * k * ci);
  dpm.noalias() = gm * km.transpose();
  col2im_add(dpatches, h, w, ci, k, dilation, dinput);
}

void backward_kernel(const Tensor& input, const Tensor& dout, int dilation, Tensor* dkernel) {
  const int h = input.dim(0), w = input.dim(1), ci = input.dim(2);
  const int co = dout.dim(2);
  const int k = dkernel->dim(0);
  const Eigen::Index n = static_cast<Eigen::Index>(h) * w;
  MapCM gm(dout.data(), n, co);
  MapM km(dkernel->data(), static_cast<Eigen::Index>(k) * k * ci, co);
  if (k == 1) {
    MapCM im(input.data(), n, ci);
    km.noalias() += im.transpose() * gm;
    return;
  }
  std::vector<double> patches;
  im2col(input, k, dilation, &patches);
  MapCM pm(patches.data(), n, static_cast<Eigen::Index>(k) * k * ci);
  km.noalias() += pm.transpose() * gm;
}

}  // namespace nimbus::convk

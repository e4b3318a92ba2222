#pragma once

// Naive serial reference kernels. These are deliberately written as the
// most literal nested-loop summations possible and are kept independent of
// lsn/kernels.hpp; unit tests and the benchmark compare the two.

#include <cmath>

#include "lsn/tensor.hpp"

namespace lsn::ref {

template <class T>
Tensor<T> conv2d(const Tensor<T>& in, const Tensor<T>& weight, const T* bias,
                 int stride, int pad) {
  const int N = in.shape.n, IC = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  const int OC = weight.shape.n, KH = weight.shape.h, KW = weight.shape.w;
  const int OH = (IH + 2 * pad - KH) / stride + 1;
  const int OW = (IW + 2 * pad - KW) / stride + 1;
  Tensor<T> out({N, OC, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int oc = 0; oc < OC; ++oc)
      for (int oh = 0; oh < OH; ++oh)
        for (int ow = 0; ow < OW; ++ow) {
          T acc = bias ? bias[oc] : T(0);
          for (int ic = 0; ic < IC; ++ic)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                const int ih = oh * stride + kh - pad;
                const int iw = ow * stride + kw - pad;
                if (ih >= 0 && ih < IH && iw >= 0 && iw < IW)
                  acc += weight.at(oc, ic, kh, kw) * in.at(n, ic, ih, iw);
              }
          out.at(n, oc, oh, ow) = acc;
        }
  return out;
}

// Depthwise transposed convolution by direct scatter.
template <class T>
Tensor<T> deconv2d(const Tensor<T>& in, const Tensor<T>& weight, int factor) {
  const int N = in.shape.n, C = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  const int K = weight.shape.h, pad = factor / 2;
  const int OH = IH * factor, OW = IW * factor;
  Tensor<T> out({N, C, OH, OW});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int ih = 0; ih < IH; ++ih)
        for (int iw = 0; iw < IW; ++iw)
          for (int kh = 0; kh < K; ++kh)
            for (int kw = 0; kw < K; ++kw) {
              const int oh = ih * factor - pad + kh;
              const int ow = iw * factor - pad + kw;
              if (oh >= 0 && oh < OH && ow >= 0 && ow < OW)
                out.at(n, c, oh, ow) += weight.at(c, 0, kh, kw) * in.at(n, c, ih, iw);
            }
  return out;
}

template <class T>
Tensor<T> maxpool2(const Tensor<T>& in) {
  const int N = in.shape.n, C = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  Tensor<T> out({N, C, IH / 2, IW / 2});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int oh = 0; oh < IH / 2; ++oh)
        for (int ow = 0; ow < IW / 2; ++ow) {
          T m = in.at(n, c, 2 * oh, 2 * ow);
          for (int dh = 0; dh < 2; ++dh)
            for (int dw = 0; dw < 2; ++dw)
              m = std::max(m, in.at(n, c, 2 * oh + dh, 2 * ow + dw));
          out.at(n, c, oh, ow) = m;
        }
  return out;
}

}  // namespace lsn::ref

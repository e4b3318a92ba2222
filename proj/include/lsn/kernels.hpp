#pragma once

// Compute kernels behind the graph ops. Each kernel parallelizes over
// independent output slices with OpenMP; every output element is written by
// exactly one thread and accumulation order per element is fixed, so results
// are bit-identical to the serial reference in lsn/ref_kernels.hpp.

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "lsn/tensor.hpp"

namespace lsn::kernels {

// out spatial size = floor((H + 2*pad - K)/stride) + 1
inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// weight is [OC, IC, KH, KW]; bias is [OC] (as 1xOCx1x1 or length OC), may be null.
template <class T>
void conv2d_forward(const Tensor<T>& in, const Tensor<T>& weight, const T* bias,
                    int stride, int pad, Tensor<T>& out) {
  const int N = in.shape.n, IC = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  const int OC = weight.shape.n, KH = weight.shape.h, KW = weight.shape.w;
  const int OH = out.shape.h, OW = out.shape.w;
  const T* ip = in.ptr();
  const T* wp = weight.ptr();
  T* op = out.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int oc = 0; oc < OC; ++oc) {
      T* oc_base = op + (static_cast<std::int64_t>(n) * OC + oc) * OH * OW;
      const T b = bias ? bias[oc] : T(0);
      for (int i = 0; i < OH * OW; ++i) oc_base[i] = b;
      for (int ic = 0; ic < IC; ++ic) {
        const T* ic_base = ip + (static_cast<std::int64_t>(n) * IC + ic) * IH * IW;
        const T* w_base = wp + ((static_cast<std::int64_t>(oc) * IC + ic) * KH) * KW;
        for (int kh = 0; kh < KH; ++kh) {
          for (int kw = 0; kw < KW; ++kw) {
            const T w = w_base[kh * KW + kw];
            if (w == T(0)) continue;
            if (stride == 1) {
              const int oh0 = std::max(0, pad - kh);
              const int oh1 = std::min(OH, IH + pad - kh);
              const int ow0 = std::max(0, pad - kw);
              const int ow1 = std::min(OW, IW + pad - kw);
              for (int oh = oh0; oh < oh1; ++oh) {
                const T* irow = ic_base + (oh + kh - pad) * IW + (kw - pad);
                T* orow = oc_base + oh * OW;
                for (int ow = ow0; ow < ow1; ++ow) orow[ow] += w * irow[ow];
              }
            } else {
              for (int oh = 0; oh < OH; ++oh) {
                const int ih = oh * stride + kh - pad;
                if (ih < 0 || ih >= IH) continue;
                const T* irow = ic_base + ih * IW;
                T* orow = oc_base + oh * OW;
                for (int ow = 0; ow < OW; ++ow) {
                  const int iw = ow * stride + kw - pad;
                  if (iw >= 0 && iw < IW) orow[ow] += w * irow[iw];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_data(const Tensor<T>& gout, const Tensor<T>& weight,
                          int stride, int pad, Tensor<T>& gin) {
  const int N = gin.shape.n, IC = gin.shape.c, IH = gin.shape.h, IW = gin.shape.w;
  const int OC = weight.shape.n, KH = weight.shape.h, KW = weight.shape.w;
  const int OH = gout.shape.h, OW = gout.shape.w;
  const T* gp = gout.ptr();
  const T* wp = weight.ptr();
  T* ip = gin.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int ic = 0; ic < IC; ++ic) {
      T* ic_base = ip + (static_cast<std::int64_t>(n) * IC + ic) * IH * IW;
      for (int i = 0; i < IH * IW; ++i) ic_base[i] = T(0);
      for (int oc = 0; oc < OC; ++oc) {
        const T* oc_base = gp + (static_cast<std::int64_t>(n) * OC + oc) * OH * OW;
        const T* w_base = wp + ((static_cast<std::int64_t>(oc) * IC + ic) * KH) * KW;
        for (int kh = 0; kh < KH; ++kh) {
          for (int kw = 0; kw < KW; ++kw) {
            const T w = w_base[kh * KW + kw];
            if (w == T(0)) continue;
            if (stride == 1) {
              const int oh0 = std::max(0, pad - kh);
              const int oh1 = std::min(OH, IH + pad - kh);
              const int ow0 = std::max(0, pad - kw);
              const int ow1 = std::min(OW, IW + pad - kw);
              for (int oh = oh0; oh < oh1; ++oh) {
                T* irow = ic_base + (oh + kh - pad) * IW + (kw - pad);
                const T* grow = oc_base + oh * OW;
                for (int ow = ow0; ow < ow1; ++ow) irow[ow] += w * grow[ow];
              }
            } else {
              for (int oh = 0; oh < OH; ++oh) {
                const int ih = oh * stride + kh - pad;
                if (ih < 0 || ih >= IH) continue;
                for (int ow = 0; ow < OW; ++ow) {
                  const int iw = ow * stride + kw - pad;
                  if (iw >= 0 && iw < IW)
                    ic_base[ih * IW + iw] += w * oc_base[oh * OW + ow];
                }
              }
            }
          }
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_filter(const Tensor<T>& gout, const Tensor<T>& in,
                            int stride, int pad, Tensor<T>& gweight) {
  const int N = in.shape.n, IC = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  const int OC = gweight.shape.n, KH = gweight.shape.h, KW = gweight.shape.w;
  const int OH = gout.shape.h, OW = gout.shape.w;
  const T* gp = gout.ptr();
  const T* ip = in.ptr();
  T* wp = gweight.ptr();

#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < OC; ++oc) {
    for (int ic = 0; ic < IC; ++ic) {
      for (int kh = 0; kh < KH; ++kh) {
        for (int kw = 0; kw < KW; ++kw) {
          T acc = T(0);
          for (int n = 0; n < N; ++n) {
            const T* oc_base = gp + (static_cast<std::int64_t>(n) * OC + oc) * OH * OW;
            const T* ic_base = ip + (static_cast<std::int64_t>(n) * IC + ic) * IH * IW;
            for (int oh = 0; oh < OH; ++oh) {
              const int ih = oh * stride + kh - pad;
              if (ih < 0 || ih >= IH) continue;
              const T* irow = ic_base + ih * IW;
              const T* grow = oc_base + oh * OW;
              if (stride == 1) {
                const int ow0 = std::max(0, pad - kw);
                const int ow1 = std::min(OW, IW + pad - kw);
                const T* is = irow + (kw - pad);
                for (int ow = ow0; ow < ow1; ++ow) acc += grow[ow] * is[ow];
              } else {
                for (int ow = 0; ow < OW; ++ow) {
                  const int iw = ow * stride + kw - pad;
                  if (iw >= 0 && iw < IW) acc += grow[ow] * irow[iw];
                }
              }
            }
          }
          wp[((static_cast<std::int64_t>(oc) * IC + ic) * KH + kh) * KW + kw] = acc;
        }
      }
    }
  }
}

template <class T>
void conv2d_backward_bias(const Tensor<T>& gout, T* gbias) {
  const int N = gout.shape.n, OC = gout.shape.c;
  const int HW = gout.shape.h * gout.shape.w;
  const T* gp = gout.ptr();
#pragma omp parallel for schedule(static)
  for (int oc = 0; oc < OC; ++oc) {
    T acc = T(0);
    for (int n = 0; n < N; ++n) {
      const T* base = gp + (static_cast<std::int64_t>(n) * OC + oc) * HW;
      for (int i = 0; i < HW; ++i) acc += base[i];
    }
    gbias[oc] = acc;
  }
}

// --- depthwise transposed convolution (learned upsampling) -----------------
//
// weight is [C, 1, K, K] with K = 2*factor, pad = factor/2; output spatial
// dims are exactly input dims * factor. Implemented as a gather per output
// pixel, so parallel evaluation stays deterministic.

template <class T>
void deconv2d_forward(const Tensor<T>& in, const Tensor<T>& weight, int factor,
                      Tensor<T>& out) {
  const int N = in.shape.n, C = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  const int K = weight.shape.h, pad = factor / 2;
  const int OH = out.shape.h, OW = out.shape.w;
  const T* ip = in.ptr();
  const T* wp = weight.ptr();
  T* op = out.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* ic_base = ip + (static_cast<std::int64_t>(n) * C + c) * IH * IW;
      const T* w_base = wp + static_cast<std::int64_t>(c) * K * K;
      T* oc_base = op + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
          T acc = T(0);
          // oh = ih*factor - pad + kh  =>  kh = oh + pad - ih*factor
          for (int ih = (oh + pad - K + factor) / factor; ih * factor <= oh + pad; ++ih) {
            if (ih < 0 || ih >= IH) continue;
            const int kh = oh + pad - ih * factor;
            if (kh < 0 || kh >= K) continue;
            for (int iw = (ow + pad - K + factor) / factor; iw * factor <= ow + pad; ++iw) {
              if (iw < 0 || iw >= IW) continue;
              const int kw = ow + pad - iw * factor;
              if (kw < 0 || kw >= K) continue;
              acc += w_base[kh * K + kw] * ic_base[ih * IW + iw];
            }
          }
          oc_base[oh * OW + ow] = acc;
        }
      }
    }
  }
}

template <class T>
void deconv2d_backward_data(const Tensor<T>& gout, const Tensor<T>& weight,
                            int factor, Tensor<T>& gin) {
  const int N = gin.shape.n, C = gin.shape.c, IH = gin.shape.h, IW = gin.shape.w;
  const int K = weight.shape.h, pad = factor / 2;
  const int OH = gout.shape.h, OW = gout.shape.w;
  const T* gp = gout.ptr();
  const T* wp = weight.ptr();
  T* ip = gin.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* oc_base = gp + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
      const T* w_base = wp + static_cast<std::int64_t>(c) * K * K;
      T* ic_base = ip + (static_cast<std::int64_t>(n) * C + c) * IH * IW;
      for (int ih = 0; ih < IH; ++ih) {
        for (int iw = 0; iw < IW; ++iw) {
          T acc = T(0);
          for (int kh = 0; kh < K; ++kh) {
            const int oh = ih * factor - pad + kh;
            if (oh < 0 || oh >= OH) continue;
            for (int kw = 0; kw < K; ++kw) {
              const int ow = iw * factor - pad + kw;
              if (ow < 0 || ow >= OW) continue;
              acc += w_base[kh * K + kw] * oc_base[oh * OW + ow];
            }
          }
          ic_base[ih * IW + iw] = acc;
        }
      }
    }
  }
}

template <class T>
void deconv2d_backward_filter(const Tensor<T>& gout, const Tensor<T>& in,
                              int factor, Tensor<T>& gweight) {
  const int N = in.shape.n, C = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  const int K = gweight.shape.h, pad = factor / 2;
  const int OH = gout.shape.h, OW = gout.shape.w;
  const T* gp = gout.ptr();
  const T* ip = in.ptr();
  T* wp = gweight.ptr();

#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    T* w_base = wp + static_cast<std::int64_t>(c) * K * K;
    for (int i = 0; i < K * K; ++i) w_base[i] = T(0);
    for (int n = 0; n < N; ++n) {
      const T* oc_base = gp + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
      const T* ic_base = ip + (static_cast<std::int64_t>(n) * C + c) * IH * IW;
      for (int ih = 0; ih < IH; ++ih) {
        for (int iw = 0; iw < IW; ++iw) {
          const T x = ic_base[ih * IW + iw];
          if (x == T(0)) continue;
          for (int kh = 0; kh < K; ++kh) {
            const int oh = ih * factor - pad + kh;
            if (oh < 0 || oh >= OH) continue;
            for (int kw = 0; kw < K; ++kw) {
              const int ow = iw * factor - pad + kw;
              if (ow < 0 || ow >= OW) continue;
              w_base[kh * K + kw] += x * oc_base[oh * OW + ow];
            }
          }
        }
      }
    }
  }
}

// Bilinear kernel tap for the standard transposed-convolution upsampler.
template <class T>
T bilinear_tap(int i, int j, int factor) {
  const int k = 2 * factor;
  const double c = (2.0 * factor - 1 - factor % 2) / (2.0 * factor);
  const double wi = 1.0 - std::abs(i / static_cast<double>(factor) - c);
  const double wj = 1.0 - std::abs(j / static_cast<double>(factor) - c);
  (void)k;
  return static_cast<T>(wi * wj);
}

// --- fixed bilinear interpolation (parameter-free upsampling) --------------
//
// Half-pixel source mapping with edge clamping; constants are preserved
// exactly everywhere including borders.

template <class T>
void bilinear_up_forward(const Tensor<T>& in, int factor, Tensor<T>& out) {
  const int N = in.shape.n, C = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  const int OH = out.shape.h, OW = out.shape.w;
  const T* ip = in.ptr();
  T* op = out.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* src = ip + (static_cast<std::int64_t>(n) * C + c) * IH * IW;
      T* dst = op + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
      for (int oh = 0; oh < OH; ++oh) {
        const double sy = (oh + 0.5) / factor - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, IH - 1);
        const int y1 = std::min(y0 + 1, IH - 1);
        const double fy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
        const double wy1 = (sy < 0) ? 0.0 : ((sy > IH - 1) ? 0.0 : fy);
        for (int ow = 0; ow < OW; ++ow) {
          const double sx = (ow + 0.5) / factor - 0.5;
          const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, IW - 1);
          const int x1 = std::min(x0 + 1, IW - 1);
          const double fx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
          const double wx1 = (sx < 0) ? 0.0 : ((sx > IW - 1) ? 0.0 : fx);
          const double v = (1 - wy1) * ((1 - wx1) * src[y0 * IW + x0] + wx1 * src[y0 * IW + x1]) +
                           wy1 * ((1 - wx1) * src[y1 * IW + x0] + wx1 * src[y1 * IW + x1]);
          dst[oh * OW + ow] = static_cast<T>(v);
        }
      }
    }
  }
}

template <class T>
void bilinear_up_backward(const Tensor<T>& gout, int factor, Tensor<T>& gin) {
  const int N = gin.shape.n, C = gin.shape.c, IH = gin.shape.h, IW = gin.shape.w;
  const int OH = gout.shape.h, OW = gout.shape.w;
  const T* gp = gout.ptr();
  T* ip = gin.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* src = gp + (static_cast<std::int64_t>(n) * C + c) * OH * OW;
      T* dst = ip + (static_cast<std::int64_t>(n) * C + c) * IH * IW;
      for (int i = 0; i < IH * IW; ++i) dst[i] = T(0);
      for (int oh = 0; oh < OH; ++oh) {
        const double sy = (oh + 0.5) / factor - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0, IH - 1);
        const int y1 = std::min(y0 + 1, IH - 1);
        const double fy = std::clamp(sy - std::floor(sy), 0.0, 1.0);
        const double wy1 = (sy < 0) ? 0.0 : ((sy > IH - 1) ? 0.0 : fy);
        for (int ow = 0; ow < OW; ++ow) {
          const double sx = (ow + 0.5) / factor - 0.5;
          const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0, IW - 1);
          const int x1 = std::min(x0 + 1, IW - 1);
          const double fx = std::clamp(sx - std::floor(sx), 0.0, 1.0);
          const double wx1 = (sx < 0) ? 0.0 : ((sx > IW - 1) ? 0.0 : fx);
          const T g = src[oh * OW + ow];
          dst[y0 * IW + x0] += static_cast<T>((1 - wy1) * (1 - wx1)) * g;
          dst[y0 * IW + x1] += static_cast<T>((1 - wy1) * wx1) * g;
          dst[y1 * IW + x0] += static_cast<T>(wy1 * (1 - wx1)) * g;
          dst[y1 * IW + x1] += static_cast<T>(wy1 * wx1) * g;
        }
      }
    }
  }
}

// --- 2x2 max pooling -------------------------------------------------------

template <class T>
void maxpool2_forward(const Tensor<T>& in, Tensor<T>& out, std::vector<int>& argmax) {
  const int N = in.shape.n, C = in.shape.c, IH = in.shape.h, IW = in.shape.w;
  const int OH = out.shape.h, OW = out.shape.w;
  const T* ip = in.ptr();
  T* op = out.ptr();
  argmax.assign(static_cast<size_t>(out.count()), 0);

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const T* src = ip + (static_cast<std::int64_t>(n) * C + c) * IH * IW;
      const std::int64_t obase = (static_cast<std::int64_t>(n) * C + c) * OH * OW;
      for (int oh = 0; oh < OH; ++oh) {
        for (int ow = 0; ow < OW; ++ow) {
          int best = (2 * oh) * IW + 2 * ow;
          T bv = src[best];
          const int cand[3] = {(2 * oh) * IW + 2 * ow + 1, (2 * oh + 1) * IW + 2 * ow,
                               (2 * oh + 1) * IW + 2 * ow + 1};
          for (int idx : cand) {
            if (src[idx] > bv) {
              bv = src[idx];
              best = idx;
            }
          }
          op[obase + oh * OW + ow] = bv;
          argmax[obase + oh * OW + ow] = best;
        }
      }
    }
  }
}

template <class T>
void maxpool2_backward(const Tensor<T>& gout, const std::vector<int>& argmax,
                       Tensor<T>& gin) {
  const int N = gin.shape.n, C = gin.shape.c;
  const int IHW = gin.shape.h * gin.shape.w;
  const int OHW = gout.shape.h * gout.shape.w;
  const T* gp = gout.ptr();
  T* ip = gin.ptr();

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      const std::int64_t ib = (static_cast<std::int64_t>(n) * C + c) * IHW;
      const std::int64_t ob = (static_cast<std::int64_t>(n) * C + c) * OHW;
      for (int i = 0; i < IHW; ++i) ip[ib + i] = T(0);
      for (int i = 0; i < OHW; ++i) ip[ib + argmax[ob + i]] += gp[ob + i];
    }
  }
}

// --- elementwise -----------------------------------------------------------

template <class T>
void sigmoid_forward(const Tensor<T>& in, Tensor<T>& out) {
  const std::int64_t n = in.count();
  const T* ip = in.ptr();
  T* op = out.ptr();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i)
    op[i] = T(1) / (T(1) + std::exp(-ip[i]));
}

// --- class-balanced sigmoid cross-entropy ----------------------------------
//
// Positives weighted by |Y-|/|Y|, negatives by |Y+|/|Y|; all-positive or
// all-negative targets fall back to unit weights. Loss is the mean over
// pixels of the weighted stable cross-entropy; grad is d(loss)/d(logit).

template <class T>
T balanced_bce(const Tensor<T>& logits, const Tensor<T>& target, Tensor<T>* grad) {
  const std::int64_t n = logits.count();
  const T* xp = logits.ptr();
  const T* yp = target.ptr();
  std::int64_t pos = 0;
  for (std::int64_t i = 0; i < n; ++i)
    if (yp[i] > T(0.5)) ++pos;
  const std::int64_t neg = n - pos;
  double wpos = 1.0, wneg = 1.0;
  if (pos > 0 && neg > 0) {
    wpos = static_cast<double>(neg) / static_cast<double>(n);
    wneg = static_cast<double>(pos) / static_cast<double>(n);
  }
  double loss = 0;
  T* gp = grad ? grad->ptr() : nullptr;
  for (std::int64_t i = 0; i < n; ++i) {
    const double x = xp[i];
    const bool p = yp[i] > T(0.5);
    const double w = p ? wpos : wneg;
    // softplus(x) - y*x, computed stably
    const double sp = (x > 0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    loss += w * (sp - (p ? x : 0.0));
    if (gp) {
      const double s = 1.0 / (1.0 + std::exp(-x));
      gp[i] = static_cast<T>(w * (s - (p ? 1.0 : 0.0)) / static_cast<double>(n));
    }
  }
  return static_cast<T>(loss / static_cast<double>(n));
}

}  // namespace lsn::kernels

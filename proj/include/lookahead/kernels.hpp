#pragma once

// Free-function forward/backward kernels over flat buffers. Everything is
// templated on the scalar type: float for training speed, double for
// finite-difference verification. Reductions use fixed-order lane
// accumulators so builds stay fast without -ffast-math and results are
// identical from run to run.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>

#include "lookahead/errors.hpp"

namespace lookahead::nn {

template <class T>
struct Lanes {
    static constexpr int value = 8;
};
template <>
struct Lanes<float> {
    static constexpr int value = 16;
};

template <class T>
inline T vdot(const T* a, const T* b, int n) {
    constexpr int L = Lanes<T>::value;
    T acc[L] = {};
    int i = 0;
    for (; i + L <= n; i += L) {
        for (int l = 0; l < L; ++l) {
            acc[l] += a[i + l] * b[i + l];
        }
    }
    T s = 0;
    for (; i < n; ++i) {
        s += a[i] * b[i];
    }
    for (int l = 0; l < L; ++l) {
        s += acc[l];
    }
    return s;
}

template <class T>
inline void vaxpy(T* y, T alpha, const T* x, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

// out[b,t,:] = wte[ids[b,t],:] + wpe[t,:]
template <class T>
void encoder_forward(T* out, const std::int32_t* ids, const T* wte, const T* wpe,
                     int B, int Tn, int C) {
    for (int b = 0; b < B; ++b) {
        for (int t = 0; t < Tn; ++t) {
            T* o = out + (static_cast<std::size_t>(b) * Tn + t) * C;
            const T* w = wte + static_cast<std::size_t>(ids[b * Tn + t]) * C;
            const T* p = wpe + static_cast<std::size_t>(t) * C;
            for (int c = 0; c < C; ++c) {
                o[c] = w[c] + p[c];
            }
        }
    }
}

template <class T>
void encoder_backward(T* dwte, T* dwpe, const T* dout, const std::int32_t* ids,
                      int B, int Tn, int C) {
    for (int b = 0; b < B; ++b) {
        for (int t = 0; t < Tn; ++t) {
            const T* d = dout + (static_cast<std::size_t>(b) * Tn + t) * C;
            vaxpy(dwte + static_cast<std::size_t>(ids[b * Tn + t]) * C, T(1), d, C);
            vaxpy(dwpe + static_cast<std::size_t>(t) * C, T(1), d, C);
        }
    }
}

// Row-wise layer norm over C with cached mean and reciprocal std.
template <class T>
void layernorm_forward(T* out, T* mean, T* rstd, const T* inp, const T* gamma,
                       const T* beta, int N, int C) {
    for (int n = 0; n < N; ++n) {
        const T* x = inp + static_cast<std::size_t>(n) * C;
        T m = 0;
        for (int c = 0; c < C; ++c) {
            m += x[c];
        }
        m /= C;
        T v = 0;
        for (int c = 0; c < C; ++c) {
            const T d = x[c] - m;
            v += d * d;
        }
        v /= C;
        const T rs = T(1) / std::sqrt(v + T(1e-5));
        T* o = out + static_cast<std::size_t>(n) * C;
        for (int c = 0; c < C; ++c) {
            o[c] = (x[c] - m) * rs * gamma[c] + beta[c];
        }
        mean[n] = m;
        rstd[n] = rs;
    }
}

template <class T>
void layernorm_backward(T* dinp, T* dgamma, T* dbeta, const T* dout, const T* inp,
                        const T* mean, const T* rstd, const T* gamma, int N, int C) {
    for (int n = 0; n < N; ++n) {
        const T* x = inp + static_cast<std::size_t>(n) * C;
        const T* d = dout + static_cast<std::size_t>(n) * C;
        T* dx = dinp + static_cast<std::size_t>(n) * C;
        const T m = mean[n];
        const T rs = rstd[n];

        T dnorm_mean = 0;
        T dnorm_norm_mean = 0;
        for (int c = 0; c < C; ++c) {
            const T norm = (x[c] - m) * rs;
            const T dnorm = gamma[c] * d[c];
            dnorm_mean += dnorm;
            dnorm_norm_mean += dnorm * norm;
        }
        dnorm_mean /= C;
        dnorm_norm_mean /= C;
        for (int c = 0; c < C; ++c) {
            const T norm = (x[c] - m) * rs;
            const T dnorm = gamma[c] * d[c];
            dx[c] += (dnorm - dnorm_mean - norm * dnorm_norm_mean) * rs;
            dgamma[c] += d[c] * norm;
            dbeta[c] += d[c];
        }
    }
}

// out[N,OC] = inp[N,IC] * weight[OC,IC]^T  (no bias anywhere in the model)
template <class T>
void matmul_forward(T* out, const T* inp, const T* weight, int N, int IC, int OC) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
        const T* x = inp + static_cast<std::size_t>(n) * IC;
        T* o = out + static_cast<std::size_t>(n) * OC;
        for (int oc = 0; oc < OC; ++oc) {
            o[oc] = vdot(x, weight + static_cast<std::size_t>(oc) * IC, IC);
        }
    }
}

template <class T>
void matmul_backward(T* dinp, T* dweight, const T* dout, const T* inp, const T* weight,
                     int N, int IC, int OC) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < N; ++n) {
        const T* d = dout + static_cast<std::size_t>(n) * OC;
        T* dx = dinp + static_cast<std::size_t>(n) * IC;
        for (int oc = 0; oc < OC; ++oc) {
            vaxpy(dx, d[oc], weight + static_cast<std::size_t>(oc) * IC, IC);
        }
    }
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < OC; ++oc) {
        T* dw = dweight + static_cast<std::size_t>(oc) * IC;
        for (int n = 0; n < N; ++n) {
            vaxpy(dw, dout[static_cast<std::size_t>(n) * OC + oc],
                  inp + static_cast<std::size_t>(n) * IC, IC);
        }
    }
}

// Causal multi-head attention over packed qkv [B,T,3C]; per-head q at
// offset h*hs, k at C+h*hs, v at 2C+h*hs. preatt/att are [B,NH,T,T].
template <class T>
void attention_forward(T* out, T* preatt, T* att, const T* qkv, int B, int Tn, int C, int NH) {
    const int hs = C / NH;
    const T scale = T(1) / std::sqrt(static_cast<T>(hs));
    const std::size_t C3 = static_cast<std::size_t>(3) * C;
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int t = 0; t < Tn; ++t) {
            for (int h = 0; h < NH; ++h) {
                const T* q = qkv + (static_cast<std::size_t>(b) * Tn + t) * C3 + static_cast<std::size_t>(h) * hs;
                T* prow = preatt + ((static_cast<std::size_t>(b) * NH + h) * Tn + t) * Tn;
                T* arow = att + ((static_cast<std::size_t>(b) * NH + h) * Tn + t) * Tn;

                T maxv = -std::numeric_limits<T>::infinity();
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T* k = qkv + (static_cast<std::size_t>(b) * Tn + t2) * C3 + C + static_cast<std::size_t>(h) * hs;
                    const T val = vdot(q, k, hs) * scale;
                    prow[t2] = val;
                    if (val > maxv) {
                        maxv = val;
                    }
                }
                T sum = 0;
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T e = std::exp(prow[t2] - maxv);
                    arow[t2] = e;
                    sum += e;
                }
                const T inv = sum == T(0) ? T(0) : T(1) / sum;
                for (int t2 = 0; t2 <= t; ++t2) {
                    arow[t2] *= inv;
                }
                for (int t2 = t + 1; t2 < Tn; ++t2) {
                    prow[t2] = 0;
                    arow[t2] = 0;
                }

                T* o = out + (static_cast<std::size_t>(b) * Tn + t) * C + static_cast<std::size_t>(h) * hs;
                for (int c = 0; c < hs; ++c) {
                    o[c] = 0;
                }
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T* v = qkv + (static_cast<std::size_t>(b) * Tn + t2) * C3 + 2 * C + static_cast<std::size_t>(h) * hs;
                    vaxpy(o, arow[t2], v, hs);
                }
            }
        }
    }
}

template <class T>
void attention_backward(T* dqkv, T* dpreatt, T* datt, const T* dout, const T* qkv,
                        const T* att, int B, int Tn, int C, int NH) {
    const int hs = C / NH;
    const T scale = T(1) / std::sqrt(static_cast<T>(hs));
    const std::size_t C3 = static_cast<std::size_t>(3) * C;
#pragma omp parallel for schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int t = 0; t < Tn; ++t) {
            for (int h = 0; h < NH; ++h) {
                const T* arow = att + ((static_cast<std::size_t>(b) * NH + h) * Tn + t) * Tn;
                T* darow = datt + ((static_cast<std::size_t>(b) * NH + h) * Tn + t) * Tn;
                T* dprow = dpreatt + ((static_cast<std::size_t>(b) * NH + h) * Tn + t) * Tn;
                const T* d = dout + (static_cast<std::size_t>(b) * Tn + t) * C + static_cast<std::size_t>(h) * hs;
                const T* q = qkv + (static_cast<std::size_t>(b) * Tn + t) * C3 + static_cast<std::size_t>(h) * hs;
                T* dq = dqkv + (static_cast<std::size_t>(b) * Tn + t) * C3 + static_cast<std::size_t>(h) * hs;

                for (int t2 = 0; t2 <= t; ++t2) {
                    const T* v = qkv + (static_cast<std::size_t>(b) * Tn + t2) * C3 + 2 * C + static_cast<std::size_t>(h) * hs;
                    T* dv = dqkv + (static_cast<std::size_t>(b) * Tn + t2) * C3 + 2 * C + static_cast<std::size_t>(h) * hs;
                    darow[t2] += vdot(d, v, hs);
                    vaxpy(dv, arow[t2], d, hs);
                }
                T sumd = 0;
                for (int t2 = 0; t2 <= t; ++t2) {
                    sumd += arow[t2] * darow[t2];
                }
                for (int t2 = 0; t2 <= t; ++t2) {
                    dprow[t2] += arow[t2] * (darow[t2] - sumd);
                }
                for (int t2 = 0; t2 <= t; ++t2) {
                    const T* k = qkv + (static_cast<std::size_t>(b) * Tn + t2) * C3 + C + static_cast<std::size_t>(h) * hs;
                    T* dk = dqkv + (static_cast<std::size_t>(b) * Tn + t2) * C3 + C + static_cast<std::size_t>(h) * hs;
                    vaxpy(dq, dprow[t2] * scale, k, hs);
                    vaxpy(dk, dprow[t2] * scale, q, hs);
                }
            }
        }
    }
}

// Exact GELU: 0.5 x (1 + erf(x / sqrt(2)))
template <class T>
void gelu_forward(T* out, const T* inp, std::size_t n) {
    const T inv_sqrt2 = T(0.70710678118654752440);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = T(0.5) * inp[i] * (T(1) + std::erf(inp[i] * inv_sqrt2));
    }
}

template <class T>
void gelu_backward(T* dinp, const T* dout, const T* inp, std::size_t n) {
    const T inv_sqrt2 = T(0.70710678118654752440);
    const T inv_sqrt2pi = T(0.39894228040143267794);
    for (std::size_t i = 0; i < n; ++i) {
        const T x = inp[i];
        const T cdf = T(0.5) * (T(1) + std::erf(x * inv_sqrt2));
        const T pdf = inv_sqrt2pi * std::exp(T(-0.5) * x * x);
        dinp[i] += dout[i] * (cdf + x * pdf);
    }
}

template <class T>
void residual_forward(T* out, const T* a, const T* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = a[i] + b[i];
    }
}

template <class T>
void residual_backward(T* da, T* db, const T* dout, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        da[i] += dout[i];
        db[i] += dout[i];
    }
}

// Masked mean cross entropy over N position rows of V logits.
// Softmax rows are materialized into `probs` only where mask is set, so
// masked positions contribute exactly zero to loss and gradient.
template <class T>
double masked_ce_forward(T* probs, const T* logits, const std::int32_t* targets,
                         const std::uint8_t* mask, int N, int V) {
    double loss = 0;
    std::int64_t count = 0;
    for (int n = 0; n < N; ++n) {
        if (!mask[n]) {
            continue;
        }
        const T* row = logits + static_cast<std::size_t>(n) * V;
        T* prow = probs + static_cast<std::size_t>(n) * V;
        T maxv = row[0];
        for (int v = 1; v < V; ++v) {
            if (row[v] > maxv) {
                maxv = row[v];
            }
        }
        T sum = 0;
        for (int v = 0; v < V; ++v) {
            prow[v] = std::exp(row[v] - maxv);
            sum += prow[v];
        }
        const T inv = T(1) / sum;
        for (int v = 0; v < V; ++v) {
            prow[v] *= inv;
        }
        const std::int32_t tgt = targets[n];
        if (tgt < 0 || tgt >= V) {
            throw ConfigError("masked_ce_forward: target id out of range");
        }
        loss -= std::log(static_cast<double>(prow[tgt]));
        ++count;
    }
    if (count == 0) {
        throw ConfigError("masked_ce_forward: mask selects no positions (degenerate batch)");
    }
    return loss / static_cast<double>(count);
}

// Accumulates d(mean masked CE)/dlogits. `count` must be the unmasked
// position count the forward pass normalized by.
template <class T>
void masked_ce_backward(T* dlogits, const T* probs, const std::int32_t* targets,
                        const std::uint8_t* mask, int N, int V, std::int64_t count) {
    const T inv = T(1) / static_cast<T>(count);
    for (int n = 0; n < N; ++n) {
        if (!mask[n]) {
            continue;
        }
        const T* prow = probs + static_cast<std::size_t>(n) * V;
        T* drow = dlogits + static_cast<std::size_t>(n) * V;
        for (int v = 0; v < V; ++v) {
            drow[v] += prow[v] * inv;
        }
        drow[targets[n]] -= inv;
    }
}

} // namespace lookahead::nn

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lookahead/model.hpp"

namespace lookahead {

// Bias-corrected Adam with decoupled weight decay. Decay applies only to
// tensors whose spec sets the decay flag.
template <class T>
class AdamW {
public:
    AdamW(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8,
          double weight_decay = 0.01)
        : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

    void step(ParamStore<T>& ps, double lr) {
        if (m_.size() != ps.total()) {
            m_.assign(ps.total(), T(0));
            v_.assign(ps.total(), T(0));
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (const auto& spec : ps.specs) {
            const double wd = spec.decay ? weight_decay_ : 0.0;
            T* p = ps.data.data() + spec.offset;
            const T* g = ps.grad.data() + spec.offset;
            T* m = m_.data() + spec.offset;
            T* v = v_.data() + spec.offset;
            for (std::size_t j = 0; j < spec.size; ++j) {
                m[j] = static_cast<T>(beta1_ * m[j] + (1.0 - beta1_) * g[j]);
                v[j] = static_cast<T>(beta2_ * v[j] + (1.0 - beta2_) * static_cast<double>(g[j]) * g[j]);
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                p[j] = static_cast<T>(p[j] - lr * (mhat / (std::sqrt(vhat) + eps_) + wd * p[j]));
            }
        }
    }

    std::int64_t steps() const { return t_; }
    double weight_decay() const { return weight_decay_; }

private:
    double beta1_, beta2_, eps_, weight_decay_;
    std::int64_t t_ = 0;
    std::vector<T> m_, v_;
};

// Scales gradients in place when their global L2 norm exceeds max_norm;
// returns the pre-clip norm.
template <class T>
double clip_global_norm(ParamStore<T>& ps, double max_norm) {
    double sq = 0;
    for (const T g : ps.grad) {
        sq += static_cast<double>(g) * g;
    }
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const T s = static_cast<T>(max_norm / norm);
        for (T& g : ps.grad) {
            g *= s;
        }
    }
    return norm;
}

} // namespace lookahead

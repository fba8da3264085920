#include "cdae/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cdae {

AdamW::AdamW(std::vector<TensorPtr> params, AdamWConfig cfg) : cfg_(cfg) {
    if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0 && cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
        throw std::invalid_argument("AdamW betas must lie in (0,1)");
    }
    if (cfg.eps <= 0.0 || cfg.weight_decay < 0.0) {
        throw std::invalid_argument("AdamW eps must be > 0 and weight_decay >= 0");
    }
    slots_.reserve(params.size());
    for (auto& p : params) {
        if (!p) throw std::invalid_argument("AdamW given a null parameter");
        if (!p->requires_grad) {
            throw std::invalid_argument("AdamW given a frozen parameter of shape " +
                                        shape_str(p->shape) + "; frozen tensors are excluded");
        }
        Slot s;
        s.m.assign(p->data.size(), 0.0);
        s.v.assign(p->data.size(), 0.0);
        s.param = std::move(p);
        slots_.push_back(std::move(s));
    }
}

void AdamW::zero_grad() {
    for (auto& s : slots_) s.param->zero_grad();
}

void AdamW::step(double lr) {
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    const bool round_f32 = active_precision() == Precision::f32;
    for (auto& s : slots_) {
        Tensor& p = *s.param;
        if (p.grad.size() != p.data.size()) {
            throw std::invalid_argument("AdamW step without gradients for parameter of shape " +
                                        shape_str(p.shape));
        }
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double g = p.grad[i];
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g;
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g * g;
            const double m_hat = s.m[i] / bc1;
            const double v_hat = s.v[i] / bc2;
            double value = p.data[i] - lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps) +
                                             cfg_.weight_decay * p.data[i]);
            if (round_f32) value = static_cast<double>(static_cast<float>(value));
            p.data[i] = value;
        }
    }
}

double CosineSchedule::lr_at(std::int64_t t) const {
    if (total_steps <= 0) throw std::invalid_argument("CosineSchedule total_steps must be > 0");
    if (t < 0 || t > total_steps) {
        throw std::invalid_argument("schedule step " + std::to_string(t) + " outside [0," +
                                    std::to_string(total_steps) + "]");
    }
    if (t == 0) return lr_max;            // endpoints exact by construction
    if (t == total_steps) return eta_min;
    const double phase = M_PI * static_cast<double>(t) / static_cast<double>(total_steps);
    return eta_min + 0.5 * (lr_max - eta_min) * (1.0 + std::cos(phase));
}

}  // namespace cdae

#pragma once

#include <cstdint>
#include <vector>

#include "cdae/tensor.hpp"

namespace cdae {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Adam with decoupled weight decay. Parameters must be trainable
// (requires_grad); frozen tensors belong to no optimizer.
class AdamW {
public:
    explicit AdamW(std::vector<TensorPtr> params, AdamWConfig cfg = {});

    void zero_grad();
    void step(double lr);

    std::int64_t step_count() const { return step_count_; }

private:
    struct Slot {
        TensorPtr param;
        std::vector<double> m;
        std::vector<double> v;
    };
    std::vector<Slot> slots_;
    AdamWConfig cfg_;
    std::int64_t step_count_ = 0;
};

// lr(t) = eta_min + 0.5*(lr_max - eta_min)*(1 + cos(pi*t/total_steps)).
struct CosineSchedule {
    double lr_max = 1e-4;
    double eta_min = 0.0;
    std::int64_t total_steps = 1;

    double lr_at(std::int64_t t) const;  // t in [0, total_steps]
};

}  // namespace cdae

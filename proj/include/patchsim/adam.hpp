#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "patchsim/errors.hpp"
#include "patchsim/tensor.hpp"

namespace patchsim {

struct AdamConfig {
    float learning_rate = 1e-3f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float epsilon = 1e-8f;
};

// A named view of one trainable tensor; the optimizer state mirrors the
// parameter list it was built from, in order.
struct ParamRef {
    std::string name;
    Tensor* tensor = nullptr;
};

class Adam {
  public:
    Adam() = default;
    explicit Adam(AdamConfig config) : config_(config) {}

    // Steps every parameter using its accumulated grad buffer, then leaves
    // the grads untouched (callers zero them at the start of each batch).
    void step(const std::vector<ParamRef>& params) {
        if (moments_.empty()) init(params);
        if (moments_.size() != params.size())
            throw StateError("optimizer state covers " + std::to_string(moments_.size()) +
                             " parameters, got " + std::to_string(params.size()));
        ++step_count_;
        const double b1 = config_.beta1, b2 = config_.beta2;
        const double bias1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
        const double bias2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
        for (std::size_t p = 0; p < params.size(); ++p) {
            Tensor& t = *params[p].tensor;
            if (!t.has_grad())
                throw StateError("parameter " + params[p].name + " has no gradient buffer");
            Moments& mom = moments_[p];
            if (mom.m.size() != t.values.size())
                throw StateError("optimizer state size mismatch for " + params[p].name);
            for (std::size_t i = 0; i < t.values.size(); ++i) {
                const double g = static_cast<double>(t.grad[i]);
                if (!std::isfinite(g))
                    throw NumericError("non-finite gradient in parameter " + params[p].name);
                mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g;
                mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g * g;
                const double m_hat = mom.m[i] / bias1;
                const double v_hat = mom.v[i] / bias2;
                t.values[i] -= static_cast<float>(config_.learning_rate * m_hat /
                                                  (std::sqrt(v_hat) + config_.epsilon));
            }
        }
    }

    long step_count() const { return step_count_; }
    const AdamConfig& config() const { return config_; }

  private:
    struct Moments {
        std::vector<double> m, v;
    };

    void init(const std::vector<ParamRef>& params) {
        moments_.resize(params.size());
        for (std::size_t p = 0; p < params.size(); ++p) {
            const std::size_t n = params[p].tensor->values.size();
            moments_[p].m.assign(n, 0.0);
            moments_[p].v.assign(n, 0.0);
        }
    }

    AdamConfig config_;
    std::vector<Moments> moments_;
    long step_count_ = 0;
};

}  // namespace patchsim

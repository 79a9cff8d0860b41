#pragma once

#include "sparsesbc/layers.hpp"
#include "sparsesbc/transceiver.hpp"

#include <map>
#include <string>

#include <json.hpp>

namespace sparsesbc {

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

// Gradient-ascent optimizer over a parameter set: params += lr * step(grad).
// SGD is the plain update; Adam keeps per-tensor moment estimates.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerKind kind, double learning_rate) : kind_(kind), lr_(learning_rate) {}

    template <typename Params>
    void ascend(Params& params, Params& grad)
    {
        ++steps_;
        auto p = params.tensors();
        auto g = grad.tensors();
        for (std::size_t i = 0; i < p.size(); ++i) {
            update(p[i].name, *p[i].tensor, *g[i].tensor);
        }
    }

    OptimizerKind kind() const { return kind_; }
    double learning_rate() const { return lr_; }
    long steps() const { return steps_; }

    // Moments are exported as "<prefix><tensor>.m" / ".v" arrays.
    void export_state(const std::string& prefix, std::map<std::string, nn::Matrix<float>>& arrays,
                      nlohmann::json& meta) const;
    void import_state(const std::string& prefix, const std::map<std::string, nn::Matrix<float>>& arrays,
                      const nlohmann::json& meta);

private:
    void update(const std::string& name, nn::Matrix<float>& param, const nn::Matrix<float>& grad);

    OptimizerKind kind_ = OptimizerKind::Sgd;
    double lr_ = 1e-4;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long steps_ = 0;
    std::map<std::string, std::pair<nn::Matrix<float>, nn::Matrix<float>>> moments_;
};

} // namespace sparsesbc

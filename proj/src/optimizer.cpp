#include "sparsesbc/optimizer.hpp"

#include "sparsesbc/error.hpp"

#include <cmath>

namespace sparsesbc {

std::string to_string(OptimizerKind kind)
{
    return kind == OptimizerKind::Sgd ? "sgd" : "adam";
}

OptimizerKind optimizer_kind_from_string(const std::string& name)
{
    if (name == "sgd") {
        return OptimizerKind::Sgd;
    }
    if (name == "adam") {
        return OptimizerKind::Adam;
    }
    throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void Optimizer::update(const std::string& name, nn::Matrix<float>& param, const nn::Matrix<float>& grad)
{
    const auto lr = static_cast<float>(lr_);
    if (kind_ == OptimizerKind::Sgd) {
        param.noalias() += lr * grad;
        return;
    }
    auto [it, inserted] = moments_.try_emplace(name);
    auto& [m, v] = it->second;
    if (inserted) {
        m = nn::Matrix<float>::Zero(grad.rows(), grad.cols());
        v = nn::Matrix<float>::Zero(grad.rows(), grad.cols());
    }
    const auto b1 = static_cast<float>(beta1_);
    const auto b2 = static_cast<float>(beta2_);
    m = b1 * m + (1.0f - b1) * grad;
    v = b2 * v + (1.0f - b2) * grad.cwiseAbs2();
    const auto c1 = static_cast<float>(1.0 - std::pow(beta1_, static_cast<double>(steps_)));
    const auto c2 = static_cast<float>(1.0 - std::pow(beta2_, static_cast<double>(steps_)));
    const auto eps = static_cast<float>(eps_);
    param.array() += lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

void Optimizer::export_state(const std::string& prefix, std::map<std::string, nn::Matrix<float>>& arrays,
                             nlohmann::json& meta) const
{
    meta = {{"kind", to_string(kind_)}, {"learning_rate", lr_}, {"steps", steps_}};
    for (const auto& [name, mv] : moments_) {
        arrays[prefix + name + ".m"] = mv.first;
        arrays[prefix + name + ".v"] = mv.second;
    }
}

void Optimizer::import_state(const std::string& prefix,
                             const std::map<std::string, nn::Matrix<float>>& arrays,
                             const nlohmann::json& meta)
{
    try {
        kind_ = optimizer_kind_from_string(meta.at("kind").get<std::string>());
        lr_ = meta.at("learning_rate").get<double>();
        steps_ = meta.at("steps").get<long>();
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed optimizer state: ") + e.what());
    }
    moments_.clear();
    for (const auto& [key, m] : arrays) {
        if (key.rfind(prefix, 0) != 0 || key.size() < prefix.size() + 2 ||
            key.compare(key.size() - 2, 2, ".m") != 0) {
            continue;
        }
        const std::string name = key.substr(prefix.size(), key.size() - prefix.size() - 2);
        auto v = arrays.find(prefix + name + ".v");
        if (v == arrays.end()) {
            throw CheckpointError("optimizer moment " + name + ".v missing");
        }
        moments_[name] = {m, v->second};
    }
}

} // namespace sparsesbc

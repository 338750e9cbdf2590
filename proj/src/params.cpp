#include "humid/params.hpp"

#include <cmath>
#include <stdexcept>

namespace humid {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
    if (values_.count(name))
        throw std::invalid_argument("ParamStore: duplicate parameter " + name);
    names_.push_back(name);
    return values_.emplace(name, std::move(init)).first->second;
}

Tensor& ParamStore::get(const std::string& name) {
    auto it = values_.find(name);
    if (it == values_.end())
        throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
}

const Tensor& ParamStore::get(const std::string& name) const {
    auto it = values_.find(name);
    if (it == values_.end())
        throw std::out_of_range("ParamStore: unknown parameter " + name);
    return it->second;
}

bool ParamStore::has(const std::string& name) const { return values_.count(name) > 0; }

std::int64_t ParamStore::total_elements() const {
    std::int64_t n = 0;
    for (const auto& [k, v] : values_) n += v.size();
    return n;
}

Var ParamBinding::operator()(const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return it->second;
    Var v = tape_.leaf(store_.get(name), true);
    bound_.emplace(name, v);
    return v;
}

std::map<std::string, Tensor> ParamBinding::gradients() const {
    std::map<std::string, Tensor> out;
    for (const auto& [name, var] : bound_) {
        const Tensor& g = tape_.grad_of(var);
        out.emplace(name, g.data.empty() ? Tensor::zeros(tape_.value(var).shape) : g);
    }
    return out;
}

Tensor init_linear(std::mt19937_64& rng, int fan_out, int fan_in) {
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t = Tensor::zeros({fan_out, fan_in});
    for (double& v : t.data) v = dist(rng);
    return t;
}

Tensor init_embedding(std::mt19937_64& rng, int vocab, int dim) {
    std::normal_distribution<double> dist(0.0, 0.02);
    Tensor t = Tensor::zeros({vocab, dim});
    for (double& v : t.data) v = dist(rng);
    return t;
}

}  // namespace humid

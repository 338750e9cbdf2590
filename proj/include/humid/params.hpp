#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "humid/tensor.hpp"

namespace humid {

// Master copy of all learnable weights, keyed by name. Insertion order is
// kept so iteration (and hence optimizer updates and checkpoints) is
// deterministic.
class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor init);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;

    const std::vector<std::string>& names() const { return names_; }
    std::int64_t total_elements() const;

private:
    std::vector<std::string> names_;
    std::map<std::string, Tensor> values_;
};

// Per-tape view of a ParamStore: binding a name creates (once) a
// requires-grad leaf holding a copy of the master tensor.
class ParamBinding {
public:
    ParamBinding(Tape& tape, ParamStore& store) : tape_(tape), store_(store) {}

    Var operator()(const std::string& name);

    // Gradients of every bound parameter after backward, keyed by name.
    std::map<std::string, Tensor> gradients() const;

private:
    Tape& tape_;
    ParamStore& store_;
    std::map<std::string, Var> bound_;
};

// Glorot-uniform for linear/pointwise maps.
Tensor init_linear(std::mt19937_64& rng, int fan_out, int fan_in);
// normal(0, 0.02) for embedding tables.
Tensor init_embedding(std::mt19937_64& rng, int vocab, int dim);

}  // namespace humid

#pragma once

#include <map>
#include <string>

#include "humid/params.hpp"
#include "humid/tensor.hpp"

namespace humid {

struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    long step_count = 0;
    std::map<std::string, Tensor> first_moment;
    std::map<std::string, Tensor> second_moment;
};

// One bias-corrected Adam update over every gradient entry. Parameters
// without a gradient this step are left untouched. Throws on NaN gradient,
// naming the offending parameter.
void adam_step(ParamStore& params, const std::map<std::string, Tensor>& grads,
               AdamState& state);

struct GradCheckEntry {
    std::string name;
    double max_rel_error = 0.0;
    bool pass = true;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool pass = true;
    double worst() const;
};

// Compares tape gradients of a deterministic scalar-valued function against
// central finite differences. `f` must build its tape from the store via the
// given binding and return the loss Var. `max_probes` limits the number of
// elements probed per parameter (0 = all), sampled deterministically.
GradCheckReport grad_check(
    const std::function<Var(Tape&, ParamBinding&)>& f, ParamStore& params,
    double step = 1e-5, double tol = 1e-3, int max_probes = 0);

}  // namespace humid

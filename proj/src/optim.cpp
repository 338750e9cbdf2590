#include "humid/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace humid {

void adam_step(ParamStore& params, const std::map<std::string, Tensor>& grads,
               AdamState& state) {
    if (state.lr <= 0.0) throw std::invalid_argument("adam_step: lr must be > 0");
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (const auto& [name, g] : grads) {
        Tensor& p = params.get(name);
        if (!p.same_shape(g))
            throw std::invalid_argument("adam_step: gradient shape " + shape_str(g.shape) +
                                        " does not match parameter " + name);
        if (!g.all_finite())
            throw std::runtime_error("adam_step: NaN/Inf gradient for parameter " + name);
        auto mi = state.first_moment.find(name);
        if (mi == state.first_moment.end()) {
            mi = state.first_moment.emplace(name, Tensor::zeros(p.shape)).first;
            state.second_moment.emplace(name, Tensor::zeros(p.shape));
        }
        Tensor& m = mi->second;
        Tensor& v = state.second_moment.at(name);
        for (std::int64_t i = 0; i < p.size(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

double GradCheckReport::worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_error);
    return w;
}

GradCheckReport grad_check(const std::function<Var(Tape&, ParamBinding&)>& f,
                           ParamStore& params, double step, double tol,
                           int max_probes) {
    auto eval = [&]() {
        Tape tape;
        ParamBinding bind(tape, params);
        Var loss = f(tape, bind);
        return tape.value(loss).data[0];
    };

    // analytic gradients
    std::map<std::string, Tensor> analytic;
    {
        Tape tape;
        ParamBinding bind(tape, params);
        Var loss = f(tape, bind);
        tape.backward(loss);
        analytic = bind.gradients();
    }

    GradCheckReport report;
    for (const auto& name : params.names()) {
        auto ai = analytic.find(name);
        if (ai == analytic.end()) continue;  // not touched by f
        Tensor& p = params.get(name);
        const Tensor& g = ai->second;
        GradCheckEntry entry;
        entry.name = name;
        const std::int64_t n = p.size();
        std::int64_t stride = 1;
        if (max_probes > 0 && n > max_probes) stride = (n + max_probes - 1) / max_probes;
        for (std::int64_t i = 0; i < n; i += stride) {
            const double orig = p.data[i];
            p.data[i] = orig + step;
            const double fp = eval();
            p.data[i] = orig - step;
            const double fm = eval();
            p.data[i] = orig;
            const double fd = (fp - fm) / (2.0 * step);
            const double denom = std::max({std::abs(fd), std::abs(g.data[i]), 1e-8});
            const double rel = std::abs(fd - g.data[i]) / denom;
            entry.max_rel_error = std::max(entry.max_rel_error, rel);
        }
        entry.pass = entry.max_rel_error < tol;
        if (!entry.pass) report.pass = false;
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace humid

#pragma once

// Central finite-difference verification of reverse-mode gradients. The
// function under test must be deterministic (dropout off, fixed seeds);
// this is checked by evaluating it twice at the base point.
//
// Losses built on order statistics and counting features are only piecewise
// smooth. Where the base step straddles a kink, the step is refined; if the
// point itself is non-smooth, the analytic value must match one of the
// one-sided slopes (a valid subgradient) instead of the central difference.

#include <functional>
#include <vector>

#include "rtsf/nn/graph.hpp"

namespace rtsf::nn {

struct GradCheckReport {
    double max_rel_error = 0.0;  // over parameters with a valid central difference
    size_t checked = 0;
    size_t kink_points = 0;  // non-smooth points verified against a one-sided slope
    std::string worst_param;
};

// f rebuilds the scalar loss from the current values of `params`.
inline GradCheckReport grad_check(const std::function<Var<double>()>& f,
                                  const std::vector<std::pair<std::string, Var<double>>>& params,
                                  double eps = 1e-4) {
    Var<double> loss = f();
    const double f0 = loss.value().v[0];
    {
        Var<double> again = f();
        if (again.value().v[0] != f0)
            throw UsageError("grad_check requires a deterministic function");
    }
    backward(loss);
    std::vector<std::vector<double>> analytic;
    for (const auto& [name, p] : params) {
        if (!p.requires_grad()) throw UsageError("grad_check parameter without requires_grad");
        analytic.push_back(p.grad().v.empty() ? std::vector<double>(p.value().size(), 0.0)
                                              : p.grad().v);
    }
    GradCheckReport rep;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& vals = params[pi].second.value().v;
        for (size_t i = 0; i < vals.size(); ++i) {
            const double orig = vals[i];
            const double a = analytic[pi][i];
            double best_rel = 0.0;
            double last_lp = 0.0, last_lm = 0.0, last_eps = eps;
            for (int refine = 0; refine < 3; ++refine) {
                const double e = eps / std::pow(4.0, refine);
                vals[i] = orig + e;
                const double lp = f().value().v[0];
                vals[i] = orig - e;
                const double lm = f().value().v[0];
                vals[i] = orig;
                const double numeric = (lp - lm) / (2.0 * e);
                const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
                const double rel = std::abs(a - numeric) / denom;
                last_lp = lp;
                last_lm = lm;
                last_eps = e;
                if (refine == 0 || rel < best_rel) best_rel = rel;
                if (best_rel < 1e-6) break;
            }
            ++rep.checked;
            if (best_rel > 1e-4) {
                // Possibly a kink: accept the adjoint if it matches either
                // one-sided slope at the finest step.
                const double dplus = (last_lp - f0) / last_eps;
                const double dminus = (f0 - last_lm) / last_eps;
                const double mplus =
                    std::abs(a - dplus) / std::max({std::abs(a), std::abs(dplus), 1e-8});
                const double mminus =
                    std::abs(a - dminus) / std::max({std::abs(a), std::abs(dminus), 1e-8});
                if (std::min(mplus, mminus) < 1e-2 && std::min(mplus, mminus) < best_rel) {
                    ++rep.kink_points;
                    continue;
                }
            }
            if (best_rel > rep.max_rel_error) {
                rep.max_rel_error = best_rel;
                rep.worst_param = params[pi].first + "[" + std::to_string(i) + "]";
            }
        }
    }
    return rep;
}

}  // namespace rtsf::nn

#pragma once

#include <functional>
#include <string>

#include "dskreg/params.hpp"

namespace dskreg {

// loss_fn(params, accumulate): returns the objective value; when accumulate
// is true it must leave analytic gradients in the store's gradient slots.
// Must be a deterministic function of the parameter values (frozen noise).
using LossFn = std::function<double(ParamStore&, bool)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_tensor;
    size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    size_t checked = 0;
};

// Central finite differences (f(x+eps) - f(x-eps)) / 2eps against the
// analytic gradients, over every coordinate of every tensor. Relative error
// uses max(|analytic|, |numeric|, 1e-5) as the scale. Throws NumericError if
// two identical evaluations of loss_fn disagree.
GradCheckReport grad_check(ParamStore& params, const LossFn& loss_fn, double eps);

}  // namespace dskreg

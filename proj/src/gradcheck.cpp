#include "dskreg/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "dskreg/errors.hpp"

namespace dskreg {

GradCheckReport grad_check(ParamStore& params, const LossFn& loss_fn, double eps) {
    const double l1 = loss_fn(params, false);
    const double l2 = loss_fn(params, false);
    if (l1 != l2) {
        throw NumericError("grad_check: loss function is not deterministic across evaluations");
    }

    loss_fn(params, true);
    std::vector<std::vector<double>> analytic;
    for (const TensorView& view : params.tensor_views()) {
        analytic.emplace_back(view.grad.begin(), view.grad.end());
    }

    GradCheckReport report;
    auto views = params.tensor_views();
    for (size_t t = 0; t < views.size(); ++t) {
        auto value = views[t].value;
        for (size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + eps;
            const double up = loss_fn(params, false);
            value[i] = saved - eps;
            const double down = loss_fn(params, false);
            value[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[t][i];
            const double scale = std::max({std::fabs(a), std::fabs(numeric), 1e-5});
            const double rel = std::fabs(a - numeric) / scale;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_tensor = views[t].name;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    params.zero_grads();
    return report;
}

}  // namespace dskreg

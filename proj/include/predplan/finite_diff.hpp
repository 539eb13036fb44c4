#pragma once

#include <functional>
#include <vector>

#include "predplan/param.hpp"

namespace predplan {

// Central-difference gradient oracle: (f(x + eps e_i) - f(x - eps e_i)) / 2 eps
// per coordinate. f must be deterministic. Used as the independent check for
// every backward() path; it never touches the tape.
inline std::vector<double> finite_diff_grad(const std::function<double(const ParamVector&)>& f,
                                            const ParamVector& theta, double eps) {
    ParamVector work = theta;
    std::vector<double> grad(theta.size(), 0.0);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double orig = work.values()[i];
        work.values()[i] = orig + eps;
        const double fp = f(work);
        work.values()[i] = orig - eps;
        const double fm = f(work);
        work.values()[i] = orig;
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

// Same oracle over a plain flat vector.
inline std::vector<double> finite_diff_grad_flat(const std::function<double(const std::vector<double>&)>& f,
                                                 const std::vector<double>& x, double eps) {
    std::vector<double> work = x;
    std::vector<double> grad(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = work[i];
        work[i] = orig + eps;
        const double fp = f(work);
        work[i] = orig - eps;
        const double fm = f(work);
        work[i] = orig;
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

}  // namespace predplan

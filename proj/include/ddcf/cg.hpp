#pragma once

#include <cmath>
#include <complex>
#include <string>

#include "errors.hpp"

namespace ddcf {

struct CgOptions {
    int max_iterations = 100;
    double tolerance = 1e-6; // on ||r|| / ||b||
};

struct CgReport {
    int iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

struct NoCgCallback {
    template <class Vec>
    void operator()(int, const Vec&) const {}
};

// Conjugate gradient for a Hermitian positive-definite operator. `Vec` needs
// copy construction, `x.axpy(alpha, y)`, `x *= alpha` and a free
// `inner(a, b)` returning a complex value. Starts from the given x.
template <class Vec, class Op, class Callback = NoCgCallback>
CgReport conjugate_gradient(const Op& op, const Vec& rhs, Vec& x, const CgOptions& options,
                            Callback&& on_iteration = Callback{}) {
    CgReport report;
    const double bnorm = std::sqrt(std::real(inner(rhs, rhs)));
    if (bnorm == 0.0) {
        x *= 0.0;
        report.converged = true;
        return report;
    }
    Vec r = rhs;
    r.axpy(-1.0, op(x));
    Vec p = r;
    double rr = std::real(inner(r, r));
    report.relative_residual = std::sqrt(rr) / bnorm;
    if (!std::isfinite(rr))
        throw NumericalError("conjugate_gradient: non-finite initial residual");
    if (report.relative_residual < options.tolerance) {
        report.converged = true;
        return report;
    }
    for (int it = 0; it < options.max_iterations; ++it) {
        const Vec Ap = op(p);
        const double pAp = std::real(inner(Ap, p));
        if (!std::isfinite(pAp))
            throw NumericalError("conjugate_gradient: non-finite curvature at iteration " + std::to_string(it));
        if (pAp <= 0.0)
            break;
        const double alpha = rr / pAp;
        x.axpy(alpha, p);
        r.axpy(-alpha, Ap);
        const double rr_next = std::real(inner(r, r));
        if (!std::isfinite(rr_next))
            throw NumericalError("conjugate_gradient: non-finite residual at iteration " + std::to_string(it));
        report.iterations = it + 1;
        report.relative_residual = std::sqrt(rr_next) / bnorm;
        on_iteration(report.iterations, static_cast<const Vec&>(x));
        if (report.relative_residual < options.tolerance) {
            report.converged = true;
            break;
        }
        p *= rr_next / rr;
        p.axpy(1.0, r);
        rr = rr_next;
    }
    return report;
}

} // namespace ddcf

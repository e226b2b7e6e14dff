#include "granular/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <vector>

#include "granular/errors.hpp"

namespace granular::quadrature {

namespace {

// Nodes and weights of the 15-point Kronrod extension of the 7-point
// Gauss-Legendre rule on [-1, 1] (QUADPACK dqk15 constants).
constexpr double xgk[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
constexpr double wgk[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
constexpr double wg[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment &o) const { return error < o.error; }
};

Segment eval_gk15(const std::function<double(double)> &f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fv[15];
    fv[7] = f(c);
    for (int j = 0; j < 7; ++j) {
        fv[j] = f(c - h * xgk[j]);
        fv[14 - j] = f(c + h * xgk[j]);
    }
    double result_g = fv[7] * wg[3];
    double result_k = fv[7] * wgk[7];
    for (int j = 0; j < 7; ++j) {
        result_k += wgk[j] * (fv[j] + fv[14 - j]);
        if (j % 2 == 1) result_g += wg[j / 2] * (fv[j] + fv[14 - j]);
    }
    const double mean = 0.5 * result_k;
    double resasc = wgk[7] * std::fabs(fv[7] - mean);
    for (int j = 0; j < 7; ++j)
        resasc += wgk[j] * (std::fabs(fv[j] - mean) + std::fabs(fv[14 - j] - mean));
    resasc *= std::fabs(h);
    const double value = result_k * h;
    // QUADPACK-style sharpened error estimate from the Gauss/Kronrod difference.
    double err = std::fabs((result_k - result_g) * h);
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    return {a, b, value, err};
}

} // namespace

QuadResult gauss_kronrod(const std::function<double(double)> &f, double a, double b,
                         double abs_tol, double rel_tol, int max_intervals) {
    QuadResult out;
    if (a == b) {
        out.converged = true;
        return out;
    }
    std::priority_queue<Segment> queue;
    Segment first = eval_gk15(f, a, b);
    out.evaluations = 15;
    double total = first.value;
    double err = first.error;
    queue.push(first);
    int n = 1;
    auto tol = [&] { return std::max(abs_tol, rel_tol * std::fabs(total)); };
    while (err > tol() && n < max_intervals) {
        Segment worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        Segment left = eval_gk15(f, worst.a, mid);
        Segment right = eval_gk15(f, mid, worst.b);
        out.evaluations += 30;
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
        ++n;
    }
    out.value = total;
    out.error = err;
    out.converged = err <= tol();
    return out;
}

double integrate(const std::function<double(double)> &f, double a, double b,
                 double abs_tol, double rel_tol, int max_intervals) {
    QuadResult r = gauss_kronrod(f, a, b, abs_tol, rel_tol, max_intervals);
    if (!r.converged)
        throw QuadratureError("adaptive Gauss-Kronrod did not converge", r.error);
    return r.value;
}

} // namespace granular::quadrature

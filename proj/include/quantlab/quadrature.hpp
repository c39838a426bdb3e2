#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "quantlab/error.hpp"

namespace quantlab {

struct QuadratureSettings {
    double abs_tol = 1e-8;
    int max_subdivisions = 400;
    double root_tol = 1e-10;

    void validate() const {
        if (!(abs_tol > 0.0)) throw DomainError("quadrature abs_tol must be > 0");
        if (!(root_tol > 0.0)) throw DomainError("quadrature root_tol must be > 0");
        if (max_subdivisions < 1) throw DomainError("quadrature max_subdivisions must be >= 1");
    }
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
    int subdivisions = 0;
};

namespace detail {

// 7-point Gauss / 15-point Kronrod nodes on [-1, 1] (QUADPACK qk15).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
    double a, b, value, error;
    bool operator<(const Segment& o) const { return error < o.error; }
};

template <class F>
Segment gauss_kronrod15(F& f, double a, double b) {
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kKronrodWeights[7];
    double gauss = fc * kGaussWeights[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kKronrodNodes[j];
        const double sum = f(center - dx) + f(center + dx);
        kronrod += kKronrodWeights[j] * sum;
        if (j % 2 == 1) gauss += kGaussWeights[j / 2] * sum;
    }
    kronrod *= half;
    gauss *= half;
    return {a, b, kronrod, std::abs(kronrod - gauss)};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration of f over [a, b], starting from
// `initial_pieces` equal subintervals. Bisects the worst segment until the
// summed error estimate drops below settings.abs_tol.
template <class F>
QuadratureResult integrate(F&& f, double a, double b, const QuadratureSettings& settings,
                           int initial_pieces = 1) {
    std::vector<detail::Segment> heap;
    heap.reserve(initial_pieces + 2 * settings.max_subdivisions);
    const double width = (b - a) / initial_pieces;
    double error_sum = 0.0;
    for (int i = 0; i < initial_pieces; ++i) {
        const double lo = a + i * width;
        const double hi = (i + 1 == initial_pieces) ? b : a + (i + 1) * width;
        heap.push_back(detail::gauss_kronrod15(f, lo, hi));
        error_sum += heap.back().error;
    }
    std::make_heap(heap.begin(), heap.end());

    int subdivisions = 0;
    while (error_sum > settings.abs_tol) {
        if (subdivisions >= settings.max_subdivisions) {
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "quadrature did not converge on [%.6g, %.6g]: error estimate %.3e > "
                          "tolerance %.3e after %d subdivisions",
                          a, b, error_sum, settings.abs_tol, subdivisions);
            throw NumericalError(buf);
        }
        std::pop_heap(heap.begin(), heap.end());
        const detail::Segment worst = heap.back();
        heap.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        heap.push_back(detail::gauss_kronrod15(f, worst.a, mid));
        std::push_heap(heap.begin(), heap.end());
        heap.push_back(detail::gauss_kronrod15(f, mid, worst.b));
        std::push_heap(heap.begin(), heap.end());
        ++subdivisions;
        error_sum = 0.0;
        for (const auto& s : heap) error_sum += s.error;
    }

    // Sum in interval order so the result does not depend on heap layout.
    std::sort(heap.begin(), heap.end(),
              [](const detail::Segment& x, const detail::Segment& y) { return x.a < y.a; });
    QuadratureResult r;
    for (const auto& s : heap) {
        r.value += s.value;
        r.error += s.error;
    }
    r.subdivisions = subdivisions;
    return r;
}

}  // namespace quantlab

#include "quantlab/distributions.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

namespace quantlab {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Tail mass allowed outside the absmax integration range, per side.
constexpr double kTailEpsilon = 1e-12;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Wichura's AS241 (PPND16) for p in (0, 1/2], followed by one Halley step
// against the erfc-based CDF.
double lower_quantile(double p) {
    const double q = p - 0.5;
    double x;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        x = q *
            (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                  6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
                1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
              1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
            (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                  3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
                5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
              4.2313330701600911252e+1) * r + 1.0);
    } else {
        double r = std::sqrt(-std::log(p));
        if (r <= 5.0) {
            r -= 1.6;
            x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                      2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                    3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
                  4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
                (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                      1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                    6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
                  2.05319162663775882187e+0) * r + 1.0);
        } else {
            r -= 5.0;
            x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                      1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                    2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
                  5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
                (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                      1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                    1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                  5.99832206555887937690e-1) * r + 1.0);
        }
        x = -x;
    }
    const double e = normal_cdf(x) - p;
    const double u = e / normal_pdf(x);
    return x - u / (1.0 + 0.5 * x * u);
}

// log of the half-normal CDF, accurate at both ends.
double log_halfnormal_cdf(double m) {
    if (m < 1.0) return std::log(std::erf(m * kInvSqrt2));
    return std::log1p(-std::erfc(m * kInvSqrt2));
}

// Ratio erf(m x / sqrt 2) / erf(m / sqrt 2), i.e. 2 * Psi(m x; m) - 1.
inline double centered_ratio(double m, double x, double inv_erf_m) {
    return std::erf(m * x * kInvSqrt2) * inv_erf_m;
}

}  // namespace

double normal_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("normal_quantile: p must lie in (0, 1), got " + fmt_double(p));
    }
    if (p > 0.5) return -lower_quantile(1.0 - p);
    return lower_quantile(p);
}

double halfnormal_cdf(double m) {
    if (!(m >= 0.0)) throw DomainError("halfnormal_cdf: m must be >= 0, got " + fmt_double(m));
    return std::erf(m * kInvSqrt2);
}

double halfnormal_quantile_upper(double tail) {
    if (!(tail > 0.0 && tail <= 1.0)) {
        throw DomainError("halfnormal_quantile: upper tail must lie in (0, 1], got " +
                          fmt_double(tail));
    }
    if (tail == 1.0) return 0.0;
    return -normal_quantile(0.5 * tail);
}

double halfnormal_quantile(double p) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw DomainError("halfnormal_quantile: p must lie in [0, 1), got " + fmt_double(p));
    }
    if (p == 0.0) return 0.0;
    // For p >= 1/2, 1 - p is exact.
    if (p >= 0.5) return halfnormal_quantile_upper(1.0 - p);
    return normal_quantile(0.5 + 0.5 * p);
}

double trunc_normal_cdf(double x, double m) {
    if (!(m > 0.0)) throw DomainError("trunc_normal_cdf: m must be > 0, got " + fmt_double(m));
    if (x <= -m) return 0.0;
    if (x >= m) return 1.0;
    return 0.5 + 0.5 * std::erf(x * kInvSqrt2) / std::erf(m * kInvSqrt2);
}

double absmax_cdf(double m, int block_size) {
    if (block_size < 1) throw DomainError("block size must be >= 1");
    if (!(m >= 0.0)) throw DomainError("absmax_cdf: m must be >= 0, got " + fmt_double(m));
    if (m == 0.0) return 0.0;
    return std::exp(block_size * log_halfnormal_cdf(m));
}

double absmax_pdf(double m, int block_size) {
    if (block_size < 1) throw DomainError("block size must be >= 1");
    if (!(m >= 0.0)) throw DomainError("absmax_pdf: m must be >= 0, got " + fmt_double(m));
    if (block_size == 1) return 2.0 * normal_pdf(m);
    if (m == 0.0) return 0.0;
    return 2.0 * block_size * std::exp((block_size - 1) * log_halfnormal_cdf(m)) * normal_pdf(m);
}

double absmax_median(int block_size) {
    if (block_size < 1) throw DomainError("block size must be >= 1");
    // (1/2)^(1/B) = 1 - tail with tail = -expm1(-ln 2 / B).
    return halfnormal_quantile_upper(-std::expm1(-std::numbers::ln2 / block_size));
}

// ---------------------------------------------------------------------------
// ScaledMaxDistribution
// ---------------------------------------------------------------------------

ScaledMaxDistribution::ScaledMaxDistribution(int block_size, QuadratureSettings settings)
    : block_size_(block_size), settings_(settings) {
    if (block_size < 1) {
        throw DomainError("block size must be >= 1, got " + std::to_string(block_size));
    }
    settings_.validate();
    m0_ = absmax_median(block_size);
    if (block_size == 1) return;

    // Below m_lo, halfnormal_cdf^(B-1) < eps; above m_hi, P[M > m] < eps.
    m_lo_ = (block_size == 2) ? halfnormal_quantile(kTailEpsilon)
                              : halfnormal_quantile_upper(
                                    -std::expm1(std::log(kTailEpsilon) / (block_size - 1)));
    m_hi_ = -normal_quantile(kTailEpsilon / (2.0 * block_size));

    // The rule is refined until every probe integrand (the mixing density
    // itself, and the CDF and density integrands at a spread of x) is resolved.
    static constexpr std::array<double, 5> kProbeX = {0.1, 0.3, 0.5, 0.7, 0.9};
    constexpr std::size_t kProbes = 1 + 2 * kProbeX.size();
    const int B = block_size_;
    auto probes = [B](double m, std::array<double, kProbes>& out) {
        const double pm = absmax_pdf(m, B);
        const double inv = 1.0 / std::erf(m * kInvSqrt2);
        out[0] = pm;
        for (std::size_t i = 0; i < kProbeX.size(); ++i) {
            const double x = kProbeX[i];
            out[1 + i] = pm * centered_ratio(m, x, inv);
            out[1 + kProbeX.size() + i] = pm * m * normal_pdf(m * x) * inv;
        }
    };

    struct Segment {
        double a, b, error;
    };
    auto segment_error = [&](double a, double b) {
        std::array<double, kProbes> kron{}, gauss{}, vals{}, vals2{};
        const double c = 0.5 * (a + b);
        const double h = 0.5 * (b - a);
        probes(c, vals);
        for (std::size_t p = 0; p < kProbes; ++p) {
            kron[p] = detail::kKronrodWeights[7] * vals[p];
            gauss[p] = detail::kGaussWeights[3] * vals[p];
        }
        for (int j = 0; j < 7; ++j) {
            const double dx = h * detail::kKronrodNodes[j];
            probes(c - dx, vals);
            probes(c + dx, vals2);
            for (std::size_t p = 0; p < kProbes; ++p) {
                const double s = vals[p] + vals2[p];
                kron[p] += detail::kKronrodWeights[j] * s;
                if (j % 2 == 1) gauss[p] += detail::kGaussWeights[j / 2] * s;
            }
        }
        double err = 0.0;
        for (std::size_t p = 0; p < kProbes; ++p) err = std::max(err, h * std::abs(kron[p] - gauss[p]));
        return Segment{a, b, err};
    };

    const double target = settings_.abs_tol / 8.0;
    constexpr int kInitialPieces = 8;
    std::vector<Segment> segs;
    const double width = (m_hi_ - m_lo_) / kInitialPieces;
    for (int i = 0; i < kInitialPieces; ++i) {
        const double hi = (i + 1 == kInitialPieces) ? m_hi_ : m_lo_ + (i + 1) * width;
        segs.push_back(segment_error(m_lo_ + i * width, hi));
    }
    auto by_error = [](const Segment& x, const Segment& y) { return x.error < y.error; };
    std::make_heap(segs.begin(), segs.end(), by_error);
    auto total_error = [&segs] {
        double e = 0.0;
        for (const auto& s : segs) e += s.error;
        return e;
    };
    int subdivisions = 0;
    while (total_error() > target) {
        if (subdivisions >= settings_.max_subdivisions) {
            char buf[256];
            std::snprintf(buf, sizeof buf,
                          "absmax mixing rule for B=%d did not converge: error estimate %.3e > "
                          "%.3e after %d subdivisions",
                          block_size_, total_error(), target, subdivisions);
            throw NumericalError(buf);
        }
        std::pop_heap(segs.begin(), segs.end(), by_error);
        const Segment worst = segs.back();
        segs.pop_back();
        const double mid = 0.5 * (worst.a + worst.b);
        segs.push_back(segment_error(worst.a, mid));
        std::push_heap(segs.begin(), segs.end(), by_error);
        segs.push_back(segment_error(mid, worst.b));
        std::push_heap(segs.begin(), segs.end(), by_error);
        ++subdivisions;
    }
    std::sort(segs.begin(), segs.end(), [](const Segment& x, const Segment& y) { return x.a < y.a; });

    nodes_.reserve(segs.size() * 15);
    double total = 0.0;
    for (const auto& s : segs) {
        const double c = 0.5 * (s.a + s.b);
        const double h = 0.5 * (s.b - s.a);
        auto push = [&](double m, double w) {
            const double mass = h * w * absmax_pdf(m, B);
            nodes_.push_back({m, mass, 1.0 / std::erf(m * kInvSqrt2)});
            total += mass;
        };
        for (int j = 0; j < 7; ++j) push(c - h * detail::kKronrodNodes[j], detail::kKronrodWeights[j]);
        push(c, detail::kKronrodWeights[7]);
        for (int j = 6; j >= 0; --j) push(c + h * detail::kKronrodNodes[j], detail::kKronrodWeights[j]);
    }
    const double expected = absmax_cdf(m_hi_, B) - absmax_cdf(m_lo_, B);
    if (std::abs(total - expected) > settings_.abs_tol) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "absmax mixing rule for B=%d integrates to %.12f, expected %.12f", B, total,
                      expected);
        throw NumericalError(buf);
    }
    for (auto& n : nodes_) n.mass /= total;
}

void ScaledMaxDistribution::require_continuous(const char* what) const {
    if (block_size_ < 2) {
        throw DomainError(std::string(what) +
                          ": block size 1 has no continuous part (X is +-1 with mass 1/2 each)");
    }
}

double ScaledMaxDistribution::continuous_cdf(double x) const {
    require_continuous("continuous_cdf");
    if (!(x >= -1.0 && x <= 1.0)) {
        throw DomainError("continuous_cdf: x must lie in [-1, 1], got " + fmt_double(x));
    }
    if (x == -1.0) return 0.0;
    if (x == 1.0) return 1.0;
    double odd = 0.0;
    for (const auto& n : nodes_) odd += n.mass * centered_ratio(n.m, x, n.inv_erf_m);
    return 0.5 + 0.5 * odd;
}

double ScaledMaxDistribution::continuous_pdf(double x) const {
    require_continuous("continuous_pdf");
    if (!(x > -1.0 && x < 1.0)) {
        throw DomainError("continuous_pdf: x must lie in (-1, 1), got " + fmt_double(x));
    }
    double d = 0.0;
    for (const auto& n : nodes_) d += n.mass * n.m * normal_pdf(n.m * x) * n.inv_erf_m;
    return d;
}

double ScaledMaxDistribution::continuous_quantile(double u) const {
    require_continuous("continuous_quantile");
    if (!(u > 0.0 && u < 1.0)) {
        throw DomainError("continuous_quantile: u must lie in (0, 1), got " + fmt_double(u));
    }
    // Solve H(x) = |s| for the odd part H = 2 G - 1, on x >= 0. Folding onto
    // the upper half first keeps exact complements exactly antisymmetric.
    const double upper = u < 0.5 ? 1.0 - u : u;
    const double target = 2.0 * upper - 1.0;
    const double s = u < 0.5 ? -target : target;
    if (target == 0.0) return 0.0;

    // Starting point from the constant-absmax approximation.
    const double erf_m0 = std::erf(m0_ * kInvSqrt2);
    double x = std::clamp(normal_quantile(0.5 + 0.5 * target * erf_m0) / m0_, 0.0, 1.0);
    double lo = 0.0;
    double hi = 1.0;
    constexpr int kMaxIterations = 200;
    for (int it = 0; it < kMaxIterations; ++it) {
        const double h = 2.0 * continuous_cdf(x) - 1.0 - target;
        if (h == 0.0) return s < 0 ? -x : x;
        if (h < 0.0)
            lo = x;
        else
            hi = x;
        double next = x;
        if (x > 0.0 && x < 1.0) {
            const double slope = 2.0 * continuous_pdf(x);
            if (slope > 0.0) next = x - h / slope;
        }
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double step = std::abs(next - x);
        x = next;
        if (step < settings_.root_tol || hi - lo < settings_.root_tol) return s < 0 ? -x : x;
    }
    throw NumericalError("continuous_quantile did not converge for u=" + fmt_double(u));
}

double ScaledMaxDistribution::cdf(double x) const {
    if (std::isnan(x)) throw DomainError("cdf: x is NaN");
    if (x < -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x == -1.0) return atom_mass();
    if (block_size_ == 1) return 0.5;
    return atom_mass() + continuous_weight() * continuous_cdf(x);
}

double ScaledMaxDistribution::quantile(double p) const {
    const double atom = atom_mass();
    if (std::isnan(p)) throw DomainError("quantile: p is NaN");
    if (p <= atom) {
        throw DomainError("quantile: p=" + fmt_double(p) + " falls in the atom at -1 (mass 1/(2B)=" +
                          fmt_double(atom) + ")");
    }
    if (p >= 1.0 - atom) {
        throw DomainError("quantile: p=" + fmt_double(p) + " falls in the atom at +1 (mass 1/(2B)=" +
                          fmt_double(atom) + ")");
    }
    const double upper = p < 0.5 ? 1.0 - p : p;
    const double x = continuous_quantile(0.5 + 0.5 * ((2.0 * upper - 1.0) / continuous_weight()));
    return p < 0.5 ? -x : x;
}

double ScaledMaxDistribution::approx_cdf(double x) const {
    if (std::isnan(x)) throw DomainError("approx_cdf: x is NaN");
    if (x < -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    if (x == -1.0) return atom_mass();
    return atom_mass() + continuous_weight() * trunc_normal_cdf(x * m0_, m0_);
}

double gb_cdf(double x, int block_size, const QuadratureSettings& qs) {
    return ScaledMaxDistribution(block_size, qs).continuous_cdf(x);
}

double fx_cdf(double x, int block_size, const QuadratureSettings& qs) {
    return ScaledMaxDistribution(block_size, qs).cdf(x);
}

double fx_quantile(double p, int block_size, const QuadratureSettings& qs) {
    return ScaledMaxDistribution(block_size, qs).quantile(p);
}

double fx_cdf_approx(double x, int block_size) {
    if (block_size < 1) throw DomainError("block size must be >= 1");
    if (std::isnan(x)) throw DomainError("approx_cdf: x is NaN");
    if (x < -1.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double atom = 0.5 / block_size;
    if (x == -1.0) return atom;
    const double m0 = absmax_median(block_size);
    return atom + (1.0 - 1.0 / block_size) * trunc_normal_cdf(x * m0, m0);
}

}  // namespace quantlab

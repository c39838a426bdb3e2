#pragma once

#include <span>
#include <utility>
#include <vector>

#include "quantlab/quadrature.hpp"

namespace quantlab {

// ---------------------------------------------------------------------------
// Standard normal, half-normal and centered truncated normal.
// ---------------------------------------------------------------------------

double normal_pdf(double x);

/// Standard normal CDF, computed from erfc so the lower tail keeps full
/// relative precision.
double normal_cdf(double x);

/// Inverse of normal_cdf on (0, 1). Exactly antisymmetric: for p > 1/2 the
/// result is -normal_quantile(1 - p). Throws DomainError outside (0, 1).
double normal_quantile(double p);

/// CDF of |Z|, Z ~ N(0,1): 2*Phi(m) - 1. Throws DomainError for m < 0.
double halfnormal_cdf(double m);

/// Inverse half-normal CDF on [0, 1).
double halfnormal_quantile(double p);

/// Same as halfnormal_quantile(1 - tail), without forming 1 - tail.
double halfnormal_quantile_upper(double tail);

/// CDF at x of N(0,1) truncated to [-m, m]. Throws DomainError for m <= 0.
double trunc_normal_cdf(double x, double m);

// ---------------------------------------------------------------------------
// Law of the block absmax M = max |Z_i| over B standard normals.
// ---------------------------------------------------------------------------

/// P[M <= m] = halfnormal_cdf(m)^B.
double absmax_cdf(double m, int block_size);

/// Density of M: 2B * halfnormal_cdf(m)^(B-1) * phi(m).
double absmax_pdf(double m, int block_size);

/// Median of M: the m with halfnormal_cdf(m)^B = 1/2.
double absmax_median(int block_size);

// ---------------------------------------------------------------------------
// Distribution of X = Z_i / M for one entry of an absmax-normalized block.
//
// X has atoms of mass 1/(2B) at -1 and +1 (the entry that attains the
// absmax) and a continuous part on (-1, 1) with weight 1 - 1/B whose CDF is
//
//   G_B(x) = integral over m of p_M(m) * Psi(m x; m)
//
// where Psi(.; m) is the CDF of N(0,1) truncated to [-m, m].
// ---------------------------------------------------------------------------

class ScaledMaxDistribution {
public:
    /// Builds the mixing rule over m. Throws DomainError for block_size < 1 or
    /// invalid settings, NumericalError if the mixing density cannot be
    /// resolved within settings.max_subdivisions.
    explicit ScaledMaxDistribution(int block_size, QuadratureSettings settings = {});

    int block_size() const { return block_size_; }
    const QuadratureSettings& settings() const { return settings_; }
    double atom_mass() const { return 0.5 / block_size_; }
    double continuous_weight() const { return 1.0 - 1.0 / block_size_; }

    /// Integration limits [m_lo, m_hi] for the absmax; the omitted tail mass of
    /// p_M is below 1e-10.
    std::pair<double, double> absmax_range() const { return {m_lo_, m_hi_}; }

    /// Number of nodes in the cached mixing rule.
    std::size_t rule_size() const { return nodes_.size(); }

    /// G_B(x) for x in [-1, 1]. Requires block_size >= 2.
    double continuous_cdf(double x) const;
    /// G_B'(x) for x in (-1, 1). Requires block_size >= 2.
    double continuous_pdf(double x) const;
    /// Inverse of G_B on (0, 1).
    double continuous_quantile(double u) const;

    /// F_X(x; B): right-continuous mixed CDF.
    double cdf(double x) const;
    /// Inverse of F_X on the open interval (1/(2B), 1 - 1/(2B)).
    double quantile(double p) const;

    /// Closed-form approximation that replaces M by m0 = halfnormal_quantile(2^(-1/B)).
    double approx_cdf(double x) const;
    double approx_m0() const { return m0_; }

    /// Integral of p_M(m) * f(m) over the absmax range, using the cached rule
    /// normalized to unit total mass.
    template <class F>
    double expect_over_absmax(F&& f) const {
        double sum = 0.0;
        for (const auto& n : nodes_) sum += n.mass * f(n.m);
        return sum;
    }

private:
    struct Node {
        double m;
        double mass;       // quadrature weight * p_M(m), normalized
        double inv_erf_m;  // 1 / erf(m / sqrt 2)
    };

    void require_continuous(const char* what) const;

    int block_size_;
    QuadratureSettings settings_;
    double m_lo_ = 0.0;
    double m_hi_ = 0.0;
    double m0_ = 0.0;
    std::vector<Node> nodes_;
};

// Free-function forms; each builds a ScaledMaxDistribution internally.
double gb_cdf(double x, int block_size, const QuadratureSettings& qs = {});
double fx_cdf(double x, int block_size, const QuadratureSettings& qs = {});
double fx_quantile(double p, int block_size, const QuadratureSettings& qs = {});
double fx_cdf_approx(double x, int block_size);

}  // namespace quantlab

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "quantlab/distributions.hpp"

namespace quantlab {

enum class CodeKind {
    nf4_quantile_of_average,
    nf4_average_of_quantile,
    af4,
    balanced,
    balanced_with_endpoints,
    custom,
};

std::string_view to_string(CodeKind kind);
CodeKind code_kind_from_string(std::string_view name);

inline constexpr std::size_t kCodeSize = 16;

/// An ordered 4-bit codebook q_1 < ... < q_16 in [-1, 1].
struct Code16 {
    std::array<double, kCodeSize> values{};
    CodeKind kind = CodeKind::custom;
    std::optional<int> block_size;
    nlohmann::json params = nlohmann::json::object();

    /// Throws DomainError naming the first violated invariant.
    void validate() const;
    bool contains_exact(double v) const;
};

/// Interval boundaries b_1 <= ... <= b_17 partitioning [-1, 1].
struct BinEdges {
    std::array<double, kCodeSize + 1> edges{};
    std::optional<int> block_size;

    void validate() const;
};

// ---------------------------------------------------------------------------
// NF4
// ---------------------------------------------------------------------------

enum class Nf4Variant {
    /// Quantile of evenly spaced probabilities; matches the bitsandbytes table.
    quantile_of_average,
    /// Average of the quantiles obtained from the two offset grids 1/32 and
    /// 1/30 whose average gives the reference offset.
    average_of_quantile,
};

/// Offset delta = (1/32 + 1/30) / 2 used by the NF4 construction.
double nf4_offset();

Code16 nf4_code(Nf4Variant variant = Nf4Variant::quantile_of_average);

// ---------------------------------------------------------------------------
// AF4: k-medians stationarity (shooting method)
// ---------------------------------------------------------------------------

/// Given consecutive code values a_prev < a_cur, returns a_next such that
/// a_cur is the median of the F_X mass between the midpoints
/// (a_prev + a_cur)/2 and (a_cur + a_next)/2.
///
/// Throws EscapedSupport if the required mass runs into the atom at +1, and
/// DomainError on ordering violations.
double stationarity_step(double a_prev, double a_cur, const ScaledMaxDistribution& dist);
double stationarity_step(double a_prev, double a_cur, int block_size);

/// F(a_cur) - F(mid_lo) - (F(mid_hi) - F(a_cur)), the signed imbalance of
/// mass on either side of a_cur within its nearest-value bin.
double median_residual(double a_prev, double a_cur, double a_next,
                       const ScaledMaxDistribution& dist);

struct Af4Options {
    /// Bisection stops when |endpoint reached - target| falls below this.
    double shoot_tol = 1e-9;
    /// Seeds scanned to bracket the shooting residual.
    int scan_points = 64;
    QuadratureSettings quadrature{};
    std::stop_token stop{};
};

/// AF4-B: -1, 0 and 1 fixed; every other value satisfies the median condition
/// under F_X(.; B). Throws ConstructionError when the residual cannot be
/// bracketed (or is bracketed more than once), Cancelled on stop request.
Code16 af4_code(int block_size, const Af4Options& options = {});

// ---------------------------------------------------------------------------
// Uniform-usage codes
// ---------------------------------------------------------------------------

/// Edges b_k = F_X^{-1}((k-1)/16) so every bin holds mass 1/16. B >= 9.
BinEdges uniform_bins(int block_size, const QuadratureSettings& qs = {});

/// Reflection recurrence q_k = 2 b_k - q_{k-1}, starting from q_1 = seed.
/// Throws ConstructionError naming the first index that escapes its bin.
Code16 balanced_code(double q1_seed, const BinEdges& bins);

struct SeedInterval {
    double lo = 0.0;
    double hi = 0.0;
    int feasible_points = 0;
    double midpoint() const { return 0.5 * (lo + hi); }
};

/// Scans `scan_points` seeds over [b_1, b_2] and returns the span of seeds
/// that yield a feasible balanced code, or nullopt if none does.
std::optional<SeedInterval> feasible_seed_interval(const BinEdges& bins, int scan_points = 1024);

/// Balanced code at the midpoint of the feasible seed interval.
Code16 balanced_code(int block_size, const QuadratureSettings& qs = {});

/// Balanced code with the values nearest -1, 0 and 1 replaced by exactly
/// those values.
Code16 balanced_code_with_endpoints(int block_size, const QuadratureSettings& qs = {});

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

/// E[min_j |X - a_j|] for X ~ F_X(.; B).
double expected_l1(const Code16& code, const ScaledMaxDistribution& dist);
double expected_l1(const Code16& code, int block_size, const QuadratureSettings& qs = {});

/// E[M * min_j |X - a_j|]: expected absolute reconstruction error per element
/// when blocks of B standard normal values are quantized with `code`.
double expected_abs_error(const Code16& code, const ScaledMaxDistribution& dist);

/// F_X mass of each value's nearest-value region (ties at a midpoint go to
/// the lower value, matching the quantizer).
std::array<double, kCodeSize> expected_usage(const Code16& code, const ScaledMaxDistribution& dist);

// ---------------------------------------------------------------------------
// code16/v1 files
// ---------------------------------------------------------------------------

std::string code_to_string(const Code16& code);
Code16 code_from_string(std::string_view text);
void code_write(const Code16& code, const std::filesystem::path& path);
Code16 code_read(const std::filesystem::path& path);

}  // namespace quantlab

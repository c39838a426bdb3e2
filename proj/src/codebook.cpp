#include "quantlab/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace quantlab {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void check_stop(const std::stop_token& stop) {
    if (stop.stop_requested()) throw Cancelled();
}

}  // namespace

std::string_view to_string(CodeKind kind) {
    switch (kind) {
        case CodeKind::nf4_quantile_of_average: return "nf4_quantile_of_average";
        case CodeKind::nf4_average_of_quantile: return "nf4_average_of_quantile";
        case CodeKind::af4: return "af4";
        case CodeKind::balanced: return "balanced";
        case CodeKind::balanced_with_endpoints: return "balanced_with_endpoints";
        case CodeKind::custom: return "custom";
    }
    return "custom";
}

CodeKind code_kind_from_string(std::string_view name) {
    for (auto k : {CodeKind::nf4_quantile_of_average, CodeKind::nf4_average_of_quantile,
                   CodeKind::af4, CodeKind::balanced, CodeKind::balanced_with_endpoints,
                   CodeKind::custom}) {
        if (to_string(k) == name) return k;
    }
    throw DomainError("unknown code kind '" + std::string(name) + "'");
}

void Code16::validate() const {
    for (std::size_t j = 0; j < kCodeSize; ++j) {
        const double v = values[j];
        if (!std::isfinite(v) || v < -1.0 || v > 1.0) {
            throw DomainError("code value q_" + std::to_string(j + 1) + " = " + fmt_double(v) +
                              " is outside [-1, 1]");
        }
    }
    for (std::size_t j = 0; j + 1 < kCodeSize; ++j) {
        if (!(values[j] < values[j + 1])) {
            throw DomainError("code values not strictly increasing at index " +
                              std::to_string(j + 1) + ": q_" + std::to_string(j + 1) + " = " +
                              fmt_double(values[j]) + ", q_" + std::to_string(j + 2) + " = " +
                              fmt_double(values[j + 1]));
        }
    }
    const bool anchored = kind == CodeKind::nf4_quantile_of_average ||
                          kind == CodeKind::nf4_average_of_quantile || kind == CodeKind::af4;
    if (anchored && (values[0] != -1.0 || values[7] != 0.0 || values[15] != 1.0)) {
        throw DomainError(std::string(to_string(kind)) + " code must have q_1 = -1, q_8 = 0, q_16 = 1");
    }
    if (kind == CodeKind::balanced_with_endpoints &&
        !(contains_exact(-1.0) && contains_exact(0.0) && contains_exact(1.0))) {
        throw DomainError("balanced_with_endpoints code must contain -1, 0 and 1");
    }
    const bool needs_b = kind == CodeKind::af4 || kind == CodeKind::balanced ||
                         kind == CodeKind::balanced_with_endpoints;
    if (needs_b && !block_size) {
        throw DomainError(std::string(to_string(kind)) + " code requires a block size");
    }
    if (block_size && *block_size < 1) throw DomainError("code block size must be >= 1");
}

bool Code16::contains_exact(double v) const {
    return std::find(values.begin(), values.end(), v) != values.end();
}

void BinEdges::validate() const {
    if (edges.front() != -1.0 || edges.back() != 1.0) {
        throw DomainError("bin edges must start at -1 and end at 1");
    }
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        if (!(edges[k] <= edges[k + 1])) {
            throw DomainError("bin edges decrease at index " + std::to_string(k + 1));
        }
    }
}

// ---------------------------------------------------------------------------
// NF4
// ---------------------------------------------------------------------------

double nf4_offset() { return 0.5 * (1.0 / 32.0 + 1.0 / 30.0); }

namespace {

// Unnormalized NF4 values for one offset. Both halves are built from lower
// tail probabilities so that q~_1 = -q~_16 exactly.
std::array<double, kCodeSize> nf4_raw(double delta) {
    std::array<double, kCodeSize> q{};
    // p_1..p_8: 8 evenly spaced probabilities from delta to 1/2.
    for (int i = 0; i < 7; ++i) q[i] = normal_quantile(delta + i * (0.5 - delta) / 7.0);
    q[7] = 0.0;
    // r_9..r_16: evenly spaced from 1/2 to 1 - delta; 1 - r_i = delta + (16-i)(1/2-delta)/8.
    for (int i = 9; i <= 16; ++i) q[i - 1] = -normal_quantile(delta + (16 - i) * (0.5 - delta) / 8.0);
    return q;
}

}  // namespace

Code16 nf4_code(Nf4Variant variant) {
    std::array<double, kCodeSize> raw{};
    Code16 code;
    if (variant == Nf4Variant::quantile_of_average) {
        raw = nf4_raw(nf4_offset());
        code.kind = CodeKind::nf4_quantile_of_average;
        code.params["offset"] = nf4_offset();
    } else {
        const auto a = nf4_raw(1.0 / 32.0);
        const auto b = nf4_raw(1.0 / 30.0);
        for (std::size_t j = 0; j < kCodeSize; ++j) raw[j] = 0.5 * (a[j] + b[j]);
        code.kind = CodeKind::nf4_average_of_quantile;
        code.params["offsets"] = {1.0 / 32.0, 1.0 / 30.0};
    }
    double scale = 0.0;
    for (double v : raw) scale = std::max(scale, std::abs(v));
    for (std::size_t j = 0; j < kCodeSize; ++j) code.values[j] = raw[j] / scale;
    code.params["max_abs_unnormalized"] = scale;
    code.validate();
    return code;
}

// ---------------------------------------------------------------------------
// Stationarity recurrence
// ---------------------------------------------------------------------------

namespace {

// Returns nullopt when the required mass reaches the atom at +1.
std::optional<double> try_step(double a_prev, double a_cur, const ScaledMaxDistribution& dist) {
    const double mid = 0.5 * (a_prev + a_cur);
    const double rho = 2.0 * dist.cdf(a_cur) - dist.cdf(mid);
    if (rho >= 1.0 - dist.atom_mass()) return std::nullopt;
    return 2.0 * dist.quantile(rho) - a_cur;
}

void check_step_args(double a_prev, double a_cur) {
    if (!(a_prev < a_cur)) {
        throw DomainError("stationarity_step: need a_prev < a_cur, got " + fmt_double(a_prev) +
                          " and " + fmt_double(a_cur));
    }
    if (!(0.5 * (a_prev + a_cur) > -1.0) || !(a_cur < 1.0)) {
        throw DomainError("stationarity_step: values must satisfy (a_prev+a_cur)/2 > -1 and a_cur < 1");
    }
}

}  // namespace

double stationarity_step(double a_prev, double a_cur, const ScaledMaxDistribution& dist) {
    check_step_args(a_prev, a_cur);
    if (dist.block_size() < 2) throw DomainError("stationarity_step: block size must be >= 2");
    auto next = try_step(a_prev, a_cur, dist);
    if (!next) {
        throw EscapedSupport("stationarity_step escaped the support: mass needed above a_cur=" +
                             fmt_double(a_cur) + " reaches the atom at +1 (seed too large)");
    }
    return *next;
}

double stationarity_step(double a_prev, double a_cur, int block_size) {
    return stationarity_step(a_prev, a_cur, ScaledMaxDistribution(block_size));
}

double median_residual(double a_prev, double a_cur, double a_next, const ScaledMaxDistribution& dist) {
    const double f = dist.cdf(a_cur);
    return (f - dist.cdf(0.5 * (a_prev + a_cur))) - (dist.cdf(0.5 * (a_cur + a_next)) - f);
}

// ---------------------------------------------------------------------------
// AF4
// ---------------------------------------------------------------------------

namespace {

struct Trajectory {
    std::vector<double> values;  // start, seed, ..., endpoint
    double residual = std::numeric_limits<double>::infinity();
    bool escaped = false;
    bool monotone = true;
};

// Iterates the recurrence `steps` times from (start, seed); the last value is
// compared with `target`. Escapes count as overshoot (+inf residual).
Trajectory shoot(double start, double seed, double target, int steps,
                 const ScaledMaxDistribution& dist) {
    Trajectory t;
    t.values = {start, seed};
    for (int k = 0; k < steps; ++k) {
        const double prev = t.values[t.values.size() - 2];
        const double cur = t.values.back();
        if (cur >= 1.0) {
            t.escaped = true;
            return t;
        }
        auto next = try_step(prev, cur, dist);
        if (!next) {
            t.escaped = true;
            return t;
        }
        if (!(*next > cur)) t.monotone = false;
        t.values.push_back(*next);
    }
    t.residual = t.values.back() - target;
    return t;
}

struct ShootResult {
    Trajectory trajectory;
    double seed;
    int bisections;
};

ShootResult solve_side(double start, double target, int steps, const ScaledMaxDistribution& dist,
                       const Af4Options& opt, const char* side) {
    const int n = opt.scan_points;
    std::vector<double> seeds(n);
    std::vector<Trajectory> scan(n);
    for (int i = 0; i < n; ++i) {
        check_stop(opt.stop);
        seeds[i] = start + (target - start) * (i + 1) / (n + 1);
        scan[i] = shoot(start, seeds[i], target, steps, dist);
    }

    struct Bracket {
        double lo, hi;
        bool lo_negative;
    };
    std::vector<Bracket> brackets;
    for (int i = 0; i + 1 < n; ++i) {
        const double r0 = scan[i].residual;
        const double r1 = scan[i + 1].residual;
        if (r0 == 0.0) {
            brackets.push_back({seeds[i], seeds[i], true});
            continue;
        }
        if ((r0 < 0.0) != (r1 < 0.0) && scan[i].monotone && scan[i + 1].monotone) {
            brackets.push_back({seeds[i], seeds[i + 1], r0 < 0.0});
        }
    }
    if (brackets.empty()) {
        throw ConstructionError(std::string("af4 shooting (") + side + ", B=" +
                                std::to_string(dist.block_size()) +
                                "): residual has no sign change over seeds [" +
                                fmt_double(seeds.front()) + ", " + fmt_double(seeds.back()) + "]");
    }
    if (brackets.size() > 1) {
        std::string msg = std::string("af4 shooting (") + side + ", B=" +
                          std::to_string(dist.block_size()) + "): multiple solutions bracketed:";
        for (const auto& b : brackets) msg += " [" + fmt_double(b.lo) + ", " + fmt_double(b.hi) + "]";
        throw ConstructionError(msg);
    }

    Bracket b = brackets.front();
    double seed = b.lo;
    Trajectory best = shoot(start, seed, target, steps, dist);
    int bisections = 0;
    while (std::abs(best.residual) >= opt.shoot_tol) {
        check_stop(opt.stop);
        if (b.hi - b.lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(b.hi) ||
            bisections > 200) {
            throw ConstructionError(std::string("af4 shooting (") + side +
                                    ") stalled: seed interval collapsed at " + fmt_double(seed) +
                                    " with residual " + fmt_double(best.residual));
        }
        seed = 0.5 * (b.lo + b.hi);
        best = shoot(start, seed, target, steps, dist);
        if ((best.residual < 0.0) == b.lo_negative)
            b.lo = seed;
        else
            b.hi = seed;
        ++bisections;
    }
    return {best, seed, bisections};
}

}  // namespace

Code16 af4_code(int block_size, const Af4Options& options) {
    if (block_size < 2) throw DomainError("af4 requires block size >= 2, got " + std::to_string(block_size));
    if (options.scan_points < 2) throw DomainError("af4 scan_points must be >= 2");
    if (!(options.shoot_tol > 0.0)) throw DomainError("af4 shoot_tol must be > 0");
    const ScaledMaxDistribution dist(block_size, options.quadrature);

    // a_1 = -1 and seed a_2; six steps reach a_8, which must land on 0.
    const auto neg = solve_side(-1.0, 0.0, 6, dist, options, "negative side");
    // a_8 = 0 and seed a_9; seven steps reach a_16, which must land on 1.
    const auto pos = solve_side(0.0, 1.0, 7, dist, options, "positive side");

    Code16 code;
    code.kind = CodeKind::af4;
    code.block_size = block_size;
    for (int j = 0; j < 7; ++j) code.values[j] = neg.trajectory.values[j];
    code.values[0] = -1.0;
    code.values[7] = 0.0;
    for (int j = 1; j < 8; ++j) code.values[7 + j] = pos.trajectory.values[j];
    code.values[15] = 1.0;

    code.params["seed_a2"] = neg.seed;
    code.params["seed_a9"] = pos.seed;
    code.params["endpoint_residual_a8"] = neg.trajectory.residual;
    code.params["endpoint_residual_a16"] = pos.trajectory.residual;
    code.params["shoot_tol"] = options.shoot_tol;
    code.params["scan_points"] = options.scan_points;
    code.params["quad_abs_tol"] = options.quadrature.abs_tol;
    code.params["root_tol"] = options.quadrature.root_tol;
    try {
        code.validate();
    } catch (const DomainError& e) {
        throw ConstructionError(std::string("af4 produced an invalid code: ") + e.what());
    }
    return code;
}

// ---------------------------------------------------------------------------
// Uniform-usage codes
// ---------------------------------------------------------------------------

BinEdges uniform_bins(int block_size, const QuadratureSettings& qs) {
    if (block_size < 9) {
        throw DomainError("block size must be >= 9 for uniform bins (atom mass 1/(2B) must fit in "
                          "a 1/16 bin), got " + std::to_string(block_size));
    }
    const ScaledMaxDistribution dist(block_size, qs);
    BinEdges bins;
    bins.block_size = block_size;
    bins.edges[0] = -1.0;
    bins.edges[16] = 1.0;
    bins.edges[8] = 0.0;
    for (int k = 1; k < 8; ++k) {
        bins.edges[k] = dist.quantile(k / 16.0);
        bins.edges[16 - k] = -bins.edges[k];
    }
    bins.validate();
    return bins;
}

namespace {

// Index (1-based) of the first value violating feasibility, or 0 if feasible.
int balanced_violation(const std::array<double, kCodeSize>& q, const BinEdges& bins) {
    for (std::size_t k = 0; k < kCodeSize; ++k) {
        if (q[k] < bins.edges[k] || q[k] > bins.edges[k + 1] || q[k] < -1.0 || q[k] > 1.0) {
            return static_cast<int>(k) + 1;
        }
        if (k > 0 && !(q[k - 1] < q[k])) return static_cast<int>(k) + 1;
    }
    return 0;
}

std::array<double, kCodeSize> reflect(double seed, const BinEdges& bins) {
    std::array<double, kCodeSize> q{};
    q[0] = seed;
    for (std::size_t k = 1; k < kCodeSize; ++k) q[k] = 2.0 * bins.edges[k] - q[k - 1];
    return q;
}

}  // namespace

Code16 balanced_code(double q1_seed, const BinEdges& bins) {
    bins.validate();
    if (!(q1_seed >= bins.edges[0] && q1_seed <= bins.edges[1])) {
        throw DomainError("balanced_code: seed " + fmt_double(q1_seed) + " outside first bin [" +
                          fmt_double(bins.edges[0]) + ", " + fmt_double(bins.edges[1]) + "]");
    }
    const auto q = reflect(q1_seed, bins);
    if (int bad = balanced_violation(q, bins)) {
        throw ConstructionError("balanced_code: seed " + fmt_double(q1_seed) +
                                " is infeasible; q_" + std::to_string(bad) + " = " +
                                fmt_double(q[bad - 1]) + " escapes its bin [" +
                                fmt_double(bins.edges[bad - 1]) + ", " +
                                fmt_double(bins.edges[bad]) + "]");
    }
    Code16 code;
    // Edges not tied to a block size give a plain custom code.
    code.kind = bins.block_size ? CodeKind::balanced : CodeKind::custom;
    code.block_size = bins.block_size;
    code.values = q;
    code.params["q1_seed"] = q1_seed;
    code.validate();
    return code;
}

std::optional<SeedInterval> feasible_seed_interval(const BinEdges& bins, int scan_points) {
    bins.validate();
    if (scan_points < 2) throw DomainError("feasible_seed_interval: scan_points must be >= 2");
    std::optional<SeedInterval> out;
    const double lo = bins.edges[0];
    const double hi = bins.edges[1];
    for (int i = 0; i < scan_points; ++i) {
        const double seed = lo + (hi - lo) * i / (scan_points - 1);
        if (balanced_violation(reflect(seed, bins), bins) != 0) continue;
        if (!out) out = SeedInterval{seed, seed, 0};
        out->lo = std::min(out->lo, seed);
        out->hi = std::max(out->hi, seed);
        ++out->feasible_points;
    }
    return out;
}

Code16 balanced_code(int block_size, const QuadratureSettings& qs) {
    const auto bins = uniform_bins(block_size, qs);
    const auto interval = feasible_seed_interval(bins);
    if (!interval) {
        throw ConstructionError("balanced_code: no feasible q_1 seed found for B=" +
                                std::to_string(block_size) + " in [" + fmt_double(bins.edges[0]) +
                                ", " + fmt_double(bins.edges[1]) + "]");
    }
    Code16 code = balanced_code(interval->midpoint(), bins);
    code.params["feasible_seed_lo"] = interval->lo;
    code.params["feasible_seed_hi"] = interval->hi;
    code.params["feasible_points"] = interval->feasible_points;
    code.params["bin_edges"] = bins.edges;
    return code;
}

Code16 balanced_code_with_endpoints(int block_size, const QuadratureSettings& qs) {
    Code16 code = balanced_code(block_size, qs);
    auto nearest = [&code](double target) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < kCodeSize; ++j) {
            if (std::abs(code.values[j] - target) < std::abs(code.values[best] - target)) best = j;
        }
        return best;
    };
    const std::size_t lo = nearest(-1.0);
    const std::size_t mid = nearest(0.0);
    const std::size_t hi = nearest(1.0);
    code.params["replaced_indices"] = {lo + 1, mid + 1, hi + 1};
    code.params["replaced_values"] = {code.values[lo], code.values[mid], code.values[hi]};
    code.values[lo] = -1.0;
    code.values[mid] = 0.0;
    code.values[hi] = 1.0;
    code.kind = CodeKind::balanced_with_endpoints;
    try {
        code.validate();
    } catch (const DomainError& e) {
        throw ConstructionError(std::string("balanced_with_endpoints: ") + e.what());
    }
    return code;
}

// ---------------------------------------------------------------------------
// Expected L1 error and usage
// ---------------------------------------------------------------------------

namespace {

double nearest_distance(const Code16& code, double x) {
    double d = std::numeric_limits<double>::infinity();
    for (double v : code.values) d = std::min(d, std::abs(x - v));
    return d;
}

// E[min_j |X - a_j| | M = m] for a non-extreme entry, which is z/m with
// z ~ N(0,1) truncated to (-m, m). Over z in [alpha, beta]:
//   int phi = Phi(beta) - Phi(alpha),  int z phi = phi(alpha) - phi(beta).
class ConditionalL1 {
public:
    explicit ConditionalL1(const Code16& code) : a_(code.values) {
        for (std::size_t j = 0; j < kCodeSize; ++j) {
            lo_[j] = j == 0 ? -1.0 : 0.5 * (a_[j - 1] + a_[j]);
            hi_[j] = j + 1 == kCodeSize ? 1.0 : 0.5 * (a_[j] + a_[j + 1]);
        }
    }

    double operator()(double m) const {
        double total = 0.0;
        for (std::size_t j = 0; j < kCodeSize; ++j) {
            const double c = std::clamp(a_[j], lo_[j], hi_[j]);
            const double zl = m * lo_[j], zc = m * c, zh = m * hi_[j];
            const double phi_l = normal_pdf(zl), phi_c = normal_pdf(zc), phi_h = normal_pdf(zh);
            const double mass_below = 0.5 * (std::erf(zc * kInvSqrt2) - std::erf(zl * kInvSqrt2));
            const double mass_above = 0.5 * (std::erf(zh * kInvSqrt2) - std::erf(zc * kInvSqrt2));
            total += a_[j] * mass_below - (phi_l - phi_c) / m;
            total += (phi_c - phi_h) / m - a_[j] * mass_above;
        }
        return total / std::erf(m * kInvSqrt2);
    }

private:
    const std::array<double, kCodeSize>& a_;
    std::array<double, kCodeSize> lo_{}, hi_{};
};

}  // namespace

double expected_l1(const Code16& code, const ScaledMaxDistribution& dist) {
    code.validate();
    const double atoms = dist.atom_mass() * (nearest_distance(code, -1.0) + nearest_distance(code, 1.0));
    if (dist.block_size() == 1) return atoms;
    const ConditionalL1 conditional(code);
    return atoms + dist.continuous_weight() * dist.expect_over_absmax(conditional);
}

double expected_abs_error(const Code16& code, const ScaledMaxDistribution& dist) {
    code.validate();
    if (dist.block_size() < 2) throw DomainError("expected_abs_error requires block size >= 2");
    const ConditionalL1 conditional(code);
    const double mean_m = dist.expect_over_absmax([](double m) { return m; });
    const double atoms = dist.atom_mass() * (nearest_distance(code, -1.0) + nearest_distance(code, 1.0));
    return atoms * mean_m +
           dist.continuous_weight() * dist.expect_over_absmax([&](double m) { return m * conditional(m); });
}

double expected_l1(const Code16& code, int block_size, const QuadratureSettings& qs) {
    if (block_size < 2) throw DomainError("expected_l1 requires block size >= 2");
    return expected_l1(code, ScaledMaxDistribution(block_size, qs));
}

std::array<double, kCodeSize> expected_usage(const Code16& code, const ScaledMaxDistribution& dist) {
    code.validate();
    std::array<double, kCodeSize> usage{};
    double below = 0.0;
    for (std::size_t j = 0; j < kCodeSize; ++j) {
        const double upto = j + 1 == kCodeSize ? 1.0 : dist.cdf(0.5 * (code.values[j] + code.values[j + 1]));
        usage[j] = upto - below;
        below = upto;
    }
    return usage;
}

// ---------------------------------------------------------------------------
// code16/v1 serialization
// ---------------------------------------------------------------------------

std::string code_to_string(const Code16& code) {
    code.validate();
    std::ostringstream out;
    out << "{\n  \"format\": \"code16/v1\",\n";
    out << "  \"kind\": \"" << to_string(code.kind) << "\",\n";
    out << "  \"block_size\": " << (code.block_size ? std::to_string(*code.block_size) : "null") << ",\n";
    out << "  \"values\": [";
    for (std::size_t j = 0; j < kCodeSize; ++j) {
        out << (j == 0 ? "" : ", ") << fmt_double(code.values[j]);
    }
    out << "],\n";
    out << "  \"params\": " << code.params.dump() << "\n}\n";
    return out.str();
}

Code16 code_from_string(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("code file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw FormatError("code file must contain a JSON object");
    if (!doc.contains("format") || doc["format"] != "code16/v1") {
        throw FormatError("code file: expected \"format\": \"code16/v1\"");
    }
    Code16 code;
    try {
        if (!doc.contains("kind") || !doc["kind"].is_string()) throw FormatError("code file: missing \"kind\"");
        code.kind = code_kind_from_string(doc["kind"].get<std::string>());
        if (doc.contains("block_size") && !doc["block_size"].is_null()) {
            if (!doc["block_size"].is_number_integer()) {
                throw FormatError("code file: \"block_size\" must be an integer or null");
            }
            code.block_size = doc["block_size"].get<int>();
        }
        if (!doc.contains("values") || !doc["values"].is_array()) {
            throw FormatError("code file: missing \"values\" array");
        }
        const auto& values = doc["values"];
        if (values.size() != kCodeSize) {
            throw FormatError("expected 16 code values, found " + std::to_string(values.size()));
        }
        for (std::size_t j = 0; j < kCodeSize; ++j) {
            if (!values[j].is_number()) {
                throw FormatError("code value " + std::to_string(j + 1) + " is not a number");
            }
            code.values[j] = values[j].get<double>();
        }
        if (doc.contains("params")) {
            if (!doc["params"].is_object()) throw FormatError("code file: \"params\" must be an object");
            code.params = doc["params"];
        }
        code.validate();
    } catch (const DomainError& e) {
        throw FormatError(std::string("invalid code file: ") + e.what());
    }
    return code;
}

void code_write(const Code16& code, const std::filesystem::path& path) {
    const std::string text = code_to_string(code);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw FormatError("failed writing " + path.string());
}

Code16 code_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open code file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return code_from_string(buf.str());
}

}  // namespace quantlab

#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>

#include "quantlab/blockquant.hpp"
#include "quantlab/codebook.hpp"
#include "quantlab/distributions.hpp"
#include "quantlab/montecarlo.hpp"

namespace quantlab::cli {

namespace {

constexpr int kDefaultBlockSize = 64;

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

QuadratureSettings quadrature_from_env() {
    QuadratureSettings qs;
    if (const char* env = std::getenv("QUANTLAB_QUAD_TOL")) {
        char* end = nullptr;
        const double tol = std::strtod(env, &end);
        if (end == env || *end != '\0' || !(tol > 0.0)) {
            throw DomainError(std::string("QUANTLAB_QUAD_TOL must be a positive number, got '") + env + "'");
        }
        qs.abs_tol = tol;
    }
    return qs;
}

Code16 build_code(const std::string& kind, int block_size, const std::string& variant,
                  const QuadratureSettings& qs) {
    if (kind == "nf4") {
        if (variant == "quantile-of-average") return nf4_code(Nf4Variant::quantile_of_average);
        if (variant == "average-of-quantile") return nf4_code(Nf4Variant::average_of_quantile);
        throw DomainError("unknown NF4 variant '" + variant + "'");
    }
    if (kind == "af4") {
        Af4Options opt;
        opt.quadrature = qs;
        return af4_code(block_size, opt);
    }
    if (kind == "balanced") return balanced_code(block_size, qs);
    if (kind == "balanced-endpoints") return balanced_code_with_endpoints(block_size, qs);
    throw DomainError("unknown code kind '" + kind + "'");
}

// Output table: CSV with --csv, aligned columns otherwise.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
    void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }

    void print(std::ostream& out, bool csv) const {
        if (csv) {
            auto line = [&out](const std::vector<std::string>& cells) {
                for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
                out << '\n';
            };
            line(header_);
            for (const auto& r : rows_) line(r);
            return;
        }
        std::vector<std::size_t> width(header_.size());
        for (std::size_t i = 0; i < header_.size(); ++i) width[i] = header_[i].size();
        for (const auto& r : rows_)
            for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) {
                out << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << cells[i];
            }
            out << '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct Options {
    // shared
    int block_size = kDefaultBlockSize;
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bool csv = false;
    std::uint64_t seed = 0;
    std::uint64_t n = 1u << 16;
    // code gen
    std::string kind = "nf4";
    std::string variant = "quantile-of-average";
    std::string out_path;
    // quantize / dequantize
    std::string in_path;
    std::string code_path;
    std::string reference_path;
    std::optional<std::size_t> axis_opt;
    bool report = false;
    // dist
    std::string query;
    std::optional<double> x;
    std::optional<double> p;
    // validate
    std::string report_kind;
    std::vector<std::string> code_paths;
    std::vector<std::string> kinds;
    bool assert_mode = false;
    std::vector<double> xs;
};

void print_errors(std::ostream& out, const Tensor& original, const Tensor& restored) {
    out << "mean_abs," << num(reconstruction_error(original, restored, ErrorMetric::mean_abs)) << '\n';
    out << "mean_sq," << num(reconstruction_error(original, restored, ErrorMetric::mean_sq)) << '\n';
    out << "max_abs," << num(reconstruction_error(original, restored, ErrorMetric::max_abs)) << '\n';
}

int cmd_code_gen(const Options& o, std::ostream& out) {
    const auto qs = quadrature_from_env();
    const Code16 code = build_code(o.kind, o.block_size, o.variant, qs);
    if (!o.out_path.empty()) code_write(code, o.out_path);
    Table t({"index", "value"});
    for (std::size_t j = 0; j < kCodeSize; ++j) t.row({std::to_string(j + 1), num(code.values[j])});
    t.print(out, o.csv);
    return kExitOk;
}

int cmd_quantize(const Options& o, std::ostream& out) {
    const Tensor tensor = tensor_read(o.in_path);
    const Code16 code = o.code_path.empty()
                            ? build_code(o.kind, o.block_size, o.variant, quadrature_from_env())
                            : code_read(o.code_path);
    const std::size_t axis = o.axis_opt ? *o.axis_opt : tensor.dims.size() - 1;
    const auto qt = quantize(tensor, code, static_cast<std::size_t>(o.block_size), axis, o.threads);
    qtensor_write(qt, o.out_path);
    if (o.report) print_errors(out, tensor, dequantize(qt, o.threads));
    return kExitOk;
}

int cmd_dequantize(const Options& o, std::ostream& out) {
    const auto qt = qtensor_read(o.in_path);
    const Tensor restored = dequantize(qt, o.threads);
    tensor_write(restored, o.out_path);
    if (o.report) {
        if (o.reference_path.empty()) throw DomainError("--report on dequantize requires --reference");
        print_errors(out, tensor_read(o.reference_path), restored);
    }
    return kExitOk;
}

int cmd_dist(const Options& o, std::ostream& out) {
    const auto qs = quadrature_from_env();
    auto need_x = [&o] {
        if (!o.x) throw DomainError("--x is required for this query");
        return *o.x;
    };
    double value = 0.0;
    if (o.query == "cdf") {
        value = fx_cdf(need_x(), o.block_size, qs);
    } else if (o.query == "approx-cdf") {
        value = fx_cdf_approx(need_x(), o.block_size);
    } else if (o.query == "quantile") {
        if (!o.p) throw DomainError("--p is required for the quantile query");
        value = fx_quantile(*o.p, o.block_size, qs);
    } else if (o.query == "absmax-median") {
        value = absmax_median(o.block_size);
    } else {
        throw DomainError("unknown dist query '" + o.query + "'");
    }
    if (o.csv) {
        out << "query,B,value\n" << o.query << ',' << o.block_size << ',' << num(value) << '\n';
    } else {
        out << num(value) << '\n';
    }
    return kExitOk;
}

std::vector<std::pair<std::string, Code16>> validation_codes(const Options& o, const QuadratureSettings& qs) {
    std::vector<std::pair<std::string, Code16>> codes;
    for (const auto& path : o.code_paths) codes.emplace_back(std::filesystem::path(path).stem().string(), code_read(path));
    for (const auto& kind : o.kinds) codes.emplace_back(kind, build_code(kind, o.block_size, o.variant, qs));
    if (codes.empty()) codes.emplace_back("nf4", nf4_code());
    return codes;
}

int cmd_validate(const Options& o, std::ostream& out) {
    const auto qs = quadrature_from_env();
    if (o.block_size < 2) throw DomainError("validate requires block size >= 2");
    const ScaledMaxDistribution dist(o.block_size, qs);
    const McConfig cfg{o.seed, o.block_size, o.n};
    cfg.validate();

    Table t({"quantity", "B", "n", "estimate", "stderr", "analytic", "abs_diff"});
    bool all_within = true;
    auto add = [&](const std::string& quantity, std::uint64_t n, double est, double se, double analytic) {
        const double diff = std::abs(est - analytic);
        if (diff > 4.0 * se + 1e-12) all_within = false;
        t.row({quantity, std::to_string(o.block_size), std::to_string(n), num(est), num(se), num(analytic), num(diff)});
    };

    if (o.report_kind == "usage") {
        for (const auto& [label, code] : validation_codes(o, qs)) {
            const Code16 stored = storage_code(code);
            const auto est = estimate_usage(stored, o.block_size, o.n, o.seed, o.threads);
            const auto analytic = expected_usage(stored, dist);
            for (std::size_t j = 0; j < kCodeSize; ++j) {
                const auto& e = est.proportions[j];
                add("usage:" + label + ":" + std::to_string(j + 1), est.histogram.total, e.value, e.std_error, analytic[j]);
            }
        }
    } else if (o.report_kind == "cdf") {
        std::vector<double> grid(33);
        for (int i = 0; i <= 32; ++i) grid[i] = -1.0 + i / 16.0;
        const auto est = empirical_cdf_stream(cfg, grid, true, o.threads);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            add("cdf@" + num(grid[i]), est[i].n, est[i].value, est[i].std_error, dist.cdf(grid[i]));
        }
    } else if (o.report_kind == "l1") {
        for (const auto& [label, code] : validation_codes(o, qs)) {
            const auto est = estimate_l1(code, cfg, o.threads);
            add("l1:" + label, est.n, est.value, est.std_error, expected_l1(code, dist));
        }
    } else {
        throw DomainError("unknown validate report '" + o.report_kind + "' (usage, cdf, l1)");
    }
    t.print(out, o.csv);
    if (o.assert_mode && !all_within) return kExitNumerical;
    return kExitOk;
}

int cmd_mc_sample(const Options& o, std::ostream& out) {
    const McConfig cfg{o.seed, o.block_size, o.n};
    cfg.validate();
    Table t({"quantity", "B", "n", "estimate", "stderr"});
    const auto ext = count_extremes(cfg, o.threads);
    auto prop = [](std::uint64_t hits, std::uint64_t n) {
        const double p = static_cast<double>(hits) / static_cast<double>(n);
        return std::pair{p, std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
    };
    const auto [pm, pm_se] = prop(ext.first_at_minus_one, ext.blocks);
    const auto [pp, pp_se] = prop(ext.first_at_plus_one, ext.blocks);
    const std::string B = std::to_string(o.block_size);
    const std::string n = std::to_string(ext.blocks);
    t.row({"atom_minus_one", B, n, num(pm), num(pm_se)});
    t.row({"atom_plus_one", B, n, num(pp), num(pp_se)});
    if (!o.xs.empty()) {
        const auto est = empirical_cdf_stream(cfg, o.xs, true, o.threads);
        for (std::size_t i = 0; i < o.xs.size(); ++i) {
            t.row({"cdf@" + num(o.xs[i]), B, std::to_string(est[i].n), num(est[i].value), num(est[i].std_error)});
        }
    }
    if (!o.out_path.empty()) {
        const auto batch = sample_blocks(cfg, o.threads);
        Tensor tensor({static_cast<std::size_t>(o.n), static_cast<std::size_t>(o.block_size)});
        std::transform(batch.values.begin(), batch.values.end(), tensor.data.begin(),
                       [](double v) { return static_cast<float>(v); });
        tensor_write(tensor, o.out_path);
    }
    t.print(out, o.csv);
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"quantlab: 4-bit blockwise absmax quantization codes"};
    app.require_subcommand(1);
    Options o;

    auto add_block_size = [&o](CLI::App* cmd) {
        cmd->add_option("--block-size,-B", o.block_size, "Quantization block size B")->capture_default_str();
    };
    auto add_threads = [&o](CLI::App* cmd) { cmd->add_option("--threads", o.threads, "Worker threads"); };
    auto add_csv = [&o](CLI::App* cmd) { cmd->add_flag("--csv", o.csv, "Machine-readable CSV output"); };
    const std::vector<std::string> code_kinds = {"nf4", "af4", "balanced", "balanced-endpoints"};
    const std::vector<std::string> variants = {"quantile-of-average", "average-of-quantile"};

    auto* code = app.add_subcommand("code", "Codebook operations");
    code->require_subcommand(1);
    auto* gen = code->add_subcommand("gen", "Construct a code and write a code16/v1 file");
    gen->add_option("--kind", o.kind, "Code kind")->check(CLI::IsMember(code_kinds))->capture_default_str();
    gen->add_option("--variant", o.variant, "NF4 construction variant")->check(CLI::IsMember(variants))->capture_default_str();
    gen->add_option("--out,-o", o.out_path, "Output code file");
    add_block_size(gen);
    add_csv(gen);

    auto* quant = app.add_subcommand("quantize", "Quantize an FQT1 tensor into an FQZ1 file");
    quant->add_option("--in,-i", o.in_path, "Input FQT1 tensor")->required();
    quant->add_option("--code", o.code_path, "code16/v1 file (default: built from --kind)");
    quant->add_option("--kind", o.kind, "Code kind when --code is absent")->check(CLI::IsMember(code_kinds));
    quant->add_option("--variant", o.variant, "NF4 variant")->check(CLI::IsMember(variants));
    quant->add_option("--axis", o.axis_opt, "Block axis (default: last)");
    quant->add_option("--out,-o", o.out_path, "Output FQZ1 file")->required();
    quant->add_flag("--report", o.report, "Print reconstruction errors");
    add_block_size(quant);
    add_threads(quant);

    auto* dequant = app.add_subcommand("dequantize", "Dequantize an FQZ1 file into an FQT1 tensor");
    dequant->add_option("--in,-i", o.in_path, "Input FQZ1 file")->required();
    dequant->add_option("--out,-o", o.out_path, "Output FQT1 tensor")->required();
    dequant->add_option("--reference", o.reference_path, "Original FQT1 tensor for --report");
    dequant->add_flag("--report", o.report, "Print reconstruction errors against --reference");
    add_threads(dequant);

    auto* dist = app.add_subcommand("dist", "Evaluate distribution quantities");
    dist->add_option("query", o.query, "cdf | quantile | approx-cdf | absmax-median")
        ->required()
        ->check(CLI::IsMember({"cdf", "quantile", "approx-cdf", "absmax-median"}));
    dist->add_option("--x", o.x, "Point for cdf / approx-cdf");
    dist->add_option("--p", o.p, "Probability for quantile");
    add_block_size(dist);
    add_csv(dist);

    auto* validate = app.add_subcommand("validate", "Compare Monte Carlo estimates with analytic values");
    validate->add_option("report", o.report_kind, "usage | cdf | l1")
        ->required()
        ->check(CLI::IsMember({"usage", "cdf", "l1"}));
    validate->add_option("--code", o.code_paths, "code16/v1 files (repeatable)");
    validate->add_option("--kind", o.kinds, "Built-in code kinds (repeatable)")->check(CLI::IsMember(code_kinds));
    validate->add_option("--variant", o.variant, "NF4 variant")->check(CLI::IsMember(variants));
    validate->add_option("--n", o.n, "Number of sampled blocks")->capture_default_str();
    validate->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    validate->add_flag("--assert", o.assert_mode, "Exit 3 if any |estimate - analytic| > 4 stderr");
    add_block_size(validate);
    add_threads(validate);
    add_csv(validate);

    auto* mc = app.add_subcommand("mc", "Monte Carlo sampling");
    mc->require_subcommand(1);
    auto* sample = mc->add_subcommand("sample", "Sample absmax-normalized blocks");
    sample->add_option("--n", o.n, "Number of blocks")->capture_default_str();
    sample->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    sample->add_option("--x", o.xs, "Points for empirical CDF estimates (repeatable)");
    sample->add_option("--out,-o", o.out_path, "Write samples as an FQT1 tensor [n, B]");
    add_block_size(sample);
    add_threads(sample);
    add_csv(sample);

    std::vector<const char*> argv{"quantlab"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (o.threads < 1) throw DomainError("--threads must be >= 1");
        if (*gen) return cmd_code_gen(o, out);
        if (*quant) return cmd_quantize(o, out);
        if (*dequant) return cmd_dequantize(o, out);
        if (*dist) return cmd_dist(o, out);
        if (*validate) return cmd_validate(o, out);
        if (*sample) return cmd_mc_sample(o, out);
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << '\n';
        return kExitData;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace quantlab::cli

#include "mhsic/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mhsic/baselines.hpp"
#include "mhsic/dgp.hpp"
#include "mhsic/errors.hpp"
#include "mhsic/harness.hpp"
#include "mhsic/io.hpp"
#include "mhsic/martingale.hpp"

namespace mhsic::cli {

namespace {

struct TestArgs {
    std::vector<std::string> files;
    std::string method = "mhsic";
    double alpha = 0.05;
    std::string kernel = "gaussian";
    std::string bandwidth = "median";
    std::uint64_t seed = 0;
    int permutations = 200;
    bool json = false;
};

struct GenerateArgs {
    std::string dgp = "mixture";
    Index n = 100;
    Index d_ambient = 1;
    Index d = 2;
    Index p = 5;
    double a = 0.0;
    double noise_scale = 0.25;
    std::uint64_t seed = 0;
    std::string out;
};

struct SweepArgs {
    std::string config;
    std::string preset;
    std::string out;
    int threads = 1;
    Index trials = 0;
};

struct BenchArgs {
    std::vector<Index> n_grid{500, 1000, 2000};
    Index repeats = 10;
    Index d_ambient = 10;
    int permutations = 200;
    std::uint64_t seed = 0;
    std::string out;
};

struct NormalityArgs {
    std::string method = "mhsic";
    std::string dgp = "mixture";
    Index n = 2000;
    Index d = 3;
    Index d_ambient = 1;
    Index p = 5;
    Index trials = 500;
    std::uint64_t seed = 0;
    int threads = 1;
};

// Thrown for argument combinations CLI11 cannot express; maps to exit 2.
class UsageError : public Error {
public:
    using Error::Error;
};

KernelSpec kernel_from_flags(const std::string& family_name, const std::string& bandwidth, Method method) {
    KernelFamily family = KernelFamily::Gaussian;
    if (family_name == "laplace") {
        family = KernelFamily::Laplace;
    } else if (family_name != "gaussian") {
        throw UsageError("--kernel must be gaussian or laplace");
    }
    const bool split = method == Method::MdHsic;
    if (bandwidth == "median") {
        return KernelSpec::median(family, split ? BandwidthSource::MedianFirstHalf : BandwidthSource::MedianFull);
    }
    if (bandwidth == "median-full") {
        return KernelSpec::median(family, BandwidthSource::MedianFull);
    }
    if (bandwidth == "median-half") {
        return KernelSpec::median(family, BandwidthSource::MedianFirstHalf);
    }
    double h = 0.0;
    const auto [ptr, ec] = std::from_chars(bandwidth.data(), bandwidth.data() + bandwidth.size(), h);
    if (ec != std::errc{} || ptr != bandwidth.data() + bandwidth.size() || !(h > 0.0)) {
        throw UsageError("--bandwidth must be median, median-full, median-half or a positive number");
    }
    return KernelSpec::fixed(family, h);
}

Method method_from_flag(const std::string& name) {
    const auto m = parse_method(name);
    if (!m) {
        throw UsageError("unknown method '" + name + "'");
    }
    return *m;
}

nlohmann::json to_json(const TestResult& r) {
    nlohmann::json j;
    j["method"] = std::string(to_string(r.method));
    j["n"] = r.n;
    j["m"] = r.m;
    j["statistic"] = r.statistic;
    j["threshold"] = r.threshold;
    j["alpha"] = r.alpha;
    j["decision"] = r.reject ? "reject" : "fail_to_reject";
    j["p_value"] = r.p_value ? nlohmann::json(*r.p_value) : nlohmann::json(nullptr);
    if (r.summary) {
        j["T"] = r.summary->statistic;
        j["sigma"] = r.summary->sigma;
        j["eta"] = r.summary->eta;
        j["n_effective"] = r.summary->n_effective;
    }
    j["bandwidths"] = r.bandwidths;
    j["runtime_seconds"] = r.runtime_seconds;
    j["seed"] = r.seed;
    return j;
}

void print_human(std::ostream& out, const TestResult& r) {
    out << "method:     " << to_string(r.method) << '\n';
    if (r.method == Method::NaiveMdHsic) {
        out << "note:       naive-mdhsic is a diagnostic; its calibration fails once d is comparable to sqrt(n)\n";
    }
    out << "n:          " << r.n << '\n';
    if (r.summary) {
        out << "T:          " << r.summary->statistic << '\n';
        out << "sigma:      " << r.summary->sigma << '\n';
        out << "eta:        " << r.statistic << '\n';
        out << "threshold:  " << r.threshold << "  (z_{1-alpha}, alpha = " << r.alpha << ")\n";
    } else {
        out << "statistic:  " << r.statistic << '\n';
        out << "p-value:    " << *r.p_value << "  (alpha = " << r.alpha << ")\n";
    }
    out << "decision:   " << (r.reject ? "reject" : "fail to reject") << " H0\n";
    out << "runtime_s:  " << r.runtime_seconds << '\n';
}

int cmd_test(const TestArgs& args, std::ostream& out) {
    const Method method = method_from_flag(args.method);
    std::vector<std::filesystem::path> paths(args.files.begin(), args.files.end());
    const MultiSample xs = load_variables(paths);
    const KernelSpec kernel = kernel_from_flags(args.kernel, args.bandwidth, method);
    const std::vector<KernelSpec> kernels(xs.size(), kernel);

    const TestResult result = [&] {
        switch (method) {
            case Method::MHsic:
                if (xs.size() != 2) {
                    throw UsageError("mhsic needs exactly two variables, found " + std::to_string(xs.size()));
                }
                return mhsic_test(xs[0], xs[1], args.alpha, kernel, kernel, args.seed);
            case Method::MdHsic:
                return mdhsic_test(xs, args.alpha, kernels, args.seed);
            case Method::NaiveMdHsic:
                return naive_mdhsic_test(xs, args.alpha, kernels, args.seed);
            case Method::HsicPerm:
            case Method::DHsicPerm:
                break;
        }
        return permutation_test(
            xs, method == Method::HsicPerm ? PermutationStatistic::Hsic : PermutationStatistic::DHsic, kernels,
            {args.permutations, args.seed}, args.alpha);
    }();
    if (args.json) {
        out << to_json(result).dump(2) << '\n';
    } else {
        print_human(out, result);
    }
    return kExitOk;
}

int cmd_generate(const GenerateArgs& args, std::ostream& out) {
    MultiSample xs;
    if (args.dgp == "mixture") {
        MixtureSample s = random_mixture_dgp({args.d_ambient, args.n, args.a, args.noise_scale, args.seed});
        xs.push_back(std::move(s.x));
        xs.push_back(std::move(s.y));
    } else if (args.dgp == "linear-gaussian") {
        xs = linear_gaussian_dgp({args.d, args.p, args.n, args.a, args.seed});
    } else {
        throw UsageError("--dgp must be mixture or linear-gaussian");
    }
    const CsvTable table = to_table(xs);
    if (args.out.empty() || args.out == "-") {
        write_csv(out, table);
        return kExitOk;
    }
    std::ofstream file(args.out);
    if (!file) {
        throw ParseError("cannot write '" + args.out + "'");
    }
    write_csv(file, table);
    return kExitOk;
}

int cmd_sweep(const SweepArgs& args, std::ostream& out) {
    GridConfig config;
    if (!args.preset.empty()) {
        config = preset_config(args.preset);
    } else {
        std::ifstream in(args.config);
        if (!in) {
            throw ParseError("cannot open config '" + args.config + "'");
        }
        config = parse_grid_config(in);
    }
    if (args.trials > 0) {
        config.run.trials = args.trials;
    }
    config.run.threads = std::max(config.run.threads, args.threads);
    const GridReport report = run_grid(config);
    write_report(args.out, report);
    out << "wrote " << report.cells.size() << " cells to " << args.out << " (meta: " << sidecar_path(args.out).string()
        << ")\n";
    return kExitOk;
}

int cmd_bench(const BenchArgs& args, std::ostream& out) {
    const RuntimeTable table = bench_runtime({Method::MHsic, Method::HsicPerm}, args.n_grid, args.d_ambient, 0.0,
                                             args.repeats, args.seed, args.permutations);
    std::ostringstream csv;
    csv << "n,hsic_perm_s,mhsic_s,speedup\n";
    for (std::size_t i = 0; i < table.n_grid.size(); ++i) {
        const Index n = table.n_grid[i];
        csv << n << ',' << format_float(table.mean_seconds(Method::HsicPerm, n)) << ','
            << format_float(table.mean_seconds(Method::MHsic, n)) << ',' << format_float(table.speedup[i]) << '\n';
    }
    if (args.out.empty()) {
        out << csv.str();
    } else {
        std::ofstream file(args.out);
        if (!file) {
            throw ParseError("cannot write '" + args.out + "'");
        }
        file << csv.str();
        out << "wrote " << args.out << '\n';
    }
    return kExitOk;
}

int cmd_normality(const NormalityArgs& args, std::ostream& out) {
    const Method method = method_from_flag(args.method);
    CellCoordinates cell;
    if (args.dgp == "mixture") {
        cell = CellCoordinates::mixture(args.d_ambient, args.n, 0.0);
    } else if (args.dgp == "linear-gaussian") {
        cell = CellCoordinates::linear_gaussian(args.d, args.p, args.n, 0.0);
    } else {
        throw UsageError("--dgp must be mixture or linear-gaussian");
    }
    const NormalityReport r = normality_report(method, cell, args.trials, args.seed, args.threads);
    out << "trials:      " << r.etas.size() << " (degenerate: " << r.degenerate_count << ")\n";
    out << "ks_distance: " << r.ks_distance << '\n';
    out << "q90:         " << r.q90 << "  (N(0,1): 1.2816)\n";
    out << "q95:         " << r.q95 << "  (N(0,1): 1.6449)\n";
    out << "q99:         " << r.q99 << "  (N(0,1): 2.3263)\n";
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Permutation-free kernel independence tests (mHSIC, split-martingale mdHSIC) and baselines"};
    app.require_subcommand(1);

    TestArgs test;
    auto* test_cmd = app.add_subcommand("test", "Run one test on CSV data");
    test_cmd->add_option("files", test.files, "One CSV per variable, or one CSV with v1_, v2_, ... column prefixes")
        ->required();
    test_cmd->add_option("--method", test.method,
                         "mhsic | mdhsic | hsic-perm | dhsic-perm | naive-mdhsic (diagnostic only, miscalibrated for "
                         "d >~ sqrt(n))")
        ->capture_default_str();
    test_cmd->add_option("--alpha", test.alpha, "Level")->capture_default_str();
    test_cmd->add_option("--kernel", test.kernel, "gaussian | laplace")->capture_default_str();
    test_cmd->add_option("--bandwidth", test.bandwidth,
                         "median | median-full | median-half | <positive number>; for mdhsic, median means "
                         "first-half median and median-full is refused")
        ->capture_default_str();
    test_cmd->add_option("--seed", test.seed, "Seed for median subsampling and permutations")->envname("MHSIC_SEED");
    test_cmd->add_option("--permutations,-B", test.permutations, "Permutations for *-perm methods")
        ->capture_default_str();
    test_cmd->add_flag("--json", test.json, "Print the result as JSON");

    GenerateArgs gen;
    auto* gen_cmd = app.add_subcommand("generate", "Write synthetic samples as CSV");
    gen_cmd->add_option("--dgp", gen.dgp, "mixture | linear-gaussian")->capture_default_str();
    gen_cmd->add_option("--n", gen.n, "Sample size")->capture_default_str();
    gen_cmd->add_option("--d-ambient", gen.d_ambient, "Ambient dimension (mixture)")->capture_default_str();
    gen_cmd->add_option("--d", gen.d, "Number of variables (linear-gaussian)")->capture_default_str();
    gen_cmd->add_option("--p", gen.p, "Per-variable dimension (linear-gaussian)")->capture_default_str();
    gen_cmd->add_option("--a", gen.a, "Dependence strength")->capture_default_str();
    gen_cmd->add_option("--noise-scale", gen.noise_scale, "Noise standard deviation (mixture)")->capture_default_str();
    gen_cmd->add_option("--seed", gen.seed, "Seed")->envname("MHSIC_SEED");
    gen_cmd->add_option("--out,-o", gen.out, "Output path (default stdout)");

    SweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("sweep", "Monte-Carlo rejection-rate sweep");
    auto* config_opt = sweep_cmd->add_option("--config", sweep.config, "key=value config file");
    auto* preset_opt = sweep_cmd->add_option("--preset", sweep.preset, "fig1-desk | fig2-desk | table1-desk");
    config_opt->excludes(preset_opt);
    sweep_cmd->add_option("--out,-o", sweep.out, "CSV report path (a .meta sidecar is written next to it)")->required();
    sweep_cmd->add_option("--threads", sweep.threads, "Worker threads")->capture_default_str();
    sweep_cmd->add_option("--trials", sweep.trials, "Override the trial count M");

    BenchArgs bench;
    auto* bench_cmd = app.add_subcommand("bench", "Per-test runtime of mhsic vs hsic-perm (mixture DGP)");
    bench_cmd->add_option("--n", bench.n_grid, "Sample sizes")->capture_default_str();
    bench_cmd->add_option("--repeats", bench.repeats, "Repetitions per n")->capture_default_str();
    bench_cmd->add_option("--d-ambient", bench.d_ambient, "Ambient dimension")->capture_default_str();
    bench_cmd->add_option("--permutations,-B", bench.permutations, "Permutations for hsic-perm")
        ->capture_default_str();
    bench_cmd->add_option("--seed", bench.seed, "Seed")->envname("MHSIC_SEED");
    bench_cmd->add_option("--out,-o", bench.out, "CSV output path (default stdout)");

    NormalityArgs norm;
    auto* norm_cmd = app.add_subcommand("normality", "KS distance of null eta values to N(0, 1)");
    norm_cmd->add_option("--method", norm.method, "mhsic | mdhsic | naive-mdhsic")->capture_default_str();
    norm_cmd->add_option("--dgp", norm.dgp, "mixture | linear-gaussian")->capture_default_str();
    norm_cmd->add_option("--n", norm.n, "Sample size")->capture_default_str();
    norm_cmd->add_option("--d", norm.d, "Variables (linear-gaussian)")->capture_default_str();
    norm_cmd->add_option("--d-ambient", norm.d_ambient, "Ambient dimension (mixture)")->capture_default_str();
    norm_cmd->add_option("--p", norm.p, "Per-variable dimension (linear-gaussian)")->capture_default_str();
    norm_cmd->add_option("--trials", norm.trials, "Null trials")->capture_default_str();
    norm_cmd->add_option("--seed", norm.seed, "Base seed")->envname("MHSIC_SEED");
    norm_cmd->add_option("--threads", norm.threads, "Worker threads")->capture_default_str();

    std::vector<const char*> argv;
    for (const std::string& a : args) {
        argv.push_back(a.c_str());
    }
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
        if (*test_cmd) {
            return cmd_test(test, out);
        }
        if (*gen_cmd) {
            return cmd_generate(gen, out);
        }
        if (*sweep_cmd) {
            if (sweep.config.empty() && sweep.preset.empty()) {
                throw UsageError("sweep needs --config or --preset");
            }
            return cmd_sweep(sweep, out);
        }
        if (*bench_cmd) {
            return cmd_bench(bench, out);
        }
        if (*norm_cmd) {
            return cmd_normality(norm, out);
        }
    } catch (const DegenerateVariance& e) {
        err << "error: degenerate data: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const DegenerateSample& e) {
        err << "error: degenerate data: " << e.what() << '\n';
        return kExitDegenerate;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace mhsic::cli

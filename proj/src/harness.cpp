#include "mhsic/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <exception>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "mhsic/baselines.hpp"
#include "mhsic/dgp.hpp"
#include "mhsic/errors.hpp"
#include "mhsic/normal.hpp"
#include "mhsic/rng.hpp"

#ifndef MHSIC_VERSION
#define MHSIC_VERSION "0.0.0"
#endif

namespace mhsic {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_two_variable(Method method) { return method == Method::MHsic || method == Method::HsicPerm; }

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* end = value.data() + value.size();
    const auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end) {
        throw ConfigInvalid("config key '" + key + "': cannot parse '" + value + "'");
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::vector<double> standard_a_grid() { return {0.0, 0.2, 0.4, 0.6, 0.8, 1.0}; }

}  // namespace

std::string_view to_string(DgpKind kind) { return kind == DgpKind::Mixture ? "mixture" : "linear-gaussian"; }

std::string_view tool_version() { return MHSIC_VERSION; }

CellCoordinates CellCoordinates::mixture(Index d_ambient, Index n, double a, double noise_scale) {
    return {DgpKind::Mixture, n, a, 2, d_ambient, d_ambient, noise_scale};
}

CellCoordinates CellCoordinates::linear_gaussian(Index d, Index p, Index n, double a) {
    return {DgpKind::LinearGaussian, n, a, d, 0, p, 0.0};
}

std::uint64_t trial_seed(std::uint64_t base_seed, const CellCoordinates& cell, Index trial) {
    return derive_seed(base_seed, {stream_tag(to_string(cell.dgp)), static_cast<std::uint64_t>(cell.n),
                                   std::bit_cast<std::uint64_t>(cell.a), static_cast<std::uint64_t>(cell.d),
                                   static_cast<std::uint64_t>(cell.d_ambient), static_cast<std::uint64_t>(cell.p),
                                   std::bit_cast<std::uint64_t>(cell.noise_scale),
                                   static_cast<std::uint64_t>(trial)});
}

MultiSample generate_cell_data(const CellCoordinates& cell, std::uint64_t seed) {
    if (cell.dgp == DgpKind::Mixture) {
        MixtureSample s = random_mixture_dgp({cell.d_ambient, cell.n, cell.a, cell.noise_scale, seed});
        MultiSample out;
        out.push_back(std::move(s.x));
        out.push_back(std::move(s.y));
        return out;
    }
    return linear_gaussian_dgp({cell.d, cell.p, cell.n, cell.a, seed});
}

TestResult run_method(Method method, const MultiSample& data, double alpha, int permutations, std::uint64_t seed) {
    const KernelSpec full = KernelSpec::median(KernelFamily::Gaussian, BandwidthSource::MedianFull);
    const KernelSpec half = KernelSpec::median(KernelFamily::Gaussian, BandwidthSource::MedianFirstHalf);
    if (is_two_variable(method) && data.size() != 2) {
        throw std::invalid_argument(std::string(to_string(method)) + " tests exactly two variables");
    }
    switch (method) {
        case Method::MHsic:
            return mhsic_test(data[0], data[1], alpha, full, full, seed);
        case Method::MdHsic: {
            const std::vector<KernelSpec> ks(data.size(), half);
            return mdhsic_test(data, alpha, ks, seed);
        }
        case Method::NaiveMdHsic: {
            const std::vector<KernelSpec> ks(data.size(), full);
            return naive_mdhsic_test(data, alpha, ks, seed);
        }
        case Method::HsicPerm:
        case Method::DHsicPerm: {
            const std::vector<KernelSpec> ks(data.size(), full);
            const auto stat = method == Method::HsicPerm ? PermutationStatistic::Hsic : PermutationStatistic::DHsic;
            return permutation_test(data, stat, ks, {permutations, seed}, alpha);
        }
    }
    throw std::invalid_argument("unknown method");
}

CellResult run_trials(const TrialFunction& fn, Index trials, int threads) {
    if (trials < 1) {
        throw ConfigInvalid("trial count must be at least 1");
    }
    std::vector<std::optional<TrialOutcome>> outcomes(static_cast<std::size_t>(trials));
    std::atomic<Index> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        for (Index t = next++; t < trials; t = next++) {
            try {
                outcomes[static_cast<std::size_t>(t)] = fn(t);
            } catch (const DegenerateVariance&) {
            } catch (const DegenerateSample&) {
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = trials;
            }
        }
    };

    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(trials)));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }

    CellResult r;
    r.trials = trials;
    double runtime = 0.0;
    for (const auto& o : outcomes) {
        if (!o) {
            ++r.degenerate_count;
            continue;
        }
        ++r.trials_completed;
        r.rejections += o->reject ? 1 : 0;
        runtime += o->runtime_seconds;
    }
    if (r.trials_completed > 0) {
        const double m = static_cast<double>(r.trials_completed);
        r.rejection_rate = static_cast<double>(r.rejections) / m;
        r.stderr_rate = std::sqrt(r.rejection_rate * (1.0 - r.rejection_rate) / m);
        r.mean_runtime_seconds = runtime / m;
    } else {
        r.rejection_rate = kNaN;
        r.stderr_rate = kNaN;
        r.mean_runtime_seconds = kNaN;
    }
    return r;
}

CellResult run_cell(Method method, const CellCoordinates& cell, const RunOptions& options) {
    require_alpha(options.alpha);
    auto trial = [&](Index t) {
        const std::uint64_t seed = trial_seed(options.base_seed, cell, t);
        const MultiSample data = generate_cell_data(cell, seed);
        const TestResult res =
            run_method(method, data, options.alpha, options.permutations, derive_seed(seed, {stream_tag("test")}));
        return TrialOutcome{res.reject, res.statistic, res.runtime_seconds};
    };
    CellResult r = run_trials(trial, options.trials, options.threads);
    r.method = method;
    r.cell = cell;
    r.alpha = options.alpha;
    r.base_seed = options.base_seed;
    return r;
}

void validate(const GridConfig& config) {
    if (config.methods.empty()) {
        throw ConfigInvalid("no methods given");
    }
    if (config.n_grid.empty() || config.a_grid.empty()) {
        throw ConfigInvalid("n and a grids must be nonempty");
    }
    if (config.dgp == DgpKind::Mixture && config.d_ambient_grid.empty()) {
        throw ConfigInvalid("d_ambient grid must be nonempty for the mixture DGP");
    }
    if (config.dgp == DgpKind::LinearGaussian && config.d_grid.empty()) {
        throw ConfigInvalid("d grid must be nonempty for the linear-gaussian DGP");
    }
    if (config.run.trials < 1) {
        throw ConfigInvalid("trials must be at least 1");
    }
    if (!(config.run.alpha > 0.0 && config.run.alpha < 1.0)) {
        throw ConfigInvalid("alpha must lie in (0, 1)");
    }
    if (config.run.permutations < 1) {
        throw ConfigInvalid("permutations must be at least 1");
    }
    for (Index n : config.n_grid) {
        if (n < 2) {
            throw ConfigInvalid("every n must be at least 2");
        }
    }
    for (double a : config.a_grid) {
        if (!(a >= 0.0) || !std::isfinite(a)) {
            throw ConfigInvalid("every a must be a finite value >= 0");
        }
    }
    for (Index q : config.d_ambient_grid) {
        if (q < 1) {
            throw ConfigInvalid("every d_ambient must be at least 1");
        }
    }
    if (config.dgp == DgpKind::LinearGaussian) {
        if (config.p < 1) {
            throw ConfigInvalid("p must be at least 1");
        }
        for (Index d : config.d_grid) {
            if (d < 2) {
                throw ConfigInvalid("every d must be at least 2");
            }
            for (Method m : config.methods) {
                if (is_two_variable(m) && d != 2) {
                    throw ConfigInvalid(std::string(to_string(m)) + " tests two variables but the grid has d = " +
                                        std::to_string(d));
                }
            }
        }
    }
    for (Method m : config.methods) {
        if (m == Method::MdHsic) {
            for (Index n : config.n_grid) {
                if (n < 6) {
                    throw ConfigInvalid("mdhsic requires n >= 6");
                }
            }
        }
    }
}

std::vector<CellCoordinates> grid_cells(const GridConfig& config) {
    std::vector<CellCoordinates> cells;
    if (config.dgp == DgpKind::Mixture) {
        for (Index q : config.d_ambient_grid) {
            for (Index n : config.n_grid) {
                for (double a : config.a_grid) {
                    cells.push_back(CellCoordinates::mixture(q, n, a, config.noise_scale));
                }
            }
        }
    } else {
        for (Index d : config.d_grid) {
            for (Index n : config.n_grid) {
                for (double a : config.a_grid) {
                    cells.push_back(CellCoordinates::linear_gaussian(d, config.p, n, a));
                }
            }
        }
    }
    return cells;
}

std::string render_config(const GridConfig& config) {
    std::ostringstream os;
    for (Method m : config.methods) {
        os << "method=" << to_string(m) << '\n';
    }
    os << "dgp=" << to_string(config.dgp) << '\n';
    for (Index n : config.n_grid) {
        os << "n=" << n << '\n';
    }
    for (double a : config.a_grid) {
        os << "a=" << format_double(a) << '\n';
    }
    if (config.dgp == DgpKind::Mixture) {
        for (Index q : config.d_ambient_grid) {
            os << "d_ambient=" << q << '\n';
        }
        os << "noise_scale=" << format_double(config.noise_scale) << '\n';
    } else {
        for (Index d : config.d_grid) {
            os << "d=" << d << '\n';
        }
        os << "p=" << config.p << '\n';
    }
    os << "trials=" << config.run.trials << '\n';
    os << "alpha=" << format_double(config.run.alpha) << '\n';
    os << "base_seed=" << config.run.base_seed << '\n';
    os << "permutations=" << config.run.permutations << '\n';
    return os.str();
}

std::string config_hash(const GridConfig& config) {
    const std::uint64_t h = stream_tag(render_config(config));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

GridConfig parse_grid_config(std::istream& in) {
    GridConfig config;
    std::set<std::string> seen;
    std::string line;
    int line_no = 0;
    auto first = [&](const std::string& key) { return seen.insert(key).second; };

    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        const std::string text = trim(line);
        if (text.empty()) {
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) {
            throw ConfigInvalid("line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = trim(std::string_view(text).substr(0, eq));
        const std::string value = trim(std::string_view(text).substr(eq + 1));
        if (key == "method") {
            const auto m = parse_method(value);
            if (!m) {
                throw ConfigInvalid("unknown method '" + value + "'");
            }
            config.methods.push_back(*m);
        } else if (key == "dgp") {
            if (value == "mixture") {
                config.dgp = DgpKind::Mixture;
            } else if (value == "linear-gaussian") {
                config.dgp = DgpKind::LinearGaussian;
            } else {
                throw ConfigInvalid("unknown dgp '" + value + "'");
            }
        } else if (key == "n") {
            config.n_grid.push_back(parse_number<Index>(key, value));
        } else if (key == "a") {
            config.a_grid.push_back(parse_number<double>(key, value));
        } else if (key == "d") {
            if (first(key)) {
                config.d_grid.clear();
            }
            config.d_grid.push_back(parse_number<Index>(key, value));
        } else if (key == "d_ambient") {
            if (first(key)) {
                config.d_ambient_grid.clear();
            }
            config.d_ambient_grid.push_back(parse_number<Index>(key, value));
        } else if (key == "p") {
            config.p = parse_number<Index>(key, value);
        } else if (key == "noise_scale") {
            config.noise_scale = parse_number<double>(key, value);
        } else if (key == "trials" || key == "M") {
            config.run.trials = parse_number<Index>(key, value);
        } else if (key == "alpha") {
            config.run.alpha = parse_number<double>(key, value);
        } else if (key == "base_seed" || key == "seed") {
            config.run.base_seed = parse_number<std::uint64_t>(key, value);
        } else if (key == "permutations" || key == "B") {
            config.run.permutations = parse_number<int>(key, value);
        } else if (key == "threads") {
            config.run.threads = parse_number<int>(key, value);
        } else {
            throw ConfigInvalid("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    return config;
}

GridConfig preset_config(std::string_view name) {
    GridConfig config;
    config.run.alpha = 0.05;
    config.run.base_seed = 20240601;
    if (name == "fig1-desk") {
        config.methods = {Method::MHsic};
        config.dgp = DgpKind::Mixture;
        config.d_ambient_grid = {1, 10};
        config.n_grid = {100, 500, 2000};
        config.a_grid = standard_a_grid();
        config.run.trials = 200;
    } else if (name == "fig2-desk") {
        config.methods = {Method::MdHsic};
        config.dgp = DgpKind::LinearGaussian;
        config.d_grid = {2, 3, 5};
        config.p = 5;
        config.n_grid = {100, 500, 2000};
        config.a_grid = standard_a_grid();
        config.run.trials = 200;
    } else if (name == "table1-desk") {
        config.methods = {Method::MHsic, Method::HsicPerm};
        config.dgp = DgpKind::Mixture;
        config.d_ambient_grid = {10};
        config.n_grid = {500, 1000, 2000, 4000};
        config.a_grid = {0.0};
        config.run.trials = 10;
        config.run.permutations = 200;
    } else {
        throw ConfigInvalid("unknown preset '" + std::string(name) + "' (expected fig1-desk, fig2-desk or table1-desk)");
    }
    return config;
}

GridReport run_grid(const GridConfig& config) {
    validate(config);
    GridReport report;
    report.config_hash = config_hash(config);
    report.tool_version = std::string(tool_version());
    report.hardware = hardware_string();
    report.base_seed = config.run.base_seed;
    for (Method m : config.methods) {
        for (const CellCoordinates& cell : grid_cells(config)) {
            report.cells.push_back(run_cell(m, cell, config.run));
        }
    }
    std::stable_sort(report.cells.begin(), report.cells.end(), [](const CellResult& l, const CellResult& r) {
        return std::make_tuple(to_string(l.method), l.cell.d, l.cell.d_ambient, l.cell.n, l.cell.a) <
               std::make_tuple(to_string(r.method), r.cell.d, r.cell.d_ambient, r.cell.n, r.cell.a);
    });
    return report;
}

double RuntimeTable::mean_seconds(Method method, Index n) const {
    for (const RuntimeRow& r : rows) {
        if (r.method == method && r.n == n) {
            return r.mean_seconds;
        }
    }
    return kNaN;
}

RuntimeTable bench_runtime(const std::vector<Method>& methods, const std::vector<Index>& n_grid, Index d_ambient,
                           double a, Index repeats, std::uint64_t base_seed, int permutations) {
    if (methods.empty() || n_grid.empty() || repeats < 1) {
        throw ConfigInvalid("bench_runtime needs methods, an n grid and repeats >= 1");
    }
    RuntimeTable table;
    table.n_grid = n_grid;
    for (Index n : n_grid) {
        const CellCoordinates cell = CellCoordinates::mixture(d_ambient, n, a);
        std::vector<double> totals(methods.size(), 0.0);
        for (Index rep = 0; rep < repeats; ++rep) {
            const std::uint64_t seed = trial_seed(base_seed, cell, rep);
            const MultiSample data = generate_cell_data(cell, seed);
            // Methods interleave within a repeat so slow drift hits all of them.
            for (std::size_t k = 0; k < methods.size(); ++k) {
                totals[k] += run_method(methods[k], data, 0.05, permutations, derive_seed(seed, {stream_tag("test")}))
                                 .runtime_seconds;
            }
        }
        for (std::size_t k = 0; k < methods.size(); ++k) {
            table.rows.push_back({methods[k], n, totals[k] / static_cast<double>(repeats), repeats});
        }
    }
    const bool has_pair = std::find(methods.begin(), methods.end(), Method::MHsic) != methods.end() &&
                          std::find(methods.begin(), methods.end(), Method::HsicPerm) != methods.end();
    if (has_pair) {
        for (Index n : n_grid) {
            table.speedup.push_back(table.mean_seconds(Method::HsicPerm, n) / table.mean_seconds(Method::MHsic, n));
        }
    }
    return table;
}

double ks_distance_to_normal(std::vector<double> values) {
    if (values.empty()) {
        throw std::invalid_argument("ks_distance_to_normal: no values");
    }
    std::sort(values.begin(), values.end());
    const double m = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double f = normal_cdf(values[i]);
        d = std::max({d, f - static_cast<double>(i) / m, static_cast<double>(i + 1) / m - f});
    }
    return d;
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty() || !(q >= 0.0 && q <= 1.0)) {
        throw std::invalid_argument("empirical_quantile: need values and q in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

NormalityReport normality_from_values(std::vector<double> etas) {
    NormalityReport r;
    r.ks_distance = ks_distance_to_normal(etas);
    r.q90 = empirical_quantile(etas, 0.90);
    r.q95 = empirical_quantile(etas, 0.95);
    r.q99 = empirical_quantile(etas, 0.99);
    r.etas = std::move(etas);
    return r;
}

NormalityReport normality_report(Method method, const CellCoordinates& null_cell, Index trials,
                                 std::uint64_t base_seed, int threads) {
    if (method == Method::HsicPerm || method == Method::DHsicPerm) {
        throw std::invalid_argument("normality_report applies to the martingale statistics only");
    }
    RunOptions options;
    options.trials = trials;
    options.base_seed = base_seed;
    options.threads = threads;
    std::vector<double> etas(static_cast<std::size_t>(trials), kNaN);
    auto trial = [&](Index t) {
        const std::uint64_t seed = trial_seed(base_seed, null_cell, t);
        const MultiSample data = generate_cell_data(null_cell, seed);
        const TestResult res = run_method(method, data, 0.05, 0, derive_seed(seed, {stream_tag("test")}));
        etas[static_cast<std::size_t>(t)] = res.statistic;
        return TrialOutcome{res.reject, res.statistic, res.runtime_seconds};
    };
    const CellResult cell = run_trials(trial, trials, threads);
    std::vector<double> kept;
    for (double e : etas) {
        if (!std::isnan(e)) {
            kept.push_back(e);
        }
    }
    if (kept.empty()) {
        throw DegenerateVariance("normality_report: every trial was degenerate");
    }
    NormalityReport r = normality_from_values(std::move(kept));
    r.degenerate_count = cell.degenerate_count;
    return r;
}

std::string hardware_string() {
    std::string model = "unknown cpu";
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    while (std::getline(cpuinfo, line)) {
        if (line.rfind("model name", 0) == 0) {
            if (const auto colon = line.find(':'); colon != std::string::npos) {
                model = trim(std::string_view(line).substr(colon + 1));
            }
            break;
        }
    }
    return model + " x" + std::to_string(std::max(1u, std::thread::hardware_concurrency()));
}

}  // namespace mhsic

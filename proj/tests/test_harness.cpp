#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <tuple>

#include "mhsic/errors.hpp"
#include "mhsic/harness.hpp"
#include "mhsic/io.hpp"
#include "mhsic/rng.hpp"

using namespace mhsic;

namespace {

GridConfig small_config() {
    GridConfig c;
    c.methods = {Method::MHsic};
    c.dgp = DgpKind::Mixture;
    c.n_grid = {30};
    c.a_grid = {0.0};
    c.d_ambient_grid = {1};
    c.run.trials = 8;
    c.run.base_seed = 99;
    return c;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("run_trials aggregates a Bernoulli(0.05) stub") {
    const Index trials = 1000;
    auto stub = [](Index t) {
        Rng rng(derive_seed(7, {static_cast<std::uint64_t>(t)}));
        return TrialOutcome{rng.uniform01() < 0.05, 0.0, 0.001};
    };
    for (int threads : {1, 4}) {
        const CellResult r = run_trials(stub, trials, threads);
        CHECK(r.trials == trials);
        CHECK(r.trials_completed == trials);
        CHECK(r.degenerate_count == 0);
        CHECK(r.rejection_rate == doctest::Approx(0.05).epsilon(0.02 / 0.05));
        CHECK(r.rejection_rate == static_cast<double>(r.rejections) / 1000.0);
        const double expected_se = std::sqrt(r.rejection_rate * (1.0 - r.rejection_rate) / 1000.0);
        CHECK(r.stderr_rate == doctest::Approx(expected_se).epsilon(1e-15));
        CHECK(r.stderr_rate * r.stderr_rate * 1000.0 ==
              doctest::Approx(r.rejection_rate * (1.0 - r.rejection_rate)).epsilon(1e-15));
        CHECK(std::abs(r.stderr_rate - 0.0069) < 0.0015);
        CHECK(r.mean_runtime_seconds == doctest::Approx(0.001));
    }
    CHECK(run_trials(stub, trials, 1).rejections == run_trials(stub, trials, 3).rejections);
}

TEST_CASE("run_trials counts degenerate trials and reports NaN when none complete") {
    auto always = [](Index) -> TrialOutcome { throw DegenerateVariance("constant"); };
    const CellResult r = run_trials(always, 25, 2);
    CHECK(r.degenerate_count == 25);
    CHECK(r.trials_completed == 0);
    CHECK(std::isnan(r.rejection_rate));
    CHECK(std::isnan(r.stderr_rate));

    auto half = [](Index t) -> TrialOutcome {
        if (t % 2) {
            throw DegenerateSample("all distances zero");
        }
        return TrialOutcome{true, 0.0, 0.0};
    };
    const CellResult h = run_trials(half, 10, 1);
    CHECK(h.degenerate_count == 5);
    CHECK(h.trials_completed == 5);
    CHECK(h.rejection_rate == 1.0);
    CHECK(h.stderr_rate == 0.0);

    auto broken = [](Index) -> TrialOutcome { throw std::runtime_error("bug"); };
    CHECK_THROWS_AS(run_trials(broken, 3, 1), std::runtime_error);
    CHECK_THROWS_AS(run_trials(half, 0, 1), ConfigInvalid);
}

TEST_CASE("degenerate data through the full pipeline") {
    // Zero noise and a = 0 make Y identically zero: every trial is degenerate.
    const CellCoordinates cell = CellCoordinates::mixture(1, 20, 0.0, 0.0);
    RunOptions opts;
    opts.trials = 6;
    const CellResult r = run_cell(Method::MHsic, cell, opts);
    CHECK(r.degenerate_count == 6);
    CHECK(std::isnan(r.rejection_rate));
}

TEST_CASE("trial seeds and cells are deterministic") {
    const CellCoordinates a = CellCoordinates::mixture(2, 50, 0.4);
    const CellCoordinates b = CellCoordinates::mixture(2, 50, 0.6);
    CHECK(trial_seed(1, a, 0) == trial_seed(1, a, 0));
    CHECK(trial_seed(1, a, 0) != trial_seed(1, a, 1));
    CHECK(trial_seed(1, a, 0) != trial_seed(1, b, 0));
    CHECK(trial_seed(1, a, 0) != trial_seed(2, a, 0));

    RunOptions opts;
    opts.trials = 12;
    opts.base_seed = 5;
    opts.threads = 1;
    const CellResult one = run_cell(Method::MHsic, a, opts);
    opts.threads = 4;
    const CellResult four = run_cell(Method::MHsic, a, opts);
    CHECK(one.rejections == four.rejections);
    CHECK(one.trials_completed == four.trials_completed);
}

TEST_CASE("grid: row counts and canonical order") {
    GridConfig c = small_config();
    CHECK(run_grid(c).cells.size() == 1);

    c.methods = {Method::MHsic, Method::HsicPerm};
    c.n_grid = {40, 20};
    c.a_grid = {0.5, 0.0, 1.0};
    c.run.trials = 2;
    c.run.permutations = 20;
    const GridReport report = run_grid(c);
    REQUIRE(report.cells.size() == 12);
    for (std::size_t i = 1; i < report.cells.size(); ++i) {
        const CellResult& l = report.cells[i - 1];
        const CellResult& r = report.cells[i];
        CHECK(std::make_tuple(to_string(l.method), l.cell.d, l.cell.d_ambient, l.cell.n, l.cell.a) <
              std::make_tuple(to_string(r.method), r.cell.d, r.cell.d_ambient, r.cell.n, r.cell.a));
    }
    CHECK(report.cells.front().method == Method::HsicPerm);
    CHECK(report.config_hash.size() == 16);
    CHECK(report.base_seed == 99);
}

TEST_CASE("grid: reruns are identical") {
    const GridConfig c = small_config();
    std::ostringstream a;
    std::ostringstream b;
    const auto ra = run_grid(c);
    const auto rb = run_grid(c);
    std::vector<CellResult> ca = ra.cells;
    std::vector<CellResult> cb = rb.cells;
    for (auto& x : ca) {
        x.mean_runtime_seconds = 0.0;
    }
    for (auto& x : cb) {
        x.mean_runtime_seconds = 0.0;
    }
    write_report_csv(a, ca);
    write_report_csv(b, cb);
    CHECK(a.str() == b.str());
    CHECK(ra.config_hash == rb.config_hash);
}

TEST_CASE("report CSV round-trips") {
    GridConfig c = small_config();
    c.a_grid = {0.0, 0.3};
    const GridReport report = run_grid(c);
    std::ostringstream first;
    write_report_csv(first, report.cells);
    std::istringstream in(first.str());
    const auto parsed = read_report_csv(in);
    REQUIRE(parsed.size() == report.cells.size());
    std::ostringstream second;
    write_report_csv(second, parsed);
    CHECK(first.str() == second.str());
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        CHECK(parsed[i].method == report.cells[i].method);
        CHECK(parsed[i].cell.n == report.cells[i].cell.n);
        CHECK(parsed[i].cell.a == std::stod(format_float(report.cells[i].cell.a)));
        CHECK(parsed[i].rejection_rate == std::stod(format_float(report.cells[i].rejection_rate)));
        CHECK(parsed[i].rejections == report.cells[i].rejections);
    }
    CHECK(first.str().rfind(std::string(kReportHeader) + "\n", 0) == 0);

    std::istringstream bad("method,n\nmhsic,3\n");
    CHECK_THROWS_AS(read_report_csv(bad), ParseError);
}

TEST_CASE("report files and sidecar") {
    const auto dir = std::filesystem::temp_directory_path() / "mhsic_harness_test";
    std::filesystem::create_directories(dir);
    const GridReport report = run_grid(small_config());
    write_report(dir / "out.csv", report);
    CHECK(sidecar_path(dir / "out.csv") == dir / "out.meta");
    CHECK(sidecar_path(dir / "out.txt") == dir / "out.txt.meta");
    const std::string meta = slurp(dir / "out.meta");
    CHECK(meta.find("config_hash=" + report.config_hash) != std::string::npos);
    CHECK(meta.find("tool_version=") != std::string::npos);
    CHECK(meta.find("hardware=") != std::string::npos);
    CHECK(meta.find("base_seed=99") != std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST_CASE("config parsing") {
    std::istringstream in(R"(# comment
method=mdhsic
method = naive-mdhsic
dgp=linear-gaussian
d=3
d=5
p=4
n=50   # trailing comment
n=100
a=0
a=0.5
M=17
alpha=0.1
seed=42
B=33
)");
    const GridConfig c = parse_grid_config(in);
    CHECK(c.methods == std::vector<Method>{Method::MdHsic, Method::NaiveMdHsic});
    CHECK(c.dgp == DgpKind::LinearGaussian);
    CHECK(c.d_grid == std::vector<Index>{3, 5});
    CHECK(c.p == 4);
    CHECK(c.n_grid == std::vector<Index>{50, 100});
    CHECK(c.a_grid == std::vector<double>{0.0, 0.5});
    CHECK(c.run.trials == 17);
    CHECK(c.run.alpha == 0.1);
    CHECK(c.run.base_seed == 42);
    CHECK(c.run.permutations == 33);
    CHECK_NOTHROW(validate(c));
    CHECK(grid_cells(c).size() == 8);

    std::istringstream rendered(render_config(c));
    const GridConfig again = parse_grid_config(rendered);
    CHECK(render_config(again) == render_config(c));
    CHECK(config_hash(again) == config_hash(c));

    GridConfig other = c;
    other.run.trials = 18;
    CHECK(config_hash(other) != config_hash(c));
}

TEST_CASE("invalid configs") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_grid_config(in);
    };
    CHECK_THROWS_AS(parse("method=bogus\n"), ConfigInvalid);
    CHECK_THROWS_AS(parse("n=abc\n"), ConfigInvalid);
    CHECK_THROWS_AS(parse("colour=blue\n"), ConfigInvalid);
    CHECK_THROWS_AS(parse("just text\n"), ConfigInvalid);

    GridConfig c = small_config();
    c.methods.clear();
    CHECK_THROWS_AS(validate(c), ConfigInvalid);
    c = small_config();
    c.n_grid.clear();
    CHECK_THROWS_AS(validate(c), ConfigInvalid);
    c = small_config();
    c.run.trials = 0;
    CHECK_THROWS_AS(validate(c), ConfigInvalid);
    c = small_config();
    c.methods = {Method::MdHsic};
    c.n_grid = {5};
    CHECK_THROWS_AS(validate(c), ConfigInvalid);
    c = small_config();
    c.dgp = DgpKind::LinearGaussian;
    c.d_grid = {3};
    CHECK_THROWS_AS(validate(c), ConfigInvalid);
    CHECK_THROWS_AS(preset_config("nope"), ConfigInvalid);
    for (const char* name : {"fig1-desk", "fig2-desk", "table1-desk"}) {
        CHECK_NOTHROW(validate(preset_config(name)));
    }
}

TEST_CASE("KS distance and quantiles") {
    CHECK(ks_distance_to_normal({0.0}) == doctest::Approx(0.5));
    // Two points at +-0.674: CDF values 0.25 and 0.75.
    CHECK(ks_distance_to_normal({-0.6744897501960817, 0.6744897501960817}) == doctest::Approx(0.25).epsilon(1e-9));

    std::mt19937_64 gen(1);
    std::normal_distribution<double> nd;
    const Index m = 2000;
    std::vector<double> draws(static_cast<std::size_t>(m));
    for (double& v : draws) {
        v = nd(gen);
    }
    CHECK(ks_distance_to_normal(draws) < 1.36 / std::sqrt(static_cast<double>(m)));
    std::vector<double> shifted = draws;
    for (double& v : shifted) {
        v += 0.5;
    }
    CHECK(ks_distance_to_normal(shifted) > 0.15);

    CHECK(empirical_quantile({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(empirical_quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(empirical_quantile({10, 0}, 0.95) == doctest::Approx(9.5));
    const NormalityReport rep = normality_from_values(draws);
    CHECK(rep.q95 == doctest::Approx(1.645).epsilon(0.1));
    CHECK(rep.ks_distance == ks_distance_to_normal(draws));
}

TEST_CASE("normality report on a small null cell") {
    const NormalityReport r = normality_report(Method::MHsic, CellCoordinates::mixture(1, 50, 0.0), 40, 3, 2);
    CHECK(r.etas.size() + static_cast<std::size_t>(r.degenerate_count) == 40);
    CHECK(r.ks_distance > 0.0);
    CHECK(r.ks_distance < 1.0);
    CHECK_THROWS(normality_report(Method::HsicPerm, CellCoordinates::mixture(1, 50, 0.0), 5, 3));
}

TEST_CASE("runtime bench shape") {
    const RuntimeTable t = bench_runtime({Method::MHsic, Method::HsicPerm}, {40, 80}, 2, 0.0, 2, 1, 10);
    CHECK(t.rows.size() == 4);
    REQUIRE(t.speedup.size() == 2);
    CHECK(t.speedup[0] > 0.0);
    CHECK(t.mean_seconds(Method::MHsic, 40) > 0.0);
}

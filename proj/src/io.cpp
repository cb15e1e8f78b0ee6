#include "mhsic/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>

#include "mhsic/errors.hpp"

namespace mhsic {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string_view rest(line);
    while (true) {
        const auto comma = rest.find(',');
        out.push_back(trim(rest.substr(0, comma)));
        if (comma == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(comma + 1);
    }
    return out;
}

std::string unquote(std::string s) {
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') {
        return s.substr(1, s.size() - 2);
    }
    return s;
}

template <class T>
bool parse_into(const std::string& text, T& out) {
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, out);
    return ec == std::errc{} && ptr == end;
}

}  // namespace

CsvTable read_csv(std::istream& in, const std::string& source) {
    std::string line;
    int line_no = 0;
    CsvTable table;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) {
            break;
        }
    }
    if (trim(line).empty()) {
        throw ParseError(source + ": empty file (expected a header row)");
    }
    for (std::string& name : split_fields(line)) {
        table.header.push_back(unquote(std::move(name)));
    }
    const std::size_t cols = table.header.size();

    std::vector<double> cells;
    Index rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != cols) {
            throw ParseError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                             " fields, found " + std::to_string(fields.size()));
        }
        for (const std::string& f : fields) {
            double v = 0.0;
            if (!parse_into(f, v) || !std::isfinite(v)) {
                throw ParseError(source + ":" + std::to_string(line_no) + ": '" + f + "' is not a finite number");
            }
            cells.push_back(v);
        }
        ++rows;
    }
    table.values = Eigen::Map<const Matrix>(cells.data(), rows, static_cast<Index>(cols));
    return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError("cannot open '" + path.string() + "'");
    }
    return read_csv(in, path.string());
}

void write_csv(std::ostream& out, const CsvTable& table) {
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        out << (j ? "," : "") << table.header[j];
    }
    out << '\n';
    char buf[32];
    for (Index i = 0; i < table.values.rows(); ++i) {
        for (Index j = 0; j < table.values.cols(); ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", table.values(i, j));
            out << (j ? "," : "") << buf;
        }
        out << '\n';
    }
}

MultiSample group_columns(const CsvTable& table) {
    static const std::regex prefixed(R"(v([0-9]+)_.*)");
    std::map<long, std::vector<Index>> groups;
    bool all_prefixed = !table.header.empty();
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        std::smatch m;
        if (!std::regex_match(table.header[j], m, prefixed)) {
            all_prefixed = false;
            break;
        }
        groups[std::stol(m[1].str())].push_back(static_cast<Index>(j));
    }

    MultiSample out;
    if (!all_prefixed) {
        for (Index j = 0; j < table.values.cols(); ++j) {
            out.push_back(table.values.col(j));
        }
        return out;
    }
    for (const auto& [k, columns] : groups) {
        Sample s(table.values.rows(), static_cast<Index>(columns.size()));
        for (std::size_t c = 0; c < columns.size(); ++c) {
            s.col(static_cast<Index>(c)) = table.values.col(columns[c]);
        }
        out.push_back(std::move(s));
    }
    return out;
}

MultiSample load_variables(const std::vector<std::filesystem::path>& paths) {
    if (paths.empty()) {
        throw ParseError("no input files given");
    }
    MultiSample xs;
    if (paths.size() == 1) {
        xs = group_columns(read_csv_file(paths.front()));
    } else {
        for (const auto& p : paths) {
            xs.push_back(read_csv_file(p).values);
        }
    }
    for (std::size_t k = 1; k < xs.size(); ++k) {
        if (xs[k].rows() != xs[0].rows()) {
            throw ParseError("variables have different row counts (" + std::to_string(xs[0].rows()) + " vs " +
                             std::to_string(xs[k].rows()) + ")");
        }
    }
    return xs;
}

CsvTable to_table(const MultiSample& xs) {
    CsvTable t;
    Index cols = 0;
    for (const Sample& s : xs) {
        cols += s.cols();
    }
    const Index rows = xs.empty() ? 0 : xs.front().rows();
    t.values.resize(rows, cols);
    Index offset = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        for (Index j = 0; j < xs[k].cols(); ++j) {
            t.header.push_back("v" + std::to_string(k + 1) + "_" + std::to_string(j + 1));
        }
        t.values.middleCols(offset, xs[k].cols()) = xs[k];
        offset += xs[k].cols();
    }
    return t;
}

std::string format_float(double v) {
    if (std::isnan(v)) {
        return "nan";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

void write_report_csv(std::ostream& out, const std::vector<CellResult>& cells) {
    out << kReportHeader << '\n';
    for (const CellResult& c : cells) {
        out << to_string(c.method) << ',' << c.cell.d << ',' << c.cell.d_ambient << ',' << c.cell.p << ','
            << c.cell.n << ',' << format_float(c.cell.a) << ',' << format_float(c.alpha) << ',' << c.trials << ','
            << c.trials_completed << ',' << c.degenerate_count << ',' << format_float(c.rejection_rate) << ','
            << format_float(c.stderr_rate) << ',' << format_float(c.mean_runtime_seconds) << ',' << c.base_seed
            << '\n';
    }
}

std::vector<CellResult> read_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kReportHeader) {
        throw ParseError("report CSV: unexpected header");
    }
    std::vector<CellResult> cells;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split_fields(line);
        if (f.size() != 14) {
            throw ParseError("report CSV line " + std::to_string(line_no) + ": expected 14 fields");
        }
        CellResult c;
        const auto method = parse_method(f[0]);
        bool ok = method.has_value();
        if (ok) {
            c.method = *method;
        }
        ok = ok && parse_into(f[1], c.cell.d) && parse_into(f[2], c.cell.d_ambient) && parse_into(f[3], c.cell.p) &&
             parse_into(f[4], c.cell.n) && parse_into(f[5], c.cell.a) && parse_into(f[6], c.alpha) &&
             parse_into(f[7], c.trials) && parse_into(f[8], c.trials_completed) &&
             parse_into(f[9], c.degenerate_count) && parse_into(f[10], c.rejection_rate) &&
             parse_into(f[11], c.stderr_rate) && parse_into(f[12], c.mean_runtime_seconds) &&
             parse_into(f[13], c.base_seed);
        if (!ok) {
            throw ParseError("report CSV line " + std::to_string(line_no) + ": malformed field");
        }
        c.cell.dgp = c.cell.d_ambient > 0 ? DgpKind::Mixture : DgpKind::LinearGaussian;
        c.cell.noise_scale = c.cell.dgp == DgpKind::Mixture ? 0.25 : 0.0;
        c.rejections = std::isnan(c.rejection_rate)
                           ? 0
                           : static_cast<Index>(std::llround(c.rejection_rate * static_cast<double>(c.trials_completed)));
        cells.push_back(c);
    }
    return cells;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
    std::filesystem::path p = csv_path;
    if (p.extension() == ".csv") {
        p.replace_extension(".meta");
    } else {
        p += ".meta";
    }
    return p;
}

void write_report_meta(std::ostream& out, const GridReport& report) {
    out << "config_hash=" << report.config_hash << '\n';
    out << "tool_version=" << report.tool_version << '\n';
    out << "hardware=" << report.hardware << '\n';
    out << "base_seed=" << report.base_seed << '\n';
    out << "cells=" << report.cells.size() << '\n';
}

void write_report(const std::filesystem::path& csv_path, const GridReport& report) {
    std::ofstream csv(csv_path);
    if (!csv) {
        throw ParseError("cannot write '" + csv_path.string() + "'");
    }
    write_report_csv(csv, report.cells);
    std::ofstream meta(sidecar_path(csv_path));
    if (!meta) {
        throw ParseError("cannot write '" + sidecar_path(csv_path).string() + "'");
    }
    write_report_meta(meta, report);
}

}  // namespace mhsic

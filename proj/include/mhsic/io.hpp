#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "mhsic/harness.hpp"
#include "mhsic/types.hpp"

namespace mhsic {

/// A numeric CSV file with a header row.
struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

/// Parses a header + numeric rows. Every cell must be a finite real and
/// every row must have as many cells as the header. Throws ParseError.
CsvTable read_csv(std::istream& in, const std::string& source = "<stream>");
CsvTable read_csv_file(const std::filesystem::path& path);

void write_csv(std::ostream& out, const CsvTable& table);

/// Splits a single table into variables. If every column is named
/// "v<k>_<anything>", columns are grouped by k (in increasing k); otherwise
/// each column is its own one-dimensional variable.
MultiSample group_columns(const CsvTable& table);

/// One file per variable (all columns of a file form the variable), or a
/// single file split with group_columns. Throws ParseError on unequal row counts.
MultiSample load_variables(const std::vector<std::filesystem::path>& paths);

/// Table with columns v1_1..v1_q1, v2_1.., one prefix per variable.
CsvTable to_table(const MultiSample& xs);

/// %.9g rendering; "nan" for NaN.
std::string format_float(double v);

inline constexpr const char* kReportHeader =
    "method,d,d_ambient,p,n,a,alpha,M,trials_completed,degenerate_count,rejection_rate,stderr_rate,mean_runtime_s,base_seed";

void write_report_csv(std::ostream& out, const std::vector<CellResult>& cells);
std::vector<CellResult> read_report_csv(std::istream& in);

/// Path of the provenance sidecar: same basename with a .meta suffix.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

void write_report_meta(std::ostream& out, const GridReport& report);

/// Writes the CSV and its .meta sidecar.
void write_report(const std::filesystem::path& csv_path, const GridReport& report);

}  // namespace mhsic

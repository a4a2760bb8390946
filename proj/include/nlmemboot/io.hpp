#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nlmemboot/model.hpp"

namespace nlmemboot {

/// Fixed-point-free float formatting at 6 significant digits, the CSV
/// precision used across the tool.
std::string format_g6(double v);

std::string read_file(const std::filesystem::path& path);

/// Write via a temp file in the same directory plus rename.
void atomic_write(const std::filesystem::path& path, const std::string& content);

/// Dataset CSV: header `id,x,y` (plus a `group` column when any subject has
/// one), one row per observation, 6 significant digits, '.' decimal point.
std::string dataset_csv(const Dataset& data);

/// Parse a dataset CSV; malformed cells raise InvalidInputError naming the
/// offending row and column. Subjects keep their first-appearance order.
Dataset parse_dataset_csv(const std::string& text);

Dataset read_dataset_csv(const std::filesystem::path& path);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);

/// Generic reader for the tool's header-row CSVs (bootstrap tables, coverage
/// and bias reports): one map from column name to cell text per data row.
std::vector<std::map<std::string, std::string>> parse_csv_table(
    const std::string& text);

}  // namespace nlmemboot

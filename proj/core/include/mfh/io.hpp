#pragma once

// CSV ingestion and export of area-level data.
//
// Areas file:       area_id,y_1..y_k,x_1_1..x_k_s   (X_i row-major)
// Covariance file:  area_id,d_1_1..d_k_k            (D_i row-major)
//
// Rows are joined on area_id; the order of the areas file is kept.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mfh/model.hpp"

namespace mfh {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

/// Comma-separated, optional double quotes, blank lines skipped. Throws
/// ParseError on unreadable files, ragged rows or an empty header.
CsvTable read_csv(const std::filesystem::path& path);

/// Throws ParseError (malformed or duplicate rows), MissingArea and any
/// ValidationError raised by validate_dataset.
Dataset load_dataset(const std::filesystem::path& areas_path,
                     const std::filesystem::path& covariance_path);

/// Writes both files with 17 significant digits so a reload is exact.
void write_dataset(const Dataset& data,
                   const std::filesystem::path& areas_path,
                   const std::filesystem::path& covariance_path);

/// Two-column file area_id,group. Every area of `data` must appear.
std::map<std::string, std::string> load_groups(
    const std::filesystem::path& path, const Dataset& data);

}  // namespace mfh

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pfa/dataset.hpp"

namespace pfa {

// Parses a headered CSV with one group column; all other columns must be
// numeric. Errors name the offending row and column. The returned Dataset is
// centered; group indices follow first appearance of each label.
Dataset ingest_csv(const std::filesystem::path& path,
                   const std::string& group_column, bool log_transform = false);

// Writes values with a header (group column first); full double precision.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data,
                       const std::string& group_column = "group",
                       bool uncenter = false);

struct CsvMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> header;
  std::vector<std::string> row_names;  // empty when the file has none
};

void write_csv_matrix(const std::filesystem::path& path,
                      const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {},
                      const std::vector<std::string>& row_names = {});

CsvMatrix read_csv_matrix(const std::filesystem::path& path);

// write-temp-then-rename
void atomic_write_text(const std::filesystem::path& path,
                       const std::string& content);

// Diverging-palette heatmap (white at zero), plain PPM. Best-effort output;
// nothing downstream reads these back.
void write_ppm_heatmap(const std::filesystem::path& path,
                       const Eigen::MatrixXd& m, int cell = 12);

}  // namespace pfa

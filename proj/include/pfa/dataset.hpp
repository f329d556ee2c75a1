#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace pfa {

// n x p observations with group labels. `group` holds 0-based indices into
// `group_names`; group 0 is the identity-anchored group when fitting in group
// mode. center_vector stores the subtracted global column means so fitted
// models can score new uncentered data.
struct Dataset {
  Eigen::MatrixXd values;               // n x p
  std::vector<int> group;               // length n, values in [0, J)
  std::vector<std::string> group_names; // length J
  std::vector<std::string> variable_names;
  bool centered = false;
  Eigen::VectorXd center_vector;        // length p

  int n() const { return static_cast<int>(values.rows()); }
  int p() const { return static_cast<int>(values.cols()); }
  int n_groups() const { return static_cast<int>(group_names.size()); }

  std::vector<int> group_sizes() const;
  std::vector<std::vector<int>> group_members() const;

  // Throws DataError if labels are not a partition, any group is empty,
  // group 0 has fewer than 2 rows, or the centered flag lies.
  void validate() const;
};

// Subtracts global column means. Means with magnitude below a snap tolerance
// are treated as exactly zero, which makes re-centering a bitwise no-op.
Dataset center_dataset(const Eigen::MatrixXd& raw, std::vector<int> group,
                       std::vector<std::string> group_names = {},
                       std::vector<std::string> variable_names = {});

Dataset center_dataset(const Dataset& raw);

// Centers `values` with a previously learned center vector (for test data).
Eigen::MatrixXd apply_centering(const Eigen::MatrixXd& values,
                                const Eigen::VectorXd& center_vector);

}  // namespace pfa

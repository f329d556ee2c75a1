#include "pfa/dataset.hpp"

#include <cmath>
#include <cstdio>

#include "pfa/errors.hpp"

namespace pfa {

std::vector<int> Dataset::group_sizes() const {
  std::vector<int> sizes(n_groups(), 0);
  for (int g : group) ++sizes[g];
  return sizes;
}

std::vector<std::vector<int>> Dataset::group_members() const {
  std::vector<std::vector<int>> members(n_groups());
  for (int i = 0; i < n(); ++i) members[group[i]].push_back(i);
  return members;
}

void Dataset::validate() const {
  if (static_cast<int>(group.size()) != n())
    throw DataError("group labels do not cover every row");
  const int J = n_groups();
  if (J == 0) throw DataError("dataset has no groups");
  std::vector<int> sizes(J, 0);
  for (int i = 0; i < n(); ++i) {
    if (group[i] < 0 || group[i] >= J)
      throw DataError("row " + std::to_string(i + 1) +
                      " has group index outside 1.." + std::to_string(J));
    ++sizes[group[i]];
  }
  for (int j = 0; j < J; ++j)
    if (sizes[j] < 1)
      throw DataError("group " + group_names[j] + " is empty");
  if (sizes[0] < 2)
    throw DataError("group " + group_names[0] +
                    " needs at least 2 observations (identifiability anchor)");
  if (static_cast<int>(variable_names.size()) != p())
    throw DataError("variable name count does not match column count");
  if (centered) {
    if (center_vector.size() != p())
      throw DataError("centered dataset is missing its center vector");
    const Eigen::VectorXd means = values.colwise().mean();
    for (int c = 0; c < p(); ++c)
      if (std::abs(means[c]) > 1e-10)
        throw DataError("dataset flagged centered but column " +
                        variable_names[c] + " has mean " +
                        std::to_string(means[c]));
  }
}

namespace {

std::vector<std::string> default_names(const std::string& prefix, int count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (int i = 1; i <= count; ++i) names.push_back(prefix + std::to_string(i));
  return names;
}

void reject_nonfinite(const Eigen::MatrixXd& raw,
                      const std::vector<std::string>& variable_names) {
  for (int c = 0; c < raw.cols(); ++c)
    for (int r = 0; r < raw.rows(); ++r)
      if (!std::isfinite(raw(r, c)))
        throw DataError("non-finite value in variable " + variable_names[c] +
                        ", row " + std::to_string(r + 1));
}

}  // namespace

Dataset center_dataset(const Eigen::MatrixXd& raw, std::vector<int> group,
                       std::vector<std::string> group_names,
                       std::vector<std::string> variable_names) {
  if (raw.rows() < 2) throw DataError("need at least 2 observations to center");
  Dataset out;
  out.variable_names = variable_names.empty()
                           ? default_names("v", static_cast<int>(raw.cols()))
                           : std::move(variable_names);
  reject_nonfinite(raw, out.variable_names);

  int J = 0;
  for (int g : group) J = std::max(J, g + 1);
  out.group = std::move(group);
  out.group_names =
      group_names.empty() ? default_names("g", J) : std::move(group_names);

  Eigen::VectorXd mu = raw.colwise().mean();
  // Means already indistinguishable from zero snap to exactly zero; centering
  // an already-centered matrix is then a bitwise no-op.
  for (int c = 0; c < mu.size(); ++c) {
    const double tol = 1e-13 * (1.0 + raw.col(c).cwiseAbs().maxCoeff());
    if (std::abs(mu[c]) <= tol) mu[c] = 0.0;
  }
  out.values = raw.rowwise() - mu.transpose();
  out.center_vector = mu;
  out.centered = true;
  out.validate();
  return out;
}

Dataset center_dataset(const Dataset& raw) {
  Dataset out = center_dataset(raw.values, raw.group, raw.group_names,
                               raw.variable_names);
  if (raw.centered) out.center_vector += raw.center_vector;
  return out;
}

Eigen::MatrixXd apply_centering(const Eigen::MatrixXd& values,
                                const Eigen::VectorXd& center_vector) {
  if (values.cols() != center_vector.size())
    throw DataError("center vector length does not match column count");
  return values.rowwise() - center_vector.transpose();
}

}  // namespace pfa

#pragma once

#include <Eigen/Dense>
#include <vector>

namespace wgflow {

struct Assignment {
  std::vector<int> column_of_row;
  double cost = 0.0;
};

// Square min-cost perfect matching, O(N^3) Hungarian method with potentials.
Assignment solve_assignment(const Eigen::MatrixXd& cost);
Assignment solve_assignment_max(const Eigen::MatrixXd& weight);

}  // namespace wgflow

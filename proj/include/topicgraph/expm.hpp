#pragma once

#include <Eigen/Dense>

namespace topicgraph {

/// Dense matrix exponential by scaling and squaring with a fixed degree-13
/// Pade approximant (Higham 2005).
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

}  // namespace topicgraph

#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ppl {

// Product-moment correlation; throws ValidationError when either input is
// constant (r undefined) or lengths disagree / are < 2.
double pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct PrF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// Predicted positive iff degree >= tau; label positive iff votes >= 3.
// Precision/recall/F default to 0 on empty denominators.
PrF fscore(const Eigen::VectorXd& degrees, const std::vector<int>& votes, double tau);

double mean_of(const std::vector<double>& xs);
// Population (divide-by-n) standard deviation.
double population_sd(const std::vector<double>& xs);

}  // namespace ppl

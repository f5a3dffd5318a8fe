#pragma once

#include <cstdint>
#include <span>

namespace headhunt {

// Area under the ROC curve from the Mann-Whitney rank statistic; tied scores
// receive their average rank. Needs both classes present.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// Average precision, sum over distinct thresholds of (R_i - R_{i-1}) P_i with
// tied scores forming one threshold. Needs at least one positive.
double average_precision(std::span<const double> scores, std::span<const std::uint8_t> labels);

}  // namespace headhunt

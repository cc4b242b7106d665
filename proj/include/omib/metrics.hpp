#pragma once

#include <cstddef>
#include <span>

namespace omib {

/// Fraction of positions where `predicted` equals `labels`.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

/// Mann-Whitney AUC: probability that a positive outscores a negative, ties
/// counting one half. Labels are 0/1; both classes must be present.
double binary_auc(std::span<const double> scores, std::span<const std::size_t> labels);

/// Flags the top-P scores as positive, P being the number of true positives
/// (ties broken by score descending, then index ascending), and returns F1.
double f1_at_matched_threshold(std::span<const double> scores, std::span<const std::size_t> labels);

}  // namespace omib

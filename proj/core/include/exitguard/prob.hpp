#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "exitguard/types.hpp"

namespace exitguard {

/// Floor applied to probabilities before taking a logarithm.
inline constexpr double kProbFloor = 1e-12;

/// Max-subtracted softmax. Throws InvalidInput on empty or non-finite input.
ProbVec softmax(std::span<const double> logits);

/// Same as softmax but without ProbVec validation; used on hot paths where
/// the input is known to be finite.
void softmax_into(std::span<const double> logits, std::span<double> out,
                  double temperature = 1.0);

double log_sum_exp(std::span<const double> values);

/// log softmax(logits / temperature).
std::vector<double> log_softmax(std::span<const double> logits,
                                double temperature = 1.0);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax_class(std::span<const double> values);
inline std::size_t argmax_class(const ProbVec& p) { return argmax_class(p.values()); }

double safe_log(double p);

}  // namespace exitguard

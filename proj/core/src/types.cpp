#include "exitguard/types.hpp"

#include <cmath>
#include <string>

#include "exitguard/error.hpp"

namespace exitguard {

ProbVec::ProbVec(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidInput("probability vector is empty");
  double total = 0.0;
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidInput("probability entry outside [0,1]: " + std::to_string(v));
    }
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw InvalidInput("probabilities sum to " + std::to_string(total));
  }
}

LogitMatrix::LogitMatrix(std::size_t exits, std::size_t classes)
    : exits_(exits), classes_(classes), data_(exits * classes, 0.0) {}

LogitMatrix::LogitMatrix(std::size_t exits, std::size_t classes, std::vector<double> data)
    : exits_(exits), classes_(classes), data_(std::move(data)) {
  if (data_.size() != exits_ * classes_) {
    throw InvalidInput("logit matrix data size does not match " + std::to_string(exits_) +
                       "x" + std::to_string(classes_));
  }
}

LogitMatrix LogitMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  LogitMatrix m(rows.size(), rows.front().size());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j].size() != m.classes_) throw InvalidInput("logit rows have unequal length");
    std::copy(rows[j].begin(), rows[j].end(), m.row(j).begin());
  }
  return m;
}

void validate(const ExitRecord& record) {
  if (record.exits() < 2) {
    throw InvalidInput("record '" + record.id + "' has fewer than 2 exits");
  }
  if (record.classes() < 2) {
    throw InvalidInput("record '" + record.id + "' has fewer than 2 classes");
  }
  if (record.label >= record.classes()) {
    throw InvalidInput("record '" + record.id + "' label " + std::to_string(record.label) +
                       " out of range");
  }
  for (double z : record.logits.data()) {
    if (!std::isfinite(z)) throw InvalidInput("record '" + record.id + "' has non-finite logit");
  }
}

void validate_batch(std::span<const ExitRecord> records) {
  if (records.empty()) return;
  const auto k = records.front().exits();
  const auto c = records.front().classes();
  for (const auto& r : records) {
    validate(r);
    if (r.exits() != k || r.classes() != c) {
      throw InvalidInput("record '" + r.id + "' shape differs from the first record");
    }
  }
}

}  // namespace exitguard

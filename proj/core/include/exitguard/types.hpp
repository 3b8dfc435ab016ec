#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace exitguard {

/// A probability vector over C classes. Construction validates that every
/// entry lies in [0, 1] and the total is 1 within 1e-9.
class ProbVec {
 public:
  static constexpr double kSumTolerance = 1e-9;

  explicit ProbVec(std::vector<double> values);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t c) const { return values_[c]; }

  friend bool operator==(const ProbVec&, const ProbVec&) = default;

 private:
  std::vector<double> values_;
};

/// Row-major K x C matrix of per-exit logits.
class LogitMatrix {
 public:
  LogitMatrix() = default;
  LogitMatrix(std::size_t exits, std::size_t classes);
  LogitMatrix(std::size_t exits, std::size_t classes, std::vector<double> data);
  static LogitMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t exits() const noexcept { return exits_; }
  std::size_t classes() const noexcept { return classes_; }

  std::span<const double> row(std::size_t exit) const {
    return {data_.data() + exit * classes_, classes_};
  }
  std::span<double> row(std::size_t exit) {
    return {data_.data() + exit * classes_, classes_};
  }
  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const LogitMatrix&, const LogitMatrix&) = default;

 private:
  std::size_t exits_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> data_;
};

/// One sample's label plus its logits at every exit.
struct ExitRecord {
  std::string id;
  std::size_t label = 0;
  LogitMatrix logits;

  std::size_t exits() const noexcept { return logits.exits(); }
  std::size_t classes() const noexcept { return logits.classes(); }

  friend bool operator==(const ExitRecord&, const ExitRecord&) = default;
};

/// Throws InvalidInput unless K >= 2, C >= 2, label < C and logits are finite.
void validate(const ExitRecord& record);

/// Validates every record and checks they all share the same K and C.
void validate_batch(std::span<const ExitRecord> records);

/// Raw feature/label pair consumed by the trainer.
struct Sample {
  std::string id;
  std::vector<double> features;
  std::size_t label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

}  // namespace exitguard

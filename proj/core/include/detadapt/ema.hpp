#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

namespace detadapt {

// Flat parameter vector with a dimension fixed at construction. All entries
// are finite; the constructors and set() enforce it.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0);
  explicit ParamVector(std::vector<double> values);
  ParamVector(std::initializer_list<double> values) : ParamVector(std::vector<double>(values)) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  void set(std::size_t i, double v);
  std::span<const double> values() const { return values_; }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> values_;
};

double distance(const ParamVector& a, const ParamVector& b);

// Mean-teacher state: teacher <- m * teacher + (1 - m) * student.
struct EmaState {
  ParamVector teacher;
  double momentum = 0.999;
  std::uint64_t step = 0;

  // Teacher starts as a copy of the student, so step 0 is a fixed point.
  static EmaState from_student(const ParamVector& student, double momentum);
};

// Throws ConfigError on a dimension mismatch or momentum outside [0, 1), and
// DataError on a non-finite student entry.
EmaState ema_update(const EmaState& state, const ParamVector& student);

}  // namespace detadapt

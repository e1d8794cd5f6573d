#include "detadapt/ema.hpp"

#include <cmath>
#include <string>

#include "detadapt/error.hpp"

namespace detadapt {

namespace {

void require_finite(double v) {
  if (!std::isfinite(v)) throw DataError("parameter vector entries must be finite");
}

}  // namespace

ParamVector::ParamVector(std::size_t dim, double fill) : values_(dim, fill) { require_finite(fill); }

ParamVector::ParamVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) require_finite(v);
}

void ParamVector::set(std::size_t i, double v) {
  require_finite(v);
  values_.at(i) = v;
}

double distance(const ParamVector& a, const ParamVector& b) {
  if (a.size() != b.size()) throw ConfigError("parameter vector dimensions differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum);
}

EmaState EmaState::from_student(const ParamVector& student, double momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("EMA momentum must lie in [0, 1)");
  return {student, momentum, 0};
}

EmaState ema_update(const EmaState& state, const ParamVector& student) {
  const double m = state.momentum;
  if (!(m >= 0.0 && m < 1.0)) throw ConfigError("EMA momentum must lie in [0, 1)");
  if (student.size() != state.teacher.size())
    throw ConfigError("EMA dimension mismatch: teacher " + std::to_string(state.teacher.size()) +
                      ", student " + std::to_string(student.size()));
  std::vector<double> next(student.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    require_finite(student[i]);
    next[i] = m * state.teacher[i] + (1.0 - m) * student[i];
  }
  return {ParamVector(std::move(next)), m, state.step + 1};
}

}  // namespace detadapt

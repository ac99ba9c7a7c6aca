/*
 * Copyright 2026 The det Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "det/optimizer.hpp"

#include <cmath>

#include "det/error.hpp"

namespace det {

void OptimizerConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorKind::kConfig, "learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorKind::kConfig, "Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) fail(ErrorKind::kConfig, "epsilon must be positive");
  if (batch_size <= 0) fail(ErrorKind::kConfig, "batch_size must be positive");
  if (epochs < 0) fail(ErrorKind::kConfig, "epochs must be non-negative");
}

void Adam::step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) {
    fail(ErrorKind::kShape, "Adam::step got mismatched parameter and gradient lists");
  }
  if (first_.empty()) {
    for (const Matrix* p : params) {
      first_.push_back(Matrix::Zero(p->rows(), p->cols()));
      second_.push_back(Matrix::Zero(p->rows(), p->cols()));
    }
  } else if (first_.size() != params.size()) {
    fail(ErrorKind::kShape, "Adam::step parameter list changed between steps");
  }
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  const double lr = config_.learning_rate;
  for (size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = *grads[i];
    first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * g;
    second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * g.cwiseAbs2();
    params[i]->array() -= lr * (first_[i].array() / c1) /
                          ((second_[i].array() / c2).sqrt() + config_.epsilon);
  }
}

}  // namespace det

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

#ifndef DET_OPTIMIZER_HPP_
#define DET_OPTIMIZER_HPP_

#include <cstdint>
#include <vector>

#include "det/encoder.hpp"

namespace det {

struct OptimizerConfig {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 32;
  int epochs = 1;
  uint64_t seed = 0;

  void validate() const;
};

// Adam with bias correction. Parameters and gradients are passed as parallel
// lists in a fixed order; moment buffers are created on the first step.
class Adam {
 public:
  explicit Adam(const OptimizerConfig& config) : config_(config) {}

  void step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads);
  int64_t steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  int64_t steps_ = 0;
};

}  // namespace det

#endif  // DET_OPTIMIZER_HPP_

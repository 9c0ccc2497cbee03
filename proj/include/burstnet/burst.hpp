/**
 * Copyright 2026 The burstnet Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <array>
#include <string>

#include "burstnet/tensor.hpp"

namespace burstnet {

/// Three frames captured by one trigger, in capture order.
struct Burst {
  std::string burst_id;
  std::string site_id;
  int label = -1;  // 1 animal, 0 empty, -1 unknown
  std::array<Frame, 3> frames;
};

}  // namespace burstnet

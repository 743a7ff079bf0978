// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "fbmac/parallel.hpp"

#include <cstdlib>
#include <string>

namespace fbmac {

namespace {

std::atomic<int> g_override{0};

int env_workers() {
  if (const char* s = std::getenv("FBMAC_THREADS")) {
    try {
      const int v = std::stoi(s);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int worker_count() {
  const int o = g_override.load();
  return o > 0 ? o : env_workers();
}

void set_worker_count(int workers) { g_override.store(workers > 0 ? workers : 0); }

}  // namespace fbmac

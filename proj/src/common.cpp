// Copyright 2026 The WMPC Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wmpc/common.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <thread>

namespace wmpc
{
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed)
{
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value)
{
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

unsigned worker_count()
{
  if (const char * env = std::getenv("WMPC_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) {
      return static_cast<unsigned>(n);
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1U : hw;
}

namespace
{
std::mutex & warning_mutex()
{
  static std::mutex m;
  return m;
}

WarningSink & warning_sink()
{
  static WarningSink sink;
  return sink;
}
}  // namespace

void set_warning_sink(WarningSink sink)
{
  std::lock_guard<std::mutex> lock(warning_mutex());
  warning_sink() = std::move(sink);
}

void warn(const std::string & message)
{
  std::lock_guard<std::mutex> lock(warning_mutex());
  if (warning_sink()) {
    warning_sink()(message);
  } else {
    std::fprintf(stderr, "warning: %s\n", message.c_str());
  }
}

}  // namespace wmpc

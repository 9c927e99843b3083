// Copyright Contributors to the splatover project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace splatover {

/// Process-wide worker count used by parallel_for (default 1).
void set_thread_count(int threads);
int thread_count() noexcept;

/// Runs body(begin, end) over a static partition of [0, n). Callers keep results
/// schedule-independent by writing to per-index slots and reducing in index order.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)> &body);

} // namespace splatover

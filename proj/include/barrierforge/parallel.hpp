#pragma once

#include <functional>

namespace barrierforge {

// BARRIERFORGE_WORKERS if set, else the configured value, else hardware threads
int worker_count(int configured = 0);

// runs f(0..n-1) on a small pool; the first exception is rethrown after all workers stop
void parallel_for(int n, const std::function<void(int)>& f, int workers = 0);

}  // namespace barrierforge

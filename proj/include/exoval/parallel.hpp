#pragma once

#include <cstddef>
#include <functional>

namespace exoval {

// Worker count used by parallel_for. Defaults to 1.
void set_num_threads(unsigned n);
unsigned num_threads();

// Calls body(i) for every i in [0, n). Items may run concurrently, so body must
// only write to slots owned by i; results are therefore independent of the
// thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace exoval

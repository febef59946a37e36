#pragma once

#include <cstddef>

// Heap accounting for the process. Linking alloc_probe.cpp replaces the C
// allocation entry points with counting wrappers around glibc.
namespace alloc_probe {

std::size_t current_bytes();
std::size_t peak_bytes();
// Sets the peak to the current level and returns it.
std::size_t reset_peak();

}  // namespace alloc_probe

#pragma once

namespace ctxbias {

// Execution policy for the data-parallel kernels. Every kernel that accepts
// an Exec produces bit-identical results for Serial and Parallel regardless
// of the thread count: floating-point reductions follow a fixed summation
// tree (per-sentence partials combined in a canonical order), and all other
// parallel loops write to disjoint preallocated slots.
enum class Exec { Serial, Parallel };

// Number of worker threads the Parallel policy will use.
int max_threads();

// Caps OpenMP workers for the whole process. n <= 0 leaves the runtime
// default untouched.
void set_thread_cap(int n);

}  // namespace ctxbias

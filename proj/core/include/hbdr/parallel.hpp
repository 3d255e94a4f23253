#ifndef HBDR_PARALLEL_HPP
#define HBDR_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace hbdr {

// Runs fn(0) .. fn(n_chunks-1) on up to n_threads workers. Chunks are
// statically assigned (worker w takes chunks w, w+W, ...), so outputs
// are identical for any thread count as long as chunks write disjoint
// state and the caller reduces in chunk order. The first exception, if
// any, is rethrown on the calling thread.
inline void parallel_chunks(std::size_t n_chunks, std::size_t n_threads,
                            const std::function<void(std::size_t)>& fn) {
  if (n_chunks == 0) return;
  if (n_threads <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  const std::size_t workers = std::min(n_threads, n_chunks);
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < n_chunks; c += workers) fn(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

// Splits [0, n) into `parts` contiguous ranges; part p is
// [chunk_begin(n, parts, p), chunk_begin(n, parts, p+1)).
inline std::size_t chunk_begin(std::size_t n, std::size_t parts,
                               std::size_t p) {
  return n * p / parts;
}

}  // namespace hbdr

#endif  // HBDR_PARALLEL_HPP

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mobench {

inline std::size_t default_jobs() {
	return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each index runs
/// exactly once; the first exception thrown by any task is rethrown here.
template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn &&fn) {
	jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
	if (jobs == 1) {
		for (std::size_t i = 0; i < count; ++i) {
			fn(i);
		}
		return;
	}
	std::atomic<std::size_t> next{0};
	std::exception_ptr failure;
	std::mutex failure_mutex;
	{
		std::vector<std::jthread> workers;
		workers.reserve(jobs);
		for (std::size_t w = 0; w < jobs; ++w) {
			workers.emplace_back([&] {
				for (std::size_t i = next++; i < count; i = next++) {
					try {
						fn(i);
					} catch (...) {
						std::lock_guard lock(failure_mutex);
						if (!failure) {
							failure = std::current_exception();
						}
						next = count;
					}
				}
			});
		}
	}
	if (failure) {
		std::rethrow_exception(failure);
	}
}

} // namespace mobench

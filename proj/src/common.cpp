#include "afc/common.hpp"

#include <atomic>
#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace afc {

double wrap_degrees(double angle)
{
    double wrapped = std::fmod(angle, 360.0);
    if (wrapped <= -180.0) {
        wrapped += 360.0;
    } else if (wrapped > 180.0) {
        wrapped -= 360.0;
    }
    return wrapped;
}

double measure_fwhm(const Eigen::VectorXd& x, const Eigen::VectorXd& y)
{
    Eigen::Index peak = 0;
    const double peak_value = y.maxCoeff(&peak);
    const double half = 0.5 * peak_value;

    auto crossing = [&](Eigen::Index inside, Eigen::Index outside) {
        const double t = (y[inside] - half) / (y[inside] - y[outside]);
        return x[inside] + t * (x[outside] - x[inside]);
    };

    Eigen::Index left = peak;
    while (left > 0 && y[left - 1] >= half) {
        --left;
    }
    Eigen::Index right = peak;
    while (right + 1 < y.size() && y[right + 1] >= half) {
        ++right;
    }
    if (left == 0 || right + 1 == y.size()) {
        return 0.0;
    }
    return crossing(right, right + 1) - crossing(left, left - 1);
}

int resolve_workers(int workers)
{
    if (workers > 0) {
        return workers;
    }
    return static_cast<int>(std::max(1U, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& task)
{
    const auto threads = static_cast<std::size_t>(resolve_workers(workers));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto run = [&] {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= count) {
                return;
            }
            try {
                task(k);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(count);
            }
        }
    };

    if (threads <= 1 || count <= 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < std::min(threads, count); ++t) {
            pool.emplace_back(run);
        }
        for (auto& t : pool) {
            t.join();
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace afc

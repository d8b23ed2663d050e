#include "afc/fft.hpp"

#include <map>
#include <mutex>
#include <utility>

#include <fftw3.h>

namespace afc::fft {

namespace {

std::mutex planner_mutex;

fftw_plan plan_for(std::size_t n, int sign)
{
    static std::map<std::pair<std::size_t, int>, fftw_plan> plans;
    std::lock_guard<std::mutex> lock(planner_mutex);
    auto it = plans.find({n, sign});
    if (it != plans.end()) {
        return it->second;
    }
    auto* scratch = fftw_alloc_complex(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n), scratch, scratch, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    require_numerics(p != nullptr, "FFTW could not create a plan");
    plans.emplace(std::make_pair(n, sign), p);
    return p;
}

void execute(std::vector<Complex>& data, int sign)
{
    if (data.empty()) {
        return;
    }
    auto* buffer = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(plan_for(data.size(), sign), buffer, buffer);
}

} // namespace

void forward(std::vector<Complex>& data)
{
    execute(data, FFTW_FORWARD);
}

void inverse(std::vector<Complex>& data)
{
    execute(data, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(data.size());
    for (auto& x : data) {
        x *= scale;
    }
}

} // namespace afc::fft

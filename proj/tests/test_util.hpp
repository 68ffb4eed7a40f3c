#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "agaze/scalar_map.hpp"

namespace testutil {

// Scratch directory, removed on scope exit.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        const auto base = std::filesystem::temp_directory_path();
        path_ = base / ("agaze_test_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }
    std::string str() const { return path_.string(); }

private:
    std::filesystem::path path_;
};

inline agaze::ScalarMap random_map(int w, int h, std::mt19937_64& rng) {
    agaze::ScalarMap m(w, h, agaze::ScalarMap::Kind::Normalized);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : m.values) v = u(rng);
    return m;
}

}  // namespace testutil

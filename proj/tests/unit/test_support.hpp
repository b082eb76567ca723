// Shared fixtures for the unit tests.
#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "funaft/funaft.hpp"

namespace testutil {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("funaft_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline funaft::Subject make_subject(const std::string& id, double time, bool event, std::vector<double> grid,
                                    std::vector<double> values, std::vector<double> scalars = {}) {
    funaft::Subject s;
    s.id = id;
    s.time = time;
    s.event = event;
    s.grid = std::move(grid);
    s.values = std::move(values);
    s.scalars = std::move(scalars);
    return s;
}

/// DGP 1 data with noisy curves so that the linear design has full column rank.
inline funaft::SimulatedData full_rank_sample(int n, std::uint64_t seed, int p = 100) {
    auto cfg = funaft::SimulationConfig::defaults(funaft::Dgp::lfaft_lognormal, n, p, seed);
    auto gen = funaft::FpcGenerator::fourier(8, 100.0, 0.5);
    gen.mean = [](double) { return 25.0; };
    gen.noise_sd = 3.0;
    return funaft::simulate_dgp(cfg, gen);
}

/// Random dense parameter vector for gradient checks.
inline Eigen::VectorXd random_theta(std::mt19937_64& rng, Eigen::Index size, double scale) {
    std::normal_distribution<double> nd(0.0, scale);
    Eigen::VectorXd t(size);
    for (Eigen::Index i = 0; i < size; ++i) t[i] = nd(rng);
    return t;
}

}  // namespace testutil

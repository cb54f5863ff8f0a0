#pragma once

#include <filesystem>
#include <functional>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "stresskit/dataset.hpp"
#include "stresskit/error.hpp"

namespace testing_support {

inline stresskit::ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const stresskit::Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return stresskit::ErrorCode::Io;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("stresskit_tests_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Gaussian blobs, one per class, centered at class * gap on every axis.
inline stresskit::Dataset blobs(const std::vector<std::size_t>& counts, std::size_t dims, double gap,
                                unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    stresskit::FeatureSchema schema;
    for (std::size_t j = 0; j < dims; ++j) schema.feature_names.push_back("f" + std::to_string(j));
    std::vector<double> x;
    std::vector<stresskit::Label> y;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        for (std::size_t i = 0; i < counts[c]; ++i) {
            for (std::size_t j = 0; j < dims; ++j) x.push_back(gap * static_cast<double>(c) + noise(gen));
            y.push_back(static_cast<stresskit::Label>(c));
        }
    }
    return stresskit::Dataset(schema, x, y, std::nullopt, counts.size());
}

}  // namespace testing_support

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ads/rng.hpp"
#include "ads/tensor.hpp"

namespace testsupport {

inline ads::tensor::Tensor random_tensor(std::vector<int> shape, ads::Rng& rng,
                                         double scale = 1.0) {
    auto t = ads::tensor::Tensor::zeros(std::move(shape));
    for (double& x : t.data) x = scale * rng.gaussian();
    return t;
}

// Scratch directory under the build tree, wiped per construction.
class TempDir {
public:
    explicit TempDir(const std::string& name)
        : path_(std::filesystem::temp_directory_path() / ("ads_test_" + name)) {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport

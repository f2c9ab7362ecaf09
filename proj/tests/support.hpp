#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "catch_amalgamated.hpp"
#include "mortjump/error.hpp"

namespace mortjump::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 gen(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() /
                ("mortjump_" + tag + "_" + std::to_string(gen()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::string file(const std::string& name) const { return (path_ / name).string(); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream(path) << text;
}

inline std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace mortjump::testing

// Runs `expr` and requires it to throw mortjump::Error with the given code.
#define REQUIRE_ERRC(expr, errc)                                            \
    do {                                                                    \
        bool mj_thrown_ = false;                                            \
        try {                                                               \
            (void)(expr);                                                   \
        } catch (const ::mortjump::Error& mj_e_) {                          \
            mj_thrown_ = true;                                              \
            INFO(mj_e_.what());                                             \
            REQUIRE(mj_e_.code() == (errc));                                \
        }                                                                   \
        REQUIRE(mj_thrown_);                                                \
    } while (false)

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testsupport {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

inline std::string default_ini() { return read_file(std::filesystem::path(RYDSIM_SOURCE_DIR) / "configs/default.ini"); }

// Replaces (or adds) `key = value` inside [section].
inline std::string set_key(const std::string& ini, const std::string& section, const std::string& key,
                           const std::string& value) {
    std::istringstream in(ini);
    std::string out, line, current;
    bool done = false;
    auto flush_missing = [&](const std::string& leaving) {
        if (!done && leaving == section) {
            out += key + " = " + value + "\n";
            done = true;
        }
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '[') {
            flush_missing(current);
            current = line.substr(1, line.find(']') - 1);
        } else if (current == section && !done) {
            const auto eq = line.find('=');
            if (eq != std::string::npos) {
                auto k = line.substr(0, eq);
                k.erase(k.find_last_not_of(" \t") + 1);
                if (k == key) {
                    out += key + " = " + value + "\n";
                    done = true;
                    continue;
                }
            }
        }
        out += line + "\n";
    }
    flush_missing(current);
    if (!done) out += "[" + section + "]\n" + key + " = " + value + "\n";
    return out;
}

inline std::string remove_key(const std::string& ini, const std::string& key) {
    std::istringstream in(ini);
    std::string out, line;
    while (std::getline(in, line))
        if (line.rfind(key + " ", 0) != 0 && line.rfind(key + "=", 0) != 0) out += line + "\n";
    return out;
}

class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() / ("rydsim_test_" + tag);
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
};

}  // namespace testsupport

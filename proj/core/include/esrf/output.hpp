#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace esrf {

/// Files collected in memory and written only once the run has succeeded.
/// Each file goes to "<name>.tmp" first and is renamed into place.
class OutputSet {
public:
    void add(const std::string& relative_path, std::string content);
    bool contains(const std::string& relative_path) const;
    const std::string& content(const std::string& relative_path) const;
    const std::map<std::string, std::string>& files() const { return files_; }

    /// Throws Error when a file cannot be written.
    void commit(const std::filesystem::path& dir) const;

private:
    std::map<std::string, std::string> files_;
};

/// Writes `content` to `path` through a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace esrf

#include "esrf/output.hpp"

#include "esrf/error.hpp"

#include <fstream>
#include <system_error>

namespace esrf {

void OutputSet::add(const std::string& relative_path, std::string content) {
    files_[relative_path] = std::move(content);
}

bool OutputSet::contains(const std::string& relative_path) const {
    return files_.count(relative_path) != 0;
}

const std::string& OutputSet::content(const std::string& relative_path) const {
    const auto it = files_.find(relative_path);
    if (it == files_.end()) {
        throw Error("no output named '" + relative_path + "'");
    }
    return it->second;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw Error("cannot create '" + path.parent_path().string() + "': " + ec.message());
        }
    }
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) {
            throw Error("cannot write '" + tmp.string() + "'");
        }
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot rename onto '" + path.string() + "'");
    }
}

void OutputSet::commit(const std::filesystem::path& dir) const {
    for (const auto& [name, content] : files_) {
        write_atomic(dir / name, content);
    }
}

}  // namespace esrf

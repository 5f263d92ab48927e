#include "cihj/io.hpp"

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace cihj {

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("atomic_write: cannot open " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw ConfigError("atomic_write: short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file: " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return buf;
    }
    return std::string(buf, end);
}

std::string path_to_csv(const GridPath& path) {
    std::ostringstream os;
    os << "time";
    for (int i = 0; i < path.spec().n; ++i) os << ",x" << i;
    os << "\n";
    for (int j = 0; j < path.nodes(); ++j) {
        os << format_double(path.spec().time_at(j));
        for (double c : path.at(j)) os << "," << format_double(c);
        os << "\n";
    }
    return os.str();
}

std::string value_table_to_csv(const ValueTable& table) {
    const GridSpec& g = table.spec();
    std::ostringstream os;
    os << "node,time,value";
    const int width = g.node_count() * g.n;
    for (int i = 0; i < width; ++i) os << ",s" << i;
    os << "\n";
    for (const auto& [key, value] : table.entries()) {
        os << key.first << "," << format_double(g.time_at(key.first)) << ","
           << format_double(value);
        for (double s : key.second) os << "," << format_double(s);
        os << "\n";
    }
    return os.str();
}

ValueTable value_table_from_csv(const GridSpec& spec, const std::string& csv) {
    ValueTable table(spec);
    const std::size_t width = static_cast<std::size_t>(spec.node_count()) * spec.n;
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("value table CSV: empty");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != width + 3)
            throw ConfigError("value table CSV: wrong column count for the given grid");
        const int node = std::stoi(cells[0]);
        const double value = std::stod(cells[2]);
        std::vector<double> samples(width);
        for (std::size_t i = 0; i < width; ++i) samples[i] = std::stod(cells[i + 3]);
        if (!spec.is_future_node(node)) throw ConfigError("value table CSV: node outside [0, T]");
        table.set_key(ValueTable::Key{node, std::move(samples)}, value);
    }
    return table;
}

} // namespace cihj

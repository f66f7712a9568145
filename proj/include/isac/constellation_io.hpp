#ifndef ISAC_CONSTELLATION_IO_HPP
#define ISAC_CONSTELLATION_IO_HPP

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "isac/constellation.hpp"

namespace isac {

// Text table, one row per point: re,im,prob,label with the label as an
// M-character bit string. Rows are label-lexicographic, floats carry 17
// significant digits so a round trip is exact.
inline std::string to_table(const Constellation& c) {
    std::vector<std::size_t> order(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return c.labels[a] < c.labels[b]; });

    std::string out = "re,im,prob,label\n";
    char buf[128];
    for (std::size_t i : order) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,", c.points[i].real(),
                      c.points[i].imag(), c.probs[i]);
        out += buf;
        out += c.label_string(i);
        out += '\n';
    }
    return out;
}

inline Constellation from_table(std::istream& in) {
    Constellation c;
    std::string line;
    if (!std::getline(in, line) || line.rfind("re,im,prob,label", 0) != 0)
        throw std::runtime_error("constellation table: missing header row");
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string f[4];
        for (int i = 0; i < 4; ++i)
            if (!std::getline(ls, f[i], ','))
                throw std::runtime_error("constellation table: malformed row: " + line);
        c.points.emplace_back(std::stod(f[0]), std::stod(f[1]));
        c.probs.push_back(std::stod(f[2]));
        const std::string& lab = f[3];
        if (c.bits_per_symbol == 0) c.bits_per_symbol = static_cast<int>(lab.size());
        if (lab.size() != static_cast<std::size_t>(c.bits_per_symbol))
            throw std::runtime_error("constellation table: inconsistent label length");
        std::uint32_t l = 0;
        for (char ch : lab) {
            if (ch != '0' && ch != '1')
                throw std::runtime_error("constellation table: bad label: " + lab);
            l = (l << 1) | static_cast<std::uint32_t>(ch - '0');
        }
        c.labels.push_back(l);
    }
    validate(c);
    return c;
}

inline void save_constellation(const Constellation& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << to_table(c);
}

inline Constellation load_constellation(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    return from_table(f);
}

} // namespace isac

#endif

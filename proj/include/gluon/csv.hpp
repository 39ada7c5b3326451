#ifndef GLUON_CSV_HPP
#define GLUON_CSV_HPP

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "gluon/field.hpp"

namespace gluon {

// Shortest round-trip style float formatting used for every CSV cell.
inline std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct CsvFile {
    std::ofstream out;

    CsvFile(const std::string& path, const std::vector<std::string>& header) {
        out.open(path, std::ios::trunc);
        if (!out) fail(Stage::io, 4, "cannot open '" + path + "' for writing");
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out << ',';
            out << header[i];
        }
        out << '\n';
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << cells[i];
        }
        out << '\n';
    }

    void row_num(const std::vector<double>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out << ',';
            out << fmt_g17(cells[i]);
        }
        out << '\n';
    }
};

// Full field dump, one row per node in (chart, node) order so output is
// byte-identical across thread counts.
inline void export_field_csv(const std::string& path, const Field& f) {
    const Atlas& at = *f.atlas;
    std::vector<std::string> header = {"chart", "i", "j", "k", "x0", "x1", "x2", "class"};
    for (int c = 0; c < f.nc; ++c) header.push_back("c" + std::to_string(c));
    CsvFile csv(path, header);
    for (std::size_t ci = 0; ci < at.charts.size(); ++ci) {
        const Chart& c = at.charts[ci];
        for (std::size_t idx = 0; idx < c.nn(); ++idx) {
            int i, j, k;
            c.unpack(idx, i, j, k);
            Vec3 x = c.coords(i, j, k);
            std::vector<std::string> cells = {
                std::to_string(ci),          std::to_string(i),
                std::to_string(j),           std::to_string(k),
                fmt_g17(x[0]),               fmt_g17(x[1]),
                fmt_g17(x[2]),               std::to_string(int(c.cls(idx)))};
            for (int q = 0; q < f.nc; ++q) cells.push_back(fmt_g17(f.comp(int(ci), q)[idx]));
            csv.row(cells);
        }
    }
}

}  // namespace gluon

#endif

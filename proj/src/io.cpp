#include "sflr/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace sflr {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& field, const std::string& path, std::size_t line_no) {
    const std::string t = trim(field);
    if (t.empty())
        throw DataError(path + ":" + std::to_string(line_no) + ": empty numeric field");
    std::size_t used = 0;
    double v;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(line_no) + ": cannot parse '" + t + "'");
    }
    if (used != t.size())
        throw DataError(path + ":" + std::to_string(line_no) + ": trailing junk in '" + t + "'");
    return v;
}

int parse_time(const std::string& field, const std::string& path, std::size_t line_no) {
    const double v = parse_number(field, path, line_no);
    const int t = static_cast<int>(v);
    if (v != static_cast<double>(t) || t < 1)
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": time index must be a positive integer");
    return t;
}

struct CsvReader {
    std::ifstream in;
    std::string path;
    std::size_t line_no = 0;

    CsvReader(const std::filesystem::path& p, const std::string& header) : path(p.string()) {
        in.open(p);
        if (!in) throw DataError("cannot open " + path);
        std::string line;
        if (!std::getline(in, line)) throw DataError(path + ": empty file");
        ++line_no;
        std::string got;
        for (char ch : line)
            if (ch != '\r' && ch != ' ') got.push_back(ch);
        if (got != header)
            throw DataError(path + ": expected header '" + header + "', got '" + trim(line) + "'");
    }

    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim(line).empty()) continue;
            fields = split_line(line);
            return true;
        }
        return false;
    }
};

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

SparseFTS ingest_sparse_csv(const std::filesystem::path& path) {
    CsvReader reader(path, "t,x,y");
    SparseFTS data;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() != 3)
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": expected 3 fields");
        const int t = parse_time(fields[0], reader.path, reader.line_no);
        const double x = parse_number(fields[1], reader.path, reader.line_no);
        const double y = parse_number(fields[2], reader.path, reader.line_no);
        if (x < 0.0 || x > 1.0)
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": location outside [0,1]");
        if (!std::isfinite(y))
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": non-finite measurement");
        if (static_cast<int>(data.obs.size()) < t) data.obs.resize(static_cast<std::size_t>(t));
        data.obs[static_cast<std::size_t>(t - 1)].push_back({x, y});
    }
    if (data.obs.empty()) throw DataError(path.string() + ": no data rows");
    return data;
}

ScalarTS ingest_scalar_csv(const std::filesystem::path& path) {
    CsvReader reader(path, "t,z");
    ScalarTS data;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() != 2)
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": expected 2 fields");
        const int t = parse_time(fields[0], reader.path, reader.line_no);
        if (static_cast<int>(data.z.size()) < t)
            data.z.resize(static_cast<std::size_t>(t), std::numeric_limits<double>::quiet_NaN());
        const std::string zfield = trim(fields[1]);
        if (zfield.empty()) continue;  // missing response
        const double z = parse_number(zfield, reader.path, reader.line_no);
        if (!std::isfinite(z))
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": non-finite response");
        data.z[static_cast<std::size_t>(t - 1)] = z;
    }
    if (data.z.empty()) throw DataError(path.string() + ": no data rows");
    return data;
}

DenseFTS ingest_dense_csv(const std::filesystem::path& path, const SpatialGrid& grid) {
    CsvReader reader(path, "t,x,value");
    std::vector<std::vector<char>> seen;
    std::vector<std::vector<double>> rows;
    std::vector<std::string> fields;
    while (reader.next(fields)) {
        if (fields.size() != 3)
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": expected 3 fields");
        const int t = parse_time(fields[0], reader.path, reader.line_no);
        const double x = parse_number(fields[1], reader.path, reader.line_no);
        const double v = parse_number(fields[2], reader.path, reader.line_no);
        int j = -1;
        for (int g = 0; g < grid.p; ++g)
            if (std::abs(grid.points[g] - x) <= 1e-9) {
                j = g;
                break;
            }
        if (j < 0)
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": location is not a grid node");
        if (!std::isfinite(v))
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": non-finite value");
        if (static_cast<int>(rows.size()) < t) {
            rows.resize(static_cast<std::size_t>(t),
                        std::vector<double>(static_cast<std::size_t>(grid.p), 0.0));
            seen.resize(static_cast<std::size_t>(t),
                        std::vector<char>(static_cast<std::size_t>(grid.p), 0));
        }
        rows[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(j)] = v;
        seen[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(j)] = 1;
    }
    if (rows.empty()) throw DataError(path.string() + ": no data rows");
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (int j = 0; j < grid.p; ++j)
            if (!seen[t][static_cast<std::size_t>(j)])
                throw DataError(path.string() + ": time " + std::to_string(t + 1) +
                                " is missing grid node " + std::to_string(j));
    DenseFTS data;
    data.curves.resize(static_cast<int>(rows.size()), grid.p);
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (int j = 0; j < grid.p; ++j)
            data.curves(static_cast<int>(t), j) = rows[t][static_cast<std::size_t>(j)];
    return data;
}

FilterSet ingest_filters_csv(const std::filesystem::path& path, const SpatialGrid& grid) {
    CsvReader reader(path, "k,x,b");
    std::vector<std::string> fields;
    struct Row {
        int k;
        double x, b;
    };
    std::vector<Row> entries;
    int max_k = 0;
    while (reader.next(fields)) {
        if (fields.size() != 3)
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": expected 3 fields");
        const double kd = parse_number(fields[0], reader.path, reader.line_no);
        const int k = static_cast<int>(kd);
        if (kd != static_cast<double>(k))
            throw DataError(reader.path + ":" + std::to_string(reader.line_no) +
                            ": lag must be an integer");
        entries.push_back(
            {k, parse_number(fields[1], reader.path, reader.line_no),
             parse_number(fields[2], reader.path, reader.line_no)});
        max_k = std::max(max_k, k < 0 ? -k : k);
    }
    if (entries.empty()) throw DataError(path.string() + ": no data rows");
    FilterSet filters = FilterSet::zeros(max_k, grid.p);
    for (const Row& r : entries) {
        int j = -1;
        for (int g = 0; g < grid.p; ++g)
            if (std::abs(grid.points[g] - r.x) <= 1e-9) {
                j = g;
                break;
            }
        if (j < 0) throw DataError(path.string() + ": filter location is not a grid node");
        filters.at(r.k)[j] = r.b;
    }
    return filters;
}

void write_sparse_csv(const std::filesystem::path& path, const SparseFTS& data) {
    std::ofstream out = open_out(path);
    out << "t,x,y\n";
    for (int t = 0; t < data.T(); ++t)
        for (const auto& o : data.obs[static_cast<std::size_t>(t)])
            out << (t + 1) << ',' << format_double(o.x) << ',' << format_double(o.y) << '\n';
}

void write_scalar_csv(const std::filesystem::path& path, const ScalarTS& data) {
    std::ofstream out = open_out(path);
    out << "t,z\n";
    for (int t = 0; t < data.T(); ++t) {
        const double z = data.z[static_cast<std::size_t>(t)];
        out << (t + 1) << ',';
        if (!ScalarTS::missing(z)) out << format_double(z);
        out << '\n';
    }
}

void write_dense_csv(const std::filesystem::path& path, const DenseFTS& data,
                     const SpatialGrid& grid) {
    std::ofstream out = open_out(path);
    out << "t,x,value\n";
    for (int t = 0; t < data.T(); ++t)
        for (int j = 0; j < grid.p; ++j)
            out << (t + 1) << ',' << format_double(grid.points[j]) << ','
                << format_double(data.curves(t, j)) << '\n';
}

void write_spectral_csv(const std::filesystem::path& path, const SpectralDensityEstimate& est,
                        const SpatialGrid& grid, const FrequencyGrid& fgrid) {
    std::ofstream out = open_out(path);
    out << "omega,x,y,re,im\n";
    for (int i = 0; i < fgrid.n_freq; ++i) {
        const CMatrix& F = est.values[static_cast<std::size_t>(i)];
        const std::string omega = format_double(fgrid.omegas[i]);
        for (int a = 0; a < grid.p; ++a)
            for (int b = 0; b < grid.p; ++b)
                out << omega << ',' << format_double(grid.points[a]) << ','
                    << format_double(grid.points[b]) << ',' << format_double(F(a, b).real())
                    << ',' << format_double(F(a, b).imag()) << '\n';
    }
}

void write_cross_spectral_csv(const std::filesystem::path& path,
                              const CrossSpectralEstimate& est, const SpatialGrid& grid,
                              const FrequencyGrid& fgrid) {
    std::ofstream out = open_out(path);
    out << "omega,x,re,im\n";
    for (int i = 0; i < fgrid.n_freq; ++i) {
        const CVector& f = est.values[static_cast<std::size_t>(i)];
        const std::string omega = format_double(fgrid.omegas[i]);
        for (int a = 0; a < grid.p; ++a)
            out << omega << ',' << format_double(grid.points[a]) << ','
                << format_double(f[a].real()) << ',' << format_double(f[a].imag()) << '\n';
    }
}

void write_filters_csv(const std::filesystem::path& path, const FilterSet& filters,
                       const SpatialGrid& grid) {
    std::ofstream out = open_out(path);
    out << "k,x,b\n";
    for (int k = -filters.M; k <= filters.M; ++k)
        for (int j = 0; j < grid.p; ++j)
            out << k << ',' << format_double(grid.points[j]) << ','
                << format_double(filters.at(k)[j]) << '\n';
}

void write_forecasts_csv(const std::filesystem::path& path, const std::vector<double>& zhat,
                         int s_first) {
    std::ofstream out = open_out(path);
    out << "t,z_hat\n";
    for (std::size_t i = 0; i < zhat.size(); ++i)
        out << (s_first + static_cast<int>(i)) << ',' << format_double(zhat[i]) << '\n';
}

}  // namespace sflr

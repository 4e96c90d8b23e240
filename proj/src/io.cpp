#include "gwinv/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

namespace gwinv {

namespace {

void write_bytes(std::ofstream& os, const void* p, std::size_t n)
{
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void read_bytes(std::ifstream& is, void* p, std::size_t n)
{
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("unexpected end of file");
}

void read_magic(std::ifstream& is, const char expect[4], const char* what)
{
    char magic[4];
    read_bytes(is, magic, 4);
    if (std::memcmp(magic, expect, 4) != 0)
        throw std::runtime_error(std::string("bad magic, expected ") + what);
}

std::ofstream open_out(const std::filesystem::path& path)
{
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    return is;
}

void rename_into_place(const std::filesystem::path& tmp, const std::filesystem::path& path)
{
    std::filesystem::rename(tmp, path);
}

} // namespace

void save_fld(const std::filesystem::path& path, const FieldSample& field)
{
    field.validate();
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os = open_out(tmp);
        write_bytes(os, "FLD1", 4);
        const std::uint32_t nx = static_cast<std::uint32_t>(field.grid.nx);
        const std::uint32_t ny = static_cast<std::uint32_t>(field.grid.ny);
        const std::uint32_t kind = static_cast<std::uint32_t>(field.kind);
        const std::uint64_t reserved = 0;
        write_bytes(os, &nx, 4);
        write_bytes(os, &ny, 4);
        write_bytes(os, &kind, 4);
        write_bytes(os, &reserved, 8);
        write_bytes(os, field.values.data(), field.values.size() * sizeof(double));
        if (!os) throw std::runtime_error("write failed: " + path.string());
    }
    rename_into_place(tmp, path);
}

FieldSample load_fld(const std::filesystem::path& path, const GridSpec& grid)
{
    std::ifstream is = open_in(path);
    read_magic(is, "FLD1", "FLD1");
    std::uint32_t nx, ny, kind;
    std::uint64_t reserved;
    read_bytes(is, &nx, 4);
    read_bytes(is, &ny, 4);
    read_bytes(is, &kind, 4);
    read_bytes(is, &reserved, 8);
    if (static_cast<int>(nx) != grid.nx || static_cast<int>(ny) != grid.ny)
        throw std::runtime_error("field file grid mismatch: " + path.string());
    FieldSample field;
    field.grid = grid;
    field.kind = static_cast<FieldKind>(kind);
    field.values.resize(static_cast<std::size_t>(nx) * ny);
    read_bytes(is, field.values.data(), field.values.size() * sizeof(double));
    return field;
}

void save_klb(const std::filesystem::path& path, const KLEBasis& basis, int m_stored)
{
    const int n = basis.size();
    if (m_stored < 1 || m_stored > n) throw std::invalid_argument("save_klb: bad m_stored");
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os = open_out(tmp);
        write_bytes(os, "KLB1", 4);
        const std::uint32_t un = static_cast<std::uint32_t>(n);
        const std::uint32_t um = static_cast<std::uint32_t>(m_stored);
        write_bytes(os, &un, 4);
        write_bytes(os, &um, 4);
        write_bytes(os, basis.eigenvalues.data(), static_cast<std::size_t>(n) * sizeof(double));
        write_bytes(os, basis.eigenvectors.data(),
                    static_cast<std::size_t>(m_stored) * n * sizeof(double));
        if (!os) throw std::runtime_error("write failed: " + path.string());
    }
    rename_into_place(tmp, path);
}

KLEBasis load_klb(const std::filesystem::path& path, const GridSpec& grid,
                  const CovarianceModel& model)
{
    std::ifstream is = open_in(path);
    read_magic(is, "KLB1", "KLB1");
    std::uint32_t n, m;
    read_bytes(is, &n, 4);
    read_bytes(is, &m, 4);
    if (static_cast<int>(n) != grid.cell_count())
        throw std::runtime_error("basis file size does not match grid: " + path.string());
    KLEBasis basis;
    basis.grid = grid;
    basis.model = model;
    basis.eigenvalues.resize(n);
    basis.eigenvectors.resize(static_cast<std::size_t>(m) * n);
    read_bytes(is, basis.eigenvalues.data(), n * sizeof(double));
    read_bytes(is, basis.eigenvectors.data(), static_cast<std::size_t>(m) * n * sizeof(double));

    basis.cumulative_energy.resize(n);
    double total = 0.0;
    for (const double v : basis.eigenvalues) total += v;
    double running = 0.0;
    for (std::uint32_t k = 0; k < n; ++k) {
        running += basis.eigenvalues[k];
        basis.cumulative_energy[k] = running / total;
    }
    // Only m eigenvectors are available; callers must truncate to <= m modes.
    basis.eigenvalues.resize(n);
    return basis;
}

std::string format_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content)
{
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open for writing: " + path.string());
        os << content;
        if (!os) throw std::runtime_error("write failed: " + path.string());
    }
    rename_into_place(tmp, path);
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows)
{
    std::ostringstream os;
    for (std::size_t i = 0; i < header.size(); ++i)
        os << header[i] << (i + 1 < header.size() ? "," : "");
    os << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << row[i] << (i + 1 < row.size() ? "," : "");
        os << "\n";
    }
    write_file_atomic(path, os.str());
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::vector<std::string>* header)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = line.find(',', start);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(start));
                break;
            }
            fields.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (first) {
            if (header) *header = fields;
            first = false;
        } else {
            rows.push_back(std::move(fields));
        }
    }
    return rows;
}

} // namespace gwinv

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gwinv/grid.hpp"
#include "gwinv/kle.hpp"

namespace gwinv {

// FLD1 field file: 24-byte header (magic "FLD1", u32 nx, u32 ny, u32 kind,
// u64 reserved), then nx*ny little-endian f64 values, row-major, x fastest.
void save_fld(const std::filesystem::path& path, const FieldSample& field);
FieldSample load_fld(const std::filesystem::path& path, const GridSpec& grid);

// KLB1 basis cache: magic "KLB1", u32 N, u32 m_stored, then all N eigenvalues
// and the first m_stored eigenvectors (N values each) as little-endian f64.
void save_klb(const std::filesystem::path& path, const KLEBasis& basis, int m_stored);
KLEBasis load_klb(const std::filesystem::path& path, const GridSpec& grid,
                  const CovarianceModel& model);

/// Serialize a double with 17 significant digits (round-trip exact).
std::string format_double(double v);

/// Write a CSV file with a header row, whole-file-then-rename.
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path,
                                               std::vector<std::string>* header = nullptr);

/// Whole-file-then-rename text write.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace gwinv
